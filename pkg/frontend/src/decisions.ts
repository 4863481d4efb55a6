/** Decision submission with an offline queue: server-rejected decisions
 * surface their reason, network failures queue for retry and stay visibly
 * unsynced until the workbench accepts them. */

import { ApiError, WorkbenchApi } from "./api.js";
import type { DecisionRequest, DecisionResponse } from "./api.js";

export interface QueuedDecision {
  nodeId: number;
  body: DecisionRequest;
}

export type DecisionOutcome =
  | { status: "accepted"; response: DecisionResponse }
  | { status: "rejected"; reason: string }
  | { status: "queued" };

export class DecisionSubmitter {
  private readonly queue: QueuedDecision[] = [];

  constructor(private readonly api: WorkbenchApi) {}

  get unsyncedCount(): number {
    return this.queue.length;
  }

  pending(): readonly QueuedDecision[] {
    return this.queue;
  }

  async submit(nodeId: number, body: DecisionRequest): Promise<DecisionOutcome> {
    try {
      const response = await this.api.postDecision(nodeId, body);
      return { status: "accepted", response };
    } catch (err) {
      if (err instanceof ApiError) {
        // the server judged the decision illegal: do not retry
        return { status: "rejected", reason: err.detail };
      }
      this.queue.push({ nodeId, body });
      return { status: "queued" };
    }
  }

  /** Retry queued decisions in order; stops at the first network failure
   * so ordering is preserved. Server rejections are dropped with their
   * reasons returned. */
  async retry(): Promise<{ accepted: number; rejected: string[] }> {
    let accepted = 0;
    const rejected: string[] = [];
    while (this.queue.length > 0) {
      const next = this.queue[0];
      try {
        await this.api.postDecision(next.nodeId, next.body);
        this.queue.shift();
        accepted += 1;
      } catch (err) {
        if (err instanceof ApiError) {
          this.queue.shift();
          rejected.push(err.detail);
        } else {
          break; // still offline
        }
      }
    }
    return { accepted, rejected };
  }
}
