/** The explorer application: dendrogram + template panel + decision form.
 *
 * Family state is never mutated locally: every decision goes through the
 * workbench API and the partition shown is always the server's answer.
 * API failures show a banner while the cached view stays usable.
 */

import { WorkbenchApi } from "./api.js";
import type { DecisionAction, Partition } from "./api.js";
import { DecisionSubmitter } from "./decisions.js";
import { DendrogramView } from "./dendrogram.js";
import { TreeViewModel } from "./model.js";
import { renderTemplatePanel } from "./templates.js";

export class ExplorerApp {
  vm: TreeViewModel | null = null;
  view: DendrogramView | null = null;
  submitter: DecisionSubmitter;
  partition: Partition | null = null;

  readonly root: HTMLElement;
  readonly banner: HTMLElement;
  readonly chart: HTMLElement;
  readonly sidebar: HTMLElement;
  readonly templatePane: HTMLElement;
  readonly decisionLog: HTMLElement;

  constructor(private readonly doc: Document, private readonly api: WorkbenchApi) {
    this.submitter = new DecisionSubmitter(api);
    this.root = doc.createElement("div");
    this.root.className = "explorer";
    this.banner = this.section("banner");
    this.banner.hidden = true;
    this.chart = this.section("chart");
    this.sidebar = this.section("sidebar");
    this.templatePane = this.section("template");
    this.decisionLog = this.section("decision-log");
    this.sidebar.appendChild(this.templatePane);
    this.sidebar.appendChild(this.decisionLog);
  }

  private section(className: string): HTMLElement {
    const el = this.doc.createElement("div");
    el.className = className;
    this.root.appendChild(el);
    return el;
  }

  private showBanner(message: string): void {
    this.banner.textContent = message;
    this.banner.hidden = false;
  }

  private clearBanner(): void {
    this.banner.hidden = true;
    this.banner.textContent = "";
  }

  async load(): Promise<void> {
    const tree = await this.api.getTree();
    const partition = await this.api.getPartition();
    this.vm = new TreeViewModel(tree, partition.threshold);
    this.vm.setPartition(partition);
    this.partition = partition;
    this.view = new DendrogramView(this.doc, this.vm);
    this.view.onSelect = (nodeId) => void this.select(nodeId);
    this.chart.appendChild(this.view.svg);
    this.view.render();
    this.clearBanner();
  }

  /** Re-fetch the authoritative partition and recolor. */
  async refreshPartition(): Promise<void> {
    if (!this.vm || !this.view) return;
    try {
      const partition = await this.api.getPartition();
      this.partition = partition;
      this.vm.setPartition(partition);
      this.view.render();
      this.clearBanner();
    } catch (err) {
      this.showBanner(`workbench unreachable: ${String(err)} (showing cached view)`);
    }
  }

  async select(nodeId: number): Promise<void> {
    if (!this.vm || !this.view) return;
    this.vm.selectedNode = nodeId;
    this.view.render();
    try {
      const template = await this.api.getTemplate(nodeId);
      this.templatePane.replaceChildren(
        renderTemplatePanel(this.doc, template.slots, template.stability));
      this.clearBanner();
    } catch (err) {
      this.showBanner(`cannot load template for node ${nodeId}: ${String(err)}`);
    }
  }

  /** Submit a decision; on acceptance the partition is re-fetched from the
   * server so the view matches GET /api/partition exactly. */
  async decide(nodeId: number, action: DecisionAction, rationale = "",
               criteriaTags: string[] = []): Promise<string> {
    const outcome = await this.submitter.submit(nodeId, {
      action,
      rationale,
      criteria_tags: criteriaTags,
    });
    if (outcome.status === "accepted") {
      await this.refreshPartition();
      await this.refreshDecisionLog();
      return "accepted";
    }
    if (outcome.status === "rejected") {
      this.showBanner(`decision rejected: ${outcome.reason}`);
      return `rejected: ${outcome.reason}`;
    }
    this.showBanner(
      `offline: ${this.submitter.unsyncedCount} unsynced decision(s) queued`);
    return "queued";
  }

  async retryQueued(): Promise<void> {
    const { accepted } = await this.submitter.retry();
    if (accepted > 0) {
      await this.refreshPartition();
      await this.refreshDecisionLog();
    }
    if (this.submitter.unsyncedCount === 0) this.clearBanner();
  }

  async refreshDecisionLog(): Promise<void> {
    try {
      const { decisions } = await this.api.getDecisions();
      const list = this.doc.createElement("ol");
      for (const d of decisions) {
        const item = this.doc.createElement("li");
        item.textContent = `${d.decided_at} node ${d.node_id}: ${d.action}`
          + (d.rationale ? ` (${d.rationale})` : "");
        list.appendChild(item);
      }
      this.decisionLog.replaceChildren(list);
    } catch {
      // the log panel is cosmetic; keep the last good copy
    }
  }

  workingClusterIds(): number[] {
    return (this.partition?.clusters ?? []).map((c) => c.node_id).sort((a, b) => a - b);
  }
}

export { WorkbenchApi };
