/** Typed client for the workbench HTTP JSON API. */

export interface TreeNode {
  id: number;
  kind: "leaf" | "internal";
  left: number | null;
  right: number | null;
  height: number;
  size: number;
  log_id: string | null;
}

export interface Tree {
  root: number;
  leaf_order: number[];
  nodes: TreeNode[];
}

export interface PartitionCluster {
  node_id: number;
  size: number;
  height: number;
  family_id: string;
}

export interface Partition {
  threshold: number;
  clusters: PartitionCluster[];
}

export type TemplateSlot = { t: string } | { gap: true };

export interface NodeTemplate {
  node_id: number;
  slots: TemplateSlot[];
  stability: number;
  rendered: string;
}

export interface FamilyInfo {
  family_id: string;
  name: string;
  kind: "loader" | "scanner";
  member_clusters: number[];
  leaf_count: number;
  scanner_suggested: boolean;
}

export type DecisionAction = "keep" | "merge_into_parent" | "split_into_children";

export interface DecisionRequest {
  action: DecisionAction;
  rationale?: string;
  criteria_tags?: string[];
}

export interface DecisionResponse {
  node_id: number;
  action: DecisionAction;
  working_clusters: number[];
}

export interface DecisionRecord {
  node_id: number;
  action: DecisionAction;
  rationale: string;
  criteria_tags: string[];
  decided_at: string;
}

export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class WorkbenchApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body: keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  getTree(): Promise<Tree> {
    return this.request<Tree>("/api/tree");
  }

  getPartition(): Promise<Partition> {
    return this.request<Partition>("/api/partition");
  }

  getTemplate(nodeId: number): Promise<NodeTemplate> {
    return this.request<NodeTemplate>(`/api/node/${nodeId}/template`);
  }

  getFamilies(): Promise<{ families: FamilyInfo[] }> {
    return this.request<{ families: FamilyInfo[] }>("/api/families");
  }

  getDecisions(): Promise<{ decisions: DecisionRecord[] }> {
    return this.request<{ decisions: DecisionRecord[] }>("/api/decisions");
  }

  postDecision(nodeId: number, body: DecisionRequest): Promise<DecisionResponse> {
    return this.request<DecisionResponse>(`/api/node/${nodeId}/decision`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }
}
