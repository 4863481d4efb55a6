/** View-model for the dendrogram: node layout, family colors, threshold
 * position and leaf-window virtualization. Pure computation, no DOM. */

import type { Partition, Tree, TreeNode } from "./api.js";

export interface NodeLayout {
  id: number;
  x: number; // leaf-order units: leaves sit at 0..n-1, parents at child midpoints
  y: number; // merge height (0 for leaves)
  leafSpan: [number, number]; // inclusive range of leaf positions underneath
}

// distinguishable palette; families beyond its length wrap around
export const PALETTE = [
  "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
  "#4e79a7", "#f28e2b", "#59a14f", "#b07aa1", "#76b7b2",
];

export class TreeViewModel {
  readonly nodesById = new Map<number, TreeNode>();
  readonly layout = new Map<number, NodeLayout>();
  readonly leafCount: number;
  readonly rootHeight: number;
  private readonly familyColors = new Map<string, string>();
  private readonly collapsed = new Set<number>();
  selectedNode: number | null = null;
  threshold: number;
  partition: Partition | null = null;

  constructor(readonly tree: Tree, threshold: number) {
    this.threshold = threshold;
    for (const node of tree.nodes) this.nodesById.set(node.id, node);
    this.leafCount = tree.leaf_order.length;
    this.rootHeight = this.nodesById.get(tree.root)?.height ?? 0;
    this.computeLayout();
  }

  /** Leaves take consecutive x positions in the tree's plotting order;
   * every internal node sits at the midpoint of its children. */
  private computeLayout(): void {
    const leafX = new Map<number, number>();
    this.tree.leaf_order.forEach((leafId, i) => leafX.set(leafId, i));
    const place = (id: number): NodeLayout => {
      const cached = this.layout.get(id);
      if (cached) return cached;
      const node = this.nodesById.get(id);
      if (!node) throw new Error(`tree is missing node ${id}`);
      let computed: NodeLayout;
      if (node.kind === "leaf") {
        const x = leafX.get(id);
        if (x === undefined) throw new Error(`leaf ${id} missing from leaf_order`);
        computed = { id, x, y: 0, leafSpan: [x, x] };
      } else {
        const left = place(node.left as number);
        const right = place(node.right as number);
        computed = {
          id,
          x: (left.x + right.x) / 2,
          y: node.height,
          leafSpan: [
            Math.min(left.leafSpan[0], right.leafSpan[0]),
            Math.max(left.leafSpan[1], right.leafSpan[1]),
          ],
        };
      }
      this.layout.set(id, computed);
      return computed;
    };
    // iterative seeding avoids recursion depth issues on degenerate trees
    const order = [...this.tree.nodes].sort((a, b) => a.id - b.id);
    for (const node of order) {
      if (node.kind === "leaf") place(node.id);
    }
    for (const node of order) place(node.id);
  }

  /** Stable color per family id: once assigned, an id keeps its color for
   * the lifetime of the view. */
  colorFor(familyId: string): string {
    let color = this.familyColors.get(familyId);
    if (!color) {
      color = PALETTE[this.familyColors.size % PALETTE.length];
      this.familyColors.set(familyId, color);
    }
    return color;
  }

  setPartition(partition: Partition): void {
    this.partition = partition;
    for (const cluster of partition.clusters) this.colorFor(cluster.family_id);
  }

  /** family color of the working cluster containing the node, if any */
  clusterColorOf(nodeId: number): string | null {
    if (!this.partition) return null;
    const span = this.layout.get(nodeId)?.leafSpan;
    if (!span) return null;
    for (const cluster of this.partition.clusters) {
      const cspan = this.layout.get(cluster.node_id)?.leafSpan;
      if (cspan && cspan[0] <= span[0] && span[1] <= cspan[1]) {
        return this.colorFor(cluster.family_id);
      }
    }
    return null;
  }

  /** Equivalent of the server-side cut at the current threshold, computed
   * client-side for immediate slider feedback (the server stays
   * authoritative for family state). */
  clientCut(threshold: number): number[] {
    const out: number[] = [];
    const stack = [this.tree.root];
    while (stack.length > 0) {
      const id = stack.pop() as number;
      const node = this.nodesById.get(id) as TreeNode;
      if (node.kind === "leaf" || node.height < threshold) {
        out.push(id);
      } else {
        stack.push(node.left as number, node.right as number);
      }
    }
    return out.sort((a, b) => a - b);
  }

  toggleCollapsed(nodeId: number): void {
    if (this.collapsed.has(nodeId)) this.collapsed.delete(nodeId);
    else this.collapsed.add(nodeId);
  }

  isCollapsed(nodeId: number): boolean {
    return this.collapsed.has(nodeId);
  }

  /** Nodes whose leaf span intersects the visible leaf window; collapsed
   * subtrees contribute only their root. This is what keeps rendering
   * responsive at hundreds of leaves. */
  visibleNodes(firstLeaf: number, lastLeaf: number): NodeLayout[] {
    const out: NodeLayout[] = [];
    const stack = [this.tree.root];
    while (stack.length > 0) {
      const id = stack.pop() as number;
      const nl = this.layout.get(id) as NodeLayout;
      if (nl.leafSpan[1] < firstLeaf || nl.leafSpan[0] > lastLeaf) continue;
      out.push(nl);
      const node = this.nodesById.get(id) as TreeNode;
      if (node.kind === "internal" && !this.collapsed.has(id)) {
        stack.push(node.left as number, node.right as number);
      }
    }
    return out;
  }
}
