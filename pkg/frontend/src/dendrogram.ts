/** SVG dendrogram: right-angle links, threshold line, cluster coloring. */

import type { TreeViewModel } from "./model.js";

export interface DendrogramOptions {
  width: number;
  height: number;
  leafSpacing: number;
  marginTop: number;
  marginBottom: number;
}

export const DEFAULTS: DendrogramOptions = {
  width: 900,
  height: 520,
  leafSpacing: 14,
  marginTop: 16,
  marginBottom: 28,
};

const SVG_NS = "http://www.w3.org/2000/svg";

export class DendrogramView {
  readonly svg: SVGSVGElement;
  private readonly options: DendrogramOptions;
  onSelect: ((nodeId: number) => void) | null = null;
  private firstLeaf = 0;
  private lastLeaf = 0;

  constructor(
    private readonly doc: Document,
    private readonly vm: TreeViewModel,
    options: Partial<DendrogramOptions> = {},
  ) {
    this.options = { ...DEFAULTS, ...options };
    this.svg = doc.createElementNS(SVG_NS, "svg") as SVGSVGElement;
    this.svg.setAttribute("class", "dendrogram");
    this.svg.setAttribute("height", String(this.options.height));
    this.setLeafWindow(0, Math.ceil(this.options.width / this.options.leafSpacing));
  }

  /** virtualization window in leaf positions (inclusive) */
  setLeafWindow(first: number, last: number): void {
    this.firstLeaf = Math.max(0, first);
    this.lastLeaf = Math.min(this.vm.leafCount - 1, last);
  }

  private xOf(leafUnits: number): number {
    return (leafUnits - this.firstLeaf + 0.5) * this.options.leafSpacing;
  }

  private yOf(height: number): number {
    const usable = this.options.height - this.options.marginTop - this.options.marginBottom;
    const max = this.vm.rootHeight || 1;
    return this.options.marginTop + usable * (1 - height / max);
  }

  render(): void {
    while (this.svg.firstChild) this.svg.removeChild(this.svg.firstChild);
    const widthLeaves = this.lastLeaf - this.firstLeaf + 1;
    this.svg.setAttribute("width", String(widthLeaves * this.options.leafSpacing));

    const links = this.doc.createElementNS(SVG_NS, "g");
    links.setAttribute("class", "links");
    this.svg.appendChild(links);

    for (const nl of this.vm.visibleNodes(this.firstLeaf, this.lastLeaf)) {
      const node = this.vm.nodesById.get(nl.id);
      if (!node || node.kind === "leaf") continue;
      const left = this.vm.layout.get(node.left as number);
      const right = this.vm.layout.get(node.right as number);
      if (!left || !right) continue;
      const y = this.yOf(nl.y);
      const color = this.vm.clusterColorOf(nl.id) ?? "#999";
      const path = this.doc.createElementNS(SVG_NS, "path");
      path.setAttribute(
        "d",
        `M ${this.xOf(left.x)} ${this.yOf(left.y)} V ${y} ` +
          `H ${this.xOf(right.x)} V ${this.yOf(right.y)}`,
      );
      path.setAttribute("fill", "none");
      path.setAttribute("stroke", color);
      path.setAttribute("data-node", String(nl.id));
      path.setAttribute("class", "link");
      path.addEventListener("click", () => this.onSelect?.(nl.id));
      links.appendChild(path);
    }

    // leaf markers inside the window, colored by their working cluster
    const leaves = this.doc.createElementNS(SVG_NS, "g");
    leaves.setAttribute("class", "leaves");
    this.svg.appendChild(leaves);
    for (let pos = this.firstLeaf; pos <= this.lastLeaf; pos++) {
      const leafId = this.vm.tree.leaf_order[pos];
      if (leafId === undefined) continue;
      const mark = this.doc.createElementNS(SVG_NS, "circle");
      mark.setAttribute("cx", String(this.xOf(pos)));
      mark.setAttribute("cy", String(this.yOf(0)));
      mark.setAttribute("r", "3");
      mark.setAttribute("fill", this.vm.clusterColorOf(leafId) ?? "#999");
      mark.setAttribute("data-node", String(leafId));
      mark.setAttribute("class", "leaf");
      mark.addEventListener("click", () => this.onSelect?.(leafId));
      leaves.appendChild(mark);
    }

    // the threshold as a horizontal line across the whole view
    const line = this.doc.createElementNS(SVG_NS, "line");
    const y = this.yOf(this.vm.threshold);
    line.setAttribute("x1", "0");
    line.setAttribute("x2", String(widthLeaves * this.options.leafSpacing));
    line.setAttribute("y1", String(y));
    line.setAttribute("y2", String(y));
    line.setAttribute("class", "threshold-line");
    line.setAttribute("stroke", "#d62728");
    line.setAttribute("stroke-dasharray", "6 3");
    this.svg.appendChild(line);

    if (this.vm.selectedNode !== null) {
      const nl = this.vm.layout.get(this.vm.selectedNode);
      if (nl) {
        const halo = this.doc.createElementNS(SVG_NS, "circle");
        halo.setAttribute("cx", String(this.xOf(nl.x)));
        halo.setAttribute("cy", String(this.yOf(nl.y)));
        halo.setAttribute("r", "6");
        halo.setAttribute("class", "selection");
        halo.setAttribute("fill", "none");
        halo.setAttribute("stroke", "#000");
        this.svg.appendChild(halo);
      }
    }
  }
}
