import { describe, expect, it } from "vitest";

import type { Partition, Tree } from "../src/api.js";
import { PALETTE, TreeViewModel } from "../src/model.js";

// three leaves: (0,1) merge at 1.0, root joins leaf 2 at 5.0
const TREE: Tree = {
  root: 4,
  leaf_order: [0, 1, 2],
  nodes: [
    { id: 0, kind: "leaf", left: null, right: null, height: 0, size: 1, log_id: "a" },
    { id: 1, kind: "leaf", left: null, right: null, height: 0, size: 1, log_id: "b" },
    { id: 2, kind: "leaf", left: null, right: null, height: 0, size: 1, log_id: "c" },
    { id: 3, kind: "internal", left: 0, right: 1, height: 1.0, size: 2, log_id: null },
    { id: 4, kind: "internal", left: 3, right: 2, height: 5.0, size: 3, log_id: null },
  ],
};

const PARTITION: Partition = {
  threshold: 2.0,
  clusters: [
    { node_id: 3, size: 2, height: 1.0, family_id: "fam-3" },
    { node_id: 2, size: 1, height: 0.0, family_id: "fam-2" },
  ],
};

describe("TreeViewModel layout", () => {
  it("places leaves in plotting order and parents at midpoints", () => {
    const vm = new TreeViewModel(TREE, 2.0);
    expect(vm.layout.get(0)?.x).toBe(0);
    expect(vm.layout.get(1)?.x).toBe(1);
    expect(vm.layout.get(2)?.x).toBe(2);
    expect(vm.layout.get(3)?.x).toBe(0.5);
    expect(vm.layout.get(4)?.x).toBe(1.25);
    expect(vm.layout.get(4)?.leafSpan).toEqual([0, 2]);
  });

  it("maps node heights onto the y axis data", () => {
    const vm = new TreeViewModel(TREE, 2.0);
    expect(vm.layout.get(3)?.y).toBe(1.0);
    expect(vm.layout.get(4)?.y).toBe(5.0);
    expect(vm.rootHeight).toBe(5.0);
  });
});

describe("family colors", () => {
  it("assigns stable colors across re-renders", () => {
    const vm = new TreeViewModel(TREE, 2.0);
    vm.setPartition(PARTITION);
    const first = vm.colorFor("fam-3");
    vm.setPartition(PARTITION);
    vm.setPartition({ ...PARTITION, clusters: [...PARTITION.clusters].reverse() });
    expect(vm.colorFor("fam-3")).toBe(first);
    expect(vm.colorFor("fam-2")).not.toBe(first);
    expect(PALETTE).toContain(first);
  });

  it("colors nodes by their covering working cluster", () => {
    const vm = new TreeViewModel(TREE, 2.0);
    vm.setPartition(PARTITION);
    expect(vm.clusterColorOf(0)).toBe(vm.colorFor("fam-3"));
    expect(vm.clusterColorOf(1)).toBe(vm.colorFor("fam-3"));
    expect(vm.clusterColorOf(2)).toBe(vm.colorFor("fam-2"));
    // the root spans both clusters, so it has no single family color
    expect(vm.clusterColorOf(4)).toBeNull();
  });
});

describe("client-side cut", () => {
  it("matches the threshold partition semantics", () => {
    const vm = new TreeViewModel(TREE, 2.0);
    expect(vm.clientCut(2.0)).toEqual([2, 3]);
    expect(vm.clientCut(0.5)).toEqual([0, 1, 2]);
    expect(vm.clientCut(10.0)).toEqual([4]);
    // a cluster merged exactly at the threshold splits (strict inequality)
    expect(vm.clientCut(1.0)).toEqual([0, 1, 2]);
  });
});

describe("virtualized visibility", () => {
  it("returns only subtrees intersecting the leaf window", () => {
    const vm = new TreeViewModel(TREE, 2.0);
    const visible = vm.visibleNodes(2, 2).map((n) => n.id).sort();
    expect(visible).toEqual([2, 4]); // leaf 2 and the root that spans it
    const all = vm.visibleNodes(0, 2).map((n) => n.id).sort();
    expect(all).toEqual([0, 1, 2, 3, 4]);
  });

  it("collapsed subtrees contribute only their root", () => {
    const vm = new TreeViewModel(TREE, 2.0);
    vm.toggleCollapsed(3);
    const visible = vm.visibleNodes(0, 2).map((n) => n.id).sort();
    expect(visible).toEqual([2, 3, 4]);
    vm.toggleCollapsed(3);
    expect(vm.isCollapsed(3)).toBe(false);
  });
});
