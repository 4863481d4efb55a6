"""Agglomerative clustering of feature vectors and dendrogram cuts.

Euclidean metric, Ward linkage. The merge tree is binary: leaves are
request logs, every internal node records the inter-cluster distance at
which its children merged (the node height). Cutting at a threshold T
returns the maximal nodes whose height is below T, i.e. the partition
whose clusters would each merge only at or above T.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .vectorizer import FeatureVector

LEAF = "leaf"
INTERNAL = "internal"


@dataclass
class DendroNode:
    node_id: int
    kind: str  # LEAF | INTERNAL
    height: float
    size: int
    log_id: str | None = None
    left: int | None = None
    right: int | None = None


@dataclass
class DendroTree:
    nodes: list[DendroNode]  # indexed by node_id; leaves 0..N-1, merges N..2N-2
    root: int
    leaf_order: list[int] = field(default_factory=list)

    @property
    def n_leaves(self) -> int:
        return (len(self.nodes) + 1) // 2

    def leaves_under(self, node_id: int) -> list[int]:
        out = []
        stack = [node_id]
        while stack:
            n = self.nodes[stack.pop()]
            if n.kind == LEAF:
                out.append(n.node_id)
            else:
                stack.append(n.right)
                stack.append(n.left)
        return out

    def parent_map(self) -> dict[int, int]:
        parents = {}
        for n in self.nodes:
            if n.kind == INTERNAL:
                parents[n.left] = n.node_id
                parents[n.right] = n.node_id
        return parents


@dataclass
class Partition:
    threshold: float
    clusters: list[int]  # node ids, disjoint, covering all leaves


def dense_matrix(vectors: Sequence[FeatureVector], dims: int,
                 weights: np.ndarray | None = None) -> np.ndarray:
    """Scatter sparse count vectors into a dense (n, dims) float array.
    ``weights`` optionally rescales dimensions (e.g. per-n-gram-order
    scales built from Vocabulary.order_of_dim)."""
    X = np.zeros((len(vectors), dims), dtype=np.float64)
    for row, vec in enumerate(vectors):
        for idx, count in vec.counts.items():
            if idx >= dims or idx < 0:
                raise ValueError(
                    f"vector {vec.log_id!r} has dimension {idx} outside the "
                    f"vocabulary (dims={dims}): vocabulary mismatch"
                )
            X[row, idx] = count
    if weights is not None:
        X *= weights
    return X


def pairwise_distance(vectors: Sequence[FeatureVector], dims: int,
                      metric: str = "euclidean",
                      weights: np.ndarray | None = None) -> np.ndarray:
    """Symmetric distance matrix over the vectors."""
    if len(vectors) < 2:
        raise ValueError("need at least 2 vectors")
    from scipy.spatial.distance import pdist, squareform

    X = dense_matrix(vectors, dims, weights)
    D = squareform(pdist(X, metric=metric))
    np.fill_diagonal(D, 0.0)
    return D


def agglomerate(distances: np.ndarray, linkage: str = "ward",
                leaf_log_ids: Sequence[str] | None = None) -> DendroTree:
    """Merge the closest pair N-1 times, recording each merge distance as
    the new node's height.

    After merging clusters i and j (sizes ni, nj), the distance to every
    other cluster k follows the Lance-Williams form of Ward's criterion:

        d(ij,k) = sqrt(((ni+nk) d_ik^2 + (nj+nk) d_jk^2 - nk d_ij^2)
                       / (ni+nj+nk))

    Ties on the minimal distance break to the lexicographically smallest
    (min_node_id, max_node_id) pair so the same input always yields the
    same tree.
    """
    if linkage != "ward":
        raise ValueError(f"unsupported linkage {linkage!r}")
    n = distances.shape[0]
    if n < 2 or distances.shape != (n, n):
        raise ValueError("need a square distance matrix of at least 2 points")

    if leaf_log_ids is not None and len(leaf_log_ids) != n:
        raise ValueError("leaf_log_ids length must match the matrix")
    nodes = [
        DendroNode(node_id=i, kind=LEAF, height=0.0, size=1,
                   log_id=None if leaf_log_ids is None else leaf_log_ids[i])
        for i in range(n)
    ]
    D = distances.astype(np.float64).copy()
    np.fill_diagonal(D, np.inf)
    # active cluster ids in ascending order; positions track matrix rows, so
    # the row-major first occurrence of the minimum is exactly the
    # lexicographic (min_id, max_id) tie-break
    ids = list(range(n))
    sizes = np.ones(n, dtype=np.float64)

    for step in range(n - 1):
        m = D.shape[0]
        k = int(np.argmin(D))
        i, j = divmod(k, m)
        mn = D[i, j]
        a, b = ids[i], ids[j]
        ni, nj = sizes[i], sizes[j]
        height = float(mn)

        new_id = n + step
        # Ward never merges below an earlier merge; clamp away float dust
        # so child heights never exceed the parent's
        height = max(height, nodes[a].height, nodes[b].height)
        nodes.append(DendroNode(
            node_id=new_id, kind=INTERNAL, height=height,
            size=int(ni + nj), left=a, right=b,
        ))

        keep = np.ones(m, dtype=bool)
        keep[i] = keep[j] = False
        dik = D[i, keep]
        djk = D[j, keep]
        nk = sizes[keep]
        d_new = np.sqrt(np.maximum(
            ((ni + nk) * dik**2 + (nj + nk) * djk**2 - nk * mn * mn)
            / (ni + nj + nk),
            0.0,
        ))
        D = D[np.ix_(keep, keep)]
        m2 = D.shape[0]
        grown = np.full((m2 + 1, m2 + 1), np.inf)
        grown[:m2, :m2] = D
        grown[m2, :m2] = d_new
        grown[:m2, m2] = d_new
        D = grown
        ids = [ids[p] for p in range(m) if keep[p]]
        ids.append(new_id)
        sizes = np.append(sizes[keep], ni + nj)

    root = 2 * n - 2
    tree = DendroTree(nodes=nodes, root=root)
    tree.leaf_order = tree.leaves_under(root)
    return tree


def cut(tree: DendroTree, threshold: float) -> Partition:
    """Maximal nodes with height < threshold. Leaves count as height 0, so
    a leaf becomes its own cluster whenever its parent merged at or above
    the threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    clusters = []
    stack = [tree.root]
    while stack:
        node = tree.nodes[stack.pop()]
        if node.kind == LEAF or node.height < threshold:
            clusters.append(node.node_id)
        else:
            stack.append(node.right)
            stack.append(node.left)
    clusters.sort()
    return Partition(threshold=float(threshold), clusters=clusters)


def cluster_metrics(tree: DendroTree, partition: Partition,
                    truth: dict[int, str]) -> dict:
    """Cluster count plus Adjusted Rand Index against ground-truth labels
    keyed by leaf node id."""
    from sklearn.metrics import adjusted_rand_score

    leaf_to_cluster = {}
    for c in partition.clusters:
        for leaf in tree.leaves_under(c):
            leaf_to_cluster[leaf] = c
    leaves = sorted(leaf_to_cluster)
    missing = [l for l in leaves if l not in truth]
    if missing or len(truth) != len(leaves):
        raise ValueError("ground-truth labels must cover exactly the leaves")
    pred = [leaf_to_cluster[l] for l in leaves]
    true = [truth[l] for l in leaves]
    return {
        "cluster_count": len(partition.clusters),
        "ari": float(adjusted_rand_score(true, pred)),
    }


# ---------------------------------------------------------------------------
# serialization

def tree_to_dict(tree: DendroTree) -> dict:
    return {
        "root": tree.root,
        "leaf_order": list(tree.leaf_order),
        "nodes": [
            {
                "id": n.node_id,
                "kind": n.kind,
                "left": n.left,
                "right": n.right,
                "height": n.height,
                "size": n.size,
                "log_id": n.log_id,
            }
            for n in tree.nodes
        ],
    }


def tree_from_dict(d: dict) -> DendroTree:
    nodes = [
        DendroNode(
            node_id=nd["id"], kind=nd["kind"], height=float(nd["height"]),
            size=int(nd["size"]), log_id=nd.get("log_id"),
            left=nd.get("left"), right=nd.get("right"),
        )
        for nd in sorted(d["nodes"], key=lambda nd: nd["id"])
    ]
    return DendroTree(nodes=nodes, root=int(d["root"]),
                      leaf_order=[int(x) for x in d.get("leaf_order", [])])


def write_tree(path: str, tree: DendroTree) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(tree_to_dict(tree), fh, separators=(",", ":"))
        fh.write("\n")


def read_tree(path: str) -> DendroTree:
    with open(path, "r", encoding="utf-8") as fh:
        return tree_from_dict(json.load(fh))


def write_partition(path: str, partition: Partition) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"threshold": partition.threshold, "clusters": partition.clusters},
                  fh, separators=(",", ":"))
        fh.write("\n")


def read_partition(path: str) -> Partition:
    with open(path, "r", encoding="utf-8") as fh:
        d = json.load(fh)
    return Partition(threshold=float(d["threshold"]),
                     clusters=[int(c) for c in d["clusters"]])
