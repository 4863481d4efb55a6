"""The analyst refinement loop over a preliminary partition.

Decisions (keep / merge into parent / split into children) are an
append-only event log; the current working family set is a fold over it,
so replaying a persisted log always reproduces the same state. Families
stay a partition of the corpus leaves by construction: merges swallow
exactly the sibling subtree's working clusters, splits replace one node
with its two children.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone

from ..cluster import LEAF, DendroTree, Partition
from ..preprocess import RequestLog
from ..template import Template

ACTION_KEEP = "keep"
ACTION_MERGE = "merge_into_parent"
ACTION_SPLIT = "split_into_children"
ACTIONS = (ACTION_KEEP, ACTION_MERGE, ACTION_SPLIT)

CRITERIA_TAGS = (
    "commands_and_order",
    "statement_structure",
    "identity_token_ignored",
)

DOWNLOAD_TOKENS = (b"wget", b"tftp", b"curl", b"ftpget")

UNASSIGNED_FAMILY = "unassigned"


class DecisionError(ValueError):
    """Raised when a decision is illegal for the node or session state."""


@dataclass
class Decision:
    node_id: int
    action: str
    rationale: str = ""
    criteria_tags: list[str] = field(default_factory=list)
    decided_at: datetime | None = None

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise DecisionError(f"unknown action {self.action!r}")
        bad = [t for t in self.criteria_tags if t not in CRITERIA_TAGS]
        if bad:
            raise DecisionError(f"unknown criteria tags {bad}")
        if self.decided_at is None:
            self.decided_at = datetime.now(timezone.utc)


@dataclass
class FamilyDef:
    family_id: str
    name: str
    member_clusters: list[int]
    kind: str = "loader"  # loader | scanner


@dataclass
class HostLabel:
    host: str
    family_id: str
    vote_counts: dict[str, int]


def family_id_for(node_id: int) -> str:
    return f"fam-{node_id}"


class RefinementSession:
    def __init__(self, tree: DendroTree, templates: dict[int, Template],
                 partition: Partition, corpus: list[RequestLog]):
        tree_log_ids = {n.log_id for n in tree.nodes if n.kind == LEAF}
        corpus_ids = {log.log_id for log in corpus}
        if tree_log_ids != corpus_ids:
            raise ValueError(
                "tree leaves and corpus disagree: "
                f"{len(tree_log_ids ^ corpus_ids)} log ids differ"
            )
        covered = sorted(
            leaf for c in partition.clusters for leaf in tree.leaves_under(c)
        )
        all_leaves = sorted(n.node_id for n in tree.nodes if n.kind == LEAF)
        if covered != all_leaves:
            raise ValueError("partition does not cover the tree leaves exactly")

        self.tree = tree
        self.templates = templates
        self.initial_partition = partition
        self.corpus = corpus
        self.corpus_by_id = {log.log_id: log for log in corpus}
        self.parents = tree.parent_map()
        self.decisions: list[Decision] = []
        self.working: set[int] = set(partition.clusters)
        # analyst-set overrides, keyed by family id
        self.family_names: dict[str, str] = {}
        self.family_kinds: dict[str, str] = {}

    # -- structural fold -----------------------------------------------

    def working_clusters(self) -> list[int]:
        return sorted(self.working)

    def _subtree_working(self, node_id: int) -> list[int]:
        """Working clusters lying inside the subtree rooted at node_id."""
        out = []
        stack = [node_id]
        while stack:
            nid = stack.pop()
            if nid in self.working:
                out.append(nid)
                continue
            node = self.tree.nodes[nid]
            if node.kind != LEAF:
                stack.append(node.left)
                stack.append(node.right)
        return out

    def check_decision(self, decision: Decision) -> None:
        nid = decision.node_id
        if nid < 0 or nid >= len(self.tree.nodes):
            raise KeyError(f"node {nid} does not exist")
        if decision.action == ACTION_SPLIT:
            if nid not in self.working:
                raise DecisionError(f"node {nid} is not a working cluster")
            if self.tree.nodes[nid].kind == LEAF:
                raise DecisionError(f"node {nid} is a leaf and cannot be split")
        elif decision.action == ACTION_MERGE:
            if nid not in self.working:
                raise DecisionError(f"node {nid} is not a working cluster")
            if nid == self.tree.root:
                raise DecisionError("the root has no parent to merge into")
            parent = self.parents[nid]
            node = self.tree.nodes[parent]
            sibling = node.right if node.left == nid else node.left
            if not self._covers_exactly(sibling):
                raise DecisionError(
                    f"sibling subtree of node {nid} is not covered by working clusters"
                )
        else:  # keep
            if nid not in self.working:
                raise DecisionError(f"node {nid} is not a working cluster")

    def _covers_exactly(self, node_id: int) -> bool:
        got = sorted(
            leaf for c in self._subtree_working(node_id)
            for leaf in self.tree.leaves_under(c)
        )
        return got == sorted(self.tree.leaves_under(node_id))

    def apply_decision(self, decision: Decision) -> list[int]:
        """Validate, record and fold one decision; returns the new working
        cluster set."""
        self.check_decision(decision)
        nid = decision.node_id
        if decision.action == ACTION_SPLIT:
            node = self.tree.nodes[nid]
            self.working.discard(nid)
            self.working.add(node.left)
            self.working.add(node.right)
        elif decision.action == ACTION_MERGE:
            parent = self.parents[nid]
            for c in self._subtree_working(parent):
                self.working.discard(c)
            self.working.discard(nid)
            self.working.add(parent)
        self.decisions.append(decision)
        return self.working_clusters()

    def active_decisions(self) -> dict[int, Decision]:
        """Latest decision per node (earlier ones are history)."""
        return {d.node_id: d for d in self.decisions}

    # -- families --------------------------------------------------------

    def scanner_suggested(self, node_id: int) -> bool:
        """True when no template token of the cluster is a download command;
        a hint for the analyst, never applied automatically."""
        template = self.templates.get(node_id)
        if template is None:
            return False
        return not any(s in DOWNLOAD_TOKENS for s in template.token_slots())

    def families(self) -> list[FamilyDef]:
        fams = [
            FamilyDef(
                family_id=family_id_for(nid),
                name=self.family_names.get(family_id_for(nid), family_id_for(nid)),
                member_clusters=[nid],
                kind=self.family_kinds.get(family_id_for(nid), "loader"),
            )
            for nid in self.working_clusters()
        ]
        fams.append(FamilyDef(
            family_id=UNASSIGNED_FAMILY,
            name=UNASSIGNED_FAMILY,
            member_clusters=[],
            kind="loader",
        ))
        return fams

    def set_family(self, family_id: str, name: str | None = None,
                   kind: str | None = None) -> FamilyDef:
        known = {f.family_id: f for f in self.families()}
        if family_id not in known:
            raise KeyError(f"unknown family {family_id}")
        if kind is not None:
            if kind not in ("loader", "scanner"):
                raise DecisionError(f"unknown family kind {kind!r}")
            self.family_kinds[family_id] = kind
        if name is not None:
            self.family_names[family_id] = name
        refreshed = {f.family_id: f for f in self.families()}
        return refreshed[family_id]

    def leaf_families(self) -> dict[int, str]:
        out = {}
        for nid in self.working:
            fid = family_id_for(nid)
            for leaf in self.tree.leaves_under(nid):
                out[leaf] = fid
        return out

    def family_name_of(self, family_id: str) -> str:
        return self.family_names.get(family_id, family_id)

    # -- host labeling -----------------------------------------------------

    def label_hosts(self) -> list[HostLabel]:
        """Majority vote per host over its request logs' families; ties go
        to the lexicographically smallest family name."""
        leaf_fam = self.leaf_families()
        votes: dict[str, Counter] = {}
        for node in self.tree.nodes:
            if node.kind != LEAF:
                continue
            log = self.corpus_by_id[node.log_id]
            fam = leaf_fam[node.node_id]
            votes.setdefault(log.source_host, Counter())[fam] += 1
        labels = []
        for host in sorted(votes):
            counts = votes[host]
            best = min(
                counts.items(),
                key=lambda kv: (-kv[1], self.family_name_of(kv[0]), kv[0]),
            )[0]
            labels.append(HostLabel(host=host, family_id=best,
                                    vote_counts=dict(sorted(counts.items()))))
        return labels


def start_session(tree: DendroTree, templates: dict[int, Template],
                  partition: Partition, corpus: list[RequestLog],
                  decisions: list[Decision] | None = None) -> RefinementSession:
    """Fresh session seeded with the cut partition (one provisional family
    per cluster); optionally replays a persisted decision log."""
    session = RefinementSession(tree, templates, partition, corpus)
    for d in decisions or []:
        session.apply_decision(d)
    return session


# ---------------------------------------------------------------------------
# persistence

def decision_to_dict(d: Decision) -> dict:
    from ..sessions import format_ts

    return {
        "node_id": d.node_id,
        "action": d.action,
        "rationale": d.rationale,
        "criteria_tags": list(d.criteria_tags),
        "decided_at": format_ts(d.decided_at),
    }


def decision_from_dict(raw: dict) -> Decision:
    from ..sessions import parse_ts

    return Decision(
        node_id=int(raw["node_id"]),
        action=raw["action"],
        rationale=raw.get("rationale", ""),
        criteria_tags=list(raw.get("criteria_tags", [])),
        decided_at=parse_ts(raw["decided_at"]),
    )


def write_decisions(path: str, decisions: list[Decision]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in decisions:
            json.dump(decision_to_dict(d), fh, separators=(",", ":"))
            fh.write("\n")


def read_decisions(path: str) -> list[Decision]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(decision_from_dict(json.loads(line)))
    return out


def write_families(path: str, session: RefinementSession) -> None:
    fams = [
        {
            "family_id": f.family_id,
            "name": f.name,
            "kind": f.kind,
            "member_clusters": f.member_clusters,
        }
        for f in session.families()
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"families": fams}, fh, indent=2, sort_keys=True)
        fh.write("\n")
