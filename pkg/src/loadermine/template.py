"""Consensus templates per dendrogram node via recursive pairwise alignment.

A template is a slot sequence: token slots hold the byte strings shared
by every request log under the node, GAP slots mark regions where the
logs diverge. Leaves start as their full token sequence; every internal
node aligns its children's templates, keeps the identically-matching
tokens and collapses everything else into single GAP slots.

The default scoring (match +1, gaps free, no mismatch alignment) makes
the optimal alignment a longest common subsequence of the token slots;
the parameters stay adjustable for experimentation.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .cluster import LEAF, DendroTree
from .tokenizer import TokenSequence

GAP = None  # gap slot marker inside Template.slots


@dataclass
class AlignmentParams:
    match_score: float = 1.0
    gap_token_penalty: float = 0.0  # per gap move (nonpositive)
    gap_vs_gap_score: float = 0.0

    def __post_init__(self):
        if self.match_score <= 0:
            raise ValueError("match_score must be positive")
        if self.gap_token_penalty > 0:
            raise ValueError("gap_token_penalty must be nonpositive")


@dataclass
class Template:
    node_id: int | None
    slots: list  # bytes for token slots, GAP (None) for placeholders

    @property
    def stability(self) -> float:
        if not self.slots:
            return 1.0
        token_slots = sum(1 for s in self.slots if s is not GAP)
        return token_slots / len(self.slots)

    def token_slots(self) -> list[bytes]:
        return [s for s in self.slots if s is not GAP]


def template_from_sequence(seq: TokenSequence, node_id: int | None = None) -> Template:
    return Template(node_id=node_id, slots=list(seq.parts))


def _collapse_gaps(slots: Iterable) -> list:
    out = []
    for s in slots:
        if s is GAP and out and out[-1] is GAP:
            continue
        out.append(s)
    return out


def _matched_pairs(a: list, b: list, params: AlignmentParams) -> list[tuple[int, int]]:
    """Optimal-score global alignment; returns the aligned identical-token
    index pairs.

    DP over score H with moves: diagonal (identical tokens: +match, two
    gaps: +gap_vs_gap, gap against token: +0; differing tokens may not
    align), and gap moves at gap_token_penalty each. Rows vectorize via a
    running max: H[i,j] = max(c[j], H[i,j-1]+g) with c[j] the best of the
    diagonal and up moves, so H[i] = maxaccum(c - g*j) + g*j. Traceback
    prefers diagonal, then up, then left.
    """
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return []
    codes: dict[bytes, int] = {}

    def code(slot) -> int:
        if slot is GAP:
            return -1
        c = codes.get(slot)
        if c is None:
            c = len(codes)
            codes[slot] = c
        return c

    ca = np.array([code(s) for s in a], dtype=np.int64)
    cb = np.array([code(s) for s in b], dtype=np.int64)
    g = params.gap_token_penalty
    jg = g * np.arange(1, m + 1)

    H = np.empty((n + 1, m + 1), dtype=np.float64)
    H[0, 0] = 0.0
    H[0, 1:] = jg
    H[:, 0] = g * np.arange(n + 1)
    neg_inf = -np.inf
    for i in range(1, n + 1):
        ci = ca[i - 1]
        if ci < 0:
            # gap slot: aligns with a token at 0, with another gap slot at
            # gap_vs_gap_score
            diag_score = np.where(cb < 0, params.gap_vs_gap_score, 0.0)
        else:
            diag_score = np.where(cb == ci, params.match_score,
                                  np.where(cb < 0, 0.0, neg_inf))
        cand = np.maximum(H[i - 1, :-1] + diag_score, H[i - 1, 1:] + g)
        H[i, 1:] = np.maximum.accumulate(cand - jg) + jg
        H[i, 0] = H[i - 1, 0] + g

    def diag(ci: int, cj: int) -> float:
        if ci >= 0 and cj >= 0:
            return params.match_score if ci == cj else neg_inf
        if ci < 0 and cj < 0:
            return params.gap_vs_gap_score
        return 0.0

    pairs = []
    i, j = n, m
    while i > 0 and j > 0:
        ci, cj = int(ca[i - 1]), int(cb[j - 1])
        d = diag(ci, cj)
        if d > neg_inf and H[i, j] == H[i - 1, j - 1] + d:
            if ci >= 0 and cj >= 0:
                pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif H[i, j] == H[i - 1, j] + g:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return pairs


def _slot_sort_key(t: Template) -> tuple:
    return (len(t.slots), tuple(b"" if s is GAP else b"\x00" + s for s in t.slots))


def align(a: Template, b: Template, params: AlignmentParams | None = None) -> Template:
    """Align two templates; matched identical tokens survive, everything
    else becomes a GAP, adjacent GAPs collapse to one.

    The operand order is canonicalized first so align(a, b) and
    align(b, a) give the same slot sequence.
    """
    params = params or AlignmentParams()
    if _slot_sort_key(b) < _slot_sort_key(a):
        a, b = b, a
    pairs = _matched_pairs(a.slots, b.slots, params)
    slots = []
    prev_i, prev_j = -1, -1
    for i, j in pairs:
        if i > prev_i + 1 or j > prev_j + 1:
            slots.append(GAP)
        slots.append(a.slots[i])
        prev_i, prev_j = i, j
    if prev_i < len(a.slots) - 1 or prev_j < len(b.slots) - 1:
        slots.append(GAP)
    return Template(node_id=None, slots=_collapse_gaps(slots))


def build_templates(tree: DendroTree, sequences: dict[str, TokenSequence],
                    params: AlignmentParams | None = None) -> dict[int, Template]:
    """Bottom-up template for every tree node; each node aligned exactly
    once from its children's finished templates."""
    params = params or AlignmentParams()
    templates: dict[int, Template] = {}
    for node in tree.nodes:  # node ids ascend in merge order: children first
        if node.kind == LEAF:
            seq = sequences[node.log_id]
            templates[node.node_id] = template_from_sequence(seq, node.node_id)
        else:
            merged = align(templates[node.left], templates[node.right], params)
            merged.node_id = node.node_id
            templates[node.node_id] = merged
    return templates


GAP_MARK = "⟨*⟩"  # rendered gap: ⟨*⟩


def render_template(t: Template) -> str:
    """Printable, unambiguous rendering: printable ASCII stays itself,
    backslash doubles, anything else becomes \\xNN, gaps become ⟨*⟩."""
    out = []
    for slot in t.slots:
        if slot is GAP:
            out.append(GAP_MARK)
            continue
        for byte in slot:
            if byte == 0x5C:
                out.append("\\\\")
            elif 0x20 <= byte <= 0x7E:
                out.append(chr(byte))
            else:
                out.append(f"\\x{byte:02x}")
    return "".join(out)


# ---------------------------------------------------------------------------
# serialization

def template_to_dict(t: Template) -> dict:
    slots = []
    for s in t.slots:
        if s is GAP:
            slots.append({"gap": True})
        else:
            slots.append({"t": base64.b64encode(s).decode("ascii")})
    return {"node_id": t.node_id, "slots": slots, "stability": t.stability}


def template_from_dict(d: dict) -> Template:
    slots = []
    for s in d["slots"]:
        if s.get("gap"):
            slots.append(GAP)
        else:
            slots.append(base64.b64decode(s["t"]))
    return Template(node_id=d["node_id"], slots=slots)


def write_templates(path: str, templates: dict[int, Template]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for node_id in sorted(templates):
            json.dump(template_to_dict(templates[node_id]), fh, separators=(",", ":"))
            fh.write("\n")


def read_templates(path: str) -> dict[int, Template]:
    templates = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            t = template_from_dict(json.loads(line))
            templates[t.node_id] = t
    return templates
