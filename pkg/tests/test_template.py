from __future__ import annotations

import random
from itertools import combinations

import numpy as np
import pytest

from loadermine.cluster import agglomerate
from loadermine.template import (
    GAP,
    AlignmentParams,
    Template,
    align,
    build_templates,
    read_templates,
    render_template,
    template_from_dict,
    template_from_sequence,
    template_to_dict,
    write_templates,
)
from loadermine.tokenizer import sequence_from_parts


def tpl(*slots) -> Template:
    return Template(node_id=None, slots=list(slots))


def brute_force_lcs_len(a: list[bytes], b: list[bytes]) -> int:
    """Maximal common-subsequence length by enumerating subsequences of the
    shorter side."""
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    best = 0
    for r in range(len(short), 0, -1):
        if r <= best:
            break
        for combo in combinations(range(len(short)), r):
            pos = 0
            ok = True
            for k in combo:
                item = short[k]
                while pos < len(long_) and long_[pos] != item:
                    pos += 1
                if pos == len(long_):
                    ok = False
                    break
                pos += 1
            if ok:
                best = r
                break
    return best


def is_subsequence(sub: list[bytes], full: list[bytes]) -> bool:
    it = iter(full)
    return all(any(x == y for y in it) for x in sub)


# -- align -------------------------------------------------------------------

def test_align_single_divergent_token():
    out = align(tpl(b"cd", b" ", b"tmp"), tpl(b"cd", b" ", b"var"))
    assert out.slots == [b"cd", b" ", GAP]


def test_align_identity_for_gap_free_template():
    x = tpl(b"rm", b" -", b"rf", b" ", b"bot")
    assert align(x, x).slots == x.slots


def test_align_nothing_in_common():
    assert align(tpl(b"a"), tpl(b"b")).slots == [GAP]


def test_align_collapses_middle_columns():
    out = align(tpl(b"a", b"x", b"b"), tpl(b"a", b"y", b"y", b"b"))
    assert out.slots == [b"a", GAP, b"b"]


def test_align_empty_inputs():
    assert align(tpl(), tpl()).slots == []
    assert align(tpl(), tpl(b"a")).slots == [GAP]


def test_align_symmetric():
    rng = random.Random(13)
    alphabet = [b"a", b"b", b"c", b"d"]
    for _ in range(200):
        a = tpl(*[rng.choice(alphabet) for _ in range(rng.randint(0, 8))])
        b = tpl(*[rng.choice(alphabet) for _ in range(rng.randint(0, 8))])
        assert align(a, b).slots == align(b, a).slots


def test_align_idempotent_with_gaps():
    t = tpl(GAP, b"cd", b" ", GAP, b"x", GAP)
    assert align(t, t).slots == t.slots


def test_align_gap_slots_stay_variable():
    # a gap in a child marks divergence below it; the parent keeps it even
    # when the other child has a token there
    out = align(tpl(b"a", GAP, b"b"), tpl(b"a", b"t", b"b"))
    assert out.slots == [b"a", GAP, b"b"]


def test_align_token_slot_count_matches_brute_force():
    rng = random.Random(99)
    alphabet = [b"a", b"b", b"c", b"d"]
    for _ in range(300):
        a = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
        b = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
        out = align(tpl(*a), tpl(*b))
        assert len(out.token_slots()) == brute_force_lcs_len(a, b)


def test_no_adjacent_gaps_invariant():
    rng = random.Random(5)
    alphabet = [b"x", b"y", b"z"]
    for _ in range(100):
        a = tpl(*[rng.choice(alphabet) for _ in range(rng.randint(0, 10))])
        b = tpl(*[rng.choice(alphabet) for _ in range(rng.randint(0, 10))])
        slots = align(a, b).slots
        assert not any(slots[i] is GAP and slots[i + 1] is GAP
                       for i in range(len(slots) - 1))


def test_alignment_params_validation():
    with pytest.raises(ValueError):
        AlignmentParams(match_score=0.0)
    with pytest.raises(ValueError):
        AlignmentParams(gap_token_penalty=0.5)


# -- build_templates -----------------------------------------------------------

def euclidean(X):
    return np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))


def test_two_identical_leaves():
    seqs = {
        "a": sequence_from_parts([b"cd", b" ", b"tmp"], "a"),
        "b": sequence_from_parts([b"cd", b" ", b"tmp"], "b"),
    }
    tree = agglomerate(euclidean(np.array([[0.0], [0.0]])), leaf_log_ids=["a", "b"])
    templates = build_templates(tree, seqs)
    root = templates[tree.root]
    assert root.slots == [b"cd", b" ", b"tmp"]
    assert root.stability == 1.0


def test_three_leaf_recursion():
    seqs = {
        "a": sequence_from_parts([b"cd", b" ", b"tmp"], "a"),
        "b": sequence_from_parts([b"cd", b" ", b"var"], "b"),
        "c": sequence_from_parts([b"cd", b" ", b"opt"], "c"),
    }
    tree = agglomerate(euclidean(np.array([[0.0], [0.1], [5.0]])),
                       leaf_log_ids=["a", "b", "c"])
    templates = build_templates(tree, seqs)
    assert templates[tree.root].slots == [b"cd", b" ", GAP]
    assert templates[tree.root].stability == pytest.approx(2 / 3)


def test_leaf_templates_equal_sequences_and_have_no_gaps():
    seqs = {
        "a": sequence_from_parts([b"ps", b"\r\n"], "a"),
        "b": sequence_from_parts([b"ls", b"\r\n"], "b"),
    }
    tree = agglomerate(euclidean(np.array([[0.0], [3.0]])), leaf_log_ids=["a", "b"])
    templates = build_templates(tree, seqs)
    assert templates[0].slots == [b"ps", b"\r\n"]
    assert templates[1].slots == [b"ls", b"\r\n"]
    assert all(s is not GAP for s in templates[0].slots)


def test_common_subsequence_soundness_on_random_trees():
    rng = random.Random(21)
    alphabet = [b"a", b"b", b"c", b"d", b"e"]
    for trial in range(10):
        n = rng.randint(2, 12)
        seqs = {}
        for i in range(n):
            seqs[f"l{i}"] = sequence_from_parts(
                [rng.choice(alphabet) for _ in range(rng.randint(1, 14))], f"l{i}")
        X = np.array([[rng.uniform(0, 10), rng.uniform(0, 10)] for _ in range(n)])
        tree = agglomerate(euclidean(X), leaf_log_ids=[f"l{i}" for i in range(n)])
        templates = build_templates(tree, seqs)
        for node in tree.nodes:
            tokens = templates[node.node_id].token_slots()
            for leaf in tree.leaves_under(node.node_id):
                leaf_seq = list(seqs[tree.nodes[leaf].log_id].parts)
                assert is_subsequence(tokens, leaf_seq)


def test_stability_bounds():
    assert tpl().stability == 1.0
    assert tpl(GAP).stability == 0.0
    assert tpl(b"a", GAP).stability == 0.5
    leaf = template_from_sequence(sequence_from_parts([b"x", b"y"], "x"))
    assert leaf.stability == 1.0


# -- render_template -----------------------------------------------------------

def test_render_plain_tokens():
    assert render_template(tpl(b"rm", b" -", b"rf")) == "rm -rf"


def test_render_gap_marker():
    assert render_template(tpl(GAP)) == "⟨*⟩"


def test_render_escapes_unprintable():
    assert render_template(tpl(b"\r\n")) == "\\x0d\\x0a"


def test_render_escaping_is_injective():
    # a literal backslash never collides with an escape introducer
    assert render_template(tpl(b"\\x0d")) == "\\\\x0d"
    assert render_template(tpl(b"\x0d")) == "\\x0d"


# -- serialization ---------------------------------------------------------

def test_template_file_round_trip(tmp_path):
    templates = {
        0: Template(node_id=0, slots=[b"cd", b" ", b"tmp"]),
        1: Template(node_id=1, slots=[b"\xff\x00", GAP, b"x"]),
        2: Template(node_id=2, slots=[GAP]),
    }
    path = tmp_path / "templates.jsonl"
    write_templates(str(path), templates)
    back = read_templates(str(path))
    assert set(back) == set(templates)
    for node_id, t in templates.items():
        assert back[node_id].slots == t.slots


def test_template_dict_round_trip():
    t = Template(node_id=7, slots=[b"a", GAP, b"\x00"])
    d = template_to_dict(t)
    assert d["stability"] == pytest.approx(2 / 3)
    back = template_from_dict(d)
    assert back.slots == t.slots
    assert back.node_id == 7
