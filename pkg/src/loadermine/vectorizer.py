"""Joint 1/2/3-gram count vectors over token sequences.

The vocabulary assigns one dimension to every distinct token n-gram
(n = 1, 2, 3) seen while fitting, in first-seen order, so a corpus maps
to the same dimensions on every run. Gram identity is the tuple of token
byte strings; the byte class adds nothing (it is derivable from the
bytes) and is excluded.
"""

from __future__ import annotations

import base64
import hashlib
import json
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .tokenizer import TokenSequence

NGRAM_ORDERS = (1, 2, 3)

Gram = tuple[bytes, ...]


@dataclass
class Vocabulary:
    entries: dict[tuple[int, Gram], int] = field(default_factory=dict)

    @property
    def dim_total(self) -> int:
        return len(self.entries)

    def order_of_dim(self) -> list[int]:
        """n-gram order (1, 2 or 3) for every dimension index."""
        orders = [0] * self.dim_total
        for (n, _), idx in self.entries.items():
            orders[idx] = n
        return orders


@dataclass
class FeatureVector:
    log_id: str
    counts: dict[int, int]


def _iter_grams(parts: Sequence[bytes], n: int) -> Iterable[Gram]:
    for i in range(len(parts) - n + 1):
        yield tuple(parts[i:i + n])


def fit_vocabulary(corpus: Iterable[TokenSequence]) -> Vocabulary:
    """Collect the distinct 1/2/3-grams of the corpus, per-log windows only
    (windows never span two logs; a log shorter than n contributes no
    n-grams)."""
    vocab = Vocabulary()
    entries = vocab.entries
    for seq in corpus:
        parts = seq.parts
        for n in NGRAM_ORDERS:
            for gram in _iter_grams(parts, n):
                key = (n, gram)
                if key not in entries:
                    entries[key] = len(entries)
    return vocab


def vectorize(seq: TokenSequence, vocab: Vocabulary) -> FeatureVector:
    """Count the occurrences of every in-vocabulary gram of the sequence.
    Grams missing from the vocabulary are ignored (out-of-vocabulary logs
    simply lose those windows)."""
    entries = vocab.entries
    counts: dict[int, int] = {}
    parts = seq.parts
    for n in NGRAM_ORDERS:
        for gram in _iter_grams(parts, n):
            idx = entries.get((n, gram))
            if idx is not None:
                counts[idx] = counts.get(idx, 0) + 1
    return FeatureVector(log_id=seq.log_id or "", counts=counts)


# ---------------------------------------------------------------------------
# serialization

def _gram_key(n: int, gram: Gram) -> str:
    return f"{n}:" + ",".join(base64.b64encode(t).decode("ascii") for t in gram)


def _parse_gram_key(key: str) -> tuple[int, Gram]:
    n_str, _, rest = key.partition(":")
    gram = tuple(base64.b64decode(part) for part in rest.split(",")) if rest else ()
    return int(n_str), gram


def vocabulary_to_json(vocab: Vocabulary) -> str:
    return json.dumps(
        {_gram_key(n, g): idx for (n, g), idx in vocab.entries.items()},
        indent=0,
    )


def vocabulary_from_json(text: str) -> Vocabulary:
    raw = json.loads(text)
    entries = {_parse_gram_key(k): v for k, v in raw.items()}
    ordered = dict(sorted(entries.items(), key=lambda kv: kv[1]))
    return Vocabulary(entries=ordered)


def vocabulary_fingerprint(vocab: Vocabulary) -> bytes:
    h = hashlib.sha256()
    for (n, gram), idx in sorted(vocab.entries.items(), key=lambda kv: kv[1]):
        h.update(struct.pack("<II", idx, n))
        for t in gram:
            h.update(struct.pack("<I", len(t)))
            h.update(t)
    return h.digest()


_VEC_MAGIC = b"LMVC\x01\x00"


def write_vectors(path: str, vectors: list[FeatureVector], vocab: Vocabulary) -> None:
    """Binary vector file: magic, record count, dims, vocabulary
    fingerprint, then (log_id, sorted (index, count) pairs) per record."""
    with open(path, "wb") as fh:
        fh.write(_VEC_MAGIC)
        fh.write(struct.pack("<II", len(vectors), vocab.dim_total))
        fh.write(vocabulary_fingerprint(vocab))
        for vec in vectors:
            encoded = vec.log_id.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            items = sorted(vec.counts.items())
            fh.write(struct.pack("<I", len(items)))
            for idx, count in items:
                fh.write(struct.pack("<II", idx, count))


def read_vectors(path: str) -> tuple[list[FeatureVector], int, bytes]:
    """Returns (vectors, dims, vocabulary fingerprint)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_VEC_MAGIC))
        if magic != _VEC_MAGIC:
            raise ValueError(f"{path}: not a vector file")
        n_records, dims = struct.unpack("<II", fh.read(8))
        fingerprint = fh.read(32)
        vectors = []
        for _ in range(n_records):
            (id_len,) = struct.unpack("<H", fh.read(2))
            log_id = fh.read(id_len).decode("utf-8")
            (n_items,) = struct.unpack("<I", fh.read(4))
            raw = fh.read(8 * n_items)
            counts = {}
            for k in range(n_items):
                idx, count = struct.unpack_from("<II", raw, 8 * k)
                counts[idx] = count
            vectors.append(FeatureVector(log_id=log_id, counts=counts))
    return vectors, dims, fingerprint
