"""Byte-class tokenization of request logs.

A request log is split into maximal runs of same-class bytes. Three
classes: alphanumeric (digits and ASCII letters), symbolic (space and
printable punctuation), unprintable (controls, DEL, and everything
above 0x7E). The split is lossless: concatenating the tokens gives the
original payload back, and adjacent tokens always differ in class.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class ByteClass(enum.IntEnum):
    ALNUM = 0
    SYM = 1
    UNPRINT = 2


class Token(NamedTuple):
    data: bytes
    klass: ByteClass


def _build_class_table(tab_is_symbol: bool = False) -> np.ndarray:
    table = np.empty(256, dtype=np.uint8)
    for b in range(256):
        if 0x30 <= b <= 0x39 or 0x41 <= b <= 0x5A or 0x61 <= b <= 0x7A:
            table[b] = ByteClass.ALNUM
        elif b == 0x20 or 0x21 <= b <= 0x2F or 0x3A <= b <= 0x40 or 0x5B <= b <= 0x60 or 0x7B <= b <= 0x7E:
            table[b] = ByteClass.SYM
        else:
            table[b] = ByteClass.UNPRINT
    if tab_is_symbol:
        table[0x09] = ByteClass.SYM
    return table


_CLASS_TABLE = _build_class_table()
_CLASS_TABLE_TAB_SYM = _build_class_table(tab_is_symbol=True)


def byte_class(b: int, tab_is_symbol: bool = False) -> ByteClass:
    table = _CLASS_TABLE_TAB_SYM if tab_is_symbol else _CLASS_TABLE
    return ByteClass(int(table[b]))


@dataclass
class TokenSequence:
    """Token stream of one request log.

    Stored as parallel arrays (token byte strings plus one class code per
    token) so that multi-megabyte payloads tokenize without building
    millions of objects; ``tokens`` materializes the pair view on demand.
    """

    log_id: str | None
    parts: tuple[bytes, ...]
    class_codes: bytes  # one ByteClass value per part

    def __len__(self) -> int:
        return len(self.parts)

    @property
    def tokens(self) -> list[Token]:
        return [Token(p, ByteClass(c)) for p, c in zip(self.parts, self.class_codes)]

    def detokenize(self) -> bytes:
        return b"".join(self.parts)


def tokenize(payload: bytes, log_id: str | None = None, tab_is_symbol: bool = False) -> TokenSequence:
    """Split a payload into maximal same-class runs, in order.

    Empty input yields an empty sequence (valid only outside the corpus
    flow, where empty logs have already been discarded).
    """
    if not payload:
        return TokenSequence(log_id, (), b"")
    table = _CLASS_TABLE_TAB_SYM if tab_is_symbol else _CLASS_TABLE
    arr = np.frombuffer(payload, dtype=np.uint8)
    cls = table[arr]
    cuts = np.flatnonzero(cls[1:] != cls[:-1])
    starts = np.empty(len(cuts) + 1, dtype=np.int64)
    starts[0] = 0
    starts[1:] = cuts + 1
    bounds = starts.tolist()
    bounds.append(len(payload))
    parts = tuple(payload[s:e] for s, e in zip(bounds, bounds[1:]))
    return TokenSequence(log_id, parts, cls[starts].tobytes())


def detokenize(seq: TokenSequence) -> bytes:
    return seq.detokenize()


def sequence_from_parts(parts: list[bytes], log_id: str | None = None) -> TokenSequence:
    """Rebuild a TokenSequence from stored token byte strings."""
    codes = bytes(int(_CLASS_TABLE[p[0]]) if p else int(ByteClass.UNPRINT) for p in parts)
    return TokenSequence(log_id, tuple(parts), codes)


# ---------------------------------------------------------------------------
# tokens file I/O (JSON Lines, one log per line)

def write_token_sequences(path: str, sequences: "list[TokenSequence]") -> None:
    import base64
    import json

    with open(path, "w", encoding="utf-8") as fh:
        for seq in sequences:
            record = {
                "log_id": seq.log_id,
                "tokens": [
                    {"b64": base64.b64encode(p).decode("ascii"),
                     "klass": ByteClass(c).name}
                    for p, c in zip(seq.parts, seq.class_codes)
                ],
            }
            json.dump(record, fh, separators=(",", ":"))
            fh.write("\n")


def read_token_sequences(path: str) -> "list[TokenSequence]":
    import base64
    import json

    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            parts = tuple(base64.b64decode(t["b64"]) for t in record["tokens"])
            codes = bytes(int(ByteClass[t["klass"]]) for t in record["tokens"])
            out.append(TokenSequence(record["log_id"], parts, codes))
    return out
