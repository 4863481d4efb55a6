"""Turn captured conversations into request logs.

Steps: strip telnet option negotiation, strip the credential exchange,
drop every response, concatenate what the attacker sent. Then sample at
most ``per_host_cap`` logs per source host and collapse duplicates.
"""

from __future__ import annotations

import base64
import json
import re
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Iterator

from .sessions import FROM_HONEYPOT, TO_HONEYPOT, Conversation, Message

IAC = 0xFF
SB = 0xFA
SE = 0xF0

DEFAULT_PROMPT_PATTERNS = (r"ogin:", r"sername:", r"assword:")
DEFAULT_MAX_CREDENTIAL_REPLIES = 4


@dataclass
class RequestLog:
    log_id: str
    source_host: str
    payload: bytes
    session_ids: list[str]
    origin_tag: str


@dataclass
class CorpusManifest:
    logs: list[RequestLog]
    per_host_cap: int
    dedup: bool


class _TelnetStripper:
    """Streaming remover of telnet command sequences (one per direction;
    negotiation state may span transport reads)."""

    _DATA, _IAC, _OPT, _SUB, _SUB_IAC = range(5)

    def __init__(self):
        self.state = self._DATA
        self.pending = 0  # bytes held back by an unfinished sequence

    def feed(self, payload: bytes) -> bytes:
        out = bytearray()
        i = 0
        n = len(payload)
        while i < n:
            if self.state == self._DATA:
                j = payload.find(b"\xff", i)
                if j < 0:
                    out += payload[i:]
                    break
                out += payload[i:j]
                i = j + 1
                self.state = self._IAC
                self.pending = 1
            elif self.state == self._IAC:
                b = payload[i]
                i += 1
                if b == IAC:  # escaped literal 0xFF
                    out.append(IAC)
                    self.state = self._DATA
                elif b == SB:
                    self.state = self._SUB
                    self.pending += 1
                elif 0xFB <= b <= 0xFE:  # WILL/WONT/DO/DONT need an option byte
                    self.state = self._OPT
                    self.pending += 1
                else:
                    # two-byte command; anything below 0xF0 is a protocol
                    # violation and is dropped the same way
                    self.state = self._DATA
                    self.pending = 0
            elif self.state == self._OPT:
                i += 1
                self.state = self._DATA
                self.pending = 0
            elif self.state == self._SUB:
                j = payload.find(b"\xff", i)
                if j < 0:
                    self.pending += n - i
                    break
                self.pending += j - i + 1
                i = j + 1
                self.state = self._SUB_IAC
            else:  # _SUB_IAC
                b = payload[i]
                i += 1
                if b == SE:
                    self.state = self._DATA
                    self.pending = 0
                elif b == IAC:  # escaped IAC inside subnegotiation, stays dropped
                    self.state = self._SUB
                    self.pending += 1
                else:
                    self.state = self._SUB
                    self.pending += 1
        return bytes(out)

    @property
    def dangling(self) -> int:
        return self.pending if self.state != self._DATA else 0


def strip_protocol(conv: Conversation, counters: Counter | None = None) -> Conversation:
    """Remove telnet command sequences from every payload, both directions.

    IAC IAC unescapes to a single data 0xFF; IAC+cmd pairs, option triples
    and IAC SB ... IAC SE subnegotiations disappear entirely. A sequence cut
    off at the end of the conversation is dropped and counted under
    ``dangling_iac_bytes``. Messages left empty are removed.
    """
    strippers = {TO_HONEYPOT: _TelnetStripper(), FROM_HONEYPOT: _TelnetStripper()}
    messages = []
    for m in conv.messages:
        cleaned = strippers[m.direction].feed(m.payload)
        if cleaned:
            messages.append(Message(m.direction, cleaned, m.at))
    if counters is not None:
        counters["dangling_iac_bytes"] += sum(s.dangling for s in strippers.values())
    return replace(conv, messages=messages)


_LINE_END = re.compile(rb"\n|\r\0|\r(?!\n|\0)")


def _consume_line(payload: bytes, after_cr: bool) -> tuple[int, bool, bool]:
    """Scan one reply line being discarded.

    Returns (bytes_consumed, done, after_cr): ``done`` once a terminator
    (LF, CR LF, CR NUL, or bare CR) has been fully consumed; ``after_cr``
    carries a message-final CR whose LF/NUL may arrive in the next read.
    """
    i = 0
    if after_cr:
        if payload[:1] in (b"\n", b"\0"):
            i = 1
        return i, True, False
    m = _LINE_END.search(payload)
    if m is None:
        return len(payload), False, False
    end = m.end()
    if payload[m.start():end] == b"\r" and end == len(payload):
        return end, False, True  # CR at read boundary: LF/NUL may follow
    return end, True, False


@dataclass
class _CredentialState:
    pending: bool = False
    discarding: bool = False
    after_cr: bool = False
    removals: int = 0


def strip_credentials(
    conv: Conversation,
    patterns: Iterable[str] = DEFAULT_PROMPT_PATTERNS,
    max_removals: int = DEFAULT_MAX_CREDENTIAL_REPLIES,
) -> Conversation:
    """Drop attacker lines that answer login/password prompts.

    A response matching any prompt pattern (case-insensitive) arms the
    removal of the next attacker line, wherever its bytes fall across
    reads. At most ``max_removals`` replies are removed, which bounds the
    damage from pathological prompt-looking responses.
    """
    compiled = [re.compile(p.encode("latin-1"), re.IGNORECASE) for p in patterns]
    st = _CredentialState()
    messages = []
    for m in conv.messages:
        if m.direction == FROM_HONEYPOT:
            if st.removals < max_removals and not st.pending:
                if any(p.search(m.payload) for p in compiled):
                    st.pending = True
            messages.append(m)
            continue
        payload = m.payload
        while payload and (st.discarding or st.pending):
            if not st.discarding:
                st.pending = False
                st.discarding = True
                st.removals += 1
            consumed, done, after_cr = _consume_line(payload, st.after_cr)
            payload = payload[consumed:]
            st.after_cr = after_cr
            if done:
                st.discarding = False
        if payload:
            messages.append(Message(m.direction, payload, m.at))
    return replace(conv, messages=messages)


def to_request_log(conv: Conversation) -> RequestLog | None:
    """Concatenate the surviving attacker payloads; None when nothing is left."""
    payload = b"".join(m.payload for m in conv.messages if m.direction == TO_HONEYPOT)
    if not payload:
        return None
    return RequestLog(
        log_id=f"rl-{conv.session_id}",
        source_host=conv.peer_host,
        payload=payload,
        session_ids=[conv.session_id],
        origin_tag=conv.origin_tag,
    )


def preprocess_conversation(
    conv: Conversation,
    patterns: Iterable[str] = DEFAULT_PROMPT_PATTERNS,
    counters: Counter | None = None,
) -> RequestLog | None:
    return to_request_log(strip_credentials(strip_protocol(conv, counters), patterns))


def build_corpus(
    logs: Iterable[RequestLog],
    per_host_cap: int = 20,
    dedup: bool = True,
) -> CorpusManifest:
    """Sample and deduplicate request logs into a corpus.

    The input stream order is the selection order: the first
    ``per_host_cap`` distinct logs seen for a host are kept (callers
    stream sessions in started_at order, so "first" means earliest). With
    dedup on, the earliest instance of a payload is kept and later
    duplicates contribute their session ids without counting against any
    cap.
    """
    host_counts: Counter = Counter()
    by_payload: dict[bytes, RequestLog] = {}
    kept: list[RequestLog] = []
    for log in logs:
        if not log.payload:
            continue
        if dedup:
            keeper = by_payload.get(log.payload)
            if keeper is not None:
                keeper.session_ids.extend(log.session_ids)
                continue
        if host_counts[log.source_host] >= per_host_cap:
            continue
        host_counts[log.source_host] += 1
        copy = RequestLog(
            log_id=log.log_id,
            source_host=log.source_host,
            payload=log.payload,
            session_ids=list(log.session_ids),
            origin_tag=log.origin_tag,
        )
        if dedup:
            by_payload[copy.payload] = copy
        kept.append(copy)
    return CorpusManifest(logs=kept, per_host_cap=per_host_cap, dedup=dedup)


# ---------------------------------------------------------------------------
# corpus file I/O (JSON Lines, one request log per line)

def request_log_to_dict(log: RequestLog) -> dict:
    return {
        "log_id": log.log_id,
        "source_host": log.source_host,
        "payload_b64": base64.b64encode(log.payload).decode("ascii"),
        "session_ids": list(log.session_ids),
        "origin_tag": log.origin_tag,
    }


def request_log_from_dict(d: dict) -> RequestLog:
    return RequestLog(
        log_id=d["log_id"],
        source_host=d["source_host"],
        payload=base64.b64decode(d["payload_b64"]),
        session_ids=list(d["session_ids"]),
        origin_tag=d["origin_tag"],
    )


def write_corpus(path: str, logs: Iterable[RequestLog]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for log in logs:
            json.dump(request_log_to_dict(log), fh, separators=(",", ":"))
            fh.write("\n")


def read_corpus(path: str) -> Iterator[RequestLog]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield request_log_from_dict(json.loads(line))
