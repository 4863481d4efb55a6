"""Captured telnet conversations and the append-only JSONL session store.

Wire format: one conversation per line, payloads base64, timestamps
RFC 3339 with microseconds (``2025-01-01T00:00:00.000000Z``).
"""

from __future__ import annotations

import base64
import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Iterator

TO_HONEYPOT = "to_honeypot"
FROM_HONEYPOT = "from_honeypot"

TAG_WILD = "wild"
TAG_CONTROL = "control_group"

ORIGIN_TAGS = (TAG_WILD, TAG_CONTROL)


@dataclass
class Message:
    direction: str  # TO_HONEYPOT | FROM_HONEYPOT
    payload: bytes
    at: datetime


@dataclass
class Conversation:
    session_id: str
    peer_addr: str  # "ip:port"
    local_port: int
    started_at: datetime
    ended_at: datetime
    origin_tag: str = TAG_WILD
    messages: list[Message] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    @property
    def peer_host(self) -> str:
        return self.peer_addr.rsplit(":", 1)[0]

    def request_messages(self) -> list[Message]:
        return [m for m in self.messages if m.direction == TO_HONEYPOT]

    def response_messages(self) -> list[Message]:
        return [m for m in self.messages if m.direction == FROM_HONEYPOT]


def format_ts(dt: datetime) -> str:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def parse_ts(value: str) -> datetime:
    if value.endswith("Z"):
        value = value[:-1] + "+00:00"
    return datetime.fromisoformat(value)


def conversation_to_dict(conv: Conversation) -> dict:
    d = {
        "session_id": conv.session_id,
        "peer_addr": conv.peer_addr,
        "local_port": conv.local_port,
        "started_at": format_ts(conv.started_at),
        "ended_at": format_ts(conv.ended_at),
        "origin_tag": conv.origin_tag,
        "messages": [
            {
                "direction": m.direction,
                "payload_b64": base64.b64encode(m.payload).decode("ascii"),
                "at": format_ts(m.at),
            }
            for m in conv.messages
        ],
    }
    if conv.flags:
        d["flags"] = list(conv.flags)
    return d


def conversation_from_dict(d: dict) -> Conversation:
    return Conversation(
        session_id=d["session_id"],
        peer_addr=d["peer_addr"],
        local_port=int(d["local_port"]),
        started_at=parse_ts(d["started_at"]),
        ended_at=parse_ts(d["ended_at"]),
        origin_tag=d["origin_tag"],
        messages=[
            Message(
                direction=m["direction"],
                payload=base64.b64decode(m["payload_b64"]),
                at=parse_ts(m["at"]),
            )
            for m in d["messages"]
        ],
        flags=list(d.get("flags", [])),
    )


class SessionStore:
    """Append-only JSONL store. Appends are atomic per conversation: each
    record is written with a single write() call so concurrent appenders
    never interleave and readers never see a half record."""

    def __init__(self, path: str):
        self.path = path
        self._lock = threading.Lock()
        self.corrupt_count = 0

    def append(self, conv: Conversation) -> None:
        line = json.dumps(conversation_to_dict(conv), separators=(",", ":")) + "\n"
        data = line.encode("utf-8")
        with self._lock:
            with open(self.path, "ab") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())

    def __iter__(self) -> Iterator[Conversation]:
        self.corrupt_count = 0
        if not os.path.exists(self.path):
            return
        with open(self.path, "rb") as fh:
            for raw in fh:
                raw = raw.strip()
                if not raw:
                    continue
                try:
                    yield conversation_from_dict(json.loads(raw))
                except (ValueError, KeyError, TypeError):
                    self.corrupt_count += 1


def export_sessions(
    store: Iterable[Conversation],
    since: datetime | None = None,
    until: datetime | None = None,
    peer_host: str | None = None,
    origin_tag: str | None = None,
) -> Iterator[Conversation]:
    """Yield conversations matching the filter, ordered by started_at.
    Corrupt records are skipped by the store (see SessionStore.corrupt_count)."""
    selected = []
    for conv in store:
        if since is not None and conv.started_at < since:
            continue
        if until is not None and conv.started_at >= until:
            continue
        if peer_host is not None and conv.peer_host != peer_host:
            continue
        if origin_tag is not None and conv.origin_tag != origin_tag:
            continue
        selected.append(conv)
    selected.sort(key=lambda c: (c.started_at, c.session_id))
    yield from selected
