"""Transparent TCP proxy that records telnet conversations.

Every byte relayed in either direction lands in the session store with
its direction and timestamp, bit-exact: telnet negotiation is relayed
unmodified, nothing is decoded. The one permitted rewrite is credential
substitution, which swaps the attacker's login/password lines on the
upstream-bound copy only; the store always keeps the attacker's original
bytes.
"""

from __future__ import annotations

import re
import socket
import socketserver
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone

from .sessions import (
    FROM_HONEYPOT,
    TAG_WILD,
    TO_HONEYPOT,
    Conversation,
    Message,
    SessionStore,
)

DEFAULT_IDLE_TIMEOUT = 120.0
DEFAULT_MAX_SESSION_BYTES = 1 << 20

FLAG_TRUNCATED = "truncated"
FLAG_UPSTREAM_FAILED = "upstream_failed"

DEFAULT_LOGIN_PROMPTS = (r"ogin:", r"sername:")
DEFAULT_PASSWORD_PROMPTS = (r"assword:",)


@dataclass
class CredentialSubstitution:
    replacement_username: str
    replacement_password: str
    login_patterns: tuple = DEFAULT_LOGIN_PROMPTS
    password_patterns: tuple = DEFAULT_PASSWORD_PROMPTS


@dataclass
class ProxyConfig:
    listen_host: str
    listen_port: int
    upstream_host: str
    upstream_port: int
    credential_substitution: CredentialSubstitution | None = None
    max_session_bytes: int = DEFAULT_MAX_SESSION_BYTES
    idle_timeout: float = DEFAULT_IDLE_TIMEOUT
    origin_tag: str = TAG_WILD

    def __post_init__(self):
        if self.max_session_bytes <= 0:
            raise ValueError("max_session_bytes must be positive")
        if self.idle_timeout <= 0:
            raise ValueError("idle_timeout must be positive")


def _line_boundary(buf: bytes) -> int | None:
    """End index of the first complete line (LF, CR LF, CR NUL or bare CR);
    None while the terminator may still be arriving."""
    for i, b in enumerate(buf):
        if b == 0x0A:
            return i + 1
        if b == 0x0D:
            if i + 1 < len(buf):
                return i + 2 if buf[i + 1] in (0x0A, 0x00) else i + 1
            return None
    return None


class _SessionRecorder:
    """Collects one conversation; appends happen under a lock with the
    timestamp taken inside it, so message order and timestamps agree."""

    def __init__(self, config: ProxyConfig, peer: tuple[str, int], local_port: int):
        self.config = config
        self.lock = threading.Lock()
        self.messages: list[Message] = []
        self.flags: list[str] = []
        self.started_at = datetime.now(timezone.utc)
        self.peer_addr = f"{peer[0]}:{peer[1]}"
        self.local_port = local_port
        self.bytes_recorded = 0
        self.truncated = False
        self.armed: str | None = None  # "username" | "password"
        self.linebuf = bytearray()

    def record(self, direction: str, payload: bytes) -> bytes:
        """Record a read; returns the (possibly truncated) payload that may
        still be relayed, b"" once the byte budget is exhausted."""
        with self.lock:
            if self.truncated:
                return b""
            room = self.config.max_session_bytes - self.bytes_recorded
            if len(payload) > room:
                payload = payload[:room]
                self.truncated = True
                if FLAG_TRUNCATED not in self.flags:
                    self.flags.append(FLAG_TRUNCATED)
            if payload:
                now = datetime.now(timezone.utc)
                if self.messages and now < self.messages[-1].at:
                    now = self.messages[-1].at
                self.messages.append(Message(direction, bytes(payload), now))
                self.bytes_recorded += len(payload)
        return payload

    def add_flag(self, flag: str) -> None:
        with self.lock:
            if flag not in self.flags:
                self.flags.append(flag)

    def to_conversation(self) -> Conversation:
        ended = datetime.now(timezone.utc)
        if ended < self.started_at:
            ended = self.started_at
        with self.lock:
            messages = list(self.messages)
            flags = list(self.flags)
        return Conversation(
            session_id=uuid.uuid4().hex,
            peer_addr=self.peer_addr,
            local_port=self.local_port,
            started_at=self.started_at,
            ended_at=ended,
            origin_tag=self.config.origin_tag,
            messages=messages,
            flags=flags,
        )


class _ProxyHandler(socketserver.BaseRequestHandler):
    def handle(self):
        server: ProxyServer = self.server  # type: ignore[assignment]
        config = server.config
        recorder = _SessionRecorder(config, self.client_address, config.listen_port)

        upstream = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        try:
            upstream.settimeout(min(10.0, config.idle_timeout))
            upstream.connect((config.upstream_host, config.upstream_port))
        except OSError:
            upstream.close()
            recorder.add_flag(FLAG_UPSTREAM_FAILED)
            server.store.append(recorder.to_conversation())
            return

        client = self.request
        client.settimeout(config.idle_timeout)
        upstream.settimeout(config.idle_timeout)

        sub = config.credential_substitution
        login_re = password_re = None
        if sub is not None:
            login_re = [re.compile(p.encode("latin-1"), re.IGNORECASE) for p in sub.login_patterns]
            password_re = [re.compile(p.encode("latin-1"), re.IGNORECASE) for p in sub.password_patterns]

        def to_upstream():
            while True:
                try:
                    data = client.recv(4096)
                except OSError:
                    break
                if not data:
                    break
                data = recorder.record(TO_HONEYPOT, data)
                if not data and recorder.truncated:
                    break
                try:
                    upstream.sendall(self._transform(recorder, sub, data))
                except OSError:
                    break
            try:
                upstream.shutdown(socket.SHUT_WR)
            except OSError:
                pass

        def to_client():
            while True:
                try:
                    data = upstream.recv(4096)
                except OSError:
                    break
                if not data:
                    break
                data = recorder.record(FROM_HONEYPOT, data)
                if not data and recorder.truncated:
                    break
                if sub is not None:
                    with recorder.lock:
                        if any(p.search(data) for p in password_re):
                            recorder.armed = "password"
                        elif any(p.search(data) for p in login_re):
                            recorder.armed = "username"
                try:
                    client.sendall(data)
                except OSError:
                    break
            try:
                client.shutdown(socket.SHUT_WR)
            except OSError:
                pass

        pump = threading.Thread(target=to_client, daemon=True)
        pump.start()
        to_upstream()
        pump.join(timeout=config.idle_timeout + 5.0)
        try:
            upstream.close()
        except OSError:
            pass
        server.store.append(recorder.to_conversation())

    @staticmethod
    def _transform(recorder: _SessionRecorder, sub: CredentialSubstitution | None,
                   data: bytes) -> bytes:
        """Apply credential substitution to the upstream-bound copy."""
        if sub is None:
            return data
        with recorder.lock:
            armed = recorder.armed
            if armed is None and not recorder.linebuf:
                return data
            recorder.linebuf += data
            end = _line_boundary(bytes(recorder.linebuf))
            if end is None:
                return b""  # hold until the line completes
            line = bytes(recorder.linebuf[:end])
            rest = bytes(recorder.linebuf[end:])
            recorder.linebuf.clear()
            recorder.armed = None
            terminator = line[len(line.rstrip(b"\r\n\0")):]
            replacement = (sub.replacement_username if armed == "username"
                           else sub.replacement_password)
            return replacement.encode("latin-1") + terminator + rest


class ProxyServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, config: ProxyConfig, store: SessionStore):
        super().__init__((config.listen_host, config.listen_port), _ProxyHandler)
        self.config = config
        self.store = store


def start_proxy(config: ProxyConfig, store: SessionStore) -> ProxyServer:
    """Start the proxy in a background thread; caller owns shutdown()."""
    server = ProxyServer(config, store)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


def run_proxy(config: ProxyConfig, store: SessionStore) -> None:
    """Serve until interrupted."""
    server = ProxyServer(config, store)
    try:
        server.serve_forever()
    finally:
        server.server_close()
