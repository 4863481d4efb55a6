"""Tiny scripted telnet client used by the capture and acceptance tests."""

from __future__ import annotations

import socket
import time


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def read_until(sock: socket.socket, marker: bytes, timeout: float = 5.0) -> bytes:
    sock.settimeout(timeout)
    buf = bytearray()
    while marker not in buf:
        data = sock.recv(4096)
        if not data:
            break
        buf += data
    return bytes(buf)


def wait_for_listener(host: str, port: int, timeout: float = 5.0) -> None:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        try:
            with socket.create_connection((host, port), timeout=0.25):
                return
        except OSError:
            time.sleep(0.02)
    raise TimeoutError(f"nothing listening on {host}:{port}")


def wait_for_sessions(store, count: int, timeout: float = 10.0) -> list:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        sessions = list(store)
        if len(sessions) >= count:
            return sessions
        time.sleep(0.05)
    raise TimeoutError(f"store never reached {count} sessions")


def run_login_script(host: str, port: int, commands: list[bytes],
                     username: bytes = b"root", password: bytes = b"hunter2",
                     negotiation: bytes = b"") -> bytes:
    """Connect, answer the login/password prompts, run the commands paced
    by the shell prompt, close. Returns everything the server sent."""
    received = bytearray()
    with socket.create_connection((host, port), timeout=5.0) as sock:
        received += read_until(sock, b"login: ")
        if negotiation:
            sock.sendall(negotiation)
        sock.sendall(username + b"\r\n")
        received += read_until(sock, b"assword: ")
        sock.sendall(password + b"\r\n")
        received += read_until(sock, b"# ")
        for cmd in commands:
            sock.sendall(cmd + b"\r\n")
            received += read_until(sock, b"# ")
    return bytes(received)
