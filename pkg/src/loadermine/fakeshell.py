"""Deterministic fake busybox shell, the desk-scale upstream for the proxy.

Line-oriented telnet server: login banner, credential prompts that accept
anything, then a command loop with canned responses. The same command
script always produces the same response byte stream, which is what makes
capture runs reproducible.
"""

from __future__ import annotations

import json
import socketserver
import threading
from dataclasses import dataclass, field

CRLF = b"\r\n"

DEFAULT_RESPONSES = {
    "ps": (
        "  PID USER       VSZ STAT COMMAND\r\n"
        "    1 root      1340 S    init\r\n"
        "  312 root      1112 S    /sbin/udhcpc\r\n"
        "  501 root      1108 S    -sh\r\n"
    ),
    "ls": "bin  dev  etc  lib  mnt  proc  sys  tmp  usr  var\r\n",
    "cat /bin/echo": "\x7fELF\x01\x01\x01\x00\x00\x00\x00\x00\x00\x00\x00\x00\x02\x00(\x00\r\n",
    "cat /proc/mounts": (
        "/dev/root / squashfs ro 0 0\r\n"
        "tmpfs /tmp tmpfs rw 0 0\r\n"
        "tmpfs /var tmpfs rw 0 0\r\n"
    ),
    "wget": "wget: missing URL\r\nUsage: wget [options] <URL>\r\n",
    "tftp": "tftp: missing host\r\nUsage: tftp [options] host\r\n",
}


@dataclass
class ShellProfile:
    banner: str = "\r\nV200R002 login device\r\n"
    login_prompt: str = "login: "
    password_prompt: str = "Password: "
    welcome: str = "\r\nBusyBox v1.16.1 built-in shell (ash)\r\n\r\n"
    prompt: str = "~ # "
    responses: dict = field(default_factory=lambda: dict(DEFAULT_RESPONSES))
    not_found: str = "{cmd}: applet not found\r\n"

    @classmethod
    def from_json_file(cls, path: str) -> "ShellProfile":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        profile = cls()
        for key in ("banner", "login_prompt", "password_prompt", "welcome", "prompt", "not_found"):
            if key in raw:
                setattr(profile, key, raw[key])
        if "responses" in raw:
            profile.responses = dict(DEFAULT_RESPONSES)
            profile.responses.update(raw["responses"])
        return profile


def _split_compound(line: str) -> list[str]:
    """Split a compound shell line on ;, && and || (no quote awareness:
    loaders do not quote separators)."""
    out = []
    cur = []
    i = 0
    while i < len(line):
        two = line[i:i + 2]
        if two in ("&&", "||"):
            out.append("".join(cur))
            cur = []
            i += 2
        elif line[i] == ";":
            out.append("".join(cur))
            cur = []
            i += 1
        else:
            cur.append(line[i])
            i += 1
    out.append("".join(cur))
    return [seg.strip() for seg in out if seg.strip()]


def respond_to_line(profile: ShellProfile, raw_line: bytes) -> bytes:
    """Response bytes (without prompt) for one received command line."""
    try:
        line = raw_line.decode("utf-8", errors="replace").strip()
    except Exception:
        line = ""
    if not line:
        return b""
    chunks = []
    for segment in _split_compound(line):
        chunks.append(_respond_to_segment(profile, segment))
    return b"".join(chunks)


def _respond_to_segment(profile: ShellProfile, segment: str) -> bytes:
    if segment in profile.responses:
        return profile.responses[segment].encode("latin-1")
    words = segment.split()
    if not words:
        return b""
    cmd = words[0]
    args = words[1:]
    if cmd.rsplit("/", 1)[-1] == "busybox":
        if not args:
            return b"BusyBox v1.16.1 multi-call binary.\r\n"
        cmd, args = args[0], args[1:]
    base = cmd.rsplit("/", 1)[-1]
    rebuilt = " ".join([base] + args)
    if rebuilt in profile.responses:
        return profile.responses[rebuilt].encode("latin-1")
    if base in ("cd", "rm", "chmod", "cp", "hostname", "export", "enable",
                "system", "shell", "sh", "linuxshell"):
        return b""
    if base == "echo":
        out = [a for a in args if a not in ("-e", "-n", "-en", "-ne")]
        if ">" in out:
            return b""
        text = " ".join(out)
        if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
            text = text[1:-1]
        return text.encode("latin-1", errors="replace") + CRLF
    if base in profile.responses:
        return profile.responses[base].encode("latin-1")
    if base == "cat":
        return f"cat: can't open '{args[0] if args else ''}': No such file or directory\r\n".encode("latin-1")
    return profile.not_found.format(cmd=base).encode("latin-1")


class _LineReader:
    """Accumulate socket reads and hand out lines; accepts LF, CR LF and
    CR NUL line endings (loaders emit all three)."""

    def __init__(self, sock):
        self.sock = sock
        self.buf = bytearray()

    def read_line(self) -> bytes | None:
        while True:
            idx = self._line_end()
            if idx is not None:
                line = bytes(self.buf[:idx])
                del self.buf[:idx]
                return line
            data = self.sock.recv(4096)
            if not data:
                return None
            self.buf += data

    def _line_end(self) -> int | None:
        for i, b in enumerate(self.buf):
            if b == 0x0A:
                return i + 1
            if b == 0x0D:
                if i + 1 < len(self.buf):
                    return i + 2 if self.buf[i + 1] in (0x0A, 0x00) else i + 1
                return None  # CR at buffer end: wait for the pair byte
        return None


class _ShellHandler(socketserver.BaseRequestHandler):
    def handle(self):
        profile: ShellProfile = self.server.profile  # type: ignore[attr-defined]
        sock = self.request
        reader = _LineReader(sock)
        try:
            sock.sendall(profile.banner.encode("latin-1") + profile.login_prompt.encode("latin-1"))
            if reader.read_line() is None:
                return
            sock.sendall(profile.password_prompt.encode("latin-1"))
            if reader.read_line() is None:
                return
            sock.sendall(profile.welcome.encode("latin-1") + profile.prompt.encode("latin-1"))
            while True:
                line = reader.read_line()
                if line is None:
                    return
                reply = respond_to_line(profile, line)
                sock.sendall(reply + profile.prompt.encode("latin-1"))
        except (ConnectionError, OSError):
            pass


class FakeShellServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, addr: tuple[str, int], profile: ShellProfile | None = None):
        super().__init__(addr, _ShellHandler)
        self.profile = profile or ShellProfile()


def start_fake_shell(host: str, port: int, profile: ShellProfile | None = None) -> FakeShellServer:
    """Start the shell in a background thread; caller owns shutdown()."""
    server = FakeShellServer((host, port), profile)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


def run_fake_shell(host: str, port: int, profile: ShellProfile | None = None) -> None:
    """Serve until interrupted."""
    server = FakeShellServer((host, port), profile)
    try:
        server.serve_forever()
    finally:
        server.server_close()
