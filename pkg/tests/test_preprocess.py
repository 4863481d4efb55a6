from __future__ import annotations

from collections import Counter
from datetime import datetime, timedelta, timezone

from loadermine.preprocess import (
    RequestLog,
    build_corpus,
    preprocess_conversation,
    read_corpus,
    request_log_from_dict,
    request_log_to_dict,
    strip_credentials,
    strip_protocol,
    to_request_log,
    write_corpus,
)
from loadermine.sessions import FROM_HONEYPOT, TO_HONEYPOT, Conversation, Message

T0 = datetime(2025, 1, 1, tzinfo=timezone.utc)


def conv(*turns: tuple[str, bytes], session_id="s1", host="192.0.2.9") -> Conversation:
    messages = [
        Message(direction, payload, T0 + timedelta(seconds=i))
        for i, (direction, payload) in enumerate(turns)
    ]
    end = messages[-1].at if messages else T0
    return Conversation(
        session_id=session_id, peer_addr=f"{host}:31337", local_port=23,
        started_at=T0, ended_at=end, origin_tag="wild", messages=messages,
    )


def req_payloads(c: Conversation) -> list[bytes]:
    return [m.payload for m in c.messages if m.direction == TO_HONEYPOT]


# -- strip_protocol --------------------------------------------------------

def test_iac_option_triple_removed():
    c = strip_protocol(conv((TO_HONEYPOT, bytes([0xFF, 0xFB, 0x01]) + b"ls")))
    assert req_payloads(c) == [b"ls"]


def test_payload_without_iac_unchanged():
    c = strip_protocol(conv((TO_HONEYPOT, b"cat /bin/echo\r\n")))
    assert req_payloads(c) == [b"cat /bin/echo\r\n"]


def test_escaped_iac_unescapes():
    c = strip_protocol(conv((TO_HONEYPOT, bytes([0xFF, 0xFF]))))
    assert req_payloads(c) == [bytes([0xFF])]


def test_subnegotiation_removed():
    raw = b"a" + bytes([0xFF, 0xFA, 0x1F, 0x00, 0x50, 0xFF, 0xF0]) + b"b"
    c = strip_protocol(conv((TO_HONEYPOT, raw)))
    assert req_payloads(c) == [b"ab"]


def test_two_byte_command_removed():
    # IAC NOP (0xF1): two bytes gone
    c = strip_protocol(conv((TO_HONEYPOT, b"x" + bytes([0xFF, 0xF1]) + b"y")))
    assert req_payloads(c) == [b"xy"]


def test_sequence_split_across_messages():
    c = strip_protocol(conv(
        (TO_HONEYPOT, b"ls" + bytes([0xFF])),
        (TO_HONEYPOT, bytes([0xFB])),
        (TO_HONEYPOT, bytes([0x01]) + b"ps"),
    ))
    assert b"".join(req_payloads(c)) == b"lsps"


def test_dangling_iac_dropped_and_counted():
    counters = Counter()
    c = strip_protocol(conv((TO_HONEYPOT, b"ok" + bytes([0xFF, 0xFB]))),
                       counters=counters)
    assert req_payloads(c) == [b"ok"]
    assert counters["dangling_iac_bytes"] == 2


def test_both_directions_stripped_and_empty_messages_dropped():
    c = strip_protocol(conv(
        (FROM_HONEYPOT, bytes([0xFF, 0xFB, 0x01])),
        (TO_HONEYPOT, b"ls\r\n"),
    ))
    assert len(c.messages) == 1
    assert c.messages[0].direction == TO_HONEYPOT


# -- strip_credentials ------------------------------------------------------

def test_login_password_replies_removed():
    c = strip_credentials(conv(
        (FROM_HONEYPOT, b"login: "),
        (TO_HONEYPOT, b"root\r\n"),
        (FROM_HONEYPOT, b"Password: "),
        (TO_HONEYPOT, b"vizxv\r\n"),
        (TO_HONEYPOT, b"ls\r\n"),
    ))
    assert req_payloads(c) == [b"ls\r\n"]


def test_no_prompt_means_unchanged():
    original = conv(
        (FROM_HONEYPOT, b"# "),
        (TO_HONEYPOT, b"ls\r\n"),
    )
    c = strip_credentials(original)
    assert req_payloads(c) == [b"ls\r\n"]


def test_empty_credential_line_removed_rest_kept():
    c = strip_credentials(conv(
        (FROM_HONEYPOT, b"login: "),
        (TO_HONEYPOT, b"\r\nls\r\n"),
    ))
    assert req_payloads(c) == [b"ls\r\n"]


def test_reply_split_across_messages():
    c = strip_credentials(conv(
        (FROM_HONEYPOT, b"login: "),
        (TO_HONEYPOT, b"ro"),
        (TO_HONEYPOT, b"ot"),
        (TO_HONEYPOT, b"\r"),
        (TO_HONEYPOT, b"\nls\r\n"),
    ))
    assert req_payloads(c) == [b"ls\r\n"]


def test_case_insensitive_patterns():
    c = strip_credentials(conv(
        (FROM_HONEYPOT, b"LOGIN: "),
        (TO_HONEYPOT, b"admin\r\n"),
        (TO_HONEYPOT, b"id\r\n"),
    ))
    assert req_payloads(c) == [b"id\r\n"]


def test_removal_cap_guards_pathological_prompts():
    turns = []
    for i in range(6):
        turns.append((FROM_HONEYPOT, b"login: "))
        turns.append((TO_HONEYPOT, f"cred{i}\r\n".encode()))
    c = strip_credentials(conv(*turns))
    # only the first 4 replies are removed
    assert req_payloads(c) == [b"cred4\r\n", b"cred5\r\n"]


def test_prompt_while_previous_reply_still_streaming():
    c = strip_credentials(conv(
        (FROM_HONEYPOT, b"login: "),
        (TO_HONEYPOT, b"ro"),
        (FROM_HONEYPOT, b"Password: "),
        (TO_HONEYPOT, b"ot\r\nhunter2\r\nls\r\n"),
    ))
    assert req_payloads(c) == [b"ls\r\n"]


# -- to_request_log ----------------------------------------------------------

def test_concatenation_in_order():
    log = to_request_log(conv(
        (TO_HONEYPOT, b"ls\r\n"),
        (FROM_HONEYPOT, b"bin etc\r\n"),
        (TO_HONEYPOT, b"ps\r\n"),
    ))
    assert log.payload == b"ls\r\nps\r\n"
    assert log.source_host == "192.0.2.9"
    assert log.session_ids == ["s1"]


def test_response_only_conversation_yields_none():
    assert to_request_log(conv((FROM_HONEYPOT, b"# "))) is None


def test_full_preprocess_of_login_session():
    c = conv(
        (FROM_HONEYPOT, b"login: "),
        (TO_HONEYPOT, bytes([0xFF, 0xFD, 0x01]) + b"root\r\n"),
        (FROM_HONEYPOT, b"Password: "),
        (TO_HONEYPOT, b"vizxv\r\n"),
        (FROM_HONEYPOT, b"# "),
        (TO_HONEYPOT, b"enable\r\n"),
        (TO_HONEYPOT, b"sh\r\n"),
    )
    log = preprocess_conversation(c)
    assert log.payload == b"enable\r\nsh\r\n"


def test_response_bytes_never_leak():
    # responses use an alphabet disjoint from requests; none may survive
    c = conv(
        (FROM_HONEYPOT, bytes([0x80, 0x81, 0x82])),
        (TO_HONEYPOT, b"abc\r\n"),
        (FROM_HONEYPOT, bytes([0x83] * 20)),
        (TO_HONEYPOT, b"def\r\n"),
    )
    log = preprocess_conversation(c)
    assert set(log.payload) <= set(b"abcdef\r\n")
    assert log.payload == b"abc\r\ndef\r\n"


# -- build_corpus -------------------------------------------------------------

def rlog(i: int, host="192.0.2.1", payload=b"x", session=None) -> RequestLog:
    return RequestLog(log_id=f"rl-{i}", source_host=host, payload=payload,
                      session_ids=[session or f"s{i}"], origin_tag="wild")


def test_dedup_merges_session_ids():
    manifest = build_corpus([rlog(i, payload=b"same") for i in range(30)])
    assert len(manifest.logs) == 1
    assert manifest.logs[0].log_id == "rl-0"
    assert len(manifest.logs[0].session_ids) == 30


def test_per_host_cap_keeps_earliest():
    logs = [rlog(i, payload=f"p{i}".encode()) for i in range(25)]
    manifest = build_corpus(logs, per_host_cap=20)
    assert len(manifest.logs) == 20
    assert [l.log_id for l in manifest.logs] == [f"rl-{i}" for i in range(20)]


def test_three_hosts_ten_each():
    logs = [rlog(h * 10 + i, host=f"192.0.2.{h}", payload=f"{h}-{i}".encode())
            for h in range(3) for i in range(10)]
    manifest = build_corpus(logs)
    assert len(manifest.logs) == 30


def test_no_dedup_keeps_duplicates():
    manifest = build_corpus([rlog(i, payload=b"same") for i in range(3)], dedup=False)
    assert len(manifest.logs) == 3


def test_empty_payload_logs_excluded():
    manifest = build_corpus([rlog(0, payload=b""), rlog(1, payload=b"y")])
    assert [l.log_id for l in manifest.logs] == ["rl-1"]


def test_build_corpus_deterministic():
    logs = [rlog(i, host=f"192.0.2.{i % 3}", payload=f"{i % 7}".encode())
            for i in range(40)]
    a = build_corpus(list(logs))
    b = build_corpus(list(logs))
    assert [(l.log_id, l.session_ids) for l in a.logs] == \
           [(l.log_id, l.session_ids) for l in b.logs]


def test_corpus_file_round_trip(tmp_path):
    logs = [rlog(i, payload=bytes([i, 0xFF, 0x00])) for i in range(5)]
    path = tmp_path / "corpus.jsonl"
    write_corpus(str(path), logs)
    back = list(read_corpus(str(path)))
    assert [request_log_to_dict(l) for l in back] == \
           [request_log_to_dict(l) for l in logs]


def test_request_log_dict_round_trip():
    log = rlog(1, payload=b"\x00\xff binary")
    assert request_log_to_dict(request_log_from_dict(request_log_to_dict(log))) \
        == request_log_to_dict(log)
