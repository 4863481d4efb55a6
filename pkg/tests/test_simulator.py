from __future__ import annotations

import itertools

import numpy as np
import pytest

from loadermine.cluster import pairwise_distance
from loadermine.preprocess import build_corpus, preprocess_conversation
from loadermine.sessions import TAG_CONTROL, conversation_to_dict
from loadermine.simulator import (
    KIND_LOADER,
    KIND_SCANNER,
    PHASES,
    builtin_playbooks,
    generate,
    read_labels_csv,
    render_session_lines,
    write_labels_csv,
)
from loadermine.tokenizer import tokenize
from loadermine.vectorizer import fit_vocabulary, vectorize

DOWNLOAD_WORDS = ("wget", "tftp", "curl", "ftpget")


def test_at_least_eight_distinct_playbooks():
    books = builtin_playbooks()
    assert len(books) >= 8
    assert len({b.family_name for b in books}) == len(books)
    kinds = [b.kind for b in books]
    assert kinds.count(KIND_SCANNER) == 2
    assert kinds.count(KIND_LOADER) >= 6


def test_playbooks_cover_all_phases():
    for book in builtin_playbooks():
        assert set(book.phases) <= set(PHASES)


def test_mirai_release_directory_probe_renders_nippon_marker():
    book = next(b for b in builtin_playbooks() if b.family_name == "mirai-release")
    phase2 = book.phases["get_working_directory"]
    assert any(".nippon" in line for line in phase2)
    assert any(r"\x6b\x61\x6d\x69" in line for line in phase2)
    rendered = render_session_lines(book, seed=42, host_idx=0, session_idx=0)
    assert any(".nippon" in line for line in rendered)


def test_identity_variant_renders_hostname_rename():
    book = next(b for b in builtin_playbooks() if b.family_name == "sefa")
    rendered = render_session_lines(book, seed=42, host_idx=1, session_idx=0)
    assert any(line.startswith("hostname SEFA_ID:") for line in rendered)
    assert any(line == "/bin/busybox SEFA" for line in rendered)


def test_hardcoded_path_probe_line_present():
    book = next(b for b in builtin_playbooks() if b.family_name == "hardcoded-path")
    assert ">/var/tmp/.file && cd /var/tmp/" in book.phases["get_working_directory"]


def test_multi_script_drops_named_scripts():
    book = next(b for b in builtin_playbooks() if b.family_name == "multi-script")
    rendered = "\n".join(render_session_lines(book, 42, 0, 0))
    assert rendered.count("whattttttlol") >= 12
    assert "whattttttlol.1.sh" in rendered


def test_scanners_never_render_download_commands():
    for book in builtin_playbooks():
        if book.kind != KIND_SCANNER:
            continue
        for host, session in itertools.product(range(3), range(3)):
            text = "\n".join(render_session_lines(book, 42, host, session))
            assert not any(w in text for w in DOWNLOAD_WORDS), book.family_name


def test_same_seed_renders_identical_sessions():
    for book in builtin_playbooks():
        a = render_session_lines(book, seed=7, host_idx=2, session_idx=3)
        b = render_session_lines(book, seed=7, host_idx=2, session_idx=3)
        assert a == b


def test_different_hosts_get_different_tokens():
    book = next(b for b in builtin_playbooks() if b.family_name == "mirai-release")
    tokens = set()
    for host in range(5):
        lines = render_session_lines(book, 42, host, 0)
        token_lines = [l for l in lines if l.startswith("/bin/busybox ")
                       and " " not in l[13:]]
        assert token_lines
        tokens.add(token_lines[0])
    assert len(tokens) == 5


def test_generate_counts_and_tags(control_corpus):
    conversations, labels = control_corpus
    assert len(conversations) == 8 * 5 * 5 == 200
    assert len(labels) == 200
    assert all(c.origin_tag == TAG_CONTROL for c in conversations)
    assert len({c.session_id for c in conversations}) == 200


def test_label_fidelity(control_corpus):
    conversations, labels = control_corpus
    by_id = {l.session_id: l for l in labels}
    for conv in conversations:
        label = by_id[conv.session_id]
        assert label.family in conv.session_id
        assert conv.peer_host == label.host


def test_generate_is_deterministic(control_corpus):
    conversations, labels = control_corpus
    again, labels2 = generate(builtin_playbooks(), 5, 5, 42)
    assert [conversation_to_dict(c) for c in again] == \
           [conversation_to_dict(c) for c in conversations]
    assert [(l.session_id, l.host, l.family) for l in labels2] == \
           [(l.session_id, l.host, l.family) for l in labels]


def test_hosts_use_documentation_range(control_corpus):
    conversations, _ = control_corpus
    assert all(c.peer_host.startswith("203.0.113.") for c in conversations)


def test_sessions_exercise_protocol_and_credentials(control_corpus):
    conversations, _ = control_corpus
    conv = conversations[0]
    raw_requests = b"".join(m.payload for m in conv.request_messages())
    assert b"\xff" in raw_requests  # negotiation present before stripping
    log = preprocess_conversation(conv)
    assert b"\xff" not in log.payload
    assert b"root" not in log.payload.split(b"\r\n")[0]  # credentials removed
    first_line = log.payload.split(b"\r\n", 1)[0]
    assert first_line  # starts straight at the first command


def test_intra_family_distances_below_cross_family(control_corpus):
    conversations, labels = control_corpus
    fam_of_session = {l.session_id: l.family for l in labels}
    logs = [preprocess_conversation(c) for c in conversations]
    manifest = build_corpus([l for l in logs if l is not None])
    sequences = [tokenize(l.payload, log_id=l.log_id) for l in manifest.logs]
    vocab = fit_vocabulary(sequences)
    vectors = [vectorize(s, vocab) for s in sequences]
    D = pairwise_distance(vectors, vocab.dim_total)
    fams = [fam_of_session[l.session_ids[0]] for l in manifest.logs]
    intra, inter = [], []
    for i, j in itertools.combinations(range(len(fams)), 2):
        (intra if fams[i] == fams[j] else inter).append(D[i, j])
    assert np.mean(intra) < np.mean(inter) / 2
    assert np.max(intra) < np.max(inter)


def test_labels_csv_round_trip(tmp_path, control_corpus):
    _, labels = control_corpus
    path = tmp_path / "labels.csv"
    write_labels_csv(str(path), labels)
    back = read_labels_csv(str(path))
    assert [(l.session_id, l.host, l.family) for l in back] == \
           [(l.session_id, l.host, l.family) for l in labels]


def test_generate_rejects_bad_counts():
    with pytest.raises(ValueError):
        generate(builtin_playbooks(), 0, 5, 1)
    with pytest.raises(ValueError):
        generate(builtin_playbooks(), 5, 0, 1)


def test_replay_through_fake_shell_loop_matches_direct_rendering(tmp_path):
    """Requests replayed through the live proxy + fake shell preprocess to
    the same request logs as the directly generated conversations."""
    import sys
    sys.path.insert(0, str(tmp_path.parent))  # keep import machinery happy

    from loadermine.capture import ProxyConfig, start_proxy
    from loadermine.fakeshell import start_fake_shell
    from loadermine.sessions import SessionStore

    from scripted_client import free_port, run_login_script, wait_for_sessions

    books = [b for b in builtin_playbooks() if b.family_name == "mirai-release"]
    conversations, _ = generate(books, hosts_per_family=1, sessions_per_host=1, seed=9)
    direct_log = preprocess_conversation(conversations[0])
    lines = [m.payload for m in conversations[0].request_messages()]

    shell_port, proxy_port = free_port(), free_port()
    shell = start_fake_shell("127.0.0.1", shell_port)
    store = SessionStore(str(tmp_path / "replay.jsonl"))
    proxy = start_proxy(ProxyConfig("127.0.0.1", proxy_port,
                                    "127.0.0.1", shell_port,
                                    idle_timeout=5.0), store)
    try:
        # replay: negotiation + credentials at the prompts, then the command
        # lines paced by the prompt
        commands = [p.rstrip(b"\r\n") for p in lines[3:]]
        run_login_script("127.0.0.1", proxy_port, commands,
                         username=lines[1].rstrip(b"\r\n"),
                         password=lines[2].rstrip(b"\r\n"),
                         negotiation=lines[0])
        conv = wait_for_sessions(store, 1)[0]
    finally:
        proxy.shutdown()
        proxy.server_close()
        shell.shutdown()
        shell.server_close()

    replayed_log = preprocess_conversation(conv)
    assert replayed_log is not None
    assert replayed_log.payload == direct_log.payload
