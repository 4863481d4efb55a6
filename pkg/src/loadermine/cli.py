"""Command line entry point wiring all stages together."""

from __future__ import annotations

import argparse
import json
import sys

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3


def _addr(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port, got {value!r}")
    return host, int(port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loadermine",
        description="Capture telnet intrusion sessions and mine bot-loader families.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capture", help="run the recording proxy")
    p.add_argument("--listen", type=_addr, required=True, metavar="HOST:PORT")
    p.add_argument("--upstream", type=_addr, required=True, metavar="HOST:PORT")
    p.add_argument("--fake-shell", metavar="PROFILE",
                   help="serve the built-in fake shell on the upstream address"
                        " (path to a profile JSON, or 'default')")
    p.add_argument("--out", default="sessions.jsonl")
    p.add_argument("--tag", choices=("wild", "control_group"), default="wild")
    p.add_argument("--idle-timeout", type=float, default=120.0)
    p.add_argument("--max-session-bytes", type=int, default=1 << 20)
    p.add_argument("--sub-username", help="credential substitution: username sent upstream")
    p.add_argument("--sub-password", help="credential substitution: password sent upstream")

    p = sub.add_parser("simulate", help="generate the labeled control-group corpus")
    p.add_argument("--families", default="all",
                   help="'all' or comma-separated playbook names")
    p.add_argument("--hosts", type=int, default=5)
    p.add_argument("--sessions", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default="control.jsonl")
    p.add_argument("--labels", default="labels.csv")

    p = sub.add_parser("preprocess", help="sessions -> request-log corpus")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cap", type=int, default=20)
    p.add_argument("--no-dedup", action="store_true")
    p.add_argument("--prompt-pattern", action="append", default=None,
                   metavar="REGEX", help="credential prompt pattern (repeatable)")

    p = sub.add_parser("tokenize", help="corpus -> token sequences")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("vectorize", help="tokens -> vocabulary + count vectors")
    p.add_argument("--tokens", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vocab", required=True)

    p = sub.add_parser("cluster", help="vectors -> agglomerative tree")
    p.add_argument("--vectors", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("cut", help="tree -> threshold partition")
    p.add_argument("--tree", required=True)
    p.add_argument("--threshold", type=float, default=60.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("templates", help="tree + tokens -> consensus templates")
    p.add_argument("--tree", required=True)
    p.add_argument("--tokens", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--match-score", type=float, default=1.0)
    p.add_argument("--gap-penalty", type=float, default=0.0)
    p.add_argument("--gap-vs-gap", type=float, default=0.0)

    p = sub.add_parser("workbench", help="analyst refinement loop")
    wb = p.add_subparsers(dest="workbench_command", required=True)
    for name in ("serve", "report"):
        w = wb.add_parser(name)
        w.add_argument("--tree", required=True)
        w.add_argument("--templates", required=True)
        w.add_argument("--partition", required=True)
        w.add_argument("--corpus", required=True)
        w.add_argument("--meta", help="host metadata CSV (host,country,asn,as_name)")
        w.add_argument("--decisions", help="decision log to replay and append to")
        if name == "serve":
            w.add_argument("--bind", type=_addr, default=("127.0.0.1", 8737),
                           metavar="HOST:PORT")
            w.add_argument("--export-dir", default=".")
        else:
            w.add_argument("--out", help="write the report here (default: stdout)")

    p = sub.add_parser("pipeline", help="run corpus -> partition end to end")
    pl = p.add_subparsers(dest="pipeline_command", required=True)
    r = pl.add_parser("run")
    r.add_argument("--config", help="TOML config file ([pipeline] table)")
    r.add_argument("--in", dest="input", help="sessions JSONL (overrides config)")
    r.add_argument("--out-dir", help="artifact directory (overrides config)")
    r.add_argument("--cap", type=int)
    r.add_argument("--threshold", type=float)
    r.add_argument("--no-dedup", action="store_true")
    r.add_argument("--prompt-pattern", action="append", default=None, metavar="REGEX")
    r.add_argument("--match-score", type=float)
    r.add_argument("--gap-penalty", type=float)
    r.add_argument("--gap-vs-gap", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--json-logs", action="store_true")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "capture": cmd_capture,
        "simulate": cmd_simulate,
        "preprocess": cmd_preprocess,
        "tokenize": cmd_tokenize,
        "vectorize": cmd_vectorize,
        "cluster": cmd_cluster,
        "cut": cmd_cut,
        "templates": cmd_templates,
        "workbench": cmd_workbench,
        "pipeline": cmd_pipeline,
    }
    try:
        return handlers[args.command](args)
    except BrokenPipeError:
        return EXIT_OK


def cmd_capture(args) -> int:
    from .capture import CredentialSubstitution, ProxyConfig, run_proxy
    from .fakeshell import ShellProfile, start_fake_shell
    from .sessions import SessionStore

    substitution = None
    if args.sub_username or args.sub_password:
        if not (args.sub_username and args.sub_password):
            print("capture: --sub-username and --sub-password go together",
                  file=sys.stderr)
            return EXIT_CONFIG
        substitution = CredentialSubstitution(
            replacement_username=args.sub_username,
            replacement_password=args.sub_password,
        )
    try:
        config = ProxyConfig(
            listen_host=args.listen[0], listen_port=args.listen[1],
            upstream_host=args.upstream[0], upstream_port=args.upstream[1],
            credential_substitution=substitution,
            max_session_bytes=args.max_session_bytes,
            idle_timeout=args.idle_timeout,
            origin_tag=args.tag,
        )
    except ValueError as exc:
        print(f"capture: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.fake_shell:
        try:
            profile = (ShellProfile() if args.fake_shell == "default"
                       else ShellProfile.from_json_file(args.fake_shell))
            start_fake_shell(args.upstream[0], args.upstream[1], profile)
        except (OSError, ValueError) as exc:
            print(f"capture: cannot start fake shell: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"fake shell on {args.upstream[0]}:{args.upstream[1]}", file=sys.stderr)

    store = SessionStore(args.out)
    print(f"proxy {args.listen[0]}:{args.listen[1]} -> "
          f"{args.upstream[0]}:{args.upstream[1]}, recording to {args.out}",
          file=sys.stderr)
    try:
        run_proxy(config, store)
    except KeyboardInterrupt:
        pass
    except OSError as exc:
        print(f"capture: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .sessions import SessionStore
    from .simulator import builtin_playbooks, generate, write_labels_csv

    books = builtin_playbooks()
    if args.families != "all":
        wanted = [name.strip() for name in args.families.split(",") if name.strip()]
        by_name = {b.family_name: b for b in books}
        unknown = [w for w in wanted if w not in by_name]
        if unknown:
            print(f"simulate: unknown families {unknown}; available: "
                  f"{sorted(by_name)}", file=sys.stderr)
            return EXIT_CONFIG
        books = [by_name[w] for w in wanted]
    if args.hosts < 1 or args.sessions < 1:
        print("simulate: --hosts and --sessions must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    conversations, labels = generate(books, args.hosts, args.sessions, args.seed)
    store = SessionStore(args.out)
    import os
    if os.path.exists(args.out):
        os.remove(args.out)
    for conv in conversations:
        store.append(conv)
    write_labels_csv(args.labels, labels)
    print(f"wrote {len(conversations)} conversations to {args.out}, "
          f"labels to {args.labels}", file=sys.stderr)
    return EXIT_OK


def cmd_preprocess(args) -> int:
    from collections import Counter

    from .preprocess import (DEFAULT_PROMPT_PATTERNS, build_corpus,
                             preprocess_conversation, write_corpus)
    from .sessions import SessionStore, export_sessions

    patterns = args.prompt_pattern or list(DEFAULT_PROMPT_PATTERNS)
    counters: Counter = Counter()
    store = SessionStore(args.input)
    logs = []
    for conv in export_sessions(store):
        log = preprocess_conversation(conv, patterns=patterns, counters=counters)
        if log is not None:
            logs.append(log)
    manifest = build_corpus(logs, per_host_cap=args.cap, dedup=not args.no_dedup)
    write_corpus(args.out, manifest.logs)
    print(f"{len(manifest.logs)} request logs -> {args.out} "
          f"(skipped records: {store.corrupt_count}, "
          f"dangling IAC bytes: {counters['dangling_iac_bytes']})", file=sys.stderr)
    return EXIT_OK


def cmd_tokenize(args) -> int:
    from .preprocess import read_corpus
    from .tokenizer import tokenize, write_token_sequences

    sequences = [tokenize(log.payload, log_id=log.log_id)
                 for log in read_corpus(args.input)]
    write_token_sequences(args.out, sequences)
    print(f"{len(sequences)} token sequences -> {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_vectorize(args) -> int:
    from .tokenizer import read_token_sequences
    from .vectorizer import (fit_vocabulary, vectorize, vocabulary_to_json,
                             write_vectors)

    sequences = read_token_sequences(args.tokens)
    vocab = fit_vocabulary(sequences)
    vectors = [vectorize(seq, vocab) for seq in sequences]
    with open(args.vocab, "w", encoding="utf-8") as fh:
        fh.write(vocabulary_to_json(vocab) + "\n")
    write_vectors(args.out, vectors, vocab)
    print(f"{len(vectors)} vectors over {vocab.dim_total} dimensions -> {args.out}",
          file=sys.stderr)
    return EXIT_OK


def cmd_cluster(args) -> int:
    from .cluster import agglomerate, pairwise_distance, write_tree
    from .vectorizer import read_vectors

    vectors, dims, _ = read_vectors(args.vectors)
    if len(vectors) < 2:
        print("cluster: need at least 2 vectors", file=sys.stderr)
        return EXIT_STAGE
    D = pairwise_distance(vectors, dims)
    tree = agglomerate(D, leaf_log_ids=[v.log_id for v in vectors])
    write_tree(args.out, tree)
    root_height = tree.nodes[tree.root].height
    print(f"tree over {len(vectors)} logs, height {root_height:.2f} -> {args.out}",
          file=sys.stderr)
    return EXIT_OK


def cmd_cut(args) -> int:
    from .cluster import cut, read_tree, write_partition

    if args.threshold <= 0:
        print("cut: --threshold must be > 0", file=sys.stderr)
        return EXIT_CONFIG
    tree = read_tree(args.tree)
    partition = cut(tree, args.threshold)
    write_partition(args.out, partition)
    print(f"{len(partition.clusters)} clusters at T={args.threshold} -> {args.out}",
          file=sys.stderr)
    return EXIT_OK


def cmd_templates(args) -> int:
    from .cluster import read_tree
    from .template import AlignmentParams, build_templates, write_templates
    from .tokenizer import read_token_sequences

    tree = read_tree(args.tree)
    sequences = {seq.log_id: seq for seq in read_token_sequences(args.tokens)}
    try:
        params = AlignmentParams(match_score=args.match_score,
                                 gap_token_penalty=args.gap_penalty,
                                 gap_vs_gap_score=args.gap_vs_gap)
    except ValueError as exc:
        print(f"templates: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    templates = build_templates(tree, sequences, params)
    write_templates(args.out, templates)
    print(f"{len(templates)} templates -> {args.out}", file=sys.stderr)
    return EXIT_OK


def _load_workbench_session(args):
    from .cluster import read_partition, read_tree
    from .preprocess import read_corpus
    from .template import read_templates
    from .workbench import start_session
    from .workbench.session import read_decisions

    import os

    tree = read_tree(args.tree)
    templates = read_templates(args.templates)
    partition = read_partition(args.partition)
    corpus = list(read_corpus(args.corpus))
    decisions = []
    if args.decisions and os.path.exists(args.decisions):
        decisions = read_decisions(args.decisions)
    session = start_session(tree, templates, partition, corpus, decisions)
    metadata = None
    skipped = 0
    if args.meta:
        from .workbench import read_host_metadata

        metadata, skipped = read_host_metadata(args.meta)
    return session, metadata, skipped


def cmd_workbench(args) -> int:
    try:
        session, metadata, skipped = _load_workbench_session(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"workbench: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.workbench_command == "report":
        from .workbench import build_report

        report = build_report(session, metadata, skipped)
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK

    import uvicorn

    from .workbench.api import create_app

    app = create_app(session, decisions_path=args.decisions,
                     export_dir=args.export_dir, host_metadata=metadata)
    host, port = args.bind
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    from .pipeline import (PipelineConfig, PipelineConfigError,
                           PipelineStageError, run_pipeline)

    settings = {}
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                doc = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            print(f"pipeline: cannot read config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        table = doc.get("pipeline", doc)
        renames = {"sessions": "sessions_path", "cap": "per_host_cap"}
        for key, value in table.items():
            settings[renames.get(key, key)] = value

    overrides = {
        "sessions_path": args.input,
        "out_dir": args.out_dir,
        "per_host_cap": args.cap,
        "threshold": args.threshold,
        "match_score": args.match_score,
        "gap_token_penalty": args.gap_penalty,
        "gap_vs_gap_score": args.gap_vs_gap,
        "seed": args.seed,
    }
    for key, value in overrides.items():
        if value is not None:
            settings[key] = value
    if args.no_dedup:
        settings["dedup"] = False
    if args.prompt_pattern:
        settings["prompt_patterns"] = args.prompt_pattern
    if "prompt_patterns" in settings:
        settings["prompt_patterns"] = tuple(settings["prompt_patterns"])

    if not settings.get("sessions_path") or not settings.get("out_dir"):
        print("pipeline: --in and --out-dir (or config equivalents) are required",
              file=sys.stderr)
        return EXIT_CONFIG

    try:
        config = PipelineConfig(**settings)
        config.validate()
    except (TypeError, PipelineConfigError) as exc:
        print(f"pipeline: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    def on_stage(stage: str, seconds: float) -> None:
        if args.json_logs:
            print(json.dumps({"stage": stage, "seconds": round(seconds, 3)}))
        else:
            print(f"[{stage}] done in {seconds:.2f}s", file=sys.stderr)

    try:
        manifest = run_pipeline(config, on_stage=on_stage)
    except PipelineStageError as exc:
        print(f"pipeline: {exc}", file=sys.stderr)
        return EXIT_STAGE
    if args.json_logs:
        print(json.dumps({"done": True, "config_hash": manifest["config_hash"]}))
    else:
        print(f"artifacts in {config.out_dir} (config {manifest['config_hash'][:12]})",
              file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
