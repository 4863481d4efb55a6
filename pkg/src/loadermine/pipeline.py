"""End-to-end run: captured sessions in, partitioned corpus out.

Seven stages, each writing one artifact (atomically, tmp + rename, so a
failing stage leaves earlier artifacts intact):

    preprocess -> corpus.jsonl
    tokenize   -> tokens.jsonl
    fit-vocab  -> vocab.json
    vectorize  -> vectors.bin
    cluster    -> tree.json
    cut        -> partition.json
    templates  -> templates.jsonl

A run manifest records the resolved config, its hash and per-stage
timings; everything but the timings is reproducible byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass
from typing import Callable

from . import cluster as cluster_mod
from . import preprocess as pre
from . import template as template_mod
from . import tokenizer as tok
from . import vectorizer as vec
from .sessions import SessionStore, export_sessions

ARTIFACTS = {
    "preprocess": "corpus.jsonl",
    "tokenize": "tokens.jsonl",
    "fit-vocab": "vocab.json",
    "vectorize": "vectors.bin",
    "cluster": "tree.json",
    "cut": "partition.json",
    "templates": "templates.jsonl",
}

STAGE_ORDER = tuple(ARTIFACTS)

MANIFEST_NAME = "run-manifest.json"


@dataclass
class PipelineConfig:
    sessions_path: str
    out_dir: str
    per_host_cap: int = 20
    dedup: bool = True
    prompt_patterns: tuple = pre.DEFAULT_PROMPT_PATTERNS
    threshold: float = 60.0
    match_score: float = 1.0
    gap_token_penalty: float = 0.0
    gap_vs_gap_score: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.threshold <= 0:
            raise PipelineConfigError("threshold must be > 0")
        if self.per_host_cap < 1:
            raise PipelineConfigError("per_host_cap must be >= 1")
        paths = [os.path.abspath(self.sessions_path)] + [
            os.path.abspath(os.path.join(self.out_dir, name))
            for name in ARTIFACTS.values()
        ]
        if len(set(paths)) != len(paths):
            raise PipelineConfigError("input and artifact paths must be distinct")


class PipelineConfigError(ValueError):
    pass


class PipelineStageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def config_hash(config: PipelineConfig) -> str:
    canon = json.dumps(asdict(config), sort_keys=True, default=list)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def run_pipeline(config: PipelineConfig,
                 on_stage: Callable[[str, float], None] | None = None) -> dict:
    """Execute all stages; returns the manifest dict (also written to
    out_dir/run-manifest.json)."""
    config.validate()
    os.makedirs(config.out_dir, exist_ok=True)
    paths = {stage: os.path.join(config.out_dir, name)
             for stage, name in ARTIFACTS.items()}

    state: dict = {}
    stages: dict[str, Callable[[], None]] = {
        "preprocess": lambda: _stage_preprocess(config, paths, state),
        "tokenize": lambda: _stage_tokenize(config, paths, state),
        "fit-vocab": lambda: _stage_fit_vocab(config, paths, state),
        "vectorize": lambda: _stage_vectorize(config, paths, state),
        "cluster": lambda: _stage_cluster(config, paths, state),
        "cut": lambda: _stage_cut(config, paths, state),
        "templates": lambda: _stage_templates(config, paths, state),
    }

    manifest_stages = []
    for stage in STAGE_ORDER:
        t0 = time.perf_counter()
        try:
            stages[stage]()
        except Exception as exc:
            raise PipelineStageError(stage, exc) from exc
        seconds = time.perf_counter() - t0
        manifest_stages.append({
            "name": stage,
            "artifact": ARTIFACTS[stage],
            "sha256": _sha256_file(paths[stage]),
            "seconds": round(seconds, 6),
        })
        if on_stage is not None:
            on_stage(stage, seconds)

    manifest = {
        "config": json.loads(json.dumps(asdict(config), default=list)),
        "config_hash": config_hash(config),
        "stages": manifest_stages,
    }
    _atomic_write_text(os.path.join(config.out_dir, MANIFEST_NAME),
                       json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _atomic_write_text(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atomic(path: str, write: Callable[[str], None]) -> None:
    tmp = path + ".tmp"
    write(tmp)
    os.replace(tmp, path)


def _stage_preprocess(config: PipelineConfig, paths: dict, state: dict) -> None:
    store = SessionStore(config.sessions_path)
    logs = []
    for conv in export_sessions(store):
        log = pre.preprocess_conversation(conv, patterns=config.prompt_patterns)
        if log is not None:
            logs.append(log)
    manifest = pre.build_corpus(logs, per_host_cap=config.per_host_cap,
                                dedup=config.dedup)
    if not manifest.logs:
        raise ValueError("no request logs survived preprocessing")
    state["corpus"] = manifest.logs
    _atomic(paths["preprocess"], lambda p: pre.write_corpus(p, manifest.logs))


def _stage_tokenize(config: PipelineConfig, paths: dict, state: dict) -> None:
    sequences = [tok.tokenize(log.payload, log_id=log.log_id)
                 for log in state["corpus"]]
    state["sequences"] = sequences
    _atomic(paths["tokenize"], lambda p: tok.write_token_sequences(p, sequences))


def _stage_fit_vocab(config: PipelineConfig, paths: dict, state: dict) -> None:
    vocab = vec.fit_vocabulary(state["sequences"])
    state["vocab"] = vocab
    _atomic(paths["fit-vocab"],
            lambda p: _write_text(p, vec.vocabulary_to_json(vocab) + "\n"))


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _stage_vectorize(config: PipelineConfig, paths: dict, state: dict) -> None:
    vocab = state["vocab"]
    vectors = [vec.vectorize(seq, vocab) for seq in state["sequences"]]
    state["vectors"] = vectors
    _atomic(paths["vectorize"], lambda p: vec.write_vectors(p, vectors, vocab))


def _stage_cluster(config: PipelineConfig, paths: dict, state: dict) -> None:
    vectors = state["vectors"]
    if len(vectors) < 2:
        raise ValueError(f"need at least 2 request logs to cluster, got {len(vectors)}")
    D = cluster_mod.pairwise_distance(vectors, state["vocab"].dim_total)
    tree = cluster_mod.agglomerate(D, leaf_log_ids=[v.log_id for v in vectors])
    state["tree"] = tree
    _atomic(paths["cluster"], lambda p: cluster_mod.write_tree(p, tree))


def _stage_cut(config: PipelineConfig, paths: dict, state: dict) -> None:
    partition = cluster_mod.cut(state["tree"], config.threshold)
    state["partition"] = partition
    _atomic(paths["cut"], lambda p: cluster_mod.write_partition(p, partition))


def _stage_templates(config: PipelineConfig, paths: dict, state: dict) -> None:
    params = template_mod.AlignmentParams(
        match_score=config.match_score,
        gap_token_penalty=config.gap_token_penalty,
        gap_vs_gap_score=config.gap_vs_gap_score,
    )
    sequences = {seq.log_id: seq for seq in state["sequences"]}
    templates = template_mod.build_templates(state["tree"], sequences, params)
    state["templates"] = templates
    _atomic(paths["templates"], lambda p: template_mod.write_templates(p, templates))
