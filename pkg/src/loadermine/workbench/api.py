"""HTTP JSON API over a refinement session, consumed by the explorer UI.

One writer at a time: decision handlers take the session lock, readers
snapshot under the same lock, so no request ever observes a half-applied
decision. Accepted decisions are appended to the decision log file when
one is configured, keeping the session replayable across restarts.
"""

from __future__ import annotations

import json
import os
import threading

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from ..cluster import tree_to_dict
from ..template import render_template, template_to_dict
from .report import build_report
from .session import (
    Decision,
    DecisionError,
    RefinementSession,
    decision_to_dict,
    family_id_for,
    write_decisions,
    write_families,
)


class DecisionRequest(BaseModel):
    action: str
    rationale: str = ""
    criteria_tags: list[str] = Field(default_factory=list)


class DecisionResponse(BaseModel):
    node_id: int
    action: str
    working_clusters: list[int]


class PartitionCluster(BaseModel):
    node_id: int
    size: int
    height: float
    family_id: str


class PartitionResponse(BaseModel):
    threshold: float
    clusters: list[PartitionCluster]


class FamilyInfo(BaseModel):
    family_id: str
    name: str
    kind: str
    member_clusters: list[int]
    leaf_count: int
    scanner_suggested: bool


class FamiliesResponse(BaseModel):
    families: list[FamilyInfo]


class FamilyUpdateRequest(BaseModel):
    name: str | None = None
    kind: str | None = None


class HostLabelInfo(BaseModel):
    host: str
    family_id: str
    vote_counts: dict[str, int]


class HostLabelsResponse(BaseModel):
    labels: list[HostLabelInfo]


class TemplateResponse(BaseModel):
    node_id: int
    slots: list[dict]
    stability: float
    rendered: str


class ExportRequest(BaseModel):
    out_dir: str | None = None


class ExportResponse(BaseModel):
    families_path: str
    decisions_path: str


def _partition_payload(session: RefinementSession) -> PartitionResponse:
    clusters = []
    for nid in session.working_clusters():
        node = session.tree.nodes[nid]
        clusters.append(PartitionCluster(
            node_id=nid, size=node.size, height=node.height,
            family_id=family_id_for(nid),
        ))
    return PartitionResponse(threshold=session.initial_partition.threshold,
                             clusters=clusters)


def create_app(session: RefinementSession,
               decisions_path: str | None = None,
               export_dir: str | None = None,
               host_metadata: dict | None = None) -> FastAPI:
    app = FastAPI(title="loadermine workbench", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    lock = threading.Lock()

    @app.get("/api/tree")
    def get_tree() -> dict:
        with lock:
            return tree_to_dict(session.tree)

    @app.get("/api/node/{node_id}/template", response_model=TemplateResponse)
    def get_template(node_id: int) -> TemplateResponse:
        with lock:
            template = session.templates.get(node_id)
            if template is None:
                raise HTTPException(status_code=404, detail=f"node {node_id} has no template")
            d = template_to_dict(template)
            return TemplateResponse(node_id=node_id, slots=d["slots"],
                                    stability=d["stability"],
                                    rendered=render_template(template))

    @app.get("/api/partition", response_model=PartitionResponse)
    def get_partition() -> PartitionResponse:
        with lock:
            return _partition_payload(session)

    @app.get("/api/families", response_model=FamiliesResponse)
    def get_families() -> FamiliesResponse:
        with lock:
            leaf_counts = {}
            for leaf, fam in session.leaf_families().items():
                leaf_counts[fam] = leaf_counts.get(fam, 0) + 1
            out = []
            for fam in session.families():
                out.append(FamilyInfo(
                    family_id=fam.family_id,
                    name=fam.name,
                    kind=fam.kind,
                    member_clusters=fam.member_clusters,
                    leaf_count=leaf_counts.get(fam.family_id, 0),
                    scanner_suggested=bool(fam.member_clusters) and all(
                        session.scanner_suggested(nid) for nid in fam.member_clusters
                    ),
                ))
            return FamiliesResponse(families=out)

    @app.post("/api/family/{family_id}", response_model=FamilyInfo)
    def update_family(family_id: str, req: FamilyUpdateRequest) -> FamilyInfo:
        with lock:
            try:
                fam = session.set_family(family_id, name=req.name, kind=req.kind)
            except KeyError as exc:
                raise HTTPException(status_code=404, detail=str(exc))
            except DecisionError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            return FamilyInfo(
                family_id=fam.family_id, name=fam.name, kind=fam.kind,
                member_clusters=fam.member_clusters,
                leaf_count=sum(
                    session.tree.nodes[nid].size for nid in fam.member_clusters
                ),
                scanner_suggested=bool(fam.member_clusters) and all(
                    session.scanner_suggested(nid) for nid in fam.member_clusters
                ),
            )

    @app.post("/api/node/{node_id}/decision", response_model=DecisionResponse)
    def post_decision(node_id: int, req: DecisionRequest) -> DecisionResponse:
        with lock:
            try:
                decision = Decision(
                    node_id=node_id, action=req.action,
                    rationale=req.rationale, criteria_tags=req.criteria_tags,
                )
                working = session.apply_decision(decision)
            except KeyError as exc:
                raise HTTPException(status_code=404, detail=str(exc))
            except DecisionError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            if decisions_path:
                with open(decisions_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(decision_to_dict(decision),
                                        separators=(",", ":")) + "\n")
            return DecisionResponse(node_id=node_id, action=req.action,
                                    working_clusters=working)

    @app.get("/api/decisions")
    def get_decisions() -> dict:
        with lock:
            return {"decisions": [decision_to_dict(d) for d in session.decisions]}

    @app.get("/api/hosts/labels", response_model=HostLabelsResponse)
    def get_host_labels() -> HostLabelsResponse:
        with lock:
            return HostLabelsResponse(labels=[
                HostLabelInfo(host=l.host, family_id=l.family_id,
                              vote_counts=l.vote_counts)
                for l in session.label_hosts()
            ])

    @app.get("/api/report")
    def get_report() -> dict:
        with lock:
            return build_report(session, host_metadata)

    @app.post("/api/export", response_model=ExportResponse)
    def post_export(req: ExportRequest) -> ExportResponse:
        with lock:
            out_dir = req.out_dir or export_dir or "."
            os.makedirs(out_dir, exist_ok=True)
            families_path = os.path.join(out_dir, "families.json")
            decisions_out = os.path.join(out_dir, "decisions.jsonl")
            write_families(families_path, session)
            write_decisions(decisions_out, session.decisions)
            return ExportResponse(families_path=families_path,
                                  decisions_path=decisions_out)

    return app
