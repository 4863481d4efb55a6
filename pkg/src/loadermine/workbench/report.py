"""Family reports, optionally joined with offline host metadata."""

from __future__ import annotations

import csv
from collections import Counter

from ..template import render_template
from .session import RefinementSession, UNASSIGNED_FAMILY

METADATA_COLUMNS = ("host", "country", "asn", "as_name")


def read_host_metadata(path: str) -> tuple[dict[str, dict], int]:
    """CSV with columns host,country,asn,as_name. Malformed rows are
    skipped and counted, never fatal."""
    rows: dict[str, dict] = {}
    skipped = 0
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                host = (row.get("host") or "").strip()
                if not host:
                    raise ValueError("missing host")
                rows[host] = {
                    "country": (row.get("country") or "").strip(),
                    "asn": (row.get("asn") or "").strip(),
                    "as_name": (row.get("as_name") or "").strip(),
                }
            except (ValueError, AttributeError):
                skipped += 1
    return rows, skipped


def build_report(session: RefinementSession,
                 host_metadata: dict[str, dict] | None = None,
                 metadata_rows_skipped: int = 0) -> dict:
    """Per-family membership, host counts and representative templates.
    Regenerating from the same session state is byte-identical: no
    timestamps, keys ordered."""
    leaf_fam = session.leaf_families()
    labels = session.label_hosts()
    hosts_by_family: dict[str, list[str]] = {}
    for label in labels:
        hosts_by_family.setdefault(label.family_id, []).append(label.host)

    leaf_count: Counter = Counter(leaf_fam.values())
    log_hosts: dict[str, set] = {}
    for node in session.tree.nodes:
        if node.kind != "leaf":
            continue
        fam = leaf_fam[node.node_id]
        log = session.corpus_by_id[node.log_id]
        log_hosts.setdefault(fam, set()).add(log.source_host)

    families = []
    for fam in session.families():
        if fam.family_id == UNASSIGNED_FAMILY and not fam.member_clusters:
            continue
        representative = ""
        if fam.member_clusters:
            biggest = max(fam.member_clusters,
                          key=lambda nid: (session.tree.nodes[nid].size, -nid))
            template = session.templates.get(biggest)
            if template is not None:
                representative = render_template(template)
        entry = {
            "family_id": fam.family_id,
            "name": fam.name,
            "kind": fam.kind,
            "member_clusters": sorted(fam.member_clusters),
            "cluster_count": len(fam.member_clusters),
            "leaf_count": int(leaf_count.get(fam.family_id, 0)),
            "host_count": len(log_hosts.get(fam.family_id, ())),
            "labeled_hosts": sorted(hosts_by_family.get(fam.family_id, [])),
            "representative_template": representative,
            "scanner_suggested": all(
                session.scanner_suggested(nid) for nid in fam.member_clusters
            ),
        }
        if host_metadata is not None:
            countries: Counter = Counter()
            systems: Counter = Counter()
            for host in entry["labeled_hosts"]:
                meta = host_metadata.get(host)
                if meta is None:
                    continue
                if meta["country"]:
                    countries[meta["country"]] += 1
                if meta["asn"]:
                    systems[f"{meta['asn']} {meta['as_name']}".strip()] += 1
            entry["countries"] = dict(sorted(countries.items()))
            entry["autonomous_systems"] = dict(sorted(systems.items()))
        families.append(entry)

    report = {
        "working_cluster_count": len(session.working_clusters()),
        "decision_count": len(session.decisions),
        "families": families,
        "host_labels": [
            {"host": l.host, "family_id": l.family_id, "vote_counts": l.vote_counts}
            for l in labels
        ],
    }
    if host_metadata is not None:
        report["metadata_rows_skipped"] = metadata_rows_skipped
    return report
