"""Whole-world persistence: save, load, resume exactly.

A snapshot is a single JSON document holding every piece of simulation state,
including the positions of all persistent random streams, so that
load(save(e)) continues bit-identically to a run that never stopped. Loading
refuses version mismatches and integrity violations (dangling gene ids).
"""

from __future__ import annotations

import json
import os
import tempfile

from .ecosystem import Community, Ecosystem, User
from .genes import Gene, GeneSet, Request
from .habitat import ArchiveEntry, Connection, GeneUsageState, Habitat
from .params import Params
from .rng import RandomSource

__all__ = [
    "SNAPSHOT_VERSION",
    "SnapshotError",
    "snapshot_save",
    "snapshot_load",
    "snapshot_bytes",
    "save_snapshot_file",
    "load_snapshot_file",
]

SNAPSHOT_VERSION = "ecodec-snapshot/1"


class SnapshotError(ValueError):
    """Snapshot refused: wrong version or inconsistent state."""


def _request_state(request: Request) -> dict:
    return {"wants": [[attr, weight] for attr, weight in request.sorted_wants()],
            "issuer": request.issuer}


def _request_from(state: dict) -> Request:
    return Request({int(a): float(w) for a, w in state["wants"]}, state["issuer"])


def _habitat_state(habitat: Habitat) -> dict:
    return {
        "habitat_id": habitat.habitat_id,
        "owner": habitat.owner,
        "request_count": habitat.request_count,
        "archive_seq": habitat.archive_seq,
        "connections": [
            {"target": t, "probability": habitat.connections[t].probability}
            for t in sorted(habitat.connections)
        ],
        "pool": [
            {
                "gene_id": gene_id,
                "unused": habitat.gene_pool[gene_id].unused_request_count,
                "escapes": habitat.gene_pool[gene_id].escapes_remaining,
                "arrived_at": habitat.gene_pool[gene_id].arrived_at,
                "delivered_by": sorted(habitat.gene_pool[gene_id].delivered_by),
            }
            for gene_id in sorted(habitat.gene_pool)
        ],
        "archive": [
            {
                "members": sorted(entry.gene_set.members),
                "provenance": sorted(entry.gene_set.provenance),
                "request": _request_state(entry.request),
                "seq": entry.seq,
            }
            for entry in habitat.archive
        ],
        "recent_requests": [_request_state(r) for r in habitat.recent_requests],
    }


def snapshot_save(ecosystem: Ecosystem) -> dict:
    """Serialize the complete ecosystem state to a JSON-compatible document."""
    return {
        "version": SNAPSHOT_VERSION,
        "clock": ecosystem.clock,
        "step_count": ecosystem.step_count,
        "next_gene_id": ecosystem.next_gene_id,
        "next_user_id": ecosystem.next_user_id,
        "weight_jitter": ecosystem.weight_jitter,
        "default_request_rate": ecosystem.default_request_rate,
        "params": ecosystem.params.to_dict(),
        "rng": ecosystem.rng.state(),
        "communities": [
            {
                "community_id": c.community_id,
                "vocabulary": sorted(c.vocabulary),
                "request_size_range": list(c.request_size_range),
            }
            for c in (ecosystem.communities[i] for i in sorted(ecosystem.communities))
        ],
        "users": [
            {
                "user_id": u.user_id,
                "community_ids": sorted(u.community_ids),
                "habitat_id": u.habitat_id,
                "request_rate": u.request_rate,
            }
            for u in (ecosystem.users[i] for i in sorted(ecosystem.users))
        ],
        "registry": [
            {
                "gene_id": g.gene_id,
                "provides": sorted(g.provides),
                "cost": g.cost,
                "origin_habitat": g.origin_habitat,
            }
            for g in (ecosystem.global_registry[i]
                      for i in sorted(ecosystem.global_registry))
        ],
        "habitats": [_habitat_state(ecosystem.habitats[i])
                     for i in sorted(ecosystem.habitats)],
    }


def snapshot_load(document: dict) -> Ecosystem:
    """Rebuild an ecosystem from a snapshot document.

    Refuses unknown versions and any pool or archive reference to a gene id
    missing from the registry.
    """
    if not isinstance(document, dict):
        raise SnapshotError("snapshot must be a JSON object")
    if document.get("version") != SNAPSHOT_VERSION:
        raise SnapshotError(f"unsupported snapshot version: {document.get('version')!r}")
    try:
        params = Params.from_dict(document["params"])
        rng = RandomSource.from_state(document["rng"])
        ecosystem = Ecosystem(params, rng,
                              weight_jitter=document["weight_jitter"],
                              default_request_rate=document["default_request_rate"])
        ecosystem.clock = document["clock"]
        ecosystem.step_count = document["step_count"]
        ecosystem.next_gene_id = document["next_gene_id"]
        ecosystem.next_user_id = document["next_user_id"]

        for c in document["communities"]:
            ecosystem.communities[c["community_id"]] = Community(
                c["community_id"], frozenset(c["vocabulary"]),
                tuple(c["request_size_range"]))
        for u in document["users"]:
            ecosystem.users[u["user_id"]] = User(
                u["user_id"], frozenset(u["community_ids"]),
                u["habitat_id"], u["request_rate"])
        for g in document["registry"]:
            ecosystem.global_registry[g["gene_id"]] = Gene(
                g["gene_id"], frozenset(g["provides"]), g["cost"],
                g["origin_habitat"])

        for h in document["habitats"]:
            habitat = Habitat(h["habitat_id"], h["owner"])
            habitat.request_count = h["request_count"]
            habitat.archive_seq = h["archive_seq"]
            for c in h["connections"]:
                habitat.connections[c["target"]] = Connection(
                    c["target"], c["probability"])
            for entry in h["pool"]:
                gene_id = entry["gene_id"]
                if gene_id not in ecosystem.global_registry:
                    raise SnapshotError(
                        f"habitat {habitat.habitat_id} pools unknown gene {gene_id}")
                habitat.gene_pool[gene_id] = GeneUsageState(
                    ecosystem.global_registry[gene_id], entry["unused"],
                    entry["escapes"], entry["arrived_at"],
                    set(entry["delivered_by"]))
            for entry in h["archive"]:
                for gene_id in entry["members"]:
                    if gene_id not in ecosystem.global_registry:
                        raise SnapshotError(
                            f"habitat {habitat.habitat_id} archives unknown "
                            f"gene {gene_id}")
                habitat.archive.append(ArchiveEntry(
                    GeneSet(frozenset(entry["members"]),
                            frozenset(entry["provenance"])),
                    _request_from(entry["request"]), entry["seq"]))
            habitat.recent_requests = [_request_from(r)
                                       for r in h["recent_requests"]]
            habitat.rebuild_recent_sims()
            ecosystem.habitats[habitat.habitat_id] = habitat
    except SnapshotError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotError(f"malformed snapshot: {exc}") from exc

    for user in ecosystem.users.values():
        if user.habitat_id not in ecosystem.habitats:
            raise SnapshotError(f"user {user.user_id} has no habitat")
    return ecosystem


def snapshot_bytes(ecosystem: Ecosystem) -> bytes:
    """Canonical byte encoding of the current state (stable across runs)."""
    return (json.dumps(snapshot_save(ecosystem), sort_keys=True,
                       separators=(",", ":")) + "\n").encode("utf-8")


def _atomic_write(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".snapshot-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_snapshot_file(ecosystem: Ecosystem, path: str) -> None:
    _atomic_write(path, snapshot_bytes(ecosystem))


def load_snapshot_file(path: str) -> Ecosystem:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as exc:
            raise SnapshotError(f"not valid JSON: {exc}") from None
    return snapshot_load(document)
