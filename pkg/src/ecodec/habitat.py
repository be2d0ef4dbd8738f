"""Peer state and migration mechanics.

A habitat is one user's peer: a pool of genes with per-gene usage state, an
archive of previously evolved solutions, and a table of outgoing connection
probabilities. Deployment and execution copy material to connected habitats
(sources are never drained); connections strengthen when material they
carried proves useful and weaken otherwise, and weak links are pruned. Genes
that go unused first wander to neighbouring habitats (a move, not a copy) and
die once their escape budget is spent.

Habitats are single-writer: every mutation flows through the ecosystem event
loop, and cross-habitat effects are applied by that loop rather than by
habitats touching each other directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .genes import Gene, GeneSet, Request, request_similarity, resolve_gene

if TYPE_CHECKING:  # pragma: no cover
    from .ecosystem import Ecosystem

__all__ = [
    "RECENT_REQUEST_WINDOW",
    "Connection",
    "GeneUsageState",
    "ArchiveEntry",
    "Habitat",
    "hebbian_reinforce",
    "hebbian_decay",
    "escape_range",
    "cluster_of",
    "deploy_gene",
    "migrate_copy",
    "register_geneset",
    "execution_feedback",
    "decay_unused_links",
    "usage_tick",
    "prune_connections",
]

# Requests remembered per habitat for archive eviction scoring.
RECENT_REQUEST_WINDOW = 16


@dataclass
class Connection:
    target: int
    probability: float


@dataclass
class GeneUsageState:
    """Life-cycle bookkeeping for one pooled gene copy."""

    gene: Gene
    unused_request_count: int = 0
    escapes_remaining: int = 0
    arrived_at: int = 0
    # Habitats whose deliveries put or refreshed this copy here; feeds link decay.
    delivered_by: set[int] = field(default_factory=set)


@dataclass
class ArchiveEntry:
    gene_set: GeneSet
    request: Request
    seq: int
    # Similarities of this entry's request to the habitat's recent-request
    # window, oldest first. Derived state: kept in lockstep by note_request,
    # rebuilt (never serialized) when a snapshot is loaded.
    recent_sims: list[float] = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        self._key = (self.gene_set.members, self.request.key())

    def key(self) -> tuple:
        return self._key


@dataclass
class Habitat:
    habitat_id: int
    owner: int
    connections: dict[int, Connection] = field(default_factory=dict)
    gene_pool: dict[int, GeneUsageState] = field(default_factory=dict)
    archive: list[ArchiveEntry] = field(default_factory=list)
    # Populations run to completion inside one request in this engine, so the
    # list is empty between requests; it exists for engines that interleave.
    active_populations: list = field(default_factory=list)
    recent_requests: list[Request] = field(default_factory=list)
    request_count: int = 0
    archive_seq: int = 0

    def pool_genes(self) -> list[Gene]:
        """Pool snapshot in ascending gene-id order."""
        return [self.gene_pool[gene_id].gene for gene_id in sorted(self.gene_pool)]

    def archive_pairs(self) -> list[tuple[GeneSet, Request]]:
        return [(entry.gene_set, entry.request) for entry in self.archive]

    def note_request(self, request: Request) -> None:
        self.recent_requests.append(request)
        if len(self.recent_requests) > RECENT_REQUEST_WINDOW:
            del self.recent_requests[0]
        for entry in self.archive:
            entry.recent_sims.append(request_similarity(entry.request, request))
            if len(entry.recent_sims) > RECENT_REQUEST_WINDOW:
                del entry.recent_sims[0]

    def rebuild_recent_sims(self) -> None:
        """Recompute every entry's similarity window (after loading a snapshot)."""
        for entry in self.archive:
            entry.recent_sims = [request_similarity(entry.request, request)
                                 for request in self.recent_requests]


def hebbian_reinforce(connection: Connection, delta: float = 0.1) -> Connection:
    """Strengthen a link: p <- p + delta * (1 - p). Fixed point at 1."""
    p = connection.probability
    return Connection(connection.target, p + delta * (1.0 - p))


def hebbian_decay(connection: Connection, delta: float = 0.05,
                  prune_threshold: float = 0.01) -> tuple[Connection, bool]:
    """Weaken a link: p <- p * (1 - delta); the flag signals pruning below threshold."""
    p = connection.probability * (1.0 - delta)
    return Connection(connection.target, p), p < prune_threshold


def escape_range(cluster_size: int) -> int:
    """Escape budget for a gene in a cluster: max(2, ceil(log2(size + 1)))."""
    if cluster_size < 1:
        raise ValueError("cluster size must be at least 1")
    # ceil(log2(m + 1)) == m.bit_length() for m >= 1; integer math avoids float edges.
    return max(2, int(cluster_size).bit_length())


def cluster_of(habitat: Habitat, ecosystem: "Ecosystem") -> set[int]:
    """Connected component of the habitat in the strong-edge undirected graph.

    An undirected edge exists where either direction's probability reaches
    the cluster edge threshold.
    """
    threshold = ecosystem.params.cluster_edge_threshold
    habitats = ecosystem.habitats
    seen = {habitat.habitat_id}
    frontier = [habitat.habitat_id]
    while frontier:
        current = frontier.pop()
        node = habitats[current]
        neighbours = set(node.connections)
        for other_id, other in habitats.items():
            if current in other.connections:
                neighbours.add(other_id)
        for other_id in sorted(neighbours):
            if other_id in seen:
                continue
            out_p = node.connections[other_id].probability if other_id in node.connections else 0.0
            other = habitats[other_id]
            in_p = other.connections[current].probability if current in other.connections else 0.0
            if max(out_p, in_p) >= threshold:
                seen.add(other_id)
                frontier.append(other_id)
    return seen


def _fresh_usage(gene: Gene, habitat: Habitat, ecosystem: "Ecosystem",
                 delivered_by: set[int]) -> GeneUsageState:
    budget = escape_range(len(cluster_of(habitat, ecosystem)))
    return GeneUsageState(gene, 0, budget, ecosystem.clock, delivered_by)


def _insert_gene(habitat: Habitat, gene: Gene, ecosystem: "Ecosystem",
                 source: int | None, reason: str) -> bool:
    """Add a gene copy to a pool; returns False when the copy was already there."""
    state = habitat.gene_pool.get(gene.gene_id)
    if state is not None:
        if source is not None:
            state.delivered_by.add(source)
        return False
    delivered = {source} if source is not None else set()
    habitat.gene_pool[gene.gene_id] = _fresh_usage(gene, habitat, ecosystem, delivered)
    ecosystem.log_event("pool_insert", habitat=habitat.habitat_id,
                        gene=gene.gene_id, reason=reason,
                        source=source if source is not None else habitat.habitat_id)
    return True


def deploy_gene(habitat: Habitat, gene: Gene, ecosystem: "Ecosystem",
                rng: np.random.Generator) -> list[tuple[int, bool]]:
    """Bring a new gene into the ecosystem at its owner's habitat, then migrate it.

    The source copy is always retained. Re-deploying an id already pooled here
    is an idempotent no-op recorded as a warning event.
    """
    if gene.origin_habitat != habitat.habitat_id:
        raise ValueError(
            f"gene {gene.gene_id} originates at habitat {gene.origin_habitat}, "
            f"not {habitat.habitat_id}")
    known = ecosystem.global_registry.get(gene.gene_id)
    if known is not None and known != gene:
        raise ValueError(f"gene id {gene.gene_id} already registered with different content")
    ecosystem.global_registry[gene.gene_id] = gene
    if gene.gene_id in habitat.gene_pool:
        ecosystem.log_event("deploy_duplicate", habitat=habitat.habitat_id,
                            gene=gene.gene_id)
        return []
    _insert_gene(habitat, gene, ecosystem, None, "deploy")
    return migrate_copy(gene, habitat, ecosystem, rng)


def _deliver(item, source_id: int, target: Habitat, ecosystem: "Ecosystem",
             request: Request | None) -> None:
    if isinstance(item, Gene):
        _insert_gene(target, item, ecosystem, source_id, "migration")
        return
    for gene_id in item.sorted_members():
        gene = resolve_gene(ecosystem.global_registry, gene_id)
        _insert_gene(target, gene, ecosystem, source_id, "migration")
    if request is not None:
        _archive_insert(target, item, request, ecosystem)


def migrate_copy(item: Gene | GeneSet, from_habitat: Habitat,
                 ecosystem: "Ecosystem", rng: np.random.Generator,
                 request: Request | None = None) -> list[tuple[int, bool]]:
    """Copy a gene or gene-set across every outgoing connection, one Bernoulli
    draw per link. Gene-set deliveries also insert member genes the target is
    missing, and (when the originating request is supplied) add the set to the
    target's archive. The source is never modified. Connections are walked in
    ascending target-id order for determinism.
    """
    deliveries: list[tuple[int, bool]] = []
    for target_id in sorted(from_habitat.connections):
        connection = from_habitat.connections[target_id]
        delivered = bool(rng.random() < connection.probability)
        if delivered:
            _deliver(item, from_habitat.habitat_id,
                     ecosystem.habitats[target_id], ecosystem, request)
        deliveries.append((target_id, delivered))
    if deliveries:
        ecosystem.log_event(
            "migration", source=from_habitat.habitat_id,
            kind="gene" if isinstance(item, Gene) else "gene_set",
            item=item.gene_id if isinstance(item, Gene) else sorted(item.members),
            delivered=[t for t, ok in deliveries if ok])
    return deliveries


def _archive_insert(habitat: Habitat, gs: GeneSet, request: Request,
                    ecosystem: "Ecosystem") -> None:
    key = (gs.members, request.key())
    for entry in habitat.archive:
        if entry.key() == key:
            return
    added = ArchiveEntry(gs, request, habitat.archive_seq)
    added.recent_sims = [request_similarity(request, req)
                         for req in habitat.recent_requests]
    habitat.archive.append(added)
    habitat.archive_seq += 1
    ecosystem.log_event("archive_add", habitat=habitat.habitat_id,
                        members=sorted(gs.members))
    if len(habitat.archive) <= ecosystem.params.archive_cap:
        return
    window = len(habitat.recent_requests)
    scored = []
    for position, entry in enumerate(habitat.archive):
        score = sum(entry.recent_sims) / window if window else 0.0
        scored.append((score, entry.seq, position))
    _, _, victim = min(scored)
    evicted = habitat.archive.pop(victim)
    ecosystem.log_event("archive_evict", habitat=habitat.habitat_id,
                        members=sorted(evicted.gene_set.members))


def register_geneset(habitat: Habitat, gs: GeneSet, request: Request,
                     ecosystem: "Ecosystem") -> None:
    """Record an evolved solution in the archive and mark its genes as used."""
    if not gs.members:
        raise ValueError("cannot register an empty gene-set")
    if not gs.provenance:
        raise ValueError("cannot register a gene-set without provenance")
    _archive_insert(habitat, gs, request, ecosystem)
    for gene_id in gs.sorted_members():
        state = habitat.gene_pool.get(gene_id)
        if state is not None:
            state.unused_request_count = 0


def execution_feedback(habitat: Habitat, gs: GeneSet, request: Request,
                       ecosystem: "Ecosystem", rng: np.random.Generator) -> None:
    """Propagate an executed solution and adapt links toward its creators.

    The solution is copy-migrated over every connection; then each provenance
    habitat gets its link from here reinforced, or created at p_init when the
    creator was only reachable through intermediaries; reverse links are
    reinforced only where they already exist.
    """
    migrate_copy(gs, habitat, ecosystem, rng, request=request)
    params = ecosystem.params
    for creator in sorted(gs.provenance):
        if creator == habitat.habitat_id or creator not in ecosystem.habitats:
            continue
        connection = habitat.connections.get(creator)
        if connection is not None:
            habitat.connections[creator] = hebbian_reinforce(
                connection, params.reinforce_delta)
            ecosystem.log_event("connection_reinforced", source=habitat.habitat_id,
                                target=creator,
                                probability=habitat.connections[creator].probability)
        else:
            habitat.connections[creator] = Connection(creator, params.p_init)
            ecosystem.log_event("connection_created", source=habitat.habitat_id,
                                target=creator, probability=params.p_init,
                                reason="provenance")
        back = ecosystem.habitats[creator].connections.get(habitat.habitat_id)
        if back is not None:
            ecosystem.habitats[creator].connections[habitat.habitat_id] = \
                hebbian_reinforce(back, params.reinforce_delta)
            ecosystem.log_event(
                "connection_reinforced", source=creator, target=habitat.habitat_id,
                probability=ecosystem.habitats[creator]
                .connections[habitat.habitat_id].probability)


def decay_unused_links(habitat: Habitat, solution_members: frozenset[int],
                       ecosystem: "Ecosystem") -> None:
    """Weaken every incoming connection that delivered nothing in the solution.

    Called once per request handled at this habitat; a link is spared only
    when some solution member was delivered over it.
    """
    protected: set[int] = set()
    for gene_id in solution_members:
        state = habitat.gene_pool.get(gene_id)
        if state is not None:
            protected |= state.delivered_by
    params = ecosystem.params
    for source_id in sorted(ecosystem.habitats):
        if source_id == habitat.habitat_id or source_id in protected:
            continue
        source = ecosystem.habitats[source_id]
        connection = source.connections.get(habitat.habitat_id)
        if connection is None:
            continue
        decayed, prune = hebbian_decay(connection, params.decay_delta,
                                       params.prune_threshold)
        source.connections[habitat.habitat_id] = decayed
        ecosystem.log_event("connection_decayed", source=source_id,
                            target=habitat.habitat_id,
                            probability=decayed.probability, prune=prune)


def usage_tick(habitat: Habitat, solution_members: frozenset[int],
               ecosystem: "Ecosystem", rng: np.random.Generator) -> list[dict]:
    """Age every pooled gene outside the solution; escape or delete stale ones.

    A gene that reaches the unused threshold is moved (not copied) to one
    connected habitat chosen uniformly while its escape budget lasts, and is
    deleted once the budget is spent or no eligible link exists. Solution
    members get their counters reset.
    """
    params = ecosystem.params
    events: list[dict] = []
    for gene_id in sorted(habitat.gene_pool):
        state = habitat.gene_pool[gene_id]
        if gene_id in solution_members:
            state.unused_request_count = 0
            continue
        state.unused_request_count += 1
        if state.unused_request_count < params.unused_threshold:
            continue
        eligible = [t for t in sorted(habitat.connections)
                    if habitat.connections[t].probability > 0.0]
        if state.escapes_remaining > 0 and eligible:
            target_id = eligible[int(rng.integers(len(eligible)))]
            del habitat.gene_pool[gene_id]
            events.append(ecosystem.log_event(
                "pool_remove", habitat=habitat.habitat_id, gene=gene_id,
                reason="escape", target=target_id))
            target = ecosystem.habitats[target_id]
            if gene_id not in target.gene_pool:
                target.gene_pool[gene_id] = GeneUsageState(
                    state.gene, 0, state.escapes_remaining - 1,
                    ecosystem.clock, {habitat.habitat_id})
                events.append(ecosystem.log_event(
                    "pool_insert", habitat=target_id, gene=gene_id,
                    reason="escape", source=habitat.habitat_id))
        else:
            del habitat.gene_pool[gene_id]
            events.append(ecosystem.log_event(
                "pool_remove", habitat=habitat.habitat_id, gene=gene_id,
                reason="deleted"))
    return events


def prune_connections(ecosystem: "Ecosystem") -> None:
    """Maintenance pass: drop every connection below the prune threshold."""
    threshold = ecosystem.params.prune_threshold
    for habitat_id in sorted(ecosystem.habitats):
        habitat = ecosystem.habitats[habitat_id]
        for target_id in sorted(habitat.connections):
            if habitat.connections[target_id].probability < threshold:
                del habitat.connections[target_id]
                ecosystem.log_event("connection_pruned", source=habitat_id,
                                    target=target_id)
