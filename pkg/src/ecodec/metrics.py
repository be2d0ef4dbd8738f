"""Read-only analyses of simulation state and timelines.

Quantifies the emergent behaviour the engine is built to exhibit: whether the
connection topology clusters along user communities, whether archives and
migration speed up later evolution, how the network fragments, and how gene
copies are distributed across habitats. Everything here is pure and operates
on snapshots or outcome timelines, so it can run offline or in parallel.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Mapping, Sequence

__all__ = [
    "TopologySnapshot",
    "topology_snapshot",
    "AlignmentReport",
    "community_alignment",
    "EpochStats",
    "acceleration_curve",
    "FragmentationReport",
    "fragmentation_report",
    "AbundanceReport",
    "abundance_distribution",
    "edge_list_lines",
    "timeline_csv",
    "TIMELINE_COLUMNS",
]

INTER_EPSILON = 1e-9


@dataclass(frozen=True)
class TopologySnapshot:
    """Directed connection graph at one tick, nodes labelled with communities."""

    tick: int
    nodes: tuple[tuple[int, frozenset[int]], ...]
    edges: tuple[tuple[int, int, float], ...]


def topology_snapshot(ecosystem) -> TopologySnapshot:
    """Capture the current topology; pruned (zero) edges are absent."""
    nodes = []
    for habitat_id in sorted(ecosystem.habitats):
        owner = ecosystem.habitats[habitat_id].owner
        communities = ecosystem.users[owner].community_ids
        nodes.append((habitat_id, communities))
    edges = []
    for habitat_id in sorted(ecosystem.habitats):
        habitat = ecosystem.habitats[habitat_id]
        for target in sorted(habitat.connections):
            probability = habitat.connections[target].probability
            if probability > 0.0:
                edges.append((habitat_id, target, probability))
    return TopologySnapshot(ecosystem.step_count, tuple(nodes), tuple(edges))


@dataclass(frozen=True)
class AlignmentReport:
    intra_mean: float
    inter_mean: float
    ratio: float


def community_alignment(snapshot: TopologySnapshot,
                        ground_truth: Mapping[int, frozenset[int]]) -> AlignmentReport:
    """Mean link probability inside vs. across communities.

    Every ordered pair of distinct habitats counts; absent edges contribute 0,
    so pruning weak links lowers the relevant mean instead of hiding it.
    ratio = intra_mean / max(inter_mean, 1e-9).
    """
    if not snapshot.nodes:
        raise ValueError("empty topology snapshot")
    probability = {(s, t): p for s, t, p in snapshot.edges}
    ids = [node_id for node_id, _ in snapshot.nodes]
    intra_sum = inter_sum = 0.0
    intra_count = inter_count = 0
    for a in ids:
        for b in ids:
            if a == b:
                continue
            p = probability.get((a, b), 0.0)
            if ground_truth[a] & ground_truth[b]:
                intra_sum += p
                intra_count += 1
            else:
                inter_sum += p
                inter_count += 1
    intra_mean = intra_sum / intra_count if intra_count else 0.0
    inter_mean = inter_sum / inter_count if inter_count else 0.0
    return AlignmentReport(intra_mean, inter_mean,
                           intra_mean / max(inter_mean, INTER_EPSILON))


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    first_step: int
    last_step: int
    median_generations: float | None
    successes: int
    failures: int


def acceleration_curve(outcomes: Sequence, epoch_length: int = 100,
                       total_steps: int | None = None) -> list[EpochStats]:
    """Per-epoch median of generations used by successful (executed) outcomes.

    Failures are excluded from the median and counted separately. The covered
    step span (``total_steps`` when given, else the last outcome's step) must
    be a whole number of epochs.
    """
    if not outcomes:
        raise ValueError("empty timeline")
    if epoch_length < 1:
        raise ValueError("epoch length must be positive")
    span = total_steps if total_steps is not None else max(o.step for o in outcomes)
    if span % epoch_length != 0:
        raise ValueError(f"timeline spans {span} steps, "
                         f"not a multiple of epoch length {epoch_length}")
    epochs = span // epoch_length
    buckets: list[list[int]] = [[] for _ in range(epochs)]
    failures = [0] * epochs
    for outcome in outcomes:
        epoch = (outcome.step - 1) // epoch_length
        if outcome.executed:
            buckets[epoch].append(outcome.generations)
        else:
            failures[epoch] += 1
    stats = []
    for epoch in range(epochs):
        median = statistics.median(buckets[epoch]) if buckets[epoch] else None
        stats.append(EpochStats(epoch, epoch * epoch_length + 1,
                                (epoch + 1) * epoch_length, median,
                                len(buckets[epoch]), failures[epoch]))
    return stats


@dataclass(frozen=True)
class FragmentationReport:
    component_count: int
    isolated: tuple[int, ...]


def fragmentation_report(snapshot: TopologySnapshot,
                         edge_threshold: float = 0.2) -> FragmentationReport:
    """Connected components of the strong-edge undirected graph; singletons are
    the totally disconnected habitats."""
    ids = [node_id for node_id, _ in snapshot.nodes]
    adjacency: dict[int, set[int]] = {node_id: set() for node_id in ids}
    strongest: dict[tuple[int, int], float] = {}
    for source, target, probability in snapshot.edges:
        key = (min(source, target), max(source, target))
        strongest[key] = max(strongest.get(key, 0.0), probability)
    for (a, b), probability in strongest.items():
        if probability >= edge_threshold:
            adjacency[a].add(b)
            adjacency[b].add(a)
    seen: set[int] = set()
    components = 0
    isolated: list[int] = []
    for node_id in ids:
        if node_id in seen:
            continue
        components += 1
        frontier = [node_id]
        component = {node_id}
        seen.add(node_id)
        while frontier:
            current = frontier.pop()
            for neighbour in adjacency[current]:
                if neighbour not in seen:
                    seen.add(neighbour)
                    component.add(neighbour)
                    frontier.append(neighbour)
        if len(component) == 1:
            isolated.append(node_id)
    return FragmentationReport(components, tuple(sorted(isolated)))


@dataclass(frozen=True)
class AbundanceReport:
    """Habitat copy count per gene and a histogram over floor(log2(count))."""

    counts: dict[int, int]
    log2_histogram: dict[int, int]


def abundance_distribution(ecosystem) -> AbundanceReport:
    """How many habitats hold each gene; deleted genes are absent.

    Reported descriptively only; no distributional claim is asserted.
    """
    counts: dict[int, int] = {}
    for habitat_id in sorted(ecosystem.habitats):
        for gene_id in ecosystem.habitats[habitat_id].gene_pool:
            counts[gene_id] = counts.get(gene_id, 0) + 1
    histogram: dict[int, int] = {}
    for count in counts.values():
        bucket = count.bit_length() - 1  # floor(log2(count))
        histogram[bucket] = histogram.get(bucket, 0) + 1
    return AbundanceReport(dict(sorted(counts.items())),
                           dict(sorted(histogram.items())))


def edge_list_lines(snapshot: TopologySnapshot) -> list[str]:
    """Plain-text edge list: one `source target probability` line per edge."""
    return [f"{source} {target} {probability!r}"
            for source, target, probability in snapshot.edges]


TIMELINE_COLUMNS = (
    "step", "clock", "user_id", "habitat_id", "wants", "members", "coverage",
    "total_cost", "scalar", "generations", "reached_target", "executed", "failed",
)


def timeline_csv(outcomes: Sequence) -> str:
    """Render a timeline as CSV with the documented stable column order.

    Multi-valued columns (wants, members) are |-joined; hard failures leave
    the fitness columns empty.
    """
    lines = [",".join(TIMELINE_COLUMNS)]
    for o in outcomes:
        wants = "|".join(str(a) for a in sorted(o.request.wants))
        members = "|".join(str(g) for g in sorted(o.solution.members)) if o.solution else ""
        if o.fitness is not None:
            coverage, cost, scalar = repr(o.fitness.coverage), repr(o.fitness.total_cost), repr(o.fitness.scalar)
        else:
            coverage = cost = scalar = ""
        lines.append(
            f"{o.step},{o.clock},{o.user_id},{o.habitat_id},{wants},{members},"
            f"{coverage},{cost},{scalar},{o.generations},"
            f"{int(o.reached_target)},{int(o.executed)},{int(o.failed)}")
    return "\n".join(lines) + "\n"
