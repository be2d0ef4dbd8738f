"""Per-request evolutionary search over gene combinations.

Each user request spins up one island-style population whose individuals are
gene-sets drawn from the local gene-pool. The selection pressure is the
request itself: scalar fitness rewards covering the requested attributes and
charges a small per-gene parsimony penalty, while a (coverage, cost) Pareto
view breaks ties and reports trade-off fronts. Genes are atomic, so mutation
only switches pool genes in and out of sets and crossover recombines two sets.

A population is confined to one logical task and owns a named random stream,
so several populations (even at one habitat) can run concurrently and still
produce results identical to serial execution.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .genes import (
    Gene,
    GeneSet,
    Request,
    merge_provenance,
    request_similarity,
    resolve_gene,
)
from .params import Params

__all__ = [
    "DEFAULT_ALPHA",
    "NoGenesAvailableError",
    "FitnessValue",
    "Population",
    "FitnessEvaluator",
    "fitness",
    "dominates",
    "nondominated_front",
    "init_population",
    "mutate",
    "crossover",
    "evolve_step",
    "generation_best",
    "run_evolution",
    "EvolutionResult",
    "TracePoint",
    "BruteForceResult",
    "brute_force_optimal",
    "trace_csv",
    "TRACE_COLUMNS",
]

DEFAULT_ALPHA = 0.05

# Hard cap on random founding individuals' size; larger sets only arise by variation.
INIT_MAX_SIZE = 8

# Exhaustive search refuses pools beyond this (2**20 subsets).
BRUTE_FORCE_POOL_LIMIT = 20


class NoGenesAvailableError(RuntimeError):
    """A population cannot be founded because the gene-pool is empty."""


@dataclass(frozen=True)
class FitnessValue:
    """Coverage of the request, summed gene cost, and the scalar selection score."""

    coverage: float
    total_cost: float
    scalar: float


@dataclass
class Population:
    request: Request
    individuals: list[GeneSet]
    generation: int
    rng_stream: np.random.Generator
    home: int = 0


class FitnessEvaluator:
    """Caches per-gene contributions so repeated fitness calls stay cheap.

    Wanted attributes are mapped to bit positions; each gene collapses to the
    bitmask of wanted attributes it provides plus its cost, and whole sets are
    memoized by membership.
    """

    def __init__(self, request: Request, registry: Mapping[int, Gene], alpha: float = DEFAULT_ALPHA):
        if alpha < 0:
            raise ValueError("alpha must be non-negative")
        self.request = request
        self.registry = registry
        self.alpha = alpha
        wanted = sorted(request.wants)
        self._want_bit = {attr: 1 << i for i, attr in enumerate(wanted)}
        self._bit_weight = [request.wants[attr] for attr in wanted]
        self._total_weight = 0.0
        for w in self._bit_weight:
            self._total_weight += w
        self._gene_mask: dict[int, int] = {}
        self._gene_cost: dict[int, float] = {}
        self._cache: dict[frozenset[int], FitnessValue] = {}
        self._sum_cache: dict[frozenset[int], int] = {}

    def _gene_info(self, gene_id: int) -> tuple[int, float]:
        mask = self._gene_mask.get(gene_id)
        if mask is None:
            gene = resolve_gene(self.registry, gene_id)
            mask = 0
            for attr in gene.provides:
                bit = self._want_bit.get(attr)
                if bit:
                    mask |= bit
            self._gene_mask[gene_id] = mask
            self._gene_cost[gene_id] = gene.cost
        return mask, self._gene_cost[gene_id]

    def fitness(self, members: frozenset[int]) -> FitnessValue:
        cached = self._cache.get(members)
        if cached is not None:
            return cached
        mask = 0
        cost = 0.0
        for gene_id in sorted(members):
            gmask, gcost = self._gene_info(gene_id)
            mask |= gmask
            cost += gcost
        covered = 0.0
        for i, weight in enumerate(self._bit_weight):
            if (mask >> i) & 1:
                covered += weight
        coverage = covered / self._total_weight
        value = FitnessValue(coverage, cost, coverage - self.alpha * len(members))
        self._cache[members] = value
        return value

    def id_sum(self, members: frozenset[int]) -> int:
        cached = self._sum_cache.get(members)
        if cached is None:
            cached = sum(members)
            self._sum_cache[members] = cached
        return cached


def fitness(gs: GeneSet, request: Request, registry: Mapping[int, Gene],
            alpha: float = DEFAULT_ALPHA) -> FitnessValue:
    """Score one gene-set against a request.

    coverage = wanted weight provided / total wanted weight, total_cost is the
    sum of member costs, scalar = coverage - alpha * |members|. The empty set
    scores (0, 0, 0).
    """
    return FitnessEvaluator(request, registry, alpha).fitness(gs.members)


def dominates(f1: FitnessValue, f2: FitnessValue) -> bool:
    """True iff f1 is at least as good on (coverage, cost) and better on one."""
    if f1.coverage < f2.coverage or f1.total_cost > f2.total_cost:
        return False
    return f1.coverage > f2.coverage or f1.total_cost < f2.total_cost


def _pareto_ranks(values: Sequence[FitnessValue]) -> list[int]:
    """Front index per individual (0 = nondominated), by fast nondominated sort.

    The domination matrix is built with vectorized comparisons equivalent to
    :func:`dominates`; fronts are then peeled off by domination counts.
    """
    n = len(values)
    coverage = np.fromiter((v.coverage for v in values), dtype=float, count=n)
    cost = np.fromiter((v.total_cost for v in values), dtype=float, count=n)
    at_least = (coverage[:, None] >= coverage[None, :]) & (cost[:, None] <= cost[None, :])
    strictly = (coverage[:, None] > coverage[None, :]) | (cost[:, None] < cost[None, :])
    dom = at_least & strictly  # dom[i, j]: i dominates j
    dominated_by = dom.sum(axis=0)
    ranks = [0] * n
    front = [j for j in range(n) if dominated_by[j] == 0]
    rank = 0
    while front:
        nxt: list[int] = []
        for i in front:
            ranks[i] = rank
            for j in np.nonzero(dom[i])[0]:
                dominated_by[j] -= 1
                if dominated_by[j] == 0:
                    nxt.append(int(j))
        front = nxt
        rank += 1
    return ranks


def nondominated_front(individuals: Sequence[GeneSet], request: Request,
                       registry: Mapping[int, Gene],
                       alpha: float = DEFAULT_ALPHA) -> list[GeneSet]:
    """All individuals not dominated by any other, in input order."""
    if not individuals:
        raise ValueError("nondominated_front requires at least one individual")
    evaluator = FitnessEvaluator(request, registry, alpha)
    values = [evaluator.fitness(ind.members) for ind in individuals]
    ranks = _pareto_ranks(values)
    return [ind for ind, rank in zip(individuals, ranks) if rank == 0]


class _Comparator:
    """Selection order: scalar desc, then Pareto rank asc, cost asc, id-sum asc.

    Pareto ranks are computed lazily: they are only needed when two scalars tie
    with different (coverage, cost) points, and equal points always share a front.
    """

    def __init__(self, values: list[FitnessValue], id_sums: list[int]):
        self.values = values
        self.scalars = [v.scalar for v in values]
        self.coverages = [v.coverage for v in values]
        self.costs = [v.total_cost for v in values]
        self.id_sums = id_sums
        self._ranks: list[int] | None = None

    def _rank(self, i: int) -> int:
        if self._ranks is None:
            self._ranks = _pareto_ranks(self.values)
        return self._ranks[i]

    def best(self, i: int, j: int) -> int:
        """Index of the preferred individual; i wins exact ties (stable)."""
        si, sj = self.scalars[i], self.scalars[j]
        if si != sj:
            return i if si > sj else j
        if self.coverages[i] != self.coverages[j] or self.costs[i] != self.costs[j]:
            ri, rj = self._rank(i), self._rank(j)
            if ri != rj:
                return i if ri < rj else j
        if self.costs[i] != self.costs[j]:
            return i if self.costs[i] < self.costs[j] else j
        if self.id_sums[i] != self.id_sums[j]:
            return i if self.id_sums[i] < self.id_sums[j] else j
        return i


def _pool_ids(gene_pool: Sequence[Gene]) -> list[int]:
    return sorted(g.gene_id for g in gene_pool)


def init_population(request: Request, gene_pool: Sequence[Gene],
                    archive: Sequence[tuple[GeneSet, Request]],
                    n: int, seed_fraction: float,
                    rng: np.random.Generator, home: int = 0) -> Population:
    """Found a population: archive seeds first, random pool subsets for the rest.

    Up to ``floor(seed_fraction * n)`` individuals are copies of the archive
    entries most similar to the request (ties to the lower gene-id sum), with
    their provenance preserved; entries with zero similarity or with members
    missing from the pool snapshot are skipped. Remaining slots get random
    pool subsets of size uniform in [1, min(8, pool size)].
    """
    if not gene_pool:
        raise NoGenesAvailableError("no genes available")
    if n < 2:
        raise ValueError("population size must be at least 2")
    if not 0.0 <= seed_fraction <= 1.0:
        raise ValueError("seed_fraction must be within [0, 1]")

    pool_ids = _pool_ids(gene_pool)
    pool_set = frozenset(pool_ids)

    candidates = []
    for seq, (gs, origin_request) in enumerate(archive):
        if not gs.members or not gs.members <= pool_set:
            continue
        sim = request_similarity(request, origin_request)
        if sim <= 0.0:
            continue
        candidates.append((-sim, sum(gs.members), seq, gs))
    candidates.sort(key=lambda item: item[:3])
    individuals: list[GeneSet] = [item[3] for item in candidates[: int(seed_fraction * n)]]

    ids = np.asarray(pool_ids, dtype=np.int64)
    high = min(INIT_MAX_SIZE, len(pool_ids))
    local = frozenset((home,))
    while len(individuals) < n:
        size = int(rng.integers(1, high + 1))
        picked = rng.choice(ids, size=size, replace=False)
        individuals.append(GeneSet(frozenset(int(g) for g in picked), local))
    return Population(request, individuals, 0, rng, home)


def _toggled(gs: GeneSet, pool_ids: Sequence[int], toggle_p: float,
             draws: np.ndarray) -> GeneSet:
    members = set(gs.members)
    changed = False
    for gene_id, u in zip(pool_ids, draws):
        if u < toggle_p:
            if gene_id in members:
                members.discard(gene_id)
            else:
                members.add(gene_id)
            changed = True
    if not changed:
        return gs
    return GeneSet(frozenset(members), gs.provenance)


def mutate(gs: GeneSet, gene_pool: Sequence[Gene], rate: float,
           rng: np.random.Generator) -> GeneSet:
    """Switch pool genes in or out of the set, each with probability rate/|pool|.

    Genes themselves are never altered; the result may be empty.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("mutation rate must be within [0, 1]")
    if not gene_pool:
        return gs
    pool_ids = _pool_ids(gene_pool)
    toggle_p = rate / len(pool_ids)
    return _toggled(gs, pool_ids, toggle_p, rng.random(len(pool_ids)))


def crossover(a: GeneSet, b: GeneSet, rng: np.random.Generator,
              created_at: int) -> tuple[GeneSet, GeneSet]:
    """Uniform set crossover.

    Shared genes go to both children; each gene present in exactly one parent
    goes to exactly one child, chosen by a fair coin. Both children inherit
    the merged provenance plus the creating habitat.
    """
    exclusive = sorted(a.members ^ b.members)
    provenance = merge_provenance(a, b, created_at)
    if not exclusive:
        if provenance == a.provenance == b.provenance:
            return a, b
        child = GeneSet(a.members, provenance)
        return child, child
    shared = a.members & b.members
    first = set(shared)
    second = set(shared)
    coins = rng.random(len(exclusive))
    for gene_id, u in zip(exclusive, coins):
        (first if u < 0.5 else second).add(gene_id)
    return GeneSet(frozenset(first), provenance), GeneSet(frozenset(second), provenance)


def evolve_step(population: Population, gene_pool: Sequence[Gene],
                registry: Mapping[int, Gene], params: Params,
                evaluator: FitnessEvaluator | None = None) -> Population:
    """Advance one generation: elitism, binary tournaments, crossover, mutation.

    Deterministic given the population's stream state. Tournament indices,
    crossover coins, and per-child mutation draws are consumed in a fixed
    batched order.
    """
    if evaluator is None:
        evaluator = FitnessEvaluator(population.request, registry, params.alpha)
    rng = population.rng_stream
    individuals = population.individuals
    n = len(individuals)
    values = [evaluator.fitness(ind.members) for ind in individuals]
    id_sums = [evaluator.id_sum(ind.members) for ind in individuals]
    comp = _Comparator(values, id_sums)

    elite = 0
    for i in range(1, n):
        elite = comp.best(elite, i)

    pool_ids = _pool_ids(gene_pool)
    n_children = n - 1
    n_pairs = (n_children + 1) // 2
    pick = rng.integers(0, n, size=(n_pairs, 4))
    cross_coins = rng.random(n_pairs)
    toggles: list[list[int]] = [[] for _ in range(n_children)]
    if pool_ids:
        toggle_p = params.p_mut / len(pool_ids)
        draws = rng.random((n_children, len(pool_ids)))
        for row, col in zip(*np.nonzero(draws < toggle_p)):
            toggles[row].append(pool_ids[col])

    children: list[GeneSet] = [individuals[elite]]
    slot = 0
    for pair_index in range(n_pairs):
        t = pick[pair_index]
        parent_a = individuals[comp.best(int(t[0]), int(t[1]))]
        parent_b = individuals[comp.best(int(t[2]), int(t[3]))]
        if cross_coins[pair_index] < params.p_cross:
            pair = crossover(parent_a, parent_b, rng, population.home)
        else:
            pair = (parent_a, parent_b)
        for child in pair:
            if len(children) >= n:
                break
            if toggles[slot]:
                flipped = set(child.members)
                for gene_id in toggles[slot]:
                    if gene_id in flipped:
                        flipped.discard(gene_id)
                    else:
                        flipped.add(gene_id)
                child = GeneSet(frozenset(flipped), child.provenance)
            slot += 1
            children.append(child)
    return Population(population.request, children, population.generation + 1,
                      rng, population.home)


def generation_best(population: Population, evaluator: FitnessEvaluator) -> tuple[GeneSet, FitnessValue]:
    """The current elite individual under the full selection order."""
    values = [evaluator.fitness(ind.members) for ind in population.individuals]
    id_sums = [evaluator.id_sum(ind.members) for ind in population.individuals]
    comp = _Comparator(values, id_sums)
    elite = 0
    for i in range(1, len(values)):
        elite = comp.best(elite, i)
    return population.individuals[elite], values[elite]


@dataclass(frozen=True)
class TracePoint:
    generation: int
    best_scalar: float
    best_coverage: float
    best_cost: float


@dataclass
class EvolutionResult:
    best: GeneSet
    best_fitness: FitnessValue
    front: list[GeneSet]
    generations: int
    trace: list[TracePoint]
    reached_target: bool


def run_evolution(request: Request, gene_pool: Sequence[Gene],
                  archive: Sequence[tuple[GeneSet, Request]],
                  params: Params, rng: np.random.Generator,
                  registry: Mapping[int, Gene], home: int = 0) -> EvolutionResult:
    """Evolve until the elite covers the target or max_generations is spent.

    Returns the elite individual, the nondominated front of the final
    generation, the generations consumed, and the per-generation elite trace.
    """
    evaluator = FitnessEvaluator(request, registry, params.alpha)
    population = init_population(request, gene_pool, archive,
                                 params.population_size, params.seed_fraction,
                                 rng, home)
    best, best_value = generation_best(population, evaluator)
    trace = [TracePoint(0, best_value.scalar, best_value.coverage, best_value.total_cost)]
    while (best_value.coverage < params.target_coverage
           and population.generation < params.max_generations):
        population = evolve_step(population, gene_pool, registry, params, evaluator)
        best, best_value = generation_best(population, evaluator)
        trace.append(TracePoint(population.generation, best_value.scalar,
                                best_value.coverage, best_value.total_cost))
    values = [evaluator.fitness(ind.members) for ind in population.individuals]
    ranks = _pareto_ranks(values)
    front = [ind for ind, rank in zip(population.individuals, ranks) if rank == 0]
    return EvolutionResult(best, best_value, front, population.generation, trace,
                           best_value.coverage >= params.target_coverage)


@dataclass(frozen=True)
class BruteForceResult:
    best_scalar: float
    optimal: tuple[frozenset[int], ...]
    evaluated: int


def brute_force_optimal(gene_pool: Sequence[Gene], request: Request,
                        max_size: int, registry: Mapping[int, Gene],
                        alpha: float = DEFAULT_ALPHA) -> BruteForceResult:
    """Exhaustively score every pool subset of size <= max_size.

    Refuses pools larger than 20 genes. Returns the maximal scalar fitness,
    every argmax subset, and the number of subsets evaluated.
    """
    if len(gene_pool) > BRUTE_FORCE_POOL_LIMIT:
        raise ValueError(
            f"pool of {len(gene_pool)} genes is too large for exhaustive search "
            f"(limit {BRUTE_FORCE_POOL_LIMIT})")
    evaluator = FitnessEvaluator(request, registry, alpha)
    ids = _pool_ids(gene_pool)
    best_scalar: float | None = None
    argmax: list[frozenset[int]] = []
    evaluated = 0
    for size in range(0, min(max_size, len(ids)) + 1):
        for combo in itertools.combinations(ids, size):
            members = frozenset(combo)
            value = evaluator.fitness(members)
            evaluated += 1
            if best_scalar is None or value.scalar > best_scalar:
                best_scalar = value.scalar
                argmax = [members]
            elif value.scalar == best_scalar:
                argmax.append(members)
    return BruteForceResult(best_scalar if best_scalar is not None else 0.0,
                            tuple(argmax), evaluated)


TRACE_COLUMNS = ("generation", "best_scalar", "best_coverage", "best_cost")


def trace_csv(trace: Sequence[TracePoint]) -> str:
    """Render a per-run trace as CSV with a stable column order."""
    lines = [",".join(TRACE_COLUMNS)]
    for point in trace:
        lines.append(f"{point.generation},{point.best_scalar!r},"
                     f"{point.best_coverage!r},{point.best_cost!r}")
    return "\n".join(lines) + "\n"
