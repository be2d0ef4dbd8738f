"""Top-level world: users, communities, the request loop, and the gene registry.

The ecosystem owns every habitat and drives a synchronous tick loop: each
tick, users issue requests in ascending user-id order, and every request runs
the full pipeline (evolve, register, execute/migrate, link feedback, gene
life-cycle, maintenance). All randomness flows through named streams of one
seeded source, so a (scenario, seed) pair replays byte-identically and a
saved world resumes exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .genes import Gene, GeneSet, Request
from .params import Params
from .rng import RandomSource
from . import habitat as hab
from .habitat import Connection, Habitat
from .evolution import FitnessValue, run_evolution

__all__ = [
    "User",
    "Community",
    "RequestOutcome",
    "Ecosystem",
    "RandomAttach",
    "CloneAttach",
    "build_ecosystem",
    "join_user",
    "generate_request",
    "handle_request",
    "step",
    "run_scenario",
    "RunResult",
]


@dataclass
class User:
    user_id: int
    community_ids: frozenset[int]
    habitat_id: int
    request_rate: float


@dataclass
class Community:
    community_id: int
    vocabulary: frozenset[int]
    request_size_range: tuple[int, int]


@dataclass
class RequestOutcome:
    """What one handled request produced; None fields mean a hard failure."""

    step: int
    clock: int
    user_id: int
    habitat_id: int
    request: Request
    solution: GeneSet | None
    fitness: FitnessValue | None
    generations: int
    reached_target: bool
    executed: bool
    failed: bool


class Ecosystem:
    """Habitat network, user base, gene registry, clock, and event log."""

    def __init__(self, params: Params, rng: RandomSource,
                 weight_jitter: bool = False, default_request_rate: float = 1.0):
        self.params = params
        self.rng = rng
        self.habitats: dict[int, Habitat] = {}
        self.users: dict[int, User] = {}
        self.communities: dict[int, Community] = {}
        self.global_registry: dict[int, Gene] = {}
        self.clock = 0          # handled requests
        self.step_count = 0     # simulation ticks
        self.next_gene_id = 0
        self.next_user_id = 0
        self.weight_jitter = weight_jitter
        self.default_request_rate = default_request_rate
        self.event_log: list[dict] = []

    def new_gene_id(self) -> int:
        gene_id = self.next_gene_id
        self.next_gene_id += 1
        return gene_id

    def log_event(self, event_type: str, **fields) -> dict:
        event = {"step": self.step_count, "clock": self.clock, "type": event_type}
        event.update(fields)
        self.event_log.append(event)
        return event


@dataclass(frozen=True)
class RandomAttach:
    """Join strategy: connect to k uniformly chosen habitats at p_init."""

    k: int


@dataclass(frozen=True)
class CloneAttach:
    """Join strategy: copy a similar user's connection table, plus a p_init
    link to that user's own habitat."""

    user_id: int


def build_ecosystem(config, seed: int) -> Ecosystem:
    """Construct the initial world from a validated scenario.

    Communities get their vocabularies, each user gets one habitat, initial
    links are sampled with a same-community bias of b_init (0 means the
    construction never looks at community labels), and every user deploys
    their initial genes, which immediately attempt their first migration.
    """
    from .config import community_vocabularies  # local import avoids a cycle

    params = config.params
    ecosystem = Ecosystem(params, RandomSource(seed),
                          weight_jitter=config.weight_jitter,
                          default_request_rate=config.request_rate)
    build_rng = ecosystem.rng.stream("build")

    for community_id, vocabulary in enumerate(community_vocabularies(config)):
        ecosystem.communities[community_id] = Community(
            community_id, vocabulary, tuple(config.request_size_range))

    user_id = 0
    for community_id in sorted(ecosystem.communities):
        for _ in range(config.users_per_community):
            ecosystem.users[user_id] = User(user_id, frozenset((community_id,)),
                                            user_id, config.request_rate)
            ecosystem.habitats[user_id] = Habitat(user_id, user_id)
            user_id += 1
    ecosystem.next_user_id = user_id

    all_ids = sorted(ecosystem.habitats)
    for habitat_id in all_ids:
        user = ecosystem.users[habitat_id]
        others = [h for h in all_ids if h != habitat_id]
        same = [h for h in others
                if ecosystem.users[h].community_ids & user.community_ids]
        chosen: set[int] = set()
        for _ in range(params.k_init):
            remaining = [h for h in others if h not in chosen]
            if not remaining:
                break
            prefer_same = build_rng.random() < params.b_init
            same_remaining = [h for h in same if h not in chosen]
            pool = same_remaining if (prefer_same and same_remaining) else remaining
            chosen.add(pool[int(build_rng.integers(len(pool)))])
        habitat = ecosystem.habitats[habitat_id]
        for target in sorted(chosen):
            habitat.connections[target] = Connection(target, params.p_init)
            ecosystem.log_event("connection_created", source=habitat_id,
                                target=target, probability=params.p_init,
                                reason="init")

    attrs_lo, attrs_hi = config.gene_attrs_range
    cost_lo, cost_hi = config.gene_cost_range
    for owner_id in all_ids:
        user = ecosystem.users[owner_id]
        community = ecosystem.communities[sorted(user.community_ids)[0]]
        vocab = np.asarray(sorted(community.vocabulary), dtype=np.int64)
        habitat = ecosystem.habitats[owner_id]
        habitat_rng = ecosystem.rng.stream("habitat", owner_id)
        for _ in range(config.genes_per_user):
            n_attrs = int(build_rng.integers(attrs_lo, min(attrs_hi, len(vocab)) + 1))
            provides = frozenset(int(a) for a in
                                 build_rng.choice(vocab, size=n_attrs, replace=False))
            cost = float(build_rng.uniform(cost_lo, cost_hi))
            gene = Gene(ecosystem.new_gene_id(), provides, cost, owner_id)
            hab.deploy_gene(habitat, gene, ecosystem, habitat_rng)
    return ecosystem


def join_user(ecosystem: Ecosystem, community_ids: Iterable[int],
              strategy: RandomAttach | CloneAttach) -> int:
    """Add a user and their habitat; returns the new habitat id.

    The new gene-pool is the union of the pools of all initially connected
    habitats (copies with fresh usage state, never moves).
    """
    community_ids = frozenset(community_ids)
    if not community_ids:
        raise ValueError("a user needs at least one community")
    for community_id in community_ids:
        if community_id not in ecosystem.communities:
            raise ValueError(f"unknown community: {community_id}")

    user_id = ecosystem.next_user_id
    ecosystem.next_user_id += 1
    habitat_id = user_id
    habitat = Habitat(habitat_id, user_id)
    join_rng = ecosystem.rng.stream("join")

    if isinstance(strategy, RandomAttach):
        if strategy.k < 0:
            raise ValueError("k must be non-negative")
        others = sorted(ecosystem.habitats)
        k = min(strategy.k, len(others))
        picked: list[int] = []
        if k:
            picked = [int(t) for t in join_rng.choice(
                np.asarray(others, dtype=np.int64), size=k, replace=False)]
        for target in sorted(picked):
            habitat.connections[target] = Connection(target, ecosystem.params.p_init)
    elif isinstance(strategy, CloneAttach):
        similar = ecosystem.users.get(strategy.user_id)
        if similar is None:
            raise ValueError(f"unknown similar user: {strategy.user_id}")
        source = ecosystem.habitats[similar.habitat_id]
        for target in sorted(source.connections):
            if target != habitat_id:
                habitat.connections[target] = Connection(
                    target, source.connections[target].probability)
        habitat.connections[source.habitat_id] = Connection(
            source.habitat_id, ecosystem.params.p_init)
    else:
        raise TypeError(f"unknown join strategy: {strategy!r}")

    ecosystem.users[user_id] = User(user_id, community_ids, habitat_id,
                                    ecosystem.default_request_rate)
    ecosystem.habitats[habitat_id] = habitat
    for target in sorted(habitat.connections):
        ecosystem.log_event("connection_created", source=habitat_id, target=target,
                            probability=habitat.connections[target].probability,
                            reason="join")
    for target in sorted(habitat.connections):
        neighbour = ecosystem.habitats[target]
        for gene_id in sorted(neighbour.gene_pool):
            hab._insert_gene(habitat, neighbour.gene_pool[gene_id].gene,
                             ecosystem, None, "join_merge")
    ecosystem.log_event("user_joined", user=user_id, habitat=habitat_id,
                        communities=sorted(community_ids))
    return habitat_id


def generate_request(ecosystem: Ecosystem, user: User,
                     rng: np.random.Generator) -> Request:
    """Sample a request from one of the user's communities.

    Unit weights unless the scenario enables jitter (uniform in [0.5, 1.5]).
    """
    community_ids = sorted(user.community_ids)
    community = ecosystem.communities[
        community_ids[int(rng.integers(len(community_ids)))]]
    vocab = sorted(community.vocabulary)
    low, high = community.request_size_range
    high = min(high, len(vocab))
    low = min(low, high)
    size = int(rng.integers(low, high + 1))
    picked = rng.choice(np.asarray(vocab, dtype=np.int64), size=size, replace=False)
    wants: dict[int, float] = {}
    for attr in sorted(int(a) for a in picked):
        wants[attr] = float(rng.uniform(0.5, 1.5)) if ecosystem.weight_jitter else 1.0
    return Request(wants, user.user_id)


def handle_request(ecosystem: Ecosystem, user: User, request: Request) -> RequestOutcome:
    """Run the full per-request pipeline at the user's habitat.

    Evolve a solution, register a non-empty elite, execute it (migrate and
    reinforce toward provenance) when coverage reaches the execution
    threshold, then apply link decay, the gene life-cycle, and pruning.
    An empty pool is a hard failure that still ages links and advances the
    clock.
    """
    habitat = ecosystem.habitats[user.habitat_id]
    habitat.request_count += 1
    habitat.note_request(request)
    habitat_rng = ecosystem.rng.stream("habitat", habitat.habitat_id)
    params = ecosystem.params

    pool = habitat.pool_genes()
    solution: GeneSet | None = None
    fitness_value: FitnessValue | None = None
    generations = 0
    reached = False
    executed = False

    if pool:
        pop_rng = ecosystem.rng.ephemeral_stream(
            "pop", habitat.habitat_id, habitat.request_count)
        result = run_evolution(request, pool, habitat.archive_pairs(), params,
                               pop_rng, ecosystem.global_registry,
                               home=habitat.habitat_id)
        generations = result.generations
        reached = result.reached_target
        fitness_value = result.best_fitness
        if result.best.members:
            solution = result.best
            hab.register_geneset(habitat, solution, request, ecosystem)
        executed = solution is not None and fitness_value.coverage >= params.exec_threshold
        if executed:
            hab.execution_feedback(habitat, solution, request, ecosystem, habitat_rng)
    else:
        ecosystem.log_event("request_unservable", habitat=habitat.habitat_id,
                            user=user.user_id)

    members = solution.members if solution is not None else frozenset()
    hab.decay_unused_links(habitat, members, ecosystem)
    hab.usage_tick(habitat, members, ecosystem, habitat_rng)
    hab.prune_connections(ecosystem)
    ecosystem.clock += 1

    outcome = RequestOutcome(
        step=ecosystem.step_count, clock=ecosystem.clock, user_id=user.user_id,
        habitat_id=habitat.habitat_id, request=request, solution=solution,
        fitness=fitness_value, generations=generations, reached_target=reached,
        executed=executed, failed=not executed)
    ecosystem.log_event(
        "request_outcome", user=user.user_id, habitat=habitat.habitat_id,
        wants=sorted(request.wants),
        members=sorted(members),
        coverage=fitness_value.coverage if fitness_value else None,
        total_cost=fitness_value.total_cost if fitness_value else None,
        scalar=fitness_value.scalar if fitness_value else None,
        generations=generations, reached_target=reached, executed=executed)
    return outcome


def step(ecosystem: Ecosystem) -> list[RequestOutcome]:
    """One tick: every user issues a request with probability request_rate,
    processed in ascending user-id order."""
    ecosystem.step_count += 1
    outcomes: list[RequestOutcome] = []
    for user_id in sorted(ecosystem.users):
        user = ecosystem.users[user_id]
        user_rng = ecosystem.rng.stream("user", user_id)
        if user_rng.random() < user.request_rate:
            request = generate_request(ecosystem, user, user_rng)
            outcomes.append(handle_request(ecosystem, user, request))
    ecosystem.log_event("step_done", outcomes=len(outcomes))
    return outcomes


@dataclass
class RunResult:
    ecosystem: Ecosystem
    timeline: list[RequestOutcome]
    event_log: list[dict]


def run_scenario(config, seed: int, steps: int, on_snapshot=None) -> RunResult:
    """Build the world and run it for a number of ticks.

    ``on_snapshot(ecosystem, step)`` fires every ``params.snapshot_interval``
    ticks when supplied.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    ecosystem = build_ecosystem(config, seed)
    interval = ecosystem.params.snapshot_interval
    timeline: list[RequestOutcome] = []
    for tick in range(1, steps + 1):
        timeline.extend(step(ecosystem))
        if on_snapshot is not None and tick % interval == 0:
            on_snapshot(ecosystem, tick)
    return RunResult(ecosystem, timeline, ecosystem.event_log)
