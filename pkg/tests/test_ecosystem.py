"""World construction, the request loop, joining, and determinism."""

import json

import numpy as np
import pytest

from ecodec.config import parse_scenario
from ecodec.ecosystem import (
    CloneAttach,
    RandomAttach,
    build_ecosystem,
    generate_request,
    handle_request,
    join_user,
    run_scenario,
    step,
)
from ecodec.genes import Gene
from ecodec.habitat import Connection, deploy_gene
from ecodec.snapshot import snapshot_bytes


def scenario(**overrides):
    document = {
        "version": "ecodec-scenario/1",
        "communities": {"count": 2, "vocab_size": 6, "overlap_fraction": 0.0},
        "users_per_community": 4,
        "genes_per_user": 3,
        "request_size_range": [2, 3],
    }
    tunables = overrides.pop("tunables", None)
    document.update(overrides)
    if tunables:
        document["tunables"] = tunables
    return parse_scenario(json.dumps(document))


class TestBuildEcosystem:
    def test_single_user_world_has_no_connections(self):
        cfg = scenario(communities={"count": 1, "vocab_size": 6},
                       users_per_community=1)
        e = build_ecosystem(cfg, 1)
        assert len(e.habitats) == 1
        assert e.habitats[0].connections == {}

    def test_out_degree_is_k_init(self):
        cfg = scenario(users_per_community=10,
                       communities={"count": 2, "vocab_size": 6, "overlap_fraction": 0.0},
                       tunables={"k_init": 4})
        e = build_ecosystem(cfg, 3)
        for habitat in e.habitats.values():
            assert len(habitat.connections) == 4
            assert habitat.habitat_id not in habitat.connections  # no self-links

    def test_same_seed_builds_identical_worlds(self):
        cfg = scenario()
        assert snapshot_bytes(build_ecosystem(cfg, 9)) == \
            snapshot_bytes(build_ecosystem(cfg, 9))

    def test_different_seeds_differ(self):
        cfg = scenario()
        assert snapshot_bytes(build_ecosystem(cfg, 1)) != \
            snapshot_bytes(build_ecosystem(cfg, 2))

    def test_one_habitat_per_user_and_registry_integrity(self):
        cfg = scenario()
        e = build_ecosystem(cfg, 5)
        assert set(e.users) == set(e.habitats)
        for user in e.users.values():
            assert user.habitat_id in e.habitats
        for habitat in e.habitats.values():
            for gene_id in habitat.gene_pool:
                assert gene_id in e.global_registry

    def test_gene_attributes_come_from_owner_community(self):
        cfg = scenario()
        e = build_ecosystem(cfg, 7)
        for habitat in e.habitats.values():
            owner_vocab = set()
            for community_id in e.users[habitat.owner].community_ids:
                owner_vocab |= e.communities[community_id].vocabulary
            for state in habitat.gene_pool.values():
                if state.gene.origin_habitat == habitat.habitat_id:
                    assert state.gene.provides <= owner_vocab

    def test_community_blind_when_bias_zero(self):
        # with b_init=0 cross-community links should appear in quantity
        cfg = scenario(users_per_community=10, tunables={"b_init": 0.0})
        e = build_ecosystem(cfg, 11)
        cross = 0
        for habitat in e.habitats.values():
            mine = e.users[habitat.owner].community_ids
            for target in habitat.connections:
                if not (e.users[e.habitats[target].owner].community_ids & mine):
                    cross += 1
        assert cross > 10


class TestJoinUser:
    def test_clone_copies_connections_plus_link_to_source(self):
        cfg = scenario()
        e = build_ecosystem(cfg, 1)
        source = e.habitats[2]
        source.connections.clear()
        source.connections[3] = Connection(3, 0.8)
        source.connections[4] = Connection(4, 0.3)
        new_id = join_user(e, {0}, CloneAttach(2))
        new = e.habitats[new_id]
        probabilities = {t: c.probability for t, c in new.connections.items()}
        assert probabilities == {3: 0.8, 4: 0.3, 2: 0.1}

    def test_random_zero_is_isolated_and_empty(self):
        cfg = scenario()
        e = build_ecosystem(cfg, 1)
        new_id = join_user(e, {0}, RandomAttach(0))
        assert e.habitats[new_id].connections == {}
        assert e.habitats[new_id].gene_pool == {}

    def test_random_k_targets_at_p_init(self):
        cfg = scenario()
        e = build_ecosystem(cfg, 1)
        new_id = join_user(e, {1}, RandomAttach(3))
        new = e.habitats[new_id]
        assert len(new.connections) == 3
        assert all(c.probability == 0.1 for c in new.connections.values())

    def test_merged_pool_is_union_of_neighbour_pools(self):
        cfg = scenario()
        e = build_ecosystem(cfg, 13)
        new_id = join_user(e, {0}, RandomAttach(3))
        new = e.habitats[new_id]
        expected = set()
        for target in new.connections:
            expected |= set(e.habitats[target].gene_pool)
        assert set(new.gene_pool) == expected
        for state in new.gene_pool.values():
            assert state.unused_request_count == 0
        for target in new.connections:  # copies, not moves
            for gene_id in e.habitats[target].gene_pool:
                assert gene_id in e.global_registry

    def test_unknown_similar_user_rejected(self):
        cfg = scenario()
        e = build_ecosystem(cfg, 1)
        with pytest.raises(ValueError):
            join_user(e, {0}, CloneAttach(999))

    def test_unknown_community_rejected(self):
        cfg = scenario()
        e = build_ecosystem(cfg, 1)
        with pytest.raises(ValueError):
            join_user(e, {42}, RandomAttach(1))


class TestGenerateRequest:
    def test_single_attribute_vocabulary(self):
        cfg = scenario(communities={"count": 1, "vocab_size": 1},
                       users_per_community=1, request_size_range=[1, 1],
                       gene_attrs_range=[1, 1])
        e = build_ecosystem(cfg, 1)
        request = generate_request(e, e.users[0], np.random.default_rng(0))
        assert request.wants == {0: 1.0}

    def test_attributes_always_inside_community_vocabulary(self):
        cfg = scenario()
        e = build_ecosystem(cfg, 3)
        rng = np.random.default_rng(1)
        for user in e.users.values():
            vocab = set()
            for community_id in user.community_ids:
                vocab |= e.communities[community_id].vocabulary
            for _ in range(50):
                request = generate_request(e, user, rng)
                assert set(request.wants) <= vocab
                assert all(w == 1.0 for w in request.wants.values())

    def test_weight_jitter_range(self):
        cfg = scenario(weight_jitter=True)
        e = build_ecosystem(cfg, 3)
        rng = np.random.default_rng(2)
        for _ in range(100):
            request = generate_request(e, e.users[0], rng)
            assert all(0.5 <= w <= 1.5 for w in request.wants.values())

    def test_attribute_frequencies_uniform_by_chi_square(self):
        cfg = scenario(communities={"count": 1, "vocab_size": 8},
                       users_per_community=1, request_size_range=[2, 4])
        e = build_ecosystem(cfg, 5)
        rng = np.random.default_rng(3)
        counts = {a: 0 for a in range(8)}
        total = 0
        for _ in range(10_000):
            request = generate_request(e, e.users[0], rng)
            for attr in request.wants:
                counts[attr] += 1
                total += 1
        expected = total / 8
        chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
        assert chi2 <= 24.32  # chi-square critical value, df=7, p=0.999


class TestHandleRequest:
    def test_perfect_single_gene_pool(self):
        cfg = scenario(communities={"count": 1, "vocab_size": 2},
                       users_per_community=1, genes_per_user=0,
                       request_size_range=[2, 2], tunables={"k_init": 0})
        e = build_ecosystem(cfg, 1)
        gene = Gene(e.new_gene_id(), frozenset({0, 1}), 1.0, 0)
        deploy_gene(e.habitats[0], gene, e, e.rng.stream("habitat", 0))
        request = generate_request(e, e.users[0], e.rng.stream("user", 0))
        outcome = handle_request(e, e.users[0], request)
        assert outcome.fitness.coverage == 1.0
        assert outcome.generations == 0
        assert outcome.executed and not outcome.failed
        assert outcome.solution.members == {gene.gene_id}

    def test_empty_pool_fails_but_advances_clock_and_decays(self):
        cfg = scenario(communities={"count": 1, "vocab_size": 2},
                       users_per_community=2, genes_per_user=0,
                       request_size_range=[1, 2], tunables={"k_init": 0})
        e = build_ecosystem(cfg, 1)
        e.habitats[1].connections[0] = Connection(0, 0.5)
        request = generate_request(e, e.users[0], e.rng.stream("user", 0))
        outcome = handle_request(e, e.users[0], request)
        assert outcome.failed and not outcome.executed
        assert outcome.solution is None
        assert e.clock == 1
        assert e.habitats[1].connections[0].probability == pytest.approx(0.475)

    def test_clock_counts_handled_requests(self):
        cfg = scenario()
        e = build_ecosystem(cfg, 2)
        handled = 0
        for _ in range(5):
            outcomes = step(e)
            handled += len(outcomes)
            assert e.clock == handled

    def test_replay_is_identical(self):
        cfg = scenario()
        outcomes = []
        for _ in range(2):
            e = build_ecosystem(cfg, 21)
            rows = []
            for _ in range(10):
                for outcome in step(e):
                    rows.append((outcome.user_id, outcome.generations,
                                 sorted(outcome.solution.members) if outcome.solution else None,
                                 outcome.fitness.scalar if outcome.fitness else None))
            outcomes.append(rows)
        assert outcomes[0] == outcomes[1]


class TestStep:
    def test_zero_rates_produce_no_outcomes(self):
        cfg = scenario(request_rate=0.0)
        e = build_ecosystem(cfg, 1)
        assert step(e) == []
        assert e.clock == 0
        assert e.step_count == 1
        assert e.event_log[-1]["type"] == "step_done"

    def test_unit_rates_produce_one_outcome_per_user(self):
        cfg = scenario(request_rate=1.0)
        e = build_ecosystem(cfg, 1)
        outcomes = step(e)
        assert len(outcomes) == len(e.users)
        assert [o.user_id for o in outcomes] == sorted(e.users)

    def test_run_scenario_steps_one_equals_build_plus_step(self):
        cfg = scenario()
        result = run_scenario(cfg, 31, 1)
        e2 = build_ecosystem(cfg, 31)
        step(e2)
        assert snapshot_bytes(result.ecosystem) == snapshot_bytes(e2)

    def test_run_scenario_rejects_zero_steps(self):
        with pytest.raises(ValueError):
            run_scenario(scenario(), 1, 0)

    def test_registry_integrity_and_user_habitat_invariants_hold(self):
        cfg = scenario()
        result = run_scenario(cfg, 17, 25)
        e = result.ecosystem
        for habitat in e.habitats.values():
            for gene_id in habitat.gene_pool:
                assert gene_id in e.global_registry
            for entry in habitat.archive:
                assert entry.gene_set.members <= set(e.global_registry)
                assert entry.gene_set.provenance  # non-empty
        assert set(e.users) == set(e.habitats)
        assert e.clock == len(result.timeline)

    def test_snapshot_hook_fires_at_interval(self):
        cfg = scenario(tunables={"snapshot_interval": 5})
        seen = []
        run_scenario(cfg, 3, 12, on_snapshot=lambda e, tick: seen.append(tick))
        assert seen == [5, 10]
