"""Topology, acceleration, fragmentation, and abundance analyses."""

import csv
import io
import json
import statistics

import numpy as np
import pytest

from ecodec.config import parse_scenario
from ecodec.ecosystem import RequestOutcome, build_ecosystem, run_scenario
from ecodec.evolution import FitnessValue
from ecodec.genes import Request
from ecodec.metrics import (
    TopologySnapshot,
    abundance_distribution,
    acceleration_curve,
    community_alignment,
    edge_list_lines,
    fragmentation_report,
    timeline_csv,
    topology_snapshot,
)


def snap(nodes, edges, tick=0):
    return TopologySnapshot(tick,
                            tuple((n, frozenset(c)) for n, c in nodes),
                            tuple(edges))


def outcome(step, generations=0, executed=True, user=0):
    fitness = FitnessValue(1.0, 1.0, 0.9) if executed else None
    return RequestOutcome(step=step, clock=step, user_id=user, habitat_id=user,
                          request=Request({0: 1.0}, user), solution=None,
                          fitness=fitness, generations=generations,
                          reached_target=executed, executed=executed,
                          failed=not executed)


class TestCommunityAlignment:
    def test_single_community_reports_zero_inter(self):
        s = snap([(0, {0}), (1, {0})], [(0, 1, 0.5), (1, 0, 0.7)])
        truth = {0: frozenset({0}), 1: frozenset({0})}
        report = community_alignment(s, truth)
        assert report.intra_mean == pytest.approx(0.6)
        assert report.inter_mean == 0.0
        assert report.ratio == pytest.approx(0.6 / 1e-9)

    def test_hand_built_four_node_graph(self):
        # communities {0,1} and {2,3}; absent edges count as zero
        s = snap([(0, {0}), (1, {0}), (2, {1}), (3, {1})],
                 [(0, 1, 0.8), (1, 0, 0.6), (2, 3, 1.0), (0, 2, 0.2)])
        truth = {0: frozenset({0}), 1: frozenset({0}),
                 2: frozenset({1}), 3: frozenset({1})}
        report = community_alignment(s, truth)
        assert report.intra_mean == pytest.approx((0.8 + 0.6 + 1.0) / 4)
        assert report.inter_mean == pytest.approx(0.2 / 8)
        assert report.ratio == pytest.approx(0.6 / 0.025)

    def test_matches_independent_pairwise_scan(self):
        rng = np.random.default_rng(6)
        for _ in range(40):
            n = 8
            nodes = [(i, {int(rng.integers(0, 3))}) for i in range(n)]
            edges = []
            for a in range(n):
                for b in range(n):
                    if a != b and rng.random() < 0.3:
                        edges.append((a, b, float(rng.random())))
            truth = {i: frozenset(c) for i, c in nodes}
            report = community_alignment(snap(nodes, edges), truth)
            # second implementation: explicit dict of pair sums
            probs = {(a, b): p for a, b, p in edges}
            intra, inter = [], []
            for a in range(n):
                for b in range(n):
                    if a == b:
                        continue
                    bucket = intra if truth[a] & truth[b] else inter
                    bucket.append(probs.get((a, b), 0.0))
            intra_mean = sum(intra) / len(intra) if intra else 0.0
            inter_mean = sum(inter) / len(inter) if inter else 0.0
            assert report.intra_mean == pytest.approx(intra_mean)
            assert report.inter_mean == pytest.approx(inter_mean)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(15)
        nodes = [(i, {i % 2}) for i in range(6)]
        edges = [(a, b, float(rng.random()))
                 for a in range(6) for b in range(6)
                 if a != b and rng.random() < 0.4]
        truth = {i: frozenset(c) for i, c in nodes}
        base = community_alignment(snap(nodes, edges), truth)
        permutation = {i: (i * 3 + 1) % 7 for i in range(6)}  # injective relabel
        p_nodes = [(permutation[i], c) for i, c in nodes]
        p_edges = [(permutation[a], permutation[b], p) for a, b, p in edges]
        p_truth = {permutation[i]: truth[i] for i in truth}
        relabelled = community_alignment(snap(p_nodes, p_edges), p_truth)
        assert relabelled.intra_mean == pytest.approx(base.intra_mean)
        assert relabelled.inter_mean == pytest.approx(base.inter_mean)

    def test_empty_snapshot_rejected(self):
        with pytest.raises(ValueError):
            community_alignment(snap([], []), {})


class TestAccelerationCurve:
    def test_all_generation_zero_gives_flat_curve(self):
        outcomes = [outcome(step) for step in range(1, 201) for _ in range(3)]
        curve = acceleration_curve(outcomes, 100)
        assert [c.median_generations for c in curve] == [0, 0]

    def test_single_epoch_median(self):
        outcomes = [outcome(1, 4), outcome(2, 10), outcome(3, 2)]
        curve = acceleration_curve(outcomes, 3)
        assert len(curve) == 1
        assert curve[0].median_generations == 4

    def test_failures_excluded_and_counted(self):
        outcomes = [outcome(1, 5), outcome(2, 7, executed=False), outcome(3, 9)]
        curve = acceleration_curve(outcomes, 3)
        assert curve[0].median_generations == 7.0
        assert curve[0].successes == 2
        assert curve[0].failures == 1

    def test_non_dividing_epoch_rejected(self):
        with pytest.raises(ValueError):
            acceleration_curve([outcome(5)], 3)

    def test_empty_timeline_rejected(self):
        with pytest.raises(ValueError):
            acceleration_curve([], 100)

    def test_matches_external_median_on_exported_csv(self):
        rng = np.random.default_rng(2)
        outcomes = [outcome(int(step), int(rng.integers(0, 100)),
                            executed=bool(rng.random() < 0.8))
                    for step in range(1, 101) for _ in range(4)]
        curve = acceleration_curve(outcomes, 50)
        text = timeline_csv(outcomes)
        rows = list(csv.DictReader(io.StringIO(text)))
        for epoch_stats in curve:
            values = [int(r["generations"]) for r in rows
                      if epoch_stats.first_step <= int(r["step"]) <= epoch_stats.last_step
                      and r["executed"] == "1"]
            expected = statistics.median(values) if values else None
            assert epoch_stats.median_generations == expected


class TestFragmentation:
    def test_complete_graph_single_component(self):
        edges = [(a, b, 1.0) for a in range(4) for b in range(4) if a != b]
        report = fragmentation_report(snap([(i, {0}) for i in range(4)], edges))
        assert report.component_count == 1
        assert report.isolated == ()

    def test_empty_edges_isolates_everyone(self):
        report = fragmentation_report(snap([(i, {0}) for i in range(3)], []))
        assert report.component_count == 3
        assert report.isolated == (0, 1, 2)

    def test_weak_edges_ignored(self):
        report = fragmentation_report(
            snap([(0, {0}), (1, {0})], [(0, 1, 0.19)]), edge_threshold=0.2)
        assert report.component_count == 2

    def test_matches_union_find_oracle(self):
        rng = np.random.default_rng(44)
        for _ in range(40):
            n = 10
            nodes = [(i, {0}) for i in range(n)]
            edges = [(a, b, float(rng.random()))
                     for a in range(n) for b in range(n)
                     if a != b and rng.random() < 0.12]
            report = fragmentation_report(snap(nodes, edges))
            parent = list(range(n))

            def find(x):
                while parent[x] != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                return x

            for a, b, p in edges:
                pa = max((q for s, t, q in edges if (s, t) == (a, b) or (s, t) == (b, a)),
                         default=0.0)
                if pa >= 0.2:
                    parent[find(a)] = find(b)
            roots = {find(i) for i in range(n)}
            assert report.component_count == len(roots)
            singles = tuple(sorted(i for i in range(n)
                                   if sum(1 for j in range(n) if find(j) == find(i)) == 1))
            assert report.isolated == singles

    def test_components_partition_the_habitat_set(self):
        rng = np.random.default_rng(3)
        nodes = [(i, {0}) for i in range(9)]
        edges = [(a, b, float(rng.random()))
                 for a in range(9) for b in range(9) if a != b and rng.random() < 0.2]
        report = fragmentation_report(snap(nodes, edges))
        assert 1 <= report.component_count <= 9
        assert set(report.isolated) <= set(range(9))


class TestAbundance:
    def scenario(self):
        return parse_scenario(json.dumps({
            "version": "ecodec-scenario/1",
            "communities": {"count": 2, "vocab_size": 6, "overlap_fraction": 0.0},
            "users_per_community": 4,
            "genes_per_user": 3,
            "request_size_range": [2, 3],
            "tunables": {"p_init": 0.0},
        }))

    def test_fresh_world_without_migration_counts_one_each(self):
        # p_init 0 means initial deployment cannot copy anywhere
        e = build_ecosystem(self.scenario(), 2)
        report = abundance_distribution(e)
        assert all(count == 1 for count in report.counts.values())
        assert report.log2_histogram == {0: len(report.counts)}

    def test_counts_sum_to_pool_occupancy(self):
        cfg = parse_scenario(json.dumps({
            "version": "ecodec-scenario/1",
            "communities": {"count": 2, "vocab_size": 6, "overlap_fraction": 0.0},
            "users_per_community": 4,
            "genes_per_user": 3,
            "request_size_range": [2, 3],
        }))
        result = run_scenario(cfg, 5, 20)
        e = result.ecosystem
        report = abundance_distribution(e)
        occupancy = sum(len(h.gene_pool) for h in e.habitats.values())
        assert sum(report.counts.values()) == occupancy
        assert all(count >= 1 for count in report.counts.values())

    def test_dead_genes_absent_from_counts(self):
        cfg = parse_scenario(json.dumps({
            "version": "ecodec-scenario/1",
            "communities": {"count": 1, "vocab_size": 4},
            "users_per_community": 2,
            "genes_per_user": 3,
            "request_size_range": [1, 2],
        }))
        result = run_scenario(cfg, 7, 60)
        e = result.ecosystem
        removed = {ev["gene"] for ev in e.event_log if ev["type"] == "pool_remove"
                   and ev["reason"] == "deleted"}
        pooled = set()
        for habitat in e.habitats.values():
            pooled |= set(habitat.gene_pool)
        report = abundance_distribution(e)
        assert set(report.counts) == pooled
        for gene_id in removed - pooled:
            assert gene_id not in report.counts


class TestExports:
    def test_edge_list_format(self):
        s = snap([(0, {0}), (1, {0})], [(0, 1, 0.25)])
        assert edge_list_lines(s) == ["0 1 0.25"]

    def test_topology_snapshot_sorted_and_positive(self):
        cfg = parse_scenario(json.dumps({
            "version": "ecodec-scenario/1",
            "communities": {"count": 2, "vocab_size": 6, "overlap_fraction": 0.0},
            "users_per_community": 3,
            "genes_per_user": 2,
            "request_size_range": [1, 2],
        }))
        result = run_scenario(cfg, 9, 10)
        s = topology_snapshot(result.ecosystem)
        assert [n for n, _ in s.nodes] == sorted(n for n, _ in s.nodes)
        assert all(0.0 < p <= 1.0 for _, _, p in s.edges)
        assert s.edges == tuple(sorted(s.edges, key=lambda e: (e[0], e[1])))

    def test_timeline_csv_columns_and_failure_rows(self):
        text = timeline_csv([outcome(1, 4), outcome(2, 0, executed=False)])
        lines = text.strip().split("\n")
        assert lines[0] == ("step,clock,user_id,habitat_id,wants,members,coverage,"
                            "total_cost,scalar,generations,reached_target,executed,failed")
        assert lines[2].split(",")[6] == ""  # failed outcome leaves coverage empty
