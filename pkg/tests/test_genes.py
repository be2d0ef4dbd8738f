"""Domain-type algebra: attribute unions, request similarity, provenance."""

import numpy as np
import pytest

from ecodec.genes import (
    Gene,
    GeneSet,
    Request,
    UnknownGeneError,
    merge_provenance,
    request_similarity,
    union_attributes,
)


def make_registry(*provides_sets):
    registry = {}
    for i, provides in enumerate(provides_sets):
        registry[i] = Gene(i, frozenset(provides), 1.0, 0)
    return registry


class TestTypes:
    def test_gene_requires_attributes(self):
        with pytest.raises(ValueError):
            Gene(0, frozenset(), 1.0, 0)

    def test_gene_requires_positive_cost(self):
        with pytest.raises(ValueError):
            Gene(0, frozenset({1}), 0.0, 0)
        with pytest.raises(ValueError):
            Gene(0, frozenset({1}), -2.0, 0)

    def test_geneset_members_are_sets(self):
        gs = GeneSet([3, 1, 3, 1], [7])
        assert gs.members == frozenset({1, 3})
        assert gs.sorted_members() == (1, 3)

    def test_request_validation(self):
        with pytest.raises(ValueError):
            Request({}, 0)
        with pytest.raises(ValueError):
            Request({1: 0.0}, 0)
        with pytest.raises(ValueError):
            Request({1: -0.5}, 0)


class TestUnionAttributes:
    def test_empty_set(self):
        assert union_attributes(GeneSet(), {}) == set()

    def test_simple_union(self):
        registry = make_registry({0, 1}, {1, 2})
        assert union_attributes(GeneSet({0, 1}), registry) == {0, 1, 2}

    def test_unknown_gene_named_in_error(self):
        with pytest.raises(UnknownGeneError) as err:
            union_attributes(GeneSet({99}), {})
        assert "99" in str(err.value)

    def test_matches_naive_accumulation_oracle(self):
        # oracle: accumulate provides one gene at a time
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = 12
            registry = make_registry(*[
                set(int(a) for a in rng.choice(30, size=rng.integers(1, 5), replace=False))
                for _ in range(n)
            ])
            members = frozenset(int(g) for g in rng.choice(n, size=12, replace=False))
            expected = set()
            for gene_id in members:
                for attr in registry[gene_id].provides:
                    expected.add(attr)
            assert union_attributes(GeneSet(members), registry) == expected

    def test_monotone_in_members(self):
        rng = np.random.default_rng(3)
        registry = make_registry(*[{int(a)} for a in rng.integers(0, 10, size=8)])
        members = set()
        previous = set()
        for gene_id in range(8):
            members.add(gene_id)
            current = union_attributes(GeneSet(members), registry)
            assert previous <= current
            previous = current


class TestRequestSimilarity:
    def test_identity_is_one(self):
        r = Request({1: 2.0, 4: 0.5}, 0)
        assert request_similarity(r, r) == 1.0

    def test_disjoint_is_zero(self):
        assert request_similarity(Request({1: 1.0}, 0), Request({2: 1.0}, 0)) == 0.0

    def test_stated_example_one_third(self):
        r1 = Request({0: 1.0, 1: 1.0}, 0)
        r2 = Request({1: 1.0, 2: 1.0}, 0)
        assert request_similarity(r1, r2) == pytest.approx(1.0 / 3.0)

    def test_symmetric_bounded_and_exact_one_only_on_identity(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            def random_request():
                attrs = rng.choice(8, size=int(rng.integers(1, 5)), replace=False)
                return Request({int(a): float(rng.uniform(0.1, 3.0)) for a in attrs}, 0)
            r1, r2 = random_request(), random_request()
            s12 = request_similarity(r1, r2)
            s21 = request_similarity(r2, r1)
            assert s12 == s21
            assert 0.0 <= s12 <= 1.0
            if s12 == 1.0:
                assert r1.wants == r2.wants
            if r1.wants == r2.wants:
                assert s12 == 1.0


class TestMergeProvenance:
    def test_union_plus_creator(self):
        a = GeneSet({1}, {10})
        b = GeneSet({2}, {20})
        assert merge_provenance(a, b, 30) == frozenset({10, 20, 30})

    def test_idempotent(self):
        a = GeneSet({1}, {10})
        assert merge_provenance(a, a, 10) == frozenset({10})

    def test_chain_of_merges_equals_flat_union(self):
        # oracle: flat union of all inputs and creation sites
        rng = np.random.default_rng(5)
        for _ in range(30):
            sets = [GeneSet({i}, set(int(h) for h in
                                     rng.choice(50, size=rng.integers(1, 4), replace=False)))
                    for i in range(5)]
            creators = [int(c) for c in rng.integers(50, 60, size=4)]
            merged = sets[0]
            expected = set(sets[0].provenance)
            for nxt, creator in zip(sets[1:], creators):
                merged = GeneSet(merged.members | nxt.members,
                                 merge_provenance(merged, nxt, creator))
                expected |= set(nxt.provenance)
                expected.add(creator)
            assert merged.provenance == frozenset(expected)

    def test_never_loses_a_parent_habitat(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            pa = frozenset(int(h) for h in rng.choice(20, size=rng.integers(1, 6), replace=False))
            pb = frozenset(int(h) for h in rng.choice(20, size=rng.integers(1, 6), replace=False))
            merged = merge_provenance(GeneSet({1}, pa), GeneSet({2}, pb), 99)
            assert pa <= merged and pb <= merged
