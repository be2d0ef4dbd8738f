"""Core domain types: genes, gene-sets, and user requests.

A gene is an indivisible unit of function described by the attributes it
provides and a fixed execution cost; copies of a gene at different habitats
share its id. A gene-set is a candidate solution: a combination of genes
whose pooled attributes answer a request, carrying the provenance of every
habitat where it (or any reused subset) was evolved. This module also holds
the small algebra used everywhere else: attribute unions, weighted request
similarity, and provenance merging.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

__all__ = [
    "Gene",
    "GeneSet",
    "Request",
    "UnknownGeneError",
    "resolve_gene",
    "union_attributes",
    "request_similarity",
    "merge_provenance",
]


class UnknownGeneError(KeyError):
    """A gene id could not be resolved in the registry."""

    def __init__(self, gene_id):
        super().__init__(gene_id)
        self.gene_id = gene_id

    def __str__(self) -> str:
        return f"unknown gene id: {self.gene_id}"


@dataclass(frozen=True)
class Gene:
    """Atomic unit of function. Never mutated; migration copies share gene_id."""

    gene_id: int
    provides: frozenset[int]
    cost: float
    origin_habitat: int

    def __post_init__(self):
        object.__setattr__(self, "provides", frozenset(self.provides))
        if not self.provides:
            raise ValueError(f"gene {self.gene_id}: provides must be non-empty")
        if any(a < 0 for a in self.provides):
            raise ValueError(f"gene {self.gene_id}: attribute ids must be non-negative")
        if not self.cost > 0:
            raise ValueError(f"gene {self.gene_id}: cost must be positive")


@dataclass(frozen=True)
class GeneSet:
    """A set of gene ids plus the habitats where it or reused subsets were evolved."""

    members: frozenset[int] = frozenset()
    provenance: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(self.members))
        object.__setattr__(self, "provenance", frozenset(self.provenance))

    def sorted_members(self) -> tuple[int, ...]:
        return tuple(sorted(self.members))


@dataclass
class Request:
    """A user demand: positive weights over wanted attributes."""

    wants: dict[int, float]
    issuer: int = 0

    def __post_init__(self):
        if not self.wants:
            raise ValueError("request must want at least one attribute")
        for attr, weight in self.wants.items():
            if attr < 0:
                raise ValueError(f"request attribute {attr} is negative")
            if not weight > 0:
                raise ValueError(f"request weight for attribute {attr} must be positive")

    def sorted_wants(self) -> tuple[tuple[int, float], ...]:
        return tuple(sorted(self.wants.items()))

    def key(self) -> tuple:
        """Hashable identity of the demanded weights (issuer excluded)."""
        return self.sorted_wants()


def resolve_gene(registry: Mapping[int, Gene], gene_id: int) -> Gene:
    try:
        return registry[gene_id]
    except KeyError:
        raise UnknownGeneError(gene_id) from None


def union_attributes(gs: GeneSet, registry: Mapping[int, Gene]) -> set[int]:
    """Union of the attributes provided by a gene-set's members."""
    out: set[int] = set()
    for gene_id in gs.sorted_members():
        out |= resolve_gene(registry, gene_id).provides
    return out


def request_similarity(r1: Request, r2: Request) -> float:
    """Weighted Jaccard similarity of two requests, in [0, 1].

    Sum of min weights over shared attributes divided by sum of max weights
    over all attributes; 1.0 exactly when the weight maps are identical.
    """
    min_sum = 0.0
    max_sum = 0.0
    for attr in sorted(set(r1.wants) | set(r2.wants)):
        w1 = r1.wants.get(attr, 0.0)
        w2 = r2.wants.get(attr, 0.0)
        min_sum += min(w1, w2)
        max_sum += max(w1, w2)
    return min_sum / max_sum


def merge_provenance(parent_a: GeneSet, parent_b: GeneSet, created_at: int) -> frozenset[int]:
    """Provenance of offspring: both parents' habitats plus the creating one."""
    return parent_a.provenance | parent_b.provenance | frozenset((created_at,))
