"""Engine tunables and their defaults; every field is scenario-overridable."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

__all__ = ["Params", "PARAM_BOUNDS"]


@dataclass(frozen=True)
class Params:
    alpha: float = 0.05                  # per-gene parsimony penalty in scalar fitness
    population_size: int = 20
    p_cross: float = 0.7
    p_mut: float = 1.0                   # expected one membership toggle per mutation
    max_generations: int = 100
    target_coverage: float = 0.95
    exec_threshold: float = 0.5          # coverage needed for a solution to be executed
    seed_fraction: float = 0.25
    reinforce_delta: float = 0.1
    decay_delta: float = 0.05
    prune_threshold: float = 0.01
    p_init: float = 0.1                  # probability given to newly created connections
    unused_threshold: int = 5
    cluster_edge_threshold: float = 0.2
    k_init: int = 4
    b_init: float = 0.7                  # same-community bias of initial links
    archive_cap: int = 256
    epoch_length: int = 100
    snapshot_interval: int = 100

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Params":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown tunables: {sorted(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "Params":
        return dataclasses.replace(self, **changes)


# (kind, low, high); high=None means unbounded. Used by scenario validation.
PARAM_BOUNDS = {
    "alpha": ("float", 0.0, None),
    "population_size": ("int", 2, None),
    "p_cross": ("float", 0.0, 1.0),
    "p_mut": ("float", 0.0, 1.0),
    "max_generations": ("int", 1, None),
    "target_coverage": ("float", 0.0, 1.0),
    "exec_threshold": ("float", 0.0, 1.0),
    "seed_fraction": ("float", 0.0, 1.0),
    "reinforce_delta": ("float", 0.0, 1.0),
    "decay_delta": ("float", 0.0, 1.0),
    "prune_threshold": ("float", 0.0, 1.0),
    "p_init": ("float", 0.0, 1.0),
    "unused_threshold": ("int", 1, None),
    "cluster_edge_threshold": ("float", 0.0, 1.0),
    "k_init": ("int", 0, None),
    "b_init": ("float", 0.0, 1.0),
    "archive_cap": ("int", 1, None),
    "epoch_length": ("int", 1, None),
    "snapshot_interval": ("int", 1, None),
}
