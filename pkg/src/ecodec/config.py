"""Scenario documents: the JSON surface that configures a simulation.

A scenario names the world structure (communities, users, initial genes) and
may override any engine tunable. Parsing is strict: unknown keys are
rejected, and every violation names the offending path and constraint.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .params import PARAM_BOUNDS, Params

__all__ = [
    "SCENARIO_VERSION",
    "ScenarioError",
    "ScenarioConfig",
    "parse_scenario",
    "scenario_to_dict",
    "serialize_scenario",
    "community_vocabularies",
]

SCENARIO_VERSION = "ecodec-scenario/1"


class ScenarioError(ValueError):
    """Scenario document rejected; ``path`` points at the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class ScenarioConfig:
    community_count: int
    community_vocab_size: int
    users_per_community: int
    overlap_fraction: float = 0.0
    vocabulary_size: int | None = None     # derived from communities when omitted
    request_rate: float = 1.0
    request_size_range: tuple[int, int] = (2, 4)
    genes_per_user: int = 5
    gene_attrs_range: tuple[int, int] = (1, 2)
    gene_cost_range: tuple[float, float] = (0.5, 2.0)
    weight_jitter: bool = False
    params: Params = Params()


_TOP_LEVEL_KEYS = {
    "version", "communities", "users_per_community", "vocabulary_size",
    "request_rate", "request_size_range", "genes_per_user", "gene_attrs_range",
    "gene_cost_range", "weight_jitter", "tunables",
}
_COMMUNITY_KEYS = {"count", "vocab_size", "overlap_fraction"}


def _require_int(value, path: str, low=None, high=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(path, f"expected an integer, got {value!r}")
    if low is not None and value < low:
        raise ScenarioError(path, f"must be >= {low}, got {value}")
    if high is not None and value > high:
        raise ScenarioError(path, f"must be <= {high}, got {value}")
    return value


def _require_number(value, path: str, low=None, high=None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, f"expected a number, got {value!r}")
    value = float(value)
    if low is not None and value < low:
        raise ScenarioError(path, f"must be >= {low}, got {value}")
    if high is not None and value > high:
        raise ScenarioError(path, f"must be <= {high}, got {value}")
    return value


def _require_range(value, path: str, kind: str):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioError(path, f"expected a [low, high] pair, got {value!r}")
    if kind == "int":
        low = _require_int(value[0], f"{path}[0]", low=1)
        high = _require_int(value[1], f"{path}[1]", low=1)
    else:
        low = _require_number(value[0], f"{path}[0]", low=0.0)
        high = _require_number(value[1], f"{path}[1]", low=0.0)
    if low > high:
        raise ScenarioError(path, f"low {low} exceeds high {high}")
    return (low, high)


def _parse_params(data: dict) -> Params:
    if not isinstance(data, dict):
        raise ScenarioError("tunables", f"expected an object, got {data!r}")
    unknown = set(data) - set(PARAM_BOUNDS)
    if unknown:
        raise ScenarioError(f"tunables.{sorted(unknown)[0]}", "unknown tunable")
    values = {}
    for name, raw in data.items():
        kind, low, high = PARAM_BOUNDS[name]
        path = f"tunables.{name}"
        if kind == "int":
            values[name] = _require_int(raw, path, low=low, high=high)
        else:
            values[name] = _require_number(raw, path, low=low, high=high)
    return Params(**values)


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and fully validate a scenario document, filling defaults."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("$", f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError("$", "document root must be an object")
    if data.get("version") != SCENARIO_VERSION:
        raise ScenarioError("version",
                            f"expected {SCENARIO_VERSION!r}, got {data.get('version')!r}")
    unknown = set(data) - _TOP_LEVEL_KEYS
    if unknown:
        raise ScenarioError(sorted(unknown)[0], "unknown key")

    if "communities" not in data:
        raise ScenarioError("communities", "required")
    communities = data["communities"]
    if not isinstance(communities, dict):
        raise ScenarioError("communities", "expected an object")
    unknown = set(communities) - _COMMUNITY_KEYS
    if unknown:
        raise ScenarioError(f"communities.{sorted(unknown)[0]}", "unknown key")
    if "count" not in communities or "vocab_size" not in communities:
        raise ScenarioError("communities", "count and vocab_size are required")
    count = _require_int(communities["count"], "communities.count", low=1)
    vocab_size = _require_int(communities["vocab_size"], "communities.vocab_size", low=1)
    overlap = _require_number(communities.get("overlap_fraction", 0.0),
                              "communities.overlap_fraction", low=0.0, high=1.0)

    if "users_per_community" not in data:
        raise ScenarioError("users_per_community", "required")
    users = _require_int(data["users_per_community"], "users_per_community", low=1)

    request_range = _require_range(data.get("request_size_range", [2, 4]),
                                   "request_size_range", "int")
    if request_range[1] > vocab_size:
        raise ScenarioError("request_size_range",
                            f"high {request_range[1]} exceeds community vocabulary "
                            f"size {vocab_size}")
    attrs_range = _require_range(data.get("gene_attrs_range", [1, 2]),
                                 "gene_attrs_range", "int")
    if attrs_range[1] > vocab_size:
        raise ScenarioError("gene_attrs_range",
                            f"high {attrs_range[1]} exceeds community vocabulary "
                            f"size {vocab_size}")
    cost_range = _require_range(data.get("gene_cost_range", [0.5, 2.0]),
                                "gene_cost_range", "float")
    if cost_range[0] <= 0:
        raise ScenarioError("gene_cost_range[0]", "gene costs must be positive")

    weight_jitter = data.get("weight_jitter", False)
    if not isinstance(weight_jitter, bool):
        raise ScenarioError("weight_jitter", f"expected a boolean, got {weight_jitter!r}")

    config = ScenarioConfig(
        community_count=count,
        community_vocab_size=vocab_size,
        users_per_community=users,
        overlap_fraction=overlap,
        vocabulary_size=None,
        request_rate=_require_number(data.get("request_rate", 1.0), "request_rate",
                                     low=0.0, high=1.0),
        request_size_range=request_range,
        genes_per_user=_require_int(data.get("genes_per_user", 5),
                                    "genes_per_user", low=0),
        gene_attrs_range=attrs_range,
        gene_cost_range=cost_range,
        weight_jitter=weight_jitter,
        params=_parse_params(data.get("tunables", {})),
    )

    span = _vocabulary_span(config)
    declared = data.get("vocabulary_size")
    if declared is None:
        declared = span
    else:
        declared = _require_int(declared, "vocabulary_size", low=1)
        if declared < span:
            raise ScenarioError("vocabulary_size",
                                f"communities need {span} attributes, got {declared}")
    return dataclasses.replace(config, vocabulary_size=declared)


def _community_starts(config: ScenarioConfig) -> list[int]:
    stride = config.community_vocab_size * (1.0 - config.overlap_fraction)
    return [round(i * stride) for i in range(config.community_count)]


def _vocabulary_span(config: ScenarioConfig) -> int:
    return _community_starts(config)[-1] + config.community_vocab_size


def community_vocabularies(config: ScenarioConfig) -> list[frozenset[int]]:
    """Attribute blocks per community; consecutive blocks share the configured
    overlap fraction."""
    size = config.community_vocab_size
    return [frozenset(range(start, start + size)) for start in _community_starts(config)]


def scenario_to_dict(config: ScenarioConfig) -> dict:
    return {
        "version": SCENARIO_VERSION,
        "communities": {
            "count": config.community_count,
            "vocab_size": config.community_vocab_size,
            "overlap_fraction": config.overlap_fraction,
        },
        "users_per_community": config.users_per_community,
        "vocabulary_size": config.vocabulary_size,
        "request_rate": config.request_rate,
        "request_size_range": list(config.request_size_range),
        "genes_per_user": config.genes_per_user,
        "gene_attrs_range": list(config.gene_attrs_range),
        "gene_cost_range": list(config.gene_cost_range),
        "weight_jitter": config.weight_jitter,
        "tunables": config.params.to_dict(),
    }


def serialize_scenario(config: ScenarioConfig) -> str:
    return json.dumps(scenario_to_dict(config), indent=2, sort_keys=True) + "\n"
