"""Command-line surface: run, resume, oracle, and metrics subcommands.

Exit codes: 0 success, 1 validation or input error, 2 internal invariant
violation. Diagnostics go to stderr; the ECODEC_LOG environment variable
(off/info/debug) controls engine logging. File writes are atomic
(write-temp-then-rename), and identical runs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
import time

import numpy as np

from .config import ScenarioError, parse_scenario
from .ecosystem import run_scenario, step
from .evolution import brute_force_optimal, run_evolution
from .genes import Gene, Request
from .metrics import (
    abundance_distribution,
    community_alignment,
    edge_list_lines,
    fragmentation_report,
    timeline_csv,
    topology_snapshot,
)
from .params import Params
from .snapshot import SnapshotError, load_snapshot_file, snapshot_bytes

__all__ = ["cli_run", "main", "oracle_experiment"]

log = logging.getLogger("ecodec")

# Oracle instance family: pools over this vocabulary, 1-2 attributes per gene,
# requests of 3-5 unit-weight attributes.
ORACLE_VOCAB_SIZE = 32
ORACLE_GENE_ATTRS = (1, 2)
ORACLE_REQUEST_ATTRS = (3, 5)
ORACLE_COST_RANGE = (0.5, 2.0)
ORACLE_SCALAR_TOLERANCE = 1e-9


def _configure_logging() -> None:
    level_name = os.environ.get("ECODEC_LOG", "off").lower()
    if level_name == "off":
        log.setLevel(logging.CRITICAL + 1)
        return
    levels = {"info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        print(f"ignoring unknown ECODEC_LOG level: {level_name}", file=sys.stderr)
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(levels[level_name])


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".out-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _event_log_lines(event_log) -> str:
    return "".join(json.dumps(event, sort_keys=True, separators=(",", ":")) + "\n"
                   for event in event_log)


def _write_outputs(out_dir: str, ecosystem, timeline, event_log, extra_summary) -> None:
    os.makedirs(out_dir, exist_ok=True)
    _atomic_write_text(os.path.join(out_dir, "timeline.csv"), timeline_csv(timeline))
    _atomic_write_text(os.path.join(out_dir, "events.jsonl"),
                       _event_log_lines(event_log))
    _atomic_write_text(os.path.join(out_dir, "snapshot_final.json"),
                       snapshot_bytes(ecosystem).decode("utf-8"))
    snap = topology_snapshot(ecosystem)
    _atomic_write_text(os.path.join(out_dir, "topology_final.edges"),
                       "\n".join(edge_list_lines(snap)) + "\n")
    truth = {h: ecosystem.users[ecosystem.habitats[h].owner].community_ids
             for h in ecosystem.habitats}
    alignment = community_alignment(snap, truth)
    fragmentation = fragmentation_report(
        snap, ecosystem.params.cluster_edge_threshold)
    abundance = abundance_distribution(ecosystem)
    executed = sum(1 for o in timeline if o.executed)
    summary = {
        "steps": ecosystem.step_count,
        "requests": ecosystem.clock,
        "executed": executed,
        "failed": len(timeline) - executed,
        "community_alignment": {
            "intra_mean": alignment.intra_mean,
            "inter_mean": alignment.inter_mean,
            "ratio": alignment.ratio,
        },
        "fragmentation": {
            "component_count": fragmentation.component_count,
            "isolated": list(fragmentation.isolated),
        },
        "gene_copies": sum(abundance.counts.values()),
        "distinct_genes_alive": len(abundance.counts),
        "log2_abundance_histogram": {str(k): v
                                     for k, v in abundance.log2_histogram.items()},
    }
    summary.update(extra_summary)
    _atomic_write_text(os.path.join(out_dir, "summary.json"),
                       json.dumps(summary, indent=2, sort_keys=True) + "\n")


def _snapshot_writer(out_dir: str):
    def write(ecosystem, tick: int) -> None:
        _atomic_write_text(os.path.join(out_dir, f"snapshot_{tick:06d}.json"),
                           snapshot_bytes(ecosystem).decode("utf-8"))
        snap = topology_snapshot(ecosystem)
        _atomic_write_text(os.path.join(out_dir, f"topology_{tick:06d}.edges"),
                           "\n".join(edge_list_lines(snap)) + "\n")
        log.info("snapshot written at step %d", tick)
    return write


def _cmd_run(args) -> int:
    with open(args.scenario, "r", encoding="utf-8") as handle:
        config = parse_scenario(handle.read())
    started = time.perf_counter()
    result = run_scenario(config, args.seed, args.steps,
                          on_snapshot=_snapshot_writer(args.out))
    elapsed = time.perf_counter() - started
    log.info("run finished: %d steps, %d requests, %.2fs",
             args.steps, len(result.timeline), elapsed)
    _write_outputs(args.out, result.ecosystem, result.timeline, result.event_log,
                   {"seed": args.seed, "elapsed_seconds": elapsed, "mode": "run"})
    return 0


def _cmd_resume(args) -> int:
    ecosystem = load_snapshot_file(args.snapshot)
    started = time.perf_counter()
    timeline = []
    interval = ecosystem.params.snapshot_interval
    writer = _snapshot_writer(args.out)
    for _ in range(args.steps):
        timeline.extend(step(ecosystem))
        if ecosystem.step_count % interval == 0:
            writer(ecosystem, ecosystem.step_count)
    elapsed = time.perf_counter() - started
    _write_outputs(args.out, ecosystem, timeline, ecosystem.event_log,
                   {"elapsed_seconds": elapsed, "mode": "resume",
                    "resumed_from_step": ecosystem.step_count - args.steps})
    return 0


def oracle_trial(pool_size: int, trial_rng: np.random.Generator,
                 evolution_rng: np.random.Generator,
                 params: Params) -> dict:
    """One random instance: evolve a solution and compare with brute force."""
    registry: dict[int, Gene] = {}
    pool = []
    for gene_id in range(pool_size):
        n_attrs = int(trial_rng.integers(ORACLE_GENE_ATTRS[0],
                                         ORACLE_GENE_ATTRS[1] + 1))
        provides = frozenset(int(a) for a in trial_rng.choice(
            ORACLE_VOCAB_SIZE, size=n_attrs, replace=False))
        cost = float(trial_rng.uniform(*ORACLE_COST_RANGE))
        gene = Gene(gene_id, provides, cost, 0)
        registry[gene_id] = gene
        pool.append(gene)
    n_wants = int(trial_rng.integers(ORACLE_REQUEST_ATTRS[0],
                                     ORACLE_REQUEST_ATTRS[1] + 1))
    wants = {int(a): 1.0 for a in trial_rng.choice(
        ORACLE_VOCAB_SIZE, size=n_wants, replace=False)}
    request = Request(wants, 0)

    evolved = run_evolution(request, pool, [], params, evolution_rng, registry)
    exact = brute_force_optimal(pool, request, pool_size, registry, params.alpha)
    matched = abs(evolved.best_fitness.scalar - exact.best_scalar) <= ORACLE_SCALAR_TOLERANCE
    return {
        "evolved_scalar": evolved.best_fitness.scalar,
        "optimal_scalar": exact.best_scalar,
        "generations": evolved.generations,
        "match": matched,
    }


def oracle_experiment(pool_size: int, trials: int, seed: int,
                      params: Params | None = None) -> dict:
    """Evolution-vs-exhaustive-search comparison over seeded random instances."""
    if pool_size > 20:
        raise ScenarioError("pool-size", "brute force refuses pools larger than 20")
    if pool_size < 1:
        raise ScenarioError("pool-size", "must be at least 1")
    if trials < 1:
        raise ScenarioError("trials", "must be at least 1")
    params = params or Params()
    root = np.random.SeedSequence(seed)
    started = time.perf_counter()
    matches = 0
    results = []
    for trial, child in enumerate(root.spawn(trials)):
        instance_seq, evolve_seq = child.spawn(2)
        trial_rng = np.random.Generator(np.random.PCG64(instance_seq))
        evolution_rng = np.random.Generator(np.random.PCG64(evolve_seq))
        outcome = oracle_trial(pool_size, trial_rng, evolution_rng, params)
        matches += outcome["match"]
        results.append(outcome)
        log.debug("oracle trial %d: %s", trial, outcome)
    elapsed = time.perf_counter() - started
    return {
        "pool_size": pool_size,
        "trials": trials,
        "seed": seed,
        "matches": matches,
        "match_rate": matches / trials,
        "elapsed_seconds": elapsed,
        "results": results,
    }


def _cmd_oracle(args) -> int:
    report = oracle_experiment(args.pool_size, args.trials, args.seed)
    del report["results"]
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_metrics(args) -> int:
    ecosystem = load_snapshot_file(args.snapshot)
    snap = topology_snapshot(ecosystem)
    truth = {h: ecosystem.users[ecosystem.habitats[h].owner].community_ids
             for h in ecosystem.habitats}
    alignment = community_alignment(snap, truth)
    fragmentation = fragmentation_report(snap, ecosystem.params.cluster_edge_threshold)
    abundance = abundance_distribution(ecosystem)
    print(json.dumps({
        "step": ecosystem.step_count,
        "requests": ecosystem.clock,
        "community_alignment": {
            "intra_mean": alignment.intra_mean,
            "inter_mean": alignment.inter_mean,
            "ratio": alignment.ratio,
        },
        "fragmentation": {
            "component_count": fragmentation.component_count,
            "isolated": list(fragmentation.isolated),
        },
        "gene_copies": sum(abundance.counts.values()),
        "distinct_genes_alive": len(abundance.counts),
        "log2_abundance_histogram": {str(k): v
                                     for k, v in abundance.log2_histogram.items()},
    }, indent=2, sort_keys=True))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecodec",
        description="Deterministic ecosystem-style distributed evolution simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario from scratch")
    run_p.add_argument("--scenario", required=True, help="scenario JSON path")
    run_p.add_argument("--seed", required=True, type=int)
    run_p.add_argument("--steps", required=True, type=int)
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.set_defaults(func=_cmd_run)

    resume_p = sub.add_parser("resume", help="continue from a snapshot")
    resume_p.add_argument("--snapshot", required=True)
    resume_p.add_argument("--steps", required=True, type=int)
    resume_p.add_argument("--out", required=True)
    resume_p.set_defaults(func=_cmd_resume)

    oracle_p = sub.add_parser(
        "oracle", help="compare evolution against exhaustive search")
    oracle_p.add_argument("--pool-size", required=True, type=int, dest="pool_size")
    oracle_p.add_argument("--trials", required=True, type=int)
    oracle_p.add_argument("--seed", required=True, type=int)
    oracle_p.set_defaults(func=_cmd_oracle)

    metrics_p = sub.add_parser("metrics", help="recompute analyses offline")
    metrics_p.add_argument("--snapshot", required=True)
    metrics_p.set_defaults(func=_cmd_metrics)
    return parser


def cli_run(argv=None) -> int:
    """Entry point returning an exit code (0 ok, 1 input error, 2 internal)."""
    _configure_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ScenarioError, SnapshotError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_run())


if __name__ == "__main__":
    main()
