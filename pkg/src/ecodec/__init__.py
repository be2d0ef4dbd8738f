"""ecodec: deterministic ecosystem-style distributed evolutionary computing.

A network of per-user habitats exchanges atomic genes over probabilistic,
usage-adapted connections; each user request evolves an optimal gene-set from
the locally pooled genes, and the feedback from executed solutions reshapes
the topology until it mirrors the user community structure.
"""

from .genes import (
    Gene,
    GeneSet,
    Request,
    UnknownGeneError,
    merge_provenance,
    request_similarity,
    union_attributes,
)
from .params import Params
from .rng import RandomSource
from .evolution import (
    BruteForceResult,
    EvolutionResult,
    FitnessValue,
    NoGenesAvailableError,
    Population,
    brute_force_optimal,
    crossover,
    dominates,
    evolve_step,
    fitness,
    init_population,
    mutate,
    nondominated_front,
    run_evolution,
    trace_csv,
)
from .habitat import (
    Connection,
    GeneUsageState,
    Habitat,
    cluster_of,
    deploy_gene,
    escape_range,
    execution_feedback,
    hebbian_decay,
    hebbian_reinforce,
    migrate_copy,
    register_geneset,
    usage_tick,
)
from .ecosystem import (
    CloneAttach,
    Community,
    Ecosystem,
    RandomAttach,
    RequestOutcome,
    User,
    build_ecosystem,
    generate_request,
    handle_request,
    join_user,
    run_scenario,
    step,
)
from .metrics import (
    abundance_distribution,
    acceleration_curve,
    community_alignment,
    fragmentation_report,
    timeline_csv,
    topology_snapshot,
)
from .config import ScenarioConfig, ScenarioError, parse_scenario, serialize_scenario
from .snapshot import (
    SnapshotError,
    load_snapshot_file,
    save_snapshot_file,
    snapshot_load,
    snapshot_save,
)
from .cli import cli_run

__version__ = "0.1.0"
