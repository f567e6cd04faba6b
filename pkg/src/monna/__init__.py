"""Byzantine-robust decentralized SGD simulator (momentum + nearest-neighbor averaging)."""

from .aggregation import (
    AggregationRule,
    aggregate,
    coordinate_trimmed_mean,
    geometric_median,
    mean,
    nna,
)
from .attacks import Adversary, AttackSpec, attack_vector, grid_search_zeta
from .config import SystemConfig, parse_and_validate, parse_text
from .node import (
    NodeState,
    Schedule,
    coordination_round,
    finalize_iteration,
    local_phase,
    output_model,
    theoretical_schedule,
    wide_regime_schedule,
)
from .objectives import (
    Logistic,
    NoiseModel,
    Quadratic,
    global_gradient,
    logistic_family,
    measure_heterogeneity,
    quadratic_family,
    stochastic_gradient,
    true_gradient,
)
from .reduction import (
    MixingReport,
    ReductionBound,
    audit,
    bound_eleven_f,
    bound_five_f,
    drift,
    make_nna_phase,
)
from .trainer import (
    MetricsRow,
    ResilienceVerdict,
    RunResult,
    ablation_matrix,
    momentum_deviation,
    resilience_check,
    run,
    run_single,
)

__all__ = [name for name in dir() if not name.startswith("_")]
