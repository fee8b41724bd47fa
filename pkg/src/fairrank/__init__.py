"""Fairness-constrained re-ranking, ranking fairness metrics, and
demographic-inference noise simulation."""

from .core import (
    Candidate,
    Distribution,
    Ranking,
    SubgroupLabel,
    empirical_distribution,
    sort_by_score,
    subgroup_product,
)
from .detconstsort import check_feasibility, detconstsort
from .metrics import (
    AttentionModel,
    GroupStats,
    MetricsRecord,
    abr,
    attention,
    dibr,
    dtbr,
    evaluate_ranking,
    group_attention_stats,
    ndcg,
    ndkl,
    rank_change_metrics,
    skew_at_k,
)
from .noise import (
    BUILTIN_MATRICES,
    ConfusionMatrix,
    compose_matrices,
    identity_matrix,
    load_builtin_matrix,
    load_matrix_file,
    perturb_labels,
    uniform_accuracy_matrix,
)
from .simulation import (
    PopulationSpec,
    SweepConfig,
    SweepResult,
    case_study,
    generate_population,
    run_trial,
    sweep,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionModel",
    "BUILTIN_MATRICES",
    "Candidate",
    "ConfusionMatrix",
    "Distribution",
    "GroupStats",
    "MetricsRecord",
    "PopulationSpec",
    "Ranking",
    "SubgroupLabel",
    "SweepConfig",
    "SweepResult",
    "abr",
    "attention",
    "case_study",
    "check_feasibility",
    "compose_matrices",
    "detconstsort",
    "dibr",
    "dtbr",
    "empirical_distribution",
    "evaluate_ranking",
    "generate_population",
    "group_attention_stats",
    "identity_matrix",
    "load_builtin_matrix",
    "load_matrix_file",
    "ndcg",
    "ndkl",
    "perturb_labels",
    "rank_change_metrics",
    "run_trial",
    "skew_at_k",
    "sort_by_score",
    "subgroup_product",
    "sweep",
    "uniform_accuracy_matrix",
]
