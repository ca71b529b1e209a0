"""Efficient perfect public equilibria in repeated games with two-signal monitoring."""

from .deviation import (
    ConditionReport,
    DeviationStats,
    alpha,
    beta,
    check_conditions,
    check_prop1,
    corners,
    deviation_stats,
    min_discount,
    mu_min,
    regularity,
)
from .elaborated import (
    AnnouncementRule,
    MeasurementDevice,
    OutcomeModel,
    coarsen,
    custom_matrix,
    make_contest,
    make_mm1,
    make_modified_pd,
    make_table3,
    reduce,
    table_game,
)
from .engine import ContinuationState, EquilibriumConfig, continuations, run, step
from .errors import *  # noqa: F401,F403
from .game import (
    ActionSpace,
    EfficientFrontier,
    ReducedGame,
    efficient_frontier,
    preferred_profiles,
    validate_assumptions,
)
from .oracle import (
    DecompositionOracle,
    decomposable,
    efficient_ppe_interval,
    is_self_generating,
    two_player,
)
from .sim import DeviationPolicy, deviation_value, simulate

__version__ = "0.1.0"
