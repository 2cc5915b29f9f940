"""Allocation of bunched-order fills to accounts in whole units.

Methods: per-fill proportional rounding, HPHA (high price to high account),
APS (average pricing per day and side) and FOUR (per-fill divergence
minimizing search), all booked into an exact mark-to-market ledger.
"""

from .four import (
    DivergenceState,
    ReinforcementWeights,
    SearchConfig,
    allocate_fill_four,
    candidates,
    divergence,
    reinforcement_weights,
    run_four,
    score,
)
from .ledger import (
    MINOR_UNITS,
    Account,
    AccountState,
    AllocationError,
    AllocationVector,
    Fill,
    LedgerError,
    LedgerState,
    Trajectory,
    apply_fill,
    fund_trajectory,
    make_accounts,
    mark,
    replay,
    to_major,
    to_minor,
)
from .methods import (
    MethodResult,
    batch_day,
    replay_aps,
    result_from_allocations,
    run_aps,
    run_hpha,
    run_simple_rounding,
)
from .rounding import (
    FractionalTarget,
    LargestAccount,
    RandomOrder,
    ResidualPolicy,
    Rotation,
    allocate_fill_proportional,
    fractional_targets,
    make_policy,
    round_sum_preserving,
)

__version__ = "0.1.0"
