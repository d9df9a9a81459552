"""swmsim: shared-memory switch buffer-management workbench.

Simulates push-out buffer policies (LQD, its fractional variant, the
clairvoyant LateQD optimum, an offline staircase policy) over slotted
two-phase instances, generates the hard-instance families used to study them,
and certifies per-cycle throughput bounds via cyclic linear programs.
"""

from .model import (
    ArrivalSchedule,
    ContractError,
    InstanceError,
    LimitError,
    QueueSpec,
    QueueTimeline,
    SimulationResult,
    SwitchConfig,
    SwmsimError,
    check_regularity,
    expand,
    format_instance,
    parse_instance,
    simulate,
    trace_csv,
)
from .policies import (
    BruteForceLimits,
    FractionalLqdPolicy,
    LateQdAggregatePolicy,
    LateQdPacketPolicy,
    LqdPolicy,
    StaircaseOfflinePolicy,
    brute_force_opt,
    compute_exit_times,
    lqd_admit,
    lqd_fractional_admit,
    make_policy,
    waterfill_frac,
    waterfill_int,
)
from .instances import (
    PhiKParams,
    StaircaseParams,
    adaptive_adversary_run,
    h_for,
    p_for,
    phi_k_instance,
    staircase_instance,
)
from .lpbound import (
    CyclicLpModel,
    LpSolution,
    SolverError,
    build_model,
    evaluate_residual,
    ratio_report,
    solve,
)

__version__ = "0.1.0"
