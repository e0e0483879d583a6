"""burstq: queue-management policies, PBS threshold queues with bursty GE
traffic, a deterministic discrete-event simulator, and exact small-instance
solvers (CTMC, maximum entropy) that cross-validate each other."""

from .aqm import (
    AqmDecision,
    AredParams,
    BlueEvent,
    BlueParams,
    BlueState,
    DecbitState,
    RedParams,
    RedState,
    RemParams,
    RemState,
)
from .ctmc import CtmcModel, CtmcSolution, ModelError, StateSpaceError, ctmc_build, ctmc_solve
from .engine import (
    AimdConfig,
    BlueConfig,
    ClassMetrics,
    DecbitConfig,
    DropTailConfig,
    EngineError,
    MetricsReport,
    PbsConfig,
    RedConfig,
    RemConfig,
    SimConfig,
    little_check,
    run,
    run_replications,
)
from .maxent import MeConstraints, MeConvergenceError, MeInfeasibleError, me_distribution
from .pbs import (
    ClassTraffic,
    PbsThresholds,
    QueueDistribution,
    blocking_probability,
    entropy,
    pbs_admit,
    pbs_load_shares,
)
from .traffic import (
    AimdSourceState,
    GEParams,
    aimd_on_ack,
    aimd_on_congestion,
    aimd_on_packet_ack,
    ge_sigma,
    ge_tau,
    sample_batch_size,
    sample_interarrival,
    sample_service,
)

__version__ = "0.1.0"
