"""critmac: slotted MAC protocols with critical-traffic priority.

Closed-form analysis, constrained protocol design, and seeded slot-level
simulation of theta-fair non-intrusive adaptive protocols with 1-slot
memory.
"""

from .design import (
    DesignProblem,
    DesignSolution,
    SolutionStatus,
    SweepAxis,
    critical_eta,
    maximize_utilization,
    solve_design_problem,
    sweep,
)
from .errors import BadParams, ScenarioUnsatisfiable, SingularSystem
from .markov import (
    DelayDecomposition,
    PerformanceMetrics,
    TransitionMatrix,
    build_critical_matrix,
    build_normal_matrix,
    channel_utilization,
    contention_time,
    critical_delay,
    critical_hitting_times,
    delay_decomposition,
    enhanced_critical_delay,
    evaluate_metrics,
    stationary_distribution,
)
from .oracle import OracleEstimate, estimate_metrics_oracle
from .protocol import (
    EnhancementConfig,
    Observation,
    ProtocolParams,
    TrafficType,
    UserState,
    enhanced_transmission_probability,
    rule_g,
    transmission_probability,
    two_critical_mode_trigger,
)
from .sim import (
    CriticalTrafficModel,
    ExperimentResult,
    RoundStats,
    Scenario,
    ScenarioRoundReport,
    ScenarioSummary,
    SimConfig,
    SlotEngine,
    SlotRecord,
    SlotTrace,
    run_experiment,
    run_round,
    simulate_two_critical,
)

__version__ = "0.1.0"

__all__ = [
    "BadParams",
    "CriticalTrafficModel",
    "DelayDecomposition",
    "DesignProblem",
    "DesignSolution",
    "EnhancementConfig",
    "ExperimentResult",
    "Observation",
    "OracleEstimate",
    "PerformanceMetrics",
    "ProtocolParams",
    "RoundStats",
    "Scenario",
    "ScenarioRoundReport",
    "ScenarioSummary",
    "ScenarioUnsatisfiable",
    "SimConfig",
    "SingularSystem",
    "SlotEngine",
    "SlotRecord",
    "SlotTrace",
    "SolutionStatus",
    "SweepAxis",
    "TrafficType",
    "TransitionMatrix",
    "UserState",
    "build_critical_matrix",
    "build_normal_matrix",
    "channel_utilization",
    "contention_time",
    "critical_delay",
    "critical_eta",
    "critical_hitting_times",
    "delay_decomposition",
    "enhanced_critical_delay",
    "enhanced_transmission_probability",
    "estimate_metrics_oracle",
    "evaluate_metrics",
    "maximize_utilization",
    "rule_g",
    "run_experiment",
    "run_round",
    "simulate_two_critical",
    "solve_design_problem",
    "stationary_distribution",
    "sweep",
    "transmission_probability",
    "two_critical_mode_trigger",
]
