"""Mains-hum assisted clock synchronization toolkit.

A library plus simulation harness for synchronizing two node clocks with
application-layer timestamps and a shared periodic skin-electric-potential
(SEP) reference signal: signal synthesis and conditioning, comb phase
extraction, the three-message synchronization protocol, the multi-session
integer ambiguity solver, and seeded network-simulation experiments.
"""

from sepsync.signals import (
    SepTrace,
    SepSynthesisConfig,
    ZcStream,
    synthesize_sep,
    bandpass_filter,
    mean_removal_filter,
    detect_zero_crossings,
    condition_trace,
    measure_signal_strength,
)
from sepsync.comb import (
    DiracComb,
    PllConfig,
    run_pll,
    pll_convergence_time,
    phase_of,
)
from sepsync.protocol import (
    NodeClock,
    Node,
    SyncMessage,
    SessionRecord,
    SessionTruth,
    SessionDropped,
    BufferCoverageError,
    rounded_phase_diff,
    run_session,
    ntp_offset,
    candidate_offsets,
    make_ideal_session,
)
from sepsync.solver import (
    SolutionSpace,
    SolverConfig,
    SolveResult,
    EmptySolutionSpaceError,
    intersect,
    solve,
    convergence_study,
)
from sepsync.links import (
    DelayModel,
    LinkModel,
    draw_delay,
    ble_preset,
    internet_preset,
    constant_preset,
)

__version__ = "0.1.0"

__all__ = [
    "SepTrace",
    "SepSynthesisConfig",
    "ZcStream",
    "synthesize_sep",
    "bandpass_filter",
    "mean_removal_filter",
    "detect_zero_crossings",
    "condition_trace",
    "measure_signal_strength",
    "DiracComb",
    "PllConfig",
    "run_pll",
    "pll_convergence_time",
    "phase_of",
    "NodeClock",
    "Node",
    "SyncMessage",
    "SessionRecord",
    "SessionTruth",
    "SessionDropped",
    "BufferCoverageError",
    "rounded_phase_diff",
    "run_session",
    "ntp_offset",
    "candidate_offsets",
    "make_ideal_session",
    "SolutionSpace",
    "SolverConfig",
    "SolveResult",
    "EmptySolutionSpaceError",
    "intersect",
    "solve",
    "convergence_study",
    "DelayModel",
    "LinkModel",
    "draw_delay",
    "ble_preset",
    "internet_preset",
    "constant_preset",
]
