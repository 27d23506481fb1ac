"""Simulation and control design for nuclear spins coupled to a central electron spin."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    FitDiverged,
    Infeasible,
    InvalidTiming,
    NoCrossing,
    NoFeasiblePoint,
    NoRealSolution,
    NuclearSpinError,
    OutOfRange,
    StepTooCoarse,
)
from .results import Axis, CoherenceMap, FitResult
from .spin import (
    ElectronSpec,
    HyperfineParams,
    NuclearSpinConfig,
    average_frequency,
    conditional_frequencies,
    hyperfine_from_frequencies,
    precession_vector,
    resonance_tau,
)
from .dd import DDGate, DDSequence, dd_coherence, dd_gate_calibration, dd_spectrum, t2_dd
from .ddrf import (
    DDRFGate,
    DoubleDrive,
    PropagationConfig,
    PulseSchedule,
    RFSegment,
    SingleDrive,
    Tone,
    UDD,
    build_ddrf_schedule,
    ddrf_spectrum,
    propagate_ddrf,
)
from .bath import BathRealization, StatisticalBath, sample_bath, statistical_bath
from .optimize import GateBudget, GateConstraints, optimize_gate, optimize_selectivity
