"""Angular-momentum bookkeeping for simulated spin measurements.

A single spin-1/2 is measured by devices made of a four-level pointer and a
small reservoir of spins. Three measurement schemes are compared: projective
collapse, a purely unitary exchange with the reservoir, and an
instrumentalist variant that only registers a chosen set of outcomes.
"""

__version__ = "0.1.0"

from .apparatus import ApparatusRegister, Exchange, MacroLabel, Macrostate, PointerLevel, VonNeumann
from .errors import (
    CalibrationError,
    ConfigError,
    DegenerateAxis,
    DeviceNotReady,
    InvariantViolation,
    LabelCollision,
    NotPure,
    NotSelfAdjoint,
    ReservoirParity,
    SpaceMismatch,
    SpinLedgerError,
    UnknownFactor,
)
from .experiments import (
    ExperimentScript,
    Step,
    canonical_chain,
    enumerate_branches,
    kick_statistics,
    run_anamnesis,
    run_conservation_chain,
    single_measurement,
    special_state_search,
)
from .linalg import DensityMatrix, HilbertSpace, Observable, Operator, StateVector
from .schemes import Instrumentalist, StandardCollapse, Unitary
from .spin import Axis, BlochVector, X, Y, Z, axis_eigenstate, bloch_vector, spin_operator

__all__ = [
    "__version__", "ApparatusRegister", "Exchange", "MacroLabel", "Macrostate",
    "PointerLevel", "VonNeumann", "CalibrationError", "ConfigError", "DegenerateAxis",
    "DeviceNotReady", "InvariantViolation", "LabelCollision", "NotPure", "NotSelfAdjoint",
    "ReservoirParity", "SpaceMismatch", "SpinLedgerError", "UnknownFactor",
    "ExperimentScript", "Step", "canonical_chain", "enumerate_branches", "kick_statistics",
    "run_anamnesis", "run_conservation_chain", "single_measurement", "special_state_search",
    "DensityMatrix", "HilbertSpace", "Observable", "Operator", "StateVector",
    "Instrumentalist", "StandardCollapse", "Unitary", "Axis", "BlochVector", "X", "Y", "Z",
    "axis_eigenstate", "bloch_vector", "spin_operator",
]
