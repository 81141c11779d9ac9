"""Measurement schemes: projective collapse, purely unitary, and instrumentalist.

The collapse scheme couples system and pointer with the calibrated von
Neumann unitary and then projects the joint state onto one
(system eigenspace, pointer level) branch. The unitary scheme only applies
the angular-momentum-conserving exchange; reading its outcome is a separate
act (``unitary_readout``) that writes a pointer on a copy of the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .apparatus import (
    LEVEL_TO_LABEL,
    POINTER_DIM,
    ApparatusRegister,
    Exchange,
    MacroLabel,
    Macrostate,
    PointerLevel,
    VonNeumann,
    exchange_unitary,
    macrostate,
    von_neumann_unitary,
)
from .errors import ConfigError, DeviceNotReady, InvariantViolation, SpaceMismatch
from .linalg import (
    HilbertSpace,
    Observable,
    Operator,
    StateVector,
    apply,
    apply_unnormalized,
    fidelity,
    partial_trace,
    tensor,
)
from .spin import DEFAULT_LABEL, AxisLike, axis_eigenstate, spin_operator


@dataclass(frozen=True)
class StandardCollapse:
    name = "standard"


@dataclass(frozen=True)
class Unitary:
    model: Exchange = field(default_factory=Exchange)
    name = "unitary"


@dataclass(frozen=True)
class Instrumentalist:
    allowed: frozenset = frozenset({MacroLabel.UP, MacroLabel.DOWN})
    tolerance: float = 0.01
    name = "instrumental"

    def __post_init__(self):
        allowed = frozenset(MacroLabel(a) for a in self.allowed)
        if not allowed:
            raise ConfigError("instrumentalist scheme needs a nonempty set of detectable outcomes")
        if not allowed <= {MacroLabel.UP, MacroLabel.DOWN}:
            raise ConfigError(f"detectable outcomes must be Up and/or Down, got {sorted(allowed)}")
        if not 0.0 <= self.tolerance < 0.5:
            raise ConfigError(f"tolerance must lie in [0, 1/2), got {self.tolerance}")
        object.__setattr__(self, "allowed", allowed)


SchemeKind = Union[StandardCollapse, Unitary, Instrumentalist]


@dataclass(frozen=True)
class MeasurementOutcome:
    label: MacroLabel
    probability: float
    device: str

    def __post_init__(self):
        if not -1e-12 <= self.probability <= 1 + 1e-12:
            raise InvariantViolation(f"outcome probability {self.probability} outside [0, 1]")
        object.__setattr__(self, "probability", float(min(1.0, max(0.0, self.probability))))

    def to_record(self, seed: int, step: int) -> dict:
        """One JSON-lines outcome record."""
        return {
            "device": self.device,
            "label": self.label.value,
            "probability": self.probability,
            "seed": seed,
            "step": step,
        }


@dataclass(frozen=True)
class Branch:
    """One (eigenvalue, pointer level) component of a premeasured state."""

    label: MacroLabel
    eigenvalue: float
    probability: float
    amplitudes: np.ndarray

    def state(self, space: HilbertSpace) -> StateVector:
        return StateVector.normalized(space, self.amplitudes)


def _check_ready(state: StateVector, register: ApparatusRegister) -> None:
    current = macrostate(state, register)
    if current.label is not MacroLabel.READY:
        raise DeviceNotReady(f"device {register.label!r} reads {current.label.value}, not Ready")


def premeasure(state: StateVector, obs: Observable, register: ApparatusRegister) -> StateVector:
    """Calibrated von Neumann coupling of the observed factor to the pointer."""
    _check_ready(state, register)
    return apply(von_neumann_unitary(obs, VonNeumann(), register), state)


def branches(premeasured: StateVector, obs: Observable, register: ApparatusRegister) -> list[Branch]:
    """Split a premeasured state by outcome; the larger eigenvalue reads UP."""
    low, high = obs.distinct_eigenvalues()
    pointer_space = HilbertSpace.of((register.pointer_label, POINTER_DIM))
    out = []
    for lam, level in ((high, PointerLevel.UP), (low, PointerLevel.DOWN)):
        flag = np.zeros((POINTER_DIM, POINTER_DIM))
        flag[level, level] = 1.0
        proj = tensor(obs.projector(lam), Operator(pointer_space, flag))
        amps = apply_unnormalized(proj, premeasured)
        p = float(np.vdot(amps, amps).real)
        out.append(Branch(LEVEL_TO_LABEL[level], lam, p, amps))
    return out


def sample_branch(weights, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from (not necessarily normalised) weights."""
    w = np.asarray(weights, dtype=float)
    cdf = np.cumsum(w) / w.sum()
    return int(min(np.searchsorted(cdf, rng.random(), side="right"), len(w) - 1))


def measure_standard(
    state: StateVector, obs: Observable, register: ApparatusRegister, rng: np.random.Generator
) -> tuple[MeasurementOutcome, StateVector]:
    """Premeasure, draw an outcome with the Born weights, and project onto its branch."""
    pre = premeasure(state, obs, register)
    parts = branches(pre, obs, register)
    chosen = parts[sample_branch([b.probability for b in parts], rng)]
    return MeasurementOutcome(chosen.label, chosen.probability, register.label), chosen.state(state.space)


def measure_unitary(
    state: StateVector,
    obs_axis: AxisLike,
    register: ApparatusRegister,
    model: Exchange = Exchange(),
    system_label: str = DEFAULT_LABEL,
) -> StateVector:
    """Exchange angular momentum with one reservoir spin; nothing is projected.

    The exchange is isotropic, so ``obs_axis`` plays no role in the dynamics;
    it is accepted so that callers can pair this call with ``unitary_readout``.
    """
    return apply(exchange_unitary(model, register, system_label), state)


def write_pointer(
    state: StateVector, obs_axis: AxisLike, register: ApparatusRegister, system_label: str = DEFAULT_LABEL
) -> StateVector:
    """Unitarily record the system spin along ``obs_axis`` on the device pointer."""
    return premeasure(state, spin_operator(obs_axis, system_label), register)


def unitary_readout(
    state: StateVector,
    obs_axis: AxisLike,
    register: ApparatusRegister,
    tolerance: float = 0.01,
    system_label: str = DEFAULT_LABEL,
) -> Macrostate:
    """Macrostate a pointer would show if written now; ``state`` is left untouched."""
    return macrostate(write_pointer(state, obs_axis, register, system_label), register, tolerance)


def _swap_levels(register: ApparatusRegister, a: PointerLevel, b: PointerLevel) -> Operator:
    perm = np.eye(POINTER_DIM)
    perm[[a, b]] = perm[[b, a]]
    return Operator(HilbertSpace.of((register.pointer_label, POINTER_DIM)), perm)


def measure_instrumental(
    state: StateVector,
    obs: Observable,
    register: ApparatusRegister,
    scheme: Instrumentalist,
    rng: np.random.Generator,
) -> tuple[MeasurementOutcome, StateVector]:
    """Born-weighted outcome; outcomes outside the detectable set read FAILED."""
    if not scheme.allowed:
        raise ConfigError("instrumentalist scheme needs a nonempty set of detectable outcomes")
    pre = premeasure(state, obs, register)
    parts = branches(pre, obs, register)
    chosen = parts[sample_branch([b.probability for b in parts], rng)]
    post = chosen.state(state.space)
    if chosen.label in scheme.allowed:
        system = partial_trace(post, obs.space.labels).matrix
        proj = obs.projector(chosen.eigenvalue).matrix
        overlap = float(np.trace(proj @ system).real)
        if overlap < 1.0 - scheme.tolerance:
            raise InvariantViolation(
                f"detected {chosen.label.value} but eigenbranch weight is {overlap:.3e}"
            )
        return MeasurementOutcome(chosen.label, chosen.probability, register.label), post
    level = PointerLevel.UP if chosen.label is MacroLabel.UP else PointerLevel.DOWN
    failed = apply(_swap_levels(register, level, PointerLevel.FAILED), post)
    return MeasurementOutcome(MacroLabel.FAILED, chosen.probability, register.label), failed


def born_probability(pre: StateVector, post: StateVector) -> float:
    """|<pre|post>|^2."""
    if pre.space != post.space:
        raise SpaceMismatch(f"spaces differ: {pre.space.factors} vs {post.space.factors}")
    return fidelity(pre, post)


def born_weights(system: StateVector, obs_axis: AxisLike) -> dict[MacroLabel, float]:
    """Born weights of Up and Down for a single spin along ``obs_axis``."""
    label = system.space.labels[0]
    return {
        MacroLabel.UP: born_probability(axis_eigenstate(obs_axis, "up", label), system),
        MacroLabel.DOWN: born_probability(axis_eigenstate(obs_axis, "down", label), system),
    }


def scheme_from_name(name: str, tolerance: float = 0.01, theta: float = math.pi) -> SchemeKind:
    name = name.lower()
    if name in ("standard", "collapse", "standardcollapse"):
        return StandardCollapse()
    if name == "unitary":
        return Unitary(Exchange(theta))
    if name in ("instrumental", "instrumentalist"):
        return Instrumentalist(tolerance=tolerance)
    raise ConfigError(f"unknown scheme {name!r}")
