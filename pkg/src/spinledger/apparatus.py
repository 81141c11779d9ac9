"""Measurement devices as quantum registers.

A device is a four-level pointer plus an even number of spin-1/2 reservoir
factors whose job is to hold angular momentum. Pointer levels have fixed
indices (READY=0, UP=1, DOWN=2, FAILED=3). Along the cyclic track that the
pointer momentum translates, the levels sit at positions READY=0, UP=+1,
FAILED=+2, DOWN=-1, so a shift of +1 or -1 away from READY writes UP or
DOWN and FAILED is never reached by the calibrated coupling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from .errors import CalibrationError, ConfigError, ReservoirParity, UnknownFactor
from .rng import make_rng
from .linalg import (
    HilbertSpace,
    Observable,
    Operator,
    StateVector,
    apply,
    basis_state,
    embed,
    partial_trace,
    populations,
    propagator,
    tensor,
)
from .spin import DEFAULT_LABEL, PAULI, as_axis, axis_eigenstate, spin_operator

POINTER_DIM = 4
MAX_RESERVOIR = 8
# numerical slack when comparing a dominant weight against 1 - tolerance
WEIGHT_SLACK = 1e-12


class PointerLevel(IntEnum):
    READY = 0
    UP = 1
    DOWN = 2
    FAILED = 3


POINTER_POSITION = {
    PointerLevel.READY: 0,
    PointerLevel.UP: 1,
    PointerLevel.FAILED: 2,
    PointerLevel.DOWN: 3,
}


class MacroLabel(str, Enum):
    READY = "Ready"
    UP = "Up"
    DOWN = "Down"
    FAILED = "Failed"
    SUPERPOSED = "Superposed"


LEVEL_TO_LABEL = {
    PointerLevel.READY: MacroLabel.READY,
    PointerLevel.UP: MacroLabel.UP,
    PointerLevel.DOWN: MacroLabel.DOWN,
    PointerLevel.FAILED: MacroLabel.FAILED,
}


@dataclass(frozen=True)
class Macrostate:
    label: MacroLabel
    confidence: float


@dataclass(frozen=True)
class ApparatusRegister:
    """Labels and sizes of one device; carries no amplitudes."""

    label: str = "device"
    reservoir_size: int = 2

    def __post_init__(self):
        m = self.reservoir_size
        if m % 2:
            raise ReservoirParity(f"reservoir size must be even, got {m}")
        if not 2 <= m <= MAX_RESERVOIR:
            raise ConfigError(f"reservoir size must lie in [2, {MAX_RESERVOIR}], got {m}")

    @property
    def pointer_label(self) -> str:
        return f"{self.label}.pointer"

    @property
    def reservoir_labels(self) -> tuple[str, ...]:
        return tuple(f"{self.label}.r{i}" for i in range(self.reservoir_size))

    def reservoir_label(self, index: int) -> str:
        if not 0 <= index < self.reservoir_size:
            raise UnknownFactor(f"device {self.label!r} has no reservoir spin {index}")
        return self.reservoir_labels[index]

    @property
    def space(self) -> HilbertSpace:
        return HilbertSpace(((self.pointer_label, POINTER_DIM),) + tuple((r, 2) for r in self.reservoir_labels))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "reservoir_size": self.reservoir_size,
            "pointer_levels": {level.name: int(level) for level in PointerLevel},
        }


# -- interaction models


@dataclass(frozen=True)
class VonNeumann:
    """Rectangular pulse of strength ``coupling`` lasting ``duration``.

    Only the product coupling * duration matters. ``coupling=None`` asks for
    the calibrated value.
    """

    coupling: Optional[float] = None
    duration: float = 1.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError(f"pulse duration must be positive, got {self.duration}")


@dataclass(frozen=True)
class SpinField:
    mu: float
    field: tuple[float, float, float]

    def __post_init__(self):
        b = tuple(float(c) for c in self.field)
        if len(b) != 3 or not all(math.isfinite(c) for c in b):
            raise ConfigError(f"field must be a finite 3-vector, got {self.field}")
        object.__setattr__(self, "field", b)


@dataclass(frozen=True)
class Exchange:
    """Heisenberg partial swap exp(-i theta S_sys . S_res) with one reservoir spin."""

    theta: float = math.pi
    reservoir_target: int = 0

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ConfigError(f"kick angle must lie in [0, pi], got {self.theta}")


InteractionModel = Union[VonNeumann, SpinField, Exchange]


# -- preparation


def _pair_state(rng: Optional[np.random.Generator]) -> np.ndarray:
    """Two-spin state with <J> = 0 exactly.

    Any combination of |ud> and |du> has zero total spin expectation, and a
    common SU(2) rotation of both spins keeps it zero.
    """
    if rng is None:
        return np.array([0, 1, -1, 0], dtype=np.complex128) / math.sqrt(2)
    a = rng.uniform(0.0, math.pi / 2)
    b = rng.uniform(0.0, 2 * math.pi)
    pair = np.array([0, math.cos(a), np.exp(1j * b) * math.sin(a), 0], dtype=np.complex128)
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    u = np.array([[q[0] + 1j * q[3], q[2] + 1j * q[1]], [-q[2] + 1j * q[1], q[0] - 1j * q[3]]])
    return np.kron(u, u) @ pair


def _device_state(register: ApparatusRegister, pairs: list[np.ndarray], phase: complex = 1.0) -> StateVector:
    pointer = np.zeros(POINTER_DIM, dtype=np.complex128)
    pointer[PointerLevel.READY] = 1.0
    amps = pointer
    for pair in pairs:
        amps = np.kron(amps, pair)
    return StateVector.normalized(register.space, phase * amps)


def prepare_ready(
    m: int = 2, rng_seed: Optional[int] = None, label: str = "device"
) -> tuple[ApparatusRegister, StateVector]:
    """Device at READY with a reservoir of zero total angular momentum.

    Without a seed the reservoir is a product of singlets. With a seed each
    pair gets a random zero-momentum microstate and the whole device a random
    global phase; the macrostate is READY either way.
    """
    register = ApparatusRegister(label, m)
    rng = None if rng_seed is None else make_rng(rng_seed)
    pairs = [_pair_state(rng) for _ in range(m // 2)]
    phase = 1.0 if rng is None else np.exp(1j * rng.uniform(0.0, 2 * math.pi))
    return register, _device_state(register, pairs, phase)


def prepare_oriented(
    direction, m: int = 2, label: str = "device"
) -> tuple[ApparatusRegister, StateVector]:
    """Device at READY whose reservoir pairs are |n>|-n> (zero total momentum)."""
    register = ApparatusRegister(label, m)
    n = as_axis(direction)
    up = axis_eigenstate(n, "up").amplitudes
    down = axis_eigenstate(n, "down").amplitudes
    pairs = [np.kron(up, down) for _ in range(m // 2)]
    return register, _device_state(register, pairs)


def reservoir_momentum(state: StateVector, register: ApparatusRegister) -> np.ndarray:
    """<J_k> summed over the device's reservoir spins, k = x, y, z."""
    total = np.zeros(3)
    for label in register.reservoir_labels:
        rho = partial_trace(state, [label]).matrix
        total += [0.5 * float(np.trace(rho @ p).real) for p in PAULI]
    return total


# -- coarse graining


def pointer_weights(state: StateVector, register: ApparatusRegister) -> np.ndarray:
    return np.clip(populations(state, register.pointer_label), 0.0, None)


def macrostate(state: StateVector, register: ApparatusRegister, tolerance: float = 0.01) -> Macrostate:
    """Coarse-grain the pointer; the reservoir is never looked at."""
    if not 0.0 <= tolerance < 0.5:
        raise ConfigError(f"tolerance must lie in [0, 1/2), got {tolerance}")
    weights = pointer_weights(state, register)
    level = PointerLevel(int(np.argmax(weights)))
    confidence = float(min(1.0, weights[level]))
    if confidence >= 1.0 - tolerance - WEIGHT_SLACK:
        return Macrostate(LEVEL_TO_LABEL[level], confidence)
    return Macrostate(MacroLabel.SUPERPOSED, confidence)


def macro_equivalent(
    a: StateVector, b: StateVector, register: ApparatusRegister, tolerance: float = 0.01
) -> bool:
    """Same definite pointer label; Superposed is equivalent to nothing."""
    la = macrostate(a, register, tolerance).label
    lb = macrostate(b, register, tolerance).label
    return la == lb and la is not MacroLabel.SUPERPOSED


# -- von Neumann coupling


def pointer_momentum() -> np.ndarray:
    """Generator of the cyclic pointer shift, in the level-index basis.

    exp(-i P) moves every level one position forward along the track
    READY -> UP -> FAILED -> DOWN -> READY.
    """
    n = POINTER_DIM
    q = np.arange(n)
    branch = np.array([0, 1, 2, -1])  # eigenvalue branch 2*pi*j/4, j in {-1, 0, 1, 2}
    fourier = np.exp(2j * np.pi * np.outer(q, branch) / n) / math.sqrt(n)
    p_pos = fourier @ np.diag(2 * np.pi * branch / n) @ fourier.conj().T
    pos = [POINTER_POSITION[PointerLevel(i)] for i in range(n)]
    p_level = p_pos[np.ix_(pos, pos)]
    return (p_level + p_level.conj().T) / 2


def _shift_target(shift: float) -> Optional[PointerLevel]:
    k = int(round(shift))
    if abs(shift - k) > 1e-9:
        return None
    pos = k % POINTER_DIM
    return next(level for level, p in POINTER_POSITION.items() if p == pos)


def calibrate(obs: Observable) -> float:
    """Smallest positive coupling * duration that writes the larger eigenvalue
    to UP and the smaller to DOWN."""
    eig = obs.distinct_eigenvalues()
    if len(eig) != 2:
        raise CalibrationError(f"pointer can resolve exactly two eigenvalues, got {eig}")
    return _calibrate_pair(round(eig[0], 12), round(eig[1], 12))


@lru_cache(maxsize=64)
def _calibrate_pair(low: float, high: float) -> float:
    candidates = set()
    for k in range(-64, 65):
        for lam, target in ((high, 1), (low, -1)):
            if abs(lam) > 1e-12:
                c = (target + POINTER_DIM * k) / lam
                if c > 0:
                    candidates.add(round(c, 12))
    for c in sorted(candidates):
        if _shift_target(c * high) is PointerLevel.UP and _shift_target(c * low) is PointerLevel.DOWN:
            return float(c)
    raise CalibrationError(f"no coupling maps eigenvalues {low}, {high} onto DOWN, UP")


def von_neumann_hamiltonian(obs: Observable, register: ApparatusRegister) -> Operator:
    pointer = Operator(HilbertSpace.of((register.pointer_label, POINTER_DIM)), pointer_momentum())
    return tensor(Operator(obs.space, obs.matrix), pointer)


def von_neumann_unitary(
    obs: Observable, model: Optional[VonNeumann] = None, register: Optional[ApparatusRegister] = None
) -> Operator:
    """exp(-i g tau O (x) P_d) on (observed factor, pointer)."""
    model = model or VonNeumann()
    register = register or ApparatusRegister()
    if model.coupling is None:
        strength = calibrate(obs)
    else:
        strength = model.coupling * model.duration
    mat = _von_neumann_matrix(obs.matrix.tobytes(), obs.space.total_dim, float(strength))
    unitary = Operator(obs.space.concat(HilbertSpace.of((register.pointer_label, POINTER_DIM))), mat)
    if model.coupling is not None:
        _check_calibration(obs, register, unitary)
    return unitary


@lru_cache(maxsize=256)
def _von_neumann_matrix(obs_bytes: bytes, dim: int, strength: float) -> np.ndarray:
    obs = np.frombuffer(obs_bytes, dtype=np.complex128).reshape(dim, dim)
    ham = np.kron(obs, pointer_momentum())
    mat = propagator(Operator(HilbertSpace.of(("o", dim), ("p", POINTER_DIM)), ham), strength).matrix
    return mat


def _check_calibration(obs: Observable, register: ApparatusRegister, unitary: Operator) -> None:
    eig = obs.distinct_eigenvalues()
    if len(eig) != 2:
        raise CalibrationError(f"pointer can resolve exactly two eigenvalues, got {eig}")
    pointer_space = HilbertSpace.of((register.pointer_label, POINTER_DIM))
    ready = basis_state(pointer_space, [PointerLevel.READY])
    for lam, target in ((eig[1], PointerLevel.UP), (eig[0], PointerLevel.DOWN)):
        col = int(np.argmin(np.abs(obs.eigenvalues - lam)))
        eigvec = StateVector(obs.space, obs.eigenvectors[:, col])
        out = apply(unitary, tensor(eigvec, ready))
        weight = partial_trace(out, [register.pointer_label]).populations()[target]
        if weight < 1 - 1e-10:
            raise CalibrationError(
                f"coupling writes eigenvalue {lam} to {target.name} with probability {weight:.3e} only"
            )


# -- angular-momentum-conserving exchange


def heisenberg_term(a: str, b: str) -> Operator:
    """S_a . S_b on two spin factors."""
    space = HilbertSpace.of((a, 2), (b, 2))
    return Operator(space, sum(np.kron(p, p) for p in PAULI) / 4)


def exchange_unitary(
    model: Exchange, register: ApparatusRegister, system_label: str = DEFAULT_LABEL
) -> Operator:
    """exp(-i theta S_sys . S_res); theta = pi swaps the two spins up to a phase."""
    target = register.reservoir_label(model.reservoir_target)
    # S.S = SWAP/2 - 1/4, so the exponential has a closed form
    half = model.theta / 2
    swap = np.eye(4)[[0, 2, 1, 3]]
    mat = np.exp(1j * model.theta / 4) * (math.cos(half) * np.eye(4) - 1j * math.sin(half) * swap)
    return Operator(HilbertSpace.of((system_label, 2), (target, 2)), mat)


def total_spin_operator(space: HilbertSpace, spin_labels, axis) -> Observable:
    """Sum of n . S over the named spin factors, embedded in ``space``."""
    total = np.zeros((space.total_dim, space.total_dim), dtype=np.complex128)
    for label in spin_labels:
        total += embed(spin_operator(axis, label), space).matrix
    return Observable(space, total)


# -- spin in an external field


def field_hamiltonian(model: SpinField, system_label: str = DEFAULT_LABEL) -> Operator:
    b = np.asarray(model.field)
    mat = -model.mu * sum(bk * 0.5 * p for bk, p in zip(b, PAULI))
    return Operator(HilbertSpace.of((system_label, 2)), mat)


def field_evolution(
    state: StateVector, model: SpinField, duration: float, system_label: str = DEFAULT_LABEL
) -> StateVector:
    """Larmor precession of the system spin about B."""
    return apply(propagator(field_hamiltonian(model, system_label), duration), state)
