"""Spin-1/2 algebra with hbar = 1 and S = sigma / 2."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DegenerateAxis, NotPure, SpaceMismatch
from .linalg import DensityMatrix, HilbertSpace, Observable, Operator, StateVector, propagator

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)

DEFAULT_LABEL = "spin"
PURITY_ATOL = 1e-8


def spin_space(label: str = DEFAULT_LABEL) -> HilbertSpace:
    return HilbertSpace.of((label, 2))


@dataclass(frozen=True)
class Axis:
    """Unit direction in 3-space."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        norm = math.sqrt(self.x**2 + self.y**2 + self.z**2)
        if abs(norm - 1.0) > 1e-12:
            raise DegenerateAxis(f"axis ({self.x}, {self.y}, {self.z}) has norm {norm}, not 1")

    @classmethod
    def from_vector(cls, v) -> "Axis":
        v = np.asarray(v, dtype=float).reshape(3)
        norm = float(np.linalg.norm(v))
        if not np.isfinite(norm) or norm < 1e-15:
            raise DegenerateAxis(f"cannot normalise direction {tuple(v)}")
        v = v / norm
        return cls(float(v[0]), float(v[1]), float(v[2]))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def name(self) -> str:
        for label, axis in (("x", X), ("y", Y), ("z", Z)):
            if axis == self:
                return label
        return "({:.6g},{:.6g},{:.6g})".format(self.x, self.y, self.z)


X = Axis(1.0, 0.0, 0.0)
Y = Axis(0.0, 1.0, 0.0)
Z = Axis(0.0, 0.0, 1.0)

AxisLike = Union[Axis, tuple, list, np.ndarray]


def as_axis(axis: AxisLike) -> Axis:
    if isinstance(axis, Axis):
        return axis
    if isinstance(axis, str):
        return {"x": X, "y": Y, "z": Z}[axis.lower()]
    return Axis.from_vector(axis)


@dataclass(frozen=True)
class BlochVector:
    """Spin expectations (<S_x>, <S_y>, <S_z>); each lies in [-1/2, 1/2]."""

    sx: float
    sy: float
    sz: float

    @property
    def components(self) -> np.ndarray:
        return np.array([self.sx, self.sy, self.sz])

    @property
    def unit(self) -> np.ndarray:
        """Doubled view (2 s_x, 2 s_y, 2 s_z); a unit vector for pure states."""
        return 2.0 * self.components

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.unit))

    @classmethod
    def from_unit(cls, u) -> "BlochVector":
        u = np.asarray(u, dtype=float).reshape(3)
        return cls(*(float(c) for c in u / 2.0))


def spin_matrix(axis: AxisLike) -> np.ndarray:
    n = as_axis(axis).vector
    return 0.5 * (n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z)


def spin_operator(axis: AxisLike, label: str = DEFAULT_LABEL) -> Observable:
    """n . S on a single spin factor named ``label``."""
    return Observable(spin_space(label), spin_matrix(axis))


def spin_components(label: str = DEFAULT_LABEL) -> tuple[Observable, Observable, Observable]:
    return spin_operator(X, label), spin_operator(Y, label), spin_operator(Z, label)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    # gauge: first amplitude with non-negligible modulus is real and positive
    for amp in v:
        if abs(amp) > 1e-12:
            return v * (abs(amp) / amp)
    return v


def axis_eigenstate(axis: AxisLike, sign: str = "up", label: str = DEFAULT_LABEL) -> StateVector:
    """Eigenvector of ``spin_operator(axis)`` for +1/2 (``"up"``) or -1/2 (``"down"``)."""
    n = as_axis(axis).vector
    theta = math.acos(max(-1.0, min(1.0, n[2])))
    phi = math.atan2(n[1], n[0])
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if sign in ("up", "+", 1):
        v = np.array([c, np.exp(1j * phi) * s])
    elif sign in ("down", "-", -1):
        v = np.array([s, -np.exp(1j * phi) * c])
    else:
        raise ValueError(f"sign must be 'up' or 'down', not {sign!r}")
    return StateVector(spin_space(label), _fix_phase(v))


def rotation(axis: AxisLike, angle: float, label: str = DEFAULT_LABEL) -> Operator:
    """SU(2) rotation exp(-i angle n.S)."""
    return propagator(spin_operator(axis, label), angle)


def _single_spin_matrix(state: Union[StateVector, DensityMatrix]) -> np.ndarray:
    if state.space.total_dim != 2 or len(state.space.factors) != 1:
        raise SpaceMismatch(f"expected a single spin-1/2 factor, got {state.space.factors}")
    if isinstance(state, StateVector):
        psi = state.amplitudes
        return np.outer(psi, psi.conj())
    return np.asarray(state.matrix)


def bloch_vector(state: Union[StateVector, DensityMatrix]) -> BlochVector:
    """Component-wise spin expectations of a pure or reduced single-spin state."""
    rho = _single_spin_matrix(state)
    comps = [0.5 * float(np.trace(rho @ p).real) for p in PAULI]
    return BlochVector(*comps)


def state_from_bloch(b: BlochVector, label: str = DEFAULT_LABEL, atol: float = PURITY_ATOL) -> StateVector:
    """Pure state whose Bloch vector is ``b``; raises ``NotPure`` off the sphere."""
    u = b.unit
    length = float(np.linalg.norm(u))
    if abs(length - 1.0) > atol:
        raise NotPure(f"Bloch vector of length {length:.3e} is not on the unit sphere")
    return axis_eigenstate(Axis.from_vector(u), "up", label)
