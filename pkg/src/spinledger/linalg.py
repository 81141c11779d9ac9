"""Dense complex linear algebra over small composite Hilbert spaces.

Amplitudes are stored row-major over the factor list: the first factor is
the slowest index, matching ``np.kron`` with the left operand first.
Operators may live on any subset of a state's factors; ``apply`` and
``expectation`` contract them in place without materialising the padded
full-space matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence, Union

import numpy as np
import scipy.linalg

from .errors import (
    InvariantViolation,
    LabelCollision,
    NotSelfAdjoint,
    SpaceMismatch,
    UnknownFactor,
)

HERMITIAN_ATOL = 1e-12
UNITARY_ATOL = 1e-10
NORM_ATOL = 1e-10


@dataclass(frozen=True)
class HilbertSpace:
    """Ordered tensor product of labelled finite-dimensional factors."""

    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        factors = tuple((str(label), int(dim)) for label, dim in self.factors)
        object.__setattr__(self, "factors", factors)
        labels = tuple(label for label, _ in factors)
        object.__setattr__(self, "_labels", labels)
        object.__setattr__(self, "_dims", tuple(dim for _, dim in factors))
        if len(set(labels)) != len(labels):
            raise LabelCollision(f"duplicate factor labels in {labels}")
        for label, dim in factors:
            if dim < 1:
                raise ValueError(f"factor {label!r} has non-positive dimension {dim}")

    @classmethod
    def of(cls, *factors: tuple[str, int]) -> "HilbertSpace":
        return cls(tuple(factors))

    @property
    def labels(self) -> tuple[str, ...]:
        return self._labels

    @property
    def dims(self) -> tuple[int, ...]:
        return self._dims

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownFactor(f"no factor labelled {label!r} in {self.labels}") from None

    def dim(self, label: str) -> int:
        return self.factors[self.index(label)][1]

    def __contains__(self, label: object) -> bool:
        return label in self.labels

    def concat(self, other: "HilbertSpace") -> "HilbertSpace":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise LabelCollision(f"factor labels {sorted(clash)} appear on both operands")
        return HilbertSpace(self.factors + other.factors)

    def subspace(self, labels: Iterable[str]) -> "HilbertSpace":
        """Factors named in ``labels``, kept in this space's order."""
        wanted = list(labels)
        for label in wanted:
            self.index(label)
        return HilbertSpace(tuple(f for f in self.factors if f[0] in wanted))


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.complex128, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalised pure state on a composite space."""

    space: HilbertSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(np.ravel(self.amplitudes))
        if amps.shape != (self.space.total_dim,):
            raise SpaceMismatch(
                f"{amps.shape[0]} amplitudes for a space of dimension {self.space.total_dim}"
            )
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_ATOL:
            raise ValueError(f"state is not normalised (|psi|^2 = {norm2!r})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, space: HilbertSpace, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=np.complex128).ravel()
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("cannot normalise the zero vector")
        return cls(space, amps / norm)

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.space.dims)

    def __repr__(self) -> str:
        return f"StateVector(labels={self.space.labels}, dims={self.space.dims})"


@dataclass(frozen=True, eq=False)
class Operator:
    """Square matrix acting on ``space``."""

    space: HilbertSpace
    matrix: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.matrix)
        n = self.space.total_dim
        if mat.shape != (n, n):
            raise SpaceMismatch(f"matrix shape {mat.shape} does not match dimension {n}")
        object.__setattr__(self, "matrix", mat)

    def dagger(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def __matmul__(self, other: "Operator") -> "Operator":
        _require_same_space(self.space, other.space)
        return Operator(self.space, self.matrix @ other.matrix)

    def __add__(self, other: "Operator") -> "Operator":
        _require_same_space(self.space, other.space)
        return Operator(self.space, self.matrix + other.matrix)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.space, self.matrix * scalar)

    __rmul__ = __mul__

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    def unitarity_error(self) -> float:
        n = self.space.total_dim
        return float(np.max(np.abs(self.matrix.conj().T @ self.matrix - np.eye(n)), initial=0.0))

    def is_self_adjoint(self, atol: float = HERMITIAN_ATOL) -> bool:
        return self.hermiticity_error() <= atol

    def is_unitary(self, atol: float = UNITARY_ATOL) -> bool:
        return self.unitarity_error() <= atol

    def __repr__(self) -> str:
        return f"{type(self).__name__}(labels={self.space.labels}, dims={self.space.dims})"


@dataclass(frozen=True, eq=False)
class Observable(Operator):
    """Self-adjoint operator with its eigendecomposition computed at construction.

    ``eigenvalues`` are ascending; ``eigenvectors[:, k]`` belongs to
    ``eigenvalues[k]``.
    """

    eigenvalues: np.ndarray = field(init=False, repr=False)
    eigenvectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        super().__post_init__()
        err = self.hermiticity_error()
        if err > HERMITIAN_ATOL:
            raise NotSelfAdjoint(f"max |M - M^dag| = {err:.3e} exceeds {HERMITIAN_ATOL}")
        herm = (self.matrix + self.matrix.conj().T) / 2
        w, v = np.linalg.eigh(herm)
        w.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "eigenvalues", w)
        object.__setattr__(self, "eigenvectors", v)

    @classmethod
    def from_operator(cls, op: Operator) -> "Observable":
        return cls(op.space, op.matrix)

    def projector(self, eigenvalue: float, atol: float = 1e-9) -> Operator:
        """Projector onto the eigenspace of ``eigenvalue``."""
        cols = np.abs(self.eigenvalues - eigenvalue) <= atol
        if not cols.any():
            raise ValueError(f"{eigenvalue} is not an eigenvalue of this observable")
        v = self.eigenvectors[:, cols]
        return Operator(self.space, v @ v.conj().T)

    def distinct_eigenvalues(self, atol: float = 1e-9) -> list[float]:
        out: list[float] = []
        for w in self.eigenvalues:
            if not out or abs(w - out[-1]) > atol:
                out.append(float(w))
        return out


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Reduced (possibly mixed) state returned by ``partial_trace``."""

    space: HilbertSpace
    matrix: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.matrix)
        n = self.space.total_dim
        if mat.shape != (n, n):
            raise SpaceMismatch(f"matrix shape {mat.shape} does not match dimension {n}")
        object.__setattr__(self, "matrix", mat)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)

    def populations(self) -> np.ndarray:
        return np.clip(np.diag(self.matrix).real, 0.0, None)


Tensorable = Union[StateVector, Operator]


def _require_same_space(a: HilbertSpace, b: HilbertSpace) -> None:
    if a != b:
        raise SpaceMismatch(f"spaces differ: {a.factors} vs {b.factors}")


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.total_dim, dtype=np.complex128))


def basis_state(space: HilbertSpace, levels: Sequence[int]) -> StateVector:
    """Computational basis state with ``levels[k]`` on factor ``k``."""
    if len(levels) != len(space.factors):
        raise SpaceMismatch(f"{len(levels)} levels for {len(space.factors)} factors")
    amps = np.zeros(space.total_dim, dtype=np.complex128)
    amps[np.ravel_multi_index(tuple(levels), space.dims)] = 1.0
    return StateVector(space, amps)


def tensor(a: Tensorable, b: Tensorable) -> Tensorable:
    """Kronecker product with ``a`` as the slow index."""
    space = a.space.concat(b.space)
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(space, np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, Operator) and isinstance(b, Operator):
        mat = np.kron(a.matrix, b.matrix)
        if isinstance(a, Observable) and isinstance(b, Observable):
            return Observable(space, mat)
        return Operator(space, mat)
    raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def tensor_all(items: Sequence[Tensorable]) -> Tensorable:
    return reduce(tensor, items)


def _factor_axes(op_space: HilbertSpace, space: HilbertSpace) -> list[int]:
    axes = []
    for label, dim in op_space.factors:
        if label not in space:
            raise SpaceMismatch(f"operator factor {label!r} is not part of {space.labels}")
        if space.dim(label) != dim:
            raise SpaceMismatch(f"factor {label!r} has dimension {space.dim(label)}, not {dim}")
        axes.append(space.index(label))
    return axes


def _contract(matrix: np.ndarray, op_space: HilbertSpace, psi: np.ndarray, space: HilbertSpace) -> np.ndarray:
    axes = _factor_axes(op_space, space)
    k = len(axes)
    op_t = matrix.reshape(op_space.dims + op_space.dims)
    out = np.tensordot(op_t, psi.reshape(space.dims), axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes).reshape(-1)


def apply(op: Operator, state: StateVector) -> StateVector:
    """Apply a (typically unitary) operator supported on a subset of the state's factors.

    The result is not renormalised; a non-norm-preserving ``op`` raises.
    """
    amps = _contract(op.matrix, op.space, state.amplitudes, state.space)
    return StateVector(state.space, amps)


def apply_unnormalized(op: Operator, state: StateVector) -> np.ndarray:
    """Raw amplitudes of ``op |state>``; used for projectors."""
    return _contract(op.matrix, op.space, state.amplitudes, state.space)


def embed(op: Operator, space: HilbertSpace) -> Operator:
    """Pad ``op`` with identities to act on the whole of ``space``."""
    axes = _factor_axes(op.space, space)
    rest = [i for i in range(len(space.factors)) if i not in axes]
    rest_dim = int(np.prod([space.dims[i] for i in rest], dtype=np.int64))
    full = np.kron(op.matrix, np.eye(rest_dim))
    order = axes + rest
    dims = [space.dims[i] for i in order]
    n = len(order)
    inv = list(np.argsort(order))
    t = np.transpose(full.reshape(dims + dims), inv + [p + n for p in inv])
    return Operator(space, t.reshape(space.total_dim, space.total_dim))


def propagator(hamiltonian: Operator, duration: float) -> Operator:
    """``exp(-i H t)`` with hbar = 1 (scaling-and-squaring Pade via scipy)."""
    err = hamiltonian.hermiticity_error()
    if err > HERMITIAN_ATOL:
        raise NotSelfAdjoint(f"Hamiltonian is not self-adjoint (max |H - H^dag| = {err:.3e})")
    return Operator(hamiltonian.space, scipy.linalg.expm(-1j * float(duration) * hamiltonian.matrix))


def evolve(state: StateVector, hamiltonian: Operator, duration: float) -> StateVector:
    return apply(propagator(hamiltonian, duration), state)


def expectation(state: StateVector, obs: Operator) -> float:
    """<psi|A|psi> for a self-adjoint ``obs`` on any subset of the state's factors."""
    if not obs.is_self_adjoint():
        raise NotSelfAdjoint("expectation requires a self-adjoint operator")
    value = np.vdot(state.amplitudes, _contract(obs.matrix, obs.space, state.amplitudes, state.space))
    scale = max(1.0, float(np.max(np.abs(obs.matrix), initial=0.0)))
    if abs(value.imag) > HERMITIAN_ATOL * scale:
        raise InvariantViolation(f"expectation has imaginary residue {value.imag:.3e}")
    return float(value.real)


def inner(a: StateVector, b: StateVector) -> complex:
    _require_same_space(a.space, b.space)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2, clipped into [0, 1]."""
    return float(min(1.0, max(0.0, abs(inner(a, b)) ** 2)))


def partial_trace(state: StateVector, keep: Iterable[str]) -> DensityMatrix:
    """Reduced density matrix on ``keep`` (ordered as in the state's space)."""
    keep = list(keep)
    if not keep:
        raise ValueError("keep must name at least one factor")
    for label in keep:
        if label not in state.space:
            raise UnknownFactor(f"no factor labelled {label!r} in {state.space.labels}")
    sub = state.space.subspace(keep)
    dims = state.space.dims
    kept_axes = [state.space.index(label) for label in sub.labels]
    lo, hi = kept_axes[0], kept_axes[-1] + 1
    if kept_axes == list(range(lo, hi)):
        # contiguous block: no transpose needed
        m = state.amplitudes.reshape(math.prod(dims[:lo]), sub.total_dim, math.prod(dims[hi:]))
        m = m.transpose(1, 0, 2).reshape(sub.total_dim, -1)
        rho = m @ m.conj().T
    else:
        other_axes = [i for i in range(len(dims)) if i not in kept_axes]
        m = np.transpose(state.tensor_view(), kept_axes + other_axes).reshape(sub.total_dim, -1)
        rho = m @ m.conj().T
    return DensityMatrix(sub, (rho + rho.conj().T) / 2)


def populations(state: StateVector, label: str) -> np.ndarray:
    """Diagonal of the reduced state of one factor (its level occupation weights)."""
    k = state.space.index(label)
    dims = state.space.dims
    m = state.amplitudes.reshape(math.prod(dims[:k]), dims[k], math.prod(dims[k + 1:]))
    return np.einsum("aib,aib->i", m, m.conj()).real


def commutator(a: Operator, b: Operator) -> Operator:
    _require_same_space(a.space, b.space)
    return Operator(a.space, a.matrix @ b.matrix - b.matrix @ a.matrix)


def commutator_norm(a: Operator, b: Operator) -> float:
    """Largest entry magnitude of ``AB - BA``."""
    return float(np.max(np.abs(commutator(a, b).matrix), initial=0.0))


def random_state(space: HilbertSpace, rng: np.random.Generator) -> StateVector:
    """Haar-random pure state (normalised complex Gaussian)."""
    z = rng.normal(size=space.total_dim) + 1j * rng.normal(size=space.total_dim)
    return StateVector.normalized(space, z)


def random_hermitian(space: HilbertSpace, rng: np.random.Generator, scale: float = 1.0) -> Operator:
    n = space.total_dim
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return Operator(space, scale * (z + z.conj().T) / 2)


# -- JSON layout: {"factors": [{"label", "dim"}], "amplitudes": [[re, im], ...]}

def _space_to_list(space: HilbertSpace) -> list[dict]:
    return [{"label": label, "dim": dim} for label, dim in space.factors]


def _space_from_list(items: list[dict]) -> HilbertSpace:
    return HilbertSpace(tuple((item["label"], item["dim"]) for item in items))


def state_to_dict(state: StateVector) -> dict:
    return {
        "factors": _space_to_list(state.space),
        "amplitudes": [[float(z.real), float(z.imag)] for z in state.amplitudes],
    }


def state_from_dict(data: dict) -> StateVector:
    space = _space_from_list(data["factors"])
    amps = np.array([complex(re, im) for re, im in data["amplitudes"]], dtype=np.complex128)
    return StateVector(space, amps)


def operator_to_dict(op: Operator) -> dict:
    return {
        "factors": _space_to_list(op.space),
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in op.matrix],
    }


def operator_from_dict(data: dict) -> Operator:
    space = _space_from_list(data["factors"])
    mat = np.array([[complex(re, im) for re, im in row] for row in data["matrix"]], dtype=np.complex128)
    return Operator(space, mat)
