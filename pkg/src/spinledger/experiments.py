"""Scripted, seeded measurement experiments with angular-momentum bookkeeping.

The joint space is one system spin followed by one register per script
step, in step order. Operators are applied locally, so the padded
full-space matrices (8192 x 8192 for the default x, z, x chain) are never
built.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .apparatus import (
    ApparatusRegister,
    Exchange,
    MacroLabel,
    Macrostate,
    VonNeumann,
    exchange_unitary,
    macrostate,
    prepare_oriented,
    prepare_ready,
    reservoir_momentum,
    von_neumann_unitary,
)
from .errors import ConfigError
from .linalg import Operator, StateVector, apply, fidelity, partial_trace, tensor
from .rng import draw_seed
from .schemes import (
    Instrumentalist,
    MeasurementOutcome,
    SchemeKind,
    StandardCollapse,
    Unitary,
    born_weights,
    branches,
    measure_instrumental,
    measure_standard,
    measure_unitary,
    premeasure,
    unitary_readout,
)
from .spin import (
    DEFAULT_LABEL,
    PAULI,
    X,
    Z,
    Axis,
    BlochVector,
    as_axis,
    bloch_vector,
    spin_operator,
    spin_space,
    state_from_bloch,
)

SYSTEM = DEFAULT_LABEL
COMPONENTS = ("x", "y", "z")
# conditional branch weights below this are analytic zeros carrying round-off
ZERO_WEIGHT = 1e-20


# -- scripts


@dataclass(frozen=True)
class Step:
    device: str
    axis: Axis
    scheme: Optional[SchemeKind] = None

    def __post_init__(self):
        object.__setattr__(self, "axis", as_axis(self.axis))


@dataclass(frozen=True)
class ExperimentScript:
    """Ordered measurements on one spin.

    ``randomize_devices`` draws a fresh zero-momentum reservoir microstate for
    every device from the run's generator; otherwise reservoirs are singlets.
    """

    steps: tuple[Step, ...]
    initial_system: BlochVector = BlochVector(0.5, 0.0, 0.0)
    seed: int = 0
    reservoir_size: int = 2
    randomize_devices: bool = True

    def __post_init__(self):
        steps = tuple(self.steps)
        labels = [s.device for s in steps]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"device labels must be unique, got {labels}")
        if SYSTEM in labels:
            raise ConfigError(f"{SYSTEM!r} is reserved for the observed spin")
        object.__setattr__(self, "steps", steps)

    @property
    def devices(self) -> tuple[str, ...]:
        return tuple(s.device for s in self.steps)


def canonical_chain(seed: int = 0, reservoir_size: int = 2, initial: BlochVector = BlochVector(0.5, 0.0, 0.0)) -> ExperimentScript:
    """x, z, x measurements of a spin prepared up along x."""
    steps = (Step("x1", X), Step("z2", Z), Step("x3", X))
    return ExperimentScript(steps, initial, seed, reservoir_size)


def single_measurement(seed: int = 0, reservoir_size: int = 2, initial: BlochVector = BlochVector(0.5, 0.0, 0.0)) -> ExperimentScript:
    """One z measurement of a spin prepared up along x."""
    return ExperimentScript((Step("z1", Z),), initial, seed, reservoir_size)


@dataclass(frozen=True)
class Setup:
    """The prepared system spin and devices, each still in a product state."""

    system: StateVector
    registers: tuple[ApparatusRegister, ...]
    devices: tuple[StateVector, ...]

    @property
    def state(self) -> StateVector:
        state = self.system
        for device in self.devices:
            state = tensor(state, device)
        return state

    def register(self, device: str) -> ApparatusRegister:
        return next(r for r in self.registers if r.label == device)


def build_setup(script: ExperimentScript, rng: Optional[np.random.Generator] = None) -> Setup:
    """System spin and every device at READY."""
    registers, devices = [], []
    for step in script.steps:
        seed = draw_seed(rng) if (rng is not None and script.randomize_devices) else None
        register, device = prepare_ready(script.reservoir_size, seed, step.device)
        registers.append(register)
        devices.append(device)
    return Setup(state_from_bloch(script.initial_system, SYSTEM), tuple(registers), tuple(devices))


# -- ledger


@dataclass(frozen=True)
class Momenta:
    """<J_k> of the system spin, each device reservoir, and their total."""

    system: np.ndarray
    devices: dict

    @property
    def total(self) -> np.ndarray:
        return self.system + sum(self.devices.values(), np.zeros(3))


def momenta(state: StateVector, registers: Sequence[ApparatusRegister], detached: Optional[dict] = None) -> Momenta:
    """Book every register; those absent from ``state`` are read from ``detached``."""
    rho = partial_trace(state, [SYSTEM]).matrix
    system = np.array([0.5 * float(np.trace(rho @ p).real) for p in PAULI])
    devices = {
        r.label: reservoir_momentum(state, r) if r.pointer_label in state.space else detached[r.label]
        for r in registers
    }
    return Momenta(system, devices)


@dataclass(frozen=True)
class LedgerRow:
    step: int
    device: Optional[str]
    outcome: Optional[str]
    probability: Optional[float]
    total: np.ndarray
    system: np.ndarray
    devices: dict
    delta_total: np.ndarray
    delta_system: np.ndarray
    delta_devices: dict

    def to_dict(self) -> dict:
        vec = lambda v: {c: float(x) for c, x in zip(COMPONENTS, v)}
        return {
            "step": self.step,
            "device": self.device,
            "outcome": self.outcome,
            "probability": self.probability,
            "J_total": vec(self.total),
            "J_system": vec(self.system),
            "J_devices": {k: vec(v) for k, v in self.devices.items()},
            "dJ_total": vec(self.delta_total),
            "dJ_system": vec(self.delta_system),
            "dJ_devices": {k: vec(v) for k, v in self.delta_devices.items()},
        }


def _row(step: int, device, outcome, probability, now: Momenta, start: Momenta) -> LedgerRow:
    return LedgerRow(
        step,
        device,
        outcome,
        probability,
        now.total,
        now.system,
        dict(now.devices),
        now.total - start.total,
        now.system - start.system,
        {k: now.devices[k] - start.devices[k] for k in now.devices},
    )


@dataclass(frozen=True)
class LedgerReport:
    scheme: str
    rows: tuple[LedgerRow, ...]

    @property
    def max_abs_delta(self) -> float:
        return max((float(np.max(np.abs(r.delta_total))) for r in self.rows), default=0.0)

    @property
    def final_delta(self) -> np.ndarray:
        return self.rows[-1].delta_total if self.rows else np.zeros(3)

    @property
    def outcomes(self) -> tuple[Optional[str], ...]:
        return tuple(r.outcome for r in self.rows[1:])

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "max_abs_delta": self.max_abs_delta, "rows": [r.to_dict() for r in self.rows]}


# -- server records


@dataclass(frozen=True)
class RecordEntry:
    time: int
    device: str
    label: MacroLabel
    confidence: float

    def to_dict(self) -> dict:
        return {"t": self.time, "device": self.device, "label": self.label.value, "confidence": self.confidence}


@dataclass(frozen=True)
class ServerRecord:
    """Classical log of pointer readings, append-only and time ordered."""

    entries: tuple[RecordEntry, ...] = ()
    final_time: int = 0

    def append(self, entry: RecordEntry) -> "ServerRecord":
        if self.entries and entry.time < self.entries[-1].time:
            raise ValueError(f"record at t={entry.time} arrives after t={self.entries[-1].time}")
        return ServerRecord(self.entries + (entry,), max(self.final_time, entry.time))

    def at(self, time: int) -> tuple[RecordEntry, ...]:
        return tuple(e for e in self.entries if e.time == time)

    def labels(self) -> tuple[tuple[int, str, str], ...]:
        return tuple((e.time, e.device, e.label.value) for e in self.entries)

    def to_dict(self) -> dict:
        return {"final_time": self.final_time, "entries": [e.to_dict() for e in self.entries]}


def _initial_record(setup: Setup) -> ServerRecord:
    record = ServerRecord()
    for register, device in zip(setup.registers, setup.devices):
        ms = macrostate(device, register)
        record = record.append(RecordEntry(0, register.label, ms.label, ms.confidence))
    return record


# -- conservation chain


def _run_step(
    state: StateVector, step: Step, register: ApparatusRegister, scheme: SchemeKind, rng: np.random.Generator
) -> tuple[StateVector, MeasurementOutcome, Macrostate]:
    obs = spin_operator(step.axis, SYSTEM)
    if isinstance(scheme, StandardCollapse):
        outcome, state = measure_standard(state, obs, register, rng)
        return state, outcome, macrostate(state, register)
    if isinstance(scheme, Instrumentalist):
        outcome, state = measure_instrumental(state, obs, register, scheme, rng)
        return state, outcome, macrostate(state, register, scheme.tolerance)
    if isinstance(scheme, Unitary):
        state = measure_unitary(state, step.axis, register, scheme.model, SYSTEM)
        reading = unitary_readout(state, step.axis, register)
        return state, MeasurementOutcome(reading.label, reading.confidence, register.label), reading
    raise ConfigError(f"unknown scheme {scheme!r}")


def run_conservation_chain(
    script: ExperimentScript, scheme: SchemeKind, rng: np.random.Generator, track: bool = True
) -> tuple[LedgerReport, ServerRecord]:
    """Run every step under ``scheme`` (a step's own scheme wins) and book <J_k>.

    With ``track=False`` only the step-0 and final ledger rows are computed.
    """
    if not script.steps:
        raise ConfigError("script has no measurement steps")
    setup = build_setup(script, rng)
    # devices join the joint state only when their step begins
    detached = {r.label: reservoir_momentum(d, r) for r, d in zip(setup.registers, setup.devices)}
    state = setup.system
    start = momenta(state, setup.registers, detached)
    rows = [_row(0, None, None, None, start, start)]
    record = _initial_record(setup)
    steps = zip(script.steps, setup.registers, setup.devices)
    for t, (step, register, device) in enumerate(steps, start=1):
        state = tensor(state, device)
        state, outcome, reading = _run_step(state, step, register, step.scheme or scheme, rng)
        record = record.append(RecordEntry(t, register.label, reading.label, reading.confidence))
        if track or t == len(script.steps):
            now = momenta(state, setup.registers, detached)
            rows.append(_row(t, register.label, outcome.label.value, outcome.probability, now, start))
    return LedgerReport(_scheme_name(scheme), tuple(rows)), record


def _scheme_name(scheme: SchemeKind) -> str:
    return getattr(scheme, "name", type(scheme).__name__)


@dataclass(frozen=True)
class BranchResult:
    """One outcome sequence of a collapse run with its exact Born weight.

    Deltas are ``None`` for sequences of weight zero, whose conditional state
    does not exist.
    """

    outcomes: tuple[str, ...]
    weight: float
    delta_total: Optional[np.ndarray]
    delta_system: Optional[np.ndarray]
    delta_devices: Optional[dict]

    def to_dict(self) -> dict:
        vec = lambda v: None if v is None else {c: float(x) for c, x in zip(COMPONENTS, v)}
        return {
            "outcomes": list(self.outcomes),
            "weight": self.weight,
            "dJ_total": vec(self.delta_total),
            "dJ_system": vec(self.delta_system),
            "dJ_devices": None if self.delta_devices is None else {k: vec(v) for k, v in self.delta_devices.items()},
        }


def enumerate_branches(script: ExperimentScript) -> list[BranchResult]:
    """Exhaustive collapse-scheme branch table over all 2^n outcome sequences."""
    setup = build_setup(script)
    start = momenta(setup.state, setup.registers)
    results: dict[tuple[str, ...], BranchResult] = {}

    def visit(state: StateVector, depth: int, weight: float, prefix: tuple[str, ...]) -> None:
        if depth == len(script.steps):
            now = momenta(state, setup.registers)
            results[prefix] = BranchResult(
                prefix,
                weight,
                now.total - start.total,
                now.system - start.system,
                {k: now.devices[k] - start.devices[k] for k in now.devices},
            )
            return
        step, register = script.steps[depth], setup.registers[depth]
        obs = spin_operator(step.axis, SYSTEM)
        for part in branches(premeasure(state, obs, register), obs, register):
            label = (part.label.value,)
            if part.probability < ZERO_WEIGHT:
                for tail in itertools.product((MacroLabel.UP.value, MacroLabel.DOWN.value), repeat=len(script.steps) - depth - 1):
                    key = prefix + label + tail
                    results[key] = BranchResult(key, 0.0, None, None, None)
                continue
            visit(part.state(state.space), depth + 1, weight * part.probability, prefix + label)

    visit(setup.state, 0, 1.0, ())
    order = list(itertools.product((MacroLabel.UP.value, MacroLabel.DOWN.value), repeat=len(script.steps)))
    return [results[key] for key in order]


# -- anamnesis


@dataclass(frozen=True)
class Checkpoint:
    time: int
    fidelity: float
    records_consistent: bool
    recorded: tuple
    reconstructed: tuple

    def to_dict(self) -> dict:
        return {
            "t": self.time,
            "fidelity": self.fidelity,
            "records_consistent": self.records_consistent,
            "recorded": [list(x) for x in self.recorded],
            "reconstructed": [list(x) for x in self.reconstructed],
        }


@dataclass(frozen=True)
class AnamnesisReport:
    scheme: str
    checkpoints: tuple[Checkpoint, ...]
    record: ServerRecord
    final_consistent: bool = True

    @property
    def consistent(self) -> bool:
        return self.final_consistent and all(c.records_consistent for c in self.checkpoints)

    @property
    def min_fidelity(self) -> float:
        return min((c.fidelity for c in self.checkpoints), default=1.0)

    def first_inconsistency(self, atol: float = 1e-10) -> Optional[Checkpoint]:
        """Earliest checkpoint whose reconstruction fidelity falls below 1 - atol."""
        return next((c for c in self.checkpoints if c.fidelity < 1.0 - atol), None)

    def to_dict(self) -> dict:
        first = self.first_inconsistency()
        return {
            "scheme": self.scheme,
            "consistent": self.consistent,
            "min_fidelity": self.min_fidelity,
            "first_inconsistency": None if first is None else {"t": first.time, "fidelity": first.fidelity},
            "checkpoints": [c.to_dict() for c in self.checkpoints],
            "record": self.record.to_dict(),
        }


def _readings(state: StateVector, entries: Sequence[RecordEntry], setup: Setup) -> tuple:
    return tuple((e.device, macrostate(state, setup.register(e.device)).label.value) for e in entries)


def run_anamnesis(script: ExperimentScript, scheme: SchemeKind, rng: Optional[np.random.Generator] = None) -> AnamnesisReport:
    """Forward run with checkpoints, then backward evolution from the final state.

    Unitary steps are the exchange followed by a von Neumann write-out of the
    system spin on the device pointer, so the pointer itself carries the
    record. Collapse steps invert only their unitary part; the projection
    has no inverse.
    """
    rng = rng if rng is not None else np.random.Generator(np.random.PCG64(script.seed))
    name = _scheme_name(scheme)
    if not script.steps:
        return AnamnesisReport(name, (), ServerRecord())
    setup = build_setup(script, rng)
    state = setup.state
    record = _initial_record(setup)
    forward = [state]
    step_ops: list[list[Operator]] = []
    for t, (step, register) in enumerate(zip(script.steps, setup.registers), start=1):
        kind = step.scheme or scheme
        obs = spin_operator(step.axis, SYSTEM)
        write = von_neumann_unitary(obs, VonNeumann(), register)
        if isinstance(kind, Unitary):
            kick = exchange_unitary(kind.model, register, SYSTEM)
            state = apply(write, apply(kick, state))
            step_ops.append([kick, write])
        elif isinstance(kind, StandardCollapse):
            _, state = measure_standard(state, obs, register, rng)
            step_ops.append([write])
        elif isinstance(kind, Instrumentalist):
            _, state = measure_instrumental(state, obs, register, kind, rng)
            step_ops.append([write])
        else:
            raise ConfigError(f"unknown scheme {kind!r}")
        ms = macrostate(state, register)
        record = record.append(RecordEntry(t, register.label, ms.label, ms.confidence))
        forward.append(state)

    n = len(script.steps)
    final_recorded = tuple((e.device, e.label.value) for e in record.at(n))
    final_consistent = final_recorded == _readings(state, record.at(n), setup)
    back = state
    checkpoints = []
    for t in range(n - 1, -1, -1):
        for op in reversed(step_ops[t]):
            back = apply(op.dagger(), back)
        entries = record.at(t)
        recorded = tuple((e.device, e.label.value) for e in entries)
        reconstructed = _readings(back, entries, setup)
        checkpoints.append(Checkpoint(t, fidelity(back, forward[t]), recorded == reconstructed, recorded, reconstructed))
    return AnamnesisReport(name, tuple(reversed(checkpoints)), record, final_consistent)


# -- information retention


def recover_bloch_from_reservoir(post_state: StateVector, register: ApparatusRegister, target: int = 0) -> BlochVector:
    """Bloch vector held by one reservoir spin after an exchange."""
    return bloch_vector(partial_trace(post_state, [register.reservoir_label(target)]))


# -- special states


@dataclass(frozen=True)
class SearchGrid:
    """Kick angles and reservoir orientations (polar, azimuth) to scan."""

    thetas: tuple[float, ...]
    polars: tuple[float, ...]
    azimuths: tuple[float, ...] = (0.0,)

    @classmethod
    def regular(cls, n_theta: int = 9, n_polar: int = 9, n_azimuth: int = 8) -> "SearchGrid":
        return cls(
            tuple(np.linspace(0.0, math.pi, n_theta)),
            tuple(np.linspace(0.0, math.pi, n_polar)),
            tuple(np.linspace(0.0, 2 * math.pi, n_azimuth, endpoint=False)),
        )

    def points(self):
        return itertools.product(self.thetas, self.polars, self.azimuths)

    def __len__(self) -> int:
        return len(self.thetas) * len(self.polars) * len(self.azimuths)


@dataclass(frozen=True)
class SpecialStateResult:
    theta: float
    polar: float
    azimuth: float
    score: float
    label: MacroLabel

    def to_dict(self) -> dict:
        return {"theta": self.theta, "polar": self.polar, "azimuth": self.azimuth, "score": self.score, "label": self.label.value}


def _direction(polar: float, azimuth: float) -> np.ndarray:
    return np.array([math.sin(polar) * math.cos(azimuth), math.sin(polar) * math.sin(azimuth), math.cos(polar)])


def _as_system(system: StateVector) -> StateVector:
    if system.space.total_dim != 2:
        raise ConfigError("expected a single spin-1/2 system state")
    return StateVector(spin_space(SYSTEM), system.amplitudes)


def score_point(
    system: StateVector,
    obs_axis,
    theta: float,
    polar: float,
    azimuth: float,
    reservoir_size: int = 2,
    tolerance: float = 0.01,
) -> Macrostate:
    """Kick then pointer write-out for one grid point; confidence is the definiteness score."""
    register, device = prepare_oriented(_direction(polar, azimuth), reservoir_size, "probe")
    joint = tensor(_as_system(system), device)
    post = measure_unitary(joint, obs_axis, register, Exchange(theta), SYSTEM)
    return unitary_readout(post, obs_axis, register, tolerance)


def special_state_search(
    system: StateVector, grid: SearchGrid, tolerance: float, obs_axis=Z, reservoir_size: int = 2
) -> list[SpecialStateResult]:
    """Exhaustive scan; keeps points whose dominant pointer weight is >= 1 - tolerance."""
    if len(grid) == 0:
        raise ConfigError("search grid is empty")
    if not 0.0 <= tolerance < 0.5:
        raise ConfigError(f"tolerance must lie in [0, 1/2), got {tolerance}")
    hits = []
    for theta, polar, azimuth in grid.points():
        ms = score_point(system, obs_axis, theta, polar, azimuth, reservoir_size, tolerance)
        if ms.confidence >= 1.0 - tolerance - 1e-12:
            hits.append(SpecialStateResult(float(theta), float(polar), float(azimuth), ms.confidence, ms.label))
    hits.sort(key=lambda r: -r.score)
    return hits


# -- kick statistics


@dataclass(frozen=True)
class Cauchy:
    location: float = 0.0
    scale: float = 0.1
    name = "cauchy"

    def __post_init__(self):
        if not self.scale > 0:
            raise ConfigError(f"Cauchy scale must be positive, got {self.scale}")

    def sample(self, rng: np.random.Generator) -> float:
        return self.location + self.scale * float(rng.standard_cauchy())


@dataclass(frozen=True)
class Uniform:
    low: float = 0.0
    high: float = math.pi
    name = "uniform"

    def __post_init__(self):
        if self.high < self.low:
            raise ConfigError(f"uniform bounds reversed: [{self.low}, {self.high}]")

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.low, self.high)) if self.high > self.low else self.low


KickDistribution = Union[Cauchy, Uniform]


def fold_angle(theta: float) -> float:
    """Map any real kick angle into [0, pi].

    The exchange weight sin^2(theta / 2) is even and 2 pi periodic, so the
    folded angle mixes the two spins by the same amount.
    """
    wrapped = math.remainder(theta, 2 * math.pi)
    return min(abs(wrapped), math.pi)


@dataclass(frozen=True)
class KickTable:
    trials: int
    counts: dict
    born: dict
    samples: tuple = field(repr=False, default=())

    @property
    def frequencies(self) -> dict:
        return {k: v / self.trials for k, v in self.counts.items()}

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "counts": {k.value: v for k, v in self.counts.items()},
            "frequencies": {k.value: v for k, v in self.frequencies.items()},
            "born": {k.value: v for k, v in self.born.items()},
        }


KICK_LABELS = (MacroLabel.UP, MacroLabel.DOWN, MacroLabel.SUPERPOSED)


def kick_statistics(
    system: StateVector,
    distribution: KickDistribution,
    trials: int,
    rng: np.random.Generator,
    obs_axis=Z,
    reservoir_size: int = 2,
    tolerance: float = 0.01,
) -> KickTable:
    """Outcome frequencies under random kicks next to the Born weights; no verdict."""
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    system = _as_system(system)
    counts = {label: 0 for label in KICK_LABELS}
    samples = []
    for _ in range(trials):
        raw = distribution.sample(rng)
        theta = fold_angle(raw)
        register, device = prepare_ready(reservoir_size, draw_seed(rng), "probe")
        post = measure_unitary(tensor(system, device), obs_axis, register, Exchange(theta), SYSTEM)
        reading = unitary_readout(post, obs_axis, register, tolerance)
        counts[reading.label] += 1
        samples.append((raw, theta, reading.label.value, reading.confidence))
    return KickTable(trials, counts, born_weights(system, obs_axis), tuple(samples))


# -- Born check


@dataclass(frozen=True)
class BornCheckRow:
    polar: float
    born_up: float
    frequency_up: float
    trials: int

    @property
    def sigma(self) -> float:
        p = self.born_up
        return math.sqrt(p * (1 - p) / self.trials)


def born_check(polars: Sequence[float], trials: int, rng: np.random.Generator) -> list[BornCheckRow]:
    """Collapse-scheme frequency of Up along z for inputs tilted by ``polar`` towards x."""
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    axis = Z
    rows = []
    register, device = prepare_ready(2, None, "meter")
    obs = spin_operator(axis, SYSTEM)
    for polar in polars:
        system = state_from_bloch(BlochVector.from_unit(_direction(polar, 0.0)), SYSTEM)
        p_up = born_weights(system, axis)[MacroLabel.UP]
        joint = tensor(system, device)
        ups = 0
        for _ in range(trials):
            outcome, _post = measure_standard(joint, obs, register, rng)
            ups += outcome.label is MacroLabel.UP
        rows.append(BornCheckRow(float(polar), p_up, ups / trials, trials))
    return rows
