"""End-to-end acceptance checks; each test prints one PASS/FAIL line."""

import math

import numpy as np

from conftest import KICK_ARGV, SAMPLED_TRIALS
from spinledger.apparatus import (
    POINTER_DIM,
    ApparatusRegister,
    Exchange,
    MacroLabel,
    PointerLevel,
    exchange_unitary,
    macro_equivalent,
    macrostate,
    prepare_ready,
    total_spin_operator,
)
from spinledger.cli import main
from spinledger.experiments import (
    BlochVector,
    born_check,
    canonical_chain,
    enumerate_branches,
    recover_bloch_from_reservoir,
    run_anamnesis,
    run_conservation_chain,
    single_measurement,
)
from spinledger.linalg import (
    HilbertSpace,
    StateVector,
    apply,
    commutator_norm,
    partial_trace,
    propagator,
    random_hermitian,
    random_state,
    tensor,
)
from spinledger.rng import make_rng, spawn_seeds
from spinledger.schemes import (
    Instrumentalist,
    StandardCollapse,
    Unitary,
    branches,
    measure_instrumental,
    measure_standard,
    measure_unitary,
    premeasure,
    unitary_readout,
    write_pointer,
)
from spinledger.spin import X, Y, Z, axis_eigenstate, spin_operator, state_from_bloch


def random_bloch(rng):
    v = rng.normal(size=3)
    return BlochVector.from_unit(v / np.linalg.norm(v))


def system_fidelity(joint, target):
    rho = partial_trace(joint, ["spin"]).matrix
    return float(np.vdot(target.amplitudes, rho @ target.amplitudes).real)


def test_1_eigenstate_measurement(criterion):
    up = axis_eigenstate(Z, "up")
    obs = spin_operator(Z)
    worst = 0.0
    labels = []
    for seed in range(5):
        reg, dev = prepare_ready(2, seed)
        joint = tensor(up, dev)

        outcome, post = measure_standard(joint, obs, reg, make_rng(seed))
        labels.append(outcome.label)
        worst = max(worst, abs(1 - outcome.probability), abs(1 - system_fidelity(post, up)))
        # the projection is the identity on an eigenstate
        worst = max(worst, abs(1 - abs(np.vdot(post.amplitudes, premeasure(joint, obs, reg).amplitudes)) ** 2))

        outcome, post = measure_instrumental(joint, obs, reg, Instrumentalist(), make_rng(seed))
        labels.append(outcome.label)
        worst = max(worst, abs(1 - outcome.probability), abs(1 - system_fidelity(post, up)))

        # unitary scheme: an eigenstate needs no kick, and the pointer write alone is unitary
        post = measure_unitary(joint, Z, reg, Exchange(0.0))
        reading = unitary_readout(post, Z, reg, tolerance=0.0)
        labels.append(reading.label)
        worst = max(worst, abs(1 - reading.confidence), abs(1 - system_fidelity(post, up)))
        written = write_pointer(joint, Z, reg)
        labels.append(macrostate(written, reg, 0.0).label)
        worst = max(worst, abs(1 - system_fidelity(written, up)))
    ok = set(labels) == {MacroLabel.UP} and worst <= 1e-12
    assert criterion(1, "eigenstate measurement reads Up with fidelity 1", ok, f"max deviation {worst:.1e}")


def test_2_equal_splitting(criterion):
    reg, dev = prepare_ready(2)
    obs = spin_operator(Z)
    parts = branches(premeasure(tensor(axis_eigenstate(X), dev), obs, reg), obs, reg)
    exact = max(abs(b.probability - 0.5) for b in parts)
    (row,) = born_check([math.pi / 2], SAMPLED_TRIALS, make_rng(2))
    sigma = math.sqrt(0.25 / SAMPLED_TRIALS)
    dev_sigma = abs(row.frequency_up - 0.5) / sigma
    ok = exact <= 1e-12 and dev_sigma <= 4
    assert criterion(
        2, "|+x> along z splits 50/50", ok,
        f"exact error {exact:.1e}, frequency {row.frequency_up:.4f} = {dev_sigma:.2f} sigma",
    )


def test_3_quarter_branch(criterion, sampled_chain_outcomes):
    table = {b.outcomes: b.weight for b in enumerate_branches(canonical_chain(0))}
    exact = abs(table[("Up", "Up", "Down")] - 0.25)
    n = len(sampled_chain_outcomes)
    freq = sum(o == ("Up", "Up", "Down") for o in sampled_chain_outcomes) / n
    sigma = math.sqrt(0.25 * 0.75 / n)
    ok = exact <= 1e-12 and abs(freq - 0.25) <= 4 * sigma
    assert criterion(
        3, "(Up, Up, Down) branch has weight 1/4", ok,
        f"exact error {exact:.1e}, frequency {freq:.4f} over {n} = {abs(freq - 0.25) / sigma:.2f} sigma",
    )


def test_4_collapse_violates_conservation(criterion):
    worst_flip = worst_other = worst_device = 0.0
    named = []
    flips = 0
    for initial, flip in ((BlochVector(0.5, 0, 0), ("Up", "Up", "Down")), (BlochVector(-0.5, 0, 0), ("Down", "Down", "Up"))):
        for b in enumerate_branches(canonical_chain(0, initial=initial)):
            if b.delta_total is None:
                continue
            worst_device = max(worst_device, max(np.abs(d).max() for d in b.delta_devices.values()))
            if b.outcomes[0] != b.outcomes[2]:
                flips += 1
                worst_flip = max(worst_flip, abs(abs(b.delta_total[0]) - 1.0))
                named.append(b.outcomes == flip)
            else:
                worst_other = max(worst_other, abs(b.delta_total[0]))
    ok = flips == 4 and sum(named) == 2 and max(worst_flip, worst_other, worst_device) <= 1e-12
    assert criterion(
        4, "collapse changes total J_x by 1 on spin-flip branches", ok,
        f"{flips} flip branches, |dJx|-1 error {worst_flip:.1e}, other branches {worst_other:.1e}, devices {worst_device:.1e}",
    )


def test_5_unitary_conserves(criterion):
    worst = 0.0
    for seed in spawn_seeds(55, 100):
        rng = make_rng(seed)
        script = canonical_chain(seed, initial=random_bloch(rng))
        ledger, _ = run_conservation_chain(script, Unitary(), rng)
        worst = max(worst, ledger.max_abs_delta)
    reg = ApparatusRegister()
    op_worst = 0.0
    for theta in np.linspace(0.0, math.pi, 20):
        u = exchange_unitary(Exchange(float(theta)), reg)
        for axis in (X, Y, Z):
            j = total_spin_operator(u.space, u.space.labels, axis)
            op_worst = max(op_worst, commutator_norm(u, j))
    ok = worst <= 1e-10 and op_worst <= 1e-12
    assert criterion(5, "unitary scheme conserves total J", ok, f"ledger {worst:.1e}, commutator {op_worst:.1e}")


def test_6_anamnesis(criterion):
    unitary_fid = 1.0
    records_ok = True
    for seed in range(5):
        for script in (single_measurement(seed), canonical_chain(seed)):
            report = run_anamnesis(script, Unitary(), make_rng(seed))
            unitary_fid = min(unitary_fid, report.min_fidelity)
            records_ok &= report.consistent and all(c.records_consistent for c in report.checkpoints)
    collapse = run_anamnesis(single_measurement(0), StandardCollapse(), make_rng(0))
    pre = collapse.checkpoints[0]
    ok = unitary_fid >= 1 - 1e-10 and records_ok and abs(pre.fidelity - 0.5) <= 1e-10
    assert criterion(
        6, "unitary history reconstructs, collapse does not", ok,
        f"unitary min fidelity {unitary_fid:.12f}, records consistent {records_ok}, collapse t=0 fidelity {pre.fidelity:.12f}",
    )


def test_7_information_retention(criterion):
    rng = make_rng(77)
    obs = spin_operator(Z)
    swap_err = 0.0
    collapse_gap = 0.0
    for _ in range(100):
        b = random_bloch(rng)
        system = state_from_bloch(b)
        reg, dev = prepare_ready(2, int(rng.integers(2**63)))
        joint = tensor(system, dev)
        post = measure_unitary(joint, Z, reg, Exchange(math.pi))
        got = recover_bloch_from_reservoir(post, reg)
        swap_err = max(swap_err, float(np.abs(got.components - b.components).max()))
        _, collapsed = measure_standard(joint, obs, reg, rng)
        lost = recover_bloch_from_reservoir(collapsed, reg)
        collapse_gap = max(collapse_gap, float(np.abs(lost.components - b.components).max()))
    ok = swap_err <= 1e-10 and collapse_gap > 0.1
    assert criterion(
        7, "input Bloch vector survives in the reservoir", ok,
        f"swap error {swap_err:.1e}, largest collapse miss {collapse_gap:.3f}",
    )


def _device(level, reservoir, register):
    pointer = np.zeros(POINTER_DIM, dtype=complex)
    pointer[level] = 1.0
    return StateVector(register.space, np.kron(pointer, reservoir.amplitudes))


def test_8_macrostate_equivalence(criterion):
    rng = make_rng(88)
    failures = 0
    cases = 200
    for _ in range(cases):
        m = int(rng.choice([2, 4]))
        reg = ApparatusRegister("device", m)
        res_space = HilbertSpace.of(*((label, 2) for label in reg.reservoir_labels))
        a_res, b_res = random_state(res_space, rng), random_state(res_space, rng)
        la, lb = rng.choice(list(PointerLevel), size=2, replace=False)
        same = macro_equivalent(_device(la, a_res, reg), _device(la, b_res, reg), reg)
        differ = macro_equivalent(_device(la, a_res, reg), _device(lb, b_res, reg), reg)
        u = propagator(random_hermitian(res_space, rng), float(rng.uniform(0, 2 * math.pi)))
        before = _device(la, a_res, reg)
        after = apply(u, before)
        kept = macrostate(after, reg).label is macrostate(before, reg).label
        failures += (not same) + differ + (not kept)
    ok = failures == 0
    assert criterion(8, "macrostates ignore reservoir microstates", ok, f"{cases} cases, {failures} failures")


def _snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_9_cli_determinism(criterion, tmp_path, kick_run):
    runs = [
        ["conservation", "--scheme", "standard", "--seed", "7", "--trials", "20"],
        ["conservation", "--scheme", "unitary", "--seed", "7", "--trials", "5"],
        ["conservation", "--scheme", "instrumental", "--seed", "7", "--trials", "5"],
        ["anamnesis", "--scheme", "unitary", "--script", "chain", "--seed", "3"],
        ["anamnesis", "--scheme", "standard", "--seed", "3"],
        ["born-check", "--seed", "4", "--trials", "2000"],
    ]
    mismatched = []
    for i, argv in enumerate(runs):
        outs = []
        for copy in ("a", "b"):
            out = tmp_path / f"{i}{copy}"
            out.mkdir()
            assert main([*argv, "--out", str(out)]) == 0
            outs.append(_snapshot(out))
        if outs[0] != outs[1]:
            mismatched.append(" ".join(argv))
    rerun = tmp_path / "kicks"
    rerun.mkdir()
    assert main([*KICK_ARGV, "--out", str(rerun)]) == 0
    if _snapshot(rerun) != _snapshot(kick_run[1]):
        mismatched.append(" ".join(KICK_ARGV))
    ok = not mismatched
    assert criterion(9, "CLI reports are byte-identical across reruns", ok, f"{len(runs) + 1} configurations, mismatched: {mismatched or 'none'}")
