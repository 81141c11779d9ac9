import math

import numpy as np
import pytest

from spinledger.apparatus import MacroLabel
from spinledger.errors import ConfigError
from spinledger.experiments import (
    BlochVector,
    Cauchy,
    ExperimentScript,
    SearchGrid,
    Step,
    Uniform,
    born_check,
    build_setup,
    canonical_chain,
    enumerate_branches,
    fold_angle,
    kick_statistics,
    run_anamnesis,
    run_conservation_chain,
    score_point,
    single_measurement,
    special_state_search,
)
from spinledger.rng import make_rng
from spinledger.schemes import Instrumentalist, StandardCollapse, Unitary
from spinledger.spin import X, Z, axis_eigenstate


def test_script_validation():
    with pytest.raises(ConfigError):
        ExperimentScript((Step("a", X), Step("a", Z)))


def test_setup_dimensions():
    setup = build_setup(canonical_chain(0, 4))
    assert setup.state.space.total_dim == 2 * (4 * 2**4) ** 3


def test_chain_records_are_time_ordered():
    _, record = run_conservation_chain(canonical_chain(3), StandardCollapse(), make_rng(3))
    times = [t for t, _, _ in record.labels()]
    assert times == sorted(times)
    assert [lab for t, _, lab in record.labels() if t == 0] == ["Ready"] * 3


def test_collapse_ledger_rows():
    ledger, _ = run_conservation_chain(canonical_chain(5), StandardCollapse(), make_rng(5))
    assert len(ledger.rows) == 4
    assert ledger.rows[1].outcome == "Up"  # the input already points along +x
    assert ledger.rows[1].probability == pytest.approx(1.0)
    # devices never take up angular momentum under collapse
    for row in ledger.rows:
        for delta in row.delta_devices.values():
            assert np.abs(delta).max() <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_unitary_chain_conserves(seed):
    ledger, _ = run_conservation_chain(canonical_chain(seed), Unitary(), make_rng(seed))
    assert ledger.max_abs_delta <= 1e-10


def test_instrumental_chain_runs():
    ledger, record = run_conservation_chain(canonical_chain(2), Instrumentalist(), make_rng(2))
    assert set(ledger.outcomes[1:]) <= {"Up", "Down"}
    assert record.final_time == 3


def test_branch_table_covers_all_sequences():
    table = enumerate_branches(canonical_chain(0))
    assert len(table) == 8
    assert sum(b.weight for b in table) == pytest.approx(1.0, abs=1e-12)
    impossible = [b for b in table if b.weight == 0 or b.delta_total is None]
    # the first device always reads Up for a +x input
    assert {b.outcomes[0] for b in impossible} == {"Down"}
    assert all(b.delta_total is None for b in impossible)


def test_branch_table_for_down_input():
    script = canonical_chain(0, initial=BlochVector(-0.5, 0.0, 0.0))
    rows = {b.outcomes: b for b in enumerate_branches(script)}
    assert rows[("Down", "Down", "Up")].delta_total[0] == pytest.approx(1.0, abs=1e-12)
    assert rows[("Down", "Up", "Down")].delta_total[0] == pytest.approx(0.0, abs=1e-12)


def test_empty_anamnesis():
    report = run_anamnesis(ExperimentScript(()), Unitary())
    assert report.checkpoints == ()
    assert report.consistent


def test_anamnesis_collapse_on_eigenstate_is_lossless():
    script = single_measurement(initial=BlochVector(0.0, 0.0, 0.5))
    report = run_anamnesis(script, StandardCollapse())
    assert report.min_fidelity == pytest.approx(1.0, abs=1e-10)


def test_anamnesis_collapse_chain_loses_history():
    report = run_anamnesis(canonical_chain(1), StandardCollapse())
    assert report.min_fidelity < 1 - 1e-3


def test_fold_angle():
    assert fold_angle(0.3) == pytest.approx(0.3)
    assert fold_angle(-0.3) == pytest.approx(0.3)
    assert fold_angle(2 * math.pi + 0.2) == pytest.approx(0.2)
    assert fold_angle(math.pi + 0.1) == pytest.approx(math.pi - 0.1)


def test_distributions_validate():
    with pytest.raises(ConfigError):
        Cauchy(0.0, 0.0)
    with pytest.raises(ConfigError):
        Uniform(1.0, 0.0)


def test_degenerate_kick_on_eigenstate():
    table = kick_statistics(axis_eigenstate(Z), Uniform(0.0, 0.0), 50, make_rng(0))
    assert table.frequencies[MacroLabel.UP] == 1.0


def test_kick_frequencies_sum_to_one():
    table = kick_statistics(axis_eigenstate((1, 0, 1)), Cauchy(0.0, 1.0), 200, make_rng(9))
    assert sum(table.frequencies.values()) == pytest.approx(1.0)
    assert table.born[MacroLabel.UP] == pytest.approx((1 + 1 / math.sqrt(2)) / 2)


def test_kick_trials_validated():
    with pytest.raises(ConfigError):
        kick_statistics(axis_eigenstate(Z), Cauchy(0.0, 1.0), 0, make_rng(0))


class TestSpecialStates:
    def test_eigenstate_needs_no_kick(self):
        hits = special_state_search(axis_eigenstate(Z), SearchGrid.regular(3, 3, 2), 0.01)
        assert any(h.theta == 0.0 and h.score == pytest.approx(1.0) for h in hits)

    def test_full_swap_imports_reservoir_state(self):
        ms = score_point(axis_eigenstate(X), Z, math.pi, 0.0, 0.0, 2)
        assert ms.confidence == pytest.approx(1.0, abs=1e-12)
        assert ms.label is MacroLabel.UP

    def test_zero_tolerance_generic_state(self):
        generic = axis_eigenstate((0.31, 0.52, 0.79))
        grid = SearchGrid((0.4, 1.3), (0.7, 2.1), (0.5, 1.9))
        assert special_state_search(generic, grid, 0.0) == []

    def test_empty_grid(self):
        with pytest.raises(ConfigError):
            special_state_search(axis_eigenstate(Z), SearchGrid((), (), ()), 0.01)

    def test_results_rescore(self):
        system = axis_eigenstate(X)
        for hit in special_state_search(system, SearchGrid.regular(5, 5, 4), 0.05):
            again = score_point(system, Z, hit.theta, hit.polar, hit.azimuth, 2, 0.05)
            assert abs(again.confidence - hit.score) <= 1e-12
            assert again.label is hit.label


def test_born_check_rows():
    rows = born_check([0.0, math.pi / 2, math.pi], 400, make_rng(4))
    assert rows[0].frequency_up == 1.0 and rows[2].frequency_up == 0.0
    assert abs(rows[1].frequency_up - 0.5) <= 4 * rows[1].sigma
