from pathlib import Path

import pytest

from spinledger.cli import main

from spinledger.experiments import canonical_chain, run_conservation_chain
from spinledger.rng import make_rng, spawn_seeds
from spinledger.schemes import StandardCollapse

SAMPLED_TRIALS = 10_000
DATA = Path(__file__).parent / "data"
KICK_ARGV = ["special-search", "--distribution", "cauchy", "--scale", "0.1", "--trials", "10000", "--seed", "1"]

_criteria: list[str] = []


@pytest.fixture(scope="session")
def criterion():
    """Record one pass/fail line per acceptance criterion."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}" + (f" ({detail})" if detail else "")
        print(line)
        _criteria.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for line in _criteria:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sampled_chain_outcomes():
    """Pointer labels of the x, z, x chain under collapse, one tuple per seeded trial."""
    out = []
    for seed in spawn_seeds(20241, SAMPLED_TRIALS):
        _, record = run_conservation_chain(canonical_chain(seed), StandardCollapse(), make_rng(seed), track=False)
        out.append(tuple(label for t, _, label in record.labels() if t > 0))
    return out


@pytest.fixture(scope="session")
def kick_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("kicks")
    assert main([*KICK_ARGV, "--out", str(out)]) == 0
    return KICK_ARGV, out
