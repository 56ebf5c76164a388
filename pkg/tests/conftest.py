import numpy as np
import pytest

from dcfp.categorical import CdfTable, make_grid
from dcfp.metrics import DiscreteDistribution
from dcfp.mrp import Mrp


def self_loop(reward: float = 0.0, gamma: float = 0.9) -> Mrp:
    return Mrp(np.ones((1, 1)), [reward], gamma, name="self_loop")


def deterministic_cycle(n: int = 3, gamma: float = 0.9, seed: int = 0) -> Mrp:
    rng = np.random.default_rng(seed)
    P = np.roll(np.eye(n), 1, axis=1)
    return Mrp(P, rng.random(n), gamma, name="cycle")


def random_cdf_values(rng, n_states: int, m: int) -> np.ndarray:
    """Random valid CDF rows, including some point masses."""
    p = rng.dirichlet(np.full(m, rng.choice([0.1, 1.0])), size=n_states)
    F = np.cumsum(p, axis=1)
    F[:, -1] = 1.0
    return np.minimum(F, 1.0)


def random_table(rng, n_states: int, grid) -> CdfTable:
    return CdfTable(random_cdf_values(rng, n_states, grid.m), grid)


def random_distribution(rng, lo: float, hi: float, k: int | None = None) -> DiscreteDistribution:
    k = int(rng.integers(1, 8)) if k is None else k
    atoms = rng.uniform(lo, hi, size=k)
    if rng.random() < 0.2:
        atoms[0] = lo
    return DiscreteDistribution.from_weighted(atoms, rng.dirichlet(np.ones(k)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid3():
    return make_grid(3, 0.5)


ACCEPTANCE_LINES: list[str] = []


def record(name: str, ok: bool, detail: str, status: str | None = None) -> None:
    """Remember one acceptance outcome; printed in the terminal summary."""
    status = status or ("PASS" if ok else "FAIL")
    line = f"[{status}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
