import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcfp.mrp import Mrp, build_two_state
from dcfp.quantile import QuantileTable, midpoint_levels, qdp_solve, qdp_step

from conftest import deterministic_cycle, self_loop


def test_levels():
    np.testing.assert_allclose(midpoint_levels(4), [0.125, 0.375, 0.625, 0.875])


def test_self_loop_fixed_points():
    zero = QuantileTable(np.zeros((1, 5)))
    np.testing.assert_array_equal(qdp_step(self_loop(0.0), zero).theta, 0.0)
    table, last = qdp_solve(self_loop(1.0, 0.9), 5, 400)
    np.testing.assert_allclose(table.theta, 10.0, atol=1e-9)
    assert last < 1e-9


def test_step_from_zero_gives_reward():
    mrp = build_two_state(0.9)
    out = qdp_step(mrp, QuantileTable(np.zeros((2, 7))))
    np.testing.assert_array_equal(out.theta[0], 0.0)
    np.testing.assert_array_equal(out.theta[1], 1.0)


def test_zero_iterations_is_initial_table():
    table, last = qdp_solve(build_two_state(0.9), 4, 0)
    np.testing.assert_allclose(table.theta, 5.0, rtol=1e-15)
    assert last == 0.0
    table, _ = qdp_solve(build_two_state(0.9), 4, 0, lo=1.0, hi=2.0)
    np.testing.assert_array_equal(table.theta, 1.5)


def test_deterministic_mrp_recovers_exact_returns():
    mrp = deterministic_cycle(3, 0.8)
    table, _ = qdp_solve(mrp, 6, 300)
    v = mrp.value_function()
    np.testing.assert_allclose(table.theta, np.repeat(v[:, None], 6, axis=1), atol=1e-9)


def test_stochastic_reward_path_matches_brute_force(rng):
    mrp = Mrp(np.array([[0.5, 0.5], [0.2, 0.8]]), [[(0.0, 0.3), (1.0, 0.7)], 0.4], 0.6)
    theta = np.sort(rng.random((2, 5)) * 2.5, axis=1)
    out = qdp_step(mrp, QuantileTable(theta)).theta
    taus = midpoint_levels(5)
    for x in range(2):
        vals, wts = [], []
        for r, pr in zip(mrp.reward_atoms[x], mrp.reward_probs[x]):
            for y in range(2):
                for th in theta[y]:
                    vals.append(r + 0.6 * th)
                    wts.append(pr * mrp.transition[x, y] / 5)
        order = np.argsort(vals)
        cum = np.cumsum(np.array(wts)[order])
        expected = [np.array(vals)[order][np.argmax(cum >= t - 1e-12)] for t in taus]
        np.testing.assert_allclose(out[x], expected)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 20), gamma=st.floats(0.0, 0.99))
def test_step_properties(seed, m, gamma):
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(4), size=4)
    mrp = Mrp(P, rng.random(4), gamma)
    hi = 1 / (1 - gamma)
    theta = np.sort(rng.random((4, m)) * hi, axis=1)
    out = qdp_step(mrp, QuantileTable(theta)).theta
    assert np.all(np.diff(out, axis=1) >= 0)
    assert np.all(out.mean(axis=1) >= -1e-12) and np.all(out.mean(axis=1) <= hi + 1e-9)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 15), gamma=st.floats(0.0, 0.99))
def test_non_expansive_on_deterministic_transitions(seed, m, gamma):
    rng = np.random.default_rng(seed)
    mrp = deterministic_cycle(3, gamma, seed)
    a = np.sort(rng.random((3, m)) * 5, axis=1)
    b = np.sort(rng.random((3, m)) * 5, axis=1)
    before = np.max(np.abs(a - b))
    after = np.max(np.abs(qdp_step(mrp, QuantileTable(a)).theta - qdp_step(mrp, QuantileTable(b)).theta))
    assert after <= gamma * before + 1e-12


def test_csv_and_distributions(tmp_path):
    t = QuantileTable(np.array([[0.0, 1.0, 1.0]]))
    d = t.distributions()[0]
    np.testing.assert_allclose(d.probs, [1 / 3, 2 / 3])
    t.to_csv(tmp_path / "q.csv")
    lines = (tmp_path / "q.csv").read_text().splitlines()
    assert lines[0] == "state,tau,theta" and len(lines) == 4


def test_bad_arguments():
    with pytest.raises(ValueError):
        qdp_solve(build_two_state(), 0, 5)
    with pytest.raises(ValueError):
        QuantileTable(np.zeros(3))
