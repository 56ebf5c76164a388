import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcfp.mrp import (
    ENV_NAMES,
    GenerativeDataset,
    Mrp,
    build_chain,
    build_env,
    build_random_dirichlet,
    build_two_state,
    empirical_model,
    load_mrp,
    sample_dataset,
    save_mrp,
)

from conftest import deterministic_cycle


def test_chain_neighbours_have_equal_probability():
    mrp = build_chain()
    # state x2 (1-based) is index 1
    assert mrp.transition[1, 0] == 0.5
    assert mrp.transition[1, 2] == 0.5


def test_chain_rewards():
    mrp = build_chain()
    assert mrp.mean_rewards[9] == 1.0
    assert mrp.mean_rewards[4] == 0.0
    assert mrp.mean_rewards.sum() == 1.0


def test_chain_terminals_feed_zero_reward_sink():
    mrp = build_chain()
    assert mrp.n_states == 11
    assert mrp.transition[0, 10] == mrp.transition[9, 10] == mrp.transition[10, 10] == 1.0
    assert mrp.mean_rewards[10] == 0.0
    assert list(np.flatnonzero(mrp.terminal_mask)) == [0, 9]
    # from the right end the return is exactly 1
    assert mrp.value_function()[9] == pytest.approx(1.0)


def test_two_state_matrix():
    mrp = build_two_state()
    assert mrp.transition[0, 1] == pytest.approx(0.4)
    assert tuple(mrp.mean_rewards) == (0.0, 1.0)


@pytest.mark.parametrize("name", ENV_NAMES)
def test_rows_are_stochastic(name):
    P = build_env(name, 0.9).transition
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(P >= 0)


def test_random_env_shapes():
    low = build_random_dirichlet(5, 0.01, 0)
    high = build_random_dirichlet(5, 10.0, 0)
    assert low.n_states == high.n_states == 5
    # low concentration gives nearly one-hot rows, high concentration spreads mass
    assert low.transition.max(axis=1).mean() > 0.8
    assert high.transition.max(axis=1).max() < 0.6


def test_random_env_is_deterministic_in_seed():
    a = build_random_dirichlet(5, 0.01, 7)
    b = build_random_dirichlet(5, 0.01, 7)
    c = build_random_dirichlet(5, 0.01, 8)
    np.testing.assert_array_equal(a.transition, b.transition)
    np.testing.assert_array_equal(a.mean_rewards, b.mean_rewards)
    assert not np.array_equal(a.transition, c.transition)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 8), conc=st.floats(1e-3, 50), seed=st.integers(0, 2**32 - 1))
def test_dirichlet_rows_stochastic_property(n, conc, seed):
    mrp = build_random_dirichlet(n, conc, seed)
    np.testing.assert_allclose(mrp.transition.sum(axis=1), 1.0, atol=1e-12)


def test_invalid_mrps_rejected():
    with pytest.raises(ValueError):
        Mrp(np.array([[0.5, 0.4], [0, 1]]), [0, 0], 0.9)
    with pytest.raises(ValueError):
        Mrp(np.eye(2), [0, 0], 1.0)
    with pytest.raises(ValueError):
        Mrp(np.eye(2), [0, 2.0], 0.5)
    with pytest.raises(ValueError):
        Mrp(np.eye(2), [0], 0.5)
    with pytest.raises(ValueError):
        build_env("no_such_env")


def test_stochastic_rewards_normalized():
    mrp = Mrp(np.eye(2), [[(1.0, 0.25), (0.0, 0.75)], 0.5], 0.5)
    np.testing.assert_array_equal(mrp.reward_atoms[0], [0.0, 1.0])
    assert mrp.mean_rewards[0] == pytest.approx(0.25)
    assert not mrp.deterministic_rewards


def test_json_round_trip(tmp_path):
    mrp = build_chain(0.8)
    path = tmp_path / "chain.json"
    save_mrp(mrp, path)
    back = load_mrp(path)
    np.testing.assert_array_equal(back.transition, mrp.transition)
    np.testing.assert_array_equal(back.mean_rewards, mrp.mean_rewards)
    assert back.gamma == 0.8 and back.return_range() == (0.0, 1.0)
    assert build_env(str(path), 0.5).gamma == 0.5


def test_load_flat_transition(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"n_states": 2, "transition": [0, 1, 1, 0], "rewards": [0, 1], "gamma": 0.5}))
    mrp = load_mrp(path)
    assert mrp.transition[0, 1] == 1.0


def test_deterministic_transitions_sample_unique_successor():
    mrp = deterministic_cycle(4)
    ds = sample_dataset(mrp, 50, seed=3)
    expected = np.argmax(mrp.transition, axis=1)
    assert np.all(ds.next_states == expected[:, None])
    np.testing.assert_array_equal(empirical_model(ds).p_hat, mrp.transition)


def test_two_state_frequency_large_n():
    ds = sample_dataset(build_two_state(), 1_000_000, seed=0)
    assert abs(np.mean(ds.next_states[0] == 1) - 0.4) < 0.002
    np.testing.assert_allclose(empirical_model(ds).p_hat, build_two_state().transition, atol=0.005)


def test_single_sample_per_state():
    ds = sample_dataset(build_chain(), 1, seed=0)
    assert ds.next_states.shape == (11, 1)


def test_sample_dataset_is_pure():
    mrp = build_env("high_random")
    a = sample_dataset(mrp, 100, 5)
    b = sample_dataset(mrp, 100, 5)
    np.testing.assert_array_equal(a.next_states, b.next_states)


def test_counting():
    mrp = build_two_state()
    ds = GenerativeDataset(4, np.array([[1, 1, 0, 1], [0, 0, 0, 0]]),
                           np.zeros((2, 4)), 0, mrp.gamma, mrp.terminal_mask, None, "t")
    model = empirical_model(ds)
    assert model.p_hat[0, 1] == 0.75
    np.testing.assert_array_equal(model.p_hat[1], [1.0, 0.0])


def test_sample_dataset_rejects_bad_n():
    with pytest.raises(ValueError):
        sample_dataset(build_two_state(), 0, 0)
