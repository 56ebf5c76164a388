import math

import numpy as np
import pytest

from dcfp.categorical import CdfTable, build_operator, cramer_rows, dcfp_solve, make_grid
from dcfp.mrp import build_two_state
from dcfp.sccdf import (
    SingleSampleOperator,
    check_corollary_bound,
    check_scc_inequality,
    coupled_gaps,
    draw_single_sample_operator,
    global_variation_mc,
    local_variation_exact,
    phi_to_csv,
    sample_phi,
    sample_phi_batch,
    scc_correction,
    variation_vectors,
)

from conftest import deterministic_cycle, random_table


def setup(mrp, m):
    g = make_grid(m, mrp.gamma)
    op = build_operator(mrp, g)
    fq, _ = dcfp_solve(mrp, g, op=op)
    return op, fq


def test_deterministic_model_single_sample_is_exact(rng):
    op, fq = setup(deterministic_cycle(4, 0.9), 20)
    ss = draw_single_sample_operator(op, rng)
    np.testing.assert_array_equal(ss.transition, op.transition)
    t = random_table(rng, 4, op.grid)
    np.testing.assert_allclose(ss.apply(t).values, op.apply(t.values), atol=1e-14)
    np.testing.assert_allclose(sample_phi(op, fq, 25, rng).table.values, fq.values, atol=1e-12)


def test_successor_frequency(rng):
    op, _ = setup(build_two_state(0.9), 10)
    hits = sum(draw_single_sample_operator(op, rng).successors[0] == 1 for _ in range(10_000))
    assert abs(hits / 10_000 - 0.4) <= 3 * math.sqrt(0.24 / 10_000)


def test_single_sample_closure(rng):
    op, _ = setup(build_two_state(0.9), 30)
    for _ in range(20):
        ss = draw_single_sample_operator(op, rng)
        assert ss.apply(random_table(rng, 2, op.grid)).is_valid()


def test_depth_one_support_is_enumerable(rng):
    op, fq = setup(build_two_state(0.9), 12)
    candidates = []
    for s0 in range(2):
        for s1 in range(2):
            candidates.append(SingleSampleOperator(op, np.array([s0, s1])).apply(fq).values)
    phis = sample_phi_batch(op, fq, 200, 1, rng)
    for phi in phis:
        assert min(np.max(np.abs(phi - c)) for c in candidates) < 1e-14
    seen = {int(np.argmin([np.max(np.abs(phi - c)) for c in candidates])) for phi in phis}
    assert seen == {0, 1, 2, 3}


def test_phi_expectation_exact_by_enumeration():
    op, fq = setup(build_two_state(0.9), 15)
    Q = op.transition
    total = np.zeros_like(fq.values)
    for first in np.ndindex(2, 2):
        for second in np.ndindex(2, 2):
            w = np.prod([Q[x, s] for x, s in enumerate(first)]) * np.prod([Q[x, s] for x, s in enumerate(second)])
            t = SingleSampleOperator(op, np.array(second)).apply(SingleSampleOperator(op, np.array(first)).apply(fq))
            total += w * t.values
    np.testing.assert_allclose(total, fq.values, atol=1e-14)


def test_phi_samples_valid_and_centered(rng):
    op, fq = setup(build_two_state(0.9), 15)
    phis = sample_phi_batch(op, fq, 2000, None, rng)
    assert all(CdfTable(p, op.grid).is_valid(1e-9) for p in phis)
    # tail cells are extremely skewed, so compare against the largest standard error
    se = phis.std(axis=0, ddof=1) / math.sqrt(len(phis))
    assert np.max(np.abs(phis.mean(axis=0) - fq.values)) <= 5 * se.max()


def test_local_variation_bounds_and_deterministic_case(rng):
    op, fq = setup(deterministic_cycle(3, 0.9), 30)
    np.testing.assert_allclose(local_variation_exact(op, fq), 0.0, atol=1e-20)
    op, fq = setup(build_two_state(0.9), 100)
    sigma = local_variation_exact(op, fq)
    assert np.all(sigma >= 0) and np.all(sigma <= 10.0)


def test_local_variation_matches_sampling(rng):
    op, fq = setup(build_two_state(0.9), 50)
    n = 20_000
    succ = (rng.random((n, 2))[:, :, None] >= np.cumsum(op.transition, axis=1)[None]).sum(axis=2)
    d2 = np.zeros((n, 2))
    for x, b in enumerate(op.blocks):
        backed = (b @ fq.values[succ[:, x]].T).T
        d2[:, x] = cramer_rows(backed, fq.values[x][None, :], op.grid) ** 2
    est, se = d2.mean(axis=0), d2.std(axis=0, ddof=1) / math.sqrt(n)
    assert np.all(np.abs(est - local_variation_exact(op, fq)) <= 3 * se)


def test_global_variation(rng):
    op, fq = setup(deterministic_cycle(3, 0.9), 20)
    mean, _, _ = global_variation_mc(op, fq, 50, 30, rng)
    np.testing.assert_allclose(mean, 0.0, atol=1e-20)
    op, fq = setup(build_two_state(0.9), 40)
    a, sa, _ = global_variation_mc(op, fq, 1000, None, rng)
    b, sb, _ = global_variation_mc(op, fq, 2000, None, rng)
    assert np.all(a >= 0) and np.all(a <= 10.0)
    assert np.all(np.abs(a - b) <= 3 * np.hypot(sa, sb))
    with pytest.raises(ValueError):
        global_variation_mc(op, fq, 0, 5, rng)


def test_scc_inequality_deterministic_slack_is_correction(rng):
    op, fq = setup(deterministic_cycle(3, 0.8), 25)
    vv = variation_vectors(op, fq, 20, 10, rng)
    slack, _ = check_scc_inequality(op, vv)
    np.testing.assert_allclose(slack, scc_correction(25, 0.8), rtol=1e-12)


@pytest.mark.slow
def test_scc_inequality_two_state_large_m(rng):
    op, fq = setup(build_two_state(0.9), 1000)
    vv = variation_vectors(op, fq, 3000, None, rng)
    slack, se = check_scc_inequality(op, vv)
    assert np.all(slack >= -3 * se)
    assert np.all(np.isfinite(slack)) and np.all(slack <= 10.0 + scc_correction(1000, 0.9))


def test_corollary_bound(rng):
    op, fq = setup(deterministic_cycle(3, 0.9), 401)
    value, ok = check_corollary_bound(op, local_variation_exact(op, fq))
    assert value == pytest.approx(0.0, abs=1e-15) and ok
    values = []
    for m in (401, 801, 1601):
        op, fq = setup(build_two_state(0.9), m)
        value, ok = check_corollary_bound(op, local_variation_exact(op, fq))
        assert ok and value <= 20.0
        values.append(value)
    op, fq = setup(build_two_state(0.9), 100)
    with pytest.raises(ValueError):
        check_corollary_bound(op, local_variation_exact(op, fq))


def test_coupled_composites_contract(rng):
    op, _ = setup(build_two_state(0.9), 30)
    fa, fb = random_table(rng, 2, op.grid), random_table(rng, 2, op.grid)
    gaps = coupled_gaps(op, fa, fb, 40, 200, rng)
    prev, nxt = gaps[:, :-1], gaps[:, 1:]
    mask = prev > 1e-12
    assert np.all(nxt[mask] <= math.sqrt(0.9) * prev[mask] + 1e-12)


def test_csv_outputs(tmp_path, rng):
    op, fq = setup(build_two_state(0.9), 8)
    vv = variation_vectors(op, fq, 10, 5, rng)
    slack, _ = check_scc_inequality(op, vv)
    vv.to_csv(tmp_path / "v.csv", slack)
    assert (tmp_path / "v.csv").read_text().splitlines()[0] == "state,sigma,sigma_global,stderr,slack"
    phi_to_csv(sample_phi_batch(op, fq, 2, 5, rng), op.grid, tmp_path / "p.csv")
    assert len((tmp_path / "p.csv").read_text().splitlines()) == 1 + 2 * 2 * 8
