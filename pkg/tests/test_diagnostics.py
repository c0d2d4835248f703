import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from accelpt import (Accelerator, AnnealingPath, SwapRecords, compute_normalized, estimate_rejections,
                     global_barrier, round_trip_rate_formula, run, skl_estimate, summarize,
                     uniform_schedule)
from accelpt.diagnostics import simulate_round_trips, stationary_rejections, summarize_records
from accelpt.targets import gaussian


def _records(pairs, alphas, wf=None, wb=None):
    n = len(alphas)
    it = np.where(np.asarray(pairs) % 2 == 1, 1, 2) + 2 * np.arange(n)
    wf = np.zeros(n) if wf is None else wf
    wb = np.zeros(n) if wb is None else wb
    return SwapRecords.from_arrays(it, pairs, wf, wb, alphas, np.asarray(alphas) > 0.5)


@pytest.mark.parametrize("alphas,want", [([1, 1, 1], 0.0), ([0, 0], 1.0), ([1, 0.5, 0.5, 0], 0.5)])
def test_rejection_examples(alphas, want):
    r, se, counts = estimate_rejections(_records([1] * len(alphas), alphas), 1)
    assert r[0] == pytest.approx(want)
    assert counts[0] == len(alphas)


def test_missing_pair_is_nan():
    r, _, counts = estimate_rejections(_records([1, 1], [1, 0]), 3)
    assert np.isnan(r[1]) and np.isnan(r[2]) and counts[1] == 0


@pytest.mark.parametrize("r,want", [([0, 0, 0], 0.0), ([0.25, 0.25], 0.5)])
def test_global_barrier(r, want):
    assert global_barrier(r) == want


@pytest.mark.parametrize("r,want", [([0.0], 0.5), ([0.5, 0.5], 1 / 6)])
def test_round_trip_formula(r, want):
    assert round_trip_rate_formula(r) == pytest.approx(want)


def test_round_trip_formula_degenerate():
    with pytest.warns(RuntimeWarning):
        assert round_trip_rate_formula([0.2, 1.0]) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 0.9), min_size=1, max_size=10), st.integers(0, 9), st.floats(1e-3, 0.09))
def test_formula_decreasing_in_each_rejection(r, i, h):
    i = i % len(r)
    up = list(r)
    up[i] += h
    assert round_trip_rate_formula(up) < round_trip_rate_formula(r)


def test_formula_matches_simulation_n30():
    r = np.random.default_rng(3).uniform(0, 0.4, 30)
    T = 1_000_000
    tau = simulate_round_trips(r, T, seed=1) / T
    assert abs(tau / round_trip_rate_formula(r) - 1) < 0.02


@pytest.mark.parametrize("R,kind,K,want", [(17, "identity", 0, 8.5), (1743, "langevin_bridge", 5, 290.5),
                                           (194, "affine_flow", 1, 97.0)])
def test_compute_normalized(R, kind, K, want):
    assert compute_normalized(R, kind, K) == want


def test_skl_constant_work():
    s = skl_estimate(np.full(10, 3.0), np.full(10, 3.0))
    assert s.skl == 0.0


def test_skl_gaussian_pair(gauss_path, rng):
    # pi^0 = N(0,1), pi^1 = N(1,1): W = x - 1/2, forward mean 1/2, backward mean -1/2
    n = 100_000
    x = rng.normal(size=(n, 1))
    y = 1.0 + rng.normal(size=(n, 1))
    p = Accelerator().propose(gauss_path, uniform_schedule(1), 1, x, y)
    s = skl_estimate(p.work_forward, p.work_backward, delta_f=0.0)
    assert abs(s.skl - 0.5) < 4 * s.se
    assert abs(s.kl_forward - 0.5) < 0.02 and abs(s.kl_backward - 0.5) < 0.02


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(0.3, 3), st.integers(0, 1000))
def test_skl_nonnegative(mu, sd, seed):
    g = np.random.default_rng(seed)
    path = AnnealingPath(gaussian(1, mu, sd))
    n = 5000
    xl = path.marginal(0.0).sample(g, n)
    xh = path.marginal(1.0).sample(g, n)
    p = Accelerator().propose(path, uniform_schedule(1), 1, xl, xh)
    s = skl_estimate(p.work_forward, p.work_backward)
    assert s.skl > -3 * s.se


def test_barrier_additivity():
    g = np.random.default_rng(0)
    a = _records(g.integers(1, 4, 100), g.random(100))
    b = _records(g.integers(1, 4, 60), g.random(60))
    ra, _, ca = estimate_rejections(a, 3)
    rb, _, cb = estimate_rejections(b, 3)
    rab, _, _ = estimate_rejections(SwapRecords.concat([a, b]), 3)
    want = (ra * ca + rb * cb) / (ca + cb)
    np.testing.assert_allclose(rab, want)
    assert global_barrier(rab) == pytest.approx(want.sum())


def test_summary_fields():
    path = AnnealingPath(gaussian(1, 2.0))
    res = run(path, uniform_schedule(4), T=500, seed=0)
    dg = summarize(res)
    assert dg.global_barrier == pytest.approx(np.sum(dg.rejection))
    assert 0 < dg.tau_formula <= 0.5
    assert dg.round_trips == res.round_trips
    assert dg.cn_round_trips == res.round_trips / 2
    d = dg.to_dict()
    assert set(d["pairs"]) == {"1", "2", "3", "4"}
    again = summarize_records(res.records, 4, res.T, res.burn_in, res.round_trips, res.round_trip_trace,
                              explorer_acceptance=res.explorer_stats.acceptance_rates().tolist(),
                              counters=res.counters)
    assert again.to_json() == dg.to_json()


def test_stationary_rejection_gaussian(gauss_path):
    # W_bwd - W_fwd = x - y ~ N(-1, 2), so r = 1 - E min(1, exp(Z))
    want = 1 - integrate.quad(lambda z: min(1.0, math.exp(z)) * stats.norm.pdf(z, -1, math.sqrt(2)),
                              -30, 30, points=[0.0])[0]
    r, se = stationary_rejections(gauss_path, uniform_schedule(1), Accelerator(), 200_000,
                                  np.random.default_rng(0))
    assert r[0] == pytest.approx(want, abs=4 * se[0])
