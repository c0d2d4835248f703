import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from accelpt import (Accelerator, AffineFlowParams, AnnealingPath, LangevinBridgeParams, Schedule,
                     SwapRecords, WorkLog, averaged_estimate, backward_estimate, forward_estimate, run,
                     uniform_schedule)
from accelpt.free_energy import _logmeanexp, estimate, subsample_estimates
from accelpt.targets import gaussian

HALF = Schedule((0.0, 0.5, 1.0))


def _log_z(path, beta):
    val, _ = integrate.quad(lambda x: math.exp(-path.potential_at(beta, np.array([x]))), -20, 20,
                            epsabs=0, epsrel=1e-12, limit=200)
    return math.log(val)


def _iid_work(path, sch, n, g, acc=None, pairs=None):
    """Stationary work draws for the pairs of ``sch`` (all by default)."""
    acc = acc or Accelerator()
    b = sch.array()
    fw, bw = [], []
    for k in pairs or range(1, sch.N + 1):
        xl = path.marginal(b[k - 1]).sample(g, n)
        xh = path.marginal(b[k]).sample(g, n)
        p = acc.propose(path, sch, np.full(n, k), xl, xh, rng=g)
        fw.append(p.work_forward)
        bw.append(p.work_backward)
    return WorkLog.from_arrays(fw, bw)


def test_zero_work():
    log = WorkLog.from_arrays([np.zeros(5), np.zeros(3)], [np.zeros(5), np.zeros(3)])
    assert forward_estimate(log) == 0.0 and backward_estimate(log) == 0.0


@pytest.mark.parametrize("c", [-3.0, 0.25, 700.0])
def test_constant_work(c):
    log = WorkLog.from_arrays([np.full(7, c)], [np.full(9, c)])
    assert forward_estimate(log) == pytest.approx(c, abs=1e-12)
    assert backward_estimate(log) == pytest.approx(c, abs=1e-12)
    assert averaged_estimate(log) == pytest.approx(c, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-500, 500), min_size=1, max_size=50), st.floats(-1e3, 1e3))
def test_logmeanexp_identities(a, c):
    a = np.array(a)
    assert _logmeanexp(a + c) == pytest.approx(_logmeanexp(a) + c, abs=1e-9 * (1 + abs(c)))
    assert a.max() - math.log(len(a)) - 1e-9 <= _logmeanexp(a) <= a.max() + 1e-9
    assert _logmeanexp(a) >= a.mean() - 1e-9  # Jensen


def test_large_work_no_overflow():
    log = WorkLog.from_arrays([np.array([1000.0, 1001.0])], [np.array([-1000.0, 900.0])])
    assert np.isfinite(forward_estimate(log)) and np.isfinite(backward_estimate(log))


def test_empty_pair_errors():
    with pytest.raises(ValueError):
        forward_estimate(WorkLog.from_arrays([np.zeros(0)], [np.zeros(0)]))


def test_langevin_bridge_matches_analytic():
    path = AnnealingPath(gaussian(1, 1.0, 0.6))
    want = _log_z(path, 0.0) - _log_z(path, 0.5)
    g = np.random.default_rng(0)
    n = 100_000
    acc = Accelerator("langevin_bridge", 5, bridge=LangevinBridgeParams(0.8))
    log = _iid_work(path, HALF, n, g, acc, pairs=[1])
    ef = np.exp(-log.forward[0])
    se_f = ef.std() / (math.sqrt(n) * ef.mean())
    assert abs(forward_estimate(log) - want) < 4 * se_f
    eb = np.exp(log.backward[0])
    se_b = eb.std() / (math.sqrt(n) * eb.mean())
    assert abs(backward_estimate(log) - want) < 4 * se_b


@pytest.mark.parametrize("d", [1, 5])
@pytest.mark.parametrize("T", [2, 3, 50])
def test_exact_flow_recovers_delta_f(d, T):
    g = np.random.default_rng(d)
    mu, sd = g.normal(size=d), np.exp(g.normal(0, 0.3, size=d))
    path = AnnealingPath(gaussian(d, mu, sd))
    flow = AffineFlowParams(mu[None], np.log(sd)[None])
    res = run(path, uniform_schedule(1), Accelerator("affine_flow", 1, flow=flow), T=T, seed=T, burn_in=0)
    e = estimate(WorkLog.from_records(res.records, 1))
    assert abs(e.delta_f) <= 1e-10
    assert e.delta_f_forward == pytest.approx(e.delta_f_backward, abs=1e-10)
    assert np.all(res.records.column("accepted"))


def test_exact_flow_zero_variance_across_seeds():
    path = AnnealingPath(gaussian(2, [1.0, -1.0], [2.0, 0.5]))
    flow = AffineFlowParams([[1.0, -1.0]], np.log([[2.0, 0.5]]))
    vals = []
    for seed in range(5):
        res = run(path, uniform_schedule(1), Accelerator("affine_flow", 1, flow=flow), T=20, seed=seed)
        vals.append(averaged_estimate(WorkLog.from_records(res.records, 1, res.burn_in)))
    assert np.ptp(vals) < 1e-12


def test_jensen_ordering():
    path = AnnealingPath(gaussian(1, 2.0, 0.5))
    want = _log_z(path, 0.0) - _log_z(path, 0.5) + _log_z(path, 0.5) - _log_z(path, 1.0)
    f, b = [], []
    for seed in range(30):
        log = _iid_work(path, HALF, 200, np.random.default_rng(seed))
        f.append(forward_estimate(log))
        b.append(backward_estimate(log))
    f, b = np.array(f), np.array(b)
    se_f, se_b = f.std(ddof=1) / math.sqrt(30), b.std(ddof=1) / math.sqrt(30)
    assert f.mean() >= want - 3 * se_f
    assert b.mean() <= want + 3 * se_b


def test_consistency_gap_shrinks():
    path = AnnealingPath(gaussian(1, 1.0, 0.7))
    gaps = []
    for n in (1_000, 10_000, 100_000):
        gap = [abs(forward_estimate(log) - backward_estimate(log))
               for log in (_iid_work(path, HALF, n, np.random.default_rng(s)) for s in range(8))]
        gaps.append(np.mean(gap))
    assert gaps[0] > gaps[1] > gaps[2]


def test_from_records_checks_parity():
    rec = SwapRecords.from_arrays([1, 2], [1, 1], [0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [True, True])
    with pytest.raises(ValueError):
        WorkLog.from_records(rec, 1)


def test_from_records_uses_realised_counts():
    res = run(AnnealingPath(gaussian(1, 1.0)), uniform_schedule(3), T=11, seed=0, burn_in=0)
    log = WorkLog.from_records(res.records, 3)
    assert [len(f) for f in log.forward] == [6, 5, 6]


def test_subsample_and_boxes():
    g = np.random.default_rng(0)
    log = WorkLog.from_arrays([g.normal(size=3000), g.normal(size=500)], [g.normal(size=3000), g.normal(size=500)])
    sub = log.subsample(1000, g)
    assert [len(f) for f in sub.forward] == [1000, 500]
    assert len(np.unique(sub.iterations[0])) == 1000
    box = subsample_estimates(log, 30, 1000, seed=1)
    assert box.shape == (30, 3)
    np.testing.assert_allclose(box[:, 2], 0.5 * (box[:, 0] + box[:, 1]))
    assert np.array_equal(box, subsample_estimates(log, 30, 1000, seed=1))


def test_result_json_fields():
    e = estimate(WorkLog.from_arrays([np.zeros(3)], [np.ones(3)]))
    d = e.to_dict()
    assert d["log_z_avg"] == -d["delta_f_avg"]
    assert d["log_z_avg"] == pytest.approx(-0.5)
    assert d["pairs"]["1"] == {"forward": 0.0, "backward": pytest.approx(1.0)}
