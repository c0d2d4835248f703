import math

import numpy as np
import pytest
from scipy import stats

from accelpt import AnnealingPath, HmcSettings, hmc_step
from accelpt.diagnostics import batch_means_se
from accelpt.errors import ConfigError
from accelpt.explorers import ExplorerStats, reference_resample
from accelpt.targets import gaussian, manywell


def _chain(path, settings, n, seed=0, M=1):
    g = np.random.default_rng(seed)
    x = np.zeros((M, path.dim))
    out = np.empty((n, M, path.dim))
    for i in range(n):
        x, _ = hmc_step(path, 1.0, x, settings, g)
        out[i] = x
    return out


@pytest.mark.parametrize("kw", [dict(step_size=0.0), dict(step_size=-1.0), dict(leapfrog_steps=0),
                                dict(steps_per_iteration=-1)])
def test_settings_validation(kw):
    with pytest.raises(ConfigError):
        HmcSettings(**kw)


def test_gaussian_mean_near_zero():
    p = AnnealingPath(gaussian(2))
    xs = _chain(p, HmcSettings(0.3, 5), 2000, M=20)[200:]
    for j in range(2):
        series = xs[:, :, j].mean(axis=1)
        assert abs(series.mean()) < 4 * batch_means_se(series)


def test_ks_against_normal_cdf():
    p = AnnealingPath(gaussian(1))
    xs = _chain(p, HmcSettings(0.5, 5), 1000, M=110)[90:].reshape(-1)
    assert len(xs) >= 100_000
    stat = stats.kstest(xs, "norm").statistic
    crit = 1.95 / math.sqrt(len(xs))  # 0.1% critical value
    assert stat < crit


def test_harmonic_energy_error_small(rng):
    p = AnnealingPath(gaussian(3))
    M = 2000
    x = rng.standard_normal((M, 3))
    mom = rng.standard_normal((M, 3))
    # accept everything to measure the raw energy error through the trajectory
    xn, acc = hmc_step(p, 1.0, x, HmcSettings(0.1, 5), momenta=mom, log_u=np.full(M, -np.inf))
    assert acc.all()
    # reproduce the leapfrog to read off the final momentum
    q, pm = x.copy(), mom - 0.05 * x
    for ell in range(5):
        q = q + 0.1 * pm
        pm = pm - (0.1 if ell < 4 else 0.05) * q
    np.testing.assert_allclose(q, xn, atol=1e-12)
    h0 = 0.5 * np.sum(x**2 + mom**2, axis=1)
    h1 = 0.5 * np.sum(q**2 + pm**2, axis=1)
    assert np.mean(np.abs(h1 - h0)) <= 1e-2


def test_displacement_autocorrelation():
    p = AnnealingPath(gaussian(1))
    xs = _chain(p, HmcSettings(0.5, 5), 5000)[:, 0, 0]
    dx = np.diff(xs)
    dx = dx[dx != 0]
    assert abs(np.corrcoef(dx[:-1], dx[1:])[0, 1]) < 0.9


def test_rejection_leaves_point(rng):
    p = AnnealingPath(gaussian(2))
    x = rng.standard_normal((5, 2))
    xn, acc = hmc_step(p, 1.0, x, HmcSettings(0.1, 3), momenta=np.ones((5, 2)), log_u=np.zeros(5) + 50)
    assert not acc.any()
    assert np.array_equal(xn, x)


def test_gradient_counter_is_L_plus_one(rng):
    p = AnnealingPath(gaussian(2))
    s = ExplorerStats()
    s.ensure(4)
    hmc_step(p, 0.5, rng.standard_normal((4, 2)), HmcSettings(0.1, 7), rng, stats=s)
    assert s.gradient_evals == 4 * 8
    assert p.evals.value == 4 * 8
    assert np.all(s.proposals == 1)


def test_nonfinite_rejects_and_counts():
    p = AnnealingPath(manywell(2))
    s = ExplorerStats()
    s.ensure(1)
    x = np.array([[1e80, 0.0]])
    xn, acc = hmc_step(p, 1.0, x, HmcSettings(0.1, 2), momenta=np.ones((1, 2)), log_u=np.zeros(1), stats=s)
    assert not acc[0]
    assert s.nonfinite == 1
    assert np.array_equal(xn, x)


def test_reference_resample_moments():
    t = gaussian(2)
    x = reference_resample(t, np.random.default_rng(3), 100_000)
    se = 1 / math.sqrt(len(x))
    assert np.all(np.abs(x.mean(axis=0)) < 4 * se)
    assert np.all(np.abs(np.diag(np.cov(x.T)) - 1) < 4 * math.sqrt(2) * se)
    y = reference_resample(t, np.random.default_rng(3), 100_000)
    assert np.array_equal(x, y)


def test_reference_without_sampler_errors(rng):
    with pytest.raises(ConfigError):
        reference_resample(manywell(2), rng)
