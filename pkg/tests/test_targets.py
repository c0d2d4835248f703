import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import logsumexp

from accelpt import build_target
from accelpt.errors import ConfigError
from accelpt.targets import double_well_particles, gaussian, manywell, manywell_pair_log_normalizer, mixture

from conftest import central_fd


def _points(t, rng, n):
    if t.name == "gmm":
        return t.sample(rng, n) + 0.02 * rng.standard_normal((n, t.dim))
    return rng.normal(0, 1.5, size=(n, t.dim))


@pytest.mark.parametrize("name,dim", [("gaussian", 3), ("gmm", 10), ("manywell", 32), ("dw4", 8)])
def test_gradient_matches_finite_differences(name, dim, rng):
    t = build_target(name, dim=dim)
    for x in _points(t, rng, 100):
        g = t.gradient(x)
        fd = central_fd(t.potential, x)
        scale = np.maximum(np.abs(g), 1.0)
        assert np.all(np.abs(g - fd) / scale < 1e-4)


@pytest.mark.parametrize("name,dim", [("gaussian", 2), ("gmm", 5)])
def test_potential_finite_at_sampler_points(name, dim, rng):
    t = build_target(name, dim=dim)
    assert np.all(np.isfinite(t.potential(t.sample(rng, 1000))))


def test_gaussian_at_origin():
    t = gaussian(4)
    assert t.potential(np.zeros(4)) == pytest.approx(2 * math.log(2 * math.pi), abs=1e-14)
    assert np.all(t.gradient(np.zeros(4)) == 0.0)


def test_manywell_examples():
    assert manywell(32).potential(np.zeros(32)) == 0.0
    np.testing.assert_allclose(manywell(2).gradient(np.array([1.0, 1.0])), [-8.5, 1.0], atol=1e-12)


def test_dw4_zero_at_equal_distances():
    # square with side d0 has four sides d0 but diagonals d0*sqrt(2); use a
    # regular tetrahedron instead, which needs 3 spatial dimensions
    t = double_well_particles(n_particles=4, spatial_dim=3, com_tether=False)
    d0 = 4.0
    tet = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], float)
    tet *= d0 / np.linalg.norm(tet[0] - tet[1])
    assert t.potential(tet.ravel()) == pytest.approx(0.0, abs=1e-12)


def test_dw4_pair_energy_sum():
    t = double_well_particles(com_tether=False)
    x = np.array([0.0, 0.0, 3.0, 0.0, 0.0, 5.0, 2.0, 2.0])
    p = x.reshape(4, 2)
    want = 0.0
    for i in range(4):
        for j in range(i + 1, 4):
            r = np.linalg.norm(p[i] - p[j]) - 4.0
            want += -4.0 * r**2 + 0.9 * r**4
    assert t.potential(x) == pytest.approx(want, rel=1e-12)


def test_dw4_tether_keeps_translation_free_part():
    t0 = double_well_particles(com_tether=False)
    t1 = double_well_particles()
    x = np.random.default_rng(0).normal(size=8)
    shift = np.tile([0.7, -0.3], 4)
    assert t0.potential(x + shift) == pytest.approx(t0.potential(x), rel=1e-12)
    assert t1.potential(x + shift) != pytest.approx(t1.potential(x))


def test_gmm_first_mean_matches_dense_logsumexp():
    t = build_target("gmm", dim=10, seed=0)
    x = t.means[0]
    v = t.var[:, 0]
    logp = np.log(1 / 40) - 0.5 * np.sum((x - t.means) ** 2, axis=1) / v - 5 * np.log(2 * np.pi * v)
    assert t.potential(x) == pytest.approx(-logsumexp(logp), rel=1e-12)


def test_gmm_modes_inside_unit_box():
    t = build_target("gmm", dim=10, seed=0)
    assert np.all(np.abs(t.means) <= 1.0)
    assert np.all(t.means[:, 2:] == 0.0)


def test_mixture_normaliser_by_quadrature():
    t = mixture([[0.0, 1.0], [-1.0, 0.5]], [0.3, 1.2], weights=[0.3, 0.7])
    val, _ = integrate.dblquad(lambda y, x: math.exp(-t.potential(np.array([x, y]))),
                               -9, 9, -9, 9, epsabs=1e-10)
    assert abs(math.log(val) - t.log_normalizer) < 1e-6


def test_manywell_normaliser_stable_under_refinement():
    f = lambda x: math.exp(-x**4 + 6 * x**2 + 0.5 * x)
    coarse, _ = integrate.quad(f, -10, 10, epsrel=1e-8, limit=100)
    fine, _ = integrate.quad(f, -12, 12, epsabs=0, epsrel=1e-13, limit=400)
    ref = math.log(fine) + 0.5 * math.log(2 * math.pi)
    assert abs(math.log(coarse) + 0.5 * math.log(2 * math.pi) - ref) < 1e-8
    assert abs(manywell_pair_log_normalizer() - ref) < 1e-8
    assert manywell(32).log_normalizer == pytest.approx(16 * ref, abs=1e-7)


def test_counters_are_exact():
    t = gaussian(2)
    t.potential(np.zeros((7, 2)))
    t.gradient(np.zeros(2))
    t.potential_and_gradient(np.zeros((3, 2)))
    assert t.potential_evals.value == 10
    assert t.gradient_evals.value == 4
    t.reset_counters()
    assert t.potential_evals.value == 0


def test_exact_sampler_moments(rng):
    t = gaussian(2)
    x = t.sample(rng, 100_000)
    se = 1 / math.sqrt(len(x))
    assert np.all(np.abs(x.mean(axis=0)) < 4 * se)
    assert np.all(np.abs(x.var(axis=0) - 1) < 4 * math.sqrt(2) * se)


def test_sampler_deterministic():
    t = gaussian(3)
    a = t.sample(np.random.default_rng(5), 10)
    b = t.sample(np.random.default_rng(5), 10)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("kwargs", [dict(name="nope", dim=2), dict(name="gmm", dim=1),
                                    dict(name="manywell", dim=3), dict(name="dw4", dim=5)])
def test_bad_targets(kwargs):
    with pytest.raises(ConfigError):
        build_target(**kwargs)


def test_no_exact_sampler_for_manywell(rng):
    with pytest.raises(ConfigError):
        manywell(4).sample(rng, 3)


def test_wrong_dimension():
    with pytest.raises(ValueError):
        gaussian(3).potential(np.zeros(2))
