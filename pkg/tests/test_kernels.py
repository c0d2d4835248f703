"""The numba kernels and the numpy fallback must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from accelpt import build_target, kernels
from accelpt._backend import HAVE_NUMBA
from accelpt.targets import mixture

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")

TARGETS = [("gaussian", 3), ("gmm", 10), ("manywell", 8), ("dw4", 8)]


def _target(name, dim):
    if name == "gaussian":
        # diagonal, non-isotropic single component
        return mixture([[0.5, -1.0, 2.0]], [[0.3, 1.0, 4.0]])
    return build_target(name, dim=dim)


@pytest.mark.parametrize("name,dim", TARGETS)
@pytest.mark.parametrize("path_kind", [kernels.LINEAR, kernels.VP])
def test_energy_grad_backends_agree(name, dim, path_kind, rng):
    t = _target(name, dim)
    if path_kind == kernels.VP and t.kind != kernels.MIXTURE:
        pytest.skip("VP path needs a mixture")
    X = rng.normal(0, 1.2, size=(64, dim))
    lam = rng.choice([0.0, 0.2, 0.2, 0.7, 1.0], size=64)
    a = kernels._nb_energy_grad(X, lam, path_kind, *t.kernel_args)
    b = kernels._np_energy_grad(X, lam, path_kind, *t.kernel_args)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("name,dim", TARGETS)
def test_hmc_backends_agree(name, dim, rng):
    t = _target(name, dim)
    M = 40
    X = rng.normal(0, 0.8, size=(M, dim))
    lam = np.linspace(0, 1, M)
    mom = rng.standard_normal((M, dim))
    log_u = np.log(rng.random(M))
    args = (X, lam, kernels.LINEAR) + t.kernel_args + (0.05, 5, mom, log_u)
    xa, aa, na = kernels._nb_hmc(*args)
    xb, ab, nb = kernels._np_hmc(*args)
    assert np.array_equal(aa, ab)
    assert na == nb
    np.testing.assert_allclose(xa, xb, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("N", [1, 2, 5, 12])
def test_index_update_backends_agree(N, rng):
    T = 500
    acc = rng.random((T, N + 1)) < 0.6
    acc &= (np.arange(N + 1)[None] % 2) == (np.arange(1, T + 1)[:, None] % 2)
    acc[:, 0] = False
    states = []
    for fn in (kernels._nb_index_update, kernels._np_index_update):
        m = np.arange(N + 1)
        pos = m.copy()
        eps = np.where(m % 2 == 0, 1, -1)
        phase = np.where(m == 0, 1, 0)
        rt = np.zeros(N + 1, dtype=np.int64)
        fn(pos, eps, phase, rt, acc, N)
        states.append((pos, eps, phase, rt))
    for x, y in zip(*states):
        assert np.array_equal(x, y)


def test_far_modes_do_not_underflow():
    t = mixture([[0.0], [100.0]], 1e-4)
    U, G = kernels._nb_energy_grad(np.array([[50.0]]), np.ones(1), kernels.LINEAR, *t.kernel_args)
    assert np.isfinite(U[0]) and np.isfinite(G[0, 0])


def test_fallback_selected_by_environment():
    code = ("import accelpt, numpy as np; from accelpt import build_target;"
            "t = build_target('gmm', dim=4); print(accelpt.backend_name(), repr(float(t.potential(np.full(4, .1)))))")
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, ACCELPT_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        out[flag] = res.stdout.split()
    assert out["0"][0] == "numba"
    assert out["1"][0] == "numpy"
    assert float(out["0"][1]) == pytest.approx(float(out["1"][1]), rel=1e-12)
