"""Numeric kernels with a numba path and a numpy fallback.

Every public function here takes plain arrays so that it can be compiled by
numba.  Targets are packed as ``(kind, means, var, logw, fpar, npart)``:

* ``MIXTURE``  -- diagonal-covariance Gaussian mixture (a Gaussian is the
  one-component case); ``means``/``var`` are ``(C, d)``, ``logw`` is ``(C,)``.
* ``MANYWELL`` -- sum over coordinate pairs of ``x1^4 - 6 x1^2 - x1/2 + x2^2/2``.
* ``PAIRWELL`` -- quartic pairwise particle potential; ``fpar`` holds
  ``(a, b, c, d0, tau, com_weight)`` and ``npart`` is the particle count.

Paths: ``LINEAR`` mixes a standard normal reference and the target with
weight ``lam``; ``VP`` evaluates the variance-preserving marginal of a
mixture target at time ``lam`` (means scaled by ``sqrt(lam)``, variances
``lam * var + 1 - lam``).
"""
import math

import numpy as np

from . import _backend
from ._backend import njit

MIXTURE, MANYWELL, PAIRWELL = 0, 1, 2
LINEAR, VP = 0, 1

LOG_2PI = math.log(2.0 * math.pi)


# --------------------------------------------------------------------------
# numba implementation
# --------------------------------------------------------------------------


@njit
def _nb_isotropic(var):
    C, d = var.shape
    iso = np.ones(C, dtype=np.bool_)
    for c in range(C):
        for j in range(1, d):
            if var[c, j] != var[c, 0]:
                iso[c] = False
                break
    return iso


@njit
def _nb_mix_lognorm(s, var, logw, iso, out):
    """``out[0, c] = logw[c] - sum_j log(2 pi v_cj) / 2`` with ``v = s var + 1 - s``.

    ``out[1, c]`` is ``1 / v_c`` for isotropic components and 0 otherwise.
    """
    C, d = var.shape
    for c in range(C):
        if iso[c]:
            v = s * var[c, 0] + (1.0 - s)
            out[0, c] = logw[c] - 0.5 * d * (math.log(v) + LOG_2PI)
            out[1, c] = 1.0 / v
            continue
        acc = logw[c]
        for j in range(d):
            acc -= 0.5 * (math.log(s * var[c, j] + (1.0 - s)) + LOG_2PI)
        out[0, c] = acc
        out[1, c] = 0.0


@njit
def _nb_mixture_row(x, s, means, var, lns, g):
    """Mixture potential at VP time ``s``; ``lns`` is filled by ``_nb_mix_lognorm`` for ``s``."""
    C, d = means.shape
    rs = math.sqrt(s)
    lc = np.empty(C)
    for c in range(C):
        acc = 0.0
        iv = lns[1, c]
        if iv > 0.0:
            for j in range(d):
                r = x[j] - rs * means[c, j]
                acc += r * r
            acc *= iv
        else:
            for j in range(d):
                r = x[j] - rs * means[c, j]
                acc += r * r / (s * var[c, j] + (1.0 - s))
        lc[c] = lns[0, c] - 0.5 * acc
    top = lc.max()
    tot = 0.0
    for c in range(C):
        # weights below e^-60 relative to the top are dropped (avoids denormals)
        z = lc[c] - top
        lc[c] = math.exp(z) if z > -60.0 else 0.0
        tot += lc[c]
    for j in range(d):
        g[j] = 0.0
    for c in range(C):
        if lc[c] == 0.0:
            continue
        w = lc[c] / tot
        iv = lns[1, c]
        if iv > 0.0:
            w *= iv
            for j in range(d):
                g[j] += w * (x[j] - rs * means[c, j])
        else:
            for j in range(d):
                g[j] += w * (x[j] - rs * means[c, j]) / (s * var[c, j] + (1.0 - s))
    return -(top + math.log(tot))


@njit
def _nb_manywell_row(x, g):
    u = 0.0
    for j in range(0, x.shape[0], 2):
        a = x[j]
        b = x[j + 1]
        a2 = a * a
        u += a2 * a2 - 6.0 * a2 - 0.5 * a + 0.5 * b * b
        g[j] = 4.0 * a2 * a - 12.0 * a - 0.5
        g[j + 1] = b
    return u


@njit
def _nb_pairwell_row(x, fpar, npart, g):
    a, b, c, d0, tau, comw = fpar[0], fpar[1], fpar[2], fpar[3], fpar[4], fpar[5]
    sd = x.shape[0] // npart
    u = 0.0
    for j in range(x.shape[0]):
        g[j] = 0.0
    for p in range(npart):
        for q in range(p + 1, npart):
            dd = 0.0
            for k in range(sd):
                r = x[p * sd + k] - x[q * sd + k]
                dd += r * r
            dist = math.sqrt(dd)
            e = dist - d0
            e2 = e * e
            u += (a * e + b * e2 + c * e2 * e2) / tau
            if dist > 0.0:
                de = (a + 2.0 * b * e + 4.0 * c * e2 * e) / tau / dist
                for k in range(sd):
                    r = x[p * sd + k] - x[q * sd + k]
                    g[p * sd + k] += de * r
                    g[q * sd + k] -= de * r
    if comw != 0.0:
        for k in range(sd):
            cm = 0.0
            for p in range(npart):
                cm += x[p * sd + k]
            cm /= npart
            u += comw * 0.5 * npart * cm * cm
            for p in range(npart):
                g[p * sd + k] += comw * cm
        u += comw * 0.5 * sd * LOG_2PI
    return u


@njit
def _nb_target_row(kind, x, s, means, var, lns, fpar, npart, g):
    if kind == MIXTURE:
        return _nb_mixture_row(x, s, means, var, lns, g)
    elif kind == MANYWELL:
        return _nb_manywell_row(x, g)
    else:
        return _nb_pairwell_row(x, fpar, npart, g)


@njit
def _nb_path_row(x, lam, path_kind, kind, means, var, lns, fpar, npart, g):
    if path_kind == VP:
        return _nb_target_row(kind, x, lam, means, var, lns, fpar, npart, g)
    d = x.shape[0]
    if lam == 0.0:
        u = 0.0
        for j in range(d):
            u += 0.5 * x[j] * x[j]
            g[j] = x[j]
        return u + 0.5 * d * LOG_2PI
    ut = _nb_target_row(kind, x, 1.0, means, var, lns, fpar, npart, g)
    ur = 0.5 * d * LOG_2PI
    for j in range(d):
        ur += 0.5 * x[j] * x[j]
        g[j] = (1.0 - lam) * x[j] + lam * g[j]
    return (1.0 - lam) * ur + lam * ut


@njit
def _nb_refresh(lam, path_kind, kind, var, logw, iso, lns, cur):
    """Recompute the cached mixture normalisers when the mixture time changes."""
    if kind != MIXTURE:
        return cur
    s = lam if path_kind == VP else 1.0
    if s != cur:
        _nb_mix_lognorm(s, var, logw, iso, lns)
    return s


@njit
def _nb_energy_grad(X, lam, path_kind, kind, means, var, logw, fpar, npart):
    M, d = X.shape
    U = np.empty(M)
    G = np.empty((M, d))
    lns = np.empty((2, logw.shape[0]))
    iso = _nb_isotropic(var)
    cur = -1.0
    for m in range(M):
        cur = _nb_refresh(lam[m], path_kind, kind, var, logw, iso, lns, cur)
        U[m] = _nb_path_row(X[m], lam[m], path_kind, kind, means, var, lns,
                            fpar, npart, G[m])
    return U, G


@njit
def _nb_hmc(X, lam, path_kind, kind, means, var, logw, fpar, npart,
            step, n_leap, momenta, log_u):
    M, d = X.shape
    Xn = X.copy()
    accepted = np.zeros(M, dtype=np.bool_)
    nonfinite = 0
    g = np.empty(d)
    q = np.empty(d)
    p = np.empty(d)
    lns = np.empty((2, logw.shape[0]))
    iso = _nb_isotropic(var)
    cur = -1.0
    for m in range(M):
        cur = _nb_refresh(lam[m], path_kind, kind, var, logw, iso, lns, cur)
        u0 = _nb_path_row(X[m], lam[m], path_kind, kind, means, var, lns,
                          fpar, npart, g)
        k0 = 0.0
        for j in range(d):
            q[j] = X[m, j]
            p[j] = momenta[m, j]
            k0 += 0.5 * p[j] * p[j]
        for j in range(d):
            p[j] -= 0.5 * step * g[j]
        u1 = u0
        for ell in range(n_leap):
            for j in range(d):
                q[j] += step * p[j]
            u1 = _nb_path_row(q, lam[m], path_kind, kind, means, var, lns,
                              fpar, npart, g)
            c = step if ell < n_leap - 1 else 0.5 * step
            for j in range(d):
                p[j] -= c * g[j]
        k1 = 0.0
        ok = math.isfinite(u0) and math.isfinite(u1)
        for j in range(d):
            k1 += 0.5 * p[j] * p[j]
            if not math.isfinite(g[j]):
                ok = False
        if not (ok and math.isfinite(k1)):
            nonfinite += 1
            continue
        if log_u[m] < (u0 + k0) - (u1 + k1):
            accepted[m] = True
            for j in range(d):
                Xn[m, j] = q[j]
    return Xn, accepted, nonfinite


@njit
def _nb_index_update(pos, eps, phase, rt, accepted, N):
    """Advance the index process over a block of iterations.

    ``accepted[t, n]`` is True when swap ``n`` (1..N) was accepted at the t-th
    iteration of the block.  Arrays are updated in place.
    """
    T = accepted.shape[0]
    M = pos.shape[0]
    for t in range(T):
        for m in range(M):
            i = pos[m]
            e = eps[m]
            n = i if e < 0 else i + 1
            if n >= 1 and n <= N and accepted[t, n]:
                i = i + e
                pos[m] = i
            else:
                eps[m] = -e
            if i == 0:
                if phase[m] == 2:
                    rt[m] += 1
                phase[m] = 1
            elif i == N and phase[m] == 1:
                phase[m] = 2


# --------------------------------------------------------------------------
# numpy implementation
# --------------------------------------------------------------------------


def _np_mixture(X, s, means, var, logw):
    s = s[:, None, None]
    m = np.sqrt(s) * means[None]
    v = s * var[None] + (1.0 - s)
    r = X[:, None, :] - m
    lc = logw[None] - 0.5 * np.sum(r * r / v + np.log(v) + LOG_2PI, axis=2)
    top = lc.max(axis=1, keepdims=True)
    w = np.exp(lc - top)
    tot = w.sum(axis=1, keepdims=True)
    U = -(top[:, 0] + np.log(tot[:, 0]))
    w /= tot
    G = np.einsum("mc,mcj->mj", w, r / v)
    return U, G


def _np_manywell(X):
    a = X[:, 0::2]
    b = X[:, 1::2]
    a2 = a * a
    U = np.sum(a2 * a2 - 6.0 * a2 - 0.5 * a + 0.5 * b * b, axis=1)
    G = np.empty_like(X)
    G[:, 0::2] = 4.0 * a2 * a - 12.0 * a - 0.5
    G[:, 1::2] = b
    return U, G


def _np_pairwell(X, fpar, npart):
    a, b, c, d0, tau, comw = fpar
    M, d = X.shape
    P = X.reshape(M, npart, d // npart)
    R = P[:, :, None, :] - P[:, None, :, :]
    dist = np.sqrt(np.sum(R * R, axis=3))
    iu = np.triu_indices(npart, 1)
    e = dist[:, iu[0], iu[1]] - d0
    U = np.sum(a * e + b * e**2 + c * e**4, axis=1) / tau
    de = (a + 2.0 * b * (dist - d0) + 4.0 * c * (dist - d0) ** 3) / tau
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(dist > 0.0, de / dist, 0.0)
    G = np.sum(coef[..., None] * R, axis=2).reshape(M, d)
    if comw != 0.0:
        cm = P.mean(axis=1)
        U = U + comw * 0.5 * npart * np.sum(cm * cm, axis=1) + comw * 0.5 * (d // npart) * LOG_2PI
        G = G + comw * np.repeat(cm[:, None, :], npart, axis=1).reshape(M, d)
    return U, G


def _np_target(X, s, kind, means, var, logw, fpar, npart):
    if kind == MIXTURE:
        return _np_mixture(X, s, means, var, logw)
    if kind == MANYWELL:
        return _np_manywell(X)
    return _np_pairwell(X, fpar, npart)


def _np_energy_grad(X, lam, path_kind, kind, means, var, logw, fpar, npart):
    if path_kind == VP:
        return _np_target(X, lam, kind, means, var, logw, fpar, npart)
    d = X.shape[1]
    ur = 0.5 * np.sum(X * X, axis=1) + 0.5 * d * LOG_2PI
    ut, gt = _np_target(X, np.ones_like(lam), kind, means, var, logw, fpar, npart)
    w = lam[:, None]
    U = (1.0 - lam) * ur + lam * ut
    G = (1.0 - w) * X + w * gt
    # lam == 0 rows never see the target (keeps them finite where U_target is not)
    ref = lam == 0.0
    if ref.any():
        U[ref] = ur[ref]
        G[ref] = X[ref]
    return U, G


def _np_hmc(X, lam, path_kind, kind, means, var, logw, fpar, npart,
            step, n_leap, momenta, log_u):
    args = (lam, path_kind, kind, means, var, logw, fpar, npart)
    with np.errstate(over="ignore", invalid="ignore"):
        u0, g = _np_energy_grad(X, *args)
        q = X.copy()
        p = momenta - 0.5 * step * g
        u1 = u0
        for ell in range(n_leap):
            q = q + step * p
            u1, g = _np_energy_grad(q, *args)
            p = p - (step if ell < n_leap - 1 else 0.5 * step) * g
        h0 = u0 + 0.5 * np.sum(momenta**2, axis=1)
        h1 = u1 + 0.5 * np.sum(p**2, axis=1)
        ok = np.isfinite(h0) & np.isfinite(h1) & np.all(np.isfinite(g), axis=1)
        accepted = ok & (log_u < h0 - h1)
    Xn = np.where(accepted[:, None], q, X)
    return Xn, accepted, int(np.count_nonzero(~ok))


def _np_index_update(pos, eps, phase, rt, accepted, N):
    M = pos.shape[0]
    for t in range(accepted.shape[0]):
        n = pos + (eps + 1) // 2
        ok = (n >= 1) & (n <= N)
        moved = np.zeros(M, dtype=bool)
        moved[ok] = accepted[t, n[ok]]
        pos[moved] += eps[moved]
        eps[~moved] *= -1
        at0 = pos == 0
        rt[at0 & (phase == 2)] += 1
        phase[at0] = 1
        phase[(pos == N) & (phase == 1) & ~at0] = 2


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------


def energy_grad(X, lam, path_kind, kind, means, var, logw, fpar, npart):
    """Batched path potential and gradient; one ``lam`` per row."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    lam = np.ascontiguousarray(lam, dtype=np.float64)
    if _backend.USE_NUMBA:
        return _nb_energy_grad(X, lam, path_kind, kind, means, var, logw, fpar, npart)
    return _np_energy_grad(X, lam, path_kind, kind, means, var, logw, fpar, npart)


def hmc(X, lam, path_kind, kind, means, var, logw, fpar, npart, step, n_leap,
        momenta, log_u):
    """One Metropolis-adjusted leapfrog trajectory per row.

    Returns ``(X_new, accepted, n_nonfinite)``.  Non-finite energies or
    gradients reject the proposal.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    lam = np.ascontiguousarray(lam, dtype=np.float64)
    if _backend.USE_NUMBA:
        return _nb_hmc(X, lam, path_kind, kind, means, var, logw, fpar, npart,
                       float(step), int(n_leap), momenta, log_u)
    return _np_hmc(X, lam, path_kind, kind, means, var, logw, fpar, npart,
                   float(step), int(n_leap), momenta, log_u)


def index_update(pos, eps, phase, rt, accepted, N):
    if _backend.USE_NUMBA:
        _nb_index_update(pos, eps, phase, rt, accepted, N)
    else:
        _np_index_update(pos, eps, phase, rt, accepted, N)
