"""Forward/backward accelerators and the path work.

An accelerator for swap ``n`` pushes the state of chain ``n-1`` forward
through ``K`` transitions and the state of chain ``n`` backward through ``K``
transitions; the swap then compares the work of the two paths.  The work of
a path ``x_{0:K}`` is

    W = U^n(x_K) - U^{n-1}(x_0) + sum_k log P_k(x_{k-1}, x_k) - sum_k log Q_{k-1}(x_k, x_{k-1})

and a proposed swap is accepted with probability
``min(1, exp(W_backward - W_forward))``.

Kinds:

* ``identity`` -- ``K = 0``; plain tempering swap, ``W = U^n(x) - U^{n-1}(x)``.
* ``affine_flow`` -- deterministic diagonal map ``T(x) = shift + exp(log_scale) * x``.
* ``langevin_bridge`` -- unadjusted Langevin steps along ``U_s = (1-phi_s) U^{n-1} + phi_s U^n``
  with optional drift (zero by default).
* ``analytic_diffusion`` -- exact noising kernel backward and the exponential
  integrator with the analytic mixture score forward, on the ``analytic_vp`` path.
"""
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

ACCELERATOR_KINDS = ("identity", "affine_flow", "langevin_bridge", "analytic_diffusion")
LOG_2PI = math.log(2.0 * math.pi)


def gaussian_logpdf(x, mean, var):
    """Log density of ``N(mean, var I)`` summed over the last axis; ``var`` broadcasts per row."""
    d = x.shape[-1]
    r = x - mean
    var = np.asarray(var, dtype=float)
    return -0.5 * np.sum(r * r, axis=-1) / var - 0.5 * d * (np.log(var) + LOG_2PI)


def swap_acceptance(work_forward, work_backward):
    """``min(1, exp(W_bwd - W_fwd))``; non-finite work gives 0."""
    wf = np.asarray(work_forward, dtype=float)
    wb = np.asarray(work_backward, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        a = np.exp(np.minimum(0.0, wb - wf))
    return np.where(np.isfinite(wf) & np.isfinite(wb), a, 0.0)


# --------------------------------------------------------------------------
# parameters
# --------------------------------------------------------------------------


@dataclass
class AffineFlowParams:
    """Per-pair diagonal affine maps; row ``n-1`` belongs to swap ``n``."""

    shift: np.ndarray
    log_scale: np.ndarray

    def __post_init__(self):
        self.shift = np.atleast_2d(np.asarray(self.shift, dtype=float))
        self.log_scale = np.atleast_2d(np.asarray(self.log_scale, dtype=float))
        if self.shift.shape != self.log_scale.shape:
            raise ConfigError("flow", "shift and log_scale shapes differ")
        if not np.all(np.isfinite(self.log_scale)):
            raise ConfigError("flow", "log_scale must be finite")

    @property
    def N(self):
        return self.shift.shape[0]

    @property
    def dim(self):
        return self.shift.shape[1]

    @classmethod
    def identity(cls, N, dim):
        return cls(np.zeros((N, dim)), np.zeros((N, dim)))

    def forward(self, n, x):
        n = np.asarray(n) - 1
        return self.shift[n] + np.exp(self.log_scale[n]) * x

    def inverse(self, n, y):
        n = np.asarray(n) - 1
        return (y - self.shift[n]) * np.exp(-self.log_scale[n])

    def log_det(self, n):
        return np.sum(self.log_scale[np.asarray(n) - 1], axis=-1)

    def save(self, path):
        """Text format: header ``affine_flow <dim> <N>`` then one row per pair (shift, log_scale)."""
        rows = np.hstack([self.shift, self.log_scale])
        with open(path, "w") as fh:
            fh.write(f"affine_flow {self.dim} {self.N}\n")
            for row in rows:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")

    @classmethod
    def load(cls, path):
        lines = Path(path).read_text().split("\n")
        head = lines[0].split()
        if len(head) != 3 or head[0] != "affine_flow":
            raise ConfigError("flow_file", f"bad header {lines[0]!r}")
        dim, N = int(head[1]), int(head[2])
        vals = np.array([float(v) for line in lines[1:] for v in line.split()])
        if vals.size != 2 * dim * N:
            raise ConfigError("flow_file", f"expected {2 * dim * N} values, found {vals.size}")
        vals = vals.reshape(N, 2 * dim)
        return cls(vals[:, :dim], vals[:, dim:])


@dataclass
class LangevinBridgeParams:
    """Per-pair noise scale; optional drift ``b(s, x, n)`` and interpolation ``phi(s)``."""

    sigma: np.ndarray
    drift: object = None
    phi: object = None

    def __post_init__(self):
        self.sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        if np.any(self.sigma <= 0):
            raise ConfigError("sigma", "must be positive")

    def interp(self, s):
        return s if self.phi is None else self.phi(s)


# --------------------------------------------------------------------------
# cost model
# --------------------------------------------------------------------------


def accel_cost(kind, K, modeled=False):
    """(potential evaluations, network evaluations) per swap and machine."""
    K = int(K)
    if kind == "identity":
        if K != 0:
            raise ConfigError("K", "identity requires K = 0")
        return (2, 2 if modeled else 0)
    if kind == "affine_flow":
        if K != 1:
            raise ConfigError("K", "affine_flow uses K = 1")
        return (2, 1)
    if kind in ("langevin_bridge", "analytic_diffusion"):
        if K < 1:
            raise ConfigError("K", f"{kind} requires K >= 1")
        return (K + 1, K + 1 if modeled else 0)
    raise ConfigError("kind", f"unknown accelerator {kind!r}")


# --------------------------------------------------------------------------
# proposals
# --------------------------------------------------------------------------


@dataclass
class PathProposal:
    """Batch of forward/backward paths, leading axis indexes the proposed pairs."""

    forward_path: np.ndarray
    backward_path: np.ndarray
    work_forward: np.ndarray
    work_backward: np.ndarray
    potential_evals: int
    network_evals: int

    @property
    def finite(self):
        return np.isfinite(self.work_forward) & np.isfinite(self.work_backward)

    def acceptance(self):
        return swap_acceptance(self.work_forward, self.work_backward)


def _pair_betas(schedule, n):
    b = np.asarray(schedule.betas)
    n = np.asarray(n)
    if np.any((n < 1) | (n > len(b) - 1)):
        raise ValueError("pair index out of range")
    return b[n - 1], b[n]


def _mixed_energy_grad(path, b_lo, b_hi, phi, X):
    """Potential/gradient of ``(1 - phi) U^{b_lo} + phi U^{b_hi}``, one row per point."""
    if path.is_affine:
        return path.energy_grad(b_lo + phi * (b_hi - b_lo), X)
    u0, g0 = path.energy_grad(b_lo, X)
    u1, g1 = path.energy_grad(b_hi, X)
    w = phi[:, None]
    return (1.0 - phi) * u0 + phi * u1, (1.0 - w) * g0 + w * g1


class Accelerator:
    """A forward/backward kernel family plus its work functional."""

    def __init__(self, kind="identity", K=0, flow=None, bridge=None, verify=False):
        if kind not in ACCELERATOR_KINDS:
            raise ConfigError("accelerator", f"unknown kind {kind!r}")
        K = int(K)
        if (K == 0) != (kind == "identity"):
            raise ConfigError("K", "K = 0 exactly when the accelerator is identity")
        if kind == "affine_flow":
            if K != 1:
                raise ConfigError("K", "affine_flow uses K = 1")
            if flow is None:
                raise ConfigError("flow", "affine_flow needs AffineFlowParams")
        if kind == "langevin_bridge" and bridge is None:
            raise ConfigError("sigma", "langevin_bridge needs LangevinBridgeParams")
        self.kind = kind
        self.K = K
        self.flow = flow
        self.bridge = bridge
        self.verify = verify

    def __repr__(self):
        return f"Accelerator(kind={self.kind!r}, K={self.K})"

    def cost(self):
        modeled = self.bridge is not None and self.bridge.drift is not None
        return accel_cost(self.kind, self.K, modeled=modeled)

    def check(self, path, schedule):
        if self.kind == "analytic_diffusion" and path.kind != "analytic_vp":
            raise ConfigError("accelerator", "analytic_diffusion requires the analytic_vp path")
        if self.kind == "affine_flow" and (self.flow.N != schedule.N or self.flow.dim != path.dim):
            raise ConfigError("flow", "flow parameters do not match (N, dim)")
        if self.kind == "langevin_bridge" and len(self.bridge.sigma) not in (1, schedule.N):
            raise ConfigError("sigma", "need one sigma or one per pair")

    def draw_noise(self, rng, P, d):
        if self.K == 0 or self.kind == "affine_flow":
            return None
        return rng.standard_normal((2, P, self.K, d))

    def propose(self, path, schedule, n, x_lo, x_hi, rng=None, noise=None):
        """Simulate the forward path from ``x_lo`` and the backward path from ``x_hi``.

        ``n`` is a pair index or an array of them (one per row of ``x_lo``).
        """
        x_lo = np.asarray(x_lo, dtype=float)
        single = x_lo.ndim == 1
        X0 = np.atleast_2d(x_lo)
        XK = np.atleast_2d(np.asarray(x_hi, dtype=float))
        P, d = X0.shape
        n = np.broadcast_to(np.asarray(n), (P,))
        if noise is None:
            noise = self.draw_noise(rng, P, d)
        impl = {
            "identity": self._identity,
            "affine_flow": self._flow,
            "langevin_bridge": self._langevin,
            "analytic_diffusion": self._diffusion,
        }[self.kind]
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            fwd, bwd, wf, wb = impl(path, schedule, n, X0, XK, noise)
            if self.verify and self.K > 0:
                wf = self.work(path, schedule, n, fwd)
                wb = self.work(path, schedule, n, bwd)
        pe, ne = self.cost()
        prop = PathProposal(fwd, bwd, wf, wb, pe, ne)
        if single:
            prop = PathProposal(fwd[0], bwd[0], wf[0], wb[0], pe, ne)
        return prop

    # -- identity -----------------------------------------------------------

    def _identity(self, path, schedule, n, X0, XK, noise):
        b_lo, b_hi = _pair_betas(schedule, n)
        X = np.concatenate([X0, X0, XK, XK])
        B = np.concatenate([b_hi, b_lo, b_hi, b_lo])
        U, _ = path.energy_grad(B, X)
        P = len(X0)
        wf = U[:P] - U[P:2 * P]
        wb = U[2 * P:3 * P] - U[3 * P:]
        return X0[:, None], XK[:, None], wf, wb

    # -- affine flow --------------------------------------------------------

    def _flow(self, path, schedule, n, X0, XK, noise):
        b_lo, b_hi = _pair_betas(schedule, n)
        Y0 = self.flow.forward(n, X0)
        Z0 = self.flow.inverse(n, XK)
        fwd = np.stack([X0, Y0], axis=1)
        bwd = np.stack([Z0, XK], axis=1)
        wf = flow_work(self.flow, path, schedule, n, X0)
        wb = flow_work(self.flow, path, schedule, n, Z0, x1=XK)
        return fwd, bwd, wf, wb

    # -- Langevin bridge ----------------------------------------------------

    def _sigma(self, n):
        s = self.bridge.sigma
        return np.full(len(n), s[0]) if len(s) == 1 else s[np.asarray(n) - 1]

    def _langevin(self, path, schedule, n, X0, XK, noise):
        K = self.K
        P, d = X0.shape
        b_lo, b_hi = _pair_betas(schedule, n)
        sig2 = self._sigma(n) ** 2
        ds = 1.0 / K
        h = sig2 * ds
        var = 2.0 * h
        sd = np.sqrt(var)[:, None]
        grid = [self.bridge.interp(k / K) for k in range(K + 1)]

        def energy(k, X):
            return _mixed_energy_grad(path, b_lo, b_hi, np.full(P, grid[k]), X)

        def drift(k, X):
            if self.bridge.drift is None:
                return 0.0
            return self.bridge.drift(k / K, X, n) * ds

        # forward: x_k ~ N(x_{k-1} - h grad U_{s_{k-1}}(x_{k-1}) + b ds, 2h)
        fwd = np.empty((P, K + 1, d))
        fwd[:, 0] = X0
        u, g = energy(0, X0)
        u_start = u
        wf = np.zeros(P)
        for k in range(1, K + 1):
            x = fwd[:, k - 1]
            mean_p = x - h[:, None] * g + drift(k - 1, x)
            fwd[:, k] = mean_p + sd * noise[0, :, k - 1]
            wf += gaussian_logpdf(fwd[:, k], mean_p, var)
            u, g = energy(k, fwd[:, k])
            mean_q = fwd[:, k] - h[:, None] * g - drift(k, fwd[:, k])
            wf -= gaussian_logpdf(x, mean_q, var)
        wf += u - u_start

        # backward: x_{k-1} ~ N(x_k - h grad U_{s_k}(x_k) - b ds, 2h)
        bwd = np.empty((P, K + 1, d))
        bwd[:, K] = XK
        u, g = energy(K, XK)
        u_end = u
        wb = np.zeros(P)
        for k in range(K, 0, -1):
            x = bwd[:, k]
            mean_q = x - h[:, None] * g - drift(k, x)
            bwd[:, k - 1] = mean_q + sd * noise[1, :, k - 1]
            wb -= gaussian_logpdf(bwd[:, k - 1], mean_q, var)
            u, g = energy(k - 1, bwd[:, k - 1])
            mean_p = bwd[:, k - 1] - h[:, None] * g + drift(k - 1, bwd[:, k - 1])
            wb += gaussian_logpdf(x, mean_p, var)
        wb += u_end - u
        return fwd, bwd, wf, wb

    # -- analytic diffusion -------------------------------------------------

    def _diffusion(self, path, schedule, n, X0, XK, noise):
        K = self.K
        P, d = X0.shape
        s_lo, s_hi = _pair_betas(schedule, n)
        grid = [s_lo + k * (s_hi - s_lo) / K for k in range(K + 1)]
        alpha = [None] + [1.0 - grid[k - 1] / grid[k] for k in range(1, K + 1)]

        fwd = np.empty((P, K + 1, d))
        fwd[:, 0] = X0
        wf = np.zeros(P)
        u_start = None
        for k in range(1, K + 1):
            x = fwd[:, k - 1]
            u, g = path.energy_grad(grid[k - 1], x)
            if k == 1:
                u_start = u
            a = alpha[k]
            mean_p = diffusion_forward_mean(x, -g, a)
            fwd[:, k] = mean_p + np.sqrt(a)[:, None] * noise[0, :, k - 1]
            wf += gaussian_logpdf(fwd[:, k], mean_p, a)
            wf -= gaussian_logpdf(x, np.sqrt(1.0 - a)[:, None] * fwd[:, k], a)
        u_end, _ = path.energy_grad(grid[K], fwd[:, K])
        wf += u_end - u_start

        bwd = np.empty((P, K + 1, d))
        bwd[:, K] = XK
        u_end, _ = path.energy_grad(grid[K], XK)
        wb = np.zeros(P)
        for k in range(K, 0, -1):
            x = bwd[:, k]
            a = alpha[k]
            mean_q = np.sqrt(1.0 - a)[:, None] * x
            bwd[:, k - 1] = mean_q + np.sqrt(a)[:, None] * noise[1, :, k - 1]
            wb -= gaussian_logpdf(bwd[:, k - 1], mean_q, a)
            u, g = path.energy_grad(grid[k - 1], bwd[:, k - 1])
            wb += gaussian_logpdf(x, diffusion_forward_mean(bwd[:, k - 1], -g, a), a)
        wb += u_end - u
        return fwd, bwd, wf, wb

    # -- work recomputation -------------------------------------------------

    def work(self, path, schedule, n, paths):
        """Recompute the work of stored paths ``(P, K+1, d)`` from scratch."""
        paths = np.asarray(paths, dtype=float)
        single = paths.ndim == 2
        paths = paths[None] if single else paths
        n = np.broadcast_to(np.asarray(n), (len(paths),))
        if self.kind == "identity":
            b_lo, b_hi = _pair_betas(schedule, n)
            x = paths[:, 0]
            w = path.energy_grad(b_hi, x)[0] - path.energy_grad(b_lo, x)[0]
        elif self.kind == "affine_flow":
            w = flow_work(self.flow, path, schedule, n, paths[:, 0], x1=paths[:, 1])
        elif self.kind == "langevin_bridge":
            w = langevin_work(paths, self.bridge, path, schedule, n)
        else:
            w = diffusion_work(paths, path, schedule, n)
        return w[0] if single else w


def flow_work(params, path, schedule, n, x0, x1=None):
    """``U^n(T x0) - U^{n-1}(x0) - log|det T'|`` for the diagonal affine map."""
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    n = np.broadcast_to(np.asarray(n), (len(x0),))
    b_lo, b_hi = _pair_betas(schedule, n)
    if x1 is None:
        x1 = params.forward(n, x0)
    u1, _ = path.energy_grad(b_hi, x1)
    u0, _ = path.energy_grad(b_lo, x0)
    return u1 - u0 - params.log_det(n)


def langevin_transition_means(path, bridge, b_lo, b_hi, n, k, K, x):
    """Forward mean from ``x`` at grid point ``k`` and backward mean from ``x`` at ``k``."""
    P = len(x)
    ds = 1.0 / K
    sig = bridge.sigma if len(bridge.sigma) > 1 else np.full(P, bridge.sigma[0])
    if len(bridge.sigma) > 1:
        sig = bridge.sigma[np.asarray(n) - 1]
    h = (sig**2 * ds)[:, None]
    _, g = _mixed_energy_grad(path, b_lo, b_hi, np.full(P, bridge.interp(k / K)), x)
    b = 0.0 if bridge.drift is None else bridge.drift(k / K, x, n) * ds
    return x - h * g + b, x - h * g - b, 2.0 * h[:, 0]


def langevin_work(paths, bridge, path, schedule, n):
    """Work of Langevin-bridge paths ``(P, K+1, d)`` recomputed from the points."""
    paths = np.asarray(paths, dtype=float)
    P, K1, d = paths.shape
    K = K1 - 1
    n = np.broadcast_to(np.asarray(n), (P,))
    b_lo, b_hi = _pair_betas(schedule, n)
    u0 = _mixed_energy_grad(path, b_lo, b_hi, np.full(P, bridge.interp(0.0)), paths[:, 0])[0]
    uK = _mixed_energy_grad(path, b_lo, b_hi, np.full(P, bridge.interp(1.0)), paths[:, K])[0]
    w = uK - u0
    for k in range(1, K + 1):
        mp, _, var = langevin_transition_means(path, bridge, b_lo, b_hi, n, k - 1, K, paths[:, k - 1])
        _, mq, _ = langevin_transition_means(path, bridge, b_lo, b_hi, n, k, K, paths[:, k])
        w += gaussian_logpdf(paths[:, k], mp, var) - gaussian_logpdf(paths[:, k - 1], mq, var)
    return w


def diffusion_forward_mean(x, score, alpha):
    """Exponential-integrator mean ``sqrt(1-a) x + 2 (1 - sqrt(1-a)) (x + score)``."""
    r = np.sqrt(1.0 - np.asarray(alpha, dtype=float))
    if r.ndim:
        r = r[:, None]
    return r * x + 2.0 * (1.0 - r) * (x + score)


def diffusion_work(paths, path, schedule, n):
    paths = np.asarray(paths, dtype=float)
    P, K1, d = paths.shape
    K = K1 - 1
    n = np.broadcast_to(np.asarray(n), (P,))
    s_lo, s_hi = _pair_betas(schedule, n)
    grid = [s_lo + k * (s_hi - s_lo) / K for k in range(K + 1)]
    w = path.energy_grad(grid[K], paths[:, K])[0] - path.energy_grad(grid[0], paths[:, 0])[0]
    for k in range(1, K + 1):
        a = 1.0 - grid[k - 1] / grid[k]
        _, g = path.energy_grad(grid[k - 1], paths[:, k - 1])
        w += gaussian_logpdf(paths[:, k], diffusion_forward_mean(paths[:, k - 1], -g, a), a)
        w -= gaussian_logpdf(paths[:, k - 1], np.sqrt(1.0 - a)[:, None] * paths[:, k], a)
    return w


def langevin_step(x, grad, sigma, ds, z, drift=0.0, backward=False):
    """Single Euler-Maruyama Langevin transition with its log density.

    Forward: ``N(x - sigma^2 grad ds + drift ds, 2 sigma^2 ds)``; backward flips
    the sign of the drift term.  ``z`` is a standard normal draw.
    """
    x = np.asarray(x, dtype=float)
    h = sigma * sigma * ds
    b = -drift if backward else drift
    mean = x - h * np.asarray(grad) + b * ds
    var = 2.0 * h
    y = mean + math.sqrt(var) * np.asarray(z)
    return y, float(gaussian_logpdf(y, mean, var))
