"""Reference and target densities.

A :class:`TargetDensity` wraps a potential ``U`` (natural-log units, so the
density is ``exp(-U) / Z``) and its analytic gradient.  All evaluation goes
through :mod:`accelpt.kernels` so the same code serves the samplers.
"""
import math
import threading

import numpy as np
from scipy import integrate

from . import kernels
from .errors import ConfigError

TARGET_NAMES = ("gaussian", "gmm", "dw4", "manywell")


class _Counter:
    """Thread-safe accumulator."""

    def __init__(self):
        self._lock = threading.Lock()
        self.value = 0

    def add(self, k):
        with self._lock:
            self.value += int(k)

    def reset(self):
        with self._lock:
            self.value = 0


class TargetDensity:
    """Potential, gradient and metadata of a density on R^dim.

    ``potential``/``gradient`` accept a single point ``(dim,)`` or a batch
    ``(M, dim)``; every evaluated point increments the matching counter.
    """

    def __init__(self, name, dim, kind, means=None, var=None, logw=None,
                 fpar=None, npart=1, log_normalizer=None, params=None):
        self.name = name
        self.dim = int(dim)
        self.kind = kind
        self.means = np.zeros((1, dim)) if means is None else np.ascontiguousarray(means, float)
        self.var = np.ones((1, dim)) if var is None else np.ascontiguousarray(var, float)
        self.logw = np.zeros(1) if logw is None else np.ascontiguousarray(logw, float)
        self.fpar = np.zeros(6) if fpar is None else np.ascontiguousarray(fpar, float)
        self.npart = int(npart)
        self.log_normalizer = log_normalizer
        self.params = dict(params or {})
        self.potential_evals = _Counter()
        self.gradient_evals = _Counter()

    def __repr__(self):
        return f"TargetDensity(name={self.name!r}, dim={self.dim})"

    @property
    def kernel_args(self):
        return (self.kind, self.means, self.var, self.logw, self.fpar, self.npart)

    @property
    def has_exact_sampler(self):
        return self.kind == kernels.MIXTURE

    def _batch(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = x[None] if single else x
        if X.shape[-1] != self.dim:
            raise ValueError(f"point has dimension {X.shape[-1]}, expected {self.dim}")
        return X, single

    def _eval(self, X, lam=1.0, path_kind=kernels.LINEAR):
        lam = np.full(len(X), lam, dtype=float)
        return kernels.energy_grad(X, lam, path_kind, *self.kernel_args)

    def potential_and_gradient(self, x):
        X, single = self._batch(x)
        U, G = self._eval(X)
        self.potential_evals.add(len(X))
        self.gradient_evals.add(len(X))
        return (U[0], G[0]) if single else (U, G)

    def potential(self, x):
        X, single = self._batch(x)
        U, _ = self._eval(X)
        self.potential_evals.add(len(X))
        return U[0] if single else U

    def gradient(self, x):
        X, single = self._batch(x)
        _, G = self._eval(X)
        self.gradient_evals.add(len(X))
        return G[0] if single else G

    def sample(self, rng, n=None):
        """Exact draws; only mixtures (including Gaussians) support this."""
        if not self.has_exact_sampler:
            raise ConfigError("reference", f"{self.name} has no exact sampler")
        size = 1 if n is None else int(n)
        comp = rng.choice(len(self.logw), size=size, p=np.exp(self.logw - np.logaddexp.reduce(self.logw)))
        z = rng.standard_normal((size, self.dim))
        out = self.means[comp] + np.sqrt(self.var[comp]) * z
        return out[0] if n is None else out

    def reset_counters(self):
        self.potential_evals.reset()
        self.gradient_evals.reset()


def gaussian(dim, mean=0.0, scale=1.0):
    """Normalised diagonal Gaussian (log Z = 0)."""
    mean = np.broadcast_to(np.asarray(mean, float), (dim,)).copy()
    scale = np.broadcast_to(np.asarray(scale, float), (dim,)).copy()
    if np.any(scale <= 0):
        raise ConfigError("scale", "must be positive")
    return TargetDensity("gaussian", dim, kernels.MIXTURE, means=mean[None],
                         var=(scale**2)[None], log_normalizer=0.0,
                         params={"mean": mean.tolist(), "scale": scale.tolist()})


def mixture(means, var, weights=None, name="mixture"):
    """Normalised Gaussian mixture with isotropic or diagonal components."""
    means = np.atleast_2d(np.asarray(means, float))
    C, dim = means.shape
    var = np.asarray(var, float)
    if var.ndim == 0:
        var = np.full((C, dim), float(var))
    elif var.ndim == 1:
        var = np.repeat(var[:, None], dim, axis=1)
    if np.any(var <= 0):
        raise ConfigError("scale", "component variances must be positive")
    w = np.full(C, 1.0 / C) if weights is None else np.asarray(weights, float) / np.sum(weights)
    return TargetDensity(name, dim, kernels.MIXTURE, means=means, var=var,
                         logw=np.log(w), log_normalizer=0.0)


def gmm(dim, seed=0, n_components=40, loc_range=40.0, scale=40.0):
    """40-mode mixture: means uniform in the 2-D box, zero padded, then shrunk.

    The whole distribution is divided by ``scale``; components have unit
    covariance before shrinking, i.e. standard deviation ``1/scale`` after.
    """
    if dim < 2:
        raise ConfigError("dim", "gmm requires dim >= 2")
    if scale <= 0:
        raise ConfigError("scale", "must be positive")
    rng = np.random.default_rng(seed)
    locs = rng.uniform(-loc_range, loc_range, size=(n_components, 2))
    means = np.zeros((n_components, dim))
    means[:, :2] = locs / scale
    t = mixture(means, 1.0 / scale**2, name="gmm")
    t.params = {"seed": seed, "n_components": n_components,
                "loc_range": loc_range, "scale": scale}
    return t


def manywell_pair_log_normalizer():
    """log of the normaliser of one 2-D ManyWell factor (x2 part is Gaussian)."""
    val, _ = integrate.quad(lambda x: math.exp(-x**4 + 6 * x**2 + 0.5 * x),
                            -10.0, 10.0, epsabs=0.0, epsrel=1e-12, limit=200)
    return math.log(val) + 0.5 * math.log(2 * math.pi)


def manywell(dim=32):
    if dim < 2 or dim % 2:
        raise ConfigError("dim", "manywell requires an even dim >= 2")
    return TargetDensity("manywell", dim, kernels.MANYWELL,
                         log_normalizer=(dim // 2) * manywell_pair_log_normalizer())


def double_well_particles(n_particles=4, spatial_dim=2, a=0.0, b=-4.0, c=0.9,
                          d0=4.0, tau=1.0, com_tether=True):
    """Pairwise quartic double-well system (DW-4 with the defaults).

    The pair energy is summed once per unordered pair.  The potential is
    translation invariant, so by default a unit Gaussian tether on the
    centre-of-mass coordinates (orthonormal frame) is added; it leaves the
    normaliser equal to the centre-of-mass-free one.
    """
    if tau <= 0:
        raise ConfigError("tau", "must be positive")
    dim = n_particles * spatial_dim
    fpar = np.array([a, b, c, d0, tau, 1.0 if com_tether else 0.0])
    return TargetDensity("dw4", dim, kernels.PAIRWELL, fpar=fpar, npart=n_particles,
                         params={"a": a, "b": b, "c": c, "d0": d0, "tau": tau,
                                 "n_particles": n_particles, "com_tether": com_tether})


def build_target(name, dim=None, seed=0, **params):
    """Construct a target from its configuration name and parameters."""
    if name == "gaussian":
        if dim is None or int(dim) < 1:
            raise ConfigError("dim", "gaussian requires dim >= 1")
        return gaussian(int(dim), params.get("mean", 0.0), params.get("scale", 1.0))
    if name == "gmm":
        if dim is None:
            raise ConfigError("dim", "gmm requires dim")
        return gmm(int(dim), seed=seed, **params)
    if name == "manywell":
        return manywell(32 if dim is None else int(dim))
    if name == "dw4":
        t = double_well_particles(**params)
        if dim is not None and int(dim) != t.dim:
            raise ConfigError("dim", f"dw4 has dim {t.dim}")
        return t
    raise ConfigError("name", f"unknown target {name!r}; expected one of {TARGET_NAMES}")
