"""Annealing paths and schedules.

Two path kinds are supported:

``linear``
    ``U^b(x) = -(1 - b) log eta(x) + b U(x)`` with ``eta`` the standard
    normal reference, so ``pi^0 = eta`` and ``Z_0 = 1``.
``analytic_vp``
    exact marginals of a variance-preserving diffusion started at a Gaussian
    mixture, with rate ``gamma_s = 1 / (2 (1 - s))``; time ``s = b`` runs from
    pure noise (``b = 0``, standard normal) to the mixture (``b = 1``).
"""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError
from .targets import TargetDensity, _Counter, gaussian, mixture

PATH_KINDS = ("linear", "analytic_vp")


@dataclass(frozen=True)
class Schedule:
    betas: tuple

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=float)
        if b.ndim != 1 or len(b) < 1:
            raise ConfigError("schedule", "needs at least one value")
        if b[0] != 0.0 or (len(b) > 1 and b[-1] != 1.0):
            raise ConfigError("schedule", "must start at 0 and end at 1")
        if np.any(np.diff(b) <= 0):
            raise ConfigError("schedule", "must be strictly increasing")
        object.__setattr__(self, "betas", tuple(float(v) for v in b))

    @property
    def N(self):
        return len(self.betas) - 1

    def array(self):
        return np.array(self.betas)

    def to_text(self):
        return ",".join(repr(b) for b in self.betas)

    @classmethod
    def from_text(cls, text):
        return cls(tuple(float(v) for v in text.replace("\n", ",").split(",") if v.strip()))


def uniform_schedule(N):
    if int(N) < 1:
        raise ConfigError("N", "must be >= 1")
    N = int(N)
    return Schedule(tuple(n / N for n in range(N + 1)))


def vp_mean_scale(s):
    """Mean contraction ``exp(-int_0^{1-s} gamma)`` of the VP marginal; equals ``sqrt(s)``."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    return math.sqrt(s)


def vp_alpha(s_lo, s_hi):
    """Noise level of the exact VP transition from time ``s_hi`` back to ``s_lo``."""
    if s_lo <= 0.0:
        raise ValueError("s_lo must be positive")
    if s_lo >= s_hi:
        raise ValueError("s_lo must be smaller than s_hi")
    if s_hi > 1.0:
        raise ValueError("s_hi must be at most 1")
    return 1.0 - s_lo / s_hi


class AnnealingPath:
    """Family ``U^beta`` between the standard normal and ``target``."""

    def __init__(self, target: TargetDensity, kind="linear"):
        if kind not in PATH_KINDS:
            raise ConfigError("path", f"unknown path kind {kind!r}")
        if kind == "analytic_vp" and target.kind != kernels.MIXTURE:
            raise ConfigError("path", "analytic_vp requires a Gaussian-mixture target")
        self.kind = kind
        self.target = target
        self.reference = gaussian(target.dim)
        self.dim = target.dim
        self._path_code = kernels.VP if kind == "analytic_vp" else kernels.LINEAR
        self.evals = _Counter()

    def __repr__(self):
        return f"AnnealingPath(kind={self.kind!r}, target={self.target.name!r})"

    @property
    def is_affine(self):
        """True when ``U^beta`` is affine in beta (mixtures of endpoints are path members)."""
        return self.kind == "linear"

    def energy_grad(self, betas, X):
        """Potential and gradient at one beta per row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        betas = np.broadcast_to(np.asarray(betas, dtype=float), (len(X),))
        if np.any((betas < 0.0) | (betas > 1.0)):
            raise ValueError("beta must lie in [0, 1]")
        self.evals.add(len(X))
        n_tgt = len(X) if self.kind == "analytic_vp" else int(np.count_nonzero(betas > 0))
        self.target.potential_evals.add(n_tgt)
        self.target.gradient_evals.add(n_tgt)
        return kernels.energy_grad(X, betas, self._path_code, *self.target.kernel_args)

    def potential_at(self, beta, x):
        x = np.asarray(x, dtype=float)
        U, _ = self.energy_grad(beta, x.reshape(-1, self.dim))
        return U[0] if x.ndim == 1 else U

    def gradient_at(self, beta, x):
        x = np.asarray(x, dtype=float)
        _, G = self.energy_grad(beta, x.reshape(-1, self.dim))
        return G[0] if x.ndim == 1 else G

    def score_at(self, beta, x):
        return -self.gradient_at(beta, x)

    def hmc_args(self):
        return (self._path_code,) + self.target.kernel_args

    def marginal(self, beta):
        """Exact ``pi^beta`` as a mixture when it has closed form, else ``None``.

        Closed forms: every VP marginal of a mixture target, and the linear
        path to a single diagonal Gaussian.
        """
        t = self.target
        if t.kind != kernels.MIXTURE:
            return None
        w = np.exp(t.logw - np.logaddexp.reduce(t.logw))
        if self.kind == "analytic_vp":
            return mixture(math.sqrt(beta) * t.means, beta * t.var + (1.0 - beta), w)
        if len(t.logw) != 1:
            return None
        prec = (1.0 - beta) + beta / t.var[0]
        mean = beta * t.means[0] / t.var[0] / prec
        return mixture(mean[None], (1.0 / prec)[None], w)
