"""Local exploration kernels: HMC for tempered chains, exact draws for the reference."""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError


@dataclass(frozen=True)
class HmcSettings:
    step_size: float = 0.03
    leapfrog_steps: int = 5
    steps_per_iteration: int = 1

    def __post_init__(self):
        if not self.step_size > 0:
            raise ConfigError("step_size", "must be positive")
        if int(self.leapfrog_steps) < 1:
            raise ConfigError("leapfrog_steps", "must be >= 1")
        if int(self.steps_per_iteration) < 0:
            raise ConfigError("steps_per_iteration", "must be >= 0")


@dataclass
class ExplorerStats:
    proposals: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    accepts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    nonfinite: int = 0
    gradient_evals: int = 0

    def ensure(self, n):
        if len(self.proposals) != n:
            self.proposals = np.zeros(n, dtype=np.int64)
            self.accepts = np.zeros(n, dtype=np.int64)

    def acceptance_rates(self):
        with np.errstate(invalid="ignore"):
            return self.accepts / np.maximum(self.proposals, 1)


def hmc_step(path, beta, x, settings, rng=None, momenta=None, log_u=None, stats=None):
    """One HMC transition per row of ``x``, each at its own ``beta``.

    Momentum is standard normal (identity mass).  ``momenta``/``log_u`` may
    be supplied to fix the randomness; otherwise they are drawn from ``rng``.
    Returns ``(x_new, accepted)``.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    M, d = X.shape
    betas = np.broadcast_to(np.asarray(beta, dtype=float), (M,)).copy()
    if momenta is None:
        momenta = rng.standard_normal((M, d))
    if log_u is None:
        log_u = np.log(rng.random(M))
    L = int(settings.leapfrog_steps)
    Xn, acc, bad = kernels.hmc(X, betas, *path.hmc_args(), settings.step_size, L,
                               np.ascontiguousarray(momenta, float),
                               np.ascontiguousarray(log_u, float))
    path.evals.add(M * (L + 1))
    n_tgt = M if path.kind == "analytic_vp" else int(np.count_nonzero(betas > 0))
    path.target.potential_evals.add(n_tgt * (L + 1))
    path.target.gradient_evals.add(n_tgt * (L + 1))
    if stats is not None:
        stats.nonfinite += int(bad)
        stats.gradient_evals += M * (L + 1)
        if len(stats.proposals) == M:
            stats.proposals += 1
            stats.accepts += acc.astype(np.int64)
    return (Xn[0], bool(acc[0])) if single else (Xn, acc)


def reference_resample(reference, rng, n=None):
    """Exact independent draw(s) from the reference density."""
    return reference.sample(rng, n)
