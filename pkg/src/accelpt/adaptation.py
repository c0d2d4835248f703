"""Schedule tuning by rejection equalisation, and SKL fitting of diagonal affine flows."""
from dataclasses import dataclass, field

import numpy as np

from .accelerators import AffineFlowParams
from .annealing import Schedule, uniform_schedule
from .diagnostics import estimate_rejections
from .engine import run
from .errors import ConfigError, FitError

SEPARATION = 1e-9


def tune_schedule(r, schedule):
    """Place the betas so every pair carries the same share of the cumulative rejection."""
    r = np.asarray(r, dtype=float)
    b = schedule.array()
    N = schedule.N
    if len(r) != N:
        raise ValueError("need one rejection estimate per pair")
    if not np.all(np.isfinite(r)):
        raise ValueError("rejection estimates must be finite")
    r = np.clip(r, 0.0, None)
    cum = np.concatenate([[0.0], np.cumsum(r)])
    total = cum[-1]
    if total <= 0.0:
        return schedule
    new = np.empty(N + 1)
    new[0], new[N] = 0.0, 1.0
    for n in range(1, N):
        y = n / N * total
        i = int(np.searchsorted(cum, y, side="left"))
        i = min(max(i, 1), N)
        frac = (y - cum[i - 1]) / (cum[i] - cum[i - 1])
        new[n] = b[i - 1] + frac * (b[i] - b[i - 1])
    for n in range(1, N):
        new[n] = max(new[n], new[n - 1] + SEPARATION)
    for n in range(N - 1, 0, -1):
        new[n] = min(new[n], new[n + 1] - SEPARATION)
    return Schedule(tuple(new))


@dataclass
class TunerState:
    schedule: Schedule
    rejections: np.ndarray = None
    round: int = 0
    history: list = field(default_factory=list)


def tune(path, N, explorer=None, rounds=10, pilot_T=600, pilot_burn=100, seed=0,
         accelerator=None, schedule=None):
    """Alternate pilot runs and :func:`tune_schedule`.

    Returns the final :class:`TunerState`; ``history`` holds ``rounds + 1``
    schedules (the initial one first) and ``rejections`` the last pilot estimates.
    """
    state = TunerState(schedule or uniform_schedule(N))
    state.history.append(state.schedule)
    for k in range(rounds):
        res = run(path, state.schedule, accelerator, explorer, T=pilot_T, seed=seed + k,
                  burn_in=pilot_burn, store_samples=False)
        r, _, _ = estimate_rejections(res.records.after(pilot_burn), state.schedule.N)
        r = np.nan_to_num(r, nan=0.0)
        state.rejections = r
        state.schedule = tune_schedule(r, state.schedule)
        state.round = k + 1
        state.history.append(state.schedule)
    return state


# --------------------------------------------------------------------------
# affine flow fitting
# --------------------------------------------------------------------------


@dataclass
class FitSettings:
    learning_rate: float = 1e-2
    batch_size: int = 512
    steps: int = 2000
    eval_every: int = 50
    patience: int = 50
    max_log_scale: float = 10.0
    seed: int = 0


def _pair_samples(samples, N):
    """Split ``(S, N+1, d)`` samples (or a list of per-chain arrays) into per-chain arrays."""
    if isinstance(samples, np.ndarray) and samples.ndim == 3:
        return [samples[:, n] for n in range(N + 1)]
    chains = [np.atleast_2d(np.asarray(s, dtype=float)) for s in samples]
    if len(chains) != N + 1:
        raise ConfigError("samples", "need one sample set per chain")
    return chains


def skl_loss_and_grad(path, b_lo, b_hi, shift, log_scale, x_lo, x_hi):
    """Empirical ``SKL`` surrogate per pair and its gradient.

    Arrays are batched over pairs: ``shift``, ``log_scale`` are ``(P, d)`` and
    ``x_lo``, ``x_hi`` are ``(P, B, d)``.  Returns ``(loss (P,), g_shift, g_log_scale)``.
    """
    P, B, d = x_lo.shape
    e = np.exp(log_scale)[:, None]
    z = shift[:, None] + e * x_lo
    x0 = (x_hi - shift[:, None]) / e
    bh = np.repeat(b_hi, B)
    bl = np.repeat(b_lo, B)
    u_z, g_z = path.energy_grad(bh, z.reshape(-1, d))
    u_x, _ = path.energy_grad(bl, x_lo.reshape(-1, d))
    u_y, _ = path.energy_grad(bh, x_hi.reshape(-1, d))
    u_0, g_0 = path.energy_grad(bl, x0.reshape(-1, d))
    g_z = g_z.reshape(P, B, d)
    g_0 = g_0.reshape(P, B, d)
    ld = log_scale.sum(axis=1)
    wf = (u_z - u_x).reshape(P, B) - ld[:, None]
    wb = (u_y - u_0).reshape(P, B) - ld[:, None]
    loss = 0.5 * wf.mean(axis=1) - 0.5 * wb.mean(axis=1)
    gs = 0.5 * g_z.mean(axis=1) - 0.5 * (g_0 / e).mean(axis=1)
    gl = 0.5 * ((g_z * e * x_lo).mean(axis=1) - 1.0) - 0.5 * ((g_0 * x0).mean(axis=1) - 1.0)
    return loss, gs, gl


@dataclass
class FitResult:
    params: AffineFlowParams
    loss_trace: np.ndarray
    eval_trace: np.ndarray
    eval_steps: np.ndarray
    best_step: np.ndarray


def fit_affine_flows(samples, path, schedule, settings=None, init=None):
    """Fit one diagonal affine map per pair by Adam on the SKL surrogate.

    Flows start at the identity.  The returned parameters are the best
    iterate under the full-sample loss, checked every ``eval_every`` steps.
    """
    s = settings or FitSettings()
    N, d = schedule.N, path.dim
    chains = _pair_samples(samples, N)
    B = int(s.batch_size)
    if min(len(c) for c in chains) < B:
        raise ConfigError("batch_size", "every chain needs at least batch_size samples")
    b = schedule.array()
    b_lo, b_hi = b[:-1], b[1:]
    params = init or AffineFlowParams.identity(N, d)
    theta = np.concatenate([params.shift, params.log_scale], axis=1).copy()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    lr = np.full(N, float(s.learning_rate))
    b1, b2, eps = 0.9, 0.999, 1e-8
    g = np.random.default_rng(s.seed)

    k = min(min(len(c) for c in chains), 4096)
    xl_eval = np.stack([chains[n][:k] for n in range(N)])
    xh_eval = np.stack([chains[n + 1][:k] for n in range(N)])

    def full_loss(th):
        return skl_loss_and_grad(path, b_lo, b_hi, th[:, :d], th[:, d:], xl_eval, xh_eval)[0]

    best = theta.copy()
    best_loss = full_loss(theta)
    best_step = np.zeros(N, dtype=np.int64)
    evals, eval_steps = [best_loss.copy()], [0]
    trace = np.empty((s.steps, N))
    prev = np.full(N, np.inf)
    rising = np.zeros(N, dtype=np.int64)
    for step in range(1, s.steps + 1):
        xl = np.stack([chains[n][g.integers(len(chains[n]), size=B)] for n in range(N)])
        xh = np.stack([chains[n + 1][g.integers(len(chains[n + 1]), size=B)] for n in range(N)])
        loss, gs, gl = skl_loss_and_grad(path, b_lo, b_hi, theta[:, :d], theta[:, d:], xl, xh)
        trace[step - 1] = loss
        rising = np.where(loss > prev, rising + 1, 0)
        prev = loss
        hit = rising >= s.patience
        lr[hit] *= 0.5
        rising[hit] = 0
        grad = np.concatenate([gs, gl], axis=1)
        grad = np.where(np.isfinite(grad), grad, 0.0)
        m = b1 * m + (1 - b1) * grad
        v = b2 * v + (1 - b2) * grad * grad
        mh = m / (1 - b1**step)
        vh = v / (1 - b2**step)
        theta -= lr[:, None] * mh / (np.sqrt(vh) + eps)
        if np.any(np.abs(theta[:, d:]) > s.max_log_scale) or not np.all(np.isfinite(theta)):
            raise FitError(f"flow scale diverged at step {step}")
        if step % s.eval_every == 0 or step == s.steps:
            fl = full_loss(theta)
            evals.append(fl.copy())
            eval_steps.append(step)
            better = fl < best_loss
            best[better] = theta[better]
            best_loss[better] = fl[better]
            best_step[better] = step
    out = AffineFlowParams(best[:, :d].copy(), best[:, d:].copy())
    return FitResult(out, trace, np.array(evals), np.array(eval_steps), best_step)
