"""Rejection rates, global barrier, round-trip formula, SKL and compute-normalised metrics."""
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .accelerators import accel_cost


def batch_means_se(x, n_batches=30):
    """Standard error of the mean of a correlated series via non-overlapping batches."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 2:
        return float("nan")
    b = min(int(n_batches), n)
    size = n // b
    m = x[: size * b].reshape(b, size).mean(axis=1)
    return float(m.std(ddof=1) / math.sqrt(b))


def estimate_rejections(records, N=None, batches=None):
    """Per-pair ``r_n = 1 - mean(alpha)`` with standard errors.

    Returns ``(r, se, counts)`` for pairs ``1..N``; pairs without records
    are NaN.  With ``batches`` the SE uses batch means instead of the iid formula.
    """
    pair = records.column("pair")
    alpha = records.column("alpha")
    if N is None:
        N = int(pair.max()) if len(pair) else 0
    r = np.full(N, np.nan)
    se = np.full(N, np.nan)
    counts = np.zeros(N, dtype=np.int64)
    for n in range(1, N + 1):
        a = alpha[pair == n]
        counts[n - 1] = len(a)
        if len(a) == 0:
            continue
        r[n - 1] = 1.0 - a.mean()
        if batches:
            se[n - 1] = batch_means_se(a, batches)
        else:
            se[n - 1] = a.std(ddof=1) / math.sqrt(len(a)) if len(a) > 1 else float("nan")
    return r, se, counts


def global_barrier(r):
    r = np.asarray(r, dtype=float)
    if r.size == 0:
        raise ValueError("need at least one rejection rate")
    return float(np.sum(r))


def round_trip_rate_formula(r):
    """``(2 + 2 sum r/(1-r))^-1``; 0 (with a warning) if any ``r_n = 1``."""
    r = np.asarray(r, dtype=float)
    if np.any(r >= 1.0):
        warnings.warn("a pair never accepts; round-trip rate is 0", RuntimeWarning)
        return 0.0
    return float(1.0 / (2.0 + 2.0 * np.sum(r / (1.0 - r))))


@dataclass
class SklEstimate:
    skl: float
    se: float
    kl_forward: float = float("nan")
    kl_backward: float = float("nan")


def skl_estimate(work_forward, work_backward, delta_f=None):
    """Symmetric KL between forward and backward path laws.

    ``SKL = (E_P[W] - E_Q[W]) / 2``; the free-energy offset cancels.  With a
    known ``delta_f`` the two one-sided divergences are reported as well.
    """
    wf = np.asarray(work_forward, dtype=float)
    wb = np.asarray(work_backward, dtype=float)
    skl = 0.5 * (wf.mean() - wb.mean())
    var = 0.0
    if len(wf) > 1:
        var += wf.var(ddof=1) / len(wf)
    if len(wb) > 1:
        var += wb.var(ddof=1) / len(wb)
    out = SklEstimate(float(skl), float(0.5 * math.sqrt(var)))
    if delta_f is not None:
        out.kl_forward = float(wf.mean() - delta_f)
        out.kl_backward = float(delta_f - wb.mean())
    return out


def compute_normalized(R, kind, K=0, modeled=False):
    """Round trips per potential evaluation spent on one swap."""
    return R / accel_cost(kind, K, modeled)[0]


def simulate_round_trips(r, T, seed=0):
    """Index process driven by independent acceptances with probabilities ``1 - r_n``.

    Returns ``R_T``, the total round trips over all machines.
    """
    from .engine import IndexProcess

    r = np.asarray(r, dtype=float)
    N = len(r)
    g = np.random.default_rng(seed)
    idx = IndexProcess(N)
    block = max(1, 2**20 // (N + 1))
    parity = np.arange(N + 1) % 2
    done = 0
    while done < T:
        b = min(block, T - done)
        t = np.arange(done + 1, done + b + 1)
        u = g.random((b, N + 1))
        acc = u < np.concatenate([[0.0], 1.0 - r])[None]
        acc &= parity[None] == (t % 2)[:, None]
        acc[:, 0] = False
        kernels.index_update(idx.pos, idx.eps, idx.phase, idx.round_trips, acc, N)
        done += b
    return idx.total_round_trips


# --------------------------------------------------------------------------
# run summary
# --------------------------------------------------------------------------


@dataclass
class RunDiagnostics:
    rejection: list
    rejection_se: list
    proposals: list
    global_barrier: float
    tau_formula: float
    round_trips: int
    tau_empirical: float
    tau_empirical_se: float
    cn_round_trips: float
    skl: list
    skl_se: list
    T: int
    burn_in: int
    accelerator: str
    K: int
    costs: dict = field(default_factory=dict)
    explorer_acceptance: list = field(default_factory=list)
    degenerate_pairs: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        d["pairs"] = {
            str(n + 1): {"r": self.rejection[n], "se": self.rejection_se[n], "skl": self.skl[n],
                         "skl_se": self.skl_se[n], "proposals": self.proposals[n]}
            for n in range(len(self.rejection))
        }
        return d

    def to_json(self, **kw):
        return json.dumps(_clean(self.to_dict()), **kw)


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def round_trip_rate_se(trace, n_batches=20):
    """Batch-means SE of the per-iteration round-trip rate from a cumulative trace."""
    inc = np.diff(np.concatenate([[0], np.asarray(trace)]))
    return batch_means_se(inc, n_batches)


def summarize(result, batches=None):
    """Diagnostics of a :class:`~accelpt.engine.RunResult` using post-burn-in records."""
    return summarize_records(result.records, result.schedule.N, result.T, result.burn_in,
                             result.round_trips, result.round_trip_trace, result.accelerator,
                             result.K, result.counters,
                             result.explorer_stats.acceptance_rates().tolist(), batches)


def summarize_records(records, N, T, burn_in, round_trips, trace, accelerator="identity", K=0,
                      counters=None, explorer_acceptance=None, batches=None):
    rec = records.after(burn_in)
    r, se, counts = estimate_rejections(rec, N, batches)
    pair = rec.column("pair")
    wf, wb = rec.column("work_forward"), rec.column("work_backward")
    skl, skl_se = [], []
    for n in range(1, N + 1):
        m = pair == n
        if m.sum() > 1 and np.all(np.isfinite(wf[m])) and np.all(np.isfinite(wb[m])):
            s = skl_estimate(wf[m], wb[m])
            skl.append(s.skl)
            skl_se.append(s.se)
        else:
            skl.append(float("nan"))
            skl_se.append(float("nan"))
    finite = r[np.isfinite(r)]
    degenerate = [int(n + 1) for n in np.flatnonzero(r >= 1.0)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        tau = round_trip_rate_formula(finite) if len(finite) else float("nan")
    pe, ne = records.potential_evals, records.network_evals
    return RunDiagnostics(
        rejection=r.tolist(), rejection_se=se.tolist(), proposals=counts.tolist(),
        global_barrier=float(np.nansum(r)), tau_formula=tau, round_trips=int(round_trips),
        tau_empirical=round_trips / max(T, 1),
        tau_empirical_se=round_trip_rate_se(trace) if T > 1 else float("nan"),
        cn_round_trips=round_trips / pe, skl=skl, skl_se=skl_se, T=T, burn_in=burn_in,
        accelerator=accelerator, K=K,
        costs={"potential_evals_per_swap": pe, "network_evals_per_swap": ne, **(counters or {})},
        explorer_acceptance=list(explorer_acceptance or []),
        degenerate_pairs=degenerate,
    )


def stationary_rejections(path, schedule, accelerator, n, rng, pairs=None):
    """Rejection per pair from independent exact draws of ``pi^{n-1}`` and ``pi^n``.

    At stationarity the two chains of a pair are independent with these
    marginals, so this is an unbiased estimate of the stationary rejection.
    Needs closed-form marginals (see ``AnnealingPath.marginal``).
    Returns ``(r, se)`` arrays over ``pairs`` (default ``1..N``).
    """
    b = schedule.array()
    pairs = np.arange(1, schedule.N + 1) if pairs is None else np.asarray(pairs)
    margs = {}
    for i in np.unique(np.concatenate([pairs - 1, pairs])):
        m = path.marginal(b[i])
        if m is None:
            raise ValueError("path has no closed-form marginals")
        margs[i] = m
    xl = np.concatenate([margs[i - 1].sample(rng, n) for i in pairs])
    xh = np.concatenate([margs[i].sample(rng, n) for i in pairs])
    prop = accelerator.propose(path, schedule, np.repeat(pairs, n), xl, xh, rng=rng)
    a = prop.acceptance().reshape(len(pairs), n)
    return 1.0 - a.mean(axis=1), a.std(axis=1, ddof=1) / math.sqrt(n)
