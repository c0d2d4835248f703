"""Free-energy estimates from swap work.

With ``Delta F = log Z_0 - log Z_1`` and a normalised reference, ``-Delta F``
is the log normaliser of the target.  Per pair,

    forward:  Delta F_n ~ -log mean exp(-W_fwd)
    backward: Delta F_n ~  log mean exp(+W_bwd)

and the pair contributions add up.  Means divide by the number of
proposals actually made for the pair.
"""
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp


def _logmeanexp(a):
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        raise ValueError("empty work sample")
    return float(logsumexp(a) - math.log(a.size))


@dataclass
class WorkLog:
    """Per-pair work arrays, pairs ``1..N``."""

    iterations: list
    forward: list
    backward: list

    @property
    def N(self):
        return len(self.forward)

    @classmethod
    def from_records(cls, records, N=None, burn_in=0):
        it = records.column("iteration")
        keep = it > burn_in
        it = it[keep]
        pair = records.column("pair")[keep]
        wf = records.column("work_forward")[keep]
        wb = records.column("work_backward")[keep]
        if N is None:
            N = int(pair.max()) if len(pair) else 0
        sel = [pair == n for n in range(1, N + 1)]
        for n, m in enumerate(sel, start=1):
            if np.any(it[m] % 2 != n % 2):
                raise ValueError(f"pair {n} has records at iterations of the wrong parity")
        return cls([it[m] for m in sel], [wf[m] for m in sel], [wb[m] for m in sel])

    @classmethod
    def from_arrays(cls, forward, backward):
        fw = [np.atleast_1d(np.asarray(f, dtype=float)) for f in forward]
        bw = [np.atleast_1d(np.asarray(b, dtype=float)) for b in backward]
        return cls([np.arange(len(f)) for f in fw], fw, bw)

    def subsample(self, size, rng):
        """Uniform draw of ``size`` records per pair without replacement."""
        its, fw, bw = [], [], []
        for i, f, b in zip(self.iterations, self.forward, self.backward):
            k = min(size, len(f))
            j = np.sort(rng.choice(len(f), size=k, replace=False))
            its.append(i[j])
            fw.append(f[j])
            bw.append(b[j])
        return WorkLog(its, fw, bw)


def pair_forward(log):
    return np.array([-_logmeanexp(-f) for f in log.forward])


def pair_backward(log):
    return np.array([_logmeanexp(b) for b in log.backward])


def forward_estimate(log):
    return float(np.sum(pair_forward(log)))


def backward_estimate(log):
    return float(np.sum(pair_backward(log)))


def averaged_estimate(log):
    return 0.5 * (forward_estimate(log) + backward_estimate(log))


@dataclass
class FreeEnergyResult:
    delta_f_forward: float
    delta_f_backward: float
    delta_f: float
    pair_forward: list
    pair_backward: list

    @property
    def log_z(self):
        return -self.delta_f

    def to_dict(self):
        return {
            "delta_f_forward": self.delta_f_forward,
            "delta_f_backward": self.delta_f_backward,
            "delta_f_avg": self.delta_f,
            "log_z_forward": -self.delta_f_forward,
            "log_z_backward": -self.delta_f_backward,
            "log_z_avg": self.log_z,
            "pairs": {str(n + 1): {"forward": f, "backward": b}
                      for n, (f, b) in enumerate(zip(self.pair_forward, self.pair_backward))},
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def estimate(log):
    pf, pb = pair_forward(log), pair_backward(log)
    f, b = float(pf.sum()), float(pb.sum())
    return FreeEnergyResult(f, b, 0.5 * (f + b), pf.tolist(), pb.tolist())


def subsample_estimates(log, n_resamples=30, size=1000, seed=0):
    """Averaged estimates on repeated per-pair subsamples; rows (forward, backward, avg)."""
    g = np.random.default_rng(seed)
    out = np.empty((n_resamples, 3))
    for i in range(n_resamples):
        e = estimate(log.subsample(size, g))
        out[i] = (e.delta_f_forward, e.delta_f_backward, e.delta_f)
    return out
