"""Accelerated non-reversible parallel tempering.

Each iteration ``t = 1, 2, ...`` performs

1. local exploration: chain 0 is redrawn exactly from the reference and
   chains ``1..N`` take HMC steps at their own ``beta_n``;
2. communication: every pair ``n`` with ``n % 2 == t % 2`` builds a
   forward/backward path proposal and is accepted with probability
   ``min(1, exp(W_bwd - W_fwd))``; on acceptance chain ``n-1`` takes the start
   of the backward path and chain ``n`` the end of the forward path.

Machines (replica labels) are tracked by the index process to count round
trips reference -> target -> reference.
"""
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels, rng as rngmod
from .accelerators import Accelerator
from .annealing import AnnealingPath, Schedule
from .explorers import ExplorerStats, HmcSettings, hmc_step


# --------------------------------------------------------------------------
# state
# --------------------------------------------------------------------------


@dataclass
class EnsembleState:
    points: np.ndarray
    iteration: int = 0

    @property
    def N(self):
        return self.points.shape[0] - 1

    def copy(self):
        return EnsembleState(self.points.copy(), self.iteration)


class IndexProcess:
    """Positions ``pos[m]`` and directions ``eps[m]`` of the N+1 machines.

    Machine ``m`` starts at chain ``m``.  Its direction points at the pair it
    will try next; since the first iteration proposes the odd pairs, machines
    at even chains start moving up and machines at odd chains start moving
    down.  A round trip is a visit to chain 0 after visiting chain N after
    visiting chain 0.
    """

    def __init__(self, N):
        self.N = int(N)
        m = np.arange(self.N + 1)
        self.pos = m.astype(np.int64)
        self.eps = np.where(m % 2 == 0, 1, -1).astype(np.int64)
        # phase 0: not yet at 0; 1: seen 0, heading to N; 2: seen N, heading back
        self.phase = np.where(m == 0, 1, 0).astype(np.int64)
        if self.N == 0:
            self.phase[:] = 1
        self.round_trips = np.zeros(self.N + 1, dtype=np.int64)

    def copy(self):
        new = IndexProcess(self.N)
        new.pos, new.eps = self.pos.copy(), self.eps.copy()
        new.phase, new.round_trips = self.phase.copy(), self.round_trips.copy()
        return new

    @property
    def total_round_trips(self):
        return int(self.round_trips.sum())

    def machine_at(self):
        """Inverse permutation: ``machine_at()[n]`` is the machine at chain ``n``."""
        inv = np.empty_like(self.pos)
        inv[self.pos] = np.arange(self.N + 1)
        return inv

    def update(self, accepted):
        """Advance over one or more iterations; ``accepted`` has shape ``(N+1,)`` or ``(T, N+1)``."""
        acc = np.atleast_2d(np.asarray(accepted, dtype=np.bool_))
        if acc.shape[1] != self.N + 1:
            raise ValueError("accepted needs one column per chain (column 0 unused)")
        kernels.index_update(self.pos, self.eps, self.phase, self.round_trips,
                             np.ascontiguousarray(acc), self.N)
        return self


def update_index_process(idx, accepted):
    return idx.update(accepted)


def parity_pairs(N, t):
    """Pairs ``n`` in ``1..N`` with ``n % 2 == t % 2``."""
    start = 1 if t % 2 else 2
    return np.arange(start, N + 1, 2)


def count_proposals(N, T):
    odd = (N + 1) // 2
    even = N // 2
    return ((T + 1) // 2) * odd + (T // 2) * even


# --------------------------------------------------------------------------
# swap records
# --------------------------------------------------------------------------


class SwapRecords:
    """Flat arrays with one row per proposed swap."""

    COLUMNS = ("iteration", "pair", "work_forward", "work_backward", "alpha", "accepted")

    def __init__(self, capacity=0, potential_evals=2, network_evals=0):
        self.iteration = np.zeros(capacity, dtype=np.int64)
        self.pair = np.zeros(capacity, dtype=np.int64)
        self.work_forward = np.zeros(capacity)
        self.work_backward = np.zeros(capacity)
        self.alpha = np.zeros(capacity)
        self.accepted = np.zeros(capacity, dtype=np.bool_)
        self.size = 0
        self.potential_evals = potential_evals
        self.network_evals = network_evals

    @classmethod
    def from_arrays(cls, iteration, pair, work_forward, work_backward, alpha, accepted,
                    potential_evals=2, network_evals=0):
        rec = cls(0, potential_evals, network_evals)
        rec.iteration = np.asarray(iteration, dtype=np.int64)
        rec.pair = np.asarray(pair, dtype=np.int64)
        rec.work_forward = np.asarray(work_forward, dtype=float)
        rec.work_backward = np.asarray(work_backward, dtype=float)
        rec.alpha = np.asarray(alpha, dtype=float)
        rec.accepted = np.asarray(accepted, dtype=np.bool_)
        rec.size = len(rec.iteration)
        if np.any((rec.alpha < 0) | (rec.alpha > 1)):
            raise ValueError("alpha must lie in [0, 1]")
        return rec

    def __len__(self):
        return self.size

    def _grow(self, extra):
        need = self.size + extra
        if need <= len(self.iteration):
            return
        cap = max(need, 2 * len(self.iteration), 64)
        for name in self.COLUMNS:
            old = getattr(self, name)
            new = np.zeros(cap, dtype=old.dtype)
            new[:self.size] = old[:self.size]
            setattr(self, name, new)

    def append(self, t, pairs, wf, wb, alpha, accepted):
        k = len(pairs)
        self._grow(k)
        s = slice(self.size, self.size + k)
        self.iteration[s] = t
        self.pair[s] = pairs
        self.work_forward[s] = wf
        self.work_backward[s] = wb
        self.alpha[s] = alpha
        self.accepted[s] = accepted
        self.size += k

    def column(self, name):
        return getattr(self, name)[:self.size]

    def select(self, mask):
        cols = [self.column(c)[mask] for c in self.COLUMNS]
        return SwapRecords.from_arrays(*cols, potential_evals=self.potential_evals,
                                       network_evals=self.network_evals)

    def after(self, burn_in):
        return self.select(self.column("iteration") > burn_in)

    def for_pair(self, n):
        return self.select(self.column("pair") == n)

    def pairs(self):
        return np.unique(self.column("pair"))

    @staticmethod
    def concat(parts):
        parts = list(parts)
        cols = [np.concatenate([p.column(c) for p in parts]) for c in SwapRecords.COLUMNS]
        return SwapRecords.from_arrays(*cols, potential_evals=parts[0].potential_evals,
                                       network_evals=parts[0].network_evals)


# --------------------------------------------------------------------------
# the two moves
# --------------------------------------------------------------------------


def local_exploration(state, path, schedule, settings, rng, stats=None):
    """Exact reference draw for chain 0, HMC at ``beta_n`` for chains ``1..N``.

    Randomness is consumed chain-major: the reference draw, then for every HMC
    step the momenta of chains ``1..N`` followed by their uniforms.
    """
    X = state.points
    d = X.shape[1]
    X[0] = rng.standard_normal(d)
    N = len(X) - 1
    if N > 0:
        betas = np.asarray(schedule.betas[1:])
        for _ in range(int(settings.steps_per_iteration)):
            mom = rng.standard_normal((N, d))
            log_u = np.log(rng.random(N))
            X[1:], _ = hmc_step(path, betas, X[1:], settings, momenta=mom, log_u=log_u, stats=stats)
    return state


def communication(state, accelerator, path, schedule, t, records=None, rng=None):
    """Propose the parity-``t`` swaps; returns the boolean accepted array ``(N+1,)``."""
    if t < 1:
        raise ValueError("iteration index starts at 1")
    X = state.points
    N = len(X) - 1
    accepted = np.zeros(N + 1, dtype=np.bool_)
    pairs = parity_pairs(N, t)
    if len(pairs) == 0:
        return accepted
    P, d = len(pairs), X.shape[1]
    noise = accelerator.draw_noise(rng, P, d)
    u = rng.random(P)
    prop = accelerator.propose(path, schedule, pairs, X[pairs - 1], X[pairs], noise=noise)
    alpha = prop.acceptance()
    acc = u < alpha
    K = prop.forward_path.shape[1] - 1
    lo = prop.backward_path[acc, 0]
    hi = prop.forward_path[acc, K]
    X[pairs[acc] - 1] = lo
    X[pairs[acc]] = hi
    accepted[pairs[acc]] = True
    if records is not None:
        records.append(t, pairs, prop.work_forward, prop.work_backward, alpha, acc)
    return accepted


# --------------------------------------------------------------------------
# full run
# --------------------------------------------------------------------------


@dataclass
class RunResult:
    schedule: Schedule
    records: SwapRecords
    index: IndexProcess
    state: EnsembleState
    samples: np.ndarray
    sample_iterations: np.ndarray
    round_trip_trace: np.ndarray
    explorer_stats: ExplorerStats
    T: int
    burn_in: int
    seed: int
    accelerator: str
    K: int
    wall_time: float = 0.0
    counters: dict = field(default_factory=dict)

    @property
    def round_trips(self):
        return self.index.total_round_trips


def initial_state(path, N, seed):
    """All chains start from independent reference draws."""
    g = rngmod.stream(seed, 0, rngmod.AUX)
    return EnsembleState(g.standard_normal((N + 1, path.dim)), 0)


def run(path: AnnealingPath, schedule: Schedule, accelerator: Accelerator = None,
        explorer: HmcSettings = None, T=1000, seed=0, burn_in=None, thin=10,
        store_samples=True, init=None):
    """Run ``T`` iterations; deterministic given ``seed``.

    ``burn_in`` defaults to 10% of ``T``; samples are kept every ``thin``
    iterations after burn-in (all chains, chain order).
    """
    accelerator = accelerator or Accelerator("identity", 0)
    explorer = explorer or HmcSettings()
    accelerator.check(path, schedule)
    T = int(T)
    if T < 0:
        raise ValueError("T must be non-negative")
    burn_in = int(0.1 * T) if burn_in is None else int(burn_in)
    thin = max(1, int(thin))
    N = schedule.N
    state = initial_state(path, N, seed) if init is None else EnsembleState(np.array(init, dtype=float), 0)
    if state.points.shape != (N + 1, path.dim):
        raise ValueError("initial state must have shape (N+1, dim)")
    pe, ne = accelerator.cost()
    records = SwapRecords(count_proposals(N, T), pe, ne)
    idx = IndexProcess(N)
    stats = ExplorerStats()
    stats.ensure(N)
    keep = [t for t in range(burn_in + 1, T + 1) if t % thin == 0] if store_samples else []
    samples = np.zeros((len(keep), N + 1, path.dim))
    trace = np.zeros(T, dtype=np.int64)
    path.evals.reset()
    path.target.reset_counters()
    t0 = time.perf_counter()
    j = 0
    for t in range(1, T + 1):
        local_exploration(state, path, schedule, explorer, rngmod.stream(seed, t, rngmod.EXPLORE), stats)
        acc = communication(state, accelerator, path, schedule, t, records,
                            rngmod.stream(seed, t, rngmod.COMMUNICATE))
        idx.update(acc)
        state.iteration = t
        trace[t - 1] = idx.total_round_trips
        if j < len(keep) and keep[j] == t:
            samples[j] = state.points
            j += 1
    wall = time.perf_counter() - t0
    n_swaps = len(records)
    counters = {
        "path_evaluations": path.evals.value,
        "target_potential_evaluations": path.target.potential_evals.value,
        "target_gradient_evaluations": path.target.gradient_evals.value,
        "explorer_gradient_evaluations": stats.gradient_evals,
        "explorer_nonfinite": stats.nonfinite,
        "swap_proposals": n_swaps,
        "swap_nonfinite": int(np.count_nonzero(~np.isfinite(records.column("work_forward"))
                                               | ~np.isfinite(records.column("work_backward")))),
        "swap_potential_evaluations": n_swaps * pe,
        "swap_network_evaluations": n_swaps * ne,
    }
    return RunResult(schedule, records, idx, state, samples, np.array(keep, dtype=np.int64),
                     trace, stats, T, burn_in, seed, accelerator.kind, accelerator.K, wall, counters)
