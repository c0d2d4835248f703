"""Counter-based random streams.

Every draw in a run comes from a Philox stream keyed by the run seed and
positioned by ``(iteration, phase)``.  A stream can therefore be rebuilt for
any iteration without replaying the run, and results do not depend on the
order in which workers consume randomness.
"""
import numpy as np

EXPLORE, COMMUNICATE, AUX = 0, 1, 2

_MASK = (1 << 64) - 1


def _key(seed):
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.array([seed & _MASK, (seed >> 64) & _MASK], dtype=np.uint64)


def stream(seed, iteration, phase=EXPLORE, lane=0):
    """Generator for one ``(iteration, phase, lane)`` cell of the run."""
    counter = np.array([0, int(lane), int(phase), int(iteration)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=_key(seed), counter=counter))


def child_seed(seed, *labels):
    """Derive an independent integer seed from a parent seed and labels."""
    ss = np.random.SeedSequence([int(seed)] + [int(v) for v in labels])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
