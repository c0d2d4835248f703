"""CSV/JSON emission and re-ingestion.

Floats are written with 17 significant digits so that values read back are
bit-identical to the ones in memory.

``samples.csv``   iteration, chain, x0 .. x{d-1}       (coordinates in target units)
``swaps.csv``     iteration, pair, W_fwd, W_bwd, alpha, accepted   (work in nats)
``boxplot.csv``   resample, delta_f_forward, delta_f_backward, delta_f_avg, log_z_avg
"""
import json
import math
from pathlib import Path

import numpy as np

from .engine import IndexProcess, SwapRecords

FLOAT = "%.17g"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _finite(obj):
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(path, obj):
    text = json.dumps(_finite(json.loads(json.dumps(obj, default=_json_default))), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def write_samples(path, samples, iterations):
    S, C, d = samples.shape
    it = np.repeat(iterations, C)
    ch = np.tile(np.arange(C), S)
    data = np.column_stack([it, ch, samples.reshape(S * C, d)])
    header = ",".join(["iteration", "chain"] + [f"x{j}" for j in range(d)])
    fmt = ["%d", "%d"] + [FLOAT] * d
    np.savetxt(path, data, fmt=fmt, delimiter=",", header=header, comments="")


def read_samples(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    it = data[:, 0].astype(np.int64)
    ch = data[:, 1].astype(np.int64)
    C = int(ch.max()) + 1
    return data[:, 2:].reshape(-1, C, data.shape[1] - 2), it[::C]


def write_swaps(path, records):
    cols = [records.column(c) for c in SwapRecords.COLUMNS]
    data = np.column_stack([c.astype(float) for c in cols]) if len(records) else np.zeros((0, 6))
    header = "iteration,pair,W_fwd,W_bwd,alpha,accepted"
    np.savetxt(path, data, fmt=["%d", "%d", FLOAT, FLOAT, FLOAT, "%d"], delimiter=",",
               header=header, comments="")


def read_swaps(path, potential_evals=2, network_evals=0):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = np.zeros((0, 6))
    return SwapRecords.from_arrays(data[:, 0].astype(np.int64), data[:, 1].astype(np.int64),
                                   data[:, 2], data[:, 3], data[:, 4], data[:, 5] != 0,
                                   potential_evals, network_evals)


def replay_index(records, N, T):
    """Rebuild the index process and the cumulative round-trip trace from swap records."""
    acc = np.zeros((T, N + 1), dtype=np.bool_)
    it = records.column("iteration")
    ok = records.column("accepted")
    acc[it[ok] - 1, records.column("pair")[ok]] = True
    idx = IndexProcess(N)
    trace = np.zeros(T, dtype=np.int64)
    for t in range(T):
        idx.update(acc[t])
        trace[t] = idx.total_round_trips
    return idx, trace


def write_schedule(path, schedule):
    Path(path).write_text(schedule.to_text() + "\n")


def write_boxplot(path, estimates):
    rows = np.column_stack([np.arange(len(estimates)), estimates, -estimates[:, 2]])
    np.savetxt(path, rows, fmt=["%d", FLOAT, FLOAT, FLOAT, FLOAT], delimiter=",",
               header="resample,delta_f_forward,delta_f_backward,delta_f_avg,log_z_avg", comments="")
