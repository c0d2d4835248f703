"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Runs each kernel on the workloads of a PT iteration (31 chains) and prints
the median wall time per call for both backends.
"""
import argparse
import timeit

import numpy as np

from accelpt import _backend, build_target, kernels
from accelpt.annealing import uniform_schedule


def _args(target, path_kind, n_chains, rng):
    kind, means, var, logw, fpar, npart = target.kernel_args
    lam = uniform_schedule(n_chains - 1).array()
    X = rng.standard_normal((n_chains, target.dim))
    return X, lam, path_kind, kind, means, var, logw, fpar, npart


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--chains", type=int, default=31)
    a = p.parse_args(argv)
    rng = np.random.default_rng(0)
    cases = [("gmm-10 linear", build_target("gmm", dim=10), kernels.LINEAR),
             ("gmm-50 vp", build_target("gmm", dim=50), kernels.VP),
             ("manywell-32", build_target("manywell"), kernels.LINEAR),
             ("dw4", build_target("dw4"), kernels.LINEAR)]
    print(f"backend available: numba={_backend.HAVE_NUMBA}")
    print(f"{'kernel':<28}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, target, pk in cases:
        X, lam, *rest = _args(target, pk, a.chains, rng)
        mom = rng.standard_normal(X.shape)
        logu = np.log(rng.random(len(X)))
        jobs = {
            "energy_grad": (kernels._np_energy_grad, kernels._nb_energy_grad, (X, lam, *rest)),
            "hmc(0.03, 5)": (kernels._np_hmc, kernels._nb_hmc, (X, lam, *rest, 0.03, 5, mom, logu)),
        }
        for kname, (f_np, f_nb, args) in jobs.items():
            t_np = _time(f_np, args, a.repeat)
            t_nb = _time(f_nb, args, a.repeat) if _backend.HAVE_NUMBA else float("nan")
            print(f"{name + ' ' + kname:<28}{t_np * 1e3:12.3f}{t_nb * 1e3:12.3f}{t_np / t_nb:10.1f}")
    N, T = 30, 10_000
    acc = rng.random((T, N + 1)) < 0.7
    def idx(f):
        pos = np.arange(N + 1, dtype=np.int64)
        eps = np.where(pos % 2 == 0, 1, -1).astype(np.int64)
        f(pos, eps, np.zeros(N + 1, np.int64), np.zeros(N + 1, np.int64), acc, N)
    t_np = _time(lambda: idx(kernels._np_index_update), (), a.repeat)
    t_nb = _time(lambda: idx(kernels._nb_index_update), (), a.repeat) if _backend.HAVE_NUMBA else float("nan")
    print(f"{'index_update 10k its':<28}{t_np * 1e3:12.3f}{t_nb * 1e3:12.3f}{t_np / t_nb:10.1f}")


def _time(f, args, repeat):
    f(*args)  # compile / warm up
    n = 1
    while timeit.timeit(lambda: f(*args), number=n) < 0.05:
        n *= 2
    return float(np.median([timeit.timeit(lambda: f(*args), number=n) / n for _ in range(repeat)]))


if __name__ == "__main__":
    main()
