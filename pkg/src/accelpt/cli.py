"""Command line interface.

    accelpt run         --config run.ini | --preset NAME   [--seed S] [--out DIR]
    accelpt tune        ...   schedule tuning only (writes initial + one schedule per round)
    accelpt fit-flows   ...   PT samples -> fitted diagonal affine flows
    accelpt free-energy ...   run + free-energy JSON + box-plot CSV
    accelpt sweep       ...   round trips over dimension x K (analytic diffusion)
    accelpt verify      --out DIR   recompute diagnostics from the raw CSVs and diff
"""
import argparse
import dataclasses
import json
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, _backend, outputs
from .accelerators import Accelerator, AffineFlowParams, LangevinBridgeParams
from .adaptation import FitSettings, fit_affine_flows, tune
from .annealing import AnnealingPath, Schedule, uniform_schedule
from .config import PRESETS, parse_config, preset
from .diagnostics import summarize, summarize_records
from .engine import run
from .errors import ConfigError, FitError
from .explorers import HmcSettings
from .free_energy import WorkLog, estimate, subsample_estimates
from .targets import build_target


# --------------------------------------------------------------------------
# building blocks
# --------------------------------------------------------------------------


def build(cfg):
    """(path, schedule, accelerator, explorer) from a validated config."""
    try:
        target = build_target(cfg.target, cfg.dim, cfg.target_seed, **cfg.target_params)
    except TypeError as e:
        raise ConfigError("target", str(e)) from None
    path = AnnealingPath(target, cfg.path)
    if cfg.schedule_file:
        schedule = Schedule.from_text(Path(cfg.schedule_file).read_text())
    elif cfg.schedule is not None:
        schedule = Schedule(tuple(cfg.schedule))
    else:
        schedule = uniform_schedule(cfg.N)
    if schedule.N != cfg.N:
        raise ConfigError("path.schedule", f"has {schedule.N} pairs but N = {cfg.N}")
    flow = bridge = None
    if cfg.accelerator == "affine_flow":
        if not cfg.flow_file:
            raise ConfigError("accelerator.flow_file", "affine_flow needs a flow file")
        flow = AffineFlowParams.load(cfg.flow_file)
    if cfg.accelerator == "langevin_bridge":
        bridge = LangevinBridgeParams(np.array(cfg.sigma))
    acc = Accelerator(cfg.accelerator, cfg.K, flow=flow, bridge=bridge, verify=cfg.verify_work)
    acc.check(path, schedule)
    explorer = HmcSettings(cfg.step_size, cfg.leapfrog_steps, cfg.steps_per_iteration)
    return path, schedule, acc, explorer


def _metadata(cfg, wall, counters=None, extra=None):
    import scipy

    versions = {"accelpt": __version__, "python": platform.python_version(),
                "numpy": np.__version__, "scipy": scipy.__version__}
    if _backend.HAVE_NUMBA:
        import numba

        versions["numba"] = numba.__version__
    meta = {
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "versions": versions,
        "backend": _backend.backend_name(),
        "wall_time_s": wall,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "counters": counters or {},
    }
    meta.update(extra or {})
    return meta


def _tuned_schedule(cfg, path, schedule, acc, explorer):
    if cfg.tune_rounds <= 0:
        return schedule, [schedule]
    st = tune(path, cfg.N, explorer, rounds=cfg.tune_rounds, pilot_T=cfg.pilot_T,
              pilot_burn=cfg.pilot_burn, seed=cfg.seed + 1_000_003, accelerator=acc,
              schedule=schedule)
    return st.schedule, st.history


def execute(cfg, out, free_energy=False):
    """Tune (optionally), run, and write every output file into ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    path, schedule, acc, explorer = build(cfg)
    schedule, history = _tuned_schedule(cfg, path, schedule, acc, explorer)
    res = run(path, schedule, acc, explorer, T=cfg.T, seed=cfg.seed, burn_in=cfg.effective_burn_in,
              thin=cfg.thin, store_samples=cfg.store_samples)
    diag = summarize(res)
    outputs.write_schedule(out / "schedule.txt", schedule)
    outputs.write_swaps(out / "swaps.csv", res.records)
    if cfg.store_samples:
        outputs.write_samples(out / "samples.csv", res.samples, res.sample_iterations)
    outputs.write_json(out / "roundtrips.json", {
        "R": res.round_trips, "T": res.T, "per_machine": res.index.round_trips.tolist(),
        "tau_empirical": diag.tau_empirical, "tau_formula": diag.tau_formula})
    outputs.write_json(out / "diagnostics.json", diag.to_dict())
    fe = None
    if free_energy or cfg.T > 0:
        log = WorkLog.from_records(res.records, schedule.N, res.burn_in)
        if all(len(f) for f in log.forward):
            fe = estimate(log)
            outputs.write_json(out / "free_energy.json", fe.to_dict())
            if free_energy:
                box = subsample_estimates(log, cfg.resamples, cfg.resample_size, seed=cfg.seed)
                outputs.write_boxplot(out / "boxplot.csv", box)
    wall = time.perf_counter() - t0
    outputs.write_json(out / "metadata.json", _metadata(
        cfg, wall, res.counters, {"N": schedule.N, "T": res.T, "burn_in": res.burn_in,
                                  "potential_evals_per_swap": res.records.potential_evals,
                                  "network_evals_per_swap": res.records.network_evals,
                                  "tuning_rounds": len(history) - 1}))
    return res, diag, fe


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _config(args):
    overrides = {"seed": args.seed, "out": args.out}
    if args.preset:
        return preset(args.preset, **overrides)
    if not args.config:
        raise ConfigError("config", "give --config FILE or --preset NAME")
    cfg = parse_config(args.config)
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    return cfg.validate()


def cmd_run(args):
    cfg = _config(args)
    _, diag, _ = execute(cfg, cfg.out)
    print(json.dumps({"R": diag.round_trips, "CN_R": diag.cn_round_trips,
                      "Lambda": diag.global_barrier, "tau_formula": diag.tau_formula}))
    return 0


def cmd_free_energy(args):
    cfg = _config(args)
    _, _, fe = execute(cfg, cfg.out, free_energy=True)
    print(json.dumps({"delta_f": fe.delta_f, "log_z": fe.log_z}))
    return 0


def cmd_tune(args):
    cfg = _config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    path, schedule, acc, explorer = build(cfg)
    rounds = cfg.tune_rounds if cfg.tune_rounds > 0 else 10
    st = tune(path, cfg.N, explorer, rounds=rounds, pilot_T=cfg.pilot_T,
              pilot_burn=cfg.pilot_burn, seed=cfg.seed, accelerator=acc, schedule=schedule)
    (out / "schedules.txt").write_text("\n".join(s.to_text() for s in st.history) + "\n")
    outputs.write_schedule(out / "schedule.txt", st.schedule)
    outputs.write_json(out / "metadata.json", _metadata(
        cfg, time.perf_counter() - t0, extra={"rounds": rounds,
                                              "last_rejections": st.rejections.tolist()}))
    print(json.dumps({"rounds": rounds, "schedules": len(st.history)}))
    return 0


def cmd_fit_flows(args):
    cfg = _config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    pt_cfg = dataclasses.replace(cfg, accelerator="identity", K=0, flow_file=None)
    path, schedule, acc, explorer = build(pt_cfg)
    schedule, _ = _tuned_schedule(pt_cfg, path, schedule, acc, explorer)
    res = run(path, schedule, acc, explorer, T=cfg.T, seed=cfg.seed,
              burn_in=cfg.effective_burn_in, thin=cfg.thin)
    fit = fit_affine_flows(res.samples, path, schedule, FitSettings(seed=cfg.seed,
                           batch_size=min(512, len(res.samples))))
    fit.params.save(out / "flows.txt")
    outputs.write_schedule(out / "schedule.txt", schedule)
    np.savetxt(out / "fit_trace.csv", np.column_stack([fit.eval_steps, fit.eval_trace]),
               fmt=outputs.FLOAT, delimiter=",",
               header="step," + ",".join(f"pair{n}" for n in range(1, schedule.N + 1)), comments="")
    outputs.write_json(out / "metadata.json", _metadata(cfg, time.perf_counter() - t0, res.counters))
    print(json.dumps({"flows": str(out / "flows.txt"), "pairs": schedule.N}))
    return 0


def _sweep_one(job):
    cfg, d, K = job
    c = dataclasses.replace(cfg, dim=d, K=K, accelerator="identity" if K == 0 else "analytic_diffusion",
                            store_samples=False)
    c.validate()
    path, schedule, acc, explorer = build(c)
    schedule, _ = _tuned_schedule(c, path, schedule, acc, explorer)
    res = run(path, schedule, acc, explorer, T=c.T, seed=c.seed, burn_in=c.effective_burn_in,
              store_samples=False)
    dg = summarize(res)
    return [d, K, dg.round_trips, dg.tau_empirical, dg.tau_empirical_se, dg.tau_formula,
            dg.global_barrier, dg.cn_round_trips]


def cmd_sweep(args):
    cfg = _config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    jobs = [(cfg, d, K) for d in cfg.sweep_dims for K in cfg.sweep_K]
    if args.workers and args.workers > 1:
        with ProcessPoolExecutor(args.workers) as ex:
            rows = list(ex.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    np.savetxt(out / "sweep.csv", np.array(rows, dtype=float), delimiter=",",
               fmt=["%d", "%d", "%d", outputs.FLOAT, outputs.FLOAT, outputs.FLOAT, outputs.FLOAT, outputs.FLOAT],
               header="dim,K,R,tau_empirical,tau_empirical_se,tau_formula,Lambda,CN_R", comments="")
    outputs.write_json(out / "metadata.json", _metadata(cfg, time.perf_counter() - t0))
    print(json.dumps({"rows": len(rows), "file": str(out / "sweep.csv")}))
    return 0


def verify_outputs(out):
    """Recompute swap-derived diagnostics from ``swaps.csv``; returns a list of mismatches."""
    out = Path(out)
    meta = outputs.read_json(out / "metadata.json")
    N, T, burn = meta["N"], meta["T"], meta["burn_in"]
    rec = outputs.read_swaps(out / "swaps.csv", meta["potential_evals_per_swap"],
                             meta["network_evals_per_swap"])
    idx, trace = outputs.replay_index(rec, N, T)
    diag = summarize_records(rec, N, T, burn, idx.total_round_trips, trace)
    new = outputs._finite(json.loads(json.dumps(diag.to_dict(), default=outputs._json_default)))
    old = outputs.read_json(out / "diagnostics.json")
    keys = ["rejection", "rejection_se", "proposals", "global_barrier", "tau_formula",
            "round_trips", "tau_empirical", "tau_empirical_se", "cn_round_trips", "skl", "skl_se"]
    bad = [k for k in keys if old.get(k) != new.get(k)]
    rt = outputs.read_json(out / "roundtrips.json")
    if rt["R"] != idx.total_round_trips or rt["per_machine"] != idx.round_trips.tolist():
        bad.append("roundtrips.R")
    if (out / "free_energy.json").exists():
        fe = estimate(WorkLog.from_records(rec, N, burn)).to_dict()
        old_fe = outputs.read_json(out / "free_energy.json")
        for k in ("delta_f_forward", "delta_f_backward", "delta_f_avg"):
            if old_fe[k] != fe[k]:
                bad.append(f"free_energy.{k}")
    return bad


def cmd_verify(args):
    out = args.out or "out"
    bad = verify_outputs(out)
    print(json.dumps({"verified": not bad, "mismatches": bad}))
    return 0 if not bad else 1


COMMANDS = {"run": cmd_run, "tune": cmd_tune, "fit-flows": cmd_fit_flows,
            "free-energy": cmd_free_energy, "sweep": cmd_sweep, "verify": cmd_verify}


def make_parser():
    p = argparse.ArgumentParser(prog="accelpt", description="Accelerated parallel tempering")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="sectioned key=value run file")
        s.add_argument("--preset", choices=sorted(PRESETS))
        s.add_argument("--seed", type=int)
        s.add_argument("--out", help="output directory")
        s.add_argument("--workers", type=int, default=1)
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FitError, OSError, ValueError) as e:
        err = {"error": type(e).__name__, "message": str(e)}
        if isinstance(e, ConfigError):
            err["field"] = e.field
        print(json.dumps(err), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
