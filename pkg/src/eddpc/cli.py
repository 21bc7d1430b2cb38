"""Command-line front end.

Subcommands::

    eddpc check DATA [--order TAU]
    eddpc build DATA CONFIG --out bundle.json [--literal-appendix] [--workers W] [--L L]
    eddpc simulate BUNDLE (--plant SPEC | --quadrotor) [--x0 ...] [--steps N] --out traces.csv
    eddpc bench NAME [--seed S] --out DIR [--set key=value ...]

``DATA`` is a dataset file (CSV or JSON) or a run directory holding
``run_*.csv``/``run_*.json`` experiments that share one input sequence.
Exit codes: 0 success, 1 validation failure (bad input, failed check),
2 runtime error (a pipeline stage or a simulation failed).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .bundle import bundle_from_build, load_bundle, save_bundle
from .dataio import (NoiseModel, average_datasets, check_persistency, check_rank_condition,
                     data_matrices, load_dataset, load_runs, min_samples)
from .errors import (DimensionError, EDDPCError, ParseError, PipelineError, PreconditionError,
                     RankConditionError)
from .pipeline import BuildConfig, build_controller, build_from_model, load_config
from .simlab import metrics
from .simlab.benchmarks import BENCHMARKS, maneuver_metrics, run_benchmark
from .simlab.plants import OL_STABLE, SPARSE, LTIPlant, simulate_lti
from .simlab.quadrotor import QuadrotorParams, simulate_quadrotor

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

_VALIDATION = (ParseError, DimensionError, PreconditionError, RankConditionError,
               FileNotFoundError, IsADirectoryError, json.JSONDecodeError, KeyError)

PLANTS = {"ol-stable": OL_STABLE, "sparse": SPARSE}


def _err(msg: str) -> None:
    print(f"eddpc: {msg}", file=sys.stderr)


def _load_data(path):
    """Single dataset, or the list of runs of a run directory."""
    path = Path(path)
    if path.is_dir():
        return load_runs(path)
    return load_dataset(path)


def _floats(text: str):
    return [float(v) for v in text.replace(",", " ").split()]


# ---------------------------------------------------------------------------
# check

def _check_one(label, ds, order) -> bool:
    bound = min_samples(ds.m, ds.n)
    tau = order if order is not None else ds.n + 1
    print(f"{label}: m={ds.m} n={ds.n} T={ds.T}")
    ok = True
    if ds.T < bound:
        print(f"  length: T = {ds.T} is too short, T >= (m+1)n+m = {bound} is required")
        ok = False
    else:
        print(f"  length: T >= (m+1)n+m = {bound}: yes")
    if tau > ds.T:
        print(f"  PE of order {tau}: no (order exceeds T)")
        ok = False
    else:
        pe = check_persistency(ds, tau)
        print(f"  PE of order {tau}: {'yes' if pe.is_pe else 'no'} "
              f"(rank {pe.rank}/{pe.expected_rank}, smallest singular value {pe.min_singular_value:.3g})")
        ok = ok and pe.is_pe
    if ds.T >= bound:
        rc = check_rank_condition(data_matrices(ds))
        print(f"  rank [U; X0] = n+m: {'yes' if rc.is_pe else 'no'} "
              f"(rank {rc.rank}/{rc.expected_rank})")
        ok = ok and rc.is_pe
    return ok


def cmd_check(args) -> int:
    data = _load_data(args.data)
    if isinstance(data, list):
        ok = all(_check_one(f"run {k + 1}", ds, args.order) for k, ds in enumerate(data))
        ok = _check_one(f"average of {len(data)} runs", average_datasets(data), args.order) and ok
    else:
        ok = _check_one(str(args.data), data, args.order)
    return EXIT_OK if ok else EXIT_INVALID


# ---------------------------------------------------------------------------
# build

def cmd_build(args) -> int:
    config = load_config(args.config)
    overrides = {}
    if args.literal_appendix:
        overrides["literal_appendix"] = True
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.L is not None:
        overrides["L"] = args.L
    if args.merge is not None:
        overrides["merge"] = args.merge
    if overrides:
        config = BuildConfig.from_dict({**config.to_dict(), **overrides})
    data = _load_data(args.data)
    t0 = time.perf_counter()
    result = build_controller(data, config)
    elapsed = time.perf_counter() - t0
    size = save_bundle(bundle_from_build(result, config), args.out)
    rep = result.controller.build_report
    print(f"regions: {rep['regions']} (enumerated {rep['enumerated']}, "
          f"degenerate {rep['degenerate_skipped']}, empty {rep['empty_pruned']}, "
          f"merged {rep['merged']})")
    print(f"wrote {args.out} ({size / 1e3:.1f} kB) in {elapsed:.2f} s")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

def _plant(spec: str) -> LTIPlant:
    if spec in PLANTS:
        return PLANTS[spec]
    obj = json.loads(Path(spec).read_text())
    return LTIPlant(obj["A"], obj["B"])


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(np.asarray(rows).tolist())


def _simulate_lti(args, bundle) -> tuple:
    ctrl = bundle.controller
    plant = _plant(args.plant)
    if ctrl.mode != "regulation":
        raise PreconditionError("LTI simulation needs a regulation bundle; use --quadrotor "
                                "for tracking bundles")
    if ctrl.param_dim != plant.n:
        raise DimensionError(f"bundle expects {ctrl.param_dim} states, plant has {plant.n}")
    x0 = _floats(args.x0) if args.x0 else [1.0] * plant.n
    noise = None
    if args.noise_std:
        noise = NoiseModel.isotropic(args.noise_std, plant.n, args.noise_seed)
    traj = simulate_lti(plant, ctrl, x0, args.steps, noise)
    out = {"status": traj.status, "steps": traj.steps,
           "rmse_zero": metrics.rmse_zero(traj)}
    if traj.diagnostic:
        out["diagnostic"] = traj.diagnostic
    cols = [traj.times, traj.states.T, np.vstack([traj.inputs.T, np.full(plant.m, np.nan)])]
    header = (["t"] + [f"x{i + 1}" for i in range(plant.n)]
              + [f"u{i + 1}" for i in range(plant.m)])
    if args.oracle:
        if bundle.config is None:
            raise PreconditionError("bundle carries no build config; cannot build the oracle")
        cfg = BuildConfig.from_dict(bundle.config)
        oracle = build_from_model(plant.A, plant.B, cfg).controller
        star = simulate_lti(plant, oracle, x0, args.steps, noise)
        horizon = min(star.states.shape[1], traj.states.shape[1])
        out["rmse_oracle"] = metrics.rmse_oracle(traj, star, horizon)
        out["oracle_status"] = star.status
        Xs = np.full((traj.states.shape[1], plant.n), np.nan)
        Xs[:horizon] = star.states[:, :horizon].T
        cols.append(Xs)
        header += [f"x{i + 1}_oracle" for i in range(plant.n)]
    if args.bounds:
        lo, hi = _floats(args.bounds)
        out["bound_hits_pct"] = metrics.bound_hits(traj.inputs, lo, hi)
    return traj, out, header, np.column_stack(cols)


def _simulate_quadrotor(args, bundle) -> tuple:
    ctrl = bundle.controller
    if ctrl.mode != "tracking":
        raise PreconditionError("--quadrotor needs a tracking bundle")
    params = QuadrotorParams()
    s0 = np.zeros(12)
    s0[2] = args.start
    noise = None
    if args.noise_std:
        noise = NoiseModel.isotropic(args.noise_std, 2, args.noise_seed)
    target = args.target
    traj = simulate_quadrotor(params, ctrl, lambda t: np.array([target, 0.0, 0.0, 0.0]),
                              args.duration, x0=s0, noise=noise,
                              on_infeasible=args.on_infeasible)
    out = maneuver_metrics(traj, args.start, target)
    if traj.diagnostic:
        out["diagnostic"] = traj.diagnostic
    header = ["t", "z", "vz", "z_measured", "vz_measured", "z_ref", "u1"]
    rows = np.column_stack([traj.times, traj.states[2], traj.states[5], traj.measured[0],
                            traj.measured[1], np.append(traj.references[0], np.nan),
                            np.append(traj.extra["u1"], np.nan)])
    return traj, out, header, rows


def cmd_simulate(args) -> int:
    if (args.plant is None) == (not args.quadrotor):
        _err("give exactly one of --plant or --quadrotor")
        return EXIT_INVALID
    bundle = load_bundle(args.bundle)
    if args.quadrotor:
        traj, out, header, rows = _simulate_quadrotor(args, bundle)
    else:
        traj, out, header, rows = _simulate_lti(args, bundle)
    if args.out:
        _write_csv(args.out, header, rows)
    text = json.dumps(out, indent=2, default=float)
    if args.metrics:
        Path(args.metrics).write_text(text)
    print(text)
    if not traj.feasible:
        _err(traj.diagnostic)
        return EXIT_RUNTIME
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench

def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise PreconditionError(f"--set expects key=value, got {item!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def cmd_bench(args) -> int:
    overrides = _parse_set(args.set)
    if args.workers is not None:
        overrides["workers"] = args.workers
    t0 = time.perf_counter()
    report = run_benchmark(args.name, overrides, args.seed)
    paths = report.write(args.out)
    print(json.dumps(report.summary, indent=2, default=float))
    for p in paths:
        print(f"wrote {p}")
    print(f"{args.name} finished in {time.perf_counter() - t0:.1f} s")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eddpc",
                                 description="Explicit data-driven predictive control toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="excitation and rank report for a dataset or run directory")
    p.add_argument("data")
    p.add_argument("--order", type=int, default=None,
                   help="persistency order to test (default n+1)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("build", help="build an explicit controller bundle")
    p.add_argument("data", help="dataset file or run directory")
    p.add_argument("config", help="JSON build configuration")
    p.add_argument("--out", required=True)
    p.add_argument("--literal-appendix", action="store_true",
                   help="zero-padded tail rows in the prediction matrices")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--L", type=int, default=None, help="number of runs to average")
    p.add_argument("--merge", choices=("sequence", "first_move", "none"), default=None)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("simulate", help="closed-loop simulation of a bundle")
    p.add_argument("bundle")
    p.add_argument("--plant", default=None,
                   help="'ol-stable', 'sparse' or a JSON file with A and B")
    p.add_argument("--quadrotor", action="store_true", help="nonlinear quadrotor altitude loop")
    p.add_argument("--x0", default=None, help="initial state, comma separated")
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--noise-std", type=float, default=0.0)
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--oracle", action="store_true",
                   help="co-simulate the model-based controller and report RMSE against it")
    p.add_argument("--bounds", default=None, help="input bounds 'lo,hi' for the bound-hit metric")
    p.add_argument("--start", type=float, default=0.0, help="quadrotor initial altitude")
    p.add_argument("--target", type=float, default=1.0, help="quadrotor altitude reference")
    p.add_argument("--duration", type=float, default=6.0, help="quadrotor run length [s]")
    p.add_argument("--on-infeasible", choices=("stop", "hold", "nearest"), default="stop")
    p.add_argument("--out", default=None, help="trace CSV")
    p.add_argument("--metrics", default=None, help="also write the metrics JSON here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="run a scripted benchmark")
    p.add_argument("name", choices=BENCHMARKS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a benchmark setting (value parsed as JSON)")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        _err(f"build failed in stage {exc.stage!r}: {exc.cause}")
        # bad data (rank, excitation, shapes) is a validation failure
        return EXIT_INVALID if isinstance(exc.cause, _VALIDATION) else EXIT_RUNTIME
    except _VALIDATION as exc:
        _err(str(exc))
        return EXIT_INVALID
    except (EDDPCError, OSError, ValueError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
