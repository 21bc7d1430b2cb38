"""Scripted benchmark experiments and their report tables.

Three experiments are available through :func:`run_benchmark`:

``ol-stable``
    Two-state open-loop stable plant.  Monte Carlo over input realisations;
    for each number ``L`` of averaged noisy experiments the closed loop is
    compared with the model-based explicit controller.
``sparse``
    Three-state unstable plant with data collected under ``u = -x + r``;
    one build per noise level.
``quadrotor``
    Altitude E-DDPC on the nonlinear quadrotor: take-off/landing tests,
    sensitivity to the weights and a timing comparison with an online QP.
"""
from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..bundle import Bundle, bundle_to_dict
from ..dataio import Dataset, NoiseModel, noise_samples
from ..pipeline import BuildConfig, build_controller, build_from_model
from ..runtime import evaluate
from . import metrics
from .plants import OL_STABLE, SPARSE, LTIPlant, feedback_data, open_loop_data, simulate_lti
from .qp import reference_qp_solve
from .quadrotor import (TS, U1_MAX, U1_MIN, QuadrotorParams, altitude_plant,
                        collect_altitude_data, simulate_quadrotor)

BENCHMARKS = ("ol-stable", "sparse", "quadrotor")


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)

    def add(self, *row):
        self.rows.append(list(row))


@dataclass
class BenchmarkReport:
    name: str
    seed: int
    settings: dict
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)  # name -> (header, 2-D array, one row per sample)

    def write(self, out_dir) -> list:
        """Write one CSV per table and trace plus ``summary.json``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, table in self.tables.items():
            p = out / f"{self.name}_{name}.csv"
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(table.columns)
                w.writerows(table.rows)
            paths.append(p)
        for name, (header, data) in self.traces.items():
            p = out / f"{self.name}_trace_{name}.csv"
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                w.writerows(np.asarray(data).tolist())
            paths.append(p)
        p = out / f"{self.name}_summary.json"
        p.write_text(json.dumps({"benchmark": self.name, "seed": self.seed,
                                 "settings": self.settings, "summary": self.summary},
                                indent=2, default=float))
        paths.append(p)
        return paths


def _merge(defaults: dict, overrides: dict | None) -> dict:
    out = dict(defaults)
    for key, value in (overrides or {}).items():
        if key not in defaults:
            raise KeyError(f"unknown benchmark setting {key!r}; known: {sorted(defaults)}")
        out[key] = value
    return out


def _trace(traj) -> tuple:
    n, m = traj.states.shape[0], traj.inputs.shape[0]
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
    U = np.hstack([traj.inputs, np.full((m, 1), np.nan)])
    return header, np.column_stack([traj.times, traj.states.T, U.T])


# ---------------------------------------------------------------------------
# open-loop stable plant

OL_DEFAULTS = {
    "L_values": [1, 5, 10, 50, 100],
    "repeats": 20,
    "noise_std": 0.024,
    "T": 20,
    "input_range": 5.0,
    "Tv": 20,
    "x0": [1.0, 1.0],
    "N": 2,
    "workers": 1,
}


def ol_stable_config(N: int = 2) -> BuildConfig:
    return BuildConfig.from_dict({
        "mode": "regulation", "horizons": {"N": N}, "Q": [1.0, 1.0], "R": [[0.01]],
        "terminal": {"method": "auto"},
        "constraints": {"input_bounds": {"lower": [-2.0], "upper": [2.0]}},
    })


def ol_stable_runs(seed: int, runs: int, T: int = 20, input_range: float = 5.0,
                   noise_std: float = 0.024, plant: LTIPlant = OL_STABLE):
    """``runs`` noisy repetitions of one random-input experiment; returns ``(runs, clean)``."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(-input_range, input_range, size=(plant.m, T + 1))
    clean = open_loop_data(plant, u)
    noisy = [Dataset(u, clean.states + noise_samples(
        NoiseModel.isotropic(noise_std, plant.n, seed=seed * 1009 + k + 1), plant.n, T + 1))
        for k in range(runs)]
    return noisy, clean


def _ol_repeat(args):
    rep_seed, s = args
    cfg = ol_stable_config(s["N"])
    oracle = build_from_model(OL_STABLE.A, OL_STABLE.B, cfg).controller
    star = simulate_lti(OL_STABLE, oracle, s["x0"], s["Tv"])
    runs, clean = ol_stable_runs(rep_seed, max(s["L_values"]), s["T"], s["input_range"],
                                 s["noise_std"])
    out = []
    for L in s["L_values"]:
        try:
            ctrl = build_controller(runs, BuildConfig.from_dict({**cfg.to_dict(), "L": L})).controller
        except Exception as exc:  # a noisy build can fail (e.g. rank loss); recorded as NaN
            out.append((L, np.nan, 0, type(exc).__name__))
            continue
        traj = simulate_lti(OL_STABLE, ctrl, s["x0"], s["Tv"])
        if not traj.feasible:
            out.append((L, np.nan, len(ctrl), "infeasible"))
            continue
        out.append((L, metrics.rmse_oracle(traj, star, s["Tv"]), len(ctrl), ""))
    snr = metrics.snr_db([clean.states] * len(runs), [r.states for r in runs])
    return out, snr


def run_ol_stable(overrides=None, seed: int = 0) -> BenchmarkReport:
    s = _merge(OL_DEFAULTS, overrides)
    jobs = [(seed * 10_000 + r, s) for r in range(s["repeats"])]
    if s["workers"] > 1:
        with ProcessPoolExecutor(s["workers"]) as pool:
            results = list(pool.map(_ol_repeat, jobs))
    else:
        results = [_ol_repeat(j) for j in jobs]
    report = BenchmarkReport("ol-stable", seed, s)
    per_rep = Table(["repeat", "L", "rmse_oracle", "regions", "note"])
    for r, (rows, _) in enumerate(results):
        for row in rows:
            per_rep.add(r, *row)
    table = Table(["L", "rmse_oracle_mean", "rmse_oracle_std", "failed_runs", "regions_mean"])
    means = {}
    for L in s["L_values"]:
        vals = np.array([row[1] for rows, _ in results for row in rows if row[0] == L])
        regs = [row[2] for rows, _ in results for row in rows if row[0] == L and row[2]]
        ok = vals[np.isfinite(vals)]
        means[L] = float(ok.mean()) if ok.size else float("nan")
        table.add(L, means[L], float(ok.std()) if ok.size else float("nan"),
                  int(np.sum(~np.isfinite(vals))), float(np.mean(regs)) if regs else 0.0)
    report.tables["rmse_vs_L"] = table
    report.tables["repeats"] = per_rep
    cfg = ol_stable_config(s["N"])
    oracle = build_from_model(OL_STABLE.A, OL_STABLE.B, cfg).controller
    report.traces["oracle"] = _trace(simulate_lti(OL_STABLE, oracle, s["x0"], s["Tv"]))
    report.summary = {"rmse_oracle_mean": {str(k): v for k, v in means.items()},
                      "oracle_regions": len(oracle),
                      "average_snr_db": float(np.mean([snr for _, snr in results]))}
    return report


# ---------------------------------------------------------------------------
# sparse unstable plant

SPARSE_DEFAULTS = {
    "snr_values": [40.0, 30.0, 19.9, 10.0, 4.6],
    "L": 10,
    "T": 200,
    "Tv": 15,
    "reference_range": [-5.0, 10.0],
    "x0": [12.88, 10.95, -14.44],
    "N": 3,
    "trace_snr": 19.9,
    "workers": 1,
}


def sparse_config(N: int = 3) -> BuildConfig:
    return BuildConfig.from_dict({
        "mode": "regulation", "horizons": {"N": N}, "Q": [1.0, 1.0, 1.0],
        "R": [0.01, 0.01, 0.01],
        "terminal": {"method": "user-supplied", "P": [1.0, 1.0, 1.0]},
        "constraints": {"input_bounds": {"lower": [-2.0] * 3, "upper": [2.0] * 3}},
    })


def sparse_runs(seed: int, runs: int = 10, T: int = 200, snr_db: float = 19.9,
                reference_range=(-5.0, 10.0), plant: LTIPlant = SPARSE):
    """Closed-loop experiments under ``u = -x + r`` repeated with fresh measurement noise.

    The noise standard deviation of each channel is set from the power of the
    clean state so that the expected SNR equals ``snr_db``.
    """
    rng = np.random.default_rng(seed)
    r = rng.uniform(*reference_range, size=(plant.m, T + 1))
    clean = feedback_data(plant, r)
    power = np.mean(clean.states**2, axis=1)
    std = np.sqrt(power / 10.0**(snr_db / 10.0))
    noisy = [Dataset(clean.inputs, clean.states + noise_samples(
        NoiseModel(np.diag(std**2), seed=seed * 1009 + k + 1), plant.n, T + 1))
        for k in range(runs)]
    return noisy, clean


def run_sparse(overrides=None, seed: int = 0) -> BenchmarkReport:
    s = _merge(SPARSE_DEFAULTS, overrides)
    cfg = BuildConfig.from_dict({**sparse_config(s["N"]).to_dict(), "workers": s["workers"]})
    t0 = time.perf_counter()
    oracle = build_from_model(SPARSE.A, SPARSE.B, cfg).controller
    oracle_time = time.perf_counter() - t0
    star = simulate_lti(SPARSE, oracle, s["x0"], s["Tv"])
    report = BenchmarkReport("sparse", seed, s)
    table = Table(["target_snr_db", "snr_db", "rmse_oracle", "rmse_zero", "regions",
                   "build_seconds", "status"])
    rows = {}
    for k, snr in enumerate(s["snr_values"]):
        runs, clean = sparse_runs(seed * 100 + k, s["L"], s["T"], snr, s["reference_range"])
        achieved = metrics.snr_db([clean.states] * len(runs), [r.states for r in runs])
        t0 = time.perf_counter()
        ctrl = build_controller(runs, cfg).controller
        build_s = time.perf_counter() - t0
        traj = simulate_lti(SPARSE, ctrl, s["x0"], s["Tv"])
        if traj.feasible:
            ro = metrics.rmse_oracle(traj, star, s["Tv"])
            r0 = metrics.rmse_zero(traj, s["Tv"])
        else:
            ro = r0 = float("nan")
        table.add(snr, achieved, ro, r0, len(ctrl), build_s, traj.status)
        rows[str(snr)] = {"snr_db": achieved, "rmse_oracle": ro, "rmse_zero": r0,
                          "regions": len(ctrl), "build_seconds": build_s}
        if snr == s["trace_snr"]:
            report.traces[f"snr{snr:g}"] = _trace(traj)
    report.tables["rmse_vs_snr"] = table
    report.traces["oracle"] = _trace(star)
    report.summary = {"rows": rows, "oracle_regions": len(oracle),
                      "oracle_build_seconds": oracle_time,
                      "oracle_rmse_zero": metrics.rmse_zero(star, s["Tv"])}
    return report


# ---------------------------------------------------------------------------
# quadrotor altitude control

QUAD_DEFAULTS = {
    "runs": 10,
    "T": 400,
    "snr_db": 35.0,
    "N": 5,
    "q1": 1.0,
    "R": 0.01,
    "P": [100.0, 100.0],
    "cruise": 1.0,
    "duration": 6.0,
    "q1_values": [0.1, 1.0, 10.0, 100.0],
    "R_values": [1e-4, 1e-3, 1e-2],
    "sensitivity": True,
    "timing_states": 100,
    "workers": 1,
}


def quadrotor_config(q1: float = 1.0, R: float = 0.01, N: int = 5, P=(100.0, 100.0),
                     workers: int = 1) -> BuildConfig:
    return BuildConfig.from_dict({
        "mode": "tracking", "horizons": {"N": N}, "Q": [q1, 0.0], "R": [[R]],
        "terminal": {"method": "user-supplied", "P": list(P)},
        "constraints": {"input_bounds": {"lower": [U1_MIN], "upper": [U1_MAX]},
                        "state_bounds": {"lower": [0.0, None], "upper": [None, None]}},
        "workers": workers,
    })


def maneuver(params, ctrl, start: float, target: float, duration: float,
             noise: NoiseModel | None = None, on_infeasible: str = "stop"):
    x0 = np.zeros(12)
    x0[2] = start
    return simulate_quadrotor(params, ctrl, lambda t: np.array([target, 0.0, 0.0, 0.0]),
                              duration, x0=x0, noise=noise, on_infeasible=on_infeasible)


def maneuver_metrics(traj, start: float, target: float) -> dict:
    z = traj.states[2]
    u1 = traj.extra["u1"]
    out = {
        "status": traj.status,
        "steps": traj.steps,
        "fallback_steps": traj.extra.get("fallback_steps", 0),
        "settling_s": metrics.settling_time(traj.times, z, target) if target else None,
        "overshoot_pct": metrics.overshoot(z, target, start),
        "bound_hits_pct": metrics.bound_hits(traj.extra["u1"][None, :], U1_MIN, U1_MAX),
        "min_z": float(z.min()),
        "final_z": float(z[-1]),
        "u1_min": float(u1.min()) if u1.size else None,
        "u1_max": float(u1.max()) if u1.size else None,
    }
    return out


def _quad_trace(traj) -> tuple:
    header = ["t", "z", "vz", "z_measured", "vz_measured", "z_ref", "u1"]
    u1 = np.append(traj.extra["u1"], np.nan)
    zref = np.append(traj.references[0], np.nan)
    return header, np.column_stack([traj.times, traj.states[2], traj.states[5],
                                    traj.measured[0], traj.measured[1], zref, u1])


def timing_states(count: int, seed: int) -> np.ndarray:
    """Random tracking parameters ``[z, vz, u_prev, z_ref, 0]``."""
    rng = np.random.default_rng(seed)
    th = np.zeros((count, 5))
    th[:, 0] = rng.uniform(0.0, 4.0, count)
    th[:, 1] = rng.uniform(-2.0, 2.0, count)
    th[:, 2] = rng.uniform(U1_MIN, U1_MAX, count)
    th[:, 3] = rng.uniform(0.0, 4.0, count)
    return th


def time_calls(fn, thetas, repeats: int = 5) -> np.ndarray:
    """Wall-clock seconds of ``fn(theta)`` per state, best of ``repeats`` runs."""
    out = np.empty(len(thetas))
    for i, th in enumerate(thetas):
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn(th)
            best = min(best, time.perf_counter() - t0)
        out[i] = best
    return out


def compare_timing(ctrl, qp, thetas, repeats: int = 5) -> dict:
    """Explicit evaluation time against the online reference QP on the same states."""
    return {"explicit": time_calls(lambda th: evaluate(ctrl, th), thetas, repeats),
            "implicit": time_calls(lambda th: reference_qp_solve(qp, th), thetas, repeats)}


def run_quadrotor(overrides=None, seed: int = 0) -> BenchmarkReport:
    s = _merge(QUAD_DEFAULTS, overrides)
    params = QuadrotorParams()
    runs, clean = collect_altitude_data(params, s["runs"], s["T"], s["snr_db"], seed)
    report = BenchmarkReport("quadrotor", seed, s)
    achieved = metrics.snr_db([clean.states] * len(runs), [r.states for r in runs])
    # measurement noise of the same intensity as in the data for the tests
    std = np.sqrt(np.mean(clean.states**2, axis=1) / 10.0**(s["snr_db"] / 10.0))

    builds = {}

    def build(q1, R):
        key = (float(q1), float(R))
        if key not in builds:
            cfg = quadrotor_config(q1, R, s["N"], s["P"], s["workers"])
            t0 = time.perf_counter()
            res = build_controller(runs, cfg)
            builds[key] = (res, time.perf_counter() - t0, cfg)
        return builds[key]

    res, build_s, cfg = build(s["q1"], s["R"])
    ctrl = res.controller
    plant = altitude_plant()
    t0 = time.perf_counter()
    oracle = build_from_model(plant.A, plant.B, cfg)
    oracle_s = time.perf_counter() - t0

    # noisy tests fall back to the nearest region when a measurement leaves the partition
    tests = Table(["maneuver", "status", "T_sett_s", "S_max_pct", "B_pct", "min_z", "final_z",
                   "fallback_steps"])
    summary = {"snr_db": achieved, "regions": len(ctrl), "oracle_regions": len(oracle.controller),
               "build_seconds": build_s, "oracle_build_seconds": oracle_s,
               "build_report": ctrl.build_report}
    for k, (name, start, target) in enumerate((("takeoff", 0.0, s["cruise"]),
                                               ("landing", s["cruise"], 0.0))):
        noise = NoiseModel(np.diag(std**2), seed=seed * 7919 + k + 1)
        traj = maneuver(params, ctrl, start, target, s["duration"], noise,
                        on_infeasible="nearest")
        mm = maneuver_metrics(traj, start, target)
        tests.add(name, mm["status"], mm["settling_s"], mm["overshoot_pct"],
                  mm["bound_hits_pct"], mm["min_z"], mm["final_z"], mm["fallback_steps"])
        summary[name] = mm
        report.traces[name] = _quad_trace(traj)
    report.tables["tests"] = tests

    if s["sensitivity"]:
        for label, values, fixed in (("q1", s["q1_values"], "R"), ("R", s["R_values"], "q1")):
            table = Table([label, "T_sett_s", "S_max_pct", "B_pct", "regions"])
            for v in values:
                q1, R = (v, s["R"]) if label == "q1" else (s["q1"], v)
                r, _, _ = build(q1, R)
                traj = maneuver(params, r.controller, 0.0, s["cruise"], s["duration"])
                mm = maneuver_metrics(traj, 0.0, s["cruise"])
                table.add(v, mm["settling_s"], mm["overshoot_pct"], mm["bound_hits_pct"],
                          len(r.controller))
            report.tables[f"sensitivity_{label}"] = table

    thetas = timing_states(s["timing_states"], seed)
    t_dd = compare_timing(ctrl, res.qp, thetas)
    t_mb = time_calls(lambda th: evaluate(oracle.controller, th), thetas)
    storage = {
        "e_ddpc": len(json.dumps(bundle_to_dict(Bundle(ctrl, cfg.tolerances)))),
        "explicit": len(json.dumps(bundle_to_dict(Bundle(oracle.controller, cfg.tolerances)))),
        "implicit": len(json.dumps({k: np.asarray(getattr(res.qp, k)).tolist()
                                    for k in ("H", "F", "G", "W", "E")})),
    }
    comp = Table(["quantity", "implicit_mpc", "explicit_mpc", "e_ddpc"])
    comp.add("regions", "", len(oracle.controller), len(ctrl))
    comp.add("mean_time_s", float(t_dd["implicit"].mean()), float(t_mb.mean()),
             float(t_dd["explicit"].mean()))
    comp.add("median_time_s", float(np.median(t_dd["implicit"])),
             float(np.median(t_mb)), float(np.median(t_dd["explicit"])))
    comp.add("worst_time_s", float(t_dd["implicit"].max()), float(t_mb.max()),
             float(t_dd["explicit"].max()))
    comp.add("storage_kB", storage["implicit"] / 1e3, storage["explicit"] / 1e3,
             storage["e_ddpc"] / 1e3)
    report.tables["comparison"] = comp
    summary["timing"] = {"explicit_median_s": float(np.median(t_dd["explicit"])),
                         "implicit_median_s": float(np.median(t_dd["implicit"]))}
    report.summary = summary
    return report


def run_benchmark(name: str, overrides: dict | None = None, seed: int = 0) -> BenchmarkReport:
    """Run one of ``ol-stable``, ``sparse`` or ``quadrotor``."""
    if name == "ol-stable":
        return run_ol_stable(overrides, seed)
    if name == "sparse":
        return run_sparse(overrides, seed)
    if name == "quadrotor":
        return run_quadrotor(overrides, seed)
    raise KeyError(f"unknown benchmark {name!r}; choose one of {', '.join(BENCHMARKS)}")
