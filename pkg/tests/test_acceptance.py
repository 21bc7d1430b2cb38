"""Acceptance criteria 1-10.

Each test records one PASS/FAIL line (shown in the "acceptance criteria"
section of the pytest summary) and then asserts the same condition.
"""
import time
import warnings

import numpy as np
import pytest

from eddpc.dataio import average_datasets, data_matrices
from eddpc.ddrep import build_ddrep
from eddpc.explicit import check_continuity
from eddpc.pipeline import build_controller
from eddpc.runtime import evaluate
from eddpc.simlab import SPARSE, QuadrotorParams, collect_altitude_data, reference_qp_solve
from eddpc.simlab.benchmarks import (compare_timing, maneuver, maneuver_metrics, ol_stable_config,
                                     ol_stable_runs, quadrotor_config, run_ol_stable, run_sparse,
                                     sparse_runs, timing_states)
from eddpc.simlab.quadrotor import U1_MAX, U1_MIN
from eddpc.terminal import lyapunov_residual, solve_dd_lqr, solve_dd_lyapunov, spectral_radius

# z >= 0 and the thrust bounds are checked up to floating-point round-off
ROUNDOFF = 1e-9


def _compare_with_reference(ctrl, qp, thetas):
    worst, mismatched, infeasible = 0.0, 0, 0
    for th in thetas:
        ev, sol = evaluate(ctrl, th), reference_qp_solve(qp, th)
        if (ev is None) != (not sol.feasible):
            mismatched += 1
        elif ev is None:
            infeasible += 1
        else:
            worst = max(worst, float(np.abs(ev.input - sol.U[:qp.m]).max()))
    return worst, mismatched, infeasible


def test_criterion_01_model_data_equivalence(acceptance, ol_data, ol_config, ol_oracle):
    t0 = time.perf_counter()
    ctrl = build_controller(ol_data, ol_config).controller
    rng = np.random.default_rng(101)
    gap = 0.0
    for x in rng.uniform(-10, 10, (1000, 2)):
        gap = max(gap, float(np.abs(evaluate(ctrl, x).input
                                    - evaluate(ol_oracle.controller, x).input).max()))
    elapsed = time.perf_counter() - t0
    ok = gap <= 1e-6 and elapsed < 30
    acceptance(1, ok, f"max first-move gap {gap:.2e} over 1000 states, {elapsed:.1f} s")
    assert ok


def test_criterion_02_explicit_implicit_equivalence(acceptance, ol_build, rand_problem):
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    w1, m1, i1 = _compare_with_reference(ol_build.controller, ol_build.qp,
                                         rng.uniform(-10, 10, (500, 2)))
    res = rand_problem[2]
    w2, m2, i2 = _compare_with_reference(res.controller, res.qp, rng.uniform(-2, 2, (500, 3)))
    elapsed = time.perf_counter() - t0
    ok = max(w1, w2) <= 1e-6 and m1 == m2 == 0 and elapsed < 120
    acceptance(2, ok, f"two-state gap {w1:.2e}, random n=3 m=2 gap {w2:.2e} "
                      f"({i2}/500 infeasible), verdict mismatches {m1 + m2}, {elapsed:.1f} s")
    assert ok


def test_criterion_03_region_count(acceptance, ol_build):
    n = len(ol_build.controller)
    if 9 < n <= 13:
        warnings.warn(f"two-state partition has {n} regions, expected 9")
    ok = 9 <= n <= 13
    acceptance(3, ok, f"{n} regions after merging (target 9)")
    assert ok


def test_criterion_04_monte_carlo_trend(acceptance):
    t0 = time.perf_counter()
    report = run_ol_stable({"repeats": 20, "L_values": [1, 5, 10, 50, 100]}, seed=0)
    means = [report.summary["rmse_oracle_mean"][str(L)] for L in (1, 5, 10, 50, 100)]
    elapsed = time.perf_counter() - t0
    monotone = all(b <= a for a, b in zip(means, means[1:]))
    ok = (monotone and means[-1] <= 0.02 and means[0] >= 2 * means[2] and elapsed < 900)
    acceptance(4, ok, "mean RMSE_O for L=1,5,10,50,100: "
                      + ", ".join(f"{v:.4f}" for v in means) + f", {elapsed:.0f} s")
    assert ok


@pytest.mark.slow
def test_criterion_05_sparse_benchmark(acceptance):
    t0 = time.perf_counter()
    report = run_sparse({"snr_values": [19.9]}, seed=0)
    row = report.summary["rows"]["19.9"]
    elapsed = time.perf_counter() - t0
    ok = (row["rmse_oracle"] <= 5e-3 and 4.0 <= row["rmse_zero"] <= 7.0 and elapsed < 1800)
    acceptance(5, ok, f"SNR {row['snr_db']:.1f} dB, RMSE_O {row['rmse_oracle']:.2e}, "
                      f"RMSE_0 {row['rmse_zero']:.3f}, {row['regions']} regions "
                      f"(reference 791, oracle {report.summary['oracle_regions']}), "
                      f"{elapsed:.0f} s")
    assert ok


def test_criterion_06_continuity(acceptance, ol_build):
    worst, n = check_continuity(ol_build.controller, samples=200)
    ok = n >= 200 and worst <= 1e-6
    acceptance(6, ok, f"max facet mismatch {worst:.2e} over {n} points")
    assert ok


def test_criterion_07_terminal_design(acceptance, ol_build):
    rep = ol_build.rep
    lyap = solve_dd_lyapunov(rep, np.eye(2))
    res = lyapunov_residual(rep.xi, lyap.P, np.eye(2))
    runs, _ = sparse_runs(0, 10, 200, 19.9)
    srep = build_ddrep(data_matrices(average_datasets(runs)))
    lqr = solve_dd_lqr(srep, np.eye(3), 0.01 * np.eye(3))
    rho_true = spectral_radius(SPARSE.A + SPARSE.B @ lqr.K)
    rho_data = spectral_radius(srep.xi + srep.gamma @ lqr.K)
    ok = res <= 1e-10 and rho_true < 1 and rho_data < 1
    acceptance(7, ok, f"Lyapunov residual {res:.1e}; LQR closed-loop radius {rho_true:.4f} "
                      f"(open loop {spectral_radius(SPARSE.A):.4f})")
    assert ok


def test_criterion_08_consistency(acceptance):
    Ls = [1, 4, 16, 64, 256]
    cfg = ol_stable_config()
    # first-move gap on the operating box of the closed-loop tests
    g = np.linspace(-2, 2, 41)
    grid = np.array([[a, b] for a in g for b in g])
    errs = np.zeros((10, len(Ls)))
    gaps = np.zeros((10, len(Ls)))
    for s in range(10):
        runs, clean = ol_stable_runs(s, 256)
        ref = build_controller(clean, cfg).controller
        u_ref = np.array([evaluate(ref, x).input for x in grid])
        for j, L in enumerate(Ls):
            avg = average_datasets(runs, L)
            errs[s, j] = np.sqrt(np.mean((avg.states - clean.states) ** 2))
            ctrl = build_controller(avg, cfg).controller
            u = np.array([evaluate(ctrl, x).input for x in grid])
            gaps[s, j] = np.abs(u - u_ref).max()
    slope = np.polyfit(np.log(Ls), np.log(errs.mean(axis=0)), 1)[0]
    med = np.median(gaps, axis=0)
    monotone = all(b <= a for a, b in zip(med, med[1:]))
    ok = abs(slope + 0.5) <= 0.15 and monotone
    acceptance(8, ok, f"slope {slope:.3f}; median gaps "
                      + ", ".join(f"{v:.3f}" for v in med))
    assert ok


@pytest.fixture(scope="module")
def quad_build():
    params = QuadrotorParams()
    runs, _ = collect_altitude_data(params, 10, 400, 35.0, seed=0)
    t0 = time.perf_counter()
    res = build_controller(runs, quadrotor_config())
    return params, res, time.perf_counter() - t0


def _within_bounds(mm, traj):
    u1 = traj.extra["u1"]
    return (mm["min_z"] >= -ROUNDOFF and u1.min() >= U1_MIN - ROUNDOFF
            and u1.max() <= U1_MAX + ROUNDOFF)


@pytest.mark.slow
def test_criterion_09_quadrotor(acceptance, quad_build):
    params, res, build_s = quad_build
    t0 = time.perf_counter()
    up = maneuver(params, res.controller, 0.0, 1.0, 6.0)
    mu = maneuver_metrics(up, 0.0, 1.0)
    down = maneuver(params, res.controller, 1.0, 0.0, 6.0)
    md = maneuver_metrics(down, 1.0, 0.0)
    elapsed = build_s + time.perf_counter() - t0
    takeoff = (up.feasible and mu["settling_s"] is not None and 1.0 <= mu["settling_s"] <= 4.0
               and mu["overshoot_pct"] <= 5.0 and _within_bounds(mu, up))
    landing = down.feasible and md["final_z"] <= 0.02 and _within_bounds(md, down)
    ok = takeoff and landing and elapsed < 300
    acceptance(9, ok, f"{len(res.controller)} regions; take-off T_sett {mu['settling_s']:.3f} s, "
                      f"S_max {mu['overshoot_pct']:.2f}%, min z {mu['min_z']:.1e}; "
                      f"landing final z {md['final_z']:.1e}; {elapsed:.0f} s")
    assert ok


@pytest.mark.slow
def test_criterion_10_timing(acceptance, quad_build):
    _, res, _ = quad_build
    t = compare_timing(res.controller, res.qp, timing_states(100, seed=0))
    ex, im = float(np.median(t["explicit"])), float(np.median(t["implicit"]))
    ok = ex <= im
    acceptance(10, ok, f"median explicit {ex * 1e6:.1f} us vs online QP {im * 1e6:.1f} us")
    assert ok
