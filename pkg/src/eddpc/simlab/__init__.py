"""Simulation laboratory: plants, reference QP solver, oracles, metrics and benchmarks."""
from .benchmarks import BENCHMARKS, BenchmarkReport, Table, run_benchmark
from .metrics import bound_hits, overshoot, rmse_oracle, rmse_zero, settling_time, snr_db
from .oracle import build_oracle_controller, oracle_qp
from .plants import OL_STABLE, SPARSE, LTIPlant, Trajectory, feedback_data, open_loop_data, simulate_lti
from .qp import QPSolution, is_feasible, projected_gradient_solve, reference_qp_solve
from .quadrotor import QuadrotorParams, altitude_plant, collect_altitude_data, simulate_quadrotor

__all__ = [
    "BENCHMARKS", "BenchmarkReport", "Table", "run_benchmark",
    "bound_hits", "overshoot", "rmse_oracle", "rmse_zero", "settling_time", "snr_db",
    "build_oracle_controller", "oracle_qp",
    "OL_STABLE", "SPARSE", "LTIPlant", "Trajectory", "feedback_data", "open_loop_data",
    "simulate_lti",
    "QPSolution", "is_feasible", "projected_gradient_solve", "reference_qp_solve",
    "QuadrotorParams", "altitude_plant", "collect_altitude_data", "simulate_quadrotor",
]
