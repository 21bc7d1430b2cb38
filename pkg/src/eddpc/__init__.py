"""Explicit data-driven predictive control.

Build a piecewise-affine MPC law directly from input/state data:

>>> from eddpc import load_dataset, load_config, build_controller, evaluate
>>> result = build_controller(load_dataset("data.csv"), load_config("config.json"))  # doctest: +SKIP
>>> evaluate(result.controller, [1.0, 1.0]).input  # doctest: +SKIP
"""
from .bundle import Bundle, bundle_from_build, load_bundle, save_bundle
from .dataio import (Dataset, NoiseModel, average_datasets, check_persistency,
                     check_rank_condition, data_matrices, inject_noise, load_dataset,
                     load_runs, save_dataset, save_runs)
from .ddrep import DDRep, build_ddrep, build_prediction_matrices
from .errors import EDDPCError, ParseError, PipelineError
from .explicit import PWAController, check_continuity, enumerate_partition
from .mpqp import ConstraintSpec, CostSpec, MpQP
from .pipeline import BuildConfig, build_controller, build_from_model, load_config
from .runtime import evaluate, evaluate_nearest, evaluate_tracking, full_sequence, locate
from .terminal import TerminalDesign, design_terminal
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig

__version__ = "0.1.0"

__all__ = [
    "Bundle", "bundle_from_build", "load_bundle", "save_bundle",
    "Dataset", "NoiseModel", "average_datasets", "check_persistency", "check_rank_condition",
    "data_matrices", "inject_noise", "load_dataset", "load_runs", "save_dataset", "save_runs",
    "DDRep", "build_ddrep", "build_prediction_matrices",
    "EDDPCError", "ParseError", "PipelineError",
    "PWAController", "check_continuity", "enumerate_partition",
    "ConstraintSpec", "CostSpec", "MpQP",
    "BuildConfig", "build_controller", "build_from_model", "load_config",
    "evaluate", "evaluate_nearest", "evaluate_tracking", "full_sequence", "locate",
    "TerminalDesign", "design_terminal",
    "DEFAULT_TOLERANCES", "ToleranceConfig",
]
