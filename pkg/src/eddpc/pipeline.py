"""Declarative build configuration and the end-to-end offline pipeline.

The configuration is a JSON object; see FORMATS.md for the full schema.
A minimal regulation example::

    {"mode": "regulation", "horizons": {"N": 2},
     "Q": [[1, 0], [0, 1]], "R": [[0.01]],
     "terminal": {"method": "lyapunov"},
     "constraints": {"input_bounds": {"lower": [-2], "upper": [2]}}}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataio import Dataset, ExcitationReport, average_datasets, check_rank_condition, data_matrices
from .ddrep import DDRep, PredictionMatrices, build_ddrep, build_prediction_matrices
from .errors import PipelineError, PreconditionError
from .explicit import PWAController, enumerate_partition
from .mpqp import CostSpec, ConstraintSpec, MpQP, assemble_regulation, assemble_tracking
from .terminal import TerminalDesign, design_terminal
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig


def _mat(value, rows=None):
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = np.diag(a) if rows is None else a.reshape(rows, -1)
    return a


@dataclass(frozen=True)
class BuildConfig:
    Q: np.ndarray
    R: np.ndarray
    horizons: tuple
    mode: str = "regulation"
    terminal_method: str = "auto"
    P: np.ndarray | None = None
    K: np.ndarray | None = None
    constraints: dict = field(default_factory=dict)
    tolerances: ToleranceConfig = DEFAULT_TOLERANCES
    literal_appendix: bool = False
    merge: str = "sequence"
    workers: int = 1
    L: int | None = None

    def __post_init__(self):
        if self.mode not in ("regulation", "tracking"):
            raise PreconditionError(f"unknown mode {self.mode!r}")
        if self.terminal_method not in ("auto", "lyapunov", "lqr", "user-supplied"):
            raise PreconditionError(f"unknown terminal method {self.terminal_method!r}")
        if self.terminal_method == "user-supplied" and self.P is None:
            raise PreconditionError("a user-supplied terminal design needs P")

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def m(self) -> int:
        return self.R.shape[0]

    @classmethod
    def from_dict(cls, cfg: dict) -> "BuildConfig":
        h = cfg.get("horizons", {})
        if isinstance(h, (int, float)):
            h = {"N": h}
        if isinstance(h, (list, tuple)):
            horizons = tuple(int(v) for v in h)
        else:
            N = h.get("N")
            horizons = (int(h.get("Nx", N)), int(h.get("Nu", N)), int(h.get("Nc", N)))
        if any(v is None for v in horizons):
            raise PreconditionError("horizons need N or all of Nx, Nu, Nc")
        term = cfg.get("terminal", {"method": "auto"})
        tol = cfg.get("tolerances")
        return cls(
            Q=_mat(cfg["Q"]), R=_mat(cfg["R"]), horizons=horizons,
            mode=cfg.get("mode", "regulation"),
            terminal_method=term.get("method", "auto"),
            P=None if term.get("P") is None else _mat(term["P"]),
            K=None if term.get("K") is None else np.atleast_2d(np.asarray(term["K"], dtype=float)),
            constraints=cfg.get("constraints", {}),
            tolerances=DEFAULT_TOLERANCES if tol is None else ToleranceConfig.from_dict(tol),
            literal_appendix=bool(cfg.get("literal_appendix", False)),
            merge=cfg.get("merge", "sequence"),
            workers=int(cfg.get("workers", 1)),
            L=cfg.get("L"),
        )

    def to_dict(self) -> dict:
        Nx, Nu, Nc = self.horizons
        term = {"method": self.terminal_method}
        if self.P is not None:
            term["P"] = np.asarray(self.P).tolist()
        if self.K is not None:
            term["K"] = np.asarray(self.K).tolist()
        return {
            "mode": self.mode, "horizons": {"Nx": Nx, "Nu": Nu, "Nc": Nc},
            "Q": self.Q.tolist(), "R": self.R.tolist(), "terminal": term,
            "constraints": self.constraints, "tolerances": self.tolerances.to_dict(),
            "literal_appendix": self.literal_appendix, "merge": self.merge,
            "workers": self.workers, "L": self.L,
        }


def load_config(path) -> BuildConfig:
    with open(path) as fh:
        return BuildConfig.from_dict(json.load(fh))


def constraint_spec(spec: dict, n: int, m: int) -> ConstraintSpec:
    """Build stage constraints from explicit rows and/or bound shortcuts."""
    out = ConstraintSpec.unconstrained(n, m)
    if not spec:
        return out
    if "d" in spec:
        q = len(spec["d"])
        Cx = np.asarray(spec.get("Cx", np.zeros((q, n))), dtype=float).reshape(q, n)
        Cu = np.asarray(spec.get("Cu", np.zeros((q, m))), dtype=float).reshape(q, m)
        out = out.stack(ConstraintSpec(Cx, Cu, spec["d"]))
    for key, size, eye_x in (("input_bounds", m, False), ("state_bounds", n, True)):
        bounds = spec.get(key)
        if not bounds:
            continue
        lower = bounds.get("lower", [None] * size)
        upper = bounds.get("upper", [None] * size)
        rows_x, rows_u, d = [], [], []
        for i in range(size):
            for sign, value in ((1.0, upper[i]), (-1.0, lower[i])):
                if value is None:
                    continue
                e = np.zeros(size)
                e[i] = sign
                rows_x.append(e if eye_x else np.zeros(n))
                rows_u.append(np.zeros(m) if eye_x else e)
                d.append(sign * float(value))
        if d:
            out = out.stack(ConstraintSpec(np.array(rows_x), np.array(rows_u), d))
    return out


@dataclass(frozen=True)
class BuildResult:
    controller: PWAController
    rep: DDRep
    terminal: TerminalDesign
    qp: MpQP
    prediction: PredictionMatrices
    excitation: ExcitationReport
    dataset: Dataset


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc


def terminal_for(config: BuildConfig, rep: DDRep) -> TerminalDesign:
    if config.terminal_method == "user-supplied":
        K = np.zeros((rep.m, rep.n)) if config.K is None else config.K
        return TerminalDesign(config.P, K, "user-supplied")
    return design_terminal(rep, config.Q, config.R, config.terminal_method)


def build_qp(config: BuildConfig, rep: DDRep, provenance: str = "data-driven"):
    """Terminal design, prediction matrices and the mp-QP for a representation."""
    term = _stage("terminal", terminal_for, config, rep)
    K = term.K if config.mode == "regulation" else None
    pm = _stage("prediction", build_prediction_matrices, rep, config.horizons, K,
                config.literal_appendix)
    cost = _stage("mpqp", CostSpec, config.Q, config.R, term.P)
    cons = _stage("mpqp", constraint_spec, config.constraints, rep.n, rep.m)
    if config.mode == "tracking":
        qp = _stage("mpqp", assemble_tracking, pm, cost, cons, provenance=provenance)
    else:
        qp = _stage("mpqp", assemble_regulation, pm, cost, cons, provenance=provenance)
    return term, pm, qp


def build_controller(data, config: BuildConfig) -> BuildResult:
    """Averaging (for several runs), representation, terminal design, mp-QP, partition."""
    if isinstance(data, Dataset):
        dataset = data
    else:
        runs: Sequence[Dataset] = list(data)
        dataset = _stage("averaging", average_datasets, runs, config.L)
    dm = _stage("data", data_matrices, dataset)
    report = _stage("excitation", check_rank_condition, dm, config.tolerances)
    rep = _stage("representation", build_ddrep, dm, config.tolerances)
    term, pm, qp = build_qp(config, rep)
    ctrl = _stage("explicit", enumerate_partition, qp, config.tolerances,
                  merge=config.merge, workers=config.workers)
    return BuildResult(ctrl, rep, term, qp, pm, report, dataset)


def build_from_model(A, B, config: BuildConfig) -> BuildResult:
    """Same pipeline with the exact model in place of the data (oracle)."""
    rep = DDRep.from_model(A, B)
    term, pm, qp = build_qp(config, rep, provenance="model-based")
    ctrl = _stage("explicit", enumerate_partition, qp, config.tolerances,
                  merge=config.merge, workers=config.workers)
    return BuildResult(ctrl, rep, term, qp, pm, None, None)
