"""Experiment data: loading, Hankel matrices, excitation checks and averaging.

A :class:`Dataset` holds one experiment ``u(0..T)``, ``y(0..T)`` where the
measured states ``y`` may carry additive measurement noise.  Arrays are stored
with time along the columns, i.e. ``inputs`` is ``m x (T+1)``.
"""
from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, ParseError, PreconditionError
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        u = _frozen(self.inputs)
        x = _frozen(self.states)
        if u.ndim == 1:
            u = _frozen(u[None, :])
        if x.ndim == 1:
            x = _frozen(x[None, :])
        if u.ndim != 2 or x.ndim != 2:
            raise DimensionError("inputs and states must be 2-D (channels x time)")
        if u.shape[1] != x.shape[1]:
            raise DimensionError(
                f"inputs have {u.shape[1]} samples but states have {x.shape[1]}")
        if u.shape[0] < 1 or x.shape[0] < 1:
            raise DimensionError("need at least one input and one state channel")
        if u.shape[1] < 2:
            raise DimensionError("need at least two samples (T >= 1)")
        object.__setattr__(self, "inputs", u)
        object.__setattr__(self, "states", x)

    @property
    def m(self) -> int:
        return self.inputs.shape[0]

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @property
    def T(self) -> int:
        return self.inputs.shape[1] - 1


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean white Gaussian measurement noise with covariance ``cov``."""

    cov: np.ndarray
    seed: int = 0

    def __post_init__(self):
        cov = _frozen(np.atleast_2d(self.cov))
        if cov.shape[0] != cov.shape[1]:
            raise DimensionError("noise covariance must be square")
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12:
            raise PreconditionError("noise covariance must be symmetric")
        if cov.size and np.min(np.linalg.eigvalsh(cov)) < -1e-12:
            raise PreconditionError("noise covariance must be positive semidefinite")
        object.__setattr__(self, "cov", cov)

    @classmethod
    def isotropic(cls, std: float, n: int, seed: int = 0) -> "NoiseModel":
        return cls(std**2 * np.eye(n), seed)


@dataclass(frozen=True)
class DataMatrices:
    U01T: np.ndarray
    X0T: np.ndarray
    X1T: np.ndarray
    stacked: np.ndarray = field(init=False)

    def __post_init__(self):
        for name in ("U01T", "X0T", "X1T"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        T = self.U01T.shape[1]
        if self.X0T.shape[1] != T or self.X1T.shape[1] != T:
            raise DimensionError("data matrices must share the column count T")
        object.__setattr__(self, "stacked", _frozen(np.vstack([self.U01T, self.X0T])))

    @property
    def m(self) -> int:
        return self.U01T.shape[0]

    @property
    def n(self) -> int:
        return self.X0T.shape[0]

    @property
    def T(self) -> int:
        return self.U01T.shape[1]


@dataclass(frozen=True)
class ExcitationReport:
    is_pe: bool
    rank: int
    min_singular_value: float
    expected_rank: int

    def __bool__(self):
        return self.is_pe


def data_matrices(dataset: Dataset) -> DataMatrices:
    """Split a dataset into ``U_{0,1,T}``, ``X_{0,T}`` and ``X_{1,T}``."""
    return DataMatrices(
        U01T=dataset.inputs[:, :-1],
        X0T=dataset.states[:, :-1],
        X1T=dataset.states[:, 1:],
    )


def hankel(seq, depth: int) -> np.ndarray:
    """Block-Hankel matrix of depth ``depth`` built from every column of ``seq``.

    For ``seq`` of shape ``q x N`` the result is ``q*depth x (N-depth+1)`` and
    block ``(i, j)`` equals column ``i + j`` of ``seq``.  Pass ``u(0..T-1)`` to
    obtain ``U_{0,depth,T}``.
    """
    seq = np.atleast_2d(np.asarray(seq, dtype=float))
    q, cols = seq.shape
    if depth < 1:
        raise DimensionError("Hankel depth must be positive")
    if depth > cols:
        raise DimensionError(f"Hankel depth {depth} exceeds the {cols} available samples")
    width = cols - depth + 1
    return np.vstack([seq[:, i:i + width] for i in range(depth)])


def _numerical_rank(M: np.ndarray, rel: float):
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0, 0.0
    thresh = max(M.shape) * s[0] * rel
    return int(np.sum(s > thresh)), float(s[-1])


def check_persistency(dataset: Dataset, order: int,
                      tol: ToleranceConfig = DEFAULT_TOLERANCES) -> ExcitationReport:
    """Check whether the input of ``dataset`` is persistently exciting of ``order``."""
    if order < 1 or order > dataset.T:
        raise PreconditionError(
            f"excitation order must satisfy 1 <= order <= T = {dataset.T}, got {order}")
    # u(0..T-1): the samples that enter U_{0,1,T}
    Hu = hankel(dataset.inputs[:, :dataset.T], order)
    expected = dataset.m * order
    rank, smin = _numerical_rank(Hu, tol.pe_rank_rel)
    return ExcitationReport(rank == expected, rank, smin, expected)


def min_samples(m: int, n: int) -> int:
    """Shortest experiment length ``(m+1)n + m`` for which the rank condition can hold."""
    return (m + 1) * n + m


def check_rank_condition(dm: DataMatrices,
                         tol: ToleranceConfig = DEFAULT_TOLERANCES) -> ExcitationReport:
    """Check ``rank([U_{0,1,T}; X_{0,T}]) == n + m``."""
    bound = min_samples(dm.m, dm.n)
    if dm.T < bound:
        raise PreconditionError(
            f"dataset too short: T = {dm.T} but T >= (m+1)n+m = {bound} is required")
    expected = dm.m + dm.n
    rank, smin = _numerical_rank(dm.stacked, tol.pe_rank_rel)
    return ExcitationReport(rank == expected, rank, smin, expected)


def average_datasets(runs: Sequence[Dataset], L: int | None = None) -> Dataset:
    """Average the measured states of ``L`` experiments sharing one input sequence.

    Only the first ``L`` runs are used (all of them when ``L`` is None).  The
    mean is taken with ``math.fsum`` per entry so the result does not depend
    on the order of ``runs``.
    """
    runs = list(runs)
    if L is None:
        L = len(runs)
    if L < 1:
        raise PreconditionError("need at least one run to average")
    if L > len(runs):
        raise PreconditionError(f"asked to average {L} runs but only {len(runs)} given")
    runs = runs[:L]
    ref = runs[0]
    for k, run in enumerate(runs[1:], start=1):
        if run.inputs.shape != ref.inputs.shape or run.states.shape != ref.states.shape:
            raise DimensionError(f"run {k} has different dimensions from run 0")
        if np.max(np.abs(run.inputs - ref.inputs)) > 1e-15:
            raise PreconditionError(
                "averaging requires the same input sequence in every experiment "
                f"(run {k} differs)")
    if L == 1:
        return ref
    stack = np.stack([r.states for r in runs], axis=-1)
    mean = np.array([[math.fsum(stack[i, t]) for t in range(stack.shape[1])]
                     for i in range(stack.shape[0])]) / L
    return Dataset(ref.inputs, mean)


def noise_samples(noise: NoiseModel, shape_n: int, count: int) -> np.ndarray:
    """Draw ``count`` independent noise vectors, returned as ``n x count``."""
    if noise.cov.shape != (shape_n, shape_n):
        raise DimensionError(
            f"noise covariance is {noise.cov.shape}, expected ({shape_n}, {shape_n})")
    w, V = np.linalg.eigh(noise.cov)
    root = V * np.sqrt(np.clip(w, 0.0, None))
    rng = np.random.default_rng(noise.seed)
    return root @ rng.standard_normal((shape_n, count))


def inject_noise(dataset: Dataset, noise: NoiseModel) -> Dataset:
    """Return a copy of ``dataset`` with measurement noise added to its states."""
    v = noise_samples(noise, dataset.n, dataset.T + 1)
    return Dataset(dataset.inputs, dataset.states + v)


# ---------------------------------------------------------------------------
# file formats

_HEADER_RE = re.compile(r"^(u|x)(\d+)$")


def _parse_header(header):
    u_idx, x_idx = [], []
    for col, name in enumerate(header):
        match = _HEADER_RE.match(name.strip())
        if not match:
            raise ParseError("unrecognised column name", row=1, column=name)
        (u_idx if match.group(1) == "u" else x_idx).append((int(match.group(2)), col))
    for label, idx in (("u", u_idx), ("x", x_idx)):
        numbers = sorted(i for i, _ in idx)
        if numbers != list(range(1, len(numbers) + 1)):
            raise ParseError(f"{label} columns must be numbered 1..k", row=1)
        if not numbers:
            raise ParseError(f"no {label} columns in header", row=1)
    u_cols = [c for _, c in sorted(u_idx)]
    x_cols = [c for _, c in sorted(x_idx)]
    return u_cols, x_cols


def _load_csv(path: Path) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = rows[0]
    u_cols, x_cols = _parse_header(header)
    data = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DimensionError(
                f"{path}: row {i} has {len(row)} fields, header has {len(header)}")
        for j, cell in enumerate(row):
            try:
                data[i - 2, j] = float(cell)
            except ValueError:
                raise ParseError(f"{path}: not a number: {cell!r}", row=i,
                                 column=header[j]) from None
    if data.shape[0] < 2:
        raise ParseError(f"{path}: need at least two data rows")
    return Dataset(data[:, u_cols].T, data[:, x_cols].T)


def _load_json(path: Path) -> Dataset:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc.msg}", row=exc.lineno) from None
    for key in ("m", "n", "T", "u", "x"):
        if key not in obj:
            raise ParseError(f"{path}: missing key {key!r}")
    try:
        u = np.array(obj["u"], dtype=float)
        x = np.array(obj["x"], dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"{path}: 'u' and 'x' must be rectangular numeric arrays") from None
    m, n, T = int(obj["m"]), int(obj["n"]), int(obj["T"])
    if u.shape != (T + 1, m) or x.shape != (T + 1, n):
        raise DimensionError(
            f"{path}: expected u {(T + 1, m)} and x {(T + 1, n)}, got {u.shape} and {x.shape}")
    return Dataset(u.T, x.T)


def load_dataset(path, format: str | None = None) -> Dataset:
    """Read a dataset from CSV or JSON (format inferred from the suffix if omitted)."""
    path = Path(path)
    if format is None:
        format = path.suffix.lstrip(".").lower()
    if format == "csv":
        return _load_csv(path)
    if format == "json":
        return _load_json(path)
    raise ParseError(f"unsupported dataset format {format!r}")


def save_dataset(dataset: Dataset, path, format: str | None = None) -> None:
    path = Path(path)
    if format is None:
        format = path.suffix.lstrip(".").lower()
    if format == "csv":
        header = [f"u{i + 1}" for i in range(dataset.m)] + [f"x{i + 1}" for i in range(dataset.n)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t in range(dataset.T + 1):
                row = list(dataset.inputs[:, t]) + list(dataset.states[:, t])
                writer.writerow([repr(float(v)) for v in row])
    elif format == "json":
        obj = {
            "m": dataset.m,
            "n": dataset.n,
            "T": dataset.T,
            "u": dataset.inputs.T.tolist(),
            "x": dataset.states.T.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(obj, fh)
    else:
        raise ParseError(f"unsupported dataset format {format!r}")


def load_runs(directory) -> list[Dataset]:
    """Load every ``run_*.csv`` / ``run_*.json`` file of a run directory, sorted by name."""
    directory = Path(directory)
    files = sorted(p for p in directory.iterdir()
                   if p.name.startswith("run_") and p.suffix in (".csv", ".json"))
    if not files:
        raise ParseError(f"{directory}: no run_*.csv or run_*.json files")
    return [load_dataset(p) for p in files]


def save_runs(runs: Sequence[Dataset], directory, format: str = "csv") -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, run in enumerate(runs, start=1):
        p = directory / f"run_{k:04d}.{format}"
        save_dataset(run, p, format)
        paths.append(p)
    return paths
