"""Controller bundles: a self-contained JSON file per explicit controller.

Python's ``json`` writes floats with ``repr``, which round-trips every finite
double exactly, so a saved and reloaded controller evaluates bit-identically.
The schema is described in FORMATS.md.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ddrep import DDRep
from .errors import ParseError
from .explicit import ActiveSet, PWAController, RegionLaw
from .mpqp import MpQP
from .polyhedra import Polyhedron
from .terminal import TerminalDesign
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig

FORMAT_VERSION = 1


@dataclass(frozen=True)
class Bundle:
    controller: PWAController
    tolerances: ToleranceConfig = DEFAULT_TOLERANCES
    terminal: TerminalDesign | None = None
    rep: DDRep | None = None
    config: dict | None = None


def _arr(a):
    return np.asarray(a, dtype=float).tolist()


def _matrix(value, cols: int) -> np.ndarray:
    a = np.asarray(value, dtype=float)
    return a.reshape(-1, cols) if a.size == 0 else a


def _region_to_dict(r: RegionLaw) -> dict:
    out = {
        "A": _arr(r.region.A), "b": _arr(r.region.b),
        "F1": _arr(r.F1), "g1": _arr(r.g1),
        "Fseq": _arr(r.Fseq), "Gseq": _arr(r.Gseq),
        "active_set": list(r.active_set.indices),
    }
    if r.center is not None:
        out["center"] = _arr(r.center)
    if r.pieces:
        out["pieces"] = [_region_to_dict(pc) for pc in r.pieces]
    return out


def _region_from_dict(d: dict, p: int) -> RegionLaw:
    return RegionLaw(
        Fseq=_matrix(d["Fseq"], p), Gseq=np.asarray(d["Gseq"], dtype=float),
        F1=_matrix(d["F1"], p), g1=np.asarray(d["g1"], dtype=float),
        region=Polyhedron(_matrix(d["A"], p), np.asarray(d["b"], dtype=float)),
        active_set=ActiveSet(tuple(d["active_set"])),
        center=None if d.get("center") is None else np.asarray(d["center"], dtype=float),
        pieces=tuple(_region_from_dict(pc, p) for pc in d.get("pieces", ())),
    )


def _qp_to_dict(qp: MpQP) -> dict:
    return {"H": _arr(qp.H), "F": _arr(qp.F), "G": _arr(qp.G), "W": _arr(qp.W),
            "E": _arr(qp.E), "S": _arr(qp.S), "m": qp.m,
            "provenance": qp.provenance, "mode": qp.mode}


def _qp_from_dict(d: dict) -> MpQP:
    H = np.asarray(d["H"], dtype=float)
    F = np.asarray(d["F"], dtype=float)
    nu, p = H.shape[0], F.shape[0]
    return MpQP(H=H, F=F, G=_matrix(d["G"], nu), W=np.asarray(d["W"], dtype=float),
                E=_matrix(d["E"], p), S=_matrix(d["S"], p), m=int(d["m"]),
                provenance=d.get("provenance", "data-driven"), mode=d.get("mode", "regulation"))


def bundle_to_dict(bundle: Bundle) -> dict:
    ctrl = bundle.controller
    out = {
        "format": "eddpc-controller",
        "version": FORMAT_VERSION,
        "param_dim": ctrl.param_dim,
        "input_dim": ctrl.input_dim,
        "mode": ctrl.mode,
        "provenance": ctrl.provenance,
        "tolerances": bundle.tolerances.to_dict(),
        "build_report": ctrl.build_report,
        "regions": [_region_to_dict(r) for r in ctrl.regions],
        "mpqp": None if ctrl.qp is None else _qp_to_dict(ctrl.qp),
    }
    if bundle.terminal is not None:
        out["terminal"] = {"P": _arr(bundle.terminal.P), "K": _arr(bundle.terminal.K),
                           "method": bundle.terminal.method}
    if bundle.rep is not None:
        out["predictor"] = _arr(bundle.rep.predictor)
    if bundle.config is not None:
        out["config"] = bundle.config
    return out


def bundle_from_dict(d: dict) -> Bundle:
    if d.get("format") != "eddpc-controller":
        raise ParseError("not a controller bundle (missing format tag)")
    if d.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported bundle version {d.get('version')!r}")
    try:
        p = int(d["param_dim"])
        ctrl = PWAController(
            regions=tuple(_region_from_dict(r, p) for r in d["regions"]),
            param_dim=p, input_dim=int(d["input_dim"]), mode=d["mode"],
            provenance=d["provenance"], build_report=dict(d.get("build_report", {})),
            qp=None if d.get("mpqp") is None else _qp_from_dict(d["mpqp"]),
        )
        term = d.get("terminal")
        terminal = None if term is None else TerminalDesign(
            np.asarray(term["P"], dtype=float), np.asarray(term["K"], dtype=float),
            term["method"])
        rep = None if d.get("predictor") is None else DDRep(np.asarray(d["predictor"], dtype=float))
        tol = ToleranceConfig.from_dict(d["tolerances"]) if "tolerances" in d else DEFAULT_TOLERANCES
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed controller bundle: {exc}") from exc
    return Bundle(ctrl, tol, terminal, rep, d.get("config"))


def save_bundle(bundle: Bundle, path) -> int:
    """Write ``bundle`` as JSON; returns the file size in bytes."""
    text = json.dumps(bundle_to_dict(bundle))
    Path(path).write_text(text)
    return len(text.encode())


def load_bundle(path) -> Bundle:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})", row=exc.lineno) from exc
    return bundle_from_dict(data)


def bundle_from_build(result, config=None) -> Bundle:
    """Bundle for a :class:`eddpc.pipeline.BuildResult`."""
    cfg = None if config is None else config.to_dict()
    tol = DEFAULT_TOLERANCES if config is None else config.tolerances
    return Bundle(result.controller, tol, result.terminal, result.rep, cfg)
