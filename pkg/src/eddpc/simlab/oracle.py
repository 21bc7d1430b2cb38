"""Model-based explicit MPC, built from the true ``(A, B)``."""
from __future__ import annotations

from ..ddrep import DDRep, build_prediction_matrices
from ..explicit import PWAController, enumerate_partition
from ..mpqp import CostSpec, ConstraintSpec, assemble_regulation, assemble_tracking
from ..tolerances import DEFAULT_TOLERANCES
from .plants import LTIPlant


def oracle_qp(plant: LTIPlant, cost: CostSpec, cons: ConstraintSpec, horizons,
              K=None, mode: str = "regulation", literal_appendix: bool = False):
    rep = DDRep.from_model(plant.A, plant.B)
    pm = build_prediction_matrices(rep, horizons, K, literal_appendix)
    if mode == "tracking":
        return assemble_tracking(pm, cost, cons, provenance="model-based")
    return assemble_regulation(pm, cost, cons, provenance="model-based")


def build_oracle_controller(plant: LTIPlant, cost: CostSpec, cons: ConstraintSpec,
                            horizons, K=None, mode: str = "regulation",
                            tol=DEFAULT_TOLERANCES, **kwargs) -> PWAController:
    """Same pipeline as the data-driven build with prediction matrices from ``(A, B)``."""
    qp = oracle_qp(plant, cost, cons, horizons, K, mode)
    return enumerate_partition(qp, tol, **kwargs)
