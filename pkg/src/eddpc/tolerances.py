"""Numerical tolerances used across modules.

A single frozen instance, ``DEFAULT_TOLERANCES``, is honoured everywhere unless
a caller passes its own ``ToleranceConfig``.
"""
from dataclasses import asdict, dataclass

from .errors import PreconditionError


@dataclass(frozen=True)
class ToleranceConfig:
    # relative SVD cutoff for persistency / rank-condition checks
    pe_rank_rel: float = 1e-12
    # relative SVD cutoff for active-set independence
    active_rank_rel: float = 1e-9
    # Chebyshev radius below which a region is not full-dimensional
    chebyshev_radius: float = 1e-9
    # max-abs difference under which two affine laws are considered equal
    law_equal: float = 1e-8
    # slack used by point location
    membership_slack: float = 1e-9
    # redundancy removal margin
    redundancy_margin: float = 1e-9
    # primal/dual feasibility tolerance inside the simplex solver
    lp_feas: float = 1e-9

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise PreconditionError(f"unknown tolerance keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


DEFAULT_TOLERANCES = ToleranceConfig()
