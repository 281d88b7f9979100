"""Tumor-load asymmetry prior on the marginal penalties."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .core import DegenerateCaseError, LesionSet

PENALTY_FLOOR = 0.01


@dataclass(frozen=True)
class AsymmetryPrior:
    rho: Optional[float]
    lambda_eff: float
    mu_eff: float


def tumor_load_ratio(set0: LesionSet, set1: LesionSet) -> float:
    """Total follow-up volume over total baseline volume."""
    total0 = float(set0.volumes.sum())
    if len(set0) == 0 or total0 <= 0:
        raise DegenerateCaseError("tumor-load ratio undefined without baseline lesions")
    return float(set1.volumes.sum()) / total0


def effective_penalties(rho: float, lambda_base: float, mu_base: float, gamma: float):
    """Shrink mu when the burden grew, lambda when it shrank.

    Penalties scale as ``min(rho, 1)**gamma`` and ``min(1/rho, 1)**gamma``,
    clamped below at ``PENALTY_FLOOR * base``.
    """
    if rho < 0:
        raise ValueError(f"rho must be >= 0, got {rho!r}")
    shrink_lambda = min(rho, 1.0) ** gamma
    shrink_mu = min(1.0 / rho, 1.0) ** gamma if rho > 0 else 1.0
    lam = lambda_base * max(shrink_lambda, PENALTY_FLOOR)
    mu = mu_base * max(shrink_mu, PENALTY_FLOOR)
    return lam, mu


def asymmetry_prior(set0: LesionSet, set1: LesionSet, lambda_base: float, mu_base: float, gamma: float):
    try:
        rho = tumor_load_ratio(set0, set1)
    except DegenerateCaseError:
        return AsymmetryPrior(None, lambda_base, mu_base)
    lam, mu = effective_penalties(rho, lambda_base, mu_base, gamma)
    return AsymmetryPrior(rho, lam, mu)
