"""Pairwise matching cost: size-normalized distance scaled by trust and appearance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DegenerateCaseError, LesionInstance, LesionSet, MatchConfig


def geometric_cost(i: LesionInstance, j: LesionInstance, cap: float) -> float:
    d = float(np.linalg.norm(np.subtract(i.centroid, j.centroid)))
    return min(d / (i.radius + j.radius), cap)


def pair_trust(t_i: float, t_j: float) -> float:
    return 0.5 * (t_i + t_j)


def pair_appearance(s_i: float, s_j: float) -> float:
    return 0.5 * (s_i + s_j)


def combined_cost(c_geom, tau, s_bar, w_J: float, w_S: float):
    """Works elementwise on arrays as well as on scalars."""
    return c_geom * (1.0 + w_J * (1.0 - tau)) * (1.0 - w_S * s_bar)


@dataclass(frozen=True, eq=False)
class CostBreakdown:
    c_geom: np.ndarray
    tau: np.ndarray
    s_bar: np.ndarray
    combined: np.ndarray

    @property
    def shape(self):
        return self.combined.shape


def geometric_cost_matrix(set0: LesionSet, set1: LesionSet, cap: float) -> np.ndarray:
    diff = set0.centroids[:, None, :] - set1.centroids[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    return np.minimum(dist / (set0.radii[:, None] + set1.radii[None, :]), cap)


def build_cost_matrix(set0: LesionSet, set1: LesionSet, cfg: MatchConfig) -> CostBreakdown:
    if len(set0) == 0 or len(set1) == 0:
        raise DegenerateCaseError("cost matrix needs lesions on both sides")
    c_geom = geometric_cost_matrix(set0, set1, cfg.distance_cap)
    t0, t1 = set0.trust_scores(1.0), set1.trust_scores(1.0)
    s0, s1 = set0.appearance_scores(0.5), set1.appearance_scores(0.5)
    tau = pair_trust(t0[:, None], t1[None, :])
    s_bar = pair_appearance(s0[:, None], s1[None, :])
    combined = combined_cost(c_geom, tau, s_bar, cfg.w_jacobian, cfg.w_appearance)
    return CostBreakdown(c_geom, tau, s_bar, combined)
