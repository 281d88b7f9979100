"""Distance-only comparison matchers.

Both gate a dissimilarity matrix ``D`` with one of two edge rules:

``"nearest"`` (default)
    for every baseline lesion link its nearest follow-up lesion, for every
    follow-up lesion link its nearest baseline lesion, and keep the union
    of those links whose dissimilarity is strictly below the gate.
``"all"``
    keep every pair strictly below the gate.

Many-to-one links (merges and splits) arise under both rules.
"""

from __future__ import annotations

import numpy as np

from .core import LesionSet
from .cost import geometric_cost_matrix
from .graph import EvolutionGraph, label_events


EDGE_RULES = ("nearest", "all")


def gated_edges(D, threshold: float, rule: str = "nearest") -> frozenset:
    if rule not in EDGE_RULES:
        raise ValueError(f"unknown edge rule {rule!r}; expected one of {EDGE_RULES}")
    if rule == "all":
        if threshold <= 0:
            raise ValueError(f"gate threshold must be > 0, got {threshold!r}")
        return frozenset((int(i), int(j)) for i, j in zip(*np.nonzero(np.asarray(D, dtype=float) < threshold)))
    return gated_nearest_edges(D, threshold)


def gated_nearest_edges(D, threshold: float) -> frozenset:
    D = np.asarray(D, dtype=float)
    if threshold <= 0:
        raise ValueError(f"gate threshold must be > 0, got {threshold!r}")
    edges = set()
    if D.size == 0:
        return frozenset()
    for i, j in enumerate(np.argmin(D, axis=1)):
        if D[i, j] < threshold:
            edges.add((i, int(j)))
    for j, i in enumerate(np.argmin(D, axis=0)):
        if D[i, j] < threshold:
            edges.add((int(i), j))
    return frozenset(edges)


def centroid_distances(set0: LesionSet, set1: LesionSet) -> np.ndarray:
    diff = set0.centroids[:, None, :] - set1.centroids[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def distance_bipartite(
    set0: LesionSet, set1: LesionSet, threshold_mm: float, rule: str = "nearest"
) -> EvolutionGraph:
    D = centroid_distances(set0, set1)
    return label_events(len(set0), len(set1), gated_edges(D, threshold_mm, rule))


def normdist_bipartite(
    set0: LesionSet, set1: LesionSet, norm_threshold: float, cap: float = 10.0, rule: str = "nearest"
) -> EvolutionGraph:
    D = geometric_cost_matrix(set0, set1, cap)
    return label_events(len(set0), len(set1), gated_edges(D, norm_threshold, rule))
