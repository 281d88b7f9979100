"""Input coercion shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np

from .core import BASELINE, InvalidLesionError, LesionSet

LESION_COLUMNS = ("x", "y", "z", "volume", "trust", "appearance")


def check_lesion_set(X, timepoint: str = BASELINE) -> LesionSet:
    """Accept a LesionSet or an array with columns x, y, z, volume[, trust[, appearance]].

    NaN in the optional columns means "not measured".
    """
    if isinstance(X, LesionSet):
        if X.timepoint != timepoint:
            return LesionSet(timepoint, X.lesions)
        return X
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 4)
    if arr.ndim != 2 or not 4 <= arr.shape[1] <= 6:
        raise InvalidLesionError(
            f"lesion array must have shape (n, 4..6) with columns {LESION_COLUMNS}, got {arr.shape}"
        )
    if not np.all(np.isfinite(arr[:, :4])):
        raise InvalidLesionError("lesion centroids and volumes must be finite")

    def optional(col):
        if arr.shape[1] <= col:
            return None
        return [None if np.isnan(v) else float(v) for v in arr[:, col]]

    return LesionSet.from_arrays(timepoint, arr[:, :3], arr[:, 3], trust=optional(4), appearance=optional(5))


def lesion_array(lesions: LesionSet) -> np.ndarray:
    """Inverse of :func:`check_lesion_set`; missing scores become NaN."""
    rows = [
        list(les.centroid)
        + [les.volume, np.nan if les.trust is None else les.trust, np.nan if les.appearance is None else les.appearance]
        for les in lesions
    ]
    return np.array(rows, dtype=float).reshape(-1, 6)
