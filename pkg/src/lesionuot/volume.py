"""Lesion extraction and reliability cues from dense 3D grids.

Arrays are indexed ``data[x, y, z]``; on disk they are written x-fastest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .core import BASELINE, FOLLOWUP, LesionInstance, LesionSet, LesionUOTError, MatchConfig

JACOBIAN_CLIP = (0.05, 20.0)


class GridError(LesionUOTError, ValueError):
    pass


def _as_triple(values, name, positive=False):
    t = tuple(float(v) for v in values)
    if len(t) != 3:
        raise GridError(f"{name} must have 3 components, got {values!r}")
    if positive and not all(v > 0 for v in t):
        raise GridError(f"{name} components must be > 0, got {values!r}")
    return t


@dataclass(frozen=True, eq=False)
class Volume3D:
    data: np.ndarray
    spacing: tuple = (1.0, 1.0, 1.0)
    origin: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        data = np.array(self.data, copy=True)
        if data.ndim != 3:
            raise GridError(f"volume data must be 3D, got shape {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", _as_triple(self.spacing, "spacing", positive=True))
        object.__setattr__(self, "origin", _as_triple(self.origin, "origin"))

    @property
    def dims(self) -> tuple:
        return tuple(int(d) for d in self.data.shape)

    def same_grid(self, other) -> bool:
        return self.dims == other.dims and self.spacing == other.spacing and self.origin == other.origin

    def index_to_physical(self, index) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(self.spacing) * np.asarray(index, dtype=float)

    def physical_to_index(self, point) -> np.ndarray:
        return (np.asarray(point, dtype=float) - np.asarray(self.origin)) / np.asarray(self.spacing)

    def __eq__(self, other):
        if not isinstance(other, Volume3D):
            return NotImplemented
        return (
            self.same_grid(other)
            and self.data.dtype == other.data.dtype
            and np.array_equal(self.data, other.data)
        )


@dataclass(frozen=True, eq=False)
class DeformationField:
    """Displacement in mm per voxel, mapping follow-up points into the baseline frame."""

    data: np.ndarray
    spacing: tuple = (1.0, 1.0, 1.0)
    origin: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        data = np.array(self.data, dtype=float, copy=True)
        if data.ndim != 4 or data.shape[-1] != 3:
            raise GridError(f"deformation data must have shape (nx, ny, nz, 3), got {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", _as_triple(self.spacing, "spacing", positive=True))
        object.__setattr__(self, "origin", _as_triple(self.origin, "origin"))

    @property
    def dims(self) -> tuple:
        return tuple(int(d) for d in self.data.shape[:3])

    def same_grid(self, other) -> bool:
        return self.dims == other.dims and self.spacing == other.spacing and self.origin == other.origin


def _binary(mask: Volume3D) -> np.ndarray:
    data = mask.data
    if data.size and not np.isin(data, (0, 1)).all():
        raise GridError("mask values must be 0 or 1")
    return data.astype(bool)


def label_components(mask: Volume3D):
    """26-connected component labels, numbered in x-fastest scan order.

    Returns ``(labels, n)`` with labels 1..n and 0 for background.
    """
    binary = _binary(mask)
    # scipy numbers components in C-order scan; transposing makes x the fastest axis.
    labels_t, n = ndimage.label(binary.T, structure=np.ones((3, 3, 3), dtype=bool))
    return np.ascontiguousarray(labels_t.T), int(n)


def connected_components(mask: Volume3D) -> list:
    labels, n = label_components(mask)
    if n == 0:
        return []
    index = np.arange(1, n + 1)
    counts = ndimage.sum_labels(np.ones_like(labels), labels, index)
    voxel_volume = float(np.prod(mask.spacing))
    lesions = []
    for k, lab in enumerate(index):
        idx = np.argwhere(labels == lab)
        centroid = mask.index_to_physical(idx.mean(axis=0))
        lesions.append(LesionInstance(k, tuple(centroid), float(counts[k]) * voxel_volume))
    return lesions


def jacobian_determinant(field: DeformationField) -> Volume3D:
    """det(I + grad u), central differences inside, one-sided on the faces."""
    if min(field.dims) < 2:
        raise GridError(f"jacobian needs at least 2 voxels per axis, got dims {field.dims}")
    jac = np.empty(field.dims + (3, 3))
    for comp in range(3):
        grads = np.gradient(field.data[..., comp], *field.spacing, edge_order=1)
        for axis in range(3):
            jac[..., comp, axis] = grads[axis]
    jac += np.eye(3)
    return Volume3D(np.linalg.det(jac), field.spacing, field.origin)


def ball(radius: int) -> np.ndarray:
    r = int(radius)
    grid = np.mgrid[-r : r + 1, -r : r + 1, -r : r + 1]
    return (grid**2).sum(axis=0) <= r * r


def trust_map(jac: Volume3D, beta: float, clip: Sequence[float] = JACOBIAN_CLIP) -> np.ndarray:
    jmin, jmax = clip
    if not 0 < jmin <= jmax:
        raise GridError(f"jacobian clip must satisfy 0 < jmin <= jmax, got {clip!r}")
    distortion = np.abs(np.log(np.clip(jac.data, jmin, jmax)))
    return np.exp(-beta * distortion)


def lesion_trust(
    lesion_mask: Volume3D,
    jac: Volume3D,
    beta: float,
    dilation_radius: int,
    clip: Sequence[float] = JACOBIAN_CLIP,
) -> float:
    """Mean of exp(-beta |log J|) over the dilated lesion mask."""
    if not lesion_mask.same_grid(jac):
        raise GridError("lesion mask and jacobian grids differ")
    region = _binary(lesion_mask)
    if dilation_radius > 0:
        region = ndimage.binary_dilation(region, structure=ball(dilation_radius))
    if not region.any():
        raise LesionUOTError("empty lesion region after dilation")
    return float(trust_map(jac, beta, clip)[region].mean())


def zncc(p: np.ndarray, q: np.ndarray) -> Optional[float]:
    """Zero-mean normalized cross-correlation, None when either patch is flat."""
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    p = p - p.mean()
    q = q - q.mean()
    denom = np.sqrt((p * p).sum() * (q * q).sum())
    if denom <= 0 or not np.isfinite(denom):
        return None
    return float(np.clip((p * q).sum() / denom, -1.0, 1.0))


def _patch_slices(volume: Volume3D, centroid, patch_radius: int):
    center = np.rint(volume.physical_to_index(centroid)).astype(int)
    dims = np.asarray(volume.dims)
    if np.any(center < 0) or np.any(center >= dims):
        raise GridError(f"centroid {tuple(centroid)} lies outside the volume")
    # shrink per axis so the window stays centered on the voxel
    half = np.minimum(patch_radius, np.minimum(center, dims - 1 - center))
    return tuple(slice(c - h, c + h + 1) for c, h in zip(center, half))


def lesion_appearance(vol0: Volume3D, vol1_warped: Volume3D, centroid, patch_radius: int) -> float:
    """ZNCC of the two patches around ``centroid`` rescaled to [0, 1]; 0.5 if a patch is flat."""
    if not vol0.same_grid(vol1_warped):
        raise GridError("appearance volumes must share a grid")
    sl = _patch_slices(vol0, centroid, patch_radius)
    z = zncc(vol0.data[sl], vol1_warped.data[sl])
    if z is None:
        return 0.5
    return (z + 1.0) / 2.0


def _lesion_masks(mask: Volume3D):
    labels, n = label_components(mask)
    for lab in range(1, n + 1):
        yield Volume3D((labels == lab).astype(np.uint8), mask.spacing, mask.origin)


def extract_lesions(
    mask0: Volume3D,
    mask1: Volume3D,
    cfg: Optional[MatchConfig] = None,
    ct0: Optional[Volume3D] = None,
    ct1_warped: Optional[Volume3D] = None,
    field: Optional[DeformationField] = None,
    clip: Sequence[float] = JACOBIAN_CLIP,
):
    """Both lesion sets from masks, with trust/appearance when the inputs allow it."""
    cfg = cfg or MatchConfig()
    if not mask0.same_grid(mask1):
        raise GridError("baseline and follow-up masks must share a grid (follow-up already warped)")
    jac = None
    if field is not None:
        if not field.same_grid(mask0):
            raise GridError("deformation field grid differs from the mask grid")
        jac = jacobian_determinant(field)
    have_ct = ct0 is not None and ct1_warped is not None
    sets = []
    for timepoint, mask in ((BASELINE, mask0), (FOLLOWUP, mask1)):
        lesions = connected_components(mask)
        if jac is not None:
            lesions = [
                les.replace(trust=lesion_trust(m, jac, cfg.beta, cfg.dilation_radius, clip))
                for les, m in zip(lesions, _lesion_masks(mask))
            ]
        if have_ct:
            lesions = [
                les.replace(appearance=lesion_appearance(ct0, ct1_warped, les.centroid, cfg.patch_radius))
                for les in lesions
            ]
        sets.append(LesionSet(timepoint, lesions))
    return sets[0], sets[1]
