"""Seeded synthetic longitudinal cases with known evolution graphs.

Lesions are rasterized spheres grouped into event "sites" (persistent,
disappearing, new, merge, split, decoy). A site is placed by rejection
sampling so that, at each timepoint separately, its lesions keep a
clearance gap from every other site; the follow-up lesions of a site are
then displaced together by a random shift of at most ``shift_mm``, which
stands in for residual registration error. Every intended lesion is one
connected component at its timepoint.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import BASELINE, FOLLOWUP, LesionSet, LesionUOTError
from .graph import EvolutionGraph, label_events
from .volume import Volume3D, connected_components, label_components

MAX_PLACEMENT_TRIES = 1000


class GenerationError(LesionUOTError):
    pass


@dataclass(frozen=True)
class EventBudget:
    merge_pairs: int = 1
    split_sources: int = 1
    disappear: int = 1
    appear: int = 1
    # a disappearing lesion with a new lesion right next to it
    decoy_pairs: int = 0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if int(getattr(self, f.name)) < 0:
                raise GenerationError(f"event count {f.name} must be >= 0")


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    n_initial: int = 10
    volume_dims: tuple = (96, 96, 96)
    spacing: tuple = (1.0, 1.0, 1.0)
    event_budget: EventBudget = field(default_factory=EventBudget)
    radius_range: tuple = (3.0, 7.0)
    growth_range: tuple = (0.5, 2.0)
    # max follow-up displacement per event site (residual registration error)
    shift_mm: float = 0.0
    # min gap between site footprints
    clearance_mm: float = 3.0

    def __post_init__(self):
        e = self.event_budget
        if isinstance(e, dict):
            e = EventBudget(**e)
            object.__setattr__(self, "event_budget", e)
        used = 2 * e.merge_pairs + e.split_sources + e.disappear + e.decoy_pairs
        if used > self.n_initial:
            raise GenerationError(
                f"event budget needs {used} baseline lesions but n_initial is {self.n_initial}"
            )
        lo, hi = self.radius_range
        if not 0 < lo <= hi:
            raise GenerationError(f"bad radius_range {self.radius_range!r}")
        if lo <= 0.87 * max(self.spacing):
            raise GenerationError("minimum radius must exceed half a voxel diagonal")
        glo, ghi = self.growth_range
        if not 0 < glo <= ghi:
            raise GenerationError(f"bad growth_range {self.growth_range!r}")
        if self.shift_mm < 0 or self.clearance_mm < 2 * max(self.spacing):
            raise GenerationError("shift_mm must be >= 0 and clearance_mm at least two voxels")

    def replace(self, **changes) -> "SynthSpec":
        return dataclasses.replace(self, **changes)


@dataclass
class _Sphere:
    key: int
    center: np.ndarray
    radius: float


@dataclass
class _Site:
    kind: str
    # (offset from the site center, radius) per sphere at each timepoint
    before: list
    after: list
    # (before index, after index) pairs within this site
    links: list
    center: Optional[np.ndarray] = None
    # follow-up displacement of the whole site
    shift: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @staticmethod
    def _reach(spheres):
        return max((np.linalg.norm(o) + r for o, r in spheres), default=None)

    @property
    def footprint_before(self):
        return self._reach(self.before)

    @property
    def footprint_after(self):
        return self._reach(self.after)

    @property
    def footprint(self):
        return max(f for f in (self.footprint_before, self.footprint_after) if f is not None)


@dataclass(frozen=True, eq=False)
class SynthCase:
    case_id: str
    seed: int
    mask0: Volume3D
    mask1: Volume3D
    reference: EvolutionGraph
    set0: LesionSet
    set1: LesionSet


def _unit(rng) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def _radius_of(volume: float) -> float:
    return (3.0 * volume / (4.0 * math.pi)) ** (1.0 / 3.0)


def _volume_of(radius: float) -> float:
    return 4.0 / 3.0 * math.pi * radius**3


def _pair_offsets(rng, r1: float, r2: float, v1: float, v2: float, gap: float):
    """Two spheres apart by a random separation, their volume-weighted centroid at the origin."""
    lo = r1 + r2 + gap
    sep = rng.uniform(lo, max(lo, 1.5 * (r1 + r2)))
    d = _unit(rng)
    return -d * sep * v2 / (v1 + v2), d * sep * v1 / (v1 + v2)


def _build_sites(spec: SynthSpec, rng) -> list:
    e = spec.event_budget
    gap = 2.0 * max(spec.spacing)
    rmin = 0.87 * max(spec.spacing) + 0.1
    rlo, rhi = spec.radius_range
    glo, ghi = spec.growth_range
    zero = np.zeros(3)
    n_persist = spec.n_initial - 2 * e.merge_pairs - e.split_sources - e.disappear - e.decoy_pairs
    sites = []

    for _ in range(e.merge_pairs):
        ra, rb = rng.uniform(rlo, rhi, size=2)
        va, vb = _volume_of(ra), _volume_of(rb)
        oa, ob = _pair_offsets(rng, ra, rb, va, vb, gap)
        # the merged sphere covers both parent centroids
        reach = max(np.linalg.norm(oa), np.linalg.norm(ob))
        rm = max(_radius_of((va + vb) * rng.uniform(glo, ghi)), reach + max(spec.spacing))
        sites.append(_Site("merge", [(oa, ra), (ob, rb)], [(zero, rm)], [(0, 0), (1, 0)]))

    for _ in range(e.split_sources):
        rs = rng.uniform(rlo, rhi)
        vs = _volume_of(rs) * rng.uniform(glo, ghi)
        frac = rng.uniform(0.3, 0.7)
        v1, v2 = vs * frac, vs * (1 - frac)
        r1, r2 = max(_radius_of(v1), rmin), max(_radius_of(v2), rmin)
        o1, o2 = _pair_offsets(rng, r1, r2, v1, v2, gap)
        sites.append(_Site("split", [(zero, rs)], [(o1, r1), (o2, r2)], [(0, 0), (0, 1)]))

    for _ in range(e.decoy_pairs):
        r0, r1 = rng.uniform(rlo, rhi, size=2)
        o0, o1 = _pair_offsets(rng, r0, r1, 1.0, 1.0, gap)
        sites.append(_Site("decoy", [(o0, r0)], [(o1, r1)], []))

    for _ in range(e.disappear):
        sites.append(_Site("disappear", [(zero, rng.uniform(rlo, rhi))], [], []))

    for _ in range(n_persist):
        r0 = rng.uniform(rlo, rhi)
        r1 = _radius_of(_volume_of(r0) * rng.uniform(glo, ghi))
        sites.append(_Site("persistent", [(zero, r0)], [(zero, r1)], [(0, 0)]))

    for _ in range(e.appear):
        sites.append(_Site("appear", [], [(zero, rng.uniform(rlo, rhi))], []))
    return sites


def _place(sites: list, spec: SynthSpec, rng):
    """Rejection-sample site centers and follow-up shifts.

    Footprints must keep ``clearance_mm`` apart at each timepoint
    separately, so displaced follow-up lesions may crowd their neighbours'
    baseline positions.
    """
    extent = (np.asarray(spec.volume_dims, dtype=float) - 1.0) * np.asarray(spec.spacing)
    margin = max(spec.spacing)
    placed = []

    def clear(c, f, other_c, other_f):
        return f is None or other_f is None or np.linalg.norm(c - other_c) >= f + other_f + spec.clearance_mm

    # biggest footprints first, stable among equals
    for site in sorted(sites, key=lambda s: -s.footprint):
        fb, fa = site.footprint_before, site.footprint_after
        lo = site.footprint + spec.shift_mm + margin
        hi = extent - lo
        if np.any(hi <= lo):
            raise GenerationError(f"seed {spec.seed}: a {site.kind} site does not fit in the volume")
        for _ in range(MAX_PLACEMENT_TRIES):
            c = rng.uniform(lo, hi)
            shift = _unit(rng) * spec.shift_mm * rng.uniform() ** (1.0 / 3.0)
            if all(
                clear(c, fb, o.center, o.footprint_before)
                and clear(c + shift, fa, o.center + o.shift, o.footprint_after)
                for o in placed
            ):
                site.center, site.shift = c, shift
                placed.append(site)
                break
        else:
            raise GenerationError(
                f"seed {spec.seed}: could not place a {site.kind} site after {MAX_PLACEMENT_TRIES} tries"
            )


def rasterize(spheres, dims, spacing, origin=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Label volume with ``key`` inside each sphere (later spheres win)."""
    labels = np.zeros(tuple(dims), dtype=np.int32)
    spacing = np.asarray(spacing, dtype=float)
    origin = np.asarray(origin, dtype=float)
    for s in spheres:
        lo = np.maximum(np.floor((s.center - s.radius - origin) / spacing).astype(int), 0)
        hi = np.minimum(np.ceil((s.center + s.radius - origin) / spacing).astype(int) + 1, dims)
        grids = np.meshgrid(*[np.arange(a, b) for a, b in zip(lo, hi)], indexing="ij")
        d2 = sum((origin[k] + spacing[k] * grids[k] - s.center[k]) ** 2 for k in range(3))
        sub = labels[lo[0] : hi[0], lo[1] : hi[1], lo[2] : hi[2]]
        sub[d2 <= s.radius**2] = s.key
    return labels


def _component_keys(labels: np.ndarray, mask: Volume3D) -> list:
    comp, n = label_components(mask)
    keys = []
    for k in range(1, n + 1):
        found = np.unique(labels[comp == k])
        if found.size != 1:
            raise GenerationError("intended lesions touch after rasterization")
        keys.append(int(found[0]))
    return keys


def generate_case(spec: SynthSpec, case_id: Optional[str] = None) -> SynthCase:
    rng = np.random.default_rng(spec.seed)
    sites = _build_sites(spec, rng)
    _place(sites, spec, rng)

    before, after, links = [], [], []
    for site in sites:
        k0 = len(before)
        k1 = len(after)
        before += [_Sphere(k0 + n + 1, site.center + o, r) for n, (o, r) in enumerate(site.before)]
        after += [_Sphere(k1 + n + 1, site.center + site.shift + o, r) for n, (o, r) in enumerate(site.after)]
        links += [(k0 + p + 1, k1 + q + 1) for p, q in site.links]

    dims = tuple(int(d) for d in spec.volume_dims)
    lab0 = rasterize(before, dims, spec.spacing)
    lab1 = rasterize(after, dims, spec.spacing)
    mask0 = Volume3D((lab0 > 0).astype(np.uint8), spec.spacing)
    mask1 = Volume3D((lab1 > 0).astype(np.uint8), spec.spacing)

    keys0 = _component_keys(lab0, mask0)
    keys1 = _component_keys(lab1, mask1)
    if len(keys0) != len(before) or len(keys1) != len(after):
        raise GenerationError(f"seed {spec.seed}: a lesion vanished or fused during rasterization")
    index0 = {key: i for i, key in enumerate(keys0)}
    index1 = {key: j for j, key in enumerate(keys1)}
    edges = [(index0[p], index1[q]) for p, q in links]
    reference = label_events(len(keys0), len(keys1), edges)

    set0 = LesionSet(BASELINE, connected_components(mask0))
    set1 = LesionSet(FOLLOWUP, connected_components(mask1))
    return SynthCase(case_id or f"case_{spec.seed:05d}", spec.seed, mask0, mask1, reference, set0, set1)


def generate_suite(n_cases: int, base_seed: int, spec_template: SynthSpec) -> list:
    if n_cases < 1:
        raise GenerationError(f"n_cases must be >= 1, got {n_cases}")
    return [
        generate_case(spec_template.replace(seed=base_seed + k), case_id=f"case_{k:03d}")
        for k in range(n_cases)
    ]


def inject_channels(case: SynthCase, seed: int, high=(0.75, 1.0), low=(0.0, 0.25)):
    """Per-lesion trust and appearance scores that favour the true correspondences.

    Lesions with a reference counterpart get scores drawn from ``high``;
    new and disappearing lesions, whose only candidate pairs are wrong
    ones, get scores drawn from ``low``.
    """
    rng = np.random.default_rng(seed)
    out0, into1 = case.reference.degrees()

    def scored(lesions, linked):
        res = []
        for les, ok in zip(lesions, linked):
            lo, hi = high if ok else low
            res.append(les.replace(appearance=float(rng.uniform(lo, hi)), trust=float(rng.uniform(lo, hi))))
        return res

    set0 = LesionSet(BASELINE, scored(case.set0.lesions, out0 > 0))
    set1 = LesionSet(FOLLOWUP, scored(case.set1.lesions, into1 > 0))
    return dataclasses.replace(case, set0=set0, set1=set1)
