"""Lesion value types, matcher configuration and mass normalization."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

BASELINE = "baseline"
FOLLOWUP = "followup"
TIMEPOINTS = (BASELINE, FOLLOWUP)


class LesionUOTError(Exception):
    """Base class for all errors raised by this package."""


class InvalidLesionError(LesionUOTError, ValueError):
    pass


class ConfigError(LesionUOTError, ValueError):
    pass


class DegenerateCaseError(LesionUOTError):
    """Raised when an operation needs a non-empty lesion set."""


class NumericalError(LesionUOTError, ArithmeticError):
    pass


class EvaluationInputError(LesionUOTError, ValueError):
    pass


def equivalent_radius(volume: float) -> float:
    """Radius of the sphere with the given volume."""
    volume = float(volume)
    if not volume > 0 or not math.isfinite(volume):
        raise InvalidLesionError(f"lesion volume must be positive and finite, got {volume!r}")
    return (3.0 * volume / (4.0 * math.pi)) ** (1.0 / 3.0)


def _check_unit(name: str, value: Optional[float]) -> Optional[float]:
    if value is None:
        return None
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise InvalidLesionError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class LesionInstance:
    """One connected lesion: centroid in mm, volume in mm^3.

    ``radius`` is derived from ``volume`` and cannot be passed in.
    """

    id: int
    centroid: tuple
    volume: float
    trust: Optional[float] = None
    appearance: Optional[float] = None
    radius: float = field(init=False)

    def __post_init__(self):
        c = tuple(float(v) for v in self.centroid)
        if len(c) != 3 or not all(math.isfinite(v) for v in c):
            raise InvalidLesionError(f"centroid must be a finite 3-vector, got {self.centroid!r}")
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "centroid", c)
        object.__setattr__(self, "volume", float(self.volume))
        object.__setattr__(self, "radius", equivalent_radius(self.volume))
        object.__setattr__(self, "trust", _check_unit("trust", self.trust))
        object.__setattr__(self, "appearance", _check_unit("appearance", self.appearance))

    def replace(self, **changes) -> "LesionInstance":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class LesionSet:
    """Lesions of one timepoint. List position is the matrix index."""

    timepoint: str
    lesions: tuple = ()

    def __post_init__(self):
        if self.timepoint not in TIMEPOINTS:
            raise InvalidLesionError(f"timepoint must be one of {TIMEPOINTS}, got {self.timepoint!r}")
        lesions = tuple(self.lesions)
        for les in lesions:
            if not isinstance(les, LesionInstance):
                raise InvalidLesionError(f"expected LesionInstance, got {type(les).__name__}")
        ids = [les.id for les in lesions]
        if len(set(ids)) != len(ids):
            raise InvalidLesionError(f"duplicate lesion ids in {self.timepoint} set: {ids}")
        object.__setattr__(self, "lesions", lesions)

    def __len__(self):
        return len(self.lesions)

    def __iter__(self):
        return iter(self.lesions)

    def __getitem__(self, idx):
        return self.lesions[idx]

    @property
    def centroids(self) -> np.ndarray:
        return np.array([les.centroid for les in self.lesions], dtype=float).reshape(-1, 3)

    @property
    def volumes(self) -> np.ndarray:
        return np.array([les.volume for les in self.lesions], dtype=float)

    @property
    def radii(self) -> np.ndarray:
        return np.array([les.radius for les in self.lesions], dtype=float)

    @property
    def ids(self) -> list:
        return [les.id for les in self.lesions]

    def trust_scores(self, default: float = 1.0) -> np.ndarray:
        return np.array([default if les.trust is None else les.trust for les in self.lesions], dtype=float)

    def appearance_scores(self, default: float = 0.5) -> np.ndarray:
        return np.array(
            [default if les.appearance is None else les.appearance for les in self.lesions], dtype=float
        )

    @classmethod
    def from_arrays(
        cls,
        timepoint: str,
        centroids,
        volumes,
        ids: Optional[Sequence[int]] = None,
        trust=None,
        appearance=None,
    ) -> "LesionSet":
        centroids = np.asarray(centroids, dtype=float).reshape(-1, 3)
        volumes = np.asarray(volumes, dtype=float).reshape(-1)
        n = len(volumes)
        if centroids.shape[0] != n:
            raise InvalidLesionError(f"{centroids.shape[0]} centroids for {n} volumes")
        ids = list(range(n)) if ids is None else list(ids)
        trust = [None] * n if trust is None else list(trust)
        appearance = [None] * n if appearance is None else list(appearance)
        lesions = [
            LesionInstance(ids[k], tuple(centroids[k]), volumes[k], trust[k], appearance[k]) for k in range(n)
        ]
        return cls(timepoint, lesions)


@dataclass(frozen=True)
class MatchConfig:
    """Hyperparameters of the matcher. Validated on construction."""

    epsilon: float = 0.05
    lambda_base: float = 1.0
    mu_base: float = 1.0
    w_jacobian: float = 0.5
    w_appearance: float = 0.3
    beta: float = 1.0
    distance_cap: float = 10.0
    tau_row: float = 0.5
    tau_col: float = 0.5
    prune_floor: float = 1e-6
    rho_gamma: float = 1.0
    max_iters: int = 2000
    tol: float = 1e-8
    patch_radius: int = 8
    dilation_radius: int = 2

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.type == "int" or f.type is int:
                if isinstance(value, bool) or float(value) != int(value):
                    raise ConfigError(f"{f.name} must be an integer, got {value!r}")
                object.__setattr__(self, f.name, int(value))
            else:
                value = float(value)
                if not math.isfinite(value):
                    raise ConfigError(f"{f.name} must be finite, got {value!r}")
                object.__setattr__(self, f.name, value)

        def need(ok, name, rng):
            if not ok:
                raise ConfigError(f"{name}={getattr(self, name)!r} outside {rng}")

        need(self.epsilon > 0, "epsilon", "(0, inf)")
        need(self.lambda_base > 0, "lambda_base", "(0, inf)")
        need(self.mu_base > 0, "mu_base", "(0, inf)")
        need(0 <= self.w_jacobian <= 1, "w_jacobian", "[0, 1]")
        need(0 <= self.w_appearance < 1, "w_appearance", "[0, 1)")
        need(self.beta > 0, "beta", "(0, inf)")
        need(self.distance_cap > 0, "distance_cap", "(0, inf)")
        need(0 < self.tau_row <= 1, "tau_row", "(0, 1]")
        need(0 < self.tau_col <= 1, "tau_col", "(0, 1]")
        need(self.prune_floor >= 0, "prune_floor", "[0, inf)")
        need(self.rho_gamma >= 0, "rho_gamma", "[0, inf)")
        need(self.max_iters >= 1, "max_iters", "[1, inf)")
        need(self.tol > 0, "tol", "(0, inf)")
        need(self.patch_radius >= 1, "patch_radius", "[1, inf)")
        need(self.dilation_radius >= 0, "dilation_radius", "[0, inf)")

    @classmethod
    def field_names(cls) -> list:
        return [f.name for f in dataclasses.fields(cls)]

    def replace(self, **changes) -> "MatchConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def normalize_masses(set0: LesionSet, set1: LesionSet):
    """Volume-proportional masses, each side summing to one."""
    if len(set0) == 0 or len(set1) == 0:
        raise DegenerateCaseError("mass normalization needs lesions on both sides")
    a = set0.volumes
    b = set1.volumes
    return a / a.sum(), b / b.sum()
