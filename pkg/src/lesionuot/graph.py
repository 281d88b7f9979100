"""From transport plan to lesion evolution graph."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import LesionSet, MatchConfig, normalize_masses
from .cost import CostBreakdown, build_cost_matrix
from .prior import AsymmetryPrior, asymmetry_prior
from .uot import TransportPlan, solve_uot

PERSISTENT = "persistent"
DISAPPEARING = "disappearing"
NEW = "new"
MERGING = "merging"
SPLITTING = "splitting"
STATES = (PERSISTENT, DISAPPEARING, NEW, MERGING, SPLITTING)


@dataclass(frozen=True)
class EvolutionGraph:
    """Bipartite baseline -> follow-up graph with one state label per lesion.

    ``weights`` optionally carries the plan mass of each edge; it is
    informational and ignored by the metrics.
    """

    n0: int
    n1: int
    edges: frozenset
    baseline_states: tuple
    followup_states: tuple
    weights: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "n0", int(self.n0))
        object.__setattr__(self, "n1", int(self.n1))
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if not (0 <= i < self.n0 and 0 <= j < self.n1):
                raise ValueError(f"edge ({i}, {j}) outside a {self.n0} x {self.n1} graph")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "baseline_states", tuple(self.baseline_states))
        object.__setattr__(self, "followup_states", tuple(self.followup_states))
        if len(self.baseline_states) != self.n0 or len(self.followup_states) != self.n1:
            raise ValueError("one state label per lesion is required")
        for s in self.baseline_states + self.followup_states:
            if s not in STATES:
                raise ValueError(f"unknown lesion state {s!r}")

    def sorted_edges(self) -> list:
        return sorted(self.edges)

    def edge_weight(self, i: int, j: int) -> Optional[float]:
        if self.weights is None:
            return None
        return dict(self.weights).get((i, j))

    def degrees(self):
        out = np.zeros(self.n0, dtype=int)
        into = np.zeros(self.n1, dtype=int)
        for i, j in self.edges:
            out[i] += 1
            into[j] += 1
        return out, into


def prune_plan(gamma, tau_row: float, tau_col: float, floor: float = 0.0) -> frozenset:
    """Keep (i, j) when it is within the given fraction of both its row and column maxima.

    Ties at the threshold are kept; entries at or below ``floor`` never are.
    """
    g = np.asarray(gamma, dtype=float)
    if g.size == 0:
        return frozenset()
    row_ok = g >= tau_row * g.max(axis=1, keepdims=True)
    col_ok = g >= tau_col * g.max(axis=0, keepdims=True)
    keep = row_ok & col_ok & (g > floor)
    return frozenset((int(i), int(j)) for i, j in zip(*np.nonzero(keep)))


def label_events(n0: int, n1: int, edges, weights=None) -> EvolutionGraph:
    edges = frozenset((int(i), int(j)) for i, j in edges)
    out = np.zeros(n0, dtype=int)
    into = np.zeros(n1, dtype=int)
    for i, j in edges:
        out[i] += 1
        into[j] += 1
    partner0 = {i: j for i, j in edges}
    partner1 = {j: i for i, j in edges}

    base = []
    for i in range(n0):
        if out[i] == 0:
            base.append(DISAPPEARING)
        elif out[i] >= 2:
            base.append(SPLITTING)
        elif into[partner0[i]] >= 2:
            base.append(MERGING)
        else:
            base.append(PERSISTENT)
    follow = []
    for j in range(n1):
        if into[j] == 0:
            follow.append(NEW)
        elif into[j] >= 2:
            follow.append(MERGING)
        elif out[partner1[j]] >= 2:
            follow.append(SPLITTING)
        else:
            follow.append(PERSISTENT)
    if weights is not None:
        weights = tuple(sorted((e, float(w)) for e, w in dict(weights).items() if e in edges)) or None
    return EvolutionGraph(n0, n1, edges, tuple(base), tuple(follow), weights)


@dataclass(frozen=True)
class MatchResult:
    graph: EvolutionGraph
    plan: Optional[TransportPlan] = None
    cost: Optional[CostBreakdown] = None
    prior: Optional[AsymmetryPrior] = None


def match_case(set0: LesionSet, set1: LesionSet, cfg: Optional[MatchConfig] = None, **solver_kw) -> MatchResult:
    """Cost, prior, solve, prune and label. Empty sides skip the solve."""
    cfg = cfg or MatchConfig()
    n0, n1 = len(set0), len(set1)
    if n0 == 0 or n1 == 0:
        prior = asymmetry_prior(set0, set1, cfg.lambda_base, cfg.mu_base, cfg.rho_gamma)
        return MatchResult(label_events(n0, n1, ()), prior=prior)
    cost = build_cost_matrix(set0, set1, cfg)
    prior = asymmetry_prior(set0, set1, cfg.lambda_base, cfg.mu_base, cfg.rho_gamma)
    a, b = normalize_masses(set0, set1)
    plan = solve_uot(
        cost.combined, a, b, prior.lambda_eff, prior.mu_eff, cfg.epsilon, cfg.max_iters, cfg.tol, **solver_kw
    )
    edges = prune_plan(plan.gamma, cfg.tau_row, cfg.tau_col, cfg.prune_floor)
    weights = {e: plan.gamma[e] for e in edges}
    return MatchResult(label_events(n0, n1, edges, weights), plan, cost, prior)
