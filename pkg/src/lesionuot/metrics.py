"""Edge, lesion-state and component-level scores for evolution graphs.

Scores are ratios of small counts; they are computed as exact fractions
and rounded to float once, so results do not depend on summation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .core import EvaluationInputError
from .graph import NEW, STATES, EvolutionGraph

STATE_CONVENTION = "baseline lesions always; follow-up lesions when reference or prediction says new"
COMPONENT_CONVENTION = "exact node-set and edge-set equality"


def f1_score(p, r):
    """Harmonic mean; exact when given Fractions."""
    return 2 * p * r / (p + r) if p + r > 0 else 0 * p


def _prf(tp: int, n_pred: int, n_ref: int, empty_precision: int):
    p = Fraction(tp, n_pred) if n_pred else Fraction(empty_precision)
    r = Fraction(tp, n_ref) if n_ref else Fraction(1)
    return float(p), float(r), float(f1_score(p, r))


def edge_metrics(predicted, reference):
    predicted, reference = set(predicted), set(reference)
    return _prf(len(predicted & reference), len(predicted), len(reference), int(not reference))


def _check_same_lesions(predicted: EvolutionGraph, reference: EvolutionGraph):
    if (predicted.n0, predicted.n1) != (reference.n0, reference.n1):
        raise EvaluationInputError(
            f"graphs cover different lesions: predicted {predicted.n0}x{predicted.n1}, "
            f"reference {reference.n0}x{reference.n1}"
        )


def state_pairs(predicted: EvolutionGraph, reference: EvolutionGraph) -> list:
    """(reference state, predicted state) for every lesion that enters the confusion."""
    _check_same_lesions(predicted, reference)
    pairs = list(zip(reference.baseline_states, predicted.baseline_states))
    pairs += [
        (r, p) for r, p in zip(reference.followup_states, predicted.followup_states) if NEW in (r, p)
    ]
    return pairs


def state_metrics(predicted: EvolutionGraph, reference: EvolutionGraph):
    """Support-weighted precision and recall plus the 5x5 confusion (rows = reference)."""
    index = {s: k for k, s in enumerate(STATES)}
    confusion = np.zeros((len(STATES), len(STATES)), dtype=int)
    for r, p in state_pairs(predicted, reference):
        confusion[index[r], index[p]] += 1
    total = confusion.sum()
    if total == 0:
        return 1.0, 1.0, confusion
    support = confusion.sum(axis=1)
    predicted_count = confusion.sum(axis=0)
    wp = wr = Fraction(0)
    for k in range(len(STATES)):
        if support[k]:
            w = Fraction(int(support[k]), int(total))
            tp = int(confusion[k, k])
            wr += w * Fraction(tp, int(support[k]))
            if predicted_count[k]:
                wp += w * Fraction(tp, int(predicted_count[k]))
    return float(wp), float(wr), confusion


def components(graph: EvolutionGraph) -> set:
    """Connected components as (node set, edge set); isolated lesions count."""
    n = graph.n0 + graph.n1
    if n == 0:
        return set()
    rows = [i for i, _ in graph.edges]
    cols = [graph.n0 + j for _, j in graph.edges]
    adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(adj, directed=False)
    nodes = {}
    for k in range(n):
        node = ("b", k) if k < graph.n0 else ("f", k - graph.n0)
        nodes.setdefault(labels[k], set()).add(node)
    edges = {}
    for i, j in graph.edges:
        edges.setdefault(labels[i], set()).add((i, j))
    return {(frozenset(nodes[c]), frozenset(edges.get(c, ()))) for c in nodes}


def component_scores(predicted: EvolutionGraph, reference: EvolutionGraph):
    _check_same_lesions(predicted, reference)
    pred, ref = components(predicted), components(reference)
    if not pred and not ref:
        return 1.0, 1.0, 1.0
    return _prf(len(pred & ref), len(pred), len(ref), 0)


def component_f1(predicted: EvolutionGraph, reference: EvolutionGraph) -> float:
    return component_scores(predicted, reference)[2]


@dataclass(frozen=True, eq=False)
class EvalReport:
    edge_precision: float
    edge_recall: float
    edge_f1: float
    state_weighted_precision: float
    state_weighted_recall: float
    state_confusion: np.ndarray
    component_f1: float

    def __eq__(self, other):
        if not isinstance(other, EvalReport):
            return NotImplemented
        return self.scalars() == other.scalars() and np.array_equal(self.state_confusion, other.state_confusion)

    def scalars(self) -> dict:
        return {
            "edge_precision": self.edge_precision,
            "edge_recall": self.edge_recall,
            "edge_f1": self.edge_f1,
            "state_weighted_precision": self.state_weighted_precision,
            "state_weighted_recall": self.state_weighted_recall,
            "component_f1": self.component_f1,
        }

    def state_recall(self, state: str) -> float:
        """Recall of one state class; nan when the reference has none of it."""
        k = STATES.index(state)
        support = self.state_confusion[k].sum()
        return float(self.state_confusion[k, k] / support) if support else float("nan")


def evaluate(predicted: EvolutionGraph, reference: EvolutionGraph) -> EvalReport:
    _check_same_lesions(predicted, reference)
    p, r, f = edge_metrics(predicted.edges, reference.edges)
    wp, wr, confusion = state_metrics(predicted, reference)
    return EvalReport(p, r, f, wp, wr, confusion, component_f1(predicted, reference))
