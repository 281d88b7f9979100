"""scikit-learn style wrappers around the matchers.

Matching has nothing to learn across cases, so these follow the
clustering convention: ``fit(baseline, followup)`` solves one case and
stores the result in trailing-underscore attributes, ``fit_predict``
returns the evolution graph directly.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .baselines import distance_bipartite, normdist_bipartite
from .core import BASELINE, FOLLOWUP, MatchConfig
from .graph import match_case
from .metrics import evaluate
from .validation import check_lesion_set


class _MatcherMixin:
    _estimator_type = "matcher"

    def fit_predict(self, baseline, followup):
        return self.fit(baseline, followup).graph_

    def _check_fitted(self):
        if not hasattr(self, "graph_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit(baseline, followup)")

    @property
    def edges_(self):
        self._check_fitted()
        return self.graph_.sorted_edges()

    @property
    def baseline_states_(self):
        self._check_fitted()
        return self.graph_.baseline_states

    @property
    def followup_states_(self):
        self._check_fitted()
        return self.graph_.followup_states

    def score(self, baseline, followup, reference):
        """Edge F1 of the graph predicted for this case against ``reference``."""
        return evaluate(self.fit_predict(baseline, followup), reference).edge_f1

    def _validate(self, baseline, followup):
        return check_lesion_set(baseline, BASELINE), check_lesion_set(followup, FOLLOWUP)


class UOTMatcher(_MatcherMixin, BaseEstimator):
    """Unbalanced optimal transport lesion matcher.

    Parameters mirror :class:`~lesionuot.core.MatchConfig`; they are
    validated at ``fit`` time. ``epsilon_scaling`` warm-starts the solver
    from coarser regularization.

    Attributes
    ----------
    graph_ : EvolutionGraph
    plan_ : TransportPlan
    cost_ : CostBreakdown
    prior_ : AsymmetryPrior
    config_ : MatchConfig
    """

    def __init__(
        self,
        epsilon=0.05,
        lambda_base=1.0,
        mu_base=1.0,
        w_jacobian=0.5,
        w_appearance=0.3,
        beta=1.0,
        distance_cap=10.0,
        tau_row=0.5,
        tau_col=0.5,
        prune_floor=1e-6,
        rho_gamma=1.0,
        max_iters=2000,
        tol=1e-8,
        patch_radius=8,
        dilation_radius=2,
        epsilon_scaling=False,
    ):
        self.epsilon = epsilon
        self.lambda_base = lambda_base
        self.mu_base = mu_base
        self.w_jacobian = w_jacobian
        self.w_appearance = w_appearance
        self.beta = beta
        self.distance_cap = distance_cap
        self.tau_row = tau_row
        self.tau_col = tau_col
        self.prune_floor = prune_floor
        self.rho_gamma = rho_gamma
        self.max_iters = max_iters
        self.tol = tol
        self.patch_radius = patch_radius
        self.dilation_radius = dilation_radius
        self.epsilon_scaling = epsilon_scaling

    @classmethod
    def from_config(cls, cfg: MatchConfig, **kw) -> "UOTMatcher":
        return cls(**cfg.as_dict(), **kw)

    def fit(self, baseline, followup):
        set0, set1 = self._validate(baseline, followup)
        params = self.get_params()
        params.pop("epsilon_scaling")
        self.config_ = MatchConfig(**params)
        result = match_case(set0, set1, self.config_, epsilon_scaling=self.epsilon_scaling)
        self.graph_ = result.graph
        self.plan_ = result.plan
        self.cost_ = result.cost
        self.prior_ = result.prior
        return self


class DistanceBipartiteMatcher(_MatcherMixin, BaseEstimator):
    """Gate on raw centroid distance in mm."""

    def __init__(self, threshold_mm=10.0, rule="nearest"):
        self.threshold_mm = threshold_mm
        self.rule = rule

    def fit(self, baseline, followup):
        set0, set1 = self._validate(baseline, followup)
        self.graph_ = distance_bipartite(set0, set1, self.threshold_mm, self.rule)
        return self


class NormDistanceBipartiteMatcher(_MatcherMixin, BaseEstimator):
    """Gate on size-normalized, capped centroid distance."""

    def __init__(self, threshold=1.0, distance_cap=10.0, rule="nearest"):
        self.threshold = threshold
        self.distance_cap = distance_cap
        self.rule = rule

    def fit(self, baseline, followup):
        set0, set1 = self._validate(baseline, followup)
        self.graph_ = normdist_bipartite(set0, set1, self.threshold, self.distance_cap, self.rule)
        return self
