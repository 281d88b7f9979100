"""Entropic unbalanced optimal transport by generalized Sinkhorn scaling.

Objective::

    <G, C> + lam * KL(G 1 | a) + mu * KL(G^T 1 | b) - eps * H(G)

with ``H(G) = -sum G (log G - 1)`` and the generalized KL
``KL(p | q) = sum p log(p / q) - p + q``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, xlogy

from .core import ConfigError, NumericalError

logger = logging.getLogger(__name__)

LOG_DOMAIN_EPSILON = 0.01
SCALING_BOUNDS = (1e-30, 1e30)


@dataclass(frozen=True, eq=False)
class TransportPlan:
    gamma: np.ndarray
    iterations: int
    converged: bool
    final_residual: float
    objective: float
    log_domain: bool = False

    @property
    def shape(self):
        return self.gamma.shape

    @property
    def total_mass(self) -> float:
        return float(self.gamma.sum())


def generalized_kl(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return float((xlogy(p, p) - xlogy(p, q) - p + q).sum())


def entropy(gamma) -> float:
    g = np.asarray(gamma, dtype=float)
    return float(-(xlogy(g, g) - g).sum())


def uot_objective(gamma, C, a, b, lam: float, mu: float, epsilon: float) -> float:
    gamma = np.asarray(gamma, dtype=float)
    C = np.asarray(C, dtype=float)
    return float(
        (gamma * C).sum()
        + lam * generalized_kl(gamma.sum(axis=1), a)
        + mu * generalized_kl(gamma.sum(axis=0), b)
        - epsilon * entropy(gamma)
    )


def _check_inputs(C, a, b, lam, mu, epsilon):
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be > 0, got {epsilon!r}")
    if not (lam > 0 and mu > 0):
        raise ConfigError(f"marginal penalties must be > 0, got lambda={lam!r}, mu={mu!r}")
    C = np.asarray(C, dtype=float)
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if C.shape != (a.size, b.size):
        raise ValueError(f"cost shape {C.shape} does not match marginals ({a.size}, {b.size})")
    if not np.all(np.isfinite(C)) or np.any(C < 0):
        raise ValueError("cost matrix must be finite and nonnegative")
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("marginals must be strictly positive")
    return C, a, b


class _Sweeper:
    """Generalized Sinkhorn sweeps, kept in plain or log scalings."""

    def __init__(self, C, a, b, lam, mu, epsilon, log_domain):
        self.C, self.a, self.b, self.lam, self.mu = C, a, b, lam, mu
        self.log_a, self.log_b = np.log(a), np.log(b)
        self.log_u = np.zeros(a.size)
        self.log_v = np.zeros(b.size)
        self.u = np.ones(a.size)
        self.v = np.ones(b.size)
        self.log_domain = log_domain
        self._set_kernel(epsilon)

    def _set_kernel(self, epsilon):
        self.epsilon = epsilon
        self.fi = self.lam / (self.lam + epsilon)
        self.fj = self.mu / (self.mu + epsilon)
        self.log_K = -self.C / epsilon
        self.K = np.exp(self.log_K)

    def to_log_domain(self):
        if not self.log_domain:
            self.log_u, self.log_v = np.log(self.u), np.log(self.v)
            self.log_domain = True

    def recover_to_log_domain(self):
        """Clip overflowed scalings and continue in log-domain."""
        lo, hi = SCALING_BOUNDS
        self.u = np.clip(np.nan_to_num(self.u, nan=1.0, posinf=hi), lo, hi)
        self.v = np.clip(np.nan_to_num(self.v, nan=1.0, posinf=hi), lo, hi)
        self.to_log_domain()

    def set_epsilon(self, epsilon, allow_plain):
        """Change epsilon keeping the dual potentials eps * log(u), eps * log(v)."""
        self.to_log_domain()
        ratio = self.epsilon / epsilon
        self.log_u = self.log_u * ratio
        self.log_v = self.log_v * ratio
        self._set_kernel(epsilon)
        if allow_plain and np.all(self.K > 0):
            self.u, self.v = np.exp(self.log_u), np.exp(self.log_v)
            if self.scalings_in_range():
                self.log_domain = False

    def sweep(self) -> float:
        if self.log_domain:
            old_u, old_v = self.log_u, self.log_v
            self.log_u = self.fi * (self.log_a - logsumexp(self.log_K + old_v[None, :], axis=1))
            self.log_v = self.fj * (self.log_b - logsumexp(self.log_K + self.log_u[:, None], axis=0))
            new_u, new_v = self.log_u, self.log_v
        else:
            old_u, old_v = np.log(self.u), np.log(self.v)
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                self.u = (self.a / (self.K @ self.v)) ** self.fi
                self.v = (self.b / (self.K.T @ self.u)) ** self.fj
                new_u, new_v = np.log(self.u), np.log(self.v)
        return float(max(np.abs(new_u - old_u).max(), np.abs(new_v - old_v).max()))

    def scalings_in_range(self) -> bool:
        lo, hi = SCALING_BOUNDS
        return bool(
            np.all((self.u >= lo) & (self.u <= hi)) and np.all((self.v >= lo) & (self.v <= hi))
        )

    def plan(self) -> np.ndarray:
        if self.log_domain:
            return np.exp(self.log_u[:, None] + self.log_K + self.log_v[None, :])
        return self.u[:, None] * self.K * self.v[None, :]


def solve_uot(
    C,
    a,
    b,
    lambda_eff: float,
    mu_eff: float,
    epsilon: float,
    max_iters: int = 2000,
    tol: float = 1e-8,
    method: str = "auto",
    callback=None,
    epsilon_scaling: bool = False,
    stage_sweeps: int = 20,
) -> TransportPlan:
    """Minimize the entropic UOT objective.

    ``method`` is ``"auto"`` (plain scaling, switching to log-domain when
    epsilon is small or the scalings leave ``SCALING_BOUNDS``), ``"plain"``
    or ``"log"``. ``callback(iteration, plan)`` is called after every sweep
    at the target epsilon.

    With ``epsilon_scaling`` the potentials are warm-started by
    ``stage_sweeps`` sweeps at each of epsilon * 2**k, k = K..1, starting
    near ``C.max()``. This pays off when epsilon is small relative to the
    cost range. Warm-up sweeps count towards ``iterations`` but not
    towards ``max_iters``.
    """
    C, a, b = _check_inputs(C, a, b, lambda_eff, mu_eff, epsilon)
    if method not in ("auto", "plain", "log"):
        raise ConfigError(f"unknown solver method {method!r}")
    if max_iters < 1:
        raise ConfigError(f"max_iters must be >= 1, got {max_iters!r}")
    log_domain = method == "log" or (method == "auto" and epsilon < LOG_DOMAIN_EPSILON)
    state = _Sweeper(C, a, b, lambda_eff, mu_eff, epsilon, log_domain)
    if method == "auto" and not state.log_domain and not np.all(state.K > 0):
        state.to_log_domain()

    def plain_ok(eps):
        return method == "plain" or (method == "auto" and eps >= LOG_DOMAIN_EPSILON)

    warmup = 0
    if epsilon_scaling:
        n_stages = int(np.ceil(np.log2(max(C.max(), epsilon) / epsilon)))
        for k in range(n_stages, 0, -1):
            stage_eps = epsilon * 2.0**k
            state.set_epsilon(stage_eps, allow_plain=plain_ok(stage_eps))
            for _ in range(stage_sweeps):
                state.sweep()
                if not state.log_domain and not state.scalings_in_range():
                    state.recover_to_log_domain()
                warmup += 1
        state.set_epsilon(epsilon, allow_plain=plain_ok(epsilon))

    residual = np.inf
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        residual = state.sweep()
        if not state.log_domain and not state.scalings_in_range():
            if method == "plain":
                if not np.isfinite(residual):
                    raise NumericalError(f"non-finite scaling at iteration {it}")
            else:
                logger.debug("switching to log-domain scaling at iteration %d", it)
                state.recover_to_log_domain()
                residual = state.sweep()
        if not np.isfinite(residual):
            raise NumericalError(f"non-finite scaling at iteration {it}")
        if callback is not None:
            callback(it, state.plan())
        if residual <= tol:
            converged = True
            break

    gamma = state.plan()
    if not np.all(np.isfinite(gamma)):
        raise NumericalError(f"non-finite transport plan at iteration {it}")
    return TransportPlan(
        gamma=gamma,
        iterations=warmup + it,
        converged=converged,
        final_residual=float(residual),
        objective=uot_objective(gamma, C, a, b, lambda_eff, mu_eff, epsilon),
        log_domain=state.log_domain,
    )
