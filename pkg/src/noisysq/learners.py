"""Query-based learners that the reductions drive.

A learner never sees examples.  It talks to an *answer-provider*, any
callable ``provider(query, tau) -> float``; the reductions plug in
providers that simulate queries on the reweighted distribution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domain import Conjunction, ConstantLabel, Halfspace, Hypothesis
from .errors import ConfigError, ContractError, LearnerFailure
from .queries import CoordinateCorrelation, LiteralViolationIndicator, QuerySpec

Provider = Callable[[QuerySpec, float], float]

DEFAULT_KAPPA = 0.1


@dataclass(frozen=True)
class QueryBudget:
    q: int
    tau: float
    delta_share: float = 0.0

    def __post_init__(self):
        if self.q < 1:
            raise ConfigError("query budget needs q >= 1")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tolerance must lie in (0, 1], got {self.tau}")


class BudgetedProvider:
    """Wraps a provider and enforces a learner's declared budget."""

    def __init__(self, provider: Provider, budget: QueryBudget):
        self.provider = provider
        self.budget = budget
        self.used = 0

    def __call__(self, query: QuerySpec, tau: float) -> float:
        if self.used >= self.budget.q:
            raise LearnerFailure(f"query budget of {self.budget.q} exhausted")
        if tau < self.budget.tau * (1 - 1e-12):
            raise LearnerFailure(f"tolerance {tau} finer than the declared {self.budget.tau}")
        self.used += 1
        return float(self.provider(query, tau))


def query_plan(learner: str, d: int, eps: float, kappa: float = DEFAULT_KAPPA, delta: float = 0.0) -> QueryBudget:
    """Query count and tolerance used by each learner.

    ``"halfspace"``: d queries at ``kappa * eps / sqrt(d)``;
    ``"conjunction"``: d queries at ``eps / (4 d)``.
    """
    if d < 1 or not 0.0 < eps < 1.0:
        raise ConfigError("query_plan needs d >= 1 and eps in (0, 1)")
    if learner == "halfspace":
        tau = kappa * eps / math.sqrt(d)
    elif learner == "conjunction":
        tau = eps / (4.0 * d)
    else:
        raise ConfigError(f"unknown learner {learner!r}")
    return QueryBudget(q=d, tau=min(tau, 1.0), delta_share=delta / d)


def learn_halfspace_csq(
    csq: Provider, d: int, eps: float, budget: QueryBudget, *, scale: float = 1.0
) -> Hypothesis:
    """Averaging learner for homogeneous halfspaces under spherical symmetry.

    Under a spherically symmetric marginal ``E[x f(x)]`` points along the
    target normal, so the vector of coordinate correlations recovers the
    direction.  Below the noise floor ``d * tau`` the direction is not
    identifiable and the constant +1 hypothesis is returned.
    """
    ask = BudgetedProvider(csq, budget)
    v = np.array([ask(CoordinateCorrelation(i, scale), budget.tau) for i in range(d)])
    if d == 1:
        # the class is {sign(x), sign(-x)}; only the sign of the answer matters
        if v[0] == 0:
            return ConstantLabel(1, d)
        return Halfspace((1.0 if v[0] > 0 else -1.0,))
    if np.linalg.norm(v) <= d * budget.tau:
        return ConstantLabel(1, d)
    return Halfspace.from_vector(v)


def learn_conjunction_sq(sq: Provider, d: int, eps: float, budget: QueryBudget) -> Hypothesis:
    """Distribution-free SQ learner for monotone conjunctions over {-1, +1}^d.

    Keeps literal i when ``Pr[x_i = -1 and f(x) = +1] <= eps / (2d)``.  True
    literals have probability 0 and are always kept; each spurious literal
    that survives costs less than ``eps / d`` error.
    """
    if budget.tau > eps / (4.0 * d) * (1 + 1e-12):
        raise ContractError(f"conjunction learner needs tau <= eps/(4d) = {eps / (4 * d)}, got {budget.tau}")
    ask = BudgetedProvider(sq, budget)
    keep = []
    for i in range(d):
        v = ask(LiteralViolationIndicator(i), budget.tau)
        if (v + 1.0) / 2.0 <= eps / (2.0 * d):
            keep.append(i)
    return Conjunction(frozenset(keep), d)


@dataclass(frozen=True)
class HalfspaceLearner:
    d: int
    eps: float
    kappa: float = DEFAULT_KAPPA
    scale: float = 1.0
    correlational = True

    @property
    def budget(self) -> QueryBudget:
        return query_plan("halfspace", self.d, self.eps, self.kappa)

    def __call__(self, provider: Provider) -> Hypothesis:
        return learn_halfspace_csq(provider, self.d, self.eps, self.budget, scale=self.scale)


@dataclass(frozen=True)
class ConjunctionLearner:
    d: int
    eps: float
    correlational = False

    @property
    def budget(self) -> QueryBudget:
        return query_plan("conjunction", self.d, self.eps)

    def __call__(self, provider: Provider) -> Hypothesis:
        return learn_conjunction_sq(provider, self.d, self.eps, self.budget)
