"""Noise-tolerant simulation of statistical queries.

The reweighted distribution ``D'(x) ∝ D(x) (1 - 2 eta(x))`` turns a noisy
problem into a noiseless one: a hypothesis with error ``eps`` on ``D'``
has excess error at most ``eps`` on the noisy distribution.  Two routes
answer a learner's queries on ``D'``:

* :func:`run_csq_reduction` only sees noisy labels.  Correlational queries
  satisfy ``E_D[phi(x) y] = Z * E_D'[phi(x) f(x)]`` with ``Z = 1/M``, so the
  learner is replayed over a grid of guesses for ``Z`` and the candidate
  with the smallest empirical error wins.
* :func:`run_sq_reduction` sees ``eta(x)`` with every example.  Any query
  splits into a label-free part and a correlational part, and both can be
  estimated directly with ``Z`` estimated from the reported flip rates.

Sample sizes come from Hoeffding's inequality with explicit constants.
``max_draws`` caps them for desk-scale runs; :class:`DrawLog` keeps the
nominal and the used counts side by side.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .domain import Concept, Hypothesis, MarginalSpec, SeedSpec, as_seed
from .errors import ConfigError, ContractError, MagnitudeBoundError
from .noise import NoiseSpec
from .oracles import CHUNK, OracleStream
from .queries import QuerySpec


def hoeffding_count(tol: float, delta: float, width: float = 1.0) -> int:
    """Draws so that a mean of ``width``-range variables is within ``tol`` w.p. ``1 - delta``."""
    if not tol > 0 or not 0 < delta < 1:
        raise ConfigError(f"hoeffding_count needs tol > 0 and delta in (0, 1), got {tol}, {delta}")
    return math.ceil(width**2 * math.log(2.0 / delta) / (2.0 * tol**2))


def hoeffding_radius(n: int, delta: float, width: float = 1.0) -> float:
    return width * math.sqrt(math.log(2.0 / delta) / (2.0 * n))


@dataclass
class DrawLog:
    """Nominal (Hoeffding) versus used draw counts, per simulated estimate."""

    entries: list = field(default_factory=list)

    def record(self, kind: str, nominal: int, used: int):
        self.entries.append((kind, int(nominal), int(used)))

    @property
    def nominal(self) -> int:
        return sum(e[1] for e in self.entries)

    @property
    def used(self) -> int:
        return sum(e[2] for e in self.entries)


def _cap(n, max_draws):
    return n if max_draws is None else max(1, min(n, int(max_draws)))


# --------------------------------------------------------------------------
# ground-truth comparator


def transformed_expectation(
    fn: Callable,
    marginal: MarginalSpec,
    noise: NoiseSpec,
    n: int,
    seed: SeedSpec | int,
    concept: Concept | None = None,
) -> tuple[float, float]:
    """Importance-weighted ``E_D'[fn]`` and its delta-method standard error.

    Draws from the marginal, weights by ``1 - 2 eta(x)`` and normalises by
    the weight sum.  ``fn`` receives ``X`` or, if ``concept`` is given,
    ``(X, f(X))``.
    """
    rng = as_seed(seed).generator()
    sw = swg = swg2 = sw2g = sw2 = 0.0
    done = 0
    while done < n:
        m = min(CHUNK, n - done)
        X = marginal.sample(m, rng)
        w = 1.0 - 2.0 * noise.eta(X)
        g = fn(X, concept.predict(X)) if concept is not None else fn(X)
        g = np.asarray(g, dtype=float)
        wg = w * g
        sw += w.sum()
        swg += wg.sum()
        swg2 += np.dot(wg, wg)
        sw2g += np.dot(w * w, g)
        sw2 += np.dot(w, w)
        done += m
    if sw <= 0:
        raise ContractError("weights sum to zero")
    ratio = swg / sw
    # residual w (g - ratio), squared and summed
    resid = swg2 - 2 * ratio * sw2g + ratio**2 * sw2
    se = math.sqrt(max(resid, 0.0)) / sw
    return ratio, se


# --------------------------------------------------------------------------
# query decomposition


@dataclass(frozen=True)
class DecomposedQuery:
    """``psi(x, y) = phi_ti(x) + y * phi_csq(x)`` for ``y`` in {+1, -1}."""

    phi_ti: Callable[[np.ndarray], np.ndarray]
    phi_csq: Callable[[np.ndarray], np.ndarray]
    ti_constant: float | None = None
    csq_zero: bool = False
    source: QuerySpec | None = None


def decompose_query(psi: QuerySpec) -> DecomposedQuery:
    """Split a query into its label-free and correlational halves.

    ``phi_ti = (psi(., 1) + psi(., -1)) / 2`` and
    ``phi_csq = (psi(., 1) - psi(., -1)) / 2``; the built-in variants supply
    these in closed form.
    """
    return DecomposedQuery(
        phi_ti=psi.ti,
        phi_csq=psi.csq,
        ti_constant=psi.ti_constant,
        csq_zero=bool(psi.csq_zero),
        source=psi,
    )


def _as_part(part, constant=None):
    """Normalise a query part to (callable or None, known constant or None)."""
    if isinstance(part, (int, float)):
        return None, float(part)
    return part, constant


def _require_extended(oracle):
    if not oracle.extended:
        raise ContractError("this simulation needs the extended oracle (one that reports eta)")


def _check_z(z_raw, n, delta, C):
    """Reject runs whose observed Z is confidently below 1/C."""
    if z_raw + hoeffding_radius(n, delta) < 1.0 / C:
        raise MagnitudeBoundError(
            f"estimated Z = {z_raw:.4g} (from {n} draws) is below 1/C = {1.0 / C:.4g}; "
            "the magnitude bound C is too small"
        )


# --------------------------------------------------------------------------
# extended-oracle simulations


def simulate_ti(
    phi_ti,
    tau: float,
    C: float,
    delta: float,
    oracle: OracleStream,
    *,
    max_draws: int | None = None,
    log: DrawLog | None = None,
) -> float:
    """Estimate ``E_D'[phi_ti(x)]`` within ``tau`` from the extended oracle.

    ``phi_ti`` is an x-only function into [-1, 1] or a constant (answered
    exactly, with no draws).  The function is shifted to ``phi = (1 +
    phi_ti)/2`` in [0, 1]; both ``Z`` and ``E_D[phi (1 - 2 eta)]`` are
    estimated to ``tau' / 2`` with ``tau' = tau / (2C)`` and inflated by
    ``tau' / 2`` before taking their ratio.
    """
    fn, const = _as_part(phi_ti)
    if const is not None:
        return const
    _require_extended(oracle)
    tp = tau / (2.0 * C)
    nominal = hoeffding_count(tp / 2.0, delta / 2.0)
    n = _cap(nominal, max_draws)
    sw = swphi = 0.0
    for X, _, eta in oracle.batches(n):
        w = 1.0 - 2.0 * eta
        sw += w.sum()
        swphi += np.dot(w, (1.0 + fn(X)) / 2.0)
    if log is not None:
        log.record("ti", nominal, n)
    z_raw = sw / n
    _check_z(z_raw, n, delta / 2.0, C)
    z_hat = z_raw + tp / 2.0
    num = swphi / n + tp / 2.0
    v = 2.0 * (num / z_hat) - 1.0
    return float(np.clip(v, -1.0, 1.0))


def simulate_csq_ext(
    phi_csq,
    tau: float,
    C: float,
    delta: float,
    oracle: OracleStream,
    *,
    max_draws: int | None = None,
    log: DrawLog | None = None,
) -> float:
    """Estimate ``E_D'[phi_csq(x) f(x)]`` within ``tau`` from the extended oracle.

    ``Z`` is estimated to ``tau'/2`` with ``tau' = tau / (2 C^2)`` and
    inflated by ``tau'/2``; ``E_D[phi y]`` is estimated to ``tau / (2C)``.
    The answer is their ratio.
    """
    fn, const = _as_part(phi_csq)
    if const is not None:
        if const != 0.0:
            raise ContractError("a constant correlational part must be zero")
        return 0.0
    _require_extended(oracle)
    tp = tau / (2.0 * C**2)
    n_z = hoeffding_count(tp / 2.0, delta / 2.0)
    n_corr = hoeffding_count(tau / (2.0 * C), delta / 2.0, width=2.0)
    nominal = max(n_z, n_corr)
    n = _cap(nominal, max_draws)
    sw = scorr = 0.0
    for X, y, eta in oracle.batches(n):
        sw += (1.0 - 2.0 * eta).sum()
        scorr += np.dot(np.asarray(fn(X), dtype=float), y)
    if log is not None:
        log.record("csq", nominal, n)
    z_raw = sw / n
    _check_z(z_raw, n, delta / 2.0, C)
    z_hat = z_raw + tp / 2.0
    v = (scorr / n) / z_hat
    return float(np.clip(v, -1.0, 1.0))


def simulate_sq_ext(
    psi: QuerySpec,
    tau: float,
    C: float,
    delta: float,
    oracle: OracleStream,
    *,
    max_draws: int | None = None,
    log: DrawLog | None = None,
) -> float:
    """Answer ``(psi, tau)`` on ``D'`` as the sum of its two halves, each at ``tau/2``."""
    dq = decompose_query(psi)
    ti = dq.ti_constant if dq.ti_constant is not None else dq.phi_ti
    csq = 0.0 if dq.csq_zero else dq.phi_csq
    v_ti = simulate_ti(ti, tau / 2.0, C, delta / 2.0, oracle, max_draws=max_draws, log=log)
    v_csq = simulate_csq_ext(csq, tau / 2.0, C, delta / 2.0, oracle, max_draws=max_draws, log=log)
    return float(np.clip(v_ti + v_csq, -1.0, 1.0))


def rcn_sample_count(tau: float, gamma: float, delta: float, correlational: bool = True) -> int:
    """Draws used by :func:`simulate_sq_rcn`: ``8 ln(4/delta) / ((1-2 gamma)^2 tau^2)``."""
    scale = (1.0 - 2.0 * gamma) if correlational else 1.0
    return hoeffding_count(scale * tau / 2.0, delta / 2.0, width=2.0)


def simulate_sq_rcn(
    psi: QuerySpec,
    tau: float,
    gamma: float,
    delta: float,
    oracle: OracleStream,
    *,
    max_draws: int | None = None,
    log: DrawLog | None = None,
) -> float:
    """Estimate ``E[psi(x, f(x))]`` from labels flipped at a known constant rate.

    The constant-rate case of the extended simulation: ``D' = D`` and
    ``Z = 1 - 2 gamma`` is known exactly, so the label-free half is a plain
    mean and the correlational half is ``mean(phi_csq(x) y) / (1 - 2 gamma)``.
    """
    if not 0.0 <= gamma < 0.5:
        raise ConfigError(f"RCN rate must lie in [0, 1/2), got {gamma}")
    dq = decompose_query(psi)
    if dq.csq_zero and dq.ti_constant is not None:
        return dq.ti_constant
    nominal = rcn_sample_count(tau, gamma, delta, correlational=not dq.csq_zero)
    n = _cap(nominal, max_draws)
    s_ti = s_corr = 0.0
    for batch in oracle.batches(n):
        X, y = batch[0], batch[1]
        if dq.ti_constant is None:
            s_ti += dq.phi_ti(X).sum()
        if not dq.csq_zero:
            s_corr += np.dot(np.asarray(dq.phi_csq(X), dtype=float), y)
    if log is not None:
        log.record("rcn", nominal, n)
    v_ti = dq.ti_constant if dq.ti_constant is not None else s_ti / n
    v_csq = (s_corr / n) / (1.0 - 2.0 * gamma)
    return float(np.clip(v_ti + v_csq, -1.0, 1.0))


# --------------------------------------------------------------------------
# error estimation


def estimate_error(h: Hypothesis, oracle: OracleStream, n: int) -> float:
    """Empirical ``Pr[h(x) != y]`` over ``n`` fresh oracle draws."""
    if n < 1:
        raise ContractError("estimate_error needs n >= 1")
    wrong = 0
    for batch in oracle.batches(n):
        wrong += int(np.count_nonzero(h.predict(batch[0]) != batch[1]))
    return wrong / n


# --------------------------------------------------------------------------
# reduction with unknown noise (correlational learners)


@dataclass(frozen=True)
class ZGrid:
    """Guesses ``tau', 2 tau', ...`` (up to 1) for the normaliser ``Z``."""

    tau_prime: float
    C: float

    @classmethod
    def for_tolerance(cls, tau: float, C: float) -> "ZGrid":
        if C < 1:
            raise ConfigError(f"magnitude bound C must be >= 1, got {C}")
        return cls(tau / (2.0 * C**2), C)

    def __len__(self):
        return int(math.floor(1.0 / self.tau_prime + 1e-9))

    @property
    def values(self) -> np.ndarray:
        return self.tau_prime * np.arange(1, len(self) + 1)


@dataclass
class CandidateRecord:
    z_tilde: float
    hypothesis: Hypothesis
    empirical_error: float
    samples_used: int

    def row(self):
        return {"z_tilde": self.z_tilde, "empirical_error": self.empirical_error, "samples_used": self.samples_used}


def csq_query_draws(tau: float, C: float, q: int, delta: float) -> int:
    """Draws per correlational query: accuracy ``tau / (2C)`` w.p. ``1 - delta/q``."""
    return hoeffding_count(tau / (2.0 * C), delta / q, width=2.0)


def candidate_eval_draws(eps: float, n_candidates: int, delta: float) -> int:
    """Draws per candidate error estimate: accuracy ``eps`` for all candidates w.p. ``1 - delta``."""
    return hoeffding_count(eps, delta / n_candidates)


class _EmpiricalCorrelations:
    """Caches ``E_D[psi(x, y)]`` per query so each query is estimated once per run."""

    def __init__(self, oracle, n_nominal, max_draws, log):
        self.oracle = oracle
        self.nominal = n_nominal
        self.n = _cap(n_nominal, max_draws)
        self.log = log
        self.cache = {}

    def __call__(self, query: QuerySpec) -> float:
        if query not in self.cache:
            if not query.is_correlational:
                raise ContractError(f"{query.variant} is not a correlational query")
            total = 0.0
            for batch in self.oracle.batches(self.n):
                total += float(np.sum(query(batch[0], batch[1])))
            self.cache[query] = total / self.n
            if self.log is not None:
                self.log.record("csq-empirical", self.nominal, self.n)
        return self.cache[query]


def run_csq_reduction(
    learner,
    oracle: OracleStream,
    eps: float,
    delta: float,
    C: float,
    *,
    max_draws: int | None = None,
    log: DrawLog | None = None,
) -> tuple[Hypothesis, list[CandidateRecord]]:
    """Learn from noisy labels with a correlational learner and unknown noise.

    For each guess ``z`` on the grid the learner is run with every query
    answered by ``clip(E_D[psi(x, y)] / z, -1, 1)``; each candidate's error is
    then estimated from fresh draws and the lowest (earliest on ties) wins.
    The empirical correlations do not depend on ``z``, so each distinct
    query is estimated once and reused across the grid.
    """
    if not 0 < eps < 1 or not 0 < delta < 1:
        raise ConfigError("eps and delta must lie in (0, 1)")
    budget = learner.budget
    grid = ZGrid.for_tolerance(budget.tau, C)
    corr = _EmpiricalCorrelations(oracle, csq_query_draws(budget.tau, C, budget.q, delta), max_draws, log)
    n_eval = candidate_eval_draws(eps, len(grid), delta)

    records = []
    for z in grid.values:
        before = oracle.draws_made

        def provider(query, tau, z=z):
            return float(np.clip(corr(query) / z, -1.0, 1.0))

        h = learner(provider)
        err = estimate_error(h, oracle, n_eval)
        records.append(CandidateRecord(float(z), h, err, oracle.draws_made - before))

    best = min(range(len(records)), key=lambda i: (records[i].empirical_error, i))
    # every estimate is within eps of its truth w.p. 1 - delta
    if records[best].empirical_error >= 0.5 - eps:
        warnings.warn(
            "no candidate beats the trivial error; the magnitude bound C may be too small",
            RuntimeWarning,
            stacklevel=2,
        )
    return records[best].hypothesis, records


# --------------------------------------------------------------------------
# reduction with the extended oracle (general learners)


class ExtendedSQSimulator:
    """Answer-provider that simulates SQs on ``D'`` through the extended oracle."""

    def __init__(self, oracle, C, delta_per_query, *, max_draws=None, log=None):
        self.oracle = oracle
        self.C = C
        self.delta = delta_per_query
        self.max_draws = max_draws
        self.log = log

    def __call__(self, query: QuerySpec, tau: float) -> float:
        return simulate_sq_ext(
            query, tau, self.C, self.delta, self.oracle, max_draws=self.max_draws, log=self.log
        )


def run_sq_reduction(
    learner,
    oracle: OracleStream,
    eps: float,
    delta: float,
    C: float,
    *,
    max_draws: int | None = None,
    log: DrawLog | None = None,
) -> Hypothesis:
    """Run an SQ learner once, answering each query via :func:`simulate_sq_ext` at ``delta/q``."""
    if not 0 < eps < 1 or not 0 < delta < 1:
        raise ConfigError("eps and delta must lie in (0, 1)")
    if C < 1:
        raise ConfigError(f"magnitude bound C must be >= 1, got {C}")
    _require_extended(oracle)
    budget = learner.budget
    sim = ExtendedSQSimulator(oracle, C, delta / budget.q, max_draws=max_draws, log=log)
    return learner(sim)
