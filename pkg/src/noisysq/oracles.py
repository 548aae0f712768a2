"""Example oracles (noiseless, noisy, extended-noisy) and honest clean SQ oracles."""
from __future__ import annotations

import csv
import math
from enum import Enum
from typing import Callable

import numpy as np

from .domain import Concept, MarginalSpec, SeedSpec, UniformHypercube, as_seed, vertices_from_index
from .errors import ConfigError, ContractError
from .noise import HypercubeTable, NoiseSpec
from .queries import QuerySpec

CHUNK = 1 << 16


class Mode(str, Enum):
    NOISELESS = "Noiseless"
    NOISY = "Noisy"
    EXTENDED = "ExtendedNoisy"


class OracleStream:
    """Stateful sampler for ``EX``, ``EX_noisy`` or ``EX_eta``.

    ``draw(n)`` returns ``(X, y)`` or, in extended mode, ``(X, y, eta)``.
    Labels are flipped independently with probability ``eta(x)``; the point
    draws and the flip coins come from one Philox stream, so a given
    ``seed`` reproduces the same sequence of calls exactly.
    """

    def __init__(
        self,
        marginal: MarginalSpec,
        concept: Concept,
        noise: NoiseSpec | None = None,
        mode: Mode | str = Mode.NOISY,
        seed: SeedSpec | int = 0,
    ):
        self.marginal = marginal
        self.concept = concept
        self.noise = noise
        self.mode = Mode(mode)
        self.seed = as_seed(seed)
        if self.mode is not Mode.NOISELESS and noise is None:
            raise ConfigError(f"{self.mode.value} oracle needs a noise function")
        if concept.dim != marginal.d:
            raise ConfigError(f"concept dimension {concept.dim} != marginal dimension {marginal.d}")
        self.draws_made = 0
        self._rng = self.seed.generator()
        # table noise on the hypercube can be looked up from the vertex index directly
        self._indexed = isinstance(marginal, UniformHypercube) and isinstance(noise, HypercubeTable)

    def __repr__(self):
        return f"OracleStream({self.mode.value}, draws_made={self.draws_made})"

    @property
    def extended(self) -> bool:
        return self.mode is Mode.EXTENDED

    def draw(self, n: int = 1):
        n = int(n)
        if n < 1:
            raise ContractError("draw needs n >= 1")
        rng = self._rng
        if self._indexed:
            idx = self.marginal.sample_index(n, rng)
            X = vertices_from_index(idx, self.marginal.d)
            eta = self.noise.eta_index(idx) if self.mode is not Mode.NOISELESS else None
        else:
            X = self.marginal.sample(n, rng)
            eta = self.noise.eta(X) if self.mode is not Mode.NOISELESS else None
        y = self.concept.predict(X)
        if eta is not None:
            flip = rng.random(n) < eta
            y = np.where(flip, -y, y).astype(np.int8)
        self.draws_made += n
        if self.extended:
            return X, y, eta
        return X, y

    def batches(self, n: int, chunk: int = CHUNK):
        """Yield draws in chunks totalling ``n``."""
        done = 0
        while done < n:
            m = min(chunk, n - done)
            yield self.draw(m)
            done += m


def dump_csv(path, X, y, eta=None):
    """Write a draw batch with header ``x0..x{d-1}, y[, eta]``."""
    X = np.atleast_2d(X)
    header = [f"x{j}" for j in range(X.shape[1])] + ["y"] + (["eta"] if eta is not None else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(X)):
            row = [repr(float(v)) for v in X[i]] + [int(y[i])]
            if eta is not None:
                row.append(repr(float(eta[i])))
            w.writerow(row)


def load_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float) if body else np.empty((0, len(header)))
    has_eta = header[-1] == "eta"
    d = len(header) - (2 if has_eta else 1)
    X = data[:, :d]
    y = data[:, d].astype(np.int8)
    return (X, y, data[:, d + 1]) if has_eta else (X, y)


# --------------------------------------------------------------------------
# honest clean SQ oracles


def sq_sample_size(tau: float, delta: float = 1e-6) -> int:
    """Hoeffding count for a [-1, 1]-valued mean to within ``tau`` w.p. ``1 - delta``."""
    return math.ceil(2.0 * math.log(2.0 / delta) / tau**2)


def _mc_mean(values_fn, marginal, concept, n, seed):
    rng = as_seed(seed).generator()
    total, done = 0.0, 0
    while done < n:
        m = min(CHUNK, n - done)
        X = marginal.sample(m, rng)
        total += float(np.sum(values_fn(X, concept.predict(X))))
        done += m
    return total / n


def clean_sq(
    query: QuerySpec,
    tau: float,
    marginal: MarginalSpec,
    concept: Concept,
    seed: SeedSpec | int,
    *,
    delta: float = 1e-6,
    max_draws: int | None = None,
) -> float:
    """Unbiased Monte-Carlo estimate of ``E[psi(x, f(x))]`` sized for tolerance ``tau``."""
    if not 0.0 < tau <= 1.0:
        raise ContractError(f"tolerance must lie in (0, 1], got {tau}")
    n = sq_sample_size(tau, delta)
    if max_draws is not None:
        n = min(n, int(max_draws))
    return _mc_mean(lambda X, y: query(X, y), marginal, concept, n, seed)


def clean_csq(
    phi: QuerySpec | Callable[[np.ndarray], np.ndarray],
    tau: float,
    marginal: MarginalSpec,
    concept: Concept,
    seed: SeedSpec | int,
    *,
    delta: float = 1e-6,
    max_draws: int | None = None,
) -> float:
    """Estimate of ``E[phi(x) f(x)]``.

    ``phi`` is either an x-only function with values in [-1, 1] or a
    correlational :class:`QuerySpec` (whose label-free part must vanish).
    """
    if isinstance(phi, QuerySpec):
        if not phi.is_correlational:
            raise ContractError(f"{phi.variant} is not a correlational query")
        fn = phi.csq
    else:
        fn = phi
    if not 0.0 < tau <= 1.0:
        raise ContractError(f"tolerance must lie in (0, 1], got {tau}")
    n = sq_sample_size(tau, delta)
    if max_draws is not None:
        n = min(n, int(max_draws))
    return _mc_mean(lambda X, y: fn(X) * y, marginal, concept, n, seed)


class CleanOracle:
    """Answer-provider ``(query, tau) -> value`` backed by :func:`clean_sq`.

    Each query gets its own derived random stream.  ``nominal_draws`` is the
    Hoeffding count that was asked for; ``draws`` what was actually used
    (they differ only when ``max_draws`` caps the count).
    """

    def __init__(self, marginal, concept, seed=0, *, delta=1e-6, max_draws=None):
        self.marginal = marginal
        self.concept = concept
        self.seed = as_seed(seed)
        self.delta = delta
        self.max_draws = max_draws
        self.queries = 0
        self.draws = 0
        self.nominal_draws = 0

    def __call__(self, query: QuerySpec, tau: float) -> float:
        n = sq_sample_size(tau, self.delta)
        used = n if self.max_draws is None else min(n, int(self.max_draws))
        v = clean_sq(
            query,
            tau,
            self.marginal,
            self.concept,
            self.seed.derive(self.queries),
            delta=self.delta,
            max_draws=self.max_draws,
        )
        self.queries += 1
        self.nominal_draws += n
        self.draws += used
        return v
