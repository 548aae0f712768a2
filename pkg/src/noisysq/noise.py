"""Flip-probability functions and the magnitude calculus.

A noise function maps points to flip probabilities in ``[0, 1/2)``.  Its
magnitude with respect to a marginal is ``1 / E[1 - 2 eta(x)]``; the Bayes
classifier then errs with probability ``1/2 - 1/(2M)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar, NamedTuple

import numpy as np

from .domain import (
    Halfspace,
    MarginalSpec,
    SeedSpec,
    UniformBall,
    _registering,
    _Variant,
    as_seed,
    index_from_vertices,
    rotate_in_plane,
)
from .errors import ConfigError, DegenerateNoiseError

ETA_CEILING = 0.5 - 1e-12
CHUNK = 1 << 18


class NoiseSpec(_Variant):
    def eta(self, X: np.ndarray) -> np.ndarray:
        """Flip probabilities for the rows of ``X``."""
        raise NotImplementedError

    def magnitude_bound(self) -> float | None:
        """Closed-form upper bound on the magnitude, when one is known."""
        return None


register_noise = _registering(NoiseSpec)


def _radii(X):
    return np.sqrt(np.einsum("ij,ij->i", X, X))


@register_noise
@dataclass(frozen=True)
class RCN(NoiseSpec):
    gamma: float
    variant: ClassVar[str] = "RCN"

    def __post_init__(self):
        if not 0.0 <= self.gamma < 0.5:
            raise ConfigError(f"RCN rate must lie in [0, 1/2), got {self.gamma}")

    def eta(self, X):
        return np.full(len(X), float(self.gamma))

    def magnitude_bound(self):
        return 1.0 / (1.0 - 2.0 * self.gamma)


@register_noise
@dataclass(frozen=True)
class MassartRadial(NoiseSpec):
    """Piecewise-linear monotone radial profile ``eta(|x|)`` bounded by ``gamma``.

    Outside ``[radii[0], radii[-1]]`` the profile is held constant.
    """

    radii: tuple[float, ...]
    values: tuple[float, ...]
    variant: ClassVar[str] = "MassartRadial"

    def __post_init__(self):
        r = tuple(float(v) for v in self.radii)
        v = tuple(float(x) for x in self.values)
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "values", v)
        if len(r) != len(v) or len(r) < 1:
            raise ConfigError("MassartRadial needs matching, non-empty radii and values")
        if any(b <= a for a, b in zip(r, r[1:])):
            raise ConfigError("MassartRadial radii must be strictly increasing")
        diffs = np.diff(v)
        if not (np.all(diffs >= 0) or np.all(diffs <= 0)):
            raise ConfigError("MassartRadial profile must be monotone")
        if min(v) < 0 or max(v) >= 0.5:
            raise ConfigError("MassartRadial values must lie in [0, 1/2)")

    @property
    def gamma(self) -> float:
        return max(self.values)

    def eta(self, X):
        return np.interp(_radii(X), self.radii, self.values)

    def magnitude_bound(self):
        return 1.0 / (1.0 - 2.0 * self.gamma)


@register_noise
@dataclass(frozen=True)
class RadialTsybakov(NoiseSpec):
    """``eta(x) = 1/2 - min(1/2, t(|x|))`` with ``t(r) = (r^d / A)^((1-alpha)/alpha)``.

    On the uniform ball ``|x|^d`` is uniform on [0, 1], so
    ``Pr[eta >= 1/2 - t] = min(1, A t^(alpha/(1-alpha)))`` for every t: the
    Tsybakov tail condition holds with equality.
    """

    alpha: float
    A: float
    t0: float
    d: int
    variant: ClassVar[str] = "RadialTsybakov"

    def __post_init__(self):
        check_tsybakov_params(self.alpha, self.A, self.t0)
        if int(self.d) < 1:
            raise ConfigError("RadialTsybakov needs d >= 1")

    @property
    def exponent(self) -> float:
        return (1.0 - self.alpha) / self.alpha

    def margin(self, r: np.ndarray) -> np.ndarray:
        return (np.asarray(r) ** self.d / self.A) ** self.exponent

    def eta(self, X):
        eta = 0.5 - np.minimum(0.5, self.margin(_radii(X)))
        return np.minimum(eta, ETA_CEILING)

    def magnitude_bound(self):
        return tsybakov_magnitude_bound(self.alpha, self.A, self.t0).bound


@register_noise
@dataclass(frozen=True)
class BetaClean(NoiseSpec):
    """Noiseless inside angular sectors of the (x_0, x_1) plane, ``1/2 - rho`` elsewhere.

    ``sectors`` holds ``(start_angle, width)`` pairs in radians.
    """

    beta: float
    rho: float
    sectors: tuple[tuple[float, float], ...]
    variant: ClassVar[str] = "BetaClean"

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError("beta must lie in (0, 1]")
        if not 0.0 < self.rho <= 0.5:
            raise ConfigError("rho must lie in (0, 1/2]")
        object.__setattr__(
            self, "sectors", tuple((float(a), float(w)) for a, w in self.sectors)
        )

    def in_clean_region(self, X) -> np.ndarray:
        phi = np.arctan2(X[:, 1], X[:, 0])
        inside = np.zeros(len(X), dtype=bool)
        for start, width in self.sectors:
            inside |= np.mod(phi - start, 2 * math.pi) < width
        return inside

    def eta(self, X):
        noisy = min(0.5 - self.rho, ETA_CEILING)
        return np.where(self.in_clean_region(X), 0.0, noisy)

    def magnitude_bound(self):
        return 1.0 / self.beta


@register_noise
@dataclass(frozen=True, eq=False)
class HypercubeTable(NoiseSpec):
    """Explicit flip probability for each vertex of ``{-1, +1}^d``.

    Either ``values`` (length ``2**d``, indexed by the bits of ``x < 0``) or a
    ``seed`` from which values are drawn uniformly from ``[low, high]``.
    """

    d: int
    values: np.ndarray | None = None
    seed: int | None = None
    low: float = 0.0
    high: float = 0.45
    variant: ClassVar[str] = "Table"

    def __post_init__(self):
        if not 1 <= self.d <= 24:
            raise ConfigError("HypercubeTable supports 1 <= d <= 24")
        if self.values is None:
            if self.seed is None:
                raise ConfigError("HypercubeTable needs values or a seed")
            if not 0.0 <= self.low <= self.high < 0.5:
                raise ConfigError("table range must satisfy 0 <= low <= high < 1/2")
            rng = SeedSpec(int(self.seed), 0).generator()
            vals = rng.uniform(self.low, self.high, size=2**self.d)
        else:
            vals = np.asarray(self.values, dtype=float)
            if vals.shape != (2**self.d,):
                raise ConfigError(f"table needs {2**self.d} values, got shape {vals.shape}")
            if vals.min() < 0 or vals.max() >= 0.5:
                raise ConfigError("table values must lie in [0, 1/2)")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def _fields_to_json(self):
        if self.seed is not None:
            return {"d": self.d, "seed": self.seed, "low": self.low, "high": self.high}
        return {"d": self.d, "values": self.values.tolist()}

    def eta_index(self, idx: np.ndarray) -> np.ndarray:
        return self.values[idx]

    def eta(self, X):
        return self.values[index_from_vertices(X)]

    def exact_magnitude(self) -> float:
        """Magnitude under the uniform hypercube, by enumeration."""
        return 1.0 / (1.0 - 2.0 * float(self.values.mean()))

    def magnitude_bound(self):
        return 1.0 / (1.0 - 2.0 * float(self.values.max()))


def noise_from_dict(data) -> NoiseSpec:
    return NoiseSpec.from_dict(data)


def flip_probability(noise: NoiseSpec, x) -> float | np.ndarray:
    """``eta(x)`` for one point (float) or a batch of rows (array)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(noise.eta(x[None, :])[0])
    return noise.eta(x)


# --------------------------------------------------------------------------
# Monte-Carlo magnitude and Bayes error


def _moments(noise, marginal, n, seed, fn):
    """Running mean and sample std of ``fn(eta)`` over ``n`` marginal draws."""
    rng = as_seed(seed).generator()
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n:
        m = min(CHUNK, n - done)
        v = fn(noise.eta(marginal.sample(m, rng)))
        total += float(v.sum())
        total_sq += float(np.dot(v, v))
        done += m
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return mean, math.sqrt(var)


@dataclass(frozen=True)
class MagnitudeReport:
    estimate: float
    std_error: float
    analytic_bound: float | None
    samples_used: int

    def to_dict(self):
        return dict(self.__dict__)


def estimate_magnitude(
    noise: NoiseSpec, marginal: MarginalSpec, n: int, seed: SeedSpec | int
) -> MagnitudeReport:
    """Monte-Carlo magnitude ``1 / mean(1 - 2 eta)`` with a delta-method error."""
    if n < 100:
        raise ConfigError("estimate_magnitude needs n >= 100")
    mean, sd = _moments(noise, marginal, n, seed, lambda e: 1.0 - 2.0 * e)
    if mean <= 0:
        raise DegenerateNoiseError(f"mean of 1 - 2 eta is {mean}")
    se_mean = sd / math.sqrt(n)
    return MagnitudeReport(
        estimate=1.0 / mean,
        std_error=se_mean / mean**2,
        analytic_bound=noise.magnitude_bound(),
        samples_used=n,
    )


def bayes_error(noise, marginal, n, seed, *, with_se=False):
    """Monte-Carlo ``OPT = E[eta(x)]``; optionally also its standard error."""
    if n < 100:
        raise ConfigError("bayes_error needs n >= 100")
    mean, sd = _moments(noise, marginal, n, seed, lambda e: e)
    return (mean, sd / math.sqrt(n)) if with_se else mean


# --------------------------------------------------------------------------
# Tsybakov calculus


def check_tsybakov_params(alpha, A, t0):
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    if not A > 0:
        raise ConfigError(f"A must be positive, got {A}")
    if not 0.0 < t0 <= 0.5:
        raise ConfigError(f"t0 must lie in (0, 1/2], got {t0}")
    if A * t0 ** (alpha / (1.0 - alpha)) > 1.0 + 1e-12:
        raise ConfigError("Tsybakov parameters must satisfy A * t0^(alpha/(1-alpha)) <= 1")


class TsybakovBound(NamedTuple):
    bound: float
    t_star: float
    branch: str  # "interior" when t_star <= t0, else "boundary"


def tsybakov_magnitude_bound(alpha: float, A: float, t0: float) -> TsybakovBound:
    """Distribution-free upper bound on the magnitude of (alpha, A, t0)-Tsybakov noise.

    It is the reciprocal of ``sup_{t in [0, t0]} 2t (1 - A t^(alpha/(1-alpha)))``;
    the maximiser is ``t* = ((1-alpha)/A)^((1-alpha)/alpha)`` when it lies
    inside the interval, otherwise ``t0``.
    """
    check_tsybakov_params(alpha, A, t0)
    p = (1.0 - alpha) / alpha
    t_star = ((1.0 - alpha) / A) ** p
    if t_star <= t0:
        return TsybakovBound((A / (1.0 - alpha)) ** p / (2.0 * alpha), t_star, "interior")
    inner = 2.0 * t0 * (1.0 - A * t0 ** (alpha / (1.0 - alpha)))
    return TsybakovBound(1.0 / inner, t_star, "boundary")


def build_radial_tsybakov(alpha: float, A: float, t0: float, marginal: MarginalSpec) -> RadialTsybakov:
    """Radial Tsybakov noise whose tail bound is tight under the uniform ball."""
    if not isinstance(marginal, UniformBall):
        raise ConfigError(
            "radial Tsybakov construction needs the UniformBall marginal "
            f"(its radius law is closed form), got {type(marginal).__name__}"
        )
    return RadialTsybakov(alpha, A, t0, marginal.d)


def realizable_translation(model: str, params: dict, eps_prime: float) -> float:
    """Excess error on the noisy distribution that forces realizable error <= eps_prime.

    ``model`` is ``"Massart"`` (params: gamma) or ``"Tsybakov"`` (params:
    alpha, A, t0).
    """
    if not 0.0 <= eps_prime < 1.0:
        raise ConfigError(f"eps_prime must lie in [0, 1), got {eps_prime}")
    if model == "Massart":
        gamma = params["gamma"]
        if not 0.0 <= gamma < 0.5:
            raise ConfigError("Massart gamma must lie in [0, 1/2)")
        return eps_prime * (1.0 - 2.0 * gamma)
    if model == "Tsybakov":
        alpha, A, t0 = params["alpha"], params["A"], params["t0"]
        check_tsybakov_params(alpha, A, t0)
        if eps_prime == 0.0:
            return 0.0
        p = (1.0 - alpha) / alpha
        t_star = (eps_prime * (1.0 - alpha) / A) ** p
        if t_star <= t0:
            return (
                2.0 * eps_prime ** (1.0 / alpha) * ((1.0 - alpha) / A) ** p
                - 2.0 * A * (eps_prime * (1.0 - alpha) / A) ** (1.0 / alpha)
            )
        return 2.0 * t0 * eps_prime - 2.0 * A * t0 ** (1.0 / (1.0 - alpha))
    raise ConfigError(f"unknown noise model {model!r}; expected 'Massart' or 'Tsybakov'")


def tsybakov_translation_objective(t, eps_prime, alpha, A):
    """``2 t eps' - 2 A t^(1/(1-alpha))``, maximised by the Tsybakov translation."""
    t = np.asarray(t, dtype=float)
    return 2.0 * t * eps_prime - 2.0 * A * t ** (1.0 / (1.0 - alpha))


# --------------------------------------------------------------------------
# beta-clean counterexample


class BetaCleanInstance(NamedTuple):
    noise: BetaClean
    concept: Halfspace
    marginal: UniformBall
    competitor: Halfspace


def build_beta_clean_2d(beta: float, rho: float) -> BetaCleanInstance:
    """Two clean caps of mass beta/2 each on the unit disk, noise 1/2 - rho elsewhere.

    The target is ``sign(x_0)``.  The competitor ``h'`` is the target rotated
    by ``theta = min(beta*pi/2, (1-beta)*pi)``; the caps sit against the
    competitor's boundary on the side where both classifiers agree, so ``h'``
    is correct on all clean points while disagreeing with the target on mass
    ``theta/pi`` of noisy points.
    """
    if not 0.0 < beta <= 1.0:
        raise ConfigError("beta must lie in (0, 1]")
    if not 0.0 < rho <= 0.5:
        raise ConfigError("rho must lie in (0, 1/2]")
    theta = min(beta * math.pi / 2.0, (1.0 - beta) * math.pi)
    width = beta * math.pi
    sectors = ((theta - math.pi / 2.0, width), (theta + math.pi / 2.0, width))
    target = Halfspace((1.0, 0.0))
    return BetaCleanInstance(
        noise=BetaClean(beta, rho, sectors),
        concept=target,
        marginal=UniformBall(2),
        competitor=rotate_in_plane(target, theta),
    )


__all__ = [
    "NoiseSpec",
    "RCN",
    "MassartRadial",
    "RadialTsybakov",
    "BetaClean",
    "HypercubeTable",
    "MagnitudeReport",
    "TsybakovBound",
    "BetaCleanInstance",
    "flip_probability",
    "estimate_magnitude",
    "bayes_error",
    "tsybakov_magnitude_bound",
    "build_radial_tsybakov",
    "realizable_translation",
    "tsybakov_translation_objective",
    "build_beta_clean_2d",
    "noise_from_dict",
    "check_tsybakov_params",
]
