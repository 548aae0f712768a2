"""Points, concepts, marginal distributions and seeded sampling.

Points are rows of a float64 array of shape ``(n, d)``; labels are ``int8``
arrays with values in ``{+1, -1}``.  Every spec object is a frozen dataclass
that round-trips through a JSON dict carrying a ``"variant"`` field.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np

from .errors import ConfigError, ContractError

UNIT_NORM_TOL = 1e-9


# --------------------------------------------------------------------------
# seeds


@dataclass(frozen=True)
class SeedSpec:
    """A reproducible random stream: ``(master_seed, stream_id)``.

    Streams are Philox (counter-based) generators keyed through a
    ``SeedSequence``; equal specs give bit-identical sequences.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not (0 <= int(v) < 2**64):
                raise ConfigError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence([int(self.master_seed), int(self.stream_id)])
        return np.random.Generator(np.random.Philox(ss))

    def derive(self, *keys: int) -> "SeedSpec":
        """Child stream under the same master seed, keyed by ``keys``."""
        ss = np.random.SeedSequence([int(self.master_seed), int(self.stream_id), *map(int, keys)])
        hi, lo = ss.generate_state(2, dtype=np.uint32)
        return SeedSpec(self.master_seed, (int(hi) << 32) | int(lo))


def as_seed(seed: SeedSpec | int) -> SeedSpec:
    return seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))


# --------------------------------------------------------------------------
# JSON registry shared by the *Spec families


class _Variant:
    """Mixin for ``to_dict``/``from_dict`` with a variant discriminator."""

    _registry: ClassVar[dict[str, type]]
    variant: ClassVar[str]

    def to_dict(self) -> dict[str, Any]:
        out = {"variant": self.variant}
        out.update(self._fields_to_json())
        return out

    def _fields_to_json(self) -> dict[str, Any]:
        return {k: _jsonable(v) for k, v in self.__dict__.items() if not k.startswith("_")}

    @classmethod
    def from_dict(cls, data: dict[str, Any]):
        data = dict(data)
        try:
            variant = data.pop("variant")
        except KeyError:
            raise ConfigError(f"{cls.__name__} JSON needs a 'variant' field") from None
        try:
            sub = cls._registry[variant]
        except KeyError:
            raise ConfigError(
                f"unknown {cls.__name__} variant {variant!r}; expected one of {sorted(cls._registry)}"
            ) from None
        try:
            return sub._from_json(data)
        except TypeError as exc:
            raise ConfigError(f"bad fields for {variant}: {exc}") from None

    @classmethod
    def _from_json(cls, data):
        return cls(**data)


def _jsonable(v):
    if isinstance(v, (tuple, list, frozenset, set)):
        items = sorted(v) if isinstance(v, (frozenset, set)) else v
        return [_jsonable(x) for x in items]
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, _Variant):
        return v.to_dict()
    return v


def _registering(base):
    base._registry = {}

    def register(cls):
        base._registry[cls.variant] = cls
        return cls

    return register


# --------------------------------------------------------------------------
# marginals


class MarginalSpec(_Variant):
    d: int

    #: bound on |x_i|, used to scale coordinate queries into [-1, 1]
    coord_bound: float = 1.0
    spherical: ClassVar[bool] = True

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def _check_dim(self):
        if int(self.d) < 1:
            raise ConfigError(f"{type(self).__name__}: dimension must be >= 1, got {self.d}")


register_marginal = _registering(MarginalSpec)


def _directions(n, d, rng):
    z = rng.standard_normal((n, d))
    norms = np.sqrt(np.einsum("ij,ij->i", z, z))
    # a zero Gaussian vector has probability zero; redraw if it ever happens
    bad = norms == 0
    while bad.any():
        z[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.sqrt(np.einsum("ij,ij->i", z, z))
        bad = norms == 0
    return z / norms[:, None]


@register_marginal
@dataclass(frozen=True)
class UniformBall(MarginalSpec):
    d: int
    variant: ClassVar[str] = "UniformBall"

    def __post_init__(self):
        self._check_dim()

    def sample(self, n, rng):
        u = _directions(n, self.d, rng)
        r = rng.random(n) ** (1.0 / self.d)
        return u * r[:, None]


@register_marginal
@dataclass(frozen=True)
class UniformSphere(MarginalSpec):
    d: int
    variant: ClassVar[str] = "UniformSphere"

    def __post_init__(self):
        self._check_dim()

    def sample(self, n, rng):
        return _directions(n, self.d, rng)


@register_marginal
@dataclass(frozen=True)
class SphericalGaussian(MarginalSpec):
    """Standard Gaussian conditioned on ``|x| <= truncation_radius``."""

    d: int
    truncation_radius: float | None = None
    variant: ClassVar[str] = "SphericalGaussian"

    def __post_init__(self):
        self._check_dim()
        if self.truncation_radius is None:
            object.__setattr__(self, "truncation_radius", 4.0 * math.sqrt(self.d))
        if not self.truncation_radius > 0:
            raise ConfigError("truncation_radius must be positive")

    @property
    def coord_bound(self):
        return float(self.truncation_radius)

    def sample(self, n, rng):
        out = np.empty((n, self.d))
        filled = 0
        r2 = self.truncation_radius**2
        while filled < n:
            need = n - filled
            z = rng.standard_normal((need + need // 8 + 16, self.d))
            z = z[np.einsum("ij,ij->i", z, z) <= r2][:need]
            out[filled : filled + len(z)] = z
            filled += len(z)
        return out


@register_marginal
@dataclass(frozen=True)
class UniformHypercube(MarginalSpec):
    """Uniform on the vertices ``{-1, +1}^d``."""

    d: int
    variant: ClassVar[str] = "UniformHypercube"
    spherical: ClassVar[bool] = False

    def __post_init__(self):
        self._check_dim()
        if self.d > 62:
            raise ConfigError("UniformHypercube supports d <= 62")

    def sample(self, n, rng):
        return vertices_from_index(self.sample_index(n, rng), self.d)

    def sample_index(self, n, rng) -> np.ndarray:
        """Vertex indices; bit ``j`` set means ``x_j = -1``."""
        return rng.integers(0, 2**self.d, size=n, dtype=np.int64)


def vertices_from_index(idx: np.ndarray, d: int) -> np.ndarray:
    bits = (np.asarray(idx, dtype=np.int64)[:, None] >> np.arange(d)) & 1
    return 1.0 - 2.0 * bits


def index_from_vertices(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    bits = (X < 0).astype(np.int64)
    return bits @ (np.int64(1) << np.arange(X.shape[1], dtype=np.int64))


def sample_marginal(spec: MarginalSpec, n: int, seed: SeedSpec | int) -> np.ndarray:
    """Draw ``n`` i.i.d. points from ``spec``; deterministic in ``seed``."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    return spec.sample(int(n), as_seed(seed).generator())


# --------------------------------------------------------------------------
# concepts and hypotheses


class Concept(_Variant):
    """Boolean function on R^d with values in {+1, -1}."""

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X2 = np.atleast_2d(X)
        if X2.shape[1] != self.dim:
            raise ContractError(f"point dimension {X2.shape[1]} != concept dimension {self.dim}")
        out = self.predict(X2)
        return int(out[0]) if single else out


register_concept = _registering(Concept)


@register_concept
@dataclass(frozen=True)
class Halfspace(Concept):
    """Homogeneous halfspace ``sign(<w, x>)`` with ``sign(0) = +1``."""

    weights: tuple[float, ...]
    variant: ClassVar[str] = "Halfspace"

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        object.__setattr__(self, "weights", w)
        norm = math.sqrt(sum(v * v for v in w))
        if len(w) == 0 or abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ContractError(f"Halfspace weights must have unit norm, got {norm!r}")

    @classmethod
    def from_vector(cls, v) -> "Halfspace":
        v = np.asarray(v, dtype=float)
        n = np.linalg.norm(v)
        if n == 0:
            raise ContractError("cannot build a halfspace from the zero vector")
        return cls(tuple(v / n))

    @classmethod
    def _from_json(cls, data):
        return cls(tuple(data.pop("weights")), **data)

    @property
    def w(self) -> np.ndarray:
        return np.asarray(self.weights)

    @property
    def dim(self):
        return len(self.weights)

    def predict(self, X):
        return np.where(X @ self.w >= 0, 1, -1).astype(np.int8)


@register_concept
@dataclass(frozen=True)
class Conjunction(Concept):
    """Monotone conjunction over {-1,+1}^d: +1 iff every listed x_i is +1."""

    literals: frozenset[int]
    d: int
    variant: ClassVar[str] = "Conjunction"

    def __post_init__(self):
        lits = list(self.literals)
        if len(set(lits)) != len(lits):
            raise ContractError("conjunction literals must be distinct")
        lits = frozenset(int(i) for i in lits)
        if any(i < 0 or i >= self.d for i in lits):
            raise ContractError(f"literal index out of range for d={self.d}: {sorted(lits)}")
        object.__setattr__(self, "literals", lits)

    @classmethod
    def _from_json(cls, data):
        return cls(frozenset(data.pop("literals")), **data)

    @property
    def dim(self):
        return self.d

    def predict(self, X):
        if not self.literals:
            return np.ones(len(X), dtype=np.int8)
        cols = sorted(self.literals)
        ok = np.all(X[:, cols] > 0, axis=1)
        return np.where(ok, 1, -1).astype(np.int8)


@register_concept
@dataclass(frozen=True)
class ConstantLabel(Concept):
    label: int
    d: int
    variant: ClassVar[str] = "ConstantLabel"

    def __post_init__(self):
        if self.label not in (1, -1):
            raise ContractError("ConstantLabel label must be +1 or -1")

    @property
    def dim(self):
        return self.d

    def predict(self, X):
        return np.full(len(X), self.label, dtype=np.int8)


# Hypotheses are drawn from the same three variants.
Hypothesis = Concept


def eval_concept(c: Concept, x) -> int | np.ndarray:
    """Label of a single point (returns ``int``) or of a batch of rows."""
    return c(x)


def disagreement_spherical(u, v) -> float:
    """Pr[sign<u,x> != sign<v,x>] under any spherically symmetric law: angle/pi."""
    u = np.asarray(getattr(u, "w", u), dtype=float)
    v = np.asarray(getattr(v, "w", v), dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ContractError("disagreement_spherical needs non-zero vectors")
    cos = float(np.clip(u @ v / (nu * nv), -1.0, 1.0))
    return math.acos(cos) / math.pi


def rotate_in_plane(w, theta: float, i: int = 0, j: int = 1) -> Halfspace:
    """Rotate ``w`` by ``theta`` radians in the (i, j) coordinate plane."""
    w = np.array(getattr(w, "w", w), dtype=float)
    c, s = math.cos(theta), math.sin(theta)
    wi, wj = w[i], w[j]
    w[i], w[j] = c * wi - s * wj, s * wi + c * wj
    return Halfspace.from_vector(w)


def marginal_from_dict(data) -> MarginalSpec:
    return MarginalSpec.from_dict(data)


def concept_from_dict(data) -> Concept:
    return Concept.from_dict(data)

