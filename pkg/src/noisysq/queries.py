"""Statistical-query functions ``psi(x, y)`` with values in [-1, 1].

Queries are small frozen descriptions rather than closures so that they can
be hashed, serialized and split exactly into a target-independent part and a
correlational part: ``psi(x, y) = ti(x) + y * csq(x)`` for ``y`` in {+1, -1}.

Indicator queries are reported on the [-1, 1] scale (``2 * 1{...} - 1``);
:func:`indicator_from_query_value` maps an answer back to a probability.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .domain import Concept, _registering, _Variant
from .errors import ConfigError


class QuerySpec(_Variant):
    def __call__(self, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Pointwise value ``psi(x, y)``, computed directly from the definition."""
        raise NotImplementedError

    def ti(self, X: np.ndarray) -> np.ndarray:
        """Label-independent part ``(psi(x, 1) + psi(x, -1)) / 2``."""
        raise NotImplementedError

    def csq(self, X: np.ndarray) -> np.ndarray:
        """Correlational part ``(psi(x, 1) - psi(x, -1)) / 2``."""
        raise NotImplementedError

    #: exact constant value of ``ti`` when known symbolically, else None
    ti_constant: ClassVar[float | None] = None
    #: True when ``csq`` is identically zero
    csq_zero: ClassVar[bool] = False

    @property
    def is_correlational(self) -> bool:
        return self.ti_constant == 0.0


register_query = _registering(QuerySpec)


def _concept_field(data, key):
    if isinstance(data.get(key), dict):
        data[key] = Concept.from_dict(data[key])
    return data


def _query_field(data, key):
    if isinstance(data.get(key), dict):
        data[key] = QuerySpec.from_dict(data[key])
    return data


@register_query
@dataclass(frozen=True)
class CoordinateCorrelation(QuerySpec):
    """``psi = (x_i / scale) * y``."""

    index: int
    scale: float = 1.0
    variant: ClassVar[str] = "CoordinateCorrelation"
    ti_constant: ClassVar[float] = 0.0

    def __post_init__(self):
        if self.index < 0 or not self.scale > 0:
            raise ConfigError("CoordinateCorrelation needs index >= 0 and scale > 0")

    def __call__(self, X, y):
        return np.clip(X[:, self.index] / self.scale, -1.0, 1.0) * np.asarray(y, dtype=float)

    def ti(self, X):
        return np.zeros(len(X))

    def csq(self, X):
        return np.clip(X[:, self.index] / self.scale, -1.0, 1.0)


@register_query
@dataclass(frozen=True)
class LiteralViolationIndicator(QuerySpec):
    """Indicator of ``x_i = -1 and y = +1`` on the [-1, 1] scale."""

    index: int
    variant: ClassVar[str] = "LiteralViolationIndicator"

    def __post_init__(self):
        if self.index < 0:
            raise ConfigError("index must be >= 0")

    def __call__(self, X, y):
        hit = (X[:, self.index] < 0) & (np.asarray(y) > 0)
        return 2.0 * hit - 1.0

    def ti(self, X):
        return (X[:, self.index] < 0).astype(float) - 1.0

    def csq(self, X):
        return (X[:, self.index] < 0).astype(float)


@register_query
@dataclass(frozen=True)
class ErrorIndicator(QuerySpec):
    """Indicator of ``h(x) != y`` on the [-1, 1] scale, i.e. ``-h(x) * y``."""

    h: Concept
    variant: ClassVar[str] = "ErrorIndicator"
    ti_constant: ClassVar[float] = 0.0

    @classmethod
    def _from_json(cls, data):
        return cls(**_concept_field(data, "h"))

    def __call__(self, X, y):
        return 2.0 * (self.h.predict(X) != np.asarray(y)) - 1.0

    def ti(self, X):
        return np.zeros(len(X))

    def csq(self, X):
        return -self.h.predict(X).astype(float)


@register_query
@dataclass(frozen=True)
class Constant(QuerySpec):
    c: float
    variant: ClassVar[str] = "Constant"
    csq_zero: ClassVar[bool] = True

    def __post_init__(self):
        if not -1.0 <= self.c <= 1.0:
            raise ConfigError("Constant query value must lie in [-1, 1]")

    def __call__(self, X, y):
        return np.full(len(X), float(self.c))

    @property
    def ti_constant(self):
        return float(self.c)

    def ti(self, X):
        return np.full(len(X), float(self.c))

    def csq(self, X):
        return np.zeros(len(X))


@register_query
@dataclass(frozen=True)
class RadialIndicator(QuerySpec):
    """Target-independent ``1{|x| <= radius}`` on the [-1, 1] scale."""

    radius: float
    variant: ClassVar[str] = "RadialIndicator"
    csq_zero: ClassVar[bool] = True

    def __call__(self, X, y):
        return self.ti(X)

    def ti(self, X):
        inside = np.einsum("ij,ij->i", X, X) <= self.radius**2
        return 2.0 * inside - 1.0

    def csq(self, X):
        return np.zeros(len(X))


@register_query
@dataclass(frozen=True)
class Affine(QuerySpec):
    """``clip(a * first + b * second, -1, 1)``.

    Clipping is not linear, so the split is computed pointwise from the
    two label values rather than from the parts of ``first`` and ``second``.
    """

    a: float
    first: QuerySpec
    b: float
    second: QuerySpec
    variant: ClassVar[str] = "Affine"

    @classmethod
    def _from_json(cls, data):
        return cls(**_query_field(_query_field(data, "first"), "second"))

    def _at(self, X, label):
        y = np.full(len(X), float(label))
        raw = self.a * self.first(X, y) + self.b * self.second(X, y)
        return np.clip(raw, -1.0, 1.0)

    def __call__(self, X, y):
        y = np.asarray(y, dtype=float)
        raw = self.a * self.first(X, y) + self.b * self.second(X, y)
        return np.clip(raw, -1.0, 1.0)

    def ti(self, X):
        return 0.5 * (self._at(X, 1) + self._at(X, -1))

    def csq(self, X):
        return 0.5 * (self._at(X, 1) - self._at(X, -1))

    @property
    def ti_constant(self):
        # exact when neither part can clip and both parts are constant
        c1, c2 = self.first.ti_constant, self.second.ti_constant
        if c1 is None or c2 is None or abs(self.a) + abs(self.b) > 1.0:
            return None
        return self.a * c1 + self.b * c2

    @property
    def csq_zero(self):
        return self.first.csq_zero and self.second.csq_zero


def query_from_dict(data) -> QuerySpec:
    return QuerySpec.from_dict(data)


def indicator_from_query_value(v: float) -> float:
    """Probability encoded by an answer to an indicator query."""
    return (v + 1.0) / 2.0


def query_value_from_indicator(p: float) -> float:
    return 2.0 * p - 1.0


def random_query(rng: np.random.Generator, d: int, depth: int = 0, scale: float = 1.0) -> QuerySpec:
    """A random built-in query over R^d (used by property tests and demos)."""
    from .domain import Conjunction, Halfspace

    kinds = ["coord", "literal", "error", "const", "radial"]
    if depth < 2:
        kinds.append("affine")
    kind = kinds[rng.integers(len(kinds))]
    if kind == "coord":
        return CoordinateCorrelation(int(rng.integers(d)), scale)
    if kind == "literal":
        return LiteralViolationIndicator(int(rng.integers(d)))
    if kind == "error":
        if rng.random() < 0.5:
            return ErrorIndicator(Halfspace.from_vector(rng.standard_normal(d)))
        k = int(rng.integers(0, min(d, 3) + 1))
        lits = frozenset(int(i) for i in rng.choice(d, size=k, replace=False))
        return ErrorIndicator(Conjunction(lits, d))
    if kind == "const":
        return Constant(float(rng.uniform(-1, 1)))
    if kind == "radial":
        return RadialIndicator(float(rng.uniform(0.1, 1.5)) * scale)
    a, b = rng.uniform(-1, 1, size=2)
    return Affine(
        float(a), random_query(rng, d, depth + 1, scale), float(b), random_query(rng, d, depth + 1, scale)
    )
