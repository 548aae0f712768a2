import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisysq import (
    ConfigError,
    ContractError,
    Conjunction,
    ConstantLabel,
    Halfspace,
    MarginalSpec,
    SeedSpec,
    SphericalGaussian,
    UniformBall,
    UniformHypercube,
    UniformSphere,
    disagreement_spherical,
    rotate_in_plane,
    sample_marginal,
)
from noisysq.domain import Concept, index_from_vertices, vertices_from_index


def test_seed_streams_are_reproducible_and_distinct():
    a = SeedSpec(7).generator().random(5)
    b = SeedSpec(7).generator().random(5)
    c = SeedSpec(7).derive(1).generator().random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert SeedSpec(7).derive(1, 2) == SeedSpec(7).derive(1, 2)


@pytest.mark.parametrize("spec", [UniformBall(4), UniformSphere(4), SphericalGaussian(4), UniformHypercube(4)])
def test_marginal_support(spec):
    X = sample_marginal(spec, 20000, 3)
    r = np.linalg.norm(X, axis=1)
    assert X.shape == (20000, 4)
    if isinstance(spec, UniformBall):
        assert r.max() <= 1.0
        # |x|^d is uniform on [0, 1]
        assert abs(np.mean(r**4) - 0.5) < 0.01
    elif isinstance(spec, UniformSphere):
        assert np.allclose(r, 1.0)
    elif isinstance(spec, SphericalGaussian):
        assert r.max() <= spec.coord_bound
        assert abs(np.mean(r**2) - 4.0) < 0.1
    else:
        assert set(np.unique(X)) == {-1.0, 1.0}


def test_sphere_first_coordinate_mean_abs():
    # E|x_1| on S^4 is Gamma(5/2) / (sqrt(pi) Gamma(3)) = 0.375
    X = sample_marginal(UniformSphere(5), 400000, 0)
    assert abs(np.abs(X[:, 0]).mean() - 0.375) < 0.003


def test_marginal_errors():
    with pytest.raises(ConfigError):
        UniformBall(0)
    with pytest.raises(ConfigError):
        sample_marginal(UniformBall(2), 0, 0)


def test_sign_of_zero_is_positive():
    h = Halfspace((1.0, 0.0))
    assert h(np.array([0.0, 1.0])) == 1
    assert h(np.array([-1e-300, 1.0])) == -1


def test_halfspace_norm_checked():
    with pytest.raises(ContractError):
        Halfspace((1.0, 1.0))
    h = Halfspace.from_vector([3.0, 4.0])
    assert np.allclose(h.w, [0.6, 0.8])


def test_dimension_mismatch():
    with pytest.raises(ContractError):
        Halfspace((1.0, 0.0))(np.zeros((3, 5)))


def test_conjunction_predict_matches_definition():
    c = Conjunction(frozenset({0, 2}), 4)
    X = vertices_from_index(np.arange(16), 4)
    want = np.where((X[:, 0] > 0) & (X[:, 2] > 0), 1, -1)
    assert np.array_equal(c.predict(X), want)
    assert np.all(Conjunction(frozenset(), 4).predict(X) == 1)


def test_vertex_index_roundtrip():
    idx = np.arange(2**10)
    assert np.array_equal(index_from_vertices(vertices_from_index(idx, 10)), idx)


def test_spherical_disagreement_matches_sampling():
    u = Halfspace.from_vector([1, 2, 0, -1])
    v = rotate_in_plane(u, 0.7, 1, 3)
    X = sample_marginal(UniformBall(4), 400000, 1)
    mc = np.mean(u.predict(X) != v.predict(X))
    assert abs(mc - disagreement_spherical(u, v)) < 0.004
    assert disagreement_spherical(Halfspace((1.0, 0.0)), rotate_in_plane((1.0, 0.0), 0.7)) == pytest.approx(0.7 / math.pi)


concepts = st.one_of(
    st.lists(st.floats(-5, 5), min_size=1, max_size=6)
    .filter(lambda v: np.linalg.norm(v) > 1e-3)
    .map(Halfspace.from_vector),
    st.integers(1, 8).flatmap(
        lambda d: st.sets(st.integers(0, d - 1)).map(lambda s: Conjunction(frozenset(s), d))
    ),
    st.tuples(st.sampled_from([-1, 1]), st.integers(1, 5)).map(lambda t: ConstantLabel(*t)),
)


@given(concepts)
def test_concept_json_roundtrip(c):
    back = Concept.from_dict(json.loads(json.dumps(c.to_dict())))
    assert back == c
    assert "variant" in c.to_dict()


@given(st.sampled_from([UniformBall, UniformSphere, SphericalGaussian, UniformHypercube]), st.integers(1, 12))
def test_marginal_json_roundtrip(cls, d):
    m = cls(d)
    assert MarginalSpec.from_dict(json.loads(json.dumps(m.to_dict()))) == m


def test_unknown_variant_rejected():
    with pytest.raises(ConfigError):
        MarginalSpec.from_dict({"variant": "Cube", "d": 3})
    with pytest.raises(ConfigError):
        MarginalSpec.from_dict({"d": 3})


@settings(max_examples=30)
@given(st.integers(2, 6), st.floats(0.0, math.pi), st.integers(0, 2**32))
def test_rotation_preserves_norm_and_angle(d, theta, seed):
    w = np.random.default_rng(seed).standard_normal(d)
    h = rotate_in_plane(w, theta)
    assert abs(np.linalg.norm(h.w) - 1) < 1e-9
    assert disagreement_spherical(h, Halfspace.from_vector(w)) <= theta / math.pi + 1e-9
