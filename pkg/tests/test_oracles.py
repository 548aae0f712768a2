import math

import numpy as np
import pytest

from noisysq import (
    RCN,
    CleanOracle,
    ConfigError,
    ContractError,
    CoordinateCorrelation,
    ErrorIndicator,
    Halfspace,
    HypercubeTable,
    LiteralViolationIndicator,
    Mode,
    OracleStream,
    UniformBall,
    UniformHypercube,
    Conjunction,
    disagreement_spherical,
)
from noisysq.oracles import clean_csq, clean_sq, dump_csv, load_csv, sq_sample_size

F = Halfspace.from_vector([1.0, -1.0, 0.5])


def test_streams_replay():
    a = OracleStream(UniformBall(3), F, RCN(0.2), seed=4).draw(100)
    b = OracleStream(UniformBall(3), F, RCN(0.2), seed=4).draw(100)
    assert all(np.array_equal(u, v) for u, v in zip(a, b))


def test_modes_and_counters():
    o = OracleStream(UniformBall(3), F, RCN(0.2), Mode.EXTENDED, seed=1)
    X, y, eta = o.draw(50)
    assert np.all(eta == 0.2)
    X, y = OracleStream(UniformBall(3), F, mode="Noiseless").draw(50)
    assert np.array_equal(y, F.predict(X))
    for _ in o.batches(1000, chunk=300):
        pass
    assert o.draws_made == 1050


def test_flip_rate():
    o = OracleStream(UniformBall(3), F, RCN(0.3), seed=2)
    X, y = o.draw(200000)
    assert abs(np.mean(y != F.predict(X)) - 0.3) < 4 * math.sqrt(0.21 / 200000)


def test_indexed_hypercube_path_matches_table():
    noise = HypercubeTable(6, seed=1)
    f = Conjunction(frozenset({0}), 6)
    X, y, eta = OracleStream(UniformHypercube(6), f, noise, Mode.EXTENDED, seed=3).draw(1000)
    assert np.array_equal(eta, noise.eta(X))


def test_oracle_config_errors():
    with pytest.raises(ConfigError):
        OracleStream(UniformBall(3), F, None, Mode.NOISY)
    with pytest.raises(ConfigError):
        OracleStream(UniformBall(4), F, RCN(0.1))
    with pytest.raises(ContractError):
        OracleStream(UniformBall(3), F, RCN(0.1)).draw(0)


def test_csv_roundtrip(tmp_path):
    X, y, eta = OracleStream(UniformBall(3), F, RCN(0.1), Mode.EXTENDED, seed=0).draw(20)
    path = tmp_path / "draws.csv"
    dump_csv(path, X, y, eta)
    assert path.read_text().splitlines()[0] == "x0,x1,x2,y,eta"
    X2, y2, eta2 = load_csv(path)
    assert np.array_equal(X, X2) and np.array_equal(y, y2) and np.array_equal(eta, eta2)


def test_clean_sq_accuracy():
    h = Halfspace.from_vector([1.0, 0.0, 0.0])
    truth = 2 * disagreement_spherical(h, F) - 1
    v = clean_sq(ErrorIndicator(h), 0.02, UniformBall(3), F, 0)
    assert abs(v - truth) <= 0.02
    assert sq_sample_size(0.02, 1e-6) == math.ceil(2 * math.log(2e6) / 0.02**2)


def test_clean_csq_rejects_label_dependent_part():
    with pytest.raises(ContractError):
        clean_csq(LiteralViolationIndicator(0), 0.1, UniformBall(3), F, 0)
    v = clean_csq(CoordinateCorrelation(0), 0.05, UniformBall(3), F, 0)
    assert v > 0


def test_clean_oracle_counts():
    o = CleanOracle(UniformBall(3), F, 0, max_draws=1000)
    o(CoordinateCorrelation(0), 0.1)
    o(CoordinateCorrelation(1), 0.1)
    assert o.queries == 2 and o.draws == 2000
    assert o.nominal_draws == 2 * sq_sample_size(0.1, 1e-6)
