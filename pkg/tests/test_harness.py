import csv
import json

import numpy as np
import pytest

from noisysq import ConfigError, Experiment, ExperimentConfig, UniformBall, default_config, run
from noisysq.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, main
from noisysq.harness import beta_clean_demo, calibration_sweep, identity_case, random_identity_case


def small_csq_config(out=None):
    return ExperimentConfig.from_dict({
        "experiment": "CsqReduction",
        "marginal": {"variant": "UniformBall", "d": 2},
        "concept": {"variant": "Halfspace", "weights": [0.6, 0.8]},
        "noise": {"variant": "RCN", "gamma": 0.2},
        "eps": 0.2,
        "seeds": [0, 1],
        "output_path": out,
        "params": {"eval_draws": 20000},
    })


def strip_wall(obj):
    if isinstance(obj, dict):
        return {k: strip_wall(v) for k, v in obj.items() if k != "wall_ms"}
    if isinstance(obj, list):
        return [strip_wall(v) for v in obj]
    return obj


def test_magnitude_experiment_on_rcn():
    res = run(default_config("Magnitude"))
    assert res.aggregate["magnitude_hat"] == pytest.approx(2.0)
    assert res.passed


def test_config_validation_messages():
    with pytest.raises(ConfigError, match="experiment"):
        ExperimentConfig.from_dict({"experiment": "Bogus"})
    with pytest.raises(ConfigError, match="eps"):
        ExperimentConfig.from_dict({"experiment": "Magnitude", "eps": 1.5})
    with pytest.raises(ConfigError, match="C"):
        ExperimentConfig.from_dict({"experiment": "Magnitude", "C": 0.5})
    with pytest.raises(ConfigError, match="unknown config fields"):
        ExperimentConfig.from_dict({"experiment": "Magnitude", "colour": 1})
    with pytest.raises(ConfigError, match="concept: required"):
        ExperimentConfig(Experiment.CSQ, UniformBall(2))


def test_config_json_roundtrip():
    cfg = small_csq_config()
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again.to_dict() == cfg.to_dict()


def test_replay_and_sample_audit(tmp_path):
    a = run(small_csq_config(str(tmp_path / "a")))
    b = run(small_csq_config(str(tmp_path / "b")))
    ja = json.loads((tmp_path / "a" / "csq-run.json").read_text())
    jb = json.loads((tmp_path / "b" / "csq-run.json").read_text())
    assert strip_wall(ja)["records"] == strip_wall(jb)["records"]
    assert strip_wall(ja)["aggregate"] == strip_wall(jb)["aggregate"]
    # every draw is accounted for: simulation + candidate evaluation + final evaluation
    for r in a.records:
        n_eval_each = (r["samples_total"] - r["simulation_draws"] - 20000) / r["n_candidates"]
        assert n_eval_each == int(n_eval_each) and n_eval_each > 0
    assert a.aggregate["samples_total"] == sum(r["samples_total"] for r in a.records)
    assert b.passed


def test_csv_agrees_with_json(tmp_path):
    run(small_csq_config(str(tmp_path)))
    doc = json.loads((tmp_path / "csq-run.json").read_text())
    with open(tmp_path / "csq-run.csv") as fh:
        rows = list(csv.DictReader(fh))
    for rec, row in zip(doc["records"], rows):
        for key, val in rec.items():
            if isinstance(val, bool):
                assert row[key] == str(val)
            elif isinstance(val, float):
                assert float(row[key]) == val
            else:
                assert row[key] == str(val)
    with open(tmp_path / "csq-run_candidates_seed0.csv") as fh:
        assert next(csv.reader(fh)) == ["z_tilde", "empirical_error", "samples_used"]


def test_excess_is_err_minus_opt():
    res = run(small_csq_config())
    for r in res.records:
        assert r["excess"] == pytest.approx(r["err_hat"] - r["opt_hat"], abs=1e-15)
    assert 0.0 <= res.aggregate["success_fraction"] <= 1.0


def test_beta_clean_without_noise_outside_caps():
    rep = beta_clean_demo(0.5, [0.5], 200000, 0)
    row = rep["rows"][0]
    assert row["err_target"] == 0.0
    assert row["excess"] == pytest.approx(row["disagreement"])


def test_beta_clean_rejects_unsorted_rho():
    with pytest.raises(ConfigError):
        beta_clean_demo(0.5, [0.01, 0.1], 1000, 0)


def test_verify_zero_noise_has_unit_normaliser():
    cfg = ExperimentConfig.from_dict({
        "experiment": "VerifyIdentities",
        "marginal": {"variant": "UniformBall", "d": 3},
        "noise": {"variant": "RCN", "gamma": 0.0},
        "params": {"n": 20000, "n_configs": 3, "n_triples": 1000},
    })
    res = run(cfg)
    assert res.passed
    assert all(r["z_hat"] == 1.0 for r in res.records)


def test_verify_detects_biased_flip_rates():
    cfg = ExperimentConfig.from_dict({
        "experiment": "VerifyIdentities",
        "params": {"n": 10**6, "n_configs": 4, "n_triples": 1000, "eta_bias": 0.01},
    })
    res = run(cfg)
    assert not res.aggregate["correlation_identity_pass"]


def test_calibration_sweep_behaviour():
    cfg = ExperimentConfig(Experiment.CALIBRATION, UniformBall(5), seeds=[0, 1, 2], params={"max_draws": 20000})
    rows = calibration_sweep([1e-4, 0.1, 10.0], [1, 5], cfg)["rows"]
    get = {(r["kappa"], r["d"]): r for r in rows}
    assert get[(10.0, 5)]["success_fraction"] < 0.5
    assert get[(10.0, 1)]["success_fraction"] == 1.0
    assert get[(1e-4, 5)]["success_fraction"] == 1.0
    # cost grows like 1 / tau^2
    ratio = get[(1e-4, 5)]["nominal_draws"] / get[(0.1, 5)]["nominal_draws"]
    assert ratio == pytest.approx((0.1 / 1e-4) ** 2, rel=1e-3)


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["magnitude"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert set(out) == {"estimate", "std_error", "analytic_bound", "samples_used"}
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"eps": 2.0}))
    assert main(["magnitude", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["magnitude", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    mismatch = tmp_path / "mismatch.json"
    mismatch.write_text(json.dumps({"experiment": "CsqReduction"}))
    assert main(["magnitude", "--config", str(mismatch)]) == EXIT_CONFIG
    biased = tmp_path / "biased.json"
    biased.write_text(json.dumps({"params": {"n": 10**6, "n_configs": 2, "n_triples": 100, "eta_bias": 0.05}}))
    assert main(["verify", "--config", str(biased), "--out", str(tmp_path / "o")]) == EXIT_FAILED
    assert (tmp_path / "o" / "verify.json").exists()


def test_cli_seed_override(tmp_path, capsys):
    cfg = tmp_path / "m.json"
    cfg.write_text(json.dumps({"noise": {"variant": "RCN", "gamma": 0.1}, "seeds": [1, 2, 3], "params": {"n": 1000}}))
    assert main(["magnitude", "--config", str(cfg), "--seed", "9", "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "magnitude.json").read_text())
    assert [r["seed"] for r in doc["records"]] == [9]
    assert doc["aggregate"]["magnitude_hat"] == pytest.approx(1.25)


def test_identity_sigmas_stay_small_with_integer_valued_phi():
    # phi returns int8 labels; squared sums must not overflow
    rng = np.random.default_rng(11)
    for k in range(4):
        row = identity_case(random_identity_case(rng), 2 * 10**5, k)
        assert row["sigma_corr"] < 5 and row["sigma_error"] < 5
