"""Experiment configs, runners and result emission.

An :class:`ExperimentConfig` names one experiment plus the instance it runs
on; :func:`run` dispatches it and returns an :class:`ExperimentResult` whose
records are written as JSON and CSV when ``output_path`` is set.  Every
random quantity is drawn from ``as_seed(seed).derive(...)`` streams, so a
config file replays to the same JSON apart from ``wall_ms``.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .domain import (
    Concept,
    Conjunction,
    Halfspace,
    MarginalSpec,
    as_seed,
    SphericalGaussian,
    UniformBall,
    UniformHypercube,
    UniformSphere,
    disagreement_spherical,
    rotate_in_plane,
    vertices_from_index,
)
from .errors import ConfigError
from .learners import DEFAULT_KAPPA, ConjunctionLearner, HalfspaceLearner
from .noise import (
    ETA_CEILING,
    RCN,
    HypercubeTable,
    MassartRadial,
    NoiseSpec,
    RadialTsybakov,
    build_beta_clean_2d,
    estimate_magnitude,
    realizable_translation,
    tsybakov_translation_objective,
)
from .oracles import CleanOracle, Mode, OracleStream
from .queries import ErrorIndicator, random_query
from .reductions import DrawLog, run_csq_reduction, run_sq_reduction, simulate_sq_rcn


class Experiment(str, Enum):
    MAGNITUDE = "Magnitude"
    VERIFY = "VerifyIdentities"
    CSQ = "CsqReduction"
    SQ = "SqReduction"
    RCN = "RcnBaseline"
    BETA_CLEAN = "BetaCleanDemo"
    TRANSLATION = "RealizableTranslation"
    CALIBRATION = "CalibrationSweep"


#: CLI subcommand for each experiment; also the stem of its output files
SUBCOMMANDS = {
    "magnitude": Experiment.MAGNITUDE,
    "verify": Experiment.VERIFY,
    "csq-run": Experiment.CSQ,
    "sq-run": Experiment.SQ,
    "rcn-baseline": Experiment.RCN,
    "beta-clean": Experiment.BETA_CLEAN,
    "translate": Experiment.TRANSLATION,
    "calibrate": Experiment.CALIBRATION,
}
SLUGS = {exp: name for name, exp in SUBCOMMANDS.items()}

# instance fields each experiment cannot run without
_REQUIRED = {
    Experiment.MAGNITUDE: ("marginal", "noise"),
    Experiment.CSQ: ("marginal", "concept", "noise"),
    Experiment.SQ: ("marginal", "concept", "noise"),
    Experiment.RCN: ("marginal", "concept", "noise"),
    Experiment.TRANSLATION: ("marginal", "concept", "noise"),
    Experiment.CALIBRATION: ("marginal",),
}


@dataclass
class ExperimentConfig:
    experiment: Experiment
    marginal: MarginalSpec | None = None
    concept: Concept | None = None
    noise: NoiseSpec | None = None
    eps: float = 0.1
    delta: float = 0.1
    C: float | None = None
    seeds: list = field(default_factory=lambda: [0])
    output_path: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        try:
            self.experiment = Experiment(self.experiment)
        except ValueError:
            raise ConfigError(
                f"experiment: unknown name {self.experiment!r}; expected one of {[e.value for e in Experiment]}"
            ) from None
        self.seeds = [int(s) for s in self.seeds]
        self.validate()

    def validate(self):
        if not 0.0 < self.eps < 1.0:
            raise ConfigError(f"eps: must lie in (0, 1), got {self.eps}")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"delta: must lie in (0, 1), got {self.delta}")
        if self.C is not None and not self.C >= 1.0:
            raise ConfigError(f"C: must be >= 1, got {self.C}")
        if not self.seeds:
            raise ConfigError("seeds: need at least one seed")
        for name in _REQUIRED.get(self.experiment, ()):
            if getattr(self, name) is None:
                raise ConfigError(f"{name}: required for {self.experiment.value}")
        if self.concept is not None and self.marginal is not None and self.concept.dim != self.marginal.d:
            raise ConfigError(
                f"concept: dimension {self.concept.dim} does not match marginal dimension {self.marginal.d}"
            )

    def magnitude_bound(self) -> float:
        """``C`` as given, else the noise's analytic magnitude bound."""
        if self.C is not None:
            return float(self.C)
        bound = self.noise.magnitude_bound() if self.noise is not None else None
        if bound is None:
            raise ConfigError("C: not given and the noise has no analytic magnitude bound")
        return float(bound)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment.value,
            "marginal": self.marginal.to_dict() if self.marginal else None,
            "concept": self.concept.to_dict() if self.concept else None,
            "noise": self.noise.to_dict() if self.noise else None,
            "eps": self.eps,
            "delta": self.delta,
            "C": self.C,
            "seeds": list(self.seeds),
            "output_path": self.output_path,
            "params": dict(self.params),
        }

    @classmethod
    def from_dict(cls, data: dict, experiment: Experiment | str | None = None) -> "ExperimentConfig":
        """Build a config, filling unspecified fields from :func:`default_config`."""
        data = dict(data)
        name = data.get("experiment", experiment)
        if name is None:
            raise ConfigError("experiment: missing")
        if experiment is not None and Experiment(experiment).value != name:
            raise ConfigError(f"experiment: config names {name!r} but {Experiment(experiment).value!r} was requested")
        try:
            base = default_config(Experiment(name)).to_dict()
        except ValueError:
            raise ConfigError(f"experiment: unknown name {name!r}") from None
        unknown = set(data) - set(base)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        params = {**base["params"], **data.pop("params", {})}
        base.update(data)
        base["params"] = params
        return cls(
            experiment=base["experiment"],
            marginal=MarginalSpec.from_dict(base["marginal"]) if base["marginal"] else None,
            concept=Concept.from_dict(base["concept"]) if base["concept"] else None,
            noise=NoiseSpec.from_dict(base["noise"]) if base["noise"] else None,
            eps=float(base["eps"]),
            delta=float(base["delta"]),
            C=None if base["C"] is None else float(base["C"]),
            seeds=base["seeds"],
            output_path=base["output_path"],
            params=base["params"],
        )

    @classmethod
    def load(cls, path, experiment=None) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data, experiment)


DEFAULT_TARGET = (0.6, -0.3, 0.5, 0.2, -0.5)


def default_config(experiment: Experiment | str) -> ExperimentConfig:
    """The desk-scale instance each experiment runs on when nothing else is given."""
    exp = Experiment(experiment)
    ball5 = UniformBall(5)
    target5 = Halfspace.from_vector(DEFAULT_TARGET)
    tsyb = RadialTsybakov(0.5, 1.0, 0.4, 5)
    if exp is Experiment.MAGNITUDE:
        return ExperimentConfig(exp, ball5, target5, RCN(0.25), params={"n": 10**6})
    if exp is Experiment.VERIFY:
        return ExperimentConfig(exp, params={"n": 10**7, "n_configs": 20, "n_triples": 10**5, "eta_bias": 0.0})
    if exp is Experiment.CSQ:
        return ExperimentConfig(
            exp, ball5, target5, tsyb, seeds=list(range(10)),
            params={"kappa": DEFAULT_KAPPA, "eval_draws": 10**6, "max_draws": None},
        )
    if exp is Experiment.SQ:
        return ExperimentConfig(
            exp,
            UniformHypercube(20),
            Conjunction(frozenset({3, 7, 12}), 20),
            HypercubeTable(20, seed=2024, low=0.0, high=0.45),
            seeds=list(range(10)),
            params={"kappa": DEFAULT_KAPPA, "eval_draws": 10**6, "max_draws": 3 * 10**6, "cross_check": False},
        )
    if exp is Experiment.RCN:
        return ExperimentConfig(
            exp, ball5, target5, RCN(0.4), delta=0.05,
            params={"tau": 0.05, "trials": 200, "gammas": [0.1, 0.4]},
        )
    if exp is Experiment.BETA_CLEAN:
        return ExperimentConfig(exp, params={"beta": 0.5, "rho_list": [0.1, 0.01, 0.001], "n": 10**6})
    if exp is Experiment.TRANSLATION:
        return ExperimentConfig(
            exp, ball5, target5, MassartRadial((0.0, 0.5, 1.0), (0.25, 0.2, 0.1)),
            params={
                "eps_prime": 0.1,
                "n": 10**6,
                "tsybakov_params": [[0.5, 1.0, 0.5], [0.5, 1.0, 0.4], [0.3, 0.5, 0.3], [0.7, 2.0, 0.2], [0.5, 1.0, 0.02]],
                "grid_points": 10**5,
            },
        )
    return ExperimentConfig(
        exp, ball5, seeds=list(range(10)),
        params={"kappa_list": [1e-4, 0.01, 0.1, 1.0, 10.0], "d_list": [1, 2, 5, 10], "max_draws": 10**5},
    )


@dataclass
class ExperimentResult:
    experiment: str
    config: dict
    records: list
    aggregate: dict
    passed: bool
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _plain({
            "experiment": self.experiment,
            "config": self.config,
            "records": self.records,
            "aggregate": self.aggregate,
            "passed": self.passed,
            "extras": self.extras,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, out_dir, stem: str) -> tuple[str, str]:
        """Write ``<stem>.json`` and ``<stem>.csv`` (one row per record)."""
        os.makedirs(out_dir, exist_ok=True)
        jpath = os.path.join(out_dir, stem + ".json")
        cpath = os.path.join(out_dir, stem + ".csv")
        with open(jpath, "w") as fh:
            fh.write(self.to_json() + "\n")
        write_rows(cpath, self.records)
        return jpath, cpath


def write_rows(path, rows: list[dict]):
    cols = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow(["" if r.get(c) is None else _cell(r.get(c)) for c in cols])


def _plain(v):
    """Numpy scalars and containers to plain JSON-ready Python values."""
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def _cell(v):
    v = _plain(v)
    if isinstance(v, float):
        return repr(v)
    return v


# --------------------------------------------------------------------------
# evaluation


def evaluate_hypothesis(h, marginal, concept, noise, n, seed) -> dict:
    """Bayes error, error of ``h`` and excess on the noisy distribution.

    Uses ``Pr[h(x) != y | x] = eta(x) + (1 - 2 eta(x)) 1{h(x) != f(x)}`` on
    ``n`` draws of ``(x, eta(x))`` (paired, so the excess has low variance).
    The uniform hypercube with ``d <= 20`` is enumerated exactly instead.
    """
    if isinstance(marginal, UniformHypercube) and marginal.d <= 20:
        X = vertices_from_index(np.arange(2**marginal.d, dtype=np.int64), marginal.d)
        eta = noise.eta(X)
        gap = (1.0 - 2.0 * eta) * (h.predict(X) != concept.predict(X))
        opt, ex = float(eta.mean()), float(gap.mean())
        return {"opt_hat": opt, "err_hat": opt + ex, "excess": ex, "excess_se": 0.0, "draws": 0}
    oracle = OracleStream(marginal, concept, noise, Mode.EXTENDED, seed)
    s_eta = s_gap = s_gap2 = 0.0
    for X, _, eta in oracle.batches(n):
        gap = (1.0 - 2.0 * eta) * (h.predict(X) != concept.predict(X))
        s_eta += eta.sum()
        s_gap += gap.sum()
        s_gap2 += np.dot(gap, gap)
    opt, ex = s_eta / n, s_gap / n
    se = math.sqrt(max(s_gap2 / n - ex * ex, 0.0) / n)
    return {"opt_hat": float(opt), "err_hat": float(opt + ex), "excess": float(ex), "excess_se": se,
            "draws": oracle.draws_made}


def _learner_for(config: ExperimentConfig):
    if isinstance(config.concept, Conjunction):
        return ConjunctionLearner(config.marginal.d, config.eps)
    return HalfspaceLearner(
        config.marginal.d, config.eps, config.params.get("kappa", DEFAULT_KAPPA), config.marginal.coord_bound
    )


def _aggregate_runs(records, eps) -> dict:
    excess = [r["excess"] for r in records]
    return {
        "success_fraction": float(np.mean([r["success"] for r in records])),
        "mean_excess": float(np.mean(excess)),
        "max_excess": float(np.max(excess)),
        "samples_total": int(sum(r["samples_total"] for r in records)),
        "eps": eps,
    }


# --------------------------------------------------------------------------
# experiments


def _magnitude(config):
    records = []
    for s in config.seeds:
        t = time.perf_counter()
        rep = estimate_magnitude(config.noise, config.marginal, int(config.params["n"]), as_seed(s))
        records.append({
            "seed": s,
            "magnitude_hat": rep.estimate,
            "std_error": rep.std_error,
            "analytic_bound": rep.analytic_bound,
            "samples_total": rep.samples_used,
            "wall_ms": _ms(t),
        })
    bound = records[0]["analytic_bound"]
    mags = [r["magnitude_hat"] for r in records]
    passed = bound is None or all(m <= bound * 1.02 for m in mags)
    agg = {"magnitude_hat": float(np.mean(mags)), "analytic_bound": bound,
           "samples_total": sum(r["samples_total"] for r in records)}
    return records, agg, passed, {}


def _reduction(config, route):
    C = config.magnitude_bound()
    max_draws = config.params.get("max_draws")
    n_eval = int(config.params["eval_draws"])
    records, ledgers = [], {}
    for s in config.seeds:
        t = time.perf_counter()
        root = as_seed(s)
        learner = _learner_for(config)
        log = DrawLog()
        row = {"seed": s}
        if route == "csq":
            oracle = OracleStream(config.marginal, config.concept, config.noise, Mode.NOISY, root.derive(0))
            h, cands = run_csq_reduction(learner, oracle, config.eps, config.delta, C, max_draws=max_draws, log=log)
            ledgers[s] = [c.row() for c in cands]
            row["n_candidates"] = len(cands)
            row["z_tilde"] = next(c.z_tilde for c in cands if c.hypothesis is h)
        else:
            oracle = OracleStream(config.marginal, config.concept, config.noise, Mode.EXTENDED, root.derive(0))
            h = run_sq_reduction(learner, oracle, config.eps, config.delta, C, max_draws=max_draws, log=log)
        ev = evaluate_hypothesis(h, config.marginal, config.concept, config.noise, n_eval, root.derive(1))
        draws = oracle.draws_made + ev["draws"]
        row.update({
            "opt_hat": ev["opt_hat"],
            "err_hat": ev["err_hat"],
            "excess": ev["err_hat"] - ev["opt_hat"],
            "excess_se": ev["excess_se"],
            "magnitude_bound": C,
            "success": bool(ev["err_hat"] - ev["opt_hat"] <= config.eps),
            "simulation_draws": log.used,
            "nominal_draws": log.nominal,
            "samples_total": draws,
        })
        if route == "sq" and config.params.get("cross_check"):
            alt = OracleStream(config.marginal, config.concept, config.noise, Mode.NOISY, root.derive(2))
            h2, _ = run_csq_reduction(learner, alt, config.eps, config.delta, C)
            ev2 = evaluate_hypothesis(h2, config.marginal, config.concept, config.noise, n_eval, root.derive(1))
            row["csq_excess"] = ev2["excess"]
            row["path_gap"] = abs(row["excess"] - ev2["excess"])
            row["samples_total"] += alt.draws_made + ev2["draws"]
        row["wall_ms"] = _ms(t)
        records.append(row)
    agg = _aggregate_runs(records, config.eps)
    passed = agg["success_fraction"] >= 0.9
    if route == "sq" and config.params.get("cross_check"):
        agg["max_path_gap"] = max(r["path_gap"] for r in records)
        passed = passed and agg["max_path_gap"] <= 0.05
    return records, agg, passed, {"candidate_ledgers": ledgers} if ledgers else {}


def _rcn_baseline(config):
    """Constant-rate simulation with a known flip rate, checked against exact values."""
    gamma = config.noise.gamma if isinstance(config.noise, RCN) else None
    if gamma is None:
        raise ConfigError("noise: RcnBaseline needs RCN noise")
    tau = float(config.params["tau"])
    trials = int(config.params["trials"])
    if not (config.marginal.spherical and isinstance(config.concept, Halfspace)):
        raise ConfigError("marginal: RcnBaseline compares against exact values, which need a spherical marginal "
                          "and a halfspace target")
    records = []
    for s in config.seeds:
        root = as_seed(s)
        rng = root.derive(0).generator()
        t = time.perf_counter()
        hits, draws = 0, 0
        devs = []
        for k in range(trials):
            h = Halfspace.from_vector(rng.standard_normal(config.marginal.d))
            truth = 2.0 * disagreement_spherical(h, config.concept) - 1.0
            oracle = OracleStream(config.marginal, config.concept, config.noise, Mode.NOISY, root.derive(1, k))
            v = simulate_sq_rcn(ErrorIndicator(h), tau, gamma, config.delta, oracle)
            devs.append(abs(v - truth))
            hits += abs(v - truth) <= tau
            draws += oracle.draws_made
        records.append({
            "seed": s,
            "gamma": gamma,
            "tau": tau,
            "trials": trials,
            "within_tau_fraction": hits / trials,
            "max_deviation": float(max(devs)),
            "draws_per_query": draws // trials,
            "samples_total": draws,
            "wall_ms": _ms(t),
        })
    # draw-count scaling across flip rates, measured on live oracles
    scaling = []
    for g in config.params.get("gammas", []):
        oracle = OracleStream(config.marginal, config.concept, RCN(g), Mode.NOISY, as_seed(config.seeds[0]).derive(2))
        simulate_sq_rcn(ErrorIndicator(config.concept), tau, g, config.delta, oracle)
        scaling.append({"gamma": g, "draws": oracle.draws_made, "predicted_factor": 1.0 / ((1 - 2 * g) ** 2 * tau**2)})
    agg = {"within_tau_fraction": float(np.mean([r["within_tau_fraction"] for r in records])),
           "samples_total": sum(r["samples_total"] for r in records) + sum(x["draws"] for x in scaling)}
    passed = agg["within_tau_fraction"] >= 0.95
    if len(scaling) >= 2:
        lo, hi = scaling[0], scaling[-1]
        ratio = (hi["draws"] / lo["draws"]) / (hi["predicted_factor"] / lo["predicted_factor"])
        agg["scaling_ratio"] = ratio
        passed = passed and 0.5 <= ratio <= 2.0
    return records, agg, passed, {"scaling": scaling}


def beta_clean_demo(beta: float, rho_list, n: int, seed) -> dict:
    """Excess error and realizable disagreement of the rotated competitor, per noise level.

    The competitor is correct on every clean point, so its excess comes only
    from the noisy region, where each disagreement costs ``2 rho``.
    """
    rho_list = [float(r) for r in rho_list]
    if not rho_list or any(not 0.0 < r <= 0.5 for r in rho_list):
        raise ConfigError("rho_list: values must lie in (0, 1/2]")
    if any(b > a for a, b in zip(rho_list, rho_list[1:])):
        raise ConfigError("rho_list: values must be in descending order")
    rows = []
    draws = 0
    for k, rho in enumerate(rho_list):
        inst = build_beta_clean_2d(beta, rho)
        oracle = OracleStream(inst.marginal, inst.concept, inst.noise, Mode.EXTENDED, as_seed(seed).derive(k))
        s_opt = s_gap = s_gap2 = s_dis = s_w = 0.0
        for X, _, eta in oracle.batches(n):
            dis = inst.competitor.predict(X) != inst.concept.predict(X)
            w = 1.0 - 2.0 * eta
            gap = w * dis
            s_opt += eta.sum()
            s_gap += gap.sum()
            s_gap2 += np.dot(gap, gap)
            s_dis += dis.sum()
            s_w += w.sum()
        draws += oracle.draws_made
        ex = s_gap / n
        p = s_dis / n
        rows.append({
            "beta": beta,
            "rho": rho,
            "err_target": s_opt / n,
            "err_competitor": (s_opt + s_gap) / n,
            "excess": ex,
            "excess_se": math.sqrt(max(s_gap2 / n - ex * ex, 0.0) / n),
            "excess_bound": 2.0 * rho * (1.0 - beta),
            "disagreement": p,
            "disagreement_se": math.sqrt(p * (1 - p) / n),
            "magnitude_hat": n / s_w,
            "magnitude_bound": 1.0 / beta,
            "samples_total": oracle.draws_made,
        })
    return {"rows": rows, "samples_total": draws}


def _beta_clean(config):
    p = config.params
    beta = float(p["beta"])
    t = time.perf_counter()
    rep = beta_clean_demo(beta, p["rho_list"], int(p["n"]), config.seeds[0])
    rows = rep["rows"]
    ex = [r["excess"] for r in rows]
    checks = {
        "monotone": all(b < a for a, b in zip(ex, ex[1:])),
        "excess_within_bound": all(r["excess"] <= r["excess_bound"] + 3 * r["excess_se"] for r in rows),
        "disagreement_floor": all(r["disagreement"] >= beta / 4 for r in rows),
        "magnitude_within_bound": all(r["magnitude_hat"] <= r["magnitude_bound"] * 1.02 for r in rows),
    }
    agg = {**checks, "samples_total": rep["samples_total"], "wall_ms": _ms(t)}
    return rows, agg, all(checks.values()), {}


def massart_translation_check(marginal, concept, noise, eps_prime, n, seed, *, iters=50) -> dict:
    """Rotate the target until its excess error reaches ``eps' (1 - 2 gamma)``; measure disagreement.

    Rotating further only enlarges the disagreement region, so the excess is
    monotone in the angle and the largest admissible angle is found by
    bisection on one sample.  The disagreement is measured on another.
    """
    gamma = float(noise.gamma)
    eps = realizable_translation("Massart", {"gamma": gamma}, eps_prime)
    root = as_seed(seed)
    sel = OracleStream(marginal, concept, noise, Mode.EXTENDED, root.derive(0))
    X, _, eta = sel.draw(n)
    fX = concept.predict(X)
    w = 1.0 - 2.0 * eta

    def excess_at(theta):
        return float(np.mean(w * (rotate_in_plane(concept, theta).predict(X) != fX)))

    lo, hi = 0.0, math.pi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if excess_at(mid) <= eps:
            lo = mid
        else:
            hi = mid
    best = lo
    h = rotate_in_plane(concept, best)
    chk = OracleStream(marginal, concept, noise, Mode.EXTENDED, root.derive(1))
    X2, _, eta2 = chk.draw(n)
    dis = h.predict(X2) != concept.predict(X2)
    excess = float(np.mean((1.0 - 2.0 * eta2) * dis))
    p = float(dis.mean())
    se = math.sqrt(p * (1 - p) / n)
    return {
        "gamma": gamma,
        "eps_prime": eps_prime,
        "eps": eps,
        "theta": best,
        "excess": excess,
        "disagreement": p,
        "disagreement_se": se,
        "passed": bool(p <= eps_prime + 3 * se),
        "samples_total": sel.draws_made + chk.draws_made,
    }


def tsybakov_translation_check(alpha, A, t0, eps_prime, grid_points) -> dict:
    """Closed-form Tsybakov translation against a brute-force grid maximum over ``[0, t0]``."""
    closed = realizable_translation("Tsybakov", {"alpha": alpha, "A": A, "t0": t0}, eps_prime)
    t = np.linspace(0.0, t0, int(grid_points))
    grid = float(np.max(tsybakov_translation_objective(t, eps_prime, alpha, A)))
    return {"alpha": alpha, "A": A, "t0": t0, "eps_prime": eps_prime, "closed_form": closed,
            "grid_max": grid, "abs_diff": abs(closed - grid), "passed": bool(abs(closed - grid) <= 1e-6)}


def _translation(config):
    p = config.params
    if not hasattr(config.noise, "gamma"):
        raise ConfigError("noise: RealizableTranslation needs Massart-type noise (RCN or MassartRadial)")
    if not isinstance(config.concept, Halfspace) or config.marginal.d < 2:
        raise ConfigError("concept: RealizableTranslation rotates a halfspace target in d >= 2")
    records = []
    for s in config.seeds:
        t = time.perf_counter()
        row = massart_translation_check(
            config.marginal, config.concept, config.noise, float(p["eps_prime"]), int(p["n"]), s
        )
        records.append({"kind": "Massart", "seed": s, **row, "wall_ms": _ms(t)})
    for alpha, A, t0 in p["tsybakov_params"]:
        row = tsybakov_translation_check(alpha, A, t0, float(p["eps_prime"]), p["grid_points"])
        records.append({"kind": "Tsybakov", **row})
    agg = {"all_passed": all(r["passed"] for r in records),
           "samples_total": sum(r.get("samples_total", 0) for r in records)}
    return records, agg, agg["all_passed"], {}


def calibration_sweep(kappa_list, d_list, config: ExperimentConfig) -> dict:
    """Success rate of the clean averaging learner over a grid of (kappa, d).

    Success means clean error ``<= eps``; ``nominal_draws`` is what the
    Hoeffding-sized clean oracle asks for, ``draws`` what ``max_draws`` let
    it use.  The recommendation is the largest kappa that succeeds in at
    least 90% of runs for every d.
    """
    if not kappa_list or not d_list:
        raise ConfigError("kappa_list and d_list must be non-empty")
    family = type(config.marginal)
    max_draws = config.params.get("max_draws")
    rows = []
    for kappa in kappa_list:
        for d in d_list:
            marginal = family(int(d))
            wins, nominal, used = 0, 0, 0
            for s in config.seeds:
                root = as_seed(s)
                target = Halfspace.from_vector(root.derive(0).generator().standard_normal(d))
                provider = CleanOracle(marginal, target, root.derive(1), max_draws=max_draws)
                h = HalfspaceLearner(d, config.eps, kappa, marginal.coord_bound)(provider)
                err = disagreement_spherical(h, target) if isinstance(h, Halfspace) else 0.5
                wins += err <= config.eps
                nominal += provider.nominal_draws
                used += provider.draws
            runs = len(config.seeds)
            rows.append({
                "kappa": float(kappa),
                "d": int(d),
                "tau": HalfspaceLearner(d, config.eps, kappa).budget.tau,
                "success_fraction": wins / runs,
                "nominal_draws": nominal // runs,
                "draws": used // runs,
                "samples_total": used,
            })
    good = [k for k in kappa_list if all(r["success_fraction"] >= 0.9 for r in rows if r["kappa"] == float(k))]
    return {"rows": rows, "recommended_kappa": max(good) if good else None}


def _calibration(config):
    t = time.perf_counter()
    p = config.params
    rep = calibration_sweep(p["kappa_list"], p["d_list"], config)
    agg = {"recommended_kappa": rep["recommended_kappa"],
           "samples_total": sum(r["samples_total"] for r in rep["rows"]), "wall_ms": _ms(t)}
    return rep["rows"], agg, rep["recommended_kappa"] is not None, {}


# --------------------------------------------------------------------------
# identity suites


def decomposition_suite(n_triples: int, seed) -> dict:
    """Max ``|psi(x, y) - (ti(x) + y csq(x))|`` over random queries, points and labels."""
    rng = as_seed(seed).generator()
    per_query = 100
    worst = 0.0
    done = 0
    while done < n_triples:
        m = min(per_query, n_triples - done)
        d = int(rng.integers(2, 9))
        q = random_query(rng, d, scale=2.0)
        X = rng.standard_normal((m, d)) * rng.uniform(0.2, 2.0)
        X[: m // 4] = np.where(rng.random((m // 4, d)) < 0.5, -1.0, 1.0)
        y = np.where(rng.random(m) < 0.5, -1, 1).astype(np.int8)
        dev = np.abs(q(X, y) - (q.ti(X) + y * q.csq(X)))
        worst = max(worst, float(dev.max()))
        done += m
    return {"n_triples": int(n_triples), "max_abs_deviation": worst, "passed": worst <= 1e-12}


def random_identity_case(rng: np.random.Generator) -> dict:
    """A random (marginal, target, noise, phi, h) combination for the identity suites."""
    kind = int(rng.integers(5))
    d = int(rng.integers(2, 8))
    if kind == 0:
        marginal = UniformBall(d)
        noise = RCN(float(rng.uniform(0.0, 0.45)))
    elif kind == 1:
        marginal = SphericalGaussian(d)
        r = math.sqrt(d)
        hi, lo = sorted(rng.uniform(0.0, 0.45, size=2))[::-1]
        noise = MassartRadial((0.0, r, 2 * r), (float(lo), float(hi), float(hi)))
    elif kind == 2:
        marginal = UniformBall(d)
        alpha = float(rng.uniform(0.2, 0.8))
        t0 = float(rng.uniform(0.05, 0.5))
        A = float(rng.uniform(0.1, 1.0) * t0 ** (-alpha / (1 - alpha)))
        noise = RadialTsybakov(alpha, min(A, t0 ** (-alpha / (1 - alpha))), t0, d)
    elif kind == 3:
        inst = build_beta_clean_2d(float(rng.uniform(0.1, 0.9)), float(rng.uniform(0.01, 0.5)))
        marginal, noise = inst.marginal, inst.noise
        d = 2
    else:
        marginal = UniformSphere(d)
        noise = MassartRadial((0.0,), (float(rng.uniform(0.0, 0.45)),))
    target = Halfspace.from_vector(rng.standard_normal(d))
    # phi: sign of a nearby halfspace, so E[phi f] is far from zero
    near = Halfspace.from_vector(target.w + rng.uniform(0.1, 1.5) * rng.standard_normal(d) / math.sqrt(d))
    h = Halfspace.from_vector(target.w + rng.uniform(0.2, 2.0) * rng.standard_normal(d) / math.sqrt(d))
    return {"marginal": marginal, "concept": target, "noise": noise, "phi": near.predict, "h": h}


def identity_case(case: dict, n: int, seed, eta_bias: float = 0.0) -> dict:
    """Monte-Carlo check of the two reweighting identities on one instance.

    Sample A comes from the noisy oracle, sample B from the marginal with its
    flip rates.  Correlations: ``E_D[phi y]`` (A) against ``Z E_D'[phi f]``
    (B).  Errors: ``Pr[h != y]`` (A) against
    ``OPT + E[(1 - 2 eta) 1{h != f}]`` (B).  ``eta_bias`` perturbs the flip
    rates used on side B only, to confirm that the checks can fail.
    """
    m, f, noise, phi, h = case["marginal"], case["concept"], case["noise"], case["phi"], case["h"]
    root = as_seed(seed)
    A = OracleStream(m, f, noise, Mode.NOISY, root.derive(0))
    B = OracleStream(m, f, noise, Mode.EXTENDED, root.derive(1))
    acc = np.zeros(12)
    for X, y in A.batches(n):
        c = (phi(X) * y).astype(float)
        e = (h.predict(X) != y).astype(float)
        acc[0:4] += (c.sum(), np.dot(c, c), e.sum(), np.dot(e, e))
    for X, _, eta in B.batches(n):
        if eta_bias:
            eta = np.clip(eta + eta_bias, 0.0, ETA_CEILING)
        w = 1.0 - 2.0 * eta
        fX = f.predict(X)
        c = w * phi(X) * fX
        e = eta + w * (h.predict(X) != fX)
        acc[4:10] += (c.sum(), np.dot(c, c), e.sum(), np.dot(e, e), w.sum(), np.dot(w * phi(X), fX))
    mean = acc / n

    def se(s1, s2):
        return math.sqrt(max(s2 - s1 * s1, 0.0) / n)

    corr_a, corr_b = mean[0], mean[4]
    err_a, err_b = mean[2], mean[6]
    se_corr = math.hypot(se(mean[0], mean[1]), se(mean[4], mean[5]))
    se_err = math.hypot(se(mean[2], mean[3]), se(mean[6], mean[7]))
    z_hat = mean[8]
    return {
        "case": f"{type(m).__name__}(d={m.d})/{noise.variant}",
        "z_hat": z_hat,
        "transformed_corr": mean[9] / z_hat,
        "corr_noisy": corr_a,
        "corr_reweighted": corr_b,
        "sigma_corr": abs(corr_a - corr_b) / se_corr if se_corr > 0 else (0.0 if corr_a == corr_b else math.inf),
        "err_noisy": err_a,
        "err_decomposed": err_b,
        "sigma_error": abs(err_a - err_b) / se_err if se_err > 0 else (0.0 if err_a == err_b else math.inf),
        "samples_total": A.draws_made + B.draws_made,
    }


def verify_identities(config: ExperimentConfig) -> dict:
    """Run the decomposition, correlation and error-identity suites; pass at 4 standard errors."""
    p = config.params
    seed = config.seeds[0]
    root = as_seed(seed)
    decomp = decomposition_suite(int(p["n_triples"]), root.derive(0))
    rng = root.derive(1).generator()
    rows = []
    for k in range(int(p["n_configs"])):
        case = random_identity_case(rng)
        if config.noise is not None:
            case["marginal"], case["noise"] = config.marginal, config.noise
            d = config.marginal.d
            case["concept"] = config.concept or Halfspace.from_vector(rng.standard_normal(d))
            near = Halfspace.from_vector(case["concept"].w + 0.5 * rng.standard_normal(d) / math.sqrt(d))
            case["phi"] = near.predict
            case["h"] = Halfspace.from_vector(case["concept"].w + rng.standard_normal(d) / math.sqrt(d))
        t = time.perf_counter()
        row = identity_case(case, int(p["n"]), root.derive(2, k), float(p.get("eta_bias", 0.0)))
        row["index"] = k
        row["pass_corr"] = bool(row["sigma_corr"] <= 4.0)
        row["pass_error"] = bool(row["sigma_error"] <= 4.0)
        row["wall_ms"] = _ms(t)
        rows.append(row)
    return {
        "decomposition": decomp,
        "rows": rows,
        "error_identity_pass": all(r["pass_error"] for r in rows),
        "correlation_identity_pass": all(r["pass_corr"] for r in rows),
        "samples_total": sum(r["samples_total"] for r in rows),
    }


def _verify(config):
    rep = verify_identities(config)
    agg = {
        "decomposition_max_abs": rep["decomposition"]["max_abs_deviation"],
        "decomposition_pass": rep["decomposition"]["passed"],
        "error_identity_pass": rep["error_identity_pass"],
        "correlation_identity_pass": rep["correlation_identity_pass"],
        "max_sigma_error": max(r["sigma_error"] for r in rep["rows"]),
        "max_sigma_corr": max(r["sigma_corr"] for r in rep["rows"]),
        "samples_total": rep["samples_total"],
    }
    passed = agg["decomposition_pass"] and agg["error_identity_pass"] and agg["correlation_identity_pass"]
    return rep["rows"], agg, passed, {"decomposition": rep["decomposition"]}


def _ms(t0):
    return round((time.perf_counter() - t0) * 1000.0, 3)


_RUNNERS = {
    Experiment.MAGNITUDE: _magnitude,
    Experiment.VERIFY: _verify,
    Experiment.CSQ: lambda c: _reduction(c, "csq"),
    Experiment.SQ: lambda c: _reduction(c, "sq"),
    Experiment.RCN: _rcn_baseline,
    Experiment.BETA_CLEAN: _beta_clean,
    Experiment.TRANSLATION: _translation,
    Experiment.CALIBRATION: _calibration,
}


def run(config: ExperimentConfig) -> ExperimentResult:
    """Run one experiment; write ``<slug>.json``/``<slug>.csv`` under ``output_path`` if set."""
    config.validate()
    records, agg, passed, extras = _RUNNERS[config.experiment](config)
    ledgers = extras.pop("candidate_ledgers", None)
    result = ExperimentResult(config.experiment.value, config.to_dict(), records, agg, bool(passed), extras)
    if config.output_path:
        slug = SLUGS[config.experiment]
        result.write(config.output_path, slug)
        for s, rows in (ledgers or {}).items():
            write_rows(os.path.join(config.output_path, f"{slug}_candidates_seed{s}.csv"), rows)
    return result
