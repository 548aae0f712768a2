"""
Any SQ learner, when the flip rates are visible
===============================================

If each example arrives with its flip probability, every query splits into
a label-free part and a correlational part that can both be estimated on
the reweighted distribution.  Here the classic conjunction learner runs on
a hypercube where every vertex has its own frozen flip rate.
"""

from noisysq import (
    Conjunction,
    ConjunctionLearner,
    HypercubeTable,
    Mode,
    OracleStream,
    UniformHypercube,
    run_sq_reduction,
)
from noisysq.harness import evaluate_hypothesis
from noisysq.reductions import DrawLog

d, eps = 12, 0.1
cube = UniformHypercube(d)
target = Conjunction(frozenset({1, 5, 8}), d)
noise = HypercubeTable(d, seed=7, low=0.0, high=0.45)
print(f"exact magnitude {noise.exact_magnitude():.3f}, worst-case bound {noise.magnitude_bound():.3f}")

learner = ConjunctionLearner(d, eps)
oracle = OracleStream(cube, target, noise, Mode.EXTENDED, seed=0)
log = DrawLog()
# the Hoeffding sizes are astronomically conservative; cap each estimate
h = run_sq_reduction(learner, oracle, eps, 0.1, noise.magnitude_bound(), max_draws=10**6, log=log)
print(f"learned literals {sorted(h.literals)}, target {sorted(target.literals)}")
print(f"draws used {log.used:,} of {log.nominal:,} nominal")

ev = evaluate_hypothesis(h, cube, target, noise, 0, seed=0)
print(f"exact OPT = {ev['opt_hat']:.4f}, err(h) = {ev['err_hat']:.4f}")
