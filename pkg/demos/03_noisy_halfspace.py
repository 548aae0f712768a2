"""
Learning a halfspace from Tsybakov-noisy labels
===============================================

The averaging learner only asks correlational queries, so it can run on
noisy labels alone: guess ``Z`` on a grid, replay the learner for each
guess and keep the candidate with the lowest empirical error.
"""

import numpy as np

from noisysq import (
    Halfspace,
    HalfspaceLearner,
    Mode,
    OracleStream,
    UniformBall,
    build_radial_tsybakov,
    disagreement_spherical,
    run_csq_reduction,
    tsybakov_magnitude_bound,
)
from noisysq.harness import evaluate_hypothesis

d, eps, delta = 5, 0.1, 0.1
ball = UniformBall(d)
target = Halfspace.from_vector([0.6, -0.3, 0.5, 0.2, -0.5])
noise = build_radial_tsybakov(0.5, 1.0, 0.4, ball)
C = tsybakov_magnitude_bound(0.5, 1.0, 0.4).bound

learner = HalfspaceLearner(d, eps)
print(f"{learner.budget.q} queries at tolerance {learner.budget.tau:.5f}, C = {C:.3f}")

oracle = OracleStream(ball, target, noise, Mode.NOISY, seed=0)
h, candidates = run_csq_reduction(learner, oracle, eps, delta, C)
print(f"{len(candidates)} candidates, {oracle.draws_made:,} noisy draws")

errs = np.array([c.empirical_error for c in candidates])
z = np.array([c.z_tilde for c in candidates])
for lo, hi in [(0, 0.05), (0.05, 0.2), (0.2, 1.0)]:
    sel = (z > lo) & (z <= hi)
    print(f"  guesses in ({lo}, {hi}]: best empirical error {errs[sel].min():.3f}")

ev = evaluate_hypothesis(h, ball, target, noise, 10**6, seed=1)
print(f"OPT = {ev['opt_hat']:.4f}, err(h) = {ev['err_hat']:.4f}, excess = {ev['excess']:.2e}")
print(f"angle to target / pi = {disagreement_spherical(h, target):.2e}")
