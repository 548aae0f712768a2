"""
How hard is a noise function?
=============================

The magnitude ``M = 1 / E[1 - 2 eta(x)]`` summarises a noise function in one
number: the Bayes classifier errs with probability ``1/2 - 1/(2M)``.
"""

import numpy as np

from noisysq import (
    RCN,
    MassartRadial,
    UniformBall,
    bayes_error,
    build_beta_clean_2d,
    build_radial_tsybakov,
    estimate_magnitude,
    tsybakov_magnitude_bound,
)

ball = UniformBall(5)

# constant-rate noise: the magnitude is exactly 1 / (1 - 2 gamma)
for gamma in (0.1, 0.25, 0.4):
    rep = estimate_magnitude(RCN(gamma), ball, 10**5, seed=0)
    print(f"RCN {gamma:4}: M = {rep.estimate:.3f}")

# a radial profile that is noisiest at the centre stays below its worst-case rate
massart = MassartRadial((0.0, 1.0), (0.4, 0.0))
rep = estimate_magnitude(massart, ball, 10**6, seed=1)
print(f"radial Massart: M = {rep.estimate:.3f} +- {rep.std_error:.3f}, bound {rep.analytic_bound:.3f}")

# Tsybakov noise can come arbitrarily close to 1/2, yet its magnitude is bounded
alpha, A, t0 = 0.5, 1.0, 0.4
bound = tsybakov_magnitude_bound(alpha, A, t0)
noise = build_radial_tsybakov(alpha, A, t0, ball)
rep = estimate_magnitude(noise, ball, 10**6, seed=2)
print(f"Tsybakov{(alpha, A, t0)}: M = {rep.estimate:.4f}, bound {bound.bound:.4f} ({bound.branch} maximiser)")
opt = bayes_error(noise, ball, 10**6, seed=3)
print(f"  Bayes error {opt:.4f} vs 1/2 - 1/(2M) = {0.5 - 0.5 / rep.estimate:.4f}")

# noise that is clean on a fraction beta of the mass has magnitude at most 1/beta
for rho in (0.1, 0.01):
    inst = build_beta_clean_2d(0.5, rho)
    rep = estimate_magnitude(inst.noise, inst.marginal, 10**6, seed=4)
    print(f"beta-clean, rho = {rho}: M = {rep.estimate:.3f} (bound {1 / inst.noise.beta:.1f})")

eta = noise.eta(ball.sample(10**5, np.random.default_rng(0)))
print(f"fraction of the ball with eta > 0.45: {np.mean(eta > 0.45):.3f}")
