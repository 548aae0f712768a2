"""
Reweighting turns noise into a different clean problem
======================================================

Weighting the marginal by ``1 - 2 eta(x)`` gives a distribution on which the
noisy correlations are the clean ones, scaled by ``Z = 1/M``.
"""

import numpy as np

from noisysq import (
    Halfspace,
    Mode,
    OracleStream,
    UniformBall,
    build_radial_tsybakov,
    rotate_in_plane,
    transformed_expectation,
)

ball = UniformBall(4)
target = Halfspace.from_vector([1.0, 0.5, -0.5, 0.2])
noise = build_radial_tsybakov(0.5, 1.0, 0.4, ball)
phi = rotate_in_plane(target, 0.6).predict

# the noisy side: average phi(x) * y over labelled draws
X, y = OracleStream(ball, target, noise, Mode.NOISY, seed=1).draw(2 * 10**6)
noisy = np.mean(phi(X) * y)

# the reweighted side: Z times E'[phi f]
Xu = ball.sample(2 * 10**6, np.random.default_rng(2))
z = np.mean(1 - 2 * noise.eta(Xu))
clean, se = transformed_expectation(lambda X, fX: phi(X) * fX, ball, noise, 2 * 10**6, 3, concept=target)
print(f"E[phi y] = {noisy:.4f}   Z * E'[phi f] = {z * clean:.4f}   (Z = {z:.4f})")

# excess error on the noisy problem is disagreement weighted by 1 - 2 eta
h = rotate_in_plane(target, 0.3)
X, y, eta = OracleStream(ball, target, noise, Mode.EXTENDED, seed=4).draw(2 * 10**6)
err = np.mean(h.predict(X) != y)
decomposed = np.mean(eta) + np.mean((1 - 2 * eta) * (h.predict(X) != target.predict(X)))
print(f"err(h) = {err:.4f}   OPT + E[(1 - 2 eta) 1{{h != f}}] = {decomposed:.4f}")
