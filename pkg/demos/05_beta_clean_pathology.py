"""
When a small excess error says little about the truth
=====================================================

Clean caps cover half of the disk and everything else is nearly pure
noise.  A rotated halfspace that is right on the caps is almost optimal on
the noisy distribution, yet disagrees with the target on a quarter of the
points.
"""

from noisysq.harness import beta_clean_demo

rep = beta_clean_demo(0.5, [0.1, 0.01, 0.001, 0.0001], 10**6, seed=0)
print(f"{'rho':>8} {'excess':>10} {'2 rho (1 - beta)':>18} {'disagreement':>13}")
for r in rep["rows"]:
    print(f"{r['rho']:>8} {r['excess']:>10.5f} {r['excess_bound']:>18.5f} {r['disagreement']:>13.3f}")
