"""The softplus approximation family behind the smoothed bounds.

Walks through the six members: how tightly they hug min(z, 1) and
max(z, 0), the uniform h*log(2) error guarantee, and how fast the
population-level outer bounds collapse onto the sharp ones as h shrinks.
"""

import numpy as np

import strata_bounds as sb
from strata_bounds.smoothing import GFamily, LOG2

print("=== sandwich and uniform error ===")
z = np.linspace(-2.0, 3.0, 500_001)
for h in (0.3, 0.05, 0.001):
    fam = GFamily(h=h)
    gap1 = np.max(np.abs(fam.g(1, z) - np.minimum(z, 1.0)))
    gap2 = np.max(np.abs(fam.g(2, z) - np.maximum(z, 0.0)))
    print(f"h = {h:<6g} sup|g1 - min| = {gap1:.6f}  sup|g2 - max| = {gap2:.6f}"
          f"  guarantee h*log2 = {h * LOG2:.6f}")

print()
print("=== values at the indifference point z = 1 ===")
for h in (0.3, 0.05, 0.001):
    fam = GFamily(h=h)
    print(f"h = {h:<6g} g1(1) = {float(fam.g(1, 1.0)):.6f}"
          f"  (trims an extra {h * LOG2:.4%} of the relevant tail)")

print()
print("=== approximation error of the outer bounds (regular design) ===")
design = sb.BenchmarkDesign(sb.DgpConfig(shares=sb.PANEL_SHARES["a"]))
grid = [0.2, 0.1, 0.05, 0.025, 0.0125, 1e-9]
print(f"{'h':>10} {'lower error':>12} {'upper error':>12} {'lower err/h':>12}")
for h, err_l in sb.approximation_error_curve(design, "l", grid):
    err_u = dict(sb.approximation_error_curve(design, "u", [h]))[h]
    rate = err_l / h if h > 1e-6 else float("nan")
    print(f"{h:>10g} {err_l:>12.6f} {err_u:>12.6f} {rate:>12.4f}")
print("\nThe error decays linearly in h; at h = 1e-9 the outer bounds are")
print("numerically identical to the sharp ones.")
