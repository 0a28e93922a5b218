"""Discrete function-space norms and the Besov inequality chain.

Shows the Hoelder and Besov difference-quotient seminorms, the bmo constant
with its two branches, and the chain
    ||f||_B^p  <=  C ||f^{p/2}||_{H^alpha}^2  <=  C' int |f|^{p-2} f Lam^{2a} f
on a nonnegative smooth field, plus the sign-split cross terms.
"""

import numpy as np

from fracdrift import (
    Grid,
    besov_seminorm,
    bmo_norm,
    check_besov_chain,
    check_distance_power_lemma,
    holder_seminorm,
    lp_norm,
)
from fracdrift.analysis import bmo_branches
from fracdrift.harness import random_smooth_field
from fracdrift.spectral import field_from_values

grid = Grid(dim=2, points_per_axis=64, box_length=2 * np.pi)
f = random_smooth_field(grid, seed=3, amplitude=1.0)

print("== seminorms of a random smooth field ==")
print(f"  sup        : {lp_norm(f, np.inf):.5f}")
print(f"  Hoelder 0.2: {holder_seminorm(f, 0.2):.5f}")
print(f"  Besov s=.25: {besov_seminorm(f, 0.25, 2.0):.5f}")
osc, avg = bmo_branches(f)
print(f"  bmo        : {bmo_norm(f):.5f} (oscillation {osc:.5f}, large-cube average {avg:.5f})")

print("\n== Besov regularity chain on a nonnegative field ==")
fpos = field_from_values(grid, f.values - f.values.min() + 0.05)
for p in (2.0, 4.0):
    rep = check_besov_chain(fpos, p, 0.25)
    print(f"  p={p}: ||f||_B^p = {rep.besov_p_power:.4f} <= C * {rep.sobolev_energy:.4f}"
          f" <= C' * {rep.dissipation:.4f}   (C={rep.constant_first:.3f},"
          f" C'={rep.constant_second:.3f})")

print("\n== sign-changing field: split parts and cross terms ==")
rep = check_besov_chain(f, 4.0, 0.25)
cp, cm = rep.split["cross"]
print(f"  cross terms {cp:.3e}, {cm:.3e}  (nonpositive as required)")

print("\n== the |a^eps - b^eps| <= |a-b|^eps lemma, random sweep ==")
rng = np.random.default_rng(0)
n = 100_000
ok = check_distance_power_lemma(zip(
    10.0 ** rng.uniform(-6, 6, n), 10.0 ** rng.uniform(-6, 6, n),
    rng.uniform(1e-6, 1.0, n),
))
print(f"  {n} samples: {'no violations' if ok else 'VIOLATION FOUND'}")
