#!/usr/bin/env python3
"""
Numerical checks of the lower bound, its limits and the penalty identity
on a fixed set of class profiles. Exits non-zero when any check fails.
"""
import sys
from pathlib import Path

import numpy as np

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from kdn.services import bounds
from kdn.services.kernelkit import build_gamma
from kdn.services.metrics import penalty_terms

PROFILES = [(5, 5), (3, 7), (5, 5, 5)]
UB_GRID = np.linspace(0.01, 0.99, 100)

failures = 0


def report(ok, message):
    global failures
    failures += not ok
    print(f"  {'✅' if ok else '❌'} {message}")


print("=" * 70)
print("Lower-bound verification")
print("=" * 70)
print()

for counts in PROFILES:
    profile = bounds.ClassProfile.from_counts(counts, 'signed')
    H_star = profile.same_sum
    print(f"Profile {counts} (H* = {H_star:g})")

    near = bounds.lower_bound(profile, 1e-5, 0.5)
    report(abs(near.L - near.L_star) <= 1e-9 * abs(H_star),
           f"L(sigma0=1e-5) = {near.L:.6g} matches L* = {near.L_star:.6g}")

    L_star = bounds.limit_bound(profile, 1e-3)
    report(abs(L_star - H_star) <= 1e-6 * abs(H_star), f"L*(sigma1=1e-3) = {L_star:.6g} reaches H*")

    scan = bounds.monotonicity_scan(profile, 1.0, UB_GRID)
    report(scan.holds, f"L non-increasing in ub over {UB_GRID.size} points"
           + ("" if scan.holds else f" (first rise at ub={UB_GRID[scan.first_violation]:.3f})"))

    for ub in (0.1, 0.3):
        check = bounds.empirical_bound_check(counts, ub, 1.0)
        report(check.holds, f"ub={ub}: empirical HSIC {check.hsic:.4f} >= bound {check.bound:.4f}")

    if len(counts) == 3:
        print(f"  three-class limit at sigma1=1: {bounds.lower_bound_3class(profile, 1.0):.6g}")
    print()

print("Penalty identity on 100 random instances")
worst = 0.0
for seed in range(100):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 51))
    m = int(rng.integers(2, 6))
    W, _ = np.linalg.qr(rng.standard_normal((m, int(rng.integers(1, m + 1)))))
    gamma = build_gamma(rng.integers(0, 3, n), 'signed')
    terms = penalty_terms(rng.standard_normal((n, m)), W, float(rng.uniform(0.3, 3.0)), gamma)
    worst = max(worst, terms.relative_residual)
report(worst <= 1e-9, f"largest relative residual {worst:.3g}")
print()

print("=" * 70)
print("All checks passed!" if not failures else f"{failures} checks failed")
print("=" * 70)
sys.exit(1 if failures else 0)
