"""
Mean hull perimeter
===================

The expected perimeter of the hull of n steps equals twice the sum of
E|S_k| / k. For a standard Gaussian walk both sides reduce to
sqrt(2 pi) * sum k^(-1/2); here the two Monte Carlo routes are compared
with that value.
"""
import numpy as np

from ldhull import dist, mc

sw = mc.spitzer_widom_check(dist.Gaussian([0.0, 0.0], np.eye(2)), 100, 20_000, seed=3)
print(f"mean perimeter  {sw.lhs:.3f} +- {sw.lhs_se:.3f}")
print(f"2 sum E|S_k|/k  {sw.rhs:.3f} +- {sw.rhs_se:.3f}")
print(f"closed form     {sw.analytic:.3f}")

# the same identity for the two-atom law, where there is no closed form
sw = mc.spitzer_widom_check(dist.two_atom_line(), 50, 20_000, seed=3)
print(f"two atoms: {sw.lhs:.4f} vs {sw.rhs:.4f} (difference se {sw.diff_se:.4f})")
