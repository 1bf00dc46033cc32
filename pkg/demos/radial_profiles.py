"""
Radial rate profiles
====================

The perimeter of a random walk's convex hull is governed by the smallest
rate on a circle of radius r. For a Gaussian step this profile is convex;
for a two-atom law it jumps where one atom stops being reachable, and for a
skewed three-atom law it is not convex at all.
"""
import numpy as np

from ldhull import dist, lft, radial

grid = np.round(np.arange(0, 3.0001, 0.25), 12)

# a unit Gaussian with mean (1, 0): the profile is (r - 1)^2 / 2 below the mean
gauss = dist.Gaussian([1.0, 0.0], np.eye(2))
prof = radial.radial_min_profile(gauss, grid)
for r, v in zip(grid, prof.values):
    print(f"gaussian  r={r:4.2f}  min rate={v:.6f}")

# two atoms on a line: the profile jumps at r = 1
atoms = dist.two_atom_line()
prof = radial.radial_min_profile(atoms, np.round(np.arange(0, 2.5001, 0.05), 12))
report = radial.detect_jumps_and_convexity(prof)
for r, left, right in report.jump_candidates:
    print(f"two atoms: jump at r={r:.3f} from {left:.6f} to {right:.6f}")

# the skewed law: compare the profile with its lower convex envelope
skew = dist.skewed_three_atom_line()
fine = np.round(np.arange(0, 3.0001, 0.05), 12)
prof = radial.radial_min_profile(skew, fine)
env = lft.lower_convex_envelope(fine, prof.values)
gap = prof.values - env(fine)
print("skewed law convex on grid:", radial.detect_jumps_and_convexity(prof).is_convex_on_grid)
print(f"largest gap to the envelope: {np.nanmax(gap):.4f} at r={fine[np.nanargmax(gap)]:.2f}")
for k in radial.find_barK_kinks(skew, np.linspace(0.05, 5, 100)):
    print(f"kink of the radial max at p={k.p:.4f}: slopes {k.left:.4f} -> {k.right:.4f}")
