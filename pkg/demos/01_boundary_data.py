"""Boundary data for a radial bump on the unit disk.

A relativistic particle with energy E = 2 (c = 1) crosses the disk.  Without
a potential every chord is straight and takes |q - q0| / (sqrt(3)/2) time
units; a positive bump slows the particle down and bends off-centre chords.
"""

import numpy as np
from scipy.integrate import quad

from relnewt import boundary_grid, solve_boundary_value
from relnewt.boundary import antisymmetry_residual
from relnewt.fixtures import CTX, UNIT_DISK, V0, V1

free = solve_boundary_value(CTX, V0, UNIT_DISK, (-1.0, 0.0), (1.0, 0.0))
bump = solve_boundary_value(CTX, V1, UNIT_DISK, (-1.0, 0.0), (1.0, 0.0))
print(f"free diameter:   s = {free.s:.10f}   (4/sqrt(3) = {4 / np.sqrt(3):.10f})")

# head-on chord through the bump stays on the axis; its time is a 1-D integral
V = lambda x: 0.1 * (1 - x * x / 0.64) ** 3 if abs(x) < 0.8 else 0.0
s_ref = quad(lambda x: 1 / np.sqrt(1 - (2 - V(x)) ** -2), -1, 1, points=[-0.8, 0.8], epsabs=1e-13)[0]
print(f"bumped diameter: s = {bump.s:.10f}   quadrature {s_ref:.10f}")

# a whole grid of chords, and the time-reversal check k0(q0, q) = -k(q, q0)
ds = boundary_grid(CTX, V1, UNIT_DISK, 16, delta=0.2)
print(f"{len(ds)} chords solved, {len(ds.failures)} failures")
print(f"time-reversal residual {antisymmetry_residual(ds):.2e}")
delay = ds.s - np.linalg.norm(ds.q - ds.q0, axis=1) / CTX.free_speed
print(f"time delay over the grid: min {delay.min():.2e}, max {delay.max():.4f}")
