"""Scattering data and its translation into boundary data.

Outside the support of the potential the motion is free, so the incoming
line x = v- t + x- is followed exactly until it reaches the support and the
outgoing line b + a t is read off after the exit.  Moving the two lines to
the disk boundary gives the boundary data of the same chord, and going back
again recovers (a, b).
"""

import numpy as np

from relnewt.convert import equivalence_discrepancy, round_trip_from_scattering, scattering_to_boundary
from relnewt.fixtures import CTX, UNIT_DISK, V2
from relnewt.scattering import m_grid, solve_scattering, volume_preservation_probe

v = np.array([CTX.free_speed, 0.0])
d = solve_scattering(CTX, V2, v, (0.0, 0.2))
print("a =", d.a, " b =", d.b)
bd = scattering_to_boundary(UNIT_DISK, d)
print("entry", bd.q0, "exit", bd.q, f"transit {bd.s:.6f}")

pts = m_grid(CTX, 12, 0.95, 9)
V = np.array([p.v_minus for p in pts])
X = np.array([p.x_minus for p in pts])
print(f"{len(pts)} asymptotes on M_E")
print(f"boundary route vs direct scattering: {equivalence_discrepancy(CTX, V2, UNIT_DISK, V, X).max():.2e}")
print(f"round trip: {round_trip_from_scattering(CTX, V2, UNIT_DISK, V, X).max():.2e}")
print(f"|det dS| - 1 at one point: {volume_preservation_probe(CTX, V2, v, (0.0, 0.2)) - 1:.2e}")
