"""Trajectories at fixed energy are geodesics of r(x) |dx|.

With r = c sqrt(((E - V)/c^2)^2 - 1) the mechanical chord and the geodesic
between the same boundary points coincide after reparametrization.  The
metric length of the chord is the hodograph distance l(zeta, x).
"""

import numpy as np

from relnewt.fixtures import CTX, UNIT_DISK, V2
from relnewt.hodograph import hodograph_distance, winding_angle
from relnewt.maupertuis import MetricField, lemma31_residual

rng = np.random.default_rng(1)
f = MetricField(V2, CTX)
worst = 0.0
for _ in range(5):
    a, b = rng.uniform(0, 2 * np.pi, 2)
    d, mech, geo = lemma31_residual(CTX, V2, UNIT_DISK, UNIT_DISK.point(a), UNIT_DISK.point(b), return_parts=True)
    worst = max(worst, d)
    print(f"chord {a:5.2f} -> {b:5.2f}: distance {d:.1e}, metric length {geo.length:.8f}")
print(f"worst trajectory/geodesic distance {worst:.1e}")

l, k, _ = hodograph_distance(CTX, V2, UNIT_DISK, (-1.0, 0.0), (0.3, 0.1))
print(f"l((-1,0), (0.3,0.1)) = {l:.8f}, exit momentum length {np.linalg.norm(k) / np.sqrt(1 - k @ k):.6f}"
      f" vs r = {f.r(np.array([[0.3, 0.1]]))[0]:.6f}")
print(f"winding of nu around (0.3, 0.1): {winding_angle(CTX, V2, UNIT_DISK, (0.3, 0.1), N=64) / np.pi:.6f} pi")
