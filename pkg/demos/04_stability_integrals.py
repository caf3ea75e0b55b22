"""Boundary and interior forms of the stability integral.

For two potentials the boundary integral of -d_zeta(dl) d_x(dl) and its
interior counterpart built from the direction fields agree, and both
bound the L^2-type distance between the metrics from above after the
dimensional constant 1/(2 pi).  The fields are coarse here (32 nodes).
"""

from relnewt.fixtures import CTX, UNIT_DISK, V0, V1
from relnewt.hodograph import hodograph_grid
from relnewt.maupertuis import MetricField
from relnewt.stability import lhs_integral, phi0_integral, phi1_integral, stability_constant

b0 = hodograph_grid(CTX, V0, UNIT_DISK, 32, 32, "boundary", 0.2, layout="graded")
b1 = hodograph_grid(CTX, V1, UNIT_DISK, 32, 32, "boundary", 0.2, layout="graded")
i0 = hodograph_grid(CTX, V0, UNIT_DISK, 32, 32, "interior", 0.2, n_r=24)
i1 = hodograph_grid(CTX, V1, UNIT_DISK, 32, 32, "interior", 0.2, n_r=24)

p0 = phi0_integral(b0, b1, UNIT_DISK)
p1 = phi1_integral(i0, i1, MetricField(V0, CTX), MetricField(V1, CTX))
lhs = lhs_integral(V0, V1, CTX, UNIT_DISK)
print(f"boundary form {p0:.8f}")
print(f"interior form {p1:.8f}  (relative gap {abs(p0 - p1) / p0:.1e})")
print(f"int (r1 - r0)^2 = {lhs:.8f} <= {stability_constant(2) * p0:.8f}")
print(f"slack {stability_constant(2) * p0 - lhs:.3e},  ratio {lhs / (stability_constant(2) * p0):.4f}")
