"""Recovering a bump amplitude from boundary data.

The data are generated by the forward solver on a 16-node grid; the fit
varies the amplitude of a bump with known centre and radius and minimizes
the exit-velocity and transit-time misfit by Levenberg-Marquardt.
"""

from relnewt import boundary_grid
from relnewt.fixtures import CTX, UNIT_DISK, V1
from relnewt.inverse import BumpParametrization, converted_scattering_dataset, reconstruct

data = boundary_grid(CTX, V1, UNIT_DISK, 16, 0.2)
par = BumpParametrization(((0.0, 0.0),), (0.8,))

rep = reconstruct(data, par, CTX, UNIT_DISK, truth=V1, seed=0)
print(f"boundary fit: A = {rep.params[0]:.10f} after {rep.iterations} iterations")
print("misfit history", " ".join(f"{m:.2e}" for m in rep.misfit_history))

rep = reconstruct(converted_scattering_dataset(data, UNIT_DISK), par, CTX, UNIT_DISK, truth=V1)
print(f"scattering fit: A = {rep.params[0]:.10f}, relative L2 error {rep.relative_l2_error:.1e}")
