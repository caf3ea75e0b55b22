"""Reference configurations on the unit disk at ``E = 2``, ``c = 1``.

``F0`` is free motion, ``F1`` a centred bump of height 0.1 and support
radius 0.8, ``F2`` an off-centre bump of height 0.05 and radius 0.5.
"""

from .dynamics import EnergyContext
from .model import Bump, ConvexDomain, PotentialModel

UNIT_DISK = ConvexDomain.disk((0.0, 0.0), 1.0)
V0 = PotentialModel.zero(2)
V1 = PotentialModel((Bump((0.0, 0.0), 0.1, 0.8),))
V2 = PotentialModel((Bump((0.3, 0.1), 0.05, 0.5),))
CTX = EnergyContext(2.0, 1.0, 2)


def single_bump(amplitude, center=(0.0, 0.0), radius=0.8):
    return PotentialModel((Bump(tuple(center), amplitude, radius),))


FIXTURES = {"F0": V0, "F1": V1, "F2": V2}
