import numpy as np
import pytest

from relnewt.errors import GridMismatch
from relnewt.fixtures import CTX, UNIT_DISK, V0, V1, V2
from relnewt.hodograph import hodograph_grid
from relnewt.maupertuis import MetricField
from relnewt.stability import (lhs_integral, phi0_details, phi0_integral, phi1_density, phi1_integral,
                               stability_constant, theorem31_check)


@pytest.fixture(scope="module")
def bfields():
    return {k: hodograph_grid(CTX, m, UNIT_DISK, 16, 16, "boundary", 0.2, layout="graded")
            for k, m in (("F0", V0), ("F1", V1), ("F2", V2))}


@pytest.fixture(scope="module")
def ifields():
    return {k: hodograph_grid(CTX, m, UNIT_DISK, 16, 16, "interior", 0.2, n_r=12) for k, m in (("F0", V0), ("F1", V1))}


def test_constant():
    assert stability_constant(2) == pytest.approx(1 / (2 * np.pi), rel=1e-15)
    # Gamma(3/2) / (2 pi^{3/2} 2!) = 1 / (8 pi)
    assert stability_constant(3) == pytest.approx(1 / (8 * np.pi), rel=1e-15)


def test_phi0_vanishes_for_equal_potentials(bfields):
    for k in ("F0", "F1"):
        assert abs(phi0_integral(bfields[k], bfields[k], UNIT_DISK)) < 1e-12


def test_phi0_positive_and_routes_agree(bfields):
    a = phi0_integral(bfields["F0"], bfields["F1"], UNIT_DISK)
    b = phi0_integral(bfields["F0"], bfields["F1"], UNIT_DISK, method="spectral")
    # the two derivative routes agree to discretization error (1e-7 at 64 nodes)
    assert a > 0 and b == pytest.approx(a, rel=1e-2)
    d = phi0_details(bfields["F0"], bfields["F1"], UNIT_DISK)
    assert d.value == pytest.approx(a, rel=1e-14)


def test_grid_mismatch(bfields):
    other = hodograph_grid(CTX, V1, UNIT_DISK, 8, 8, "boundary", 0.2, layout="graded")
    with pytest.raises(GridMismatch):
        phi0_integral(bfields["F0"], other, UNIT_DISK)


def test_phi1_zero_for_equal_potentials(ifields):
    m = MetricField(V1, CTX)
    dens = phi1_density(ifields["F1"], ifields["F1"], m, m)
    assert np.abs(dens).max() < 1e-12


def test_phi1_matches_phi0(bfields, ifields):
    p0 = phi0_integral(bfields["F0"], bfields["F1"], UNIT_DISK)
    p1 = phi1_integral(ifields["F0"], ifields["F1"], MetricField(V0, CTX), MetricField(V1, CTX))
    assert p1 == pytest.approx(p0, rel=0.02)


def test_lhs_integral():
    assert lhs_integral(V0, V0, CTX, UNIT_DISK) == 0.0
    from scipy.integrate import quad

    f = lambda s: 2 * np.pi * s * (np.sqrt((2 - 0.1 * (1 - s * s / 0.64) ** 3) ** 2 - 1) - np.sqrt(3)) ** 2
    ref = quad(f, 0, 0.8, epsabs=1e-15, epsrel=1e-13)[0]
    assert lhs_integral(V0, V1, CTX, UNIT_DISK, n_psi=32, n_r=64) == pytest.approx(ref, rel=1e-6)


def test_theorem31_check_trivial_and_pair(bfields):
    rep = theorem31_check(V0, V0, CTX, UNIT_DISK, with_phi1=False, fields=(bfields["F0"], bfields["F0"], None, None))
    assert rep.lhs == 0.0 and abs(rep.rhs) < 1e-12 and rep.passed
    rep = theorem31_check(V0, V1, CTX, UNIT_DISK, with_phi1=False, fields=(bfields["F0"], bfields["F1"], None, None))
    assert rep.passed and rep.slack >= 0
    assert set(rep.to_dict()) >= {"lhs", "rhs", "slack", "constant"}
