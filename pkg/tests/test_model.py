import numpy as np
import pytest

from relnewt.errors import ValidationError, ZeroDirection
from relnewt.fixtures import UNIT_DISK, V0, V1, V2, single_bump
from relnewt.model import (Bump, ConvexDomain, PotentialModel, c2_norm_bound, check_support_inside, make_potential,
                           potential_eval, ray_intersections)


def test_f1_peak():
    v, g, _ = potential_eval(V1, (0.0, 0.0))
    assert v == pytest.approx(0.1, abs=1e-15)
    assert np.allclose(g, 0.0, atol=1e-15)


def test_support_edge_vanishes_to_second_order():
    v, g, h = potential_eval(V1, (0.8, 0.0))
    assert v == 0 and np.all(g == 0) and np.all(h == 0)
    v, g, h = potential_eval(V1, (0.8 - 1e-6, 0.0))
    assert abs(v) < 1e-16 and np.abs(g).max() < 1e-10 and np.abs(h).max() < 1e-4


def test_f2_value_by_hand():
    assert potential_eval(V2, (0.3, 0.35))[0] == pytest.approx(0.05 * (1 - 0.0625 / 0.25) ** 3, rel=1e-14)
    assert potential_eval(V2, (0.3, 0.35))[0] == pytest.approx(0.02109375, rel=1e-14)


def test_gradient_and_hessian_match_finite_differences(rng):
    m = PotentialModel((Bump((0.1, -0.2), -0.3, 0.6), Bump((-0.2, 0.1), 0.2, 0.5)))
    h = 1e-5
    for _ in range(10):
        x = rng.uniform(-0.4, 0.4, 2)
        v, g, H = potential_eval(m, x)
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd = (m.value((x + e)[None])[0] - m.value((x - e)[None])[0]) / (2 * h)
            assert fd == pytest.approx(g[i], rel=1e-6, abs=1e-10)
            fdg = (m.gradient((x + e)[None])[0] - m.gradient((x - e)[None])[0]) / (2 * h)
            assert np.allclose(fdg, H[:, i], rtol=1e-5, atol=1e-8)


def test_c2_norm_bound():
    assert c2_norm_bound(V0) == 0.0
    b = c2_norm_bound(single_bump(0.1))
    assert b >= 0.1
    # dense radial sampling of the derivative profile of one bump
    r = np.linspace(0, 0.8, 2001)
    u = 1 - r**2 / 0.64
    d1 = 0.1 * 6 * r / 0.64 * u**2
    d2 = 0.1 * np.maximum(np.abs(-6 / 0.64 * u**2 + 24 * r**2 / 0.64**2 * u), 6 / 0.64 * u**2)
    assert b >= max(0.1, d1.max(), d2.max()) - 1e-12


def test_ray_intersections_examples():
    g = ray_intersections(UNIT_DISK, (1.0, 0.0), (0.0, 0.0))
    assert (g.chi, g.tau_minus, g.tau_plus) == (2, -1.0, 1.0)
    assert ray_intersections(UNIT_DISK, (1.0, 0.0), (0.0, 2.0)).chi == 0
    g = ray_intersections(UNIT_DISK, (np.sqrt(3) / 2, 0.0), (0.0, 0.5))
    assert g.chi == 2
    assert g.tau_minus == pytest.approx(-1.0, abs=1e-15) and g.tau_plus == pytest.approx(1.0, abs=1e-15)
    assert ray_intersections(UNIT_DISK, (1.0, 0.0), (0.0, 1.0)).chi == 1
    with pytest.raises(ZeroDirection):
        ray_intersections(UNIT_DISK, (0.0, 0.0), (0.0, 0.0))


def test_ray_reversal_symmetry(rng):
    dom = ConvexDomain.ellipse((0.1, 0.0), (1.2, 0.7))
    for _ in range(20):
        v, x = rng.normal(size=2), rng.uniform(-0.5, 0.5, 2)
        a, b = ray_intersections(dom, v, x), ray_intersections(dom, -v, x)
        assert a.chi == b.chi == 2
        assert a.tau_minus == pytest.approx(-b.tau_plus, abs=1e-13)
        assert a.tau_plus == pytest.approx(-b.tau_minus, abs=1e-13)


@pytest.mark.parametrize("dom", [UNIT_DISK, ConvexDomain.ellipse((0.2, -0.1), (1.5, 0.8))])
def test_boundary_geometry(dom):
    th = np.linspace(0, 2 * np.pi, 50, endpoint=False)
    x = dom.point(th)
    assert np.abs(dom.level(x)).max() < 1e-12
    N = dom.outward_normal(x)
    assert np.allclose(np.linalg.norm(N, axis=1), 1.0)
    assert np.all(dom.curvature(th) > 0)
    assert not dom.inside(x + 1e-6 * N).any()
    assert dom.inside(x - 1e-6 * N).all()


def test_support_inside_checks():
    check_support_inside(V1, UNIT_DISK)
    with pytest.raises(ValidationError):
        check_support_inside(make_potential([{"center": [0.5, 0.0], "amplitude": 0.1, "radius": 0.8}]), UNIT_DISK)
