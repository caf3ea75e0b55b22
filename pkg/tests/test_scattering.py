import numpy as np
import pytest
from conftest import f1_transit_oracle

from relnewt.fixtures import CTX, V0, V1, V2
from relnewt.scattering import (impact_representation, m_grid, reversal_residual, solve_scattering, solve_scattering_batch,
                                volume_preservation_probe)

SQ3 = np.sqrt(3.0)
V = np.array([SQ3 / 2, 0.0])


def test_free_motion_identity():
    d = solve_scattering(CTX, V0, V, (0.0, 0.3))
    assert np.array_equal(d.a, V) and np.array_equal(d.b, (0.0, 0.3))


def test_f1_head_on_time_delay():
    d = solve_scattering(CTX, V1, V, (0.0, 0.0))
    sv = f1_transit_oracle(-0.8, 0.8)
    assert np.allclose(d.a, V, atol=1e-10)
    assert d.b[0] == pytest.approx(SQ3 / 2 * (1.6 / (SQ3 / 2) - sv), abs=1e-9)
    assert abs(d.b[1]) < 1e-12


def test_miss_support_unchanged():
    d = solve_scattering(CTX, V1, V, (0.0, 0.9))
    assert d.chi <= 1 and np.array_equal(d.a, V) and np.array_equal(d.b, (0.0, 0.9))


def test_m_grid_plane():
    pts = m_grid(CTX, 4, 1.0, 3)
    assert len(pts) == 12
    for p in pts:
        assert p.v_minus @ p.x_minus == 0.0
    for p in m_grid(CTX, 7, 1.0, 3):
        assert abs(p.v_minus @ p.x_minus) < 1e-15
        assert np.linalg.norm(p.v_minus) == pytest.approx(SQ3 / 2, rel=1e-15)


def test_m_grid_space():
    from relnewt.dynamics import EnergyContext

    pts = m_grid(EnergyContext(2.0, 1.0, 3), 3, 1.0, 3)
    for p in pts:
        assert abs(p.v_minus @ p.x_minus) < 1e-14
    offs = np.array([p.x_minus for p in pts if np.allclose(p.v_minus, pts[0].v_minus)])
    assert np.linalg.matrix_rank(offs, tol=1e-10) == 2


def test_shell_preserved_and_reversal(rng):
    phi = rng.uniform(0, 2 * np.pi, 10)
    u = np.stack([np.cos(phi), np.sin(phi)], 1)
    X = impact_representation(u, (0.3, 0.1) + rng.uniform(-0.45, 0.45, 10)[:, None] * np.stack([-u[:, 1], u[:, 0]], 1))
    A, B, chi = solve_scattering_batch(CTX, V2, SQ3 / 2 * u, X)
    assert np.all(chi == 2)
    assert np.abs(np.linalg.norm(A, axis=1) - SQ3 / 2).max() < 1e-9
    for i in range(3):
        d = solve_scattering(CTX, V2, SQ3 / 2 * u[i], X[i])
        assert np.abs(d.a - A[i]).max() < 1e-9 and np.abs(d.b - B[i]).max() < 1e-9
        assert reversal_residual(CTX, V2, d) < 1e-8


def test_volume_preservation():
    assert volume_preservation_probe(CTX, V0, V, (0.0, 0.1)) == pytest.approx(1.0, abs=1e-12)
    assert volume_preservation_probe(CTX, V1, V, (0.0, 0.0)) == pytest.approx(1.0, abs=1e-4)
    assert volume_preservation_probe(CTX, V2, V, (0.0, 0.2)) == pytest.approx(1.0, abs=1e-4)
