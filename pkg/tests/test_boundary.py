import numpy as np
import pytest
from conftest import f1_transit_oracle

from relnewt.boundary import antisymmetry_residual, boundary_grid, solve_boundary_value, uniqueness_probe
from relnewt.errors import ValidationError
from relnewt.fixtures import CTX, UNIT_DISK, V0, V1, V2

SQ3 = np.sqrt(3.0)


def test_free_diameter():
    d = solve_boundary_value(CTX, V0, UNIT_DISK, (-1.0, 0.0), (1.0, 0.0))
    assert d.s == pytest.approx(4 / SQ3, abs=1e-9)
    assert np.allclose(d.k, (SQ3 / 2, 0), atol=1e-10) and np.allclose(d.k0, (SQ3 / 2, 0), atol=1e-10)


def test_free_quarter_chord():
    d = solve_boundary_value(CTX, V0, UNIT_DISK, (1.0, 0.0), (0.0, 1.0))
    assert np.allclose(d.k0, SQ3 / 2 * np.array([-1, 1]) / np.sqrt(2), atol=1e-10)
    assert d.s == pytest.approx(np.sqrt(2) / (SQ3 / 2), abs=1e-9)


def test_f1_head_on():
    d = solve_boundary_value(CTX, V1, UNIT_DISK, (-1.0, 0.0), (1.0, 0.0))
    assert np.allclose(d.k, (SQ3 / 2, 0), atol=1e-9)
    assert d.s == pytest.approx(f1_transit_oracle(), abs=1e-9)


def test_f0_grid_matches_chords():
    ds = boundary_grid(CTX, V0, UNIT_DISK, 16, 0.2)
    assert len(ds) == 16 * 15 and not ds.failures
    u = ds.q - ds.q0
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    assert np.abs(ds.k - SQ3 / 2 * u).max() < 1e-9
    assert np.abs(ds.s - np.linalg.norm(ds.q - ds.q0, axis=1) / (SQ3 / 2)).max() < 1e-9


def test_shell_speed_and_transversality():
    ds = boundary_grid(CTX, V2, UNIT_DISK, 12, 0.2)
    assert np.abs(np.linalg.norm(ds.k, axis=1) - SQ3 / 2).max() < 1e-9
    assert np.abs(np.linalg.norm(ds.k0, axis=1) - SQ3 / 2).max() < 1e-9
    assert np.all(np.einsum("ij,ij->i", ds.k, UNIT_DISK.outward_normal(ds.q)) > 0)
    assert np.all(np.einsum("ij,ij->i", ds.k0, UNIT_DISK.outward_normal(ds.q0)) < 0)
    assert np.all(ds.s > 0)
    assert antisymmetry_residual(ds) < 1e-8


def test_zero_band_rejected():
    with pytest.raises(ValidationError):
        boundary_grid(CTX, V0, UNIT_DISK, 16, 0.0)


def test_uniqueness_probe(rng):
    t0 = rng.uniform(0, 2 * np.pi, 4)
    t1 = t0 + rng.uniform(0.5, 5.5, 4)
    spread, n_conv = uniqueness_probe(CTX, V1, UNIT_DISK, UNIT_DISK.point(t0), UNIT_DISK.point(t1))
    assert np.max(spread) < 1e-7 and np.all(n_conv >= 2)
