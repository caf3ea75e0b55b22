import numpy as np
import pytest
from conftest import f1_length_oracle

from relnewt.errors import ValidationError
from relnewt.fixtures import CTX, UNIT_DISK, V0, V1, V2
from relnewt.hodograph import (gradient_identity_residual, hodograph_distance, hodograph_grid,
                               mixed_derivative_probe, nu_field, symmetry_residual, triangle_defect, winding_angle)

SQ3 = np.sqrt(3.0)


def test_distance_examples():
    assert hodograph_distance(CTX, V0, UNIT_DISK, (-1, 0), (1, 0))[0] == pytest.approx(2 * SQ3, abs=1e-9)
    assert hodograph_distance(CTX, V0, UNIT_DISK, (1, 0), (0, 1))[0] == pytest.approx(SQ3 * np.sqrt(2), abs=1e-9)
    assert hodograph_distance(CTX, V1, UNIT_DISK, (-1, 0), (1, 0))[0] == pytest.approx(f1_length_oracle(), abs=1e-9)


def test_distance_to_interior_point():
    l, k, _ = hodograph_distance(CTX, V1, UNIT_DISK, (-1, 0), (0.5, 0))
    assert l == pytest.approx(f1_length_oracle(-1.0, 0.5), abs=1e-9)
    assert np.allclose(k / np.linalg.norm(k), (1, 0), atol=1e-9)


def test_nu_field():
    assert np.allclose(nu_field(CTX, V0, UNIT_DISK, (-1, 0), (0, 0)), (-1, 0), atol=1e-12)
    assert np.allclose(nu_field(CTX, V1, UNIT_DISK, (-1, 0), (0, 0)), (-1, 0), atol=1e-9)
    with pytest.raises(ValidationError):
        nu_field(CTX, V1, UNIT_DISK, (-1, 0), (1, 0))


def test_winding_degree_one():
    assert winding_angle(CTX, V1, UNIT_DISK, (0.2, 0.1), N=64) == pytest.approx(2 * np.pi, abs=1e-9)


def test_gradient_identity_free():
    g, rel = gradient_identity_residual(CTX, V0, UNIT_DISK, (np.cos(1.0), np.sin(1.0)), (0.1, -0.3))
    assert np.abs(g).max() < 1e-6 and rel < 1e-6


def test_gradient_identity_f1(rng):
    for _ in range(3):
        th, x = rng.uniform(0, 2 * np.pi), rng.uniform(-0.5, 0.5, 2)
        g, rel = gradient_identity_residual(CTX, V1, UNIT_DISK, UNIT_DISK.point(th), x)
        assert np.abs(g).max() < 1e-4 and rel < 1e-4


def test_f0_boundary_grid_chord_lengths():
    f = hodograph_grid(CTX, V0, UNIT_DISK, 32, 32, "boundary", 0.2)
    chord = np.linalg.norm(f.x - f.zeta[:, None, :], axis=-1)
    ok = f.converged
    assert ok.all()
    assert np.abs(f.l[ok] - SQ3 * chord[ok]).max() < 1e-9


def test_f2_symmetry_triangle_and_positivity():
    f = hodograph_grid(CTX, V2, UNIT_DISK, 16, 16, "boundary", 0.2)
    assert symmetry_residual(CTX, V2, UNIT_DISK, f, sample=40) < 1e-8
    rng = np.random.default_rng(3)
    assert triangle_defect(CTX, V2, UNIT_DISK, rng.uniform(0, 2 * np.pi, (10, 3))) < 1e-8
    r_min = np.sqrt((2 - 0.05) ** 2 - 1)
    chord = np.linalg.norm(f.x - f.zeta[:, None, :], axis=-1)
    assert np.all(f.l[f.converged] >= r_min * chord[f.converged])


def test_interior_grid_shape_and_eikonal():
    f = hodograph_grid(CTX, V1, UNIT_DISK, 8, 8, "interior", 0.2, n_r=4)
    assert f.l.shape[0] == 8 and f.converged.all()
    r = CTX.shell_momentum(V1.value(f.x))
    g = np.linalg.norm(f.grad_x(), axis=-1)
    assert np.abs(g - r[None, :]).max() < 1e-8


def test_grid_rejects_small_or_bandless():
    with pytest.raises(ValidationError):
        hodograph_grid(CTX, V0, UNIT_DISK, 4, 4, "boundary", 0.2)
    with pytest.raises(ValidationError):
        hodograph_grid(CTX, V0, UNIT_DISK, 16, 16, "boundary", 0.0)


def test_mixed_derivative_bounded():
    c = mixed_derivative_probe(CTX, V1, UNIT_DISK, samples=6)
    assert np.isfinite(c) and c < 10.0
