import numpy as np
import pytest
from conftest import f1_transit_oracle

from relnewt.convert import (boundary_to_scattering, equivalence_discrepancy, round_trip_from_scattering,
                             scattering_to_boundary)
from relnewt.errors import NoChord
from relnewt.fixtures import CTX, UNIT_DISK, V0, V1, V2
from relnewt.scattering import ScatteringDatum, solve_scattering

SQ3 = np.sqrt(3.0)
V = np.array([SQ3 / 2, 0.0])


def test_free_chord_to_boundary():
    d = scattering_to_boundary(UNIT_DISK, ScatteringDatum(V, np.array([0.0, 0.5]), V, np.array([0.0, 0.5]), 2))
    assert np.allclose(d.q0, (-SQ3 / 2, 0.5), atol=1e-15) and np.allclose(d.q, (SQ3 / 2, 0.5), atol=1e-15)
    assert d.s == pytest.approx(2.0, abs=1e-14)
    assert np.array_equal(d.k, V) and np.array_equal(d.k0, V)


def test_f1_head_on_to_boundary():
    d = scattering_to_boundary(UNIT_DISK, solve_scattering(CTX, V1, V, (0.0, 0.0)))
    assert np.allclose(d.q0, (-1, 0), atol=1e-12) and np.allclose(d.q, (1, 0), atol=1e-9)
    assert d.s == pytest.approx(f1_transit_oracle(), abs=1e-9)


def test_no_chord():
    with pytest.raises(NoChord):
        scattering_to_boundary(UNIT_DISK, ScatteringDatum(V, np.array([0.0, 2.0]), V, np.array([0.0, 2.0]), 0))


def test_boundary_to_scattering():
    d = boundary_to_scattering(CTX, V0, UNIT_DISK, V, (0.0, 0.4))
    assert np.allclose(d.a, V, atol=1e-12) and np.allclose(d.b, (0, 0.4), atol=1e-10)
    ref = solve_scattering(CTX, V1, V, (0.0, 0.0))
    d = boundary_to_scattering(CTX, V1, UNIT_DISK, V, (0.0, 0.0))
    assert np.abs(d.a - ref.a).max() < 1e-8 and np.abs(d.b - ref.b).max() < 1e-8
    off = boundary_to_scattering(CTX, V1, UNIT_DISK, V, (0.0, 1.5))
    assert np.array_equal(off.b, (0.0, 1.5))


def test_equivalence_and_round_trip(rng):
    phi = rng.uniform(0, 2 * np.pi, 8)
    u = np.stack([np.cos(phi), np.sin(phi)], 1)
    X = rng.uniform(-0.9, 0.9, 8)[:, None] * np.stack([-u[:, 1], u[:, 0]], 1)
    assert equivalence_discrepancy(CTX, V2, UNIT_DISK, SQ3 / 2 * u, X).max() < 1e-7
    assert round_trip_from_scattering(CTX, V2, UNIT_DISK, SQ3 / 2 * u, X).max() < 1e-8
