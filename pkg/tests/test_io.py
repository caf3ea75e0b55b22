import numpy as np
import pytest

from relnewt.boundary import boundary_grid
from relnewt.dynamics import DomainExit, integrate, shell_state
from relnewt.errors import SchemaMismatch
from relnewt.fixtures import CTX, UNIT_DISK, V1, V2
from relnewt.hodograph import hodograph_grid
from relnewt.io import (BOUNDARY, read_boundary, read_dataset, read_hodograph, read_scattering, read_trajectory,
                        write_boundary, write_hodograph, write_scattering, write_trajectory)
from relnewt.scattering import scattering_grid


def test_boundary_round_trip_bit_exact(tmp_path):
    ds = boundary_grid(CTX, V2, UNIT_DISK, 8, 0.2)
    write_boundary(ds, tmp_path / "b.csv")
    back = read_boundary(tmp_path / "b.csv", CTX.E, CTX.c)
    for name in ("theta0", "theta1", "q0", "q", "s", "k", "k0", "l"):
        assert np.array_equal(getattr(ds, name), getattr(back, name))
    assert np.array_equal(back.index, ds.index)


def test_scattering_round_trip(tmp_path):
    ds = scattering_grid(CTX, V1, 4, 1.0, 5)
    write_scattering(ds, tmp_path / "s.csv")
    back = read_scattering(tmp_path / "s.csv")
    assert np.array_equal(back.b, ds.b) and np.array_equal(back.chi, ds.chi)
    assert back.chi.dtype.kind == "i"


def test_trajectory_round_trip(tmp_path):
    tr = integrate(CTX, V1, shell_state(CTX, V1, (-1, 0), (1, 0.2)), DomainExit(UNIT_DISK))
    write_trajectory(tr, tmp_path / "t.csv")
    d = read_trajectory(tmp_path / "t.csv")
    assert np.array_equal(d["x"], tr.x) and np.array_equal(d["H"], tr.H)


def test_hodograph_round_trip(tmp_path):
    f = hodograph_grid(CTX, V1, UNIT_DISK, 8, 8, "boundary", 0.2)
    write_hodograph(f, tmp_path / "h.csv", tmp_path / "m.json", V1)
    g = read_hodograph(tmp_path / "h.csv", tmp_path / "m.json", UNIT_DISK)
    assert np.array_equal(f.l, g.l) and np.array_equal(f.k, g.k)


def test_truncated_row_reports_line(tmp_path):
    ds = boundary_grid(CTX, V1, UNIT_DISK, 8, 0.2)
    p = tmp_path / "b.csv"
    write_boundary(ds, p)
    lines = p.read_text().splitlines()
    lines[4] = ",".join(lines[4].split(",")[:-3])
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaMismatch) as exc:
        read_boundary(p)
    assert exc.value.line == 5


def test_unknown_column_rejected(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("theta0,theta1,bogus\n0,1,2\n")
    with pytest.raises(SchemaMismatch):
        read_dataset(p, BOUNDARY)


def test_wrong_schema_rejected(tmp_path):
    ds = scattering_grid(CTX, V1, 4, 1.0, 3)
    write_scattering(ds, tmp_path / "s.csv")
    with pytest.raises(SchemaMismatch):
        read_boundary(tmp_path / "s.csv")
