"""CSV datasets with fixed schemas and 17-significant-digit floats.

Every file has a mandatory header.  Readers check the header against the
schema (unknown or missing columns are rejected), parse every row and
report the offending line number on failure.
"""

import csv
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .boundary import BoundaryDataset
from .dynamics import export_trajectory_csv
from .errors import SchemaMismatch
from .scattering import ScatteringDataset


def _vec(name, n, sep="_"):
    return [f"{name}{sep}{i + 1}" for i in range(n)]


@dataclass(frozen=True)
class Schema:
    """Column layout as a function of the dimension ``n``."""

    name: str
    groups: tuple            # (column group, width) with width "1", "n" or "n-1"
    integer: tuple = ()
    optional: tuple = ()     # groups that may be absent
    sep: str = "_"

    def columns(self, n, present=None):
        cols = []
        for g, w in self.groups:
            if present is not None and g in self.optional and g not in present:
                continue
            if w == "1":
                cols.append(g)
            else:
                m = n if w == "n" else n - 1
                cols += _vec(g, m, self.sep) if (w == "n" or n > 2) else [g]
        return cols

    def match(self, header):
        """Dimension and present optional groups for ``header``; raises on mismatch."""
        for n in (2, 3):
            opts = [()]
            for g in self.optional:
                opts = opts + [o + (g,) for o in opts]
            for o in opts:
                if header == self.columns(n, set(o)):
                    return n, set(o)
        raise SchemaMismatch(f"header does not match the {self.name} schema: {header}", 1)


BOUNDARY = Schema("boundary", (("theta0", "1"), ("theta1", "1"), ("q0", "n"), ("q", "n"), ("s", "1"),
                               ("k", "n"), ("k0", "n"), ("l", "1")))
SCATTERING = Schema("scattering", (("phi", "n-1"), ("rho", "n-1"), ("vminus", "n"), ("xminus", "n"),
                                   ("a", "n"), ("b", "n"), ("chi", "1")), integer=("chi",))
HODOGRAPH_BOUNDARY = Schema("hodograph", (("theta_zeta", "1"), ("theta_x", "1"), ("l", "1"), ("k", "n"),
                                          ("k0", "n")), optional=("k0",))
HODOGRAPH_INTERIOR = Schema("hodograph", (("theta_zeta", "1"), ("x", "n"), ("l", "1"), ("k", "n"),
                                          ("k0", "n")), optional=("k0",))
TRAJECTORY = Schema("trajectory", (("t", "1"), ("x", "n"), ("p", "n"), ("H", "1")), sep="")

SCHEMAS = {s.name: s for s in (BOUNDARY, SCATTERING, TRAJECTORY)}


def _fmt(v, integer):
    return str(int(v)) if integer else f"{float(v):.17g}"


def write_dataset(path, schema, columns, n):
    """Write ``columns`` (group name -> array of shape ``(m,)`` or ``(m, w)``)."""
    present = set(columns)
    cols = schema.columns(n, present)
    blocks, flags = [], []
    for g, w in schema.groups:
        if g in schema.optional and g not in present:
            continue
        a = np.asarray(columns[g])
        a = a.reshape(len(a), -1)
        blocks.append(a)
        flags += [g in schema.integer] * a.shape[1]
    data = np.concatenate([b.astype(float) for b in blocks], axis=1) if blocks else np.zeros((0, 0))
    if data.shape[1] != len(cols):
        raise SchemaMismatch(f"{schema.name}: {data.shape[1]} values for {len(cols)} columns", 0)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for row in data:
            fh.write(",".join(_fmt(v, f) for v, f in zip(row, flags)) + "\n")


def read_dataset(path, schema):
    """Read a CSV into ``(columns, n)``; raises :class:`SchemaMismatch` with a line number."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaMismatch(f"{path}: empty file, header missing", 1)
    header = [h.strip() for h in rows[0]]
    n, present = schema.match(header)
    width = len(header)
    vals = np.empty((len(rows) - 1, width))
    for ln, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise SchemaMismatch(f"{path}: line {ln} has {len(row)} fields, expected {width}", ln)
        try:
            vals[ln - 2] = [float(v) for v in row]
        except ValueError as exc:
            raise SchemaMismatch(f"{path}: line {ln}: {exc}", ln) from None
    out, col = {}, 0
    for g, w in schema.groups:
        if g in schema.optional and g not in present:
            continue
        m = 1 if w == "1" else (n if w == "n" else n - 1)
        block = vals[:, col:col + m]
        col += m
        v = block[:, 0] if m == 1 else block
        out[g] = v.astype(int) if g in schema.integer else v
    return out, n


# -- typed wrappers ------------------------------------------------------------

def write_boundary(dataset, path):
    n = dataset.q0.shape[1]
    write_dataset(path, BOUNDARY, {"theta0": dataset.theta0, "theta1": dataset.theta1, "q0": dataset.q0,
                                   "q": dataset.q, "s": dataset.s, "k": dataset.k, "k0": dataset.k0,
                                   "l": dataset.l}, n)


def _ranks(a):
    u, inv = np.unique(a, return_inverse=True)
    return inv


def read_boundary(path, energy=float("nan"), c=float("nan")):
    """Read ``boundary.csv``; grid indices are the ranks of the boundary parameters."""
    d, _ = read_dataset(path, BOUNDARY)
    index = np.stack([_ranks(d["theta0"]), _ranks(d["theta1"])], axis=1) if len(d["s"]) else np.zeros((0, 2), int)
    return BoundaryDataset(d["theta0"], d["theta1"], d["q0"], d["q"], d["s"], d["k"], d["k0"], d["l"],
                           index, energy, c, [])


def write_scattering(dataset, path):
    n = dataset.v_minus.shape[1]
    write_dataset(path, SCATTERING, {"phi": dataset.phi, "rho": dataset.rho, "vminus": dataset.v_minus,
                                     "xminus": dataset.x_minus, "a": dataset.a, "b": dataset.b,
                                     "chi": dataset.chi}, n)


def read_scattering(path):
    d, _ = read_dataset(path, SCATTERING)
    return ScatteringDataset(d["phi"], d["rho"], d["vminus"], d["xminus"], d["a"], d["b"], d["chi"])


write_trajectory = export_trajectory_csv


def read_trajectory(path):
    d, _ = read_dataset(path, TRAJECTORY)
    return d


def model_hash(model):
    """Short stable hash of a potential (bump list)."""
    s = json.dumps([[list(b.center), b.amplitude, b.radius] for b in model.bumps])
    return hashlib.sha256(s.encode()).hexdigest()[:16]


def write_hodograph(fld, path, meta_path, model=None):
    """Write ``hodograph.csv`` (one row per node, rows then columns) and ``field_meta.json``.

    ``k0`` columns are included so that the boundary-side derivatives can
    be rebuilt without re-solving.
    """
    nz, M = fld.l.shape
    tz = np.repeat(fld.theta_zeta, M)
    cols = {"theta_zeta": tz, "l": fld.l.ravel(), "k": fld.k.reshape(-1, 2), "k0": fld.k0.reshape(-1, 2)}
    if fld.target == "boundary":
        cols["theta_x"] = fld.theta_x.ravel()
        write_dataset(path, HODOGRAPH_BOUNDARY, cols, 2)
    else:
        cols["x"] = np.tile(fld.x, (nz, 1))
        write_dataset(path, HODOGRAPH_INTERIOR, cols, 2)
    meta = dict(fld.meta)
    meta["failures"] = [list(f) for f in fld.failures]
    if model is not None:
        meta["fixture_hash"] = model_hash(model)
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def read_hodograph(path, meta_path, domain):
    """Rebuild a :class:`~relnewt.hodograph.HodographField` from its CSV and metadata."""
    from .hodograph import HodographField, boundary_offsets, polar_grid

    with open(meta_path) as fh:
        meta = json.load(fh)
    target = meta["target"]
    schema = HODOGRAPH_BOUNDARY if target == "boundary" else HODOGRAPH_INTERIOR
    d, _ = read_dataset(path, schema)
    nz = int(meta["n_zeta"])
    if len(d["l"]) % nz:
        raise SchemaMismatch(f"{path}: {len(d['l'])} rows do not fill {nz} boundary rows", len(d["l"]) + 1)
    M = len(d["l"]) // nz
    theta = 2 * np.pi * np.arange(nz) / nz
    if not np.allclose(d["theta_zeta"].reshape(nz, M)[:, 0], theta, rtol=0, atol=1e-13):
        raise SchemaMismatch(f"{path}: theta_zeta does not match the metadata grid", 2)
    k = d["k"].reshape(nz, M, 2)
    k0 = d["k0"].reshape(nz, M, 2) if "k0" in d else np.full_like(k, np.nan)
    l = d["l"].reshape(nz, M)
    conv = np.isfinite(l)
    if target == "boundary":
        beta, w, band = boundary_offsets(meta["n_beta"], meta["delta"], meta["layout"], meta["band_nodes"])
        tx = d["theta_x"].reshape(nz, M)
        return HodographField(target, theta, domain.point(theta), domain.point(tx), tx, beta, w, l, k, k0, conv,
                              float(meta["delta"]), float(meta["energy"]), float(meta["c"]), band, meta,
                              [tuple(f) for f in meta.get("failures", [])])
    pts, w, _, _ = polar_grid(domain, meta["n_psi"], meta["n_r"])
    return HodographField(target, theta, domain.point(theta), pts, None, None, w, l, k, k0, conv,
                          float(meta["delta"]), float(meta["energy"]), float(meta["c"]), None, meta,
                          [tuple(f) for f in meta.get("failures", [])])
