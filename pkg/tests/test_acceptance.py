"""Acceptance criteria at desk scale: n=2, unit disk, E=2, c=1, fixtures F0-F2.

Each test records one PASS/FAIL line that is printed in the pytest terminal
summary (section "acceptance criteria").
"""

import time

import numpy as np
import pytest
from conftest import random_chords, record

from relnewt.boundary import antisymmetry_residual, boundary_grid, solve_boundary_value, solve_many
from relnewt.convert import equivalence_discrepancy, round_trip_from_boundary, round_trip_from_scattering
from relnewt.dynamics import DomainExit, PhaseState, integrate, momentum
from relnewt.fixtures import CTX, UNIT_DISK, V0, V1, V2, single_bump
from relnewt.hodograph import gradient_identity_residual, hodograph_distance, hodograph_grid, winding_angle
from relnewt.inverse import BumpParametrization, converted_scattering_dataset, reconstruct
from relnewt.maupertuis import MetricField, lemma31_residual
from relnewt.scattering import volume_preservation_probe
from relnewt.stability import lhs_integral, phi0_integral, phi1_integral, theorem31_check

SQ3 = np.sqrt(3.0)


def _me_points(rng, m, rho_max=1.0):
    phi = rng.uniform(0, 2 * np.pi, m)
    rho = rng.uniform(-rho_max, rho_max, m)
    u = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    w = np.stack([-u[:, 1], u[:, 0]], axis=1)
    return CTX.free_speed * u, rho[:, None] * w


# -- shared fields ---------------------------------------------------------------

@pytest.fixture(scope="module")
def boundary_fields():
    """Graded boundary fields at 32 and 64 nodes for F0, F1, F2."""
    out = {}
    for name, m in (("F0", V0), ("F1", V1), ("F2", V2)):
        for N in (32, 64):
            out[name, N] = hodograph_grid(CTX, m, UNIT_DISK, N, N, "boundary", 0.2, layout="graded")
    return out


@pytest.fixture(scope="module")
def interior_fields():
    """Interior fields on 32 x (32 x 24) and 64 x (64 x 48) polar grids."""
    out = {}
    for name, m in (("F0", V0), ("F1", V1), ("F2", V2)):
        for nz, npsi, nr in ((32, 32, 24), (64, 64, 48)):
            out[name, nz] = hodograph_grid(CTX, m, UNIT_DISK, nz, npsi, "interior", 0.2, n_r=nr)
    return out


# -- criteria ----------------------------------------------------------------------

def test_criterion_01_free_motion():
    t = time.perf_counter()
    d = solve_boundary_value(CTX, V0, UNIT_DISK, (-1.0, 0.0), (1.0, 0.0))
    l, _, _ = hodograph_distance(CTX, V0, UNIT_DISK, (-1.0, 0.0), (1.0, 0.0))
    dt = time.perf_counter() - t
    es = abs(d.s - 4 / SQ3)
    ek = np.abs(d.k - np.array([SQ3 / 2, 0.0])).max()
    el = abs(l - 2 * SQ3)
    ok = max(es, ek, el) <= 1e-9 and dt < 1.0
    record(1, ok, f"|ds|={es:.1e} |dk|={ek:.1e} |dl|={el:.1e} time={dt:.2f}s")


def test_criterion_02_energy_conservation():
    rng = np.random.default_rng(2)
    t = time.perf_counter()
    worst = 0.0
    for m in (V1, V2):
        t0, t1 = random_chords(rng, 50)
        shot = solve_many(CTX, m, UNIT_DISK, UNIT_DISK.point(t0), UNIT_DISK.point(t1))
        assert shot.converged.all()
        for x0, v0 in zip(shot.start, shot.start_velocity):
            tr = integrate(CTX, m, PhaseState(0.0, x0, momentum(v0, CTX.c)), DomainExit(UNIT_DISK))
            worst = max(worst, tr.max_drift / max(tr.duration, 1e-300))
    dt = time.perf_counter() - t
    record(2, worst <= 1e-9 and dt < 10.0, f"max |H-E| per unit time={worst:.1e} over 100 chords, time={dt:.1f}s")


def test_criterion_03_antisymmetry():
    t = time.perf_counter()
    ds = boundary_grid(CTX, V1, UNIT_DISK, 32, 0.2)
    res = antisymmetry_residual(ds)
    dt = time.perf_counter() - t
    ok = res <= 1e-8 and not ds.failures and dt < 60.0
    record(3, ok, f"max |k0(q0,q)+k(q,q0)|={res:.1e} on {len(ds)} pairs, time={dt:.1f}s")


def test_criterion_04_proposition_equivalence():
    rng = np.random.default_rng(4)
    t = time.perf_counter()
    eq, rt = 0.0, 0.0
    for m in (V1, V2):
        V, X = _me_points(rng, 20)
        eq = max(eq, float(equivalence_discrepancy(CTX, m, UNIT_DISK, V, X).max()))
        rt = max(rt, float(round_trip_from_scattering(CTX, m, UNIT_DISK, V, X).max()))
        t0, t1 = random_chords(rng, 20)
        shot = solve_many(CTX, m, UNIT_DISK, UNIT_DISK.point(t0), UNIT_DISK.point(t1))
        from relnewt.boundary import BoundaryDatum

        data = [BoundaryDatum(shot.start[i], shot.target[i], float(shot.time[i]), shot.exit_velocity[i],
                              shot.start_velocity[i]) for i in range(20)]
        rt = max(rt, float(round_trip_from_boundary(CTX, m, UNIT_DISK, data).max()))
    dt = time.perf_counter() - t
    ok = eq <= 1e-7 and rt <= 1e-8 and dt < 60.0
    record(4, ok, f"converse vs direct={eq:.1e}, round trip={rt:.1e}, time={dt:.1f}s")


def test_criterion_05_maupertuis():
    rng = np.random.default_rng(5)
    dist, speed = 0.0, 0.0
    for m in (V0, V1, V2):
        f = MetricField(m, CTX)
        t0, t1 = random_chords(rng, 20)
        for a, b in zip(t0, t1):
            d, mech, geo = lemma31_residual(CTX, m, UNIT_DISK, UNIT_DISK.point(a), UNIT_DISK.point(b),
                                            return_parts=True)
            dist = max(dist, d)
            speed = max(speed, mech.speed_residual(f), geo.speed_residual(f))
    record(5, dist <= 1e-6 and speed <= 1e-8, f"sup distance={dist:.1e}, unit-speed residual={speed:.1e}")


def test_criterion_06_gradient_identity():
    rng = np.random.default_rng(6)
    res, mag = 0.0, 0.0
    for _ in range(20):
        th = rng.uniform(0, 2 * np.pi)
        r, ps = np.sqrt(rng.uniform(0, 0.8)), rng.uniform(0, 2 * np.pi)
        x = np.array([r * np.cos(ps), r * np.sin(ps)])
        g, rel = gradient_identity_residual(CTX, V1, UNIT_DISK, UNIT_DISK.point(th), x)
        rx = CTX.shell_momentum(V1.value(x[None])[0])
        res = max(res, float(np.abs(g).max()))
        mag = max(mag, rel * rx)
    record(6, res <= 1e-4 and mag <= 1e-4, f"|grad l - p|={res:.1e}, ||grad l| - r|={mag:.1e}")


def test_criterion_07_winding():
    pts = [(0.0, 0.0), (0.3, 0.2), (-0.5, 0.4), (0.1, -0.7), (0.75, 0.1)]
    err = max(abs(winding_angle(CTX, m, UNIT_DISK, x) - 2 * np.pi) for m in (V1, V2) for x in pts)
    record(7, err <= 1e-6, f"max |winding - 2 pi|={err:.1e} over {2 * len(pts)} points")


def test_criterion_08_lemma32(boundary_fields, interior_fields):
    lines, ok = [], True
    for name, m in (("F1", V1), ("F2", V2)):
        p0 = {N: phi0_integral(boundary_fields["F0", N], boundary_fields[name, N], UNIT_DISK) for N in (32, 64)}
        p1 = {N: phi1_integral(interior_fields["F0", N], interior_fields[name, N], MetricField(V0, CTX),
                               MetricField(m, CTX)) for N in (32, 64)}
        gap = abs(p0[64] - p1[64]) / abs(p0[64])
        c0 = abs(p0[32] / p0[64] - 1)
        c1 = abs(p1[32] / p1[64] - 1)
        ok &= gap <= 0.01 and c0 <= 0.02 and c1 <= 0.02
        lines.append(f"(F0,{name}) Phi0={p0[64]:.6g} Phi1={p1[64]:.6g} gap={gap:.1e} "
                     f"self-conv {c0:.1e}/{c1:.1e}")
    record(8, ok, "; ".join(lines))


def test_criterion_09_stability(boundary_fields):
    ok, lines = True, []
    for a, b, ma, mb in (("F0", "F1", V0, V1), ("F1", "F2", V1, V2), ("F0", "F0", V0, V0)):
        bf = boundary_fields
        rep = theorem31_check(ma, mb, CTX, UNIT_DISK, with_phi1=False,
                              fields=(bf[a, 64], bf[b, 64], None, None))
        slack_ok = rep.lhs <= rep.rhs + 1e-3 * abs(rep.rhs) + 1e-14
        ok &= slack_ok
        lines.append(f"({a},{b}) lhs={rep.lhs:.4g} rhs={rep.rhs:.4g}")
    vals = []
    for eps in (1e-3, 2e-3):
        m = single_bump(eps)
        f = hodograph_grid(CTX, m, UNIT_DISK, 32, 32, "boundary", 0.2, layout="graded")
        vals.append((lhs_integral(V0, m, CTX, UNIT_DISK),
                     phi0_integral(boundary_fields["F0", 32], f, UNIT_DISK) / (2 * np.pi)))
    rl = vals[1][0] / vals[0][0]
    rr = vals[1][1] / vals[0][1]
    ok &= abs(rl - 4) <= 0.2 and abs(rr - 4) <= 0.2
    lines.append(f"scaling ratios lhs={rl:.4f} rhs={rr:.4f}")
    record(9, ok, "; ".join(lines))


def test_criterion_10_reconstruction():
    ds = boundary_grid(CTX, V1, UNIT_DISK, 64, 0.2)
    par = BumpParametrization(((0.0, 0.0),), (0.8,))
    rb = reconstruct(ds, par, CTX, UNIT_DISK, truth=V1)
    rs = reconstruct(converted_scattering_dataset(ds, UNIT_DISK), par, CTX, UNIT_DISK, truth=V1)
    eb = abs(rb.params[0] - 0.1)
    es = abs(rs.params[0] - 0.1)
    record(10, eb <= 1e-3 and es <= 2e-3, f"boundary |dA|={eb:.1e}, converted scattering |dA|={es:.1e}")


def test_criterion_11_volume_preservation():
    rng = np.random.default_rng(11)
    V, X = _me_points(rng, 5, rho_max=0.7)
    dets = [volume_preservation_probe(CTX, V1, v, x) for v, x in zip(V, X)]
    err = max(abs(d - 1.0) for d in dets)
    record(11, err <= 1e-4, f"max ||det| - 1|={err:.1e} at 5 points")
