"""Translation between scattering data and boundary data at fixed energy.

With ``supp V`` inside the domain ``D`` the trajectory is a straight line
before it enters ``D`` and after it leaves, so

* boundary from scattering:  ``q0 = x- + tau-(v-, x-) v-``,
  ``q = b + tau+(a, b) a``, ``k0 = v-``, ``k = a``,
  ``s = tau+(a, b) - tau-(v-, x-)``;
* scattering from boundary:  ``a = k``, ``b = q - k (s + tau-(v-, x-))``.

Here ``tau-`` and ``tau+`` are the first and last times at which a line
meets the boundary of ``D``.
"""

import numpy as np

from .boundary import BoundaryDatum
from .dynamics import fly
from .errors import NoChord, ValidationError
from .model import check_support_inside, ray_intersections_batch
from .scattering import ScatteringDatum, impact_representation, solve_scattering, solve_scattering_batch

SHELL_TOL = 1e-9


def _taus(domain, v, x):
    chi, tm, tp = ray_intersections_batch(domain, np.atleast_2d(v), np.atleast_2d(x))
    return chi, tm, tp


def scattering_to_boundary_batch(domain, v_minus, x_minus, a, b):
    """Vectorized direct construction; returns ``(q0, q, s, k, k0, chi)``.

    Rows with ``chi <= 1`` carry NaN boundary values.
    """
    V = np.atleast_2d(np.asarray(v_minus, float))
    X = np.atleast_2d(np.asarray(x_minus, float))
    A = np.atleast_2d(np.asarray(a, float))
    B = np.atleast_2d(np.asarray(b, float))
    chi, tm, _ = _taus(domain, V, X)
    _, _, tp = _taus(domain, A, B)
    q0 = X + tm[:, None] * V
    q = B + tp[:, None] * A
    s = tp - tm
    return q0, q, s, A.copy(), V.copy(), chi


def scattering_to_boundary(domain, datum):
    """Boundary datum of the chord traced by the scattering datum ``datum``.

    Raises
    ------
    NoChord
        The incoming line meets ``closure(D)`` in at most one point.
    """
    q0, q, s, k, k0, chi = scattering_to_boundary_batch(domain, datum.v_minus, datum.x_minus, datum.a, datum.b)
    if chi[0] <= 1:
        raise NoChord("the incoming asymptote does not cross the domain")
    return BoundaryDatum(q0[0], q[0], float(s[0]), k[0], k0[0])


def scattering_from_datum(domain, datum):
    """Converse formulas applied to a boundary datum: ``(v-, x-, a, b)``.

    ``v- = k0`` and ``x-`` is the impact representation of the entry line.
    """
    v = np.asarray(datum.k0, float)
    x = impact_representation(v, datum.q0)
    chi, tm, _ = _taus(domain, v, x)
    if chi[0] <= 1:
        raise NoChord("entry line is tangent to the domain")
    a = np.asarray(datum.k, float)
    b = np.asarray(datum.q, float) - a * (datum.s + tm[0])
    return ScatteringDatum(v, x, a, b, int(chi[0]))


def _check_shell(ctx, V):
    sp = np.linalg.norm(V, axis=-1)
    if np.any(np.abs(sp - ctx.free_speed) > SHELL_TOL * ctx.free_speed):
        raise ValidationError("incoming velocity is off the energy shell")


def boundary_to_scattering_batch(ctx, model, domain, v_minus, x_minus, *, rtol=None, atol=None):
    """Vectorized converse construction via the forward flight from ``q0``.

    Returns ``(a, b, chi, flight)`` where ``flight`` holds the boundary data
    of the crossing rows (``None`` if no row crosses ``D``).
    """
    V = np.atleast_2d(np.asarray(v_minus, float))
    X = np.atleast_2d(np.asarray(x_minus, float))
    _check_shell(ctx, V)
    check_support_inside(model, domain)
    A, B = V.copy(), X.copy()
    chi, tm, _ = _taus(domain, V, X)
    hit = np.flatnonzero(chi == 2)
    if hit.size == 0:
        return A, B, chi, None
    kw = {k: v for k, v in (("rtol", rtol), ("atol", atol)) if v is not None}
    q0 = X[hit] + tm[hit, None] * V[hit]
    res = fly(ctx, model, domain, q0, V[hit], **kw)
    k = res.exit_velocity
    A[hit] = k
    B[hit] = res.exit_point - k * (res.time + tm[hit])[:, None]
    return A, B, chi, res


def boundary_to_scattering(ctx, model, domain, v_minus, x_minus, boundary_solver=None, **kw):
    """Scattering datum of ``(v-, x-)`` built from boundary data.

    The exit point ``q`` of the unique trajectory entering at ``q0`` with
    velocity ``v-`` is found by forward integration.  When
    ``boundary_solver(q0, q)`` is given it is then used to supply the
    boundary datum (transit time and exit velocity) instead of the flight.
    """
    v = np.asarray(v_minus, float)
    x = np.asarray(x_minus, float)
    A, B, chi, res = boundary_to_scattering_batch(ctx, model, domain, v, x, **kw)
    if chi[0] <= 1 or boundary_solver is None:
        return ScatteringDatum(v, x, A[0], B[0], int(chi[0]))
    q0 = res.start[0]
    datum = boundary_solver(q0, res.exit_point[0])
    _, tm, _ = _taus(domain, v, x)
    a = np.asarray(datum.k, float)
    return ScatteringDatum(v, x, a, np.asarray(datum.q) - a * (datum.s + tm[0]), int(chi[0]))


def equivalence_discrepancy(ctx, model, domain, v_minus, x_minus, *, batched=False, **kw):
    """``max |(a, b)_converse - (a, b)_scattering|`` per point.

    The reference is :func:`solve_scattering` (the single-trajectory
    integrator with event location), which shares no stepping code with the
    batched flight behind the converse construction.  ``batched`` switches
    the reference to :func:`solve_scattering_batch`.
    """
    V = np.atleast_2d(np.asarray(v_minus, float))
    X = np.atleast_2d(np.asarray(x_minus, float))
    A1, B1, _, _ = boundary_to_scattering_batch(ctx, model, domain, V, X, **kw)
    if batched:
        A2, B2, _ = solve_scattering_batch(ctx, model, V, X, **kw)
    else:
        ref = [solve_scattering(ctx, model, v, x, **kw) for v, x in zip(V, X)]
        A2 = np.array([d.a for d in ref])
        B2 = np.array([d.b for d in ref])
    return np.maximum(np.abs(A1 - A2).max(axis=1), np.abs(B1 - B2).max(axis=1))


def round_trip_from_scattering(ctx, model, domain, v_minus, x_minus, **kw):
    """Residual of boundary -> scattering -> boundary for M_E points crossing ``D``.

    The reference boundary datum is the forward flight from ``q0``; the
    round trip applies the direct formulas to the converse output.
    """
    A, B, chi, res = boundary_to_scattering_batch(ctx, model, domain, v_minus, x_minus, **kw)
    V = np.atleast_2d(np.asarray(v_minus, float))
    X = np.atleast_2d(np.asarray(x_minus, float))
    hit = chi == 2
    q0, q, s, k, k0, _ = scattering_to_boundary_batch(domain, V[hit], X[hit], A[hit], B[hit])
    ref = [res.start, res.exit_point, res.time[:, None], res.exit_velocity, res.start_velocity]
    got = [q0, q, s[:, None], k, k0]
    return np.max([np.abs(g - r).max(axis=1) for g, r in zip(got, ref)], axis=0)


def round_trip_from_boundary(ctx, model, domain, data, **kw):
    """Residual of scattering -> boundary for boundary data ``data`` (list of datums).

    Each datum is turned into ``(v-, x-)`` by the converse formulas, its
    scattering image is computed independently, and the direct formulas must
    return the original chord.
    """
    out = []
    sc = [scattering_from_datum(domain, d) for d in data]
    V = np.array([t.v_minus for t in sc])
    X = np.array([t.x_minus for t in sc])
    A, B, _ = solve_scattering_batch(ctx, model, V, X, **kw)
    q0, q, s, k, k0, _ = scattering_to_boundary_batch(domain, V, X, A, B)
    for i, d in enumerate(data):
        out.append(max(np.abs(q0[i] - d.q0).max(), np.abs(q[i] - d.q).max(), abs(s[i] - d.s),
                       np.abs(k[i] - d.k).max(), np.abs(k0[i] - d.k0).max()))
    return np.array(out)
