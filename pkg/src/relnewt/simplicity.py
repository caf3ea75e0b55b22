"""Numerical simplicity diagnostics of ``r_{V,E}|dx|`` and an energy-threshold estimate.

For the conformal metric ``g = r^2 |dx|^2`` on a planar domain:

* the boundary is strictly convex for ``g`` iff ``kappa + d_N log r > 0``
  (``kappa`` the Euclidean curvature, ``N`` the outward normal);
* the Gaussian curvature is ``K = -Delta(log r) / r^2`` and a normal Jacobi
  field along a unit-speed geodesic solves ``j'' + K j = 0``; a zero of
  ``j`` with ``j(0) = 0``, ``j'(0) = 1`` marks a conjugate point.

The energy threshold is bracketed by bisection on the conjunction of these
checks plus unique, well-conditioned shooting on random chords.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .boundary import solve_many
from .dynamics import EnergyContext, fly
from .errors import NonUnique, ThresholdNotFound, ValidationError

_EPS_ANGLE = 0.02


def _log_r_derivatives(model, ctx, x):
    """``(r, grad log r, Delta log r)`` at points ``x``."""
    x = np.atleast_2d(x)
    c2 = ctx.c**2
    V, G, H = model.evaluate(x, order=2)
    g = (ctx.E - V) / c2
    u = g * g - 1.0
    if np.any(u <= 0):
        raise ValidationError("energy is below the shell at some sample point")
    dg = -G / c2
    lap_g = -np.trace(H, axis1=-2, axis2=-1) / c2
    dg2 = np.einsum("...i,...i->...", dg, dg)
    r = ctx.c * np.sqrt(u)
    grad = (g / u)[:, None] * dg
    lap = ((dg2 + g * lap_g) * u - 2.0 * g * g * dg2) / (u * u)
    return r, grad, lap


def gaussian_curvature(model, ctx, x):
    """``K = -Delta(log r) / r^2`` of the Maupertuis metric."""
    r, _, lap = _log_r_derivatives(model, ctx, x)
    return -lap / r**2


def boundary_convexity(model, ctx, domain, samples=64):
    """Minimum over boundary samples of ``kappa + d_N log r``."""
    theta = 2 * np.pi * np.arange(samples) / samples
    x = domain.point(theta)
    _, grad, _ = _log_r_derivatives(model, ctx, x)
    N = domain.outward_normal(x)
    return float(np.min(domain.curvature(theta) + np.einsum("ij,ij->i", grad, N)))


def _inward_directions(domain, theta0, count):
    x0 = domain.point(theta0)
    N = domain.outward_normal(x0[None])[0]
    T = np.array([-N[1], N[0]])
    a = np.linspace(-np.pi / 2 + _EPS_ANGLE, np.pi / 2 - _EPS_ANGLE, count)
    return x0, -np.cos(a)[:, None] * N + np.sin(a)[:, None] * T


def exit_fan_monotone(model, ctx, domain, theta0, count=64, **kw):
    """Whether the exit parameter is strictly monotone over a fan of inward directions at ``theta0``."""
    x0, U = _inward_directions(domain, theta0, count)
    res = fly(ctx, model, domain, np.repeat(x0[None], count, 0), U, **kw)
    th = np.unwrap(domain.parameter(res.exit_point) - theta0)
    d = np.diff(th)
    return bool(np.all(d > 0) or np.all(d < 0))


def jacobi_min(model, ctx, domain, x0, u0, *, rtol=1e-10, atol=1e-12):
    """Minimum of ``j / sigma`` along the geodesic from ``x0`` in direction ``u0`` to the boundary.

    ``j`` is the normal Jacobi field with ``j(0) = 0``, ``j'(0) = 1``; a
    non-positive value means a conjugate point before the exit.
    """
    x0 = np.asarray(x0, float)
    r0 = _log_r_derivatives(model, ctx, x0)[0][0]
    u0 = np.asarray(u0, float) / np.linalg.norm(u0)

    def rhs(s, z):
        y, eta, j, dj = z[:2], z[2:4], z[4], z[5]
        r, gl, lap = _log_r_derivatives(model, ctx, y[None])
        r, gl = r[0], gl[0]
        K = -lap[0] / r**2
        # eta is the g-dual of the unit velocity: dy/ds = eta / r^2
        return np.concatenate([eta / r**2, (eta @ eta) * gl / r**2, [dj, -K * j]])

    def leave(s, z):
        return float(domain.level(z[:2][None])[0]) if s > 1e-9 else -1.0

    leave.terminal = True
    leave.direction = 1
    # stop slightly inside when starting on the boundary
    z0 = np.concatenate([x0, r0 * u0, [0.0, 1.0]])
    diam = 2 * max(domain.radii)
    L = 10.0 * diam * float(np.max(_log_r_derivatives(model, ctx, domain.point(np.linspace(0, 6.3, 64)))[0]))
    sol = solve_ivp(rhs, (0.0, L), z0, method="DOP853", rtol=rtol, atol=atol, events=leave, dense_output=True)
    s = sol.t[sol.t > 0]
    if s.size == 0:
        return 1.0
    ss = np.linspace(s[0], sol.t[-1], 257)[1:]
    j = sol.sol(ss)[4]
    return float(np.min(j / ss))


@dataclass
class SimplicityReport:
    energy: float
    convexity: float
    fan_monotone: bool
    unique: bool
    jacobi_min: float
    passed: bool
    notes: list = field(default_factory=list)


def simplicity_diagnostics(model, domain, c, energy, *, boundary_samples=64, chords=16, fan=64, seed=0, **kw):
    """Run all diagnostics at one energy."""
    ctx = EnergyContext(float(energy), float(c), domain.dimension)
    ctx.validate(model)
    if domain.dimension != 2:
        raise ValidationError("simplicity diagnostics are planar")
    notes = []
    conv = boundary_convexity(model, ctx, domain, boundary_samples)
    rng = np.random.default_rng(seed)
    t0 = rng.uniform(0, 2 * np.pi, chords)
    t1 = t0 + rng.uniform(0.3, 2 * np.pi - 0.3, chords)
    mono = all(exit_fan_monotone(model, ctx, domain, t, fan, **kw) for t in t0[: max(1, chords // 4)])
    unique = True
    try:
        shot = solve_many(ctx, model, domain, domain.point(t0), domain.point(t1), check_unique=True, **kw)
        if not np.all(shot.converged):
            unique = False
            notes.append(f"{int(np.sum(~shot.converged))} chords did not converge")
    except NonUnique as exc:
        unique = False
        notes.append(str(exc))
    jmin = float("inf")
    if unique:
        for i in range(min(chords, len(shot.direction))):
            jmin = min(jmin, jacobi_min(model, ctx, domain, domain.point(t0[i]), shot.direction[i]))
    passed = bool(conv > 0 and mono and unique and jmin > 0)
    return SimplicityReport(float(energy), conv, mono, unique, jmin, passed, notes)


def estimate_energy_threshold(model, domain, c, search_range, *, rel_tol=1e-3, max_bisections=30,
                              return_reports=False, **kw):
    """Smallest sampled energy in ``search_range = (lo, hi]`` at which all diagnostics pass.

    The lower end is clipped to just above ``c^2 + sup V``.  Bisection assumes
    the predicate is monotone in ``E``.

    Raises
    ------
    ThresholdNotFound
        The diagnostics fail at the top of the range.
    """
    lo, hi = map(float, search_range)
    floor = c**2 + max(model.sup_value(), 0.0)
    lo = max(lo, floor)
    if not hi > lo:
        raise ValidationError("search range lies below the energy shell")
    reports = []

    def ok(E):
        rep = simplicity_diagnostics(model, domain, c, E, **kw)
        reports.append(rep)
        return rep.passed

    if not ok(hi):
        raise ThresholdNotFound(f"diagnostics fail at the top of the range E={hi:g}: {reports[-1]}")
    bottom = lo + rel_tol * max(abs(lo), 1.0)
    if ok(bottom):
        hi = bottom
    else:
        a, b = bottom, hi
        for _ in range(max_bisections):
            if b - a <= rel_tol * max(abs(b), 1.0):
                break
            m = 0.5 * (a + b)
            if ok(m):
                b = m
            else:
                a = m
        hi = b
    return (hi, reports) if return_reports else hi
