"""Fixed-energy trajectories as geodesics of the metric ``r_{V,E}(x) |dx|``.

``r_{V,E}(x) = c sqrt(((E - V(x))/c^2)^2 - 1)`` is the shell momentum, so
the geodesic flow written with the cotangent vector ``eta``

    dy/dsigma = eta / r^2,    deta/dsigma = |eta|^2 grad r / r^3

keeps ``|eta| = r(y)`` (unit metric speed) and ``eta`` coincides with the
mechanical momentum.  The two reparametrizations between time and metric
arclength are

    dt/dsigma = gamma / r^2,    dsigma/dt = c sqrt(1 - gamma^-2) / |dy/dsigma|

with ``gamma = (E - V)/c^2``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate as spi
from scipy import optimize

from .boundary import SHOOT_TOL, shoot, solve_boundary_value
from .dynamics import (DomainExit, FlightResult, PhaseState, Trajectory,
                       integrate, trajectory_length, velocity)
from .errors import BelowShell, LeftDomain, NoConvergence, ValidationError


@dataclass(frozen=True)
class MetricField:
    """Conformal factor ``r_{V,E}`` of the Maupertuis metric."""

    model: object
    ctx: object

    def gamma(self, x):
        return (self.ctx.E - self.model.value(np.atleast_2d(x))) / self.ctx.c**2

    def weight(self, x):
        """``(r, grad r)`` at points ``x`` (shape ``(m, n)``)."""
        x = np.atleast_2d(np.asarray(x, float))
        c = self.ctx.c
        V, G, _ = self.model.evaluate(x)
        g = (self.ctx.E - V) / c**2
        if np.any(g <= 1.0):
            raise BelowShell("E must exceed c^2 + V(x)")
        r = c * np.sqrt(g * g - 1.0)
        return r, -(g / r)[:, None] * G

    def r(self, x):
        return self.weight(x)[0]

    def speed(self, x):
        """Shell speed ``c sqrt(1 - gamma^-2)``."""
        g = self.gamma(x)
        if np.any(g <= 1.0):
            raise BelowShell("E must exceed c^2 + V(x)")
        return self.ctx.c * np.sqrt(1.0 - g**-2)


def metric_weight(field_, x):
    """``r_{V,E}(x)`` and its gradient at a single point."""
    r, g = field_.weight(np.asarray(x, float)[None])
    return float(r[0]), g[0]


# geodesics are traced tighter than trajectories so unit speed holds to 1e-8
GEODESIC_RTOL = 1e-12
GEODESIC_ATOL = 1e-14


@dataclass(frozen=True)
class GeodesicCurve:
    """Samples of a unit-speed geodesic; ``at(sigma)`` interpolates ``(y, dy/dsigma)``."""

    sigma: np.ndarray
    y: np.ndarray
    ydot: np.ndarray
    at: Optional[Callable] = field(default=None, repr=False)

    @property
    def length(self):
        return float(self.sigma[-1] - self.sigma[0])

    def speed_residual(self, field_):
        return float(np.max(np.abs(field_.r(self.y) * np.linalg.norm(self.ydot, axis=1) - 1.0)))


def _geodesic_rhs(field_, n):
    def rhs(s, z):
        y, eta = z[:n], z[n:]
        r, gr = field_.weight(y[None])
        r, gr = r[0], gr[0]
        return np.concatenate([eta / r**2, (eta @ eta) * gr / r**3])
    return rhs


def geodesic_trace(field_, x0, u0, length=None, *, domain=None, rtol=GEODESIC_RTOL, atol=GEODESIC_ATOL,
                   to_boundary=False, max_length=None):
    """Unit-speed geodesic from ``x0`` with initial velocity ``u0``.

    ``u0`` must satisfy ``r(x0) |u0| = 1``.  With ``to_boundary`` the curve
    runs until it leaves ``domain`` (the exit is located on the boundary);
    otherwise it runs for ``length`` and raises :class:`LeftDomain` if it
    leaves the closure of ``domain`` first.
    """
    x0 = np.asarray(x0, float)
    u0 = np.asarray(u0, float)
    n = x0.size
    r0 = field_.r(x0[None])[0]
    if abs(r0 * np.linalg.norm(u0) - 1.0) > 1e-9:
        raise ValidationError("initial velocity must have unit metric speed")
    if length is not None and length < 0:
        raise ValidationError("length must be nonnegative")
    z0 = np.concatenate([x0, r0**2 * u0])
    rhs = _geodesic_rhs(field_, n)
    if to_boundary:
        if domain is None:
            raise ValidationError("to_boundary needs a domain")
        cap = max_length if max_length is not None else 100.0 * float(np.max(domain.radii)) * r0
        s_end = cap
    else:
        s_end = float(length)
    if s_end == 0.0:
        return GeodesicCurve(np.zeros(1), x0[None], u0[None], None)
    solver = spi.DOP853(rhs, 0.0, z0, s_end, rtol=rtol, atol=atol)
    ss, zs, interps = [0.0], [z0], []
    g_old = domain.level(x0) if domain is not None else None
    slack = 1e-12
    while True:
        msg = solver.step()
        if solver.status == "failed":
            raise NoConvergence(f"geodesic integration failed: {msg}")
        dense = solver.dense_output()
        if domain is not None:
            g_new = float(domain.level(solver.y[:n]))
            if g_new > (0.0 if to_boundary else slack) and g_old <= 0.0:
                if not to_boundary:
                    raise LeftDomain("geodesic left the closure of the domain")
                s_hit = optimize.brentq(lambda s: domain.level(dense(s)[:n]), solver.t_old, solver.t,
                                        xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
                if s_hit > ss[-1]:
                    ss.append(s_hit)
                    zs.append(dense(s_hit))
                    interps.append(dense)
                break
            g_old = g_new
        ss.append(solver.t)
        zs.append(solver.y.copy())
        interps.append(dense)
        if solver.status == "finished":
            if to_boundary:
                raise NoConvergence("geodesic did not reach the boundary")
            break
    return _curve(field_, np.array(ss), np.array(zs), interps, n)


def _curve(field_, ss, zs, interps, n):
    sol = spi.OdeSolution(ss, interps) if len(interps) else None
    y = zs[:, :n]
    r = field_.r(y)
    ydot = zs[:, n:] / r[:, None] ** 2

    def at(s):
        z = np.atleast_2d(sol(np.asarray(s, float)).T)
        yy = z[:, :n]
        return yy, z[:, n:] / field_.r(yy)[:, None] ** 2
    return GeodesicCurve(ss, y, ydot, at if sol is not None else None)


def geodesic_flight(field_, domain, starts, directions, **kw):
    """Geodesics from ``starts`` along ``directions`` to the boundary, packed like a flight."""
    starts = np.atleast_2d(np.asarray(starts, float))
    U = np.atleast_2d(np.asarray(directions, float))
    U = U / np.linalg.norm(U, axis=1, keepdims=True)
    m, n = starts.shape
    r0 = field_.r(starts)
    out = {k: np.zeros((m, n)) for k in ("x", "v", "p")}
    L = np.zeros(m)
    err = np.zeros(m)
    for i in range(m):
        cur = geodesic_trace(field_, starts[i], U[i] / r0[i], domain=domain, to_boundary=True, **kw)
        out["x"][i] = cur.y[-1]
        out["v"][i] = cur.ydot[-1]
        out["p"][i] = cur.ydot[-1] * field_.r(cur.y[-1:])[0] ** 2
        L[i] = cur.length
        err[i] = cur.speed_residual(field_)
    return FlightResult(starts, U / r0[:, None], out["x"], out["v"], out["p"], L, L, err, np.ones(m, bool))


def solve_geodesic_bvp(field_, domain, q0, q, *, tol=SHOOT_TOL, **kw):
    """Unit-speed geodesic from boundary point ``q0`` to boundary point ``q``.

    The flights use the geodesic tolerances, tighter than the mechanical
    solver's, so the exit point is resolved well below the shooting
    tolerance.
    """
    q0 = np.asarray(q0, float)
    q = np.asarray(q, float)
    prop = lambda X, U: geodesic_flight(field_, domain, X, U, **kw)  # noqa: E731
    shot = shoot(field_.ctx, field_.model, domain, q0[None], q[None], tol=tol, propagate=prop)
    if not shot.converged[0]:
        raise NoConvergence("geodesic shooting did not converge")
    u = shot.direction[0] / field_.r(q0[None])[0]
    return geodesic_trace(field_, q0, u, domain=domain, to_boundary=True, **kw)


def arclength_reparam(traj, field_, *, rtol=1e-12, atol=1e-14):
    """Reparametrize a trajectory by metric arclength: ``y(sigma) = x(psi(sigma))``.

    Solves ``dpsi/dsigma = gamma / r^2`` along the stored dense output.
    """
    n = traj.x.shape[1]
    t0, t1 = float(traj.t[0]), float(traj.t[-1])
    if t1 == t0 or traj.solution is None:
        return GeodesicCurve(np.zeros(1), traj.x[:1].copy(), np.zeros((1, n)), None)
    c = field_.ctx.c

    def rate(s, psi):
        tt = min(max(psi[0], t0), t1)
        x, _ = traj(np.array([tt]))
        g = field_.gamma(x)[0]
        return [g / (c**2 * (g * g - 1.0))]

    def done(s, psi):
        return psi[0] - t1
    done.terminal = True
    done.direction = 1
    L = trajectory_length(traj, field_.ctx, field_.model)
    sol = spi.solve_ivp(rate, (0.0, 2.0 * L + 1.0), [t0], method="DOP853", rtol=rtol, atol=atol,
                        dense_output=True, events=done)
    s_end = float(sol.t_events[0][0]) if len(sol.t_events[0]) else float(sol.t[-1])
    psi_of = sol.sol

    def at(s):
        s = np.atleast_1d(np.asarray(s, float))
        tt = np.clip(psi_of(s)[0], t0, t1)
        x, p = traj(tt)
        v = velocity(p, c)
        # dy/dsigma = v dpsi/dsigma
        g = field_.gamma(x)
        return x, v * (g / (c**2 * (g * g - 1.0)))[:, None]

    sig = np.append(sol.t[sol.t < s_end], s_end)
    y, ydot = at(sig)
    return GeodesicCurve(sig, y, ydot, at)


def time_reparam(curve, field_, *, t0=0.0, rtol=1e-12, atol=1e-14):
    """Inverse of :func:`arclength_reparam`: shell-speed time parametrization.

    Solves ``dsigma/dt = c sqrt(1 - gamma^-2) / |dy/dsigma|``.
    """
    ctx = field_.ctx
    c = ctx.c
    n = curve.y.shape[1]
    L = curve.length
    if L == 0.0 or curve.at is None:
        x = curve.y[:1]
        p = np.zeros((1, n))
        H = np.array([c**2 + field_.model.value(x)[0]])
        return Trajectory(np.array([t0]), x.copy(), p, H, ctx.E, c, None)

    def rate(t, s):
        y, yd = curve.at(np.clip(s, 0.0, L))
        return [field_.speed(y)[0] / np.linalg.norm(yd[0])]

    def done(t, s):
        return s[0] - L
    done.terminal = True
    done.direction = 1
    sp_min = float(field_.speed(curve.y).min())
    T = 2.0 * L / (float(field_.r(curve.y).min()) * sp_min) + 1.0
    sol = spi.solve_ivp(rate, (t0, t0 + T), [0.0], method="DOP853", rtol=rtol, atol=atol, dense_output=True,
                        events=done)
    t_end = float(sol.t_events[0][0]) if len(sol.t_events[0]) else float(sol.t[-1])
    t = np.append(sol.t[sol.t < t_end], t_end)
    s = np.clip(sol.sol(t)[0], 0.0, L)
    y, yd = curve.at(s)
    sp = field_.speed(y)
    v = yd * (sp / np.linalg.norm(yd, axis=1))[:, None]
    p = v / np.sqrt(1.0 - np.sum(v * v, axis=1, keepdims=True) / c**2)
    H = c**2 * np.sqrt(1.0 + np.sum(p * p, axis=1) / c**2) + field_.model.value(y)
    return Trajectory(t, y, p, H, ctx.E, c, None)


def mechanical_trajectory(ctx, model, domain, q0, q, **kw):
    """Dense trajectory of the boundary value problem ``q0 -> q``."""
    d = solve_boundary_value(ctx, model, domain, q0, q, **kw)
    p0 = d.k0 / np.sqrt(1.0 - d.k0 @ d.k0 / ctx.c**2)
    return integrate(ctx, model, PhaseState(0.0, np.asarray(q0, float), p0), DomainExit(domain))


def lemma31_residual(ctx, model, domain, q0, q, *, samples=257, return_parts=False):
    """Sup distance between the arclength-reparametrized trajectory and the geodesic ``q0 -> q``.

    Both curves are sampled at the same arclength values (of the mechanical
    trajectory's arclength range, clipped to the shorter of the two).
    """
    field_ = MetricField(model, ctx)
    traj = mechanical_trajectory(ctx, model, domain, q0, q)
    mech = arclength_reparam(traj, field_)
    geo = solve_geodesic_bvp(field_, domain, q0, q)
    L = min(mech.length, geo.length)
    s = np.linspace(0.0, L, samples)
    ym, _ = mech.at(s)
    yg, _ = geo.at(s)
    res = float(np.max(np.linalg.norm(ym - yg, axis=1)))
    if return_parts:
        return res, mech, geo
    return res
