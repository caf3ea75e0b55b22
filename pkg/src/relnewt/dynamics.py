"""Relativistic Hamiltonian flow ``H(p, x) = c^2 sqrt(1 + |p|^2/c^2) + V(x)``.

Two integrators live here:

* :func:`integrate` follows a single trajectory with scipy's DOP853 stepper,
  keeps the dense output, records the energy drift and locates terminal
  events by bracketing plus Brent refinement on the interpolant.
* :func:`fly` pushes a batch of shell trajectories from given points and
  directions to the boundary of a domain.  Outside the support ball of the
  potential the motion is free, so only the transit through that ball is
  integrated (a vectorized DOP853 with per-trajectory step control); the
  remaining straight segments are solved in closed form.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate as spi
from scipy import optimize

from .errors import BelowShell, EventNotFound, StepFailure, TrappedOrbit, ValidationError
from .model import ball_domain, ray_intersections_batch

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12


@dataclass(frozen=True)
class EnergyContext:
    """Total energy ``E``, speed of light ``c`` and dimension ``n``.

    Pass ``model`` to validate ``E > c**2 + sup V`` at construction.
    """

    E: float
    c: float = 1.0
    n: int = 2
    model: Optional[object] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.c <= 0:
            raise ValidationError("c must be positive")
        if self.n not in (2, 3):
            raise ValidationError("dimension must be 2 or 3")
        if self.E <= self.c**2:
            raise BelowShell(f"E={self.E} does not exceed the rest energy c^2={self.c**2}")
        if self.model is not None:
            self.validate(self.model)

    def validate(self, model):
        if model.dimension != self.n:
            raise ValidationError("potential dimension does not match the energy context")
        top = self.c**2 + model.sup_value()
        if self.E <= top:
            raise BelowShell(f"E={self.E} must exceed c^2 + sup V = {top}")

    @property
    def free_speed(self):
        """Shell speed where ``V = 0``: ``c sqrt(1 - (c^2/E)^2)``."""
        return self.c * np.sqrt(1.0 - (self.c**2 / self.E) ** 2)

    @property
    def free_momentum(self):
        return self.c * np.sqrt((self.E / self.c**2) ** 2 - 1.0)

    def gamma(self, V):
        return (self.E - np.asarray(V, float)) / self.c**2

    def shell_speed(self, V):
        g = self.gamma(V)
        if np.any(g <= 1.0):
            raise BelowShell("energy below c^2 + V")
        return self.c * np.sqrt(1.0 - g**-2)

    def shell_momentum(self, V):
        g = self.gamma(V)
        if np.any(g <= 1.0):
            raise BelowShell("energy below c^2 + V")
        return self.c * np.sqrt(g * g - 1.0)


@dataclass(frozen=True)
class PhaseState:
    t: float
    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))


def velocity(p, c=1.0):
    """``dH/dp = p / sqrt(1 + |p|^2/c^2)``."""
    p = np.asarray(p, dtype=float)
    return p / np.sqrt(1.0 + np.sum(p * p, axis=-1, keepdims=True) / c**2)


def momentum(v, c=1.0):
    v = np.asarray(v, dtype=float)
    s2 = np.sum(v * v, axis=-1, keepdims=True) / c**2
    if np.any(s2 >= 1.0):
        raise ValidationError("speed must stay below c")
    return v / np.sqrt(1.0 - s2)


def hamiltonian(ctx, model, state):
    p = np.asarray(state.p, float)
    return ctx.c**2 * np.sqrt(1.0 + p @ p / ctx.c**2) + model.value(np.asarray(state.x)[None])[0]


def shell_state(ctx, model, x, direction, t=0.0):
    """Phase state at ``x`` moving along ``direction`` with energy ``ctx.E``."""
    x = np.asarray(x, float)
    u = np.asarray(direction, float)
    u = u / np.linalg.norm(u)
    pmag = ctx.shell_momentum(model.value(x[None])[0])
    return PhaseState(t, x, pmag * u)


# -- stop conditions ---------------------------------------------------------

@dataclass(frozen=True)
class TimeReached:
    t: float


@dataclass(frozen=True)
class DomainExit:
    """Outward crossing of ``domain``'s boundary."""

    domain: object


@dataclass(frozen=True)
class SupportExit:
    """Outward crossing of the support ball of ``model``."""

    model: object


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    p: np.ndarray
    H: np.ndarray
    energy: float
    c: float
    solution: Optional[spi.OdeSolution] = field(default=None, repr=False)

    @property
    def n_samples(self):
        return len(self.t)

    @property
    def duration(self):
        return float(self.t[-1] - self.t[0])

    @property
    def max_drift(self):
        return float(np.max(np.abs(self.H - self.energy)))

    @property
    def final(self):
        return PhaseState(float(self.t[-1]), self.x[-1], self.p[-1])

    @property
    def velocity(self):
        return velocity(self.p, self.c)

    def __call__(self, t):
        """Dense ``(x, p)`` at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        if self.solution is None:
            if np.all(t == self.t[0]):
                return np.broadcast_to(self.x[0], t.shape + self.x[0].shape), \
                    np.broadcast_to(self.p[0], t.shape + self.p[0].shape)
            raise ValueError("trajectory has no dense output")
        y = self.solution(t)
        n = self.x.shape[1]
        return np.moveaxis(y[:n], 0, -1), np.moveaxis(y[n:2 * n], 0, -1)


def _event_function(stop, n):
    if isinstance(stop, DomainExit):
        return lambda y: stop.domain.level(y[:n])
    if isinstance(stop, SupportExit):
        ball = stop.model.support_ball()
        if ball is None:
            raise ValidationError("the zero potential has no support to exit")
        c0, r = ball
        return lambda y: (np.sum((y[:n] - c0) ** 2) - r * r) / (r * r)
    return None


def integrate(ctx, model, start, stop, *, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, t_max=None,
              max_steps=200000):
    """Integrate Hamilton's equations from ``start`` until ``stop`` fires.

    ``stop`` is a :class:`TimeReached`, :class:`DomainExit` or
    :class:`SupportExit`.  Outward crossings are bracketed between accepted
    steps and refined with Brent's method on the dense output, so the final
    sample lies on the event surface to round-off.  ``t_max`` bounds the
    search for boundary events (default: 100 time units past the start).
    """
    n = model.dimension
    c = ctx.c
    x0 = np.asarray(start.x, float)
    p0 = np.asarray(start.p, float)
    if np.any(np.abs(velocity(p0, c)) >= c) and np.linalg.norm(velocity(p0, c)) >= c:
        raise ValidationError("initial speed must be below c")
    energy = float(hamiltonian(ctx, model, start))
    t0 = float(start.t)

    def rhs(t, y):
        x, p = y[:n], y[n:]
        grad = model.evaluate(x[None])[1][0]
        return np.concatenate([p / np.sqrt(1.0 + p @ p / c**2), -grad])

    def ham(y):
        p = y[n:]
        return c**2 * np.sqrt(1.0 + p @ p / c**2) + model.value(y[:n][None])[0]

    y0 = np.concatenate([x0, p0])
    if isinstance(stop, TimeReached):
        t_end = float(stop.t)
        if t_end < t0:
            raise ValidationError("stop time precedes the start")
        event = None
    else:
        t_end = t0 + (100.0 if t_max is None else float(t_max))
        event = _event_function(stop, n)

    ts, ys, interps = [t0], [y0], []
    if t_end == t0:
        return _trajectory(ts, ys, interps, energy, c, ham)
    if event is not None:
        g0 = event(y0)
        # starting on the surface and heading outward terminates immediately
        if g0 >= 0 and np.dot(_event_grad(stop, y0, n), velocity(p0, c)) > 0:
            return _trajectory(ts, ys, interps, energy, c, ham)

    solver = spi.DOP853(rhs, t0, y0, t_end, rtol=rtol, atol=atol)
    resume = None
    g_old = event(y0) if event is not None else None
    for _ in range(max_steps):
        if solver.status == "finished" and resume is not None:
            solver = spi.DOP853(rhs, solver.t, solver.y, t_end, rtol=rtol, atol=atol,
                                first_step=min(resume, t_end - solver.t))
            resume = None
        y_prev = solver.y.copy()
        msg = solver.step()
        if solver.status == "failed":
            raise StepFailure(f"integration failed at t={solver.t}: {msg}")
        dense = solver.dense_output()
        t_rim = _rim_time(model, dense, solver.t_old, solver.t, y_prev[None, :n], solver.y[None, :n])
        if t_rim is not None:
            # redo the step so that it ends on the rim of a bump
            resume = solver.t - solver.t_old if resume is None else resume
            solver = spi.DOP853(rhs, solver.t_old, y_prev, t_rim, rtol=rtol, atol=atol,
                                first_step=t_rim - solver.t_old)
            continue
        if event is not None:
            g_new = event(solver.y)
            if g_old <= 0.0 < g_new:
                t_hit = optimize.brentq(lambda s: event(dense(s)), solver.t_old, solver.t,
                                        xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
                if t_hit <= ts[-1]:
                    # the previous step already landed on the surface
                    return _trajectory(ts, ys, interps, energy, c, ham)
                y_hit = dense(t_hit)
                ts.append(t_hit)
                ys.append(y_hit)
                interps.append(dense)
                return _trajectory(ts, ys, interps, energy, c, ham)
            g_old = g_new
        ts.append(solver.t)
        ys.append(solver.y.copy())
        interps.append(dense)
        if solver.status == "finished" and resume is None:
            if event is not None:
                raise EventNotFound(f"stop condition not met before t={t_end}")
            return _trajectory(ts, ys, interps, energy, c, ham)
    raise StepFailure("maximum number of steps exceeded")


def _rim_time(model, dense, t0, t1, x0, x1):
    """Time inside ``[t0, t1]`` where the step crosses a bump rim, or None."""
    theta = _rim_fraction(model, x0, x1)[0]
    if not (_RIM_SKIP < theta < 1.0 - _RIM_SKIP):
        return None
    n = x0.shape[1]
    best = None
    for b in model.bumps:
        if b.amplitude == 0.0:
            continue
        cb = np.asarray(b.center)
        w = lambda s: 1.0 - np.sum((dense(s)[:n] - cb) ** 2) / b.radius**2  # noqa: E731
        wa, wb = 1.0 - np.sum((x0[0] - cb) ** 2) / b.radius**2, 1.0 - np.sum((x1[0] - cb) ** 2) / b.radius**2
        if (wa > 0) == (wb > 0):
            continue
        ts = optimize.brentq(w, t0, t1, xtol=1e-15 * max(1.0, abs(t1)), maxiter=200)
        if best is None or ts < best:
            best = ts
    if best is None or not (t0 < best < t1):
        return None
    return best


def _event_grad(stop, y, n):
    x = y[:n]
    if isinstance(stop, DomainExit):
        return stop.domain.level_gradient(x)
    c0, _ = stop.model.support_ball()
    return x - c0


def _trajectory(ts, ys, interps, energy, c, ham):
    ys = np.array(ys)
    n = ys.shape[1] // 2
    H = np.array([ham(y) for y in ys])
    sol = spi.OdeSolution(np.array(ts), interps) if interps else None
    return Trajectory(np.array(ts), ys[:, :n], ys[:, n:], H, energy, c, sol)


def trajectory_length(traj, ctx, model, nodes=8):
    """``int r_{V,E}(x)|dx/dt| dt`` by Gauss-Legendre on every step interval."""
    if traj.n_samples < 2:
        return 0.0
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    a, b = traj.t[:-1], traj.t[1:]
    tt = (0.5 * (b - a)[:, None] * gx + 0.5 * (a + b)[:, None]).ravel()
    x, p = traj(tt)
    V = model.value(x)
    r = ctx.shell_momentum(V)
    speed = np.linalg.norm(velocity(p, ctx.c), axis=-1)
    vals = (r * speed).reshape(len(a), nodes)
    return float(np.sum(0.5 * (b - a) * (vals @ gw)))


def export_trajectory_csv(traj, path):
    """Write columns ``t, x1..xn, p1..pn, H`` with 17 significant digits."""
    n = traj.x.shape[1]
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)] + ["H"]
    data = np.column_stack([traj.t, traj.x, traj.p, traj.H])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


# -- batched transit through the support ball --------------------------------

_RK = spi.DOP853
_A = np.asarray(_RK.A[:12, :12])
_B = np.asarray(_RK.B)
_CN = np.asarray(_RK.C[:12])
_E3 = np.asarray(_RK.E3)
_E5 = np.asarray(_RK.E5)


_RIM_SKIP = 1e-6


def _rim_fraction(model, x0, x1):
    """Fraction of the segment ``x0 -> x1`` at which it first crosses a bump rim.

    Linear interpolation of ``1 - |x - x_b|^2/rho_b^2``; 1.0 where no rim is
    crossed.
    """
    C, _, IR2 = model._arrays
    if IR2.size == 0:
        return np.ones(x0.shape[0])
    w0 = 1.0 - np.sum((x0[:, None, :] - C) ** 2, axis=2) * IR2
    w1 = 1.0 - np.sum((x1[:, None, :] - C) ** 2, axis=2) * IR2
    cross = (w0 > 0) != (w1 > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(cross, w0 / (w0 - w1), 1.0)
    return np.clip(frac, 0.0, 1.0).min(axis=1)


def _transit_rhs(model, c, n):
    def f(Y, E):
        x, p = Y[:, :n], Y[:, n:2 * n]
        V, G, _ = model.evaluate(x)
        gam = np.sqrt(1.0 + np.einsum("ij,ij->i", p, p) / c**2)
        v = p / gam[:, None]
        g = (E - V) / c**2
        r = c * np.sqrt(np.maximum(g * g - 1.0, 0.0))
        speed = np.sqrt(np.einsum("ij,ij->i", v, v))
        out = np.empty_like(Y)
        out[:, :n] = v
        out[:, n:2 * n] = -G
        out[:, 2 * n] = r * speed
        return out
    return f


def transit(model, c, X, P, E, *, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, t_max=None,
            max_steps=100000):
    """Integrate states on or inside the support ball until each one leaves it.

    Every trajectory carries its own adaptive DOP853 step.  Returns the
    states ``(X, P)`` at the first accepted step outside the ball (where the
    motion is already free), the elapsed times and the metric length
    ``int r |dx/dt| dt`` accumulated so far.
    """
    X = np.atleast_2d(np.asarray(X, float))
    P = np.atleast_2d(np.asarray(P, float))
    m, n = X.shape
    E = np.broadcast_to(np.asarray(E, float), (m,)).copy()
    ball = model.support_ball()
    if ball is None or m == 0:
        return X.copy(), P.copy(), np.zeros(m), np.zeros(m)
    cb, R = ball
    f = _transit_rhs(model, c, n)
    Y = np.concatenate([X, P, np.zeros((m, 1))], axis=1)
    F = f(Y, E)
    speed0 = np.linalg.norm(F[:, :n], axis=1)
    gmin = (float(E.min()) - max(model.sup_value(), 0.0)) / c**2
    vmin = c * np.sqrt(max(1.0 - gmin**-2, 0.0)) if gmin > 1.0 else 0.0
    vmin = max(min(vmin, float(speed0.min())), 1e-6 * c)
    if t_max is None:
        # worst case over the whole ball: slowest shell speed inside it
        t_max = 10.0 * 2.0 * R / vmin
    t = np.zeros(m)
    h = np.full(m, 0.05 * 2.0 * R / max(float(speed0.max()), 1e-12))
    rejected = np.zeros(m, dtype=bool)
    resume = np.full(m, np.nan)
    active = np.ones(m, dtype=bool)
    d = Y.shape[1]
    for _ in range(max_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        y = Y[idx]
        hh = h[idx]
        Ei = E[idx]
        K = np.empty((13, idx.size, d))
        K[0] = F[idx]
        for s in range(1, 12):
            dy = np.tensordot(_A[s, :s], K[:s], axes=1) * hh[:, None]
            K[s] = f(y + dy, Ei)
        y_new = y + hh[:, None] * np.tensordot(_B, K[:12], axes=1)
        # land on bump rims instead of stepping across the C^2 kink
        theta = _rim_fraction(model, y[:, :n], y_new[:, :n])
        cut = (theta > _RIM_SKIP) & (theta < 1.0 - _RIM_SKIP)
        if np.any(cut):
            ci = idx[cut]
            resume[ci] = np.where(np.isnan(resume[ci]), hh[cut], resume[ci])
            h[ci] = hh[cut] * theta[cut]
            keep = ~cut
            if not np.any(keep):
                continue
            idx, y, hh, Ei, K = idx[keep], y[keep], hh[keep], Ei[keep], K[:, keep]
            y_new = y_new[keep]
        f_new = f(y_new, Ei)
        K[12] = f_new
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        e5 = np.sum((np.tensordot(_E5, K, axes=1) / scale) ** 2, axis=1)
        e3 = np.sum((np.tensordot(_E3, K, axes=1) / scale) ** 2, axis=1)
        denom = e5 + 0.01 * e3
        with np.errstate(divide="ignore", invalid="ignore"):
            err = np.where(denom > 0, hh * e5 / np.sqrt(denom * d), 0.0)
            factor = np.where(err > 0, 0.9 * err ** (-1.0 / 8.0), 10.0)
        ok = err < 1.0
        grow = np.minimum(10.0, factor)
        grow = np.where(rejected[idx], np.minimum(1.0, grow), grow)
        h_next = np.where(ok, hh * grow, hh * np.maximum(0.2, factor))
        back = ok & ~np.isnan(resume[idx])
        h_next = np.where(back, np.minimum(np.nan_to_num(resume[idx]), hh * 10.0 ** 8), h_next)
        resume[idx[back]] = np.nan
        h[idx] = h_next
        rejected[idx] = ~ok
        acc = idx[ok]
        Y[acc] = y_new[ok]
        F[acc] = f_new[ok]
        t[acc] += hh[ok]
        if np.any(h[idx] < 1e-14 * np.maximum(t[idx], 1.0)):
            raise StepFailure("step size underflow in batched transit")
        rel = Y[acc, :n] - cb
        out = (np.einsum("ij,ij->i", rel, rel) > R * R) & (np.einsum("ij,ij->i", rel, F[acc, :n]) > 0)
        active[acc[out]] = False
        if np.any(t[active] > t_max):
            raise TrappedOrbit("trajectory did not leave the support ball before t_max")
    else:
        raise StepFailure("maximum number of steps exceeded in batched transit")
    return Y[:, :n], Y[:, n:2 * n], t, Y[:, 2 * n]


@dataclass(frozen=True)
class FlightResult:
    """Batch of shell trajectories from ``start`` to the domain boundary."""

    start: np.ndarray
    start_velocity: np.ndarray
    exit_point: np.ndarray
    exit_velocity: np.ndarray
    exit_momentum: np.ndarray
    time: np.ndarray
    length: np.ndarray
    energy_error: np.ndarray
    hit: np.ndarray


def _fast_path_ok(model, domain):
    ball = model.support_ball()
    if ball is None:
        return True
    return domain.contains_ball(ball[0], ball[1], 1e-9)


def fly(ctx, model, domain, starts, directions, *, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
        chunk=4096):
    """Shoot shell trajectories from points of ``closure(domain)`` to its boundary.

    ``directions`` need not be normalized.  When the support ball lies
    inside the domain, only the transit through the ball is integrated;
    otherwise each trajectory falls back to :func:`integrate`.
    """
    starts = np.atleast_2d(np.asarray(starts, float))
    U = np.atleast_2d(np.asarray(directions, float))
    U = U / np.linalg.norm(U, axis=1, keepdims=True)
    m, n = starts.shape
    c = ctx.c
    V0 = model.value(starts)
    gam0 = ctx.gamma(V0)
    if np.any(gam0 <= 1.0):
        raise BelowShell("energy below c^2 + V at a start point")
    p0 = (c * np.sqrt(gam0 * gam0 - 1.0))[:, None] * U
    v0 = p0 / gam0[:, None]
    if not _fast_path_ok(model, domain):
        return _fly_slow(ctx, model, domain, starts, p0, rtol, atol)

    X = starts.copy()
    P = p0.copy()
    T = np.zeros(m)
    L = np.zeros(m)
    hit = np.zeros(m, dtype=bool)
    ball = model.support_ball()
    if ball is not None:
        cb, R = ball
        chi, tm, tp = ray_intersections_batch(ball_domain(cb, R), v0, starts)
        rel = starts - cb
        inside = np.einsum("ij,ij->i", rel, rel) < R * R
        hit = inside | ((chi == 2) & (tp > 0))
        t_in = np.where(inside, 0.0, np.where(hit, np.maximum(np.nan_to_num(tm), 0.0), 0.0))
        T = t_in.copy()
        L = np.where(hit & ~inside, ctx.free_momentum * ctx.free_speed * t_in, 0.0)
        hidx = np.flatnonzero(hit)
        for lo in range(0, hidx.size, chunk):
            sel = hidx[lo:lo + chunk]
            Xe = starts[sel] + t_in[sel, None] * v0[sel]
            Xo, Po, To, Lo = transit(model, c, Xe, p0[sel], ctx.E, rtol=rtol, atol=atol)
            X[sel], P[sel] = Xo, Po
            T[sel] += To
            L[sel] += Lo
    V = velocity(P, c)
    _, _, tau = ray_intersections_batch(domain, V, X)
    tau = np.nan_to_num(tau)
    # the last leg (and any leg for misses) is free: V vanishes at X
    speed = np.linalg.norm(V, axis=1)
    r_here = ctx.shell_momentum(model.value(X))
    exit_point = X + tau[:, None] * V
    L = L + r_here * speed * tau
    T = T + tau
    H = c**2 * np.sqrt(1.0 + np.einsum("ij,ij->i", P, P) / c**2) + model.value(exit_point)
    return FlightResult(starts, v0, exit_point, V, P, T, L, np.abs(H - ctx.E), hit)


def _fly_slow(ctx, model, domain, starts, p0, rtol, atol):
    m, n = starts.shape
    out = {k: np.zeros((m, n)) for k in ("x", "v", "p")}
    T = np.zeros(m)
    L = np.zeros(m)
    err = np.zeros(m)
    for i in range(m):
        traj = integrate(ctx, model, PhaseState(0.0, starts[i], p0[i]), DomainExit(domain),
                         rtol=rtol, atol=atol)
        out["x"][i] = traj.x[-1]
        out["p"][i] = traj.p[-1]
        out["v"][i] = velocity(traj.p[-1], ctx.c)
        T[i] = traj.duration
        L[i] = trajectory_length(traj, ctx, model)
        err[i] = traj.max_drift
    v0 = velocity(p0, ctx.c)
    return FlightResult(starts, v0, out["x"], out["v"], out["p"], T, L, err, np.ones(m, dtype=bool))


def estimate_energy_threshold(model, domain, c, search_range, **kw):
    """Estimated energy above which ``r_{V,E}|dx|`` is simple on ``domain``.

    Thin entry point; see :func:`relnewt.simplicity.estimate_energy_threshold`.
    """
    from .simplicity import estimate_energy_threshold as _estimate

    return _estimate(model, domain, c, search_range, **kw)
