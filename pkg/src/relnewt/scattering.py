"""Scattering data ``(v-, x-) -> (a, b)`` for compactly supported potentials.

Outside the support ball the motion is free, so the incoming asymptote
``v- t + x-`` is followed exactly up to the entry time, the trajectory is
integrated through the ball, and the outgoing asymptote ``a t + b`` is read
off at the exit.  The energy of each trajectory is the free energy of its
incoming velocity, ``c^2 / sqrt(1 - |v-|^2/c^2)``.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import (DEFAULT_ATOL, DEFAULT_RTOL, EnergyContext, PhaseState, SupportExit, integrate,
                       momentum, transit, velocity)
from .errors import EventNotFound, TrappedOrbit, ValidationError
from .model import ball_domain, orthonormal_complement, ray_intersections_batch

TMAX_FACTOR = 10.0


@dataclass(frozen=True)
class ScatteringDatum:
    v_minus: np.ndarray
    x_minus: np.ndarray
    a: np.ndarray
    b: np.ndarray
    chi: int


@dataclass(frozen=True)
class MGridPoint:
    """Point of the incoming manifold with ``v- . x- = 0``.

    ``phi`` is the direction angle (plane) or ``(polar, azimuth)``; ``rho``
    the signed impact offset (plane) or the offset coordinates in the
    orthonormal frame of ``v-^perp``.
    """

    phi: object
    rho: object
    v_minus: np.ndarray
    x_minus: np.ndarray


@dataclass
class ScatteringDataset:
    """Stacked scattering data; ``phi``/``rho`` have shape ``(m,)`` or ``(m, 2)``."""

    phi: np.ndarray
    rho: np.ndarray
    v_minus: np.ndarray
    x_minus: np.ndarray
    a: np.ndarray
    b: np.ndarray
    chi: np.ndarray

    def __len__(self):
        return len(self.chi)

    def datum(self, i):
        return ScatteringDatum(self.v_minus[i], self.x_minus[i], self.a[i], self.b[i], int(self.chi[i]))


def impact_representation(v, x):
    """The point of ``x + R v`` orthogonal to ``v``."""
    v = np.asarray(v, float)
    x = np.asarray(x, float)
    return x - (np.sum(x * v, axis=-1, keepdims=True) / np.sum(v * v, axis=-1, keepdims=True)) * v


def free_energy(v, c=1.0):
    """``c^2 / sqrt(1 - |v|^2/c^2)``, the energy of a free particle with velocity ``v``."""
    s2 = np.sum(np.asarray(v, float) ** 2, axis=-1) / c**2
    return c**2 / np.sqrt(1.0 - s2)


def _check_speed(v, c):
    sp = np.linalg.norm(v, axis=-1)
    if np.any(sp <= 0) or np.any(sp >= c):
        raise ValidationError("incoming speed must lie in (0, c)")
    return sp


def solve_scattering(ctx, model, v_minus, x_minus, *, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Scattering datum for one asymptote using the single-trajectory integrator.

    Lines that miss the support ball (``chi <= 1``) are returned unchanged.

    Raises
    ------
    TrappedOrbit
        The trajectory does not leave the support ball within
        ``10 x diameter / speed``.
    """
    c = ctx.c
    v = np.asarray(v_minus, float)
    x = np.asarray(x_minus, float)
    sp = float(_check_speed(v, c))
    ball = model.support_ball()
    if ball is None:
        return ScatteringDatum(v, x, v.copy(), x.copy(), 0)
    cb, R = ball
    chi, tm, _ = ray_intersections_batch(ball_domain(cb, R), v[None], x[None])
    chi = int(chi[0])
    if chi <= 1:
        return ScatteringDatum(v, x, v.copy(), x.copy(), chi)
    t_in = float(tm[0])
    E = float(free_energy(v, c))
    sub = EnergyContext(E, c, model.dimension)
    start = PhaseState(t_in, x + t_in * v, momentum(v, c))
    t_max = TMAX_FACTOR * 2.0 * R / sp
    try:
        traj = integrate(sub, model, start, SupportExit(model), rtol=rtol, atol=atol, t_max=t_max)
    except EventNotFound as exc:
        raise TrappedOrbit(f"no exit from the support ball within t={t_max:.3g}") from exc
    fin = traj.final
    a = velocity(fin.p, c)
    b = fin.x - a * fin.t
    return ScatteringDatum(v, x, a, b, chi)


def solve_scattering_batch(ctx, model, v_minus, x_minus, *, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, chunk=4096):
    """Vectorized scattering map; returns ``(a, b, chi)`` arrays.

    Exit is taken at the first accepted step outside the support ball, where
    the motion is already free, so ``b`` does not depend on where exactly
    the step lands.
    """
    c = ctx.c
    V = np.atleast_2d(np.asarray(v_minus, float))
    X = np.atleast_2d(np.asarray(x_minus, float))
    _check_speed(V, c)
    m = V.shape[0]
    A, B = V.copy(), X.copy()
    ball = model.support_ball()
    if ball is None:
        return A, B, np.zeros(m, dtype=int)
    cb, R = ball
    chi, tm, _ = ray_intersections_batch(ball_domain(cb, R), V, X)
    hit = np.flatnonzero(chi == 2)
    E = free_energy(V, c)
    for lo in range(0, hit.size, chunk):
        sel = hit[lo:lo + chunk]
        t_in = tm[sel]
        Xe = X[sel] + t_in[:, None] * V[sel]
        sp = np.linalg.norm(V[sel], axis=1)
        Xo, Po, To, _ = transit(model, c, Xe, momentum(V[sel], c), E[sel], rtol=rtol, atol=atol,
                                t_max=TMAX_FACTOR * 2.0 * R / sp.min())
        a = velocity(Po, c)
        A[sel] = a
        B[sel] = Xo - a * (t_in + To)[:, None]
    return A, B, chi.astype(int)


def _snap(u):
    # exact axis directions keep v- . x- = 0 exact on the axes
    return np.where(np.abs(u) < 1e-15, 0.0, u)


def m_grid(ctx, n_phi, rho_max, n_rho, *, model=None, margin=0.0):
    """Tensor grid on ``M_E``: directions times impact offsets.

    In the plane the directions are ``phi_i = 2 pi i / n_phi`` and the
    offsets ``rho_j`` are uniform on ``[-rho_max, rho_max]``; ``x- = rho
    (-sin phi, cos phi)``.  In three dimensions the directions form a
    midpoint polar by uniform azimuth grid and the offsets a square grid in
    the frame of ``v-^perp``.  With ``model`` given, ``rho_max`` is checked
    to reach past the support (plus ``margin``).
    """
    n = ctx.n
    speed = ctx.free_speed
    if model is not None:
        ball = model.support_ball()
        if ball is not None and rho_max < np.linalg.norm(ball[0]) + ball[1] + margin:
            raise ValidationError("rho_max must exceed the support radius plus margin")
    rho = np.linspace(-rho_max, rho_max, n_rho) if n_rho > 1 else np.zeros(1)
    pts = []
    if n == 2:
        for i in range(n_phi):
            phi = 2 * np.pi * i / n_phi
            u = _snap(np.array([np.cos(phi), np.sin(phi)]))
            w = np.array([-u[1], u[0]])
            for r in rho:
                pts.append(MGridPoint(phi, float(r), speed * u, r * w))
        return pts
    pol = np.pi * (np.arange(n_phi) + 0.5) / n_phi
    az = 2 * np.pi * np.arange(n_phi) / n_phi
    for p in pol:
        for q in az:
            u = np.array([np.sin(p) * np.cos(q), np.sin(p) * np.sin(q), np.cos(p)])
            e1, e2 = orthonormal_complement(u)
            for r1 in rho:
                for r2 in rho:
                    pts.append(MGridPoint((float(p), float(q)), (float(r1), float(r2)), speed * u,
                                          r1 * e1 + r2 * e2))
    return pts


def scattering_grid(ctx, model, n_phi, rho_max, n_rho, **kw):
    """Scattering data on :func:`m_grid`, as a :class:`ScatteringDataset`."""
    pts = m_grid(ctx, n_phi, rho_max, n_rho)
    V = np.array([p.v_minus for p in pts])
    X = np.array([p.x_minus for p in pts])
    A, B, chi = solve_scattering_batch(ctx, model, V, X, **kw)
    return ScatteringDataset(np.array([p.phi for p in pts], float), np.array([p.rho for p in pts], float),
                             V, X, A, B, chi)


def scattering_jacobian(ctx, model, v_minus, x_minus, h=1e-5, *, rtol=1e-12, atol=1e-14):
    """Central-difference Jacobian of ``(v, x) -> (a, b)`` on the full ``2n`` space."""
    v = np.asarray(v_minus, float)
    x = np.asarray(x_minus, float)
    n = v.size
    if model.support_ball() is None:
        # free motion: the scattering map is the identity
        return np.eye(2 * n)
    z = np.concatenate([v, x])
    Z = np.concatenate([z + h * np.eye(2 * n), z - h * np.eye(2 * n)])
    A, B, _ = solve_scattering_batch(ctx, model, Z[:, :n], Z[:, n:], rtol=rtol, atol=atol)
    out = np.concatenate([A, B], axis=1)
    return ((out[:2 * n] - out[2 * n:]) / (2 * h)).T


def volume_preservation_probe(ctx, model, v_minus, x_minus, h=1e-5, **kw):
    """``|det|`` of the finite-difference scattering Jacobian; close to 1."""
    return float(abs(np.linalg.det(scattering_jacobian(ctx, model, v_minus, x_minus, h, **kw))))


def reversal_residual(ctx, model, datum, **kw):
    """Distance between ``S(-a, b)`` and ``(-v-, x-)``.

    The time-reversed trajectory has incoming asymptote ``-a t + b`` and
    outgoing asymptote ``-v- t + x-``.
    """
    A, B, _ = solve_scattering_batch(ctx, model, -np.asarray(datum.a)[None], np.asarray(datum.b)[None], **kw)
    return float(max(np.abs(A[0] + datum.v_minus).max(), np.abs(B[0] - datum.x_minus).max()))
