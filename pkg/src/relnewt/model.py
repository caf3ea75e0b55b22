"""Potentials built from polynomial bumps and strictly convex domains.

A bump ``A * (1 - |x - x0|**2 / rho**2)**3`` is a polynomial inside its disk
and vanishes with its first two derivatives on the rim, so finite sums of
bumps are C^2 with exactly compact support.  Domains are axis-aligned
ellipsoids (disks and ellipses for ``n = 2``), for which line intersections,
normals and curvatures are available in closed form.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import ValidationError, ZeroDirection

TANGENCY_TOL = 1e-12


@dataclass(frozen=True)
class Bump:
    center: tuple
    amplitude: float
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValidationError("bump radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "radius", float(self.radius))

    def derivative_bound(self):
        """Exact ``sup |d^j f|`` over ``|j| <= 2`` for this single bump.

        With ``s = |x - x0|**2 / rho**2`` the value peaks at ``|A|``, a first
        partial at ``s = 1/5`` with ``96 |A| / (25 sqrt(5) rho)`` and a pure
        second partial at the centre with ``6 |A| / rho**2``; mixed second
        partials never exceed ``3 |A| / rho**2``.
        """
        a, rho = abs(self.amplitude), self.radius
        return max(a, 96.0 * a / (25.0 * np.sqrt(5.0) * rho), 6.0 * a / rho**2)


@dataclass(frozen=True)
class PotentialModel:
    """Finite sum of cubic-power bumps in dimension 2 or 3."""

    bumps: tuple = ()
    dimension: int = 2

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValidationError("dimension must be 2 or 3")
        bumps = tuple(b if isinstance(b, Bump) else Bump(**b) for b in self.bumps)
        for b in bumps:
            if len(b.center) != self.dimension:
                raise ValidationError("bump centre has wrong dimension")
        object.__setattr__(self, "bumps", bumps)

    @classmethod
    def zero(cls, dimension=2):
        return cls((), dimension)

    @property
    def is_zero(self):
        return all(b.amplitude == 0.0 for b in self.bumps)

    def with_amplitudes(self, amplitudes):
        bumps = tuple(
            Bump(b.center, a, b.radius) for b, a in zip(self.bumps, amplitudes, strict=True)
        )
        return PotentialModel(bumps, self.dimension)

    @cached_property
    def _arrays(self):
        active = [b for b in self.bumps if b.amplitude != 0.0]
        C = np.array([b.center for b in active], dtype=float).reshape(-1, self.dimension)
        A = np.array([b.amplitude for b in active], dtype=float)
        IR2 = np.array([1.0 / b.radius**2 for b in active], dtype=float)
        return C, A, IR2

    def evaluate(self, x, order=1):
        """Value, gradient and (for ``order=2``) Hessian at points ``x[..., n]``."""
        x = np.asarray(x, dtype=float)
        n = self.dimension
        C, A, IR2 = self._arrays
        hess = None
        if A.size == 0:
            value, grad = np.zeros(x.shape[:-1]), np.zeros(x.shape)
            if order >= 2:
                hess = np.zeros(x.shape + (n,))
            return value, grad, hess
        # all bumps at once: u has shape (..., bumps, n)
        u = x[..., None, :] - C
        w = np.maximum(1.0 - np.einsum("...i,...i->...", u, u) * IR2, 0.0)
        w2 = w * w
        value = (w2 * w) @ A
        coef = -6.0 * A * IR2 * w2
        grad = np.einsum("...b,...bi->...i", coef, u)
        if order >= 2:
            hess = coef.sum(axis=-1)[..., None, None] * np.eye(n)
            hess = hess + np.einsum("...b,...bi,...bj->...ij", 24.0 * A * IR2**2 * w, u, u)
        return value, grad, hess

    def value(self, x):
        return self.evaluate(x, order=0)[0]

    def gradient(self, x):
        return self.evaluate(x)[1]

    def support_ball(self):
        """Ball ``(center, radius)`` outside which ``V`` vanishes identically.

        Returns ``None`` for the zero potential.
        """
        return self._support_ball

    @cached_property
    def _support_ball(self):
        active = [b for b in self.bumps if b.amplitude != 0.0]
        if not active:
            return None
        centers = np.array([b.center for b in active])
        radii = np.array([b.radius for b in active])
        if len(active) == 1:
            return centers[0], float(radii[0])

        def enclosing(c):
            return np.max(np.linalg.norm(centers - c, axis=1) + radii)

        res = optimize.minimize(enclosing, centers.mean(axis=0), method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-12})
        return res.x, float(enclosing(res.x))

    def _disjoint(self, which):
        bumps = [b for b in self.bumps if which(b)]
        for i, b in enumerate(bumps):
            for other in bumps[i + 1:]:
                d = np.linalg.norm(np.subtract(b.center, other.center))
                if d < b.radius + other.radius:
                    return False
        return True

    def sup_value(self):
        """``sup_x V(x)`` (at least 0, since ``V`` vanishes far away)."""
        return self._sup

    @cached_property
    def _sup(self):
        positive = [b for b in self.bumps if b.amplitude > 0]
        if not positive:
            return 0.0
        if self._disjoint(lambda b: b.amplitude != 0.0):
            return max(b.amplitude for b in positive)
        return max(0.0, self._sampled_extremum(sign=1.0))

    def _sampled_extremum(self, sign):
        center, radius = self.support_ball()
        m = 401 if self.dimension == 2 else 61
        axes = [np.linspace(c - radius, c + radius, m) for c in center]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dimension)
        vals = sign * self.value(pts)
        best = pts[np.argsort(vals)[-8:]]
        top = vals.max()
        for p in best:
            res = optimize.minimize(lambda y: -sign * self.value(y[None, :])[0], p,
                                    jac=lambda y: -sign * self.gradient(y[None, :])[0],
                                    method="BFGS")
            top = max(top, -res.fun)
        return sign * top


def potential_eval(model, x):
    """Value, gradient and Hessian of ``model`` at the single point ``x``."""
    v, g, h = model.evaluate(np.asarray(x, dtype=float)[None, :], order=2)
    return float(v[0]), g[0], h[0]


def c2_norm_bound(model, samples=2001):
    """Upper bound on ``sup_{x, |j| <= 2} |d^j V(x)|``.

    Combines a sampled maximum over every bump disk (``samples`` points per
    radial line along each coordinate axis and diagonal) with the exact
    per-bump analytic maxima; the analytic part is a true upper bound (summed
    when bumps overlap), so the result never falls below the sampled value.
    """
    active = [b for b in model.bumps if b.amplitude != 0.0]
    if not active:
        return 0.0
    n = model.dimension
    per_bump = [b.derivative_bound() for b in active]
    analytic = max(per_bump) if model._disjoint(lambda b: b.amplitude != 0.0) else sum(per_bump)
    dirs = [np.eye(n)[i] for i in range(n)]
    dirs += [(np.eye(n)[i] + np.eye(n)[j]) / np.sqrt(2) for i in range(n) for j in range(i + 1, n)]
    sampled = 0.0
    t = np.linspace(-1.0, 1.0, samples)
    for b in active:
        for d in dirs:
            pts = np.asarray(b.center) + b.radius * t[:, None] * d
            v, g, h = model.evaluate(pts, order=2)
            sampled = max(sampled, np.abs(v).max(), np.abs(g).max(), np.abs(h).max())
    return float(max(analytic, sampled))


@dataclass(frozen=True)
class RayGeometry:
    chi: int
    tau_minus: Optional[float] = None
    tau_plus: Optional[float] = None


@dataclass(frozen=True)
class ConvexDomain:
    """Axis-aligned ellipsoid ``|(x - center) / radii| < 1``.

    ``kind`` is ``"disk"`` (equal radii; a ball when ``n = 3``) or
    ``"ellipse"``.  Boundary points are parametrized by the angle ``theta``
    of the underlying unit circle for ``n = 2`` and by ``(polar, azimuth)``
    for ``n = 3``.
    """

    center: tuple
    radii: tuple
    kind: str = field(default="disk")

    def __post_init__(self):
        center = tuple(float(c) for c in self.center)
        radii = tuple(float(r) for r in np.broadcast_to(np.asarray(self.radii, float), (len(center),)))
        if len(center) not in (2, 3):
            raise ValidationError("domain dimension must be 2 or 3")
        if min(radii) <= 0:
            raise ValidationError("domain radii must be positive")
        if self.kind not in ("disk", "ellipse"):
            raise ValidationError(f"unknown domain kind {self.kind!r}")
        if self.kind == "disk" and len(set(radii)) != 1:
            raise ValidationError("a disk needs equal radii")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radii", radii)

    @classmethod
    def disk(cls, center=(0.0, 0.0), radius=1.0):
        return cls(tuple(center), (radius,) * len(center), "disk")

    @classmethod
    def ellipse(cls, center, radii):
        return cls(tuple(center), tuple(radii), "ellipse")

    @property
    def dimension(self):
        return len(self.center)

    @property
    def _c(self):
        return np.asarray(self.center)

    @property
    def _r(self):
        return np.asarray(self.radii)

    def level(self, x):
        """Negative inside, zero on the boundary, positive outside."""
        u = (np.asarray(x, float) - self._c) / self._r
        return np.einsum("...i,...i->...", u, u) - 1.0

    def level_gradient(self, x):
        return 2.0 * (np.asarray(x, float) - self._c) / self._r**2

    def inside(self, x):
        return self.level(x) < 0.0

    def point(self, theta):
        """Boundary point(s) for parameter ``theta`` (n=2) or ``(polar, azimuth)``."""
        theta = np.asarray(theta, dtype=float)
        if self.dimension == 2:
            xi = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        else:
            pol, az = theta[..., 0], theta[..., 1]
            xi = np.stack([np.sin(pol) * np.cos(az), np.sin(pol) * np.sin(az), np.cos(pol)], axis=-1)
        return self._c + self._r * xi

    def parameter(self, x):
        u = (np.asarray(x, float) - self._c) / self._r
        if self.dimension == 2:
            return np.mod(np.arctan2(u[..., 1], u[..., 0]), 2 * np.pi)
        pol = np.arccos(np.clip(u[..., 2] / np.linalg.norm(u, axis=-1), -1.0, 1.0))
        return np.stack([pol, np.mod(np.arctan2(u[..., 1], u[..., 0]), 2 * np.pi)], axis=-1)

    def tangent(self, theta):
        """``d point / d theta`` (n=2 only); not normalized."""
        theta = np.asarray(theta, dtype=float)
        return self._r * np.stack([-np.sin(theta), np.cos(theta)], axis=-1)

    def outward_normal(self, x):
        g = self.level_gradient(x)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def normal_at(self, theta):
        return self.outward_normal(self.point(theta))

    def curvature(self, theta):
        """Signed curvature of the boundary curve (n=2), positive for convex."""
        a, b = self.radii
        theta = np.asarray(theta, dtype=float)
        return a * b / (a**2 * np.sin(theta) ** 2 + b**2 * np.cos(theta) ** 2) ** 1.5

    def second_fundamental_form(self, x, X):
        """Euclidean ``II(X, X)`` at boundary point ``x`` for tangent ``X``."""
        X = np.asarray(X, float)
        g = 2.0 * (np.asarray(x, float) - self._c) / self._r**2
        return 2.0 * np.einsum("...i,...i->...", X, X / self._r**2) / np.linalg.norm(g, axis=-1)

    def tangent_basis(self, x):
        """Orthonormal basis (rows) of the tangent space at ``x``."""
        return orthonormal_complement(self.outward_normal(x))

    def chart_residual(self, x, q):
        """Coordinates of ``x - q`` on the boundary near ``q`` (shape ``(..., n-1)``).

        In the plane this is the wrapped parameter difference, which is
        monotone for exit points sweeping the whole boundary.
        """
        if self.dimension == 2:
            d = self.parameter(x) - self.parameter(q)
            return (np.mod(d + np.pi, 2 * np.pi) - np.pi)[..., None]
        basis = self.tangent_basis(q)
        return np.einsum("...ij,...j->...i", basis, np.asarray(x) - np.asarray(q))

    def min_distance_to_boundary(self, p):
        """Distance from an interior point ``p`` to the boundary (sampled + polished)."""
        p = np.asarray(p, float)
        if self.kind == "disk":
            return self.radii[0] - np.linalg.norm(p - self._c)
        t = np.linspace(0, 2 * np.pi, 4096, endpoint=False) if self.dimension == 2 else None
        if self.dimension == 2:
            pts = self.point(t)
            d = np.linalg.norm(pts - p, axis=1)
            i = int(np.argmin(d))
            dt = t[1] - t[0]
            res = optimize.minimize_scalar(lambda s: np.linalg.norm(self.point(s) - p),
                                           bounds=(t[i] - dt, t[i] + dt), method="bounded",
                                           options={"xatol": 1e-12})
            return float(min(res.fun, d[i]))
        pol, az = np.meshgrid(np.linspace(0, np.pi, 181), np.linspace(0, 2 * np.pi, 360, endpoint=False), indexing="ij")
        pts = self.point(np.stack([pol, az], axis=-1)).reshape(-1, 3)
        return float(np.linalg.norm(pts - p, axis=1).min())

    def contains_ball(self, center, radius, margin=0.0):
        center = np.asarray(center, float)
        if not self.inside(center):
            return False
        return self.min_distance_to_boundary(center) >= radius + margin


def orthonormal_complement(u):
    """Rows spanning the orthogonal complement of unit vector(s) ``u``."""
    u = np.asarray(u, dtype=float)
    n = u.shape[-1]
    if n == 2:
        return np.stack([-u[..., 1], u[..., 0]], axis=-1)[..., None, :]
    # pick the coordinate axis least aligned with u to seed Gram-Schmidt
    axis = np.argmin(np.abs(u), axis=-1)
    e = np.eye(n)[axis]
    a = e - np.einsum("...i,...i->...", e, u)[..., None] * u
    a /= np.linalg.norm(a, axis=-1, keepdims=True)
    b = np.cross(u, a)
    return np.stack([a, b], axis=-2)


def ray_intersections_batch(domain, v, x):
    """Vectorized line/boundary intersection for lines ``t -> t v + x``.

    Returns ``(chi, tau_minus, tau_plus)`` arrays; taus are NaN where
    ``chi == 0``.  Uses the cancellation-free quadratic root formula, which
    keeps the ``(v, x) -> (-v, x)`` symmetry exact.
    """
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(np.linalg.norm(v, axis=-1) == 0):
        raise ZeroDirection("line direction must be nonzero")
    r = domain._r
    vs = v / r
    us = (x - domain._c) / r
    a = np.einsum("...i,...i->...", vs, vs)
    b = np.einsum("...i,...i->...", vs, us)
    cc = np.einsum("...i,...i->...", us, us) - 1.0
    disc = b * b - a * cc
    norm_disc = disc / a
    chi = np.where(norm_disc < 0, 0, np.where(norm_disc < TANGENCY_TOL, 1, 2))
    sq = np.sqrt(np.maximum(disc, 0.0))
    q = -(b + np.copysign(sq, b))
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = q / a
        t2 = np.where(q != 0, cc / q, t1)
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    tang = -b / a
    tmin = np.where(chi == 1, tang, np.where(chi == 0, np.nan, tmin))
    tmax = np.where(chi == 1, tang, np.where(chi == 0, np.nan, tmax))
    return chi, tmin, tmax


def ray_intersections(domain, v, x):
    """``chi``, ``tau_minus`` and ``tau_plus`` for the line ``t -> t v + x``."""
    chi, tmin, tmax = ray_intersections_batch(domain, np.asarray(v, float)[None], np.asarray(x, float)[None])
    chi = int(chi[0])
    if chi == 0:
        return RayGeometry(0)
    return RayGeometry(chi, float(tmin[0]), float(tmax[0]))


def ball_domain(center, radius):
    return ConvexDomain(tuple(center), (radius,) * len(center), "disk")


def check_support_inside(model, domain, margin=0.0):
    """Raise unless ``supp V`` lies inside ``domain`` (with ``margin``)."""
    ball = model.support_ball()
    if ball is None:
        return
    ok = all(domain.contains_ball(b.center, b.radius, margin) for b in model.bumps if b.amplitude != 0)
    if not ok:
        raise ValidationError("potential support is not contained in the domain")


def make_potential(bumps: Sequence, dimension=2):
    """Convenience constructor from ``(center, amplitude, radius)`` triples or dicts."""
    out = []
    for b in bumps:
        if isinstance(b, dict):
            out.append(Bump(tuple(b["center"]), b["amplitude"], b["radius"]))
        elif isinstance(b, Bump):
            out.append(b)
        else:
            c, a, r = b
            out.append(Bump(tuple(c), a, r))
    return PotentialModel(tuple(out), dimension)
