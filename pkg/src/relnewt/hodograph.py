"""Boundary distance function ``l_{V,E}(zeta, x)`` of the metric ``r_{V,E}|dx|``.

``l`` is the action ``int r |dx/dt| dt`` along the unique trajectory from
the boundary point ``zeta`` to ``x``.  Its gradients need no numerical
differentiation: the derivative of the distance in an endpoint is the
momentum there,

    grad_x l(zeta, x) = p(arrival at x),      grad_zeta l = -p(departure at zeta),

which is how fields store their first derivatives.  For interior ``x`` the
problem is solved backwards, shooting from ``x`` to ``zeta``: the initial
direction of that shot is ``nu_{V,E}(zeta, x)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .boundary import SHOOT_TOL, _rotate, solve_many
from .dynamics import momentum
from .errors import GridMismatch, NoConvergence, ValidationError

ON_BOUNDARY = 1e-9


@dataclass
class HodographField:
    """``l``, ``k`` and ``k0`` on a boundary-by-boundary or boundary-by-interior grid.

    Rows are boundary parameters ``theta_zeta``; columns are either offsets
    ``beta`` (``theta_x = theta_zeta + beta``, boundary target) or fixed
    interior points (``x`` shared by every row).  ``weights`` are the
    column quadrature weights (``d beta`` or area).  ``k`` is the arrival
    velocity ``k(E, zeta, x)`` at ``x`` and ``k0`` the departure velocity at
    ``zeta``.
    """

    target: str
    theta_zeta: np.ndarray
    zeta: np.ndarray
    x: np.ndarray
    theta_x: np.ndarray
    beta: np.ndarray
    weights: np.ndarray
    l: np.ndarray
    k: np.ndarray
    k0: np.ndarray
    converged: np.ndarray
    delta: float
    energy: float
    c: float
    band: np.ndarray = None
    meta: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def shape(self):
        return self.l.shape

    def points(self):
        """Column points ``x`` broadcast to shape ``(Nz, M, n)``."""
        if self.x.ndim == 2:
            return np.broadcast_to(self.x, self.l.shape + (self.x.shape[-1],))
        return self.x

    def grad_x(self):
        """``grad_x l = k / sqrt(1 - |k|^2/c^2)``."""
        return momentum(self.k, self.c)

    def grad_zeta(self):
        return -momentum(self.k0, self.c)

    def nu(self):
        k = self.k
        return -k / np.linalg.norm(k, axis=-1, keepdims=True)

    def alpha(self):
        """Angle of ``nu`` unwrapped along ``theta_zeta`` (plane only)."""
        nu = self.nu()
        a = np.arctan2(nu[..., 1], nu[..., 0])
        return np.unwrap(a, axis=0)

    def require_complete(self):
        if not np.all(self.converged):
            bad = np.argwhere(~self.converged)
            raise GridMismatch(f"field has {len(bad)} unsolved nodes, first at {tuple(bad[0])}")


def _on_boundary(domain, x):
    return abs(float(domain.level(x))) <= ON_BOUNDARY


def hodograph_distance(ctx, model, domain, zeta, x, *, tol=SHOOT_TOL, **kw):
    """``(l, k, k0)`` for the trajectory from boundary point ``zeta`` to ``x``.

    ``k = k(E, zeta, x)`` is the velocity on arrival at ``x`` and ``k0`` the
    velocity at ``zeta``.
    """
    zeta = np.asarray(zeta, float)
    x = np.asarray(x, float)
    if not _on_boundary(domain, zeta):
        raise ValidationError("zeta must lie on the boundary")
    if np.linalg.norm(x - zeta) == 0:
        raise ValidationError("zeta and x must differ")
    if domain.level(x) > ON_BOUNDARY:
        raise ValidationError("x must lie in the closed domain")
    l, k, k0, ok = _solve_pairs(ctx, model, domain, zeta[None], x[None], tol=tol, **kw)
    if not ok[0]:
        raise NoConvergence(f"no trajectory from {zeta} to {x}")
    return float(l[0]), k[0], k0[0]


def _solve_pairs(ctx, model, domain, Z, X, guesses=None, *, tol=SHOOT_TOL, interior=None, **kw):
    """Solve ``zeta -> x`` for stacked pairs; returns ``(l, k, k0, converged, directions)``.

    Interior endpoints are shot backwards from ``x``; boundary endpoints
    forwards from ``zeta``.  ``guesses`` are initial directions of the shot
    actually performed.
    """
    out = _solve_pairs_full(ctx, model, domain, Z, X, guesses, tol=tol, interior=interior, **kw)
    return out[:4]


def _solve_pairs_full(ctx, model, domain, Z, X, guesses=None, *, tol=SHOOT_TOL, interior=None, **kw):
    Z = np.atleast_2d(Z)
    X = np.atleast_2d(X)
    if interior is None:
        interior = domain.level(X) < -ON_BOUNDARY
    m = len(Z)
    l = np.full(m, np.nan)
    k = np.full(X.shape, np.nan)
    k0 = np.full(X.shape, np.nan)
    dirs = np.full(X.shape, np.nan)
    ok = np.zeros(m, dtype=bool)
    for flag in (True, False):
        sel = np.flatnonzero(interior == flag)
        if sel.size == 0:
            continue
        g = None if guesses is None else guesses[sel]
        if flag:
            shot = solve_many(ctx, model, domain, X[sel], Z[sel], g, tol=tol, **kw)
            k[sel] = -shot.start_velocity
            k0[sel] = -shot.exit_velocity
        else:
            shot = solve_many(ctx, model, domain, Z[sel], X[sel], g, tol=tol, **kw)
            k[sel] = shot.exit_velocity
            k0[sel] = shot.start_velocity
        l[sel] = shot.length
        ok[sel] = shot.converged
        dirs[sel] = shot.direction
    return l, k, k0, ok, dirs


def nu_field(ctx, model, domain, zeta, x, **kw):
    """``nu_{V,E}(zeta, x) = -k(E, zeta, x) / |k(E, zeta, x)|`` for interior ``x``."""
    if not domain.inside(np.asarray(x, float)):
        raise ValidationError("x must be an interior point")
    _, k, _ = hodograph_distance(ctx, model, domain, zeta, x, **kw)
    return -k / np.linalg.norm(k)


def gradient_identity_residual(ctx, model, domain, zeta, x, h=1e-5, *, richardson=False, **kw):
    """Compare a central-difference ``grad_x l`` with ``k / sqrt(1 - k^2/c^2)``.

    Returns ``(residual_vector, relative_magnitude_error)`` where the second
    entry is ``| |grad_x l| - r(x) | / r(x)``.
    """
    zeta = np.asarray(zeta, float)
    x = np.asarray(x, float)
    n = x.size
    steps = [h, h / 2] if richardson else [h]
    grads = []
    for hh in steps:
        offs = np.concatenate([np.eye(n), -np.eye(n)]) * hh
        P = x + offs
        l, _, _, ok = _solve_pairs(ctx, model, domain, np.repeat(zeta[None], 2 * n, 0), P, **kw)
        if not np.all(ok):
            raise NoConvergence("finite-difference neighbours did not converge")
        grads.append((l[:n] - l[n:]) / (2 * hh))
    g = grads[0] if not richardson else (4 * grads[1] - grads[0]) / 3
    _, k, _ = hodograph_distance(ctx, model, domain, zeta, x, **kw)
    pred = momentum(k, ctx.c)
    r = ctx.shell_momentum(model.value(x[None])[0])
    return g - pred, abs(np.linalg.norm(g) - r) / r


def winding_angle(ctx, model, domain, x, N=256, **kw):
    """Total angle swept by ``nu_{V,E}(zeta(theta), x)`` as ``theta`` runs once around."""
    if domain.dimension != 2:
        raise ValidationError("winding is defined for planar domains")
    x = np.asarray(x, float)
    if not domain.inside(x):
        raise ValidationError("x must be an interior point")
    theta = 2 * np.pi * np.arange(N) / N
    Z = domain.point(theta)
    _, k, _, ok = _solve_pairs(ctx, model, domain, Z, np.repeat(x[None], N, 0), **kw)
    if not np.all(ok):
        raise NoConvergence("winding sweep has unsolved nodes")
    nu = -k / np.linalg.norm(k, axis=1, keepdims=True)
    a = np.arctan2(nu[:, 1], nu[:, 0])
    d = np.diff(np.append(a, a[0]))
    d = np.mod(d + np.pi, 2 * np.pi) - np.pi
    return float(np.sum(d))


# -- grids -------------------------------------------------------------------

def boundary_offsets(N, delta, layout="uniform", band_nodes=None):
    """Column offsets ``beta``, weights and band mask for a boundary field.

    ``uniform``: ``beta_j = 2 pi j / N`` away from the diagonal band.
    ``graded``: ``N`` Gauss-Legendre nodes on ``[delta, 2 pi - delta]`` plus
    ``band_nodes`` Gauss nodes on each of ``[delta/2, delta]`` and
    ``[2 pi - delta, 2 pi - delta/2]`` (flagged in the mask) for the
    extrapolation of the excluded band.
    """
    if not delta > 0:
        raise ValidationError("the diagonal band delta must be positive")
    if layout == "uniform":
        beta = 2 * np.pi * np.arange(1, N) / N
        keep = np.minimum(beta, 2 * np.pi - beta) >= delta - 1e-12
        beta = beta[keep]
        return beta, np.full(beta.size, 2 * np.pi / N), np.zeros(beta.size, bool)
    if layout != "graded":
        raise ValidationError(f"unknown layout {layout!r}")
    x, w = np.polynomial.legendre.leggauss(N)
    a, b = delta, 2 * np.pi - delta
    beta = 0.5 * (b - a) * x + 0.5 * (a + b)
    wt = 0.5 * (b - a) * w
    nb = band_nodes if band_nodes is not None else max(4, N // 8)
    xb, wb = np.polynomial.legendre.leggauss(nb)
    lo = 0.5 * (delta / 2) * xb + 0.75 * delta
    hi = 2 * np.pi - lo[::-1]
    wlo = 0.25 * delta * wb
    beta = np.concatenate([lo, beta, hi])
    wt = np.concatenate([wlo, wt, wlo[::-1]])
    mask = np.concatenate([np.ones(nb, bool), np.zeros(N, bool), np.ones(nb, bool)])
    return beta, wt, mask


def polar_grid(domain, n_psi, n_r):
    """Interior points ``center + radii * rho (cos psi, sin psi)`` with area weights.

    Gauss-Legendre in ``rho`` (weight ``rho d rho``), uniform in ``psi``.
    """
    if domain.dimension != 2:
        raise ValidationError("polar grids are planar")
    xr, wr = np.polynomial.legendre.leggauss(n_r)
    rho = 0.5 * (xr + 1.0)
    wrho = 0.5 * wr * rho
    psi = 2 * np.pi * np.arange(n_psi) / n_psi
    R, P = np.meshgrid(rho, psi, indexing="ij")
    a, b = domain.radii
    pts = np.asarray(domain.center) + np.stack([a * R * np.cos(P), b * R * np.sin(P)], axis=-1)
    w = (a * b) * np.repeat(wrho, n_psi) * (2 * np.pi / n_psi)
    return pts.reshape(-1, 2), w, rho, psi


def hodograph_grid(ctx, model, domain, n_zeta, n_x, target="boundary", delta=0.2, *, layout="uniform",
                   n_r=None, band_nodes=None, warm_start=True, tol=SHOOT_TOL, **kw):
    """Build a :class:`HodographField` on ``n_zeta`` uniform boundary parameters.

    For ``target="boundary"`` the columns are offsets from
    :func:`boundary_offsets` (``n_x`` of them, plus band nodes when graded).
    For ``target="interior"`` the columns are the ``n_x`` by ``n_r`` polar
    grid of :func:`polar_grid` (``n_r`` defaults to ``3 n_x / 4``).  Rows
    are solved in sequence, each warm-started from the previous row.
    """
    if domain.dimension != 2:
        raise ValidationError("hodograph grids are planar")
    if n_zeta < 8 or n_x < 8:
        raise ValidationError("grids must have at least 8 nodes")
    ctx.validate(model)
    theta = 2 * np.pi * np.arange(n_zeta) / n_zeta
    zeta = domain.point(theta)
    band = None
    if target == "boundary":
        beta, w, band = boundary_offsets(n_x, delta, layout, band_nodes)
        theta_x = np.mod(theta[:, None] + beta[None, :], 2 * np.pi)
        X = domain.point(theta_x)
        meta = {"layout": layout, "n_beta": int(n_x), "band_nodes": int(band.sum() // 2)}
    elif target == "interior":
        n_r = n_r if n_r is not None else (3 * n_x) // 4
        Xc, w, rho, psi = polar_grid(domain, n_x, n_r)
        theta_x, beta = None, None
        X = np.broadcast_to(Xc, (n_zeta,) + Xc.shape)
        meta = {"n_psi": int(n_x), "n_r": int(n_r)}
    else:
        raise ValidationError("target must be 'boundary' or 'interior'")
    M = X.shape[1]
    l = np.full((n_zeta, M), np.nan)
    k = np.full((n_zeta, M, 2), np.nan)
    k0 = np.full((n_zeta, M, 2), np.nan)
    ok = np.zeros((n_zeta, M), bool)
    interior = target == "interior"
    prev = None
    for i in range(n_zeta):
        Z = np.repeat(zeta[i][None], M, 0)
        guess = None
        if warm_start and prev is not None and np.all(np.isfinite(prev)):
            if interior:
                # rotate by the change of the chord angle seen from x
                a_new = np.arctan2(*(Z - X[i]).T[::-1])
                a_old = np.arctan2(*(np.repeat(zeta[i - 1][None], M, 0) - X[i]).T[::-1])
                guess = _rotate(prev, a_new - a_old)
            else:
                guess = _rotate(prev, np.full(M, theta[i] - theta[i - 1]))
        li, ki, k0i, oki, dirs = _solve_pairs_full(ctx, model, domain, Z, X[i], guess, tol=tol,
                                                  interior=np.full(M, interior), **kw)
        l[i], k[i], k0[i], ok[i] = li, ki, k0i, oki
        prev = np.where(oki[:, None], dirs, np.nan)
    failures = [(int(a), int(b)) for a, b in np.argwhere(~ok)]
    meta.update({"n_zeta": int(n_zeta), "target": target, "delta": float(delta),
                 "energy": float(ctx.E), "c": float(ctx.c)})
    return HodographField(target, theta, zeta, X if not interior else X[0], theta_x, beta, w, l, k, k0, ok,
                          float(delta), float(ctx.E), float(ctx.c), band, meta, failures)


def symmetry_residual(ctx, model, domain, fld, sample=None, seed=0, **kw):
    """``max |l(zeta, x) - l(x, zeta)|`` over boundary-field nodes (all, or a random sample)."""
    if fld.target != "boundary":
        raise ValidationError("symmetry is checked on boundary fields")
    idx = np.argwhere(fld.converged)
    if sample is not None and sample < len(idx):
        idx = idx[np.random.default_rng(seed).choice(len(idx), sample, replace=False)]
    Z = fld.zeta[idx[:, 0]]
    X = fld.x[idx[:, 0], idx[:, 1]]
    l_rev, _, _, ok = _solve_pairs(ctx, model, domain, X, Z, interior=np.zeros(len(X), bool), **kw)
    return float(np.max(np.abs(l_rev[ok] - fld.l[idx[ok, 0], idx[ok, 1]])))


def triangle_defect(ctx, model, domain, thetas, **kw):
    """``max(l(a, c) - l(a, b) - l(b, c))`` over boundary triples (``<= 0`` up to round-off)."""
    thetas = np.atleast_2d(np.asarray(thetas, float))
    A, B, C = (domain.point(thetas[:, j]) for j in range(3))
    P = np.concatenate([A, A, B])
    Q = np.concatenate([C, B, C])
    l, _, _, ok = _solve_pairs(ctx, model, domain, P, Q, interior=np.zeros(len(P), bool), **kw)
    if not np.all(ok):
        raise NoConvergence("triangle probe has unsolved pairs")
    m = len(A)
    return float(np.max(l[:m] - l[m:2 * m] - l[2 * m:]))


def mixed_derivative_probe(ctx, model, domain, delta=0.2, samples=16, h=1e-4, spread=0.3, **kw):
    """Observed ``max |d^2 l / d theta_zeta d theta_x| * |zeta - x|`` near the band edge.

    ``d l / d theta_x = p_exit . T(theta_x)`` is differenced in
    ``theta_zeta``; offsets are drawn from ``[delta, delta + spread]``.
    """
    rng = np.random.default_rng(0)
    t0 = rng.uniform(0, 2 * np.pi, samples)
    beta = delta + spread * rng.uniform(0, 1, samples)
    t1 = t0 + beta * rng.choice([-1, 1], samples)
    Z = np.concatenate([domain.point(t0 + h), domain.point(t0 - h)])
    X = np.concatenate([domain.point(t1), domain.point(t1)])
    _, k, _, ok = _solve_pairs(ctx, model, domain, Z, X, interior=np.zeros(len(Z), bool), **kw)
    if not np.all(ok):
        raise NoConvergence("mixed-derivative probe has unsolved pairs")
    T = domain.tangent(t1)
    d = np.einsum("ij,ij->i", momentum(k, ctx.c)[:samples] - momentum(k, ctx.c)[samples:], T) / (2 * h)
    dist = np.linalg.norm(domain.point(t0) - domain.point(t1), axis=1)
    return float(np.max(np.abs(d) * dist))
