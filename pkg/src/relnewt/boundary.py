"""Fixed-energy two-point boundary value problem by shooting.

The unknown is the initial direction only; the speed is pinned by the energy
shell.  In the plane the direction is a rotation angle ``w`` applied to a
base direction (the chord, or a warm start); in three dimensions it is
``normalize(u0 + w_1 e_1 + w_2 e_2)`` with ``e_i`` spanning ``u0^perp``.
All routines solve many problems at once: every Newton iteration is a
single batched flight plus ``n - 1`` finite-difference flights.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import DEFAULT_ATOL, DEFAULT_RTOL, fly
from .errors import NoConvergence, NonUnique, SolverError, ValidationError
from .model import orthonormal_complement

SHOOT_TOL = 1e-10
FD_STEP = 1e-7
MAX_ITER = 40
UNIQUE_TOL = 1e-7
BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class BoundaryDatum:
    """One chord ``q0 -> q`` of the boundary data at fixed energy."""

    q0: np.ndarray
    q: np.ndarray
    s: float
    k: np.ndarray
    k0: np.ndarray
    l: float = float("nan")
    theta0: Optional[object] = None
    theta1: Optional[object] = None


@dataclass(frozen=True)
class ShotBatch:
    """Result of :func:`shoot` for ``m`` problems (row ``i`` is problem ``i``)."""

    start: np.ndarray
    target: np.ndarray
    direction: np.ndarray
    exit_point: np.ndarray
    exit_velocity: np.ndarray
    exit_momentum: np.ndarray
    start_velocity: np.ndarray
    time: np.ndarray
    length: np.ndarray
    energy_error: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray

    def take(self, sel):
        return ShotBatch(**{k: getattr(self, k)[sel] for k in self.__dataclass_fields__})


@dataclass
class BoundaryDataset:
    """Boundary data on a grid of boundary parameters.

    Array fields are stacked over solved pairs; ``failures`` lists
    ``(i, j, message)`` for pairs that could not be solved.
    """

    theta0: np.ndarray
    theta1: np.ndarray
    q0: np.ndarray
    q: np.ndarray
    s: np.ndarray
    k: np.ndarray
    k0: np.ndarray
    l: np.ndarray
    index: np.ndarray
    energy: float
    c: float
    failures: list = field(default_factory=list)

    def __len__(self):
        return len(self.s)

    def datum(self, row):
        return BoundaryDatum(self.q0[row], self.q[row], float(self.s[row]), self.k[row], self.k0[row],
                             float(self.l[row]), self.theta0[row], self.theta1[row])

    def lookup(self):
        """Map ``(i, j)`` grid indices to row numbers."""
        return {(int(i), int(j)): r for r, (i, j) in enumerate(self.index)}


def _rotate(U, w):
    c, s = np.cos(w), np.sin(w)
    return np.stack([c * U[:, 0] - s * U[:, 1], s * U[:, 0] + c * U[:, 1]], axis=1)


def directions(U0, W):
    """Directions parametrized by ``W`` (shape ``(m, n-1)``) around ``U0``."""
    if U0.shape[1] == 2:
        return _rotate(U0, W[:, 0])
    E = orthonormal_complement(U0)
    U = U0 + np.einsum("mj,mji->mi", W, E)
    return U / np.linalg.norm(U, axis=1, keepdims=True)


def _unit(a):
    a = np.asarray(a, float)
    return a / np.linalg.norm(a, axis=-1, keepdims=True)


def shoot(ctx, model, domain, starts, targets, guesses=None, *, tol=SHOOT_TOL, max_iter=MAX_ITER,
          fd_step=FD_STEP, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, max_turn=0.3, propagate=None):
    """Damped Newton over initial directions for trajectories ``start -> target``.

    ``starts`` lie in the closure of ``domain`` and ``targets`` on its
    boundary.  The residual is the boundary chart coordinate of the exit
    point relative to the target; convergence means ``|x_exit - q| <= tol``.
    Problems that fail are flagged in ``converged`` rather than raised.

    Parameters
    ----------
    guesses : array, optional
        Initial directions; defaults to the normalized chord ``q - x``.
    max_turn : float
        Cap on the size of one Newton update of ``w`` (radians in the plane).
    propagate : callable, optional
        ``propagate(starts, directions)`` returning a flight-like result with
        the fields of :class:`~relnewt.dynamics.FlightResult`; defaults to the
        mechanical flight at ``ctx.E``.
    """
    if propagate is None:
        def propagate(Xs, Us):
            return fly(ctx, model, domain, Xs, Us, rtol=rtol, atol=atol)
    X = np.atleast_2d(np.asarray(starts, float))
    Q = np.atleast_2d(np.asarray(targets, float))
    m, n = X.shape
    if m == 0:
        empty = np.zeros((0, n))
        z = np.zeros(0)
        return ShotBatch(X, Q, empty, empty, empty, empty, empty, z, z, z, z, z.astype(int), z.astype(bool))
    chord = Q - X
    if np.any(np.linalg.norm(chord, axis=1) == 0):
        raise ValidationError("start and target coincide")
    U0 = _unit(chord if guesses is None else guesses)
    W = np.zeros((m, n - 1))

    def evaluate(sel, Wsel):
        res = propagate(X[sel], directions(U0[sel], Wsel))
        F = domain.chart_residual(res.exit_point, Q[sel])
        return F, res

    F, res = evaluate(np.arange(m), W)
    out = {
        "exit_point": res.exit_point.copy(), "exit_velocity": res.exit_velocity.copy(),
        "exit_momentum": res.exit_momentum.copy(), "start_velocity": res.start_velocity.copy(),
        "time": res.time.copy(), "length": res.length.copy(), "energy_error": res.energy_error.copy(),
    }

    def store(sel, r):
        for k in out:
            out[k][sel] = getattr(r, k)

    err = np.linalg.norm(out["exit_point"] - Q, axis=1)
    iters = np.zeros(m, dtype=int)
    failed = np.zeros(m, dtype=bool)
    for _ in range(max_iter):
        act = np.flatnonzero((err > tol) & ~failed)
        if act.size == 0:
            break
        iters[act] += 1
        Fa = F[act]
        J = np.empty((act.size, n - 1, n - 1))
        for j in range(n - 1):
            Wp = W[act].copy()
            Wp[:, j] += fd_step
            Fp, _ = evaluate(act, Wp)
            J[:, :, j] = (Fp - Fa) / fd_step
        det = np.linalg.det(J)
        bad = ~np.isfinite(det) | (np.abs(det) < 1e-300)
        failed[act[bad]] = True
        good = ~bad
        act, Fa, J = act[good], Fa[good], J[good]
        if act.size == 0:
            continue
        step = -np.linalg.solve(J, Fa[..., None])[..., 0]
        size = np.linalg.norm(step, axis=1)
        step *= np.minimum(1.0, max_turn / np.maximum(size, 1e-300))[:, None]
        # backtracking on the residual norm
        lam = np.ones(act.size)
        pending = np.arange(act.size)
        f0 = np.linalg.norm(Fa, axis=1)
        for _ in range(12):
            sel = act[pending]
            Wt = W[sel] + lam[pending, None] * step[pending]
            Ft, rt = evaluate(sel, Wt)
            et = np.linalg.norm(rt.exit_point - Q[sel], axis=1)
            ok = (np.linalg.norm(Ft, axis=1) < (1.0 - 1e-4 * lam[pending]) * f0[pending]) | (et <= tol)
            acc = sel[ok]
            W[acc] = Wt[ok]
            F[acc] = Ft[ok]
            store(acc, _take_flight(rt, ok))
            err[acc] = et[ok]
            pending = pending[~ok]
            if pending.size == 0:
                break
            lam[pending] *= 0.5
        failed[act[pending]] = True
    converged = err <= tol
    return ShotBatch(X, Q, directions(U0, W), out["exit_point"], out["exit_velocity"], out["exit_momentum"],
                     out["start_velocity"], out["time"], out["length"], out["energy_error"], err, iters,
                     converged)


def _take_flight(res, sel):
    return type(res)(**{k: getattr(res, k)[sel] for k in res.__dataclass_fields__})


def _fan(domain, X, Q, count=8, interior=None):
    """``count`` spread initial directions per problem (inward half-space on the boundary)."""
    m, n = X.shape
    if interior is None:
        interior = domain.level(X) < -1e-12
    N = -domain.outward_normal(X)
    base = np.where(interior[:, None], _unit(Q - X), N)
    fans = []
    if n == 2:
        if count == 1:
            return base[None]
        for j in range(count):
            a = np.where(interior, 2 * np.pi * j / count, -0.5 * np.pi + np.pi * (j + 0.5) / count)
            fans.append(_rotate(base, a))
    else:
        E = orthonormal_complement(base)
        for j in range(count):
            az = 2 * np.pi * (j % 4) / 4 + (np.pi / 4 if j >= 4 else 0.0)
            pol = np.where(interior, np.pi * (0.3 + 0.4 * (j >= 4)), np.pi * (0.15 + 0.2 * (j >= 4)))
            u = (np.cos(pol)[:, None] * base + np.sin(pol)[:, None]
                 * (np.cos(az) * E[:, 0] + np.sin(az) * E[:, 1]))
            fans.append(u)
    return np.stack(fans)


def multistart(ctx, model, domain, starts, targets, *, count=8, tol=SHOOT_TOL, **kw):
    """Shoot from ``count`` spread directions per problem.

    Returns the list of :class:`ShotBatch` results, one per start direction.
    """
    X = np.atleast_2d(np.asarray(starts, float))
    Q = np.atleast_2d(np.asarray(targets, float))
    return [shoot(ctx, model, domain, X, Q, U, tol=tol, **kw) for U in _fan(domain, X, Q, count)]


def distinct_spread(shots):
    """Largest pairwise distance between converged directions, per problem."""
    m = shots[0].start.shape[0]
    spread = np.zeros(m)
    ncon = np.zeros(m, dtype=int)
    for a in range(len(shots)):
        ncon += shots[a].converged
        for b in range(a + 1, len(shots)):
            both = shots[a].converged & shots[b].converged
            d = np.linalg.norm(shots[a].direction - shots[b].direction, axis=1)
            spread = np.where(both, np.maximum(spread, d), spread)
    return spread, ncon


def solve_many(ctx, model, domain, starts, targets, guesses=None, *, fallback=True, check_unique=False,
               unique_tol=UNIQUE_TOL, **kw):
    """:func:`shoot` with the multistart fallback for failed problems.

    With ``check_unique`` every problem is also run from the multistart fan,
    and two distinct converged directions raise :class:`NonUnique`.
    """
    shot = shoot(ctx, model, domain, starts, targets, guesses, **kw)
    need = np.flatnonzero(~shot.converged) if fallback else np.zeros(0, int)
    if check_unique:
        need = np.arange(len(shot.converged))
    if need.size == 0:
        return shot
    fan = multistart(ctx, model, domain, shot.start[need], shot.target[need], **kw)
    spread, _ = distinct_spread(fan)
    for i in range(need.size):
        if shot.converged[need[i]]:
            for f in fan:
                if f.converged[i]:
                    spread[i] = max(spread[i], np.linalg.norm(f.direction[i] - shot.direction[need[i]]))
    clash = spread > unique_tol
    if np.any(clash):
        i = need[np.flatnonzero(clash)[0]]
        raise NonUnique(f"problem {int(i)}: distinct shooting directions reach the same target "
                        f"(spread {spread[clash].max():.3e})")
    fields = {k: getattr(shot, k).copy() for k in shot.__dataclass_fields__}
    for i, gi in enumerate(need):
        if shot.converged[gi]:
            continue
        for f in fan:
            if f.converged[i]:
                for k in fields:
                    fields[k][gi] = getattr(f, k)[i]
                break
    return ShotBatch(**fields)


def _check_boundary_point(domain, q, name):
    if abs(float(domain.level(q))) > BOUNDARY_TOL:
        raise ValidationError(f"{name} is not on the domain boundary")


def solve_boundary_value(ctx, model, domain, q0, q, *, check_unique=False, tol=SHOOT_TOL, **kw):
    """Trajectory at energy ``ctx.E`` entering at ``q0`` and leaving at ``q``.

    Returns a :class:`BoundaryDatum` with transit time ``s``, exit velocity
    ``k``, entry velocity ``k0`` and metric length ``l``.

    Raises
    ------
    NoConvergence
        Neither the chord-seeded Newton iteration nor the multistart fan converged.
    NonUnique
        With ``check_unique``: two distinct converged directions were found.
    """
    ctx.validate(model)
    q0 = np.asarray(q0, float)
    q = np.asarray(q, float)
    _check_boundary_point(domain, q0, "q0")
    _check_boundary_point(domain, q, "q")
    if np.linalg.norm(q - q0) == 0:
        raise ValidationError("q0 and q must differ")
    shot = solve_many(ctx, model, domain, q0[None], q[None], check_unique=check_unique, tol=tol, **kw)
    if not shot.converged[0]:
        raise NoConvergence(f"shooting from {q0} to {q} did not converge (residual {shot.residual[0]:.3e})")
    return BoundaryDatum(q0, q, float(shot.time[0]), shot.exit_velocity[0], shot.start_velocity[0],
                         float(shot.length[0]))


def grid_pairs(N, delta):
    """Ordered index pairs ``(i, j)`` of a uniform ``N`` grid with wrapped distance ``>= delta``."""
    if N < 8:
        raise ValidationError("grid size must be at least 8")
    if not delta > 0:
        raise ValidationError("the diagonal band delta must be positive")
    theta = 2 * np.pi * np.arange(N) / N
    i, j = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    d = np.abs(theta[i] - theta[j])
    d = np.minimum(d, 2 * np.pi - d)
    keep = (i != j) & (d >= delta - 1e-12)
    return theta, i[keep], j[keep]


def boundary_grid(ctx, model, domain, N, delta=0.2, *, warm_start=True, tol=SHOOT_TOL, **kw):
    """Boundary data for all ordered pairs of ``N`` uniform boundary parameters.

    Rows are solved in sequence; each row is one batch seeded from the
    previous row's directions rotated by the grid step (exact for radial
    fields on a disk, a good guess otherwise).  Pairs that fail even after
    the multistart fallback are listed in ``failures``.
    """
    if domain.dimension != 2:
        raise ValidationError("boundary_grid parametrizes planar domains")
    ctx.validate(model)
    theta, I, J = grid_pairs(N, delta)
    Q0 = domain.point(theta[I])
    Q = domain.point(theta[J])
    m = len(I)
    dirs = np.zeros((m, 2))
    fields = None
    ok = np.zeros(m, dtype=bool)
    prev = None
    dtheta = 2 * np.pi / N
    for row in range(N):
        sel = np.flatnonzero(I == row)
        guess = None
        if warm_start and prev is not None:
            off = (J[sel] - row) % N
            pd = {int((J[p] - (row - 1)) % N): dirs[p] for p in prev if ok[p]}
            guess = np.array([pd.get(int(o), Q[s] - Q0[s]) for o, s in zip(off, sel)])
            rot = np.array([int(o) in pd for o in off])
            guess[rot] = _rotate(guess[rot], np.full(rot.sum(), dtheta))
        shot = solve_many(ctx, model, domain, Q0[sel], Q[sel], guess, tol=tol, **kw)
        if fields is None:
            fields = {k: np.zeros((m,) + getattr(shot, k).shape[1:], getattr(shot, k).dtype)
                      for k in ("exit_velocity", "start_velocity", "time", "length")}
        for k in fields:
            fields[k][sel] = getattr(shot, k)
        dirs[sel] = shot.direction
        ok[sel] = shot.converged
        prev = sel
    failures = [(int(I[p]), int(J[p]), f"no convergence (residual > {tol:g})") for p in np.flatnonzero(~ok)]
    good = ok
    return BoundaryDataset(theta[I][good], theta[J][good], Q0[good], Q[good], fields["time"][good],
                           fields["exit_velocity"][good], fields["start_velocity"][good], fields["length"][good],
                           np.stack([I, J], axis=1)[good], ctx.E, ctx.c, failures)


def antisymmetry_residual(dataset):
    """``max |k0(q0, q) + k(q, q0)|`` over pairs present in both orders."""
    look = dataset.lookup()
    worst = 0.0
    for (i, j), r in look.items():
        t = look.get((j, i))
        if t is not None:
            worst = max(worst, float(np.linalg.norm(dataset.k0[r] + dataset.k[t])))
    return worst


def uniqueness_probe(ctx, model, domain, starts, targets, *, count=8, **kw):
    """Spread of converged multistart directions per problem (``< 1e-7`` means unique).

    Returns ``(spread, n_converged)``.
    """
    fan = multistart(ctx, model, domain, starts, targets, count=count, **kw)
    return distinct_spread(fan)


__all__ = [
    "BoundaryDatum", "BoundaryDataset", "ShotBatch", "shoot", "multistart", "solve_many",
    "solve_boundary_value", "boundary_grid", "grid_pairs", "antisymmetry_residual", "uniqueness_probe",
    "directions", "SolverError",
]
