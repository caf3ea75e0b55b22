"""Parametric reconstruction of a potential from boundary or scattering data.

The potential is a sum of cubic bumps with fixed centres and radii; only
the amplitudes are fitted.  The fit is a damped (Levenberg-Marquardt)
least-squares iteration with a ridge term ``lam * |params|^2`` and a
forward-difference Jacobian.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from .boundary import BoundaryDataset, _unit, solve_many
from .errors import NotConverged, RelNewtError, ValidationError
from .model import Bump, PotentialModel, check_support_inside
from .scattering import ScatteringDataset, solve_scattering_batch

JAC_STEP = 1e-6


@dataclass(frozen=True)
class BumpParametrization:
    """Bumps with fixed ``centers`` and ``radii``; parameters are the amplitudes."""

    centers: tuple
    radii: tuple

    def __post_init__(self):
        if len(self.centers) != len(self.radii) or not self.centers:
            raise ValidationError("need matching, non-empty centres and radii")

    @property
    def size(self):
        return len(self.centers)

    @property
    def dimension(self):
        return len(self.centers[0])

    def model(self, params):
        params = np.asarray(params, float)
        if params.shape != (self.size,):
            raise ValidationError(f"expected {self.size} amplitudes, got shape {params.shape}")
        bumps = tuple(Bump(tuple(map(float, c)), float(a), float(r))
                      for c, a, r in zip(self.centers, params, self.radii))
        return PotentialModel(bumps, self.dimension)

    @classmethod
    def lattice(cls, center, spacing, radius, shape=(3, 3)):
        """Regular lattice of equal bumps centred on ``center``."""
        c = np.asarray(center, float)
        offs = [(np.arange(m) - (m - 1) / 2) * spacing for m in shape]
        grid = np.stack(np.meshgrid(*offs, indexing="ij"), axis=-1).reshape(-1, len(shape))
        centers = tuple(tuple(map(float, c + g)) for g in grid)
        return cls(centers, (float(radius),) * len(centers))

    def to_dict(self):
        return {"centers": [list(c) for c in self.centers], "radii": list(self.radii)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(tuple(map(float, c)) for c in d["centers"]), tuple(map(float, d["radii"])))


def _mode(dataset, mode):
    if mode is None:
        mode = "boundary" if isinstance(dataset, BoundaryDataset) else "scattering"
    if mode == "boundary" and not isinstance(dataset, BoundaryDataset):
        raise ValidationError("boundary mode needs a boundary dataset")
    if mode == "scattering" and not isinstance(dataset, ScatteringDataset):
        raise ValidationError("scattering mode needs a scattering dataset")
    return mode


def _admissible(model, ctx, domain):
    ctx.validate(model)
    check_support_inside(model, domain)


def predict(model, dataset, ctx, domain, mode=None, *, guesses=None, return_directions=False, **kw):
    """Predicted observables and a row mask of successful solves.

    Boundary mode predicts the exit velocity ``k`` of the chord ``q0 -> q``,
    warm-started from ``guesses`` or the observed departure direction.
    Scattering mode predicts ``(a, b)`` for rows whose asymptote crosses the
    support.
    """
    mode = _mode(dataset, mode)
    _admissible(model, ctx, domain)
    dirs = None
    if mode == "boundary":
        g = _unit(dataset.k0) if guesses is None else guesses
        shot = solve_many(ctx, model, domain, dataset.q0, dataset.q, g, **kw)
        out, ok, dirs = shot.exit_velocity, shot.converged, shot.direction
    else:
        A, B, _ = solve_scattering_batch(ctx, model, dataset.v_minus, dataset.x_minus, **kw)
        out = np.concatenate([A, B], axis=1)
        ok = np.all(np.isfinite(out), axis=1)
    return (out, ok, dirs) if return_directions else (out, ok)


def _observed(dataset, mode):
    if mode == "boundary":
        return dataset.k
    return np.concatenate([dataset.a, dataset.b], axis=1)


def misfit(params, dataset, ctx, domain, parametrization, mode=None, *, return_dropped=False, state=None, **kw):
    """Stacked residuals ``predicted - observed`` over the dataset rows.

    Rows whose forward solve fails contribute zeros (so the vector length is
    fixed) and are counted in the second return value when
    ``return_dropped`` is set.  A dict ``state`` carries the shooting
    directions of the previous call as warm starts for the next one.
    """
    mode = _mode(dataset, mode)
    model = parametrization.model(params)
    guesses = None if state is None else state.get("directions")
    pred, ok, dirs = predict(model, dataset, ctx, domain, mode, guesses=guesses, return_directions=True, **kw)
    if state is not None and dirs is not None:
        state["directions"] = np.where(ok[:, None], dirs, _unit(dataset.k0))
    r = np.where(ok[:, None], pred - _observed(dataset, mode), 0.0).ravel()
    if return_dropped:
        return r, int(np.sum(~ok))
    return r


@dataclass
class ReconstructionReport:
    params: list
    misfit_history: list
    param_error: float
    reg: float
    iterations: int
    converged: bool
    seed: int
    restarts: int = 0
    dropped_rows: int = 0
    relative_l2_error: float = float("nan")
    truth: list = None
    parametrization: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _lm(resid, p0, lam, max_iter, tol, mu0=1e-3):
    """Levenberg-Marquardt on ``|r(p)|^2 + lam |p|^2``; returns ``(p, history, iters, ok)``."""
    p = np.array(p0, float)
    m = p.size
    sq = np.sqrt(lam)

    def cost(rv, pv):
        return float(rv @ rv + lam * pv @ pv)

    r = resid(p)
    f = cost(r, p)
    hist = [f]
    mu = mu0
    for it in range(1, max_iter + 1):
        J = np.empty((r.size, m))
        for j in range(m):
            d = np.zeros(m)
            d[j] = JAC_STEP
            J[:, j] = (resid(p + d) - r) / JAC_STEP
        Ja = np.vstack([J, sq * np.eye(m)])
        ra = np.concatenate([r, sq * p])
        g = Ja.T @ ra
        H = Ja.T @ Ja
        if np.linalg.norm(g, np.inf) <= tol * max(1.0, f):
            return p, hist, it - 1, True
        accepted = False
        while mu < 1e12:
            step = np.linalg.solve(H + mu * np.diag(np.diag(H) + 1e-300), -g)
            try:
                r_new = resid(p + step)
                f_new = cost(r_new, p + step)
            except RelNewtError:
                f_new = np.inf
            if f_new < f:
                accepted = True
                break
            mu *= 10.0
        if not accepted:
            # no descent left: converged only if the cost has collapsed
            return p, hist, it, f <= tol * hist[0]
        p = p + step
        r = r_new
        small = (np.linalg.norm(step) <= tol * (1.0 + np.linalg.norm(p)) or f_new <= tol * hist[0]
                 or f - f_new <= 1e-8 * f)
        f = f_new
        hist.append(f)
        mu = max(mu / 10.0, 1e-12)
        if small:
            return p, hist, it, True
    return p, hist, max_iter, False


def potential_l2_error(model, truth, domain, n=201):
    """Relative ``L^2(D)`` distance between two potentials on a tensor grid."""
    lo = np.asarray(domain.center) - np.asarray(domain.radii)
    hi = np.asarray(domain.center) + np.asarray(domain.radii)
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    X = X[domain.inside(X)]
    d = model.value(X) - truth.value(X)
    t = truth.value(X)
    den = np.sqrt(np.sum(t * t))
    return float(np.sqrt(np.sum(d * d)) / den) if den > 0 else float(np.sqrt(np.sum(d * d)))


def reconstruct(dataset, parametrization, ctx, domain, *, reg=0.0, seed=0, mode=None, init=None,
                truth=None, max_iter=30, tol=1e-12, restarts=3, init_scale=0.05, **kw):
    """Fit bump amplitudes to ``dataset``.

    The first run starts from ``init`` (zeros by default); if it stalls,
    up to ``restarts`` further runs start from seeded random amplitudes of
    size ``init_scale``, and the best run is reported.

    Raises
    ------
    NotConverged
        No run converged.
    """
    mode = _mode(dataset, mode)
    m = parametrization.size
    rng = np.random.default_rng(seed)

    state = {}

    def resid(p):
        return misfit(p, dataset, ctx, domain, parametrization, mode, state=state, **kw)

    starts = [np.zeros(m) if init is None else np.asarray(init, float)]
    best = None
    for attempt in range(restarts + 1):
        if attempt >= len(starts):
            starts.append(init_scale * rng.uniform(-1, 1, m))
        p, hist, iters, ok = _lm(resid, starts[attempt], reg, max_iter, tol)
        if best is None or hist[-1] < best[1][-1]:
            best = (p, hist, iters, ok, attempt)
        if ok:
            break
    p, hist, iters, ok, attempt = best
    if not ok:
        raise NotConverged(f"no converged fit after {restarts + 1} starts (best cost {hist[-1]:.3e})")
    _, dropped = misfit(p, dataset, ctx, domain, parametrization, mode, return_dropped=True, **kw)
    err = float("nan")
    rel = float("nan")
    tp = None
    if truth is not None:
        if isinstance(truth, PotentialModel):
            rel = potential_l2_error(parametrization.model(p), truth, domain)
            if len(truth.bumps) == m:
                tp = [b.amplitude for b in truth.bumps]
        else:
            tp = list(map(float, truth))
            rel = potential_l2_error(parametrization.model(p), parametrization.model(tp), domain)
        if tp is not None:
            err = float(np.max(np.abs(p - np.asarray(tp))))
    return ReconstructionReport([float(v) for v in p], [float(h) for h in hist], err, float(reg), int(iters),
                                bool(ok), int(seed), int(attempt), int(dropped), rel, tp,
                                parametrization.to_dict())


def converted_scattering_dataset(dataset, domain):
    """Scattering data on ``M_E`` obtained from boundary data by the converse formulas."""
    from .convert import scattering_from_datum

    sc = [scattering_from_datum(domain, dataset.datum(i)) for i in range(len(dataset))]
    V = np.array([d.v_minus for d in sc])
    X = np.array([d.x_minus for d in sc])
    phi = np.arctan2(V[:, 1], V[:, 0]) if V.shape[1] == 2 else np.zeros(len(sc))
    if V.shape[1] == 2:
        rho = X[:, 1] * np.cos(phi) - X[:, 0] * np.sin(phi)
    else:
        rho = np.linalg.norm(X, axis=1)
    return ScatteringDataset(phi, rho, V, X, np.array([d.a for d in sc]), np.array([d.b for d in sc]),
                             np.array([d.chi for d in sc]))
