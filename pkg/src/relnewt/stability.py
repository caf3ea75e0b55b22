"""Planar stability functionals for pairs of potentials at fixed energy.

For two potentials with hodographs ``l_1, l_2`` and ``dl = l_2 - l_1``:

* ``Phi0`` on boundary pairs reduces in the plane to
  ``dx(dl) ^ dzeta(dl)``; with the product orientation
  ``d theta_zeta ^ d theta_x`` its integral is
  ``-int int d(dl)/d theta_zeta * d(dl)/d theta_x``.
* ``Phi1`` on boundary-by-interior pairs has density
  ``(r_1^2 - P) d alpha_1/d theta + (r_2^2 - P) d alpha_2/d theta`` with
  ``P = grad_x l_1 . grad_x l_2`` and ``alpha_i`` the angle of ``nu_i``.

The two integrals agree, and ``int_D (r_1 - r_2)^2 dx`` is bounded by
``int Phi0 / (2 pi)``.
"""

import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .errors import GridMismatch, ValidationError
from .hodograph import hodograph_grid, polar_grid
from .maupertuis import MetricField

SLACK_RTOL = 1e-3


def stability_constant(n):
    """``Gamma(n/2) / (2 pi^(n/2) (n-1)!)``; ``1/(2 pi)`` in the plane."""
    return special.gamma(n / 2) / (2 * np.pi ** (n / 2) * special.factorial(n - 1))


def _same_grid(f1, f2, target):
    if f1.target != target or f2.target != target:
        raise GridMismatch(f"both fields must have target {target!r}")
    if f1.l.shape != f2.l.shape or not np.allclose(f1.theta_zeta, f2.theta_zeta, rtol=0, atol=1e-14):
        raise GridMismatch("fields live on different grids")
    if not np.allclose(f1.weights, f2.weights, rtol=0, atol=1e-14) or f1.delta != f2.delta:
        raise GridMismatch("fields use different quadrature weights or band")
    if f1.beta is not None and not np.allclose(f1.beta, f2.beta, rtol=0, atol=1e-14):
        raise GridMismatch("fields use different offsets")
    f1.require_complete()
    f2.require_complete()


def _boundary_derivatives(fld, domain_tangent):
    """``(d l / d theta_zeta, d l / d theta_x)`` from the stored momenta."""
    Tz = domain_tangent(fld.theta_zeta)[:, None, :]
    Tx = domain_tangent(fld.theta_x)
    dz = np.einsum("ijk,ijk->ij", fld.grad_zeta(), np.broadcast_to(Tz, fld.k0.shape))
    dx = np.einsum("ijk,ijk->ij", fld.grad_x(), Tx)
    return dz, dx


def _legendre_diff(values, nodes, a, b):
    """Derivative at Gauss-Legendre ``nodes`` on ``[a, b]`` of the interpolant through ``values``."""
    N = nodes.size
    t = (2 * nodes - (a + b)) / (b - a)
    V = np.polynomial.legendre.legvander(t, N - 1)
    coef = np.linalg.solve(V, values.T)
    d = np.polynomial.legendre.legder(coef)
    return np.polynomial.legendre.legval(t, d) * (2.0 / (b - a))


def _spectral_derivatives(fld, dl):
    """``(d/d theta_zeta, d/d theta_x)`` of ``dl`` by FFT in rows and Legendre in offsets."""
    Nz = dl.shape[0]
    kk = np.fft.fftfreq(Nz, 1.0 / Nz)
    if Nz % 2 == 0:
        kk[Nz // 2] = 0.0
    d_row = np.real(np.fft.ifft(1j * kk[:, None] * np.fft.fft(dl, axis=0), axis=0))
    d_beta = np.empty_like(dl)
    delta = fld.delta
    band = fld.band if fld.band is not None else np.zeros(dl.shape[1], bool)
    nb = int(band.sum() // 2)
    segments = [(slice(nb, dl.shape[1] - nb), delta, 2 * np.pi - delta)]
    if nb:
        segments += [(slice(0, nb), delta / 2, delta),
                     (slice(dl.shape[1] - nb, dl.shape[1]), 2 * np.pi - delta, 2 * np.pi - delta / 2)]
    for sl, a, b in segments:
        d_beta[:, sl] = _legendre_diff(dl[:, sl], fld.beta[sl], a, b)
    # at fixed theta_x: d/d theta_zeta = d/d theta_zeta|beta - d/d beta
    return d_row - d_beta, d_beta


@dataclass
class Phi0Result:
    value: float
    core: float
    with_half_band: float
    integrand: np.ndarray = field(repr=False)


def phi0_details(field1, field2, domain, *, method="momentum", extrapolate=True):
    """Integral of ``Phi0`` with its pieces; see :func:`phi0_integral`."""
    _same_grid(field1, field2, "boundary")
    if method == "momentum":
        z1, x1 = _boundary_derivatives(field1, domain.tangent)
        z2, x2 = _boundary_derivatives(field2, domain.tangent)
        dz, dx = z2 - z1, x2 - x1
    elif method == "spectral":
        if field1.meta.get("layout") != "graded":
            raise ValidationError("the spectral route needs the graded offset layout")
        dz, dx = _spectral_derivatives(field1, field2.l - field1.l)
    else:
        raise ValidationError(f"unknown method {method!r}")
    dens = -dz * dx
    hz = 2 * np.pi / len(field1.theta_zeta)
    cols = hz * (dens.sum(axis=0))
    band = field1.band if field1.band is not None else np.zeros(len(cols), bool)
    core = float(np.sum(cols[~band] * field1.weights[~band]))
    half = float(core + np.sum(cols[band] * field1.weights[band]))
    value = 2.0 * half - core if (extrapolate and band.any()) else half
    return Phi0Result(value, core, half, dens)


def phi0_integral(field1, field2, domain, *, method="momentum", extrapolate=True):
    """``int Phi0`` over boundary pairs for two fields on the same grid.

    ``method="momentum"`` uses the stored endpoint momenta for the
    tangential derivatives; ``"spectral"`` differentiates ``l_2 - l_1``
    (FFT in ``theta_zeta``, Legendre in the offset).  With band nodes the
    excluded diagonal band is extrapolated from the integrals over
    ``|beta| >= delta`` and ``|beta| >= delta / 2``.
    """
    return phi0_details(field1, field2, domain, method=method, extrapolate=extrapolate).value


def _periodic_derivative(f, h):
    """Fourth-order central difference along axis 0 of periodic samples."""
    return (-np.roll(f, -2, 0) + 8 * np.roll(f, -1, 0) - 8 * np.roll(f, 1, 0) + np.roll(f, 2, 0)) / (12 * h)


def dalpha_dtheta(fld):
    """``d alpha / d theta`` at each node; integrates to exactly ``2 pi`` per column."""
    th = fld.theta_zeta
    h = 2 * np.pi / len(th)
    a = fld.alpha() - th[:, None]
    return 1.0 + _periodic_derivative(a, h)


def phi1_density(field1, field2, metric1=None, metric2=None):
    """Pointwise ``Phi1`` density on the ``(theta, x)`` grid."""
    _same_grid(field1, field2, "interior")
    g1, g2 = field1.grad_x(), field2.grad_x()
    if metric1 is not None:
        r1 = metric1.r(field1.x)[None, :]
        r2 = metric2.r(field2.x)[None, :]
    else:
        r1 = np.linalg.norm(g1, axis=-1)
        r2 = np.linalg.norm(g2, axis=-1)
    P = np.einsum("ijk,ijk->ij", g1, g2)
    return (r1**2 - P) * dalpha_dtheta(field1) + (r2**2 - P) * dalpha_dtheta(field2)


def phi1_integral(field1, field2, metric1=None, metric2=None):
    """``int Phi1`` over boundary-by-interior pairs (polar quadrature in ``x``)."""
    dens = phi1_density(field1, field2, metric1, metric2)
    h = 2 * np.pi / len(field1.theta_zeta)
    return float(h * np.sum(dens.sum(axis=0) * field1.weights))


def lhs_integral(model1, model2, ctx, domain, n_psi=256, n_r=128):
    """``int_D (r_1 - r_2)(r_1^(n-1) - r_2^(n-1)) dx`` by polar quadrature."""
    n = domain.dimension
    if n != 2:
        raise ValidationError("the planar functionals need n = 2")
    pts, w, _, _ = polar_grid(domain, n_psi, n_r)
    r1 = MetricField(model1, ctx).r(pts)
    r2 = MetricField(model2, ctx).r(pts)
    return float(np.sum(w * (r1 - r2) * (r1 ** (n - 1) - r2 ** (n - 1))))


@dataclass
class StabilityReport:
    lhs: float
    phi0_integral: float
    phi1_integral: float
    rhs: float
    slack: float
    lemma32_gap: float
    constant: float
    passed: bool
    mesh: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def theorem31_check(model1, model2, ctx, domain, *, n_zeta=64, n_beta=64, delta=0.2, layout="graded",
                    band_nodes=None, n_psi=64, n_r=48, n_zeta_interior=None, with_phi1=True,
                    tolerance=SLACK_RTOL, spectral=False, fields=None, **kw):
    """Evaluate both sides of the stability estimate and the ``Phi0 = Phi1`` identity.

    ``fields`` may supply pre-built ``(b1, b2, i1, i2)`` hodograph fields.
    """
    if domain.dimension != 2:
        raise ValidationError("the planar functionals need n = 2")
    ctx.validate(model1)
    ctx.validate(model2)
    timings = {}
    t0 = time.perf_counter()
    if fields is None:
        b1 = hodograph_grid(ctx, model1, domain, n_zeta, n_beta, "boundary", delta, layout=layout,
                            band_nodes=band_nodes, **kw)
        b2 = hodograph_grid(ctx, model2, domain, n_zeta, n_beta, "boundary", delta, layout=layout,
                            band_nodes=band_nodes, **kw)
    else:
        b1, b2 = fields[0], fields[1]
    timings["boundary_fields"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    res0 = phi0_details(b1, b2, domain)
    extra = {"phi0_core": res0.core, "phi0_half_band": res0.with_half_band}
    if spectral:
        extra["phi0_spectral"] = phi0_integral(b1, b2, domain, method="spectral")
    timings["phi0"] = time.perf_counter() - t0
    phi1 = float("nan")
    if with_phi1:
        t0 = time.perf_counter()
        nzi = n_zeta_interior or n_zeta
        if fields is None:
            i1 = hodograph_grid(ctx, model1, domain, nzi, n_psi, "interior", delta, n_r=n_r, **kw)
            i2 = hodograph_grid(ctx, model2, domain, nzi, n_psi, "interior", delta, n_r=n_r, **kw)
        else:
            i1, i2 = fields[2], fields[3]
        timings["interior_fields"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        phi1 = phi1_integral(i1, i2, MetricField(model1, ctx), MetricField(model2, ctx))
        timings["phi1"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    lhs = lhs_integral(model1, model2, ctx, domain)
    timings["lhs"] = time.perf_counter() - t0
    const = float(stability_constant(2))
    rhs = const * res0.value
    slack = rhs - lhs
    gap = abs(res0.value - phi1) if with_phi1 else float("nan")
    mesh = {"n_zeta": n_zeta, "n_beta": n_beta, "delta": delta, "layout": layout,
            "band_nodes": int(b1.band.sum() // 2) if b1.band is not None else 0,
            "n_psi": n_psi, "n_r": n_r, "n_zeta_interior": n_zeta_interior or n_zeta}
    passed = bool(slack >= -tolerance * abs(rhs) - 1e-14)
    return StabilityReport(lhs, res0.value, phi1, rhs, slack, gap, const, passed, mesh, timings, extra)
