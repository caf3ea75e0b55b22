"""Command-line driver: ``relnewt <command> --config cfg.json ...``.

Exit codes: 0 success, 2 validation or usage error, 3 solver failure.
Reports are JSON with sorted keys; wall-clock timestamps and timings are
kept under the ``meta`` key so the rest of a report is reproducible.
"""

import argparse
import datetime
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import RelNewtError, SolverError, ValidationError

THREADS_ENV = "RELNEWT_THREADS"


# -- helpers -------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_report(path, body, meta):
    out = dict(_jsonable(body))
    out["meta"] = _jsonable(meta)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _stats(x):
    x = np.asarray(x, float)
    if x.size == 0:
        return {"count": 0}
    return {"count": int(x.size), "max": float(np.max(x)), "mean": float(np.mean(x)),
            "median": float(np.median(x))}


def _threads(args):
    n = args.threads
    if n is None and os.environ.get(THREADS_ENV):
        try:
            n = int(os.environ[THREADS_ENV])
        except ValueError:
            raise ValidationError(f"{THREADS_ENV} must be an integer") from None
    if n is not None and n < 1:
        raise ValidationError("--threads must be positive")
    return n


def _outdir(args, cfg):
    d = Path(args.out if args.out else cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _load(args, require_support=False):
    from .config import load_config

    if not args.config:
        raise ValidationError("--config is required for this command")
    return load_config(args.config, require_support=require_support)


class _Clock:
    def __init__(self):
        self.t0 = time.perf_counter()
        self.stages = {}
        self._last = self.t0

    def mark(self, name):
        now = time.perf_counter()
        self.stages[name] = now - self._last
        self._last = now

    def meta(self, args, extra=None):
        m = {"created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
             "elapsed_s": time.perf_counter() - self.t0, "timings_s": self.stages, "version": __version__,
             "python": platform.python_version(), "command": args.command, "threads": args.threads_resolved}
        if getattr(args, "config", None):
            m["config"] = str(args.config)
        if extra:
            m.update(extra)
        return m


# -- commands ------------------------------------------------------------------

def cmd_trajectory(args, clock):
    from .dynamics import DomainExit, SupportExit, TimeReached, integrate, shell_state

    cfg = _load(args)
    out = _outdir(args, cfg)
    ctx, model, dom = cfg.ctx, cfg.model, cfg.build_domain()
    ctx.validate(model)
    x0 = np.asarray(args.start, float)
    if x0.size != cfg.dimension or len(args.direction) != cfg.dimension:
        raise ValidationError("start and direction must have the configured dimension")
    start = shell_state(ctx, model, x0, np.asarray(args.direction, float))
    stop = {"domain": lambda: DomainExit(dom), "support": lambda: SupportExit(model),
            "time": lambda: TimeReached(args.t_end)}[args.stop]()
    traj = integrate(ctx, model, start, stop, rtol=cfg.rtol, atol=cfg.atol)
    clock.mark("integrate")
    from .io import write_trajectory

    write_trajectory(traj, out / "trajectory.csv")
    if args.plot:
        from .plotting import plot_trajectories

        plot_trajectories([traj], dom, out / "trajectory.svg")
    fin = traj.final
    body = {"samples": traj.n_samples, "duration": traj.duration, "max_energy_drift": traj.max_drift,
            "final_x": fin.x, "final_p": fin.p}
    write_report(out / "trajectory_report.json", body, clock.meta(args))
    return 0


def cmd_boundary_data(args, clock):
    from .boundary import antisymmetry_residual, boundary_grid
    from .io import write_boundary

    cfg = _load(args)
    out = _outdir(args, cfg)
    N = args.grid or cfg.grids.get("boundary", 32)
    delta = args.delta if args.delta is not None else cfg.delta
    ds = boundary_grid(cfg.ctx, cfg.model, cfg.build_domain(), N, delta, **cfg.solver_kwargs())
    clock.mark("solve")
    write_boundary(ds, out / "boundary.csv")
    body = {"grid": N, "delta": delta, "rows": len(ds), "failures": ds.failures,
            "antisymmetry_residual": antisymmetry_residual(ds), "energy": cfg.energy, "c": cfg.c}
    write_report(out / "boundary_report.json", body, clock.meta(args))
    return 0 if not ds.failures else 3


def cmd_scattering_data(args, clock):
    from .io import write_scattering
    from .scattering import scattering_grid

    cfg = _load(args)
    out = _outdir(args, cfg)
    g = cfg.grids
    n_phi = args.n_phi or g.get("n_phi", 32)
    n_rho = args.n_rho or g.get("n_rho", 33)
    rho_max = args.rho_max or g.get("rho_max", 1.0)
    ds = scattering_grid(cfg.ctx, cfg.model, n_phi, rho_max, n_rho, rtol=cfg.rtol, atol=cfg.atol)
    clock.mark("solve")
    write_scattering(ds, out / "scattering.csv")
    body = {"n_phi": n_phi, "n_rho": n_rho, "rho_max": rho_max, "rows": len(ds),
            "crossing_rows": int(np.sum(ds.chi == 2)), "energy": cfg.energy, "c": cfg.c}
    write_report(out / "scattering_report.json", body, clock.meta(args))
    return 0


def _detect_schema(path):
    with open(path) as fh:
        head = fh.readline().strip().split(",")
    if head and head[0] == "theta0":
        return "boundary"
    if head and head[0].startswith("phi"):
        return "scattering"
    from .errors import SchemaMismatch

    raise SchemaMismatch(f"{path}: header matches neither boundary nor scattering schema", 1)


def cmd_convert(args, clock):
    from .boundary import BoundaryDatum
    from .convert import (boundary_to_scattering_batch, scattering_from_datum, scattering_to_boundary_batch)
    from .inverse import converted_scattering_dataset
    from .io import read_boundary, read_scattering, write_boundary, write_scattering
    from .model import check_support_inside

    cfg = _load(args, require_support=True)
    out = _outdir(args, cfg)
    dom = cfg.build_domain()
    check_support_inside(cfg.model, dom)
    kind = _detect_schema(args.input)
    body = {"input": str(args.input), "input_schema": kind}
    if kind == "boundary":
        ds = read_boundary(args.input, cfg.energy, cfg.c)
        sc = converted_scattering_dataset(ds, dom)
        clock.mark("convert")
        write_scattering(sc, out / "scattering.csv")
        q0, q, s, k, k0, _ = scattering_to_boundary_batch(dom, sc.v_minus, sc.x_minus, sc.a, sc.b)
        res = np.max(np.abs(np.column_stack([q0 - ds.q0, q - ds.q, s - ds.s, k - ds.k, k0 - ds.k0])), axis=1)
        body.update({"output": "scattering.csv", "rows": len(sc), "round_trip_residual": _stats(res)})
        if args.verify:
            A, B, _, _ = boundary_to_scattering_batch(cfg.ctx, cfg.model, dom, sc.v_minus, sc.x_minus,
                                                      rtol=cfg.rtol, atol=cfg.atol)
            body["forward_check"] = _stats(np.max(np.abs(np.column_stack([A - sc.a, B - sc.b])), axis=1))
    else:
        sc = read_scattering(args.input)
        hit = sc.chi == 2
        q0, q, s, k, k0, _ = scattering_to_boundary_batch(dom, sc.v_minus[hit], sc.x_minus[hit], sc.a[hit],
                                                          sc.b[hit])
        from .boundary import BoundaryDataset

        th0, th1 = dom.parameter(q0), dom.parameter(q)
        ds = BoundaryDataset(th0, th1, q0, q, s, k, k0, np.full(len(s), np.nan),
                             np.zeros((len(s), 2), int), cfg.energy, cfg.c, [])
        clock.mark("convert")
        write_boundary(ds, out / "boundary.csv")
        back = [scattering_from_datum(dom, BoundaryDatum(q0[i], q[i], float(s[i]), k[i], k0[i]))
                for i in range(len(s))]
        sel = np.flatnonzero(hit)
        res = [max(np.abs(b.a - sc.a[j]).max(), np.abs(b.b - sc.b[j]).max(),
                   np.abs(b.x_minus - sc.x_minus[j]).max()) for b, j in zip(back, sel)]
        body.update({"output": "boundary.csv", "rows": len(s), "skipped_non_crossing": int(np.sum(~hit)),
                     "round_trip_residual": _stats(res)})
    clock.mark("check")
    write_report(out / "report.json", body, clock.meta(args))
    return 0


def cmd_geodesic_check(args, clock):
    from .maupertuis import MetricField, lemma31_residual

    cfg = _load(args)
    out = _outdir(args, cfg)
    dom = cfg.build_domain()
    rng = np.random.default_rng(args.seed if args.seed is not None else cfg.seed)
    body = {"chords": args.chords, "fixtures": {}}
    for i, model in enumerate(cfg.models()):
        cfg.ctx.validate(model)
        t0 = rng.uniform(0, 2 * np.pi, args.chords)
        t1 = t0 + rng.uniform(0.3, 2 * np.pi - 0.3, args.chords)
        dist, speed = [], []
        for a, b in zip(t0, t1):
            d, mech, geo = lemma31_residual(cfg.ctx, model, dom, dom.point(a), dom.point(b), return_parts=True)
            dist.append(d)
            field_ = MetricField(model, cfg.ctx)
            speed.append(max(mech.speed_residual(field_), geo.speed_residual(field_)))
        body["fixtures"][f"V{i + 1}"] = {"distance": _stats(dist), "unit_speed": _stats(speed)}
        clock.mark(f"V{i + 1}")
    write_report(out / "geodesic_report.json", body, clock.meta(args))
    return 0


def cmd_hodograph(args, clock):
    from .hodograph import hodograph_grid
    from .io import write_hodograph

    cfg = _load(args)
    out = _outdir(args, cfg)
    dom = cfg.build_domain()
    g = cfg.grids
    nz = args.n_zeta or g.get("n_zeta", 32)
    nx = args.n_x or (g.get("n_beta", nz) if args.target == "boundary" else g.get("n_psi", nz))
    layout = args.layout or cfg.mesh.get("layout", "uniform")
    fld = hodograph_grid(cfg.ctx, cfg.model, dom, nz, nx, args.target, cfg.delta, layout=layout,
                         n_r=args.n_r or g.get("n_r"), band_nodes=cfg.mesh.get("band_nodes"),
                         **cfg.solver_kwargs())
    clock.mark("solve")
    write_hodograph(fld, out / "hodograph.csv", out / "field_meta.json", cfg.model)
    if args.plot and args.target == "interior":
        from .plotting import plot_winding

        plot_winding(fld.theta_zeta, fld.alpha()[:, 0], out / "nu_winding.svg")
    body = {"shape": list(fld.shape), "target": args.target, "failures": fld.failures}
    write_report(out / "hodograph_report.json", body, clock.meta(args))
    return 0 if not fld.failures else 3


def cmd_stability(args, clock):
    from .stability import phi0_details, theorem31_check

    cfg = _load(args)
    out = _outdir(args, cfg)
    models = cfg.models()
    if len(models) != 2:
        raise ValidationError("stability needs a config with two potentials")
    dom = cfg.build_domain()
    g = cfg.grids
    nz = args.n_zeta or g.get("n_zeta", 64)
    rep = theorem31_check(models[0], models[1], cfg.ctx, dom, n_zeta=nz, n_beta=args.n_beta or g.get("n_beta", nz),
                          delta=cfg.delta, layout=cfg.mesh.get("layout", "graded"),
                          band_nodes=cfg.mesh.get("band_nodes"), n_psi=args.n_psi or g.get("n_psi", 64),
                          n_r=args.n_r or g.get("n_r", 48), with_phi1=not args.no_phi1, spectral=args.spectral,
                          **cfg.solver_kwargs())
    clock.mark("theorem31_check")
    body = rep.to_dict()
    timings = body.pop("timings")
    if args.plot:
        from .hodograph import hodograph_grid
        from .plotting import plot_phi0_integrand

        kw = dict(layout=cfg.mesh.get("layout", "graded"), band_nodes=cfg.mesh.get("band_nodes"))
        b1 = hodograph_grid(cfg.ctx, models[0], dom, nz, nz, "boundary", cfg.delta, **kw)
        b2 = hodograph_grid(cfg.ctx, models[1], dom, nz, nz, "boundary", cfg.delta, **kw)
        plot_phi0_integrand(b1, phi0_details(b1, b2, dom).integrand, out / "phi0_integrand.svg")
    write_report(out / "stability_report.json", body, clock.meta(args, {"stage_timings_s": timings}))
    return 0 if rep.passed else 3


def cmd_invert(args, clock):
    from .inverse import BumpParametrization, reconstruct
    from .io import read_boundary, read_scattering
    from .model import make_potential

    cfg = _load(args, require_support=True)
    dom = cfg.build_domain()
    with open(args.param_spec) as fh:
        spec = json.load(fh)
    if "lattice" in spec:
        lat = spec["lattice"]
        par = BumpParametrization.lattice(lat["center"], lat["spacing"], lat["radius"], tuple(lat.get("shape", (3, 3))))
    else:
        par = BumpParametrization.from_dict(spec)
    kind = args.mode or _detect_schema(args.data)
    ds = read_boundary(args.data, cfg.energy, cfg.c) if kind == "boundary" else read_scattering(args.data)
    truth = spec.get("truth")
    if truth is None and cfg.potentials and cfg.potentials[0]:
        truth = make_potential(cfg.potentials[0], cfg.dimension)
    seed = args.seed if args.seed is not None else cfg.seed
    rep = reconstruct(ds, par, cfg.ctx, dom, reg=args.reg, seed=seed, mode=kind, init=spec.get("init"),
                      truth=truth, rtol=cfg.rtol, atol=cfg.atol)
    clock.mark("reconstruct")
    path = Path(args.out) if args.out else Path(cfg.output_dir) / "invert_report.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    body = rep.to_dict()
    body.update({"mode": kind, "data": str(args.data), "rows": len(ds)})
    write_report(path, body, clock.meta(args))
    return 0


def cmd_energy_threshold(args, clock):
    from dataclasses import asdict

    from .errors import ThresholdNotFound
    from .simplicity import estimate_energy_threshold

    cfg = _load(args)
    out = _outdir(args, cfg)
    lo, hi = args.range
    body = {"range": [lo, hi]}
    code = 0
    try:
        E, reps = estimate_energy_threshold(cfg.model, cfg.build_domain(), cfg.c, (lo, hi), rel_tol=args.rel_tol,
                                            chords=args.chords, seed=cfg.seed, return_reports=True)
        body.update({"threshold": E, "found": True, "evaluations": [asdict(r) for r in reps]})
    except ThresholdNotFound as exc:
        body.update({"threshold": None, "found": False, "message": str(exc)})
        code = 3
    clock.mark("bisection")
    write_report(out / "threshold_report.json", body, clock.meta(args))
    return code


COMMANDS = {
    "trajectory": cmd_trajectory, "boundary-data": cmd_boundary_data, "scattering-data": cmd_scattering_data,
    "convert": cmd_convert, "geodesic-check": cmd_geodesic_check, "hodograph": cmd_hodograph,
    "stability": cmd_stability, "invert": cmd_invert, "energy-threshold": cmd_energy_threshold,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--out", help="output directory (file path for invert)")
    common.add_argument("--threads", type=int, help=f"worker cap (falls back to ${THREADS_ENV})")
    common.add_argument("--seed", type=int)
    common.add_argument("--plot", action="store_true", help="also write SVG figures")

    p = argparse.ArgumentParser(prog="relnewt", description="Fixed-energy relativistic Newton experiments.")
    p.add_argument("--version", action="version", version=f"relnewt {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    s = sub.add_parser("trajectory", parents=[common], help="integrate one shell trajectory")
    s.add_argument("--start", type=float, nargs="+", required=True)
    s.add_argument("--direction", type=float, nargs="+", required=True)
    s.add_argument("--stop", choices=("domain", "support", "time"), default="domain")
    s.add_argument("--t-end", type=float, default=1.0)

    s = sub.add_parser("boundary-data", parents=[common], help="boundary data on a uniform grid")
    s.add_argument("--grid", type=int)
    s.add_argument("--delta", type=float)

    s = sub.add_parser("scattering-data", parents=[common], help="scattering data on M_E")
    s.add_argument("--n-phi", type=int)
    s.add_argument("--n-rho", type=int)
    s.add_argument("--rho-max", type=float)

    s = sub.add_parser("convert", parents=[common], help="boundary.csv <-> scattering.csv")
    s.add_argument("--input", required=True)
    s.add_argument("--verify", action="store_true", help="also check against forward flights")

    s = sub.add_parser("geodesic-check", parents=[common], help="trajectory vs geodesic residuals")
    s.add_argument("--chords", type=int, default=20)

    s = sub.add_parser("hodograph", parents=[common], help="hodograph field on a grid")
    s.add_argument("--target", choices=("boundary", "interior"), default="boundary")
    s.add_argument("--n-zeta", type=int)
    s.add_argument("--n-x", type=int)
    s.add_argument("--n-r", type=int)
    s.add_argument("--layout", choices=("uniform", "graded"))

    s = sub.add_parser("stability", parents=[common], help="Phi0/Phi1 integrals and the stability bound")
    s.add_argument("--n-zeta", type=int)
    s.add_argument("--n-beta", type=int)
    s.add_argument("--n-psi", type=int)
    s.add_argument("--n-r", type=int)
    s.add_argument("--no-phi1", action="store_true")
    s.add_argument("--spectral", action="store_true", help="also report the spectral Phi0 route")

    s = sub.add_parser("invert", parents=[common], help="fit bump amplitudes to a dataset")
    s.add_argument("--data", required=True)
    s.add_argument("--mode", choices=("boundary", "scattering"))
    s.add_argument("--param-spec", required=True)
    s.add_argument("--reg", type=float, default=0.0)

    s = sub.add_parser("energy-threshold", parents=[common], help="estimate the simplicity threshold")
    s.add_argument("--range", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    s.add_argument("--rel-tol", type=float, default=1e-3)
    s.add_argument("--chords", type=int, default=16)
    return p


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    clock = _Clock()
    try:
        args.threads_resolved = _threads(args)
        return COMMANDS[args.command](args, clock)
    except (ValidationError, ValueError) as exc:
        print(f"relnewt {args.command}: invalid input: {exc}", file=sys.stderr)
        return 2
    except (SolverError, RelNewtError) as exc:
        print(f"relnewt {args.command}: solver failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"relnewt {args.command}: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())
