"""JSON experiment configuration with a strict schema.

Units: ``c`` and ``E`` are in the same (arbitrary) config units; lengths
are in domain units and times follow from them.  Potentials are lists of
cubic bumps ``{"center": [...], "amplitude": A, "radius": rho}``.
"""

import json
from dataclasses import dataclass, field

import jsonschema

from .dynamics import DEFAULT_ATOL, DEFAULT_RTOL, EnergyContext
from .errors import ConfigError
from .model import ConvexDomain, check_support_inside, make_potential

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 3}
_BUMP = {
    "type": "object",
    "properties": {"center": _VEC, "amplitude": _NUM, "radius": {"type": "number", "exclusiveMinimum": 0}},
    "required": ["center", "amplitude", "radius"],
    "additionalProperties": False,
}
_POT = {"type": "array", "items": _BUMP}
_POS_INT = {"type": "integer", "minimum": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "c": {"type": "number", "exclusiveMinimum": 0},
        "dimension": {"enum": [2, 3]},
        "energy": _NUM,
        "domain": {
            "type": "object",
            "properties": {
                "type": {"enum": ["disk", "ball", "ellipse"]},
                "center": _VEC,
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "radii": _VEC,
            },
            "required": ["type", "center"],
            "additionalProperties": False,
        },
        "potential": _POT,
        "potentials": {"type": "array", "items": _POT, "minItems": 2, "maxItems": 2},
        "integrator": {
            "type": "object",
            "properties": {"rtol": _NUM, "atol": _NUM, "drift_tol": _NUM},
            "additionalProperties": False,
        },
        "shooting": {
            "type": "object",
            "properties": {"tol": _NUM, "max_iter": _POS_INT, "fd_step": _NUM, "max_turn": _NUM},
            "additionalProperties": False,
        },
        "grids": {
            "type": "object",
            "properties": {"boundary": _POS_INT, "n_zeta": _POS_INT, "n_beta": _POS_INT, "n_psi": _POS_INT,
                           "n_r": _POS_INT, "n_phi": _POS_INT, "n_rho": _POS_INT, "rho_max": _NUM},
            "additionalProperties": False,
        },
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "mesh": {
            "type": "object",
            "properties": {"layout": {"enum": ["uniform", "graded"]}, "band_nodes": _POS_INT},
            "additionalProperties": False,
        },
        "seed": {"type": "integer"},
        "output_dir": {"type": "string"},
    },
    "required": ["c", "dimension", "energy", "domain"],
    "additionalProperties": False,
}


@dataclass
class ExperimentConfig:
    c: float
    dimension: int
    energy: float
    domain: dict
    potentials: list
    integrator: dict = field(default_factory=dict)
    shooting: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)
    delta: float = 0.2
    mesh: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "out"
    name: str = ""

    @property
    def ctx(self):
        return EnergyContext(self.energy, self.c, self.dimension)

    def build_domain(self):
        d = self.domain
        if d["type"] in ("disk", "ball"):
            if "radius" not in d:
                raise ConfigError("disk/ball domains need a radius")
            return ConvexDomain.disk(tuple(d["center"]), d["radius"])
        if "radii" not in d:
            raise ConfigError("ellipse domains need radii")
        return ConvexDomain.ellipse(tuple(d["center"]), tuple(d["radii"]))

    def models(self):
        return [make_potential(p, self.dimension) for p in self.potentials]

    @property
    def model(self):
        return self.models()[0]

    @property
    def rtol(self):
        return self.integrator.get("rtol", DEFAULT_RTOL)

    @property
    def atol(self):
        return self.integrator.get("atol", DEFAULT_ATOL)

    def solver_kwargs(self):
        kw = {"rtol": self.rtol, "atol": self.atol}
        kw.update({k: v for k, v in self.shooting.items() if k in ("tol", "max_iter", "fd_step", "max_turn")})
        return kw

    def validate(self, require_support=False):
        """Check the energy shell and (optionally) ``supp V`` inside ``D``."""
        dom = self.build_domain()
        if dom.dimension != self.dimension:
            raise ConfigError("domain dimension does not match 'dimension'")
        ctx = self.ctx
        for m in self.models():
            try:
                ctx.validate(m)
                if require_support:
                    check_support_inside(m, dom)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        return self


def config_from_dict(data, *, require_support=False):
    """Validate ``data`` against :data:`SCHEMA` and build an :class:`ExperimentConfig`."""
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    if "potential" in data and "potentials" in data:
        raise ConfigError("give either 'potential' or 'potentials', not both")
    pots = data.get("potentials") or [data.get("potential", [])]
    cfg = ExperimentConfig(
        c=float(data["c"]), dimension=int(data["dimension"]), energy=float(data["energy"]),
        domain=data["domain"], potentials=pots, integrator=data.get("integrator", {}),
        shooting=data.get("shooting", {}), grids=data.get("grids", {}), delta=float(data.get("delta", 0.2)),
        mesh=data.get("mesh", {}), seed=int(data.get("seed", 0)), output_dir=data.get("output_dir", "out"),
        name=data.get("name", ""),
    )
    return cfg.validate(require_support)


def load_config(path, *, require_support=False):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(data, require_support=require_support)
