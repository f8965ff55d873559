"""Experiment configuration: TOML parsing, validation and model construction."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__
from . import generators as gens
from .errors import ConfigError
from .potentials import LatticePotential, OccupationPairPotential, PotentialTerm, QuadraticEnergy, RadialPairPotential
from .statespace import BINARY, COMPOSITION, DEFAULT_CAPACITY, TRUNCATED, SiteSet, state_count

TASKS = ("verify", "gap", "bounds", "sweep", "scaling")
MODEL_KINDS = ("kawasaki-complete", "kawasaki-nn", "zero-range", "glauber",
               "continuum-kawasaki", "continuum-glauber")

DEFAULT_TOLERANCES = {
    "identity": 1e-10,
    "axiom": 1e-11,
    "eigen": 1e-8,
    "detailed_balance": 1e-12,
    "ordering": 1e-8,
    "bakry_emery": 1e-8,
}
DEFAULT_SOLVER = {"dense_cap": 4000, "method": "auto", "iterative_tol": 1e-10, "certify": True,
                  "capacity": DEFAULT_CAPACITY}
DEFAULT_VERIFY = {"n_functions": 100, "n_axiom_functions": 200}
DEFAULT_BUDGET = {"max_states": 2_000_000}


@dataclass
class ExperimentConfig:
    name: str
    tasks: list
    seed: int
    model: dict
    potential: dict
    sweep: dict = field(default_factory=dict)
    scaling: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    budget: dict = field(default_factory=dict)
    fault: dict = field(default_factory=dict)
    source: str = ""

    def canonical(self) -> dict:
        """Inputs that determine results (no paths, no name)."""
        return {"seed": self.seed, "model": self.model, "potential": self.potential,
                "solver": self.solver, "tolerances": self.tolerances, "verify": self.verify,
                "fault": self.fault, "tool_version": __version__}

    def with_point(self, overrides: dict) -> "ExperimentConfig":
        out = copy.deepcopy(self)
        for key, value in overrides.items():
            section, _, name = key.rpartition(".")
            target = {"model": out.model, "potential": out.potential}.get(section or "model")
            if target is None:
                raise ConfigError(f"sweep key {key!r} must live in [model] or [potential]")
            target[name] = value
        return out


def config_hash(payload: dict) -> str:
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(text.encode()).hexdigest()[:24]


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def _section(raw: dict, name: str, required: bool = False) -> dict:
    value = raw.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    if required and not value:
        raise ConfigError(f"missing required section [{name}]")
    return dict(value)


def _need(section: dict, key: str, where: str, kind=None):
    if key not in section:
        raise ConfigError(f"missing field {where}.{key}")
    value = section[key]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"field {where}.{key} has type {type(value).__name__}")
    return value


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    exp = _section(raw, "experiment", required=True)
    tasks = exp.get("tasks")
    if not isinstance(tasks, list) or not tasks:
        raise ConfigError(f"{source}: experiment.tasks must be a nonempty list")
    for t in tasks:
        if t not in TASKS:
            raise ConfigError(f"{source}: experiment.tasks has unknown task {t!r}")
    model = _section(raw, "model", required=True)
    kind = _need(model, "kind", "model", str)
    if kind not in MODEL_KINDS:
        raise ConfigError(f"{source}: model.kind {kind!r} not one of {', '.join(MODEL_KINDS)}")
    potential = _section(raw, "potential")
    sweep = _section(raw, "sweep")
    for key, values in sweep.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"{source}: sweep.{key} must be a nonempty list")
    if "sweep" in tasks and not sweep:
        raise ConfigError(f"{source}: sweep task needs a nonempty [sweep] section")
    scaling = _section(raw, "scaling")
    if "scaling" in tasks:
        sizes = scaling.get("sizes")
        if not isinstance(sizes, list) or not sizes:
            raise ConfigError(f"{source}: scaling.sizes must be a nonempty list")
    seed = exp.get("seed")
    if seed is None:
        raise ConfigError(f"{source}: experiment.seed is required for random-function checks")
    cfg = ExperimentConfig(
        name=str(exp.get("name", Path(source).stem)),
        tasks=list(tasks),
        seed=int(seed),
        model=model,
        potential=potential,
        sweep=sweep,
        scaling=scaling,
        solver={**DEFAULT_SOLVER, **_section(raw, "solver")},
        tolerances={**DEFAULT_TOLERANCES, **_section(raw, "tolerances")},
        verify={**DEFAULT_VERIFY, **_section(raw, "verify")},
        budget={**DEFAULT_BUDGET, **_section(raw, "budget")},
        fault=_section(raw, "fault"),
        source=source,
    )
    # fail early on malformed model/potential fields
    describe_model(cfg.with_point(scaling_points(cfg)[0]) if "scaling" in tasks else cfg)
    return cfg


def scaling_points(cfg: ExperimentConfig) -> list[dict]:
    """Segment lengths from [scaling] with N = floor(density L)."""
    density = float(cfg.scaling.get("density", 0.5))
    periodic = bool(cfg.model.get("lattice", {}).get("periodic", False))
    return [{"model.lattice": {"shape": [int(L)], "periodic": periodic},
             "model.N": max(1, int(math.floor(L * density)))} for L in cfg.scaling["sizes"]]


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))


# ---------------------------------------------------------------------------
# Geometry and potentials
# ---------------------------------------------------------------------------

def _label(value):
    return tuple(int(v) for v in value) if isinstance(value, list) else (int(value),)


def build_sites(model: dict) -> SiteSet:
    lattice = model.get("lattice", {})
    if "shape" in lattice:
        sites = SiteSet.box(lattice["shape"], periodic=bool(lattice.get("periodic", False)))
    elif "n" in lattice:
        sites = SiteSet.box([int(lattice["n"])], periodic=bool(lattice.get("periodic", False)))
    else:
        raise ConfigError("model.lattice needs 'shape' or 'n'")
    boundary = model.get("boundary")
    if boundary:
        try:
            tau = {_label(lab): int(v) for lab, v in boundary}
        except (TypeError, ValueError) as exc:
            raise ConfigError("model.boundary must be a list of [site, value] pairs") from exc
        sites = sites.with_boundary(tau)
    return sites


def lattice_potential(pot: dict, sites: SiteSet) -> LatticePotential:
    kind = pot.get("kind", "none")
    if kind == "none":
        return LatticePotential()
    if kind == "nn-pair":
        return LatticePotential.nn_pair(sites, float(_need(pot, "coupling", "potential")))
    if kind == "terms":
        terms = []
        for i, entry in enumerate(_need(pot, "terms", "potential", list)):
            try:
                support = tuple(_label(s) for s in entry["support"])
                table = np.asarray(entry["table"], dtype=float).reshape((2,) * len(support))
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"potential.terms[{i}] malformed: {exc}") from exc
            terms.append(PotentialTerm(support, table))
        return LatticePotential(tuple(terms))
    raise ConfigError(f"potential.kind {kind!r} not valid for exchange dynamics")


def quadratic_energy(pot: dict, sites: SiteSet) -> QuadraticEnergy:
    kind = pot.get("kind", "zero")
    if kind in ("zero", "none"):
        return QuadraticEnergy.zero(sites.n)
    if kind == "torus":
        return QuadraticEnergy.torus_model(sites, float(_need(pot, "beta", "potential")),
                                           float(_need(pot, "mass", "potential")))
    if kind == "matrix":
        J = np.asarray(_need(pot, "J", "potential", list), dtype=float)
        if J.shape != (sites.n, sites.n):
            raise ConfigError(f"potential.J must be {sites.n}x{sites.n}")
        return QuadraticEnergy(J)
    raise ConfigError(f"potential.kind {kind!r} not valid for zero-range dynamics")


def occupation_potential(pot: dict, d: int) -> OccupationPairPotential:
    kind = pot.get("kind", "none")
    s = float(pot.get("self_coupling", 0.0))
    if kind == "none":
        return OccupationPairPotential(self_coupling=s)
    if kind == "kernel-nn":
        base = OccupationPairPotential.nearest_neighbour(float(_need(pot, "kappa", "potential")), d)
        return OccupationPairPotential(base.kernel, self_coupling=s)
    if kind == "kernel":
        kernel = {}
        for entry in _need(pot, "entries", "potential", list):
            *disp, value = entry
            kernel[tuple(int(v) for v in disp)] = float(value)
        return OccupationPairPotential(kernel, self_coupling=s)
    raise ConfigError(f"potential.kind {kind!r} not valid for Glauber dynamics")


def radial_potential(pot: dict) -> RadialPairPotential:
    kind = pot.get("kind")
    try:
        if kind == "indicator":
            return RadialPairPotential.indicator(pot["theta"], pot["radius"])
        if kind == "exponential":
            return RadialPairPotential.exponential(pot["amplitude"], pot["length"])
        if kind == "power":
            return RadialPairPotential.power(pot["amplitude"], pot["length"], pot["exponent"])
        if kind == "tabulated":
            return RadialPairPotential("tabulated", {"radii": list(pot["radii"]), "values": list(pot["values"])})
    except KeyError as exc:
        raise ConfigError(f"missing field potential.{exc.args[0]} for {kind} profile") from exc
    raise ConfigError(f"potential.kind {kind!r} is not a radial profile")


def rate_function(spec):
    if isinstance(spec, list):
        table = [float(v) for v in spec]
        return lambda k: table[k] if k < len(table) else table[-1]
    if spec in (None, "linear"):
        return lambda k: float(k)
    if spec == "constant":
        return lambda k: 1.0 if k > 0 else 0.0
    if spec == "exponential":
        return lambda k: math.exp(k) if k > 0 else 0.0
    raise ConfigError(f"model.rates {spec!r} must be linear, constant, exponential or a table")


# ---------------------------------------------------------------------------
# Model construction
# ---------------------------------------------------------------------------

def describe_model(cfg: ExperimentConfig) -> dict:
    """Model descriptor with the predicted state count (no enumeration)."""
    m = cfg.model
    kind = m["kind"]
    try:
        if kind in ("kawasaki-complete", "kawasaki-nn"):
            sites = build_sites(m)
            N = int(_need(m, "N", "model"))
            count = state_count(BINARY, sites.n, N=N)
        elif kind == "zero-range":
            sites = build_sites(m)
            N = int(_need(m, "N", "model"))
            count = state_count(COMPOSITION, sites.n, N=N)
        elif kind == "glauber":
            sites = build_sites(m)
            count = state_count(TRUNCATED, sites.n, M=int(_need(m, "M", "model")),
                                total_cap=m.get("total_cap"))
        else:
            box = [float(v) for v in _need(m, "box", "model", list)]
            h = float(_need(m, "h", "model"))
            n = int(np.prod([math.ceil(L / h - 1e-12) for L in box]))
            if kind == "continuum-kawasaki":
                count = state_count(COMPOSITION, n, N=int(_need(m, "N", "model")))
            else:
                count = state_count(TRUNCATED, n, M=int(_need(m, "M", "model")), total_cap=m.get("total_cap"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{cfg.source}: bad model field: {exc}") from exc
    return {"kind": kind, "params": {k: v for k, v in m.items() if k != "kind"},
            "potential": cfg.potential, "states": int(count)}


def build_generator(cfg: ExperimentConfig) -> gens.ReversibleGenerator:
    m, pot = cfg.model, cfg.potential
    kind = m["kind"]
    cap = int(cfg.solver.get("capacity", DEFAULT_CAPACITY))
    beta = float(m.get("beta", 0.0))
    if kind in ("kawasaki-complete", "kawasaki-nn"):
        sites = build_sites(m)
        potential = lattice_potential(pot, sites)
        build = gens.build_kawasaki_complete if kind == "kawasaki-complete" else gens.build_kawasaki_nn
        return build(sites, potential, beta, int(m["N"]), capacity=cap)
    if kind == "zero-range":
        sites = build_sites(m)
        return gens.build_zero_range(sites, rate_function(m.get("rates")), quadratic_energy(pot, sites),
                                     int(m["N"]), capacity=cap)
    if kind == "glauber":
        sites = build_sites(m)
        potential = occupation_potential(pot, sites.dimension)
        return gens.build_glauber_discrete(sites, float(_need(m, "lam", "model")), potential, beta,
                                           int(m["M"]), total_cap=m.get("total_cap"), capacity=cap)
    phi = radial_potential(pot)
    if kind == "continuum-kawasaki":
        return gens.build_continuum_kawasaki_discretized(m["box"], phi, beta, int(m["N"]), float(m["h"]),
                                                         capacity=cap)
    return gens.build_continuum_glauber_discretized(m["box"], phi, beta, float(_need(m, "z", "model")),
                                                    float(m["h"]), int(m["M"]), total_cap=m.get("total_cap"),
                                                    capacity=cap)
