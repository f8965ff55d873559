"""Command-line driver: verify, gap, sweep and scaling experiments."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import logging
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import bochner as bo
from . import bounds as bd
from . import generators as gens
from . import spectral as sp
from .config import ExperimentConfig, build_generator, config_hash, describe_model, load_config, scaling_points
from .errors import BudgetError, ConfigError, GaplabError, NotApplicableError

log = logging.getLogger("gaplab")

CERTIFY_CAP = 2500  # dense generalised eigenproblem above this gets slow


@dataclass
class ResultRecord:
    config_hash: str
    task: str
    model: dict
    point: dict = field(default_factory=dict)
    seed: int = 0
    exact_gap: float | None = None
    certified: float | None = None  # 2 k*
    bounds: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)
    assertions: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    tool_version: str = __version__

    @property
    def passed(self) -> bool:
        return not self.errors and all(self.assertions.values())

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, default=_plain)

    @classmethod
    def from_dict(cls, data: dict) -> "ResultRecord":
        return cls(**data)


def _plain(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _normalise(data):
    """Round-trip through JSON so fresh and cached records compare alike."""
    return json.loads(json.dumps(data, sort_keys=True, default=_plain))


# ---------------------------------------------------------------------------
# Cache
# ---------------------------------------------------------------------------

def _cache_path(out: Path, key: str) -> Path:
    return out / "cache" / f"{key}.json"


def cache_load(out: Path, key: str) -> ResultRecord | None:
    path = _cache_path(out, key)
    if not path.exists():
        return None
    try:
        return ResultRecord.from_dict(json.loads(path.read_text()))
    except (json.JSONDecodeError, TypeError):
        log.warning("ignoring unreadable cache entry %s", path)
        return None


def cache_store(out: Path, record: ResultRecord) -> None:
    path = _cache_path(out, record.config_hash)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(record.to_json())
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Single-point computations
# ---------------------------------------------------------------------------

def _fault(gen: gens.ReversibleGenerator, fault: dict) -> gens.ReversibleGenerator:
    factor = fault.get("corrupt_rate")
    if factor is None:
        return gen
    state, move = fault.get("state"), fault.get("move")
    if state is None or move is None:
        # first genuine transition in the table
        live = (gen.crates > 0) & (gen.targets != np.arange(gen.size)[:, None])
        state, move = map(int, np.argwhere(live)[0])
    return gens.corrupt_rate(gen, int(state), int(move), float(factor))


def _record(cfg: ExperimentConfig, task: str, point: dict) -> ResultRecord:
    key = config_hash({**cfg.canonical(), "task": task})
    return ResultRecord(config_hash=key, task=task, model=_normalise(describe_model(cfg)),
                        point=_normalise(point), seed=cfg.seed)


def compute_verify(cfg: ExperimentConfig, point: dict | None = None) -> ResultRecord:
    rec = _record(cfg, "verify", point or {})
    tol = cfg.tolerances
    t0 = time.perf_counter()
    gen = _fault(build_generator(cfg), cfg.fault)
    rec.timings["build"] = time.perf_counter() - t0
    res = rec.residuals
    res["detailed_balance"] = gens.check_detailed_balance(gen)
    res["stationarity"] = gens.stationarity_residual(gen)
    t0 = time.perf_counter()
    try:
        rk = bo.rkernel_for(gen)
        ax = bo.verify_axioms(gen, rk, int(cfg.verify["n_axiom_functions"]), seed=cfg.seed)
        res.update({"A2": ax.a2, "A3": ax.a3, "A4": ax.a4})
        F = bo.random_functions(gen.size, int(cfg.verify["n_functions"]), cfg.seed)
        res["lemma1"] = max(r.rel_error for r in bo.check_bochner_identity(gen, rk, F, cfg.seed))
        res["corollary1"] = max(r.rel_error for r in bo.check_corollary1(gen, rk, F, cfg.seed))
        tag = gen.model_tag.replace("+corrupted", "")
        if tag == "kawasaki-complete":
            res["overlap"] = max(r.rel_error for r in bo.kawasaki_overlap_identity(gen, F, cfg.seed))
        if tag == "zero-range":
            res["mean"] = max(r.rel_error for r in bo.zero_range_mean_identity(gen, F, cfg.seed))
            n = gen.space.n_sites
            res["jump_balance"] = max(gens.check_zero_range_balance(gen, F[:, 0], x, z)
                                      for x in range(n) for z in range(n) if x != z)
    except GaplabError as exc:
        rec.errors.append(f"{type(exc).__name__}: {exc}")
    rec.timings["checks"] = time.perf_counter() - t0
    limits = {"detailed_balance": tol["detailed_balance"], "stationarity": tol["identity"],
              "A2": tol["axiom"], "A3": tol["axiom"], "A4": tol["axiom"],
              "lemma1": tol["identity"], "corollary1": tol["identity"], "overlap": tol["identity"],
              "mean": tol["identity"], "jump_balance": tol["identity"]}
    for name, value in res.items():
        rec.assertions[f"{name}<=tol"] = bool(value <= limits[name])
    return rec


def _closed_form_bounds(gen: gens.ReversibleGenerator, cfg: ExperimentConfig, extras: dict):
    tag = gen.model_tag
    p = gen.params
    if tag == "kawasaki-complete":
        return [bd.kawasaki_bound(p["beta"], p["norm"], p["triple_norm"])]
    if tag == "zero-range":
        return bd.zero_range_bounds(gen)
    if tag == "glauber-discrete":
        pot = gen.extras["potential"]
        eps = bd.glauber_eps(pot, p["beta"])
        # the finite chain is truncated at the occupancy cap
        return [bd.glauber_bound(p["lam"], eps, rigorous=False)]
    if tag in ("continuum-kawasaki", "continuum-glauber"):
        phi = gen.extras["phi"]
        d = len(p["box"])
        eps = bd.continuum_eps(bd.QuadratureSpec(d, phi, atol=cfg.tolerances["identity"]), p["beta"])
        eps_h = bd.discrete_eps(phi, p["beta"], p["h"], d)
        extras.update({"eps": eps, "eps_h": eps_h})
        if tag == "continuum-kawasaki":
            extras["slack"] = bd.discretization_slack(p["N"], p["volume"], eps, eps_h)
            return bd.continuum_kawasaki_bounds(p["N"], p["volume"], eps, eps_h)
        extras["slack"] = p["z"] * abs(eps_h - eps)
        return bd.continuum_glauber_bounds(p["z"], eps, eps_h, truncated=True)
    return []


ZERO_RANGE_CHAIN = ("jjbound", "jbound", "cobound", "teom-delta")


def compute_gap(cfg: ExperimentConfig, point: dict | None = None, task: str = "gap") -> ResultRecord:
    rec = _record(cfg, task, point or {})
    tol = cfg.tolerances
    solver = cfg.solver
    t0 = time.perf_counter()
    gen = _fault(build_generator(cfg), cfg.fault)
    rec.timings["build"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    spec = sp.spectral_gap(gen, method=solver["method"], tol=float(solver["iterative_tol"]),
                           dense_cap=int(solver["dense_cap"]))
    rec.timings["gap"] = time.perf_counter() - t0
    gap = spec.gap
    rec.exact_gap = gap
    rec.residuals["eigen"] = spec.residual
    rec.residuals["null"] = spec.null_residual
    rec.extras["method"] = spec.method
    rec.extras["states"] = gen.size

    eig_tol, ord_tol = tol["eigen"], tol["ordering"]
    rec.assertions["eigen_residual<=tol"] = bool(spec.residual <= eig_tol * max(1.0, gap))

    t0 = time.perf_counter()
    reports = _closed_form_bounds(gen, cfg, rec.extras)
    if gen.model_tag == "zero-range":
        mb = bo.m_matrix_bound(gen)
        reports.append(bd.BoundReport("cobound", mb.cobound_value, {}, "weighted diagonal dominance of M"))
        reports.append(bd.BoundReport("teom-delta", mb.teom_delta, {"argmin_state": mb.argmin_state},
                                      "pointwise minimum eigenvalue of M on occupied sites"))
    select = cfg.model.get("bounds")
    if select:
        reports = [b for b in reports if b.name in select]
    rec.bounds = _normalise([b.to_dict() for b in reports])
    rec.timings["bounds"] = time.perf_counter() - t0

    certify = bool(solver.get("certify", True)) and gen.size <= int(solver.get("certify_cap", CERTIFY_CAP))
    if certify:
        t0 = time.perf_counter()
        try:
            ck = bo.certified_k(gen, bo.rkernel_for(gen))
            rec.certified = ck.gap_bound
        except NotApplicableError as exc:
            rec.errors.append(str(exc))
        rec.timings["certify"] = time.perf_counter() - t0
    if rec.certified is not None:
        rec.assertions["certified<=gap"] = bool(rec.certified <= gap + ord_tol)

    live = [b for b in reports if b.rigorous and not b.vacuous]
    for b in live:
        rec.assertions[f"{b.name}<=gap"] = bool(b.value <= gap + ord_tol)
        if rec.certified is not None:
            rec.assertions[f"{b.name}<=certified"] = bool(b.value <= rec.certified + ord_tol)
    if gen.model_tag == "zero-range":
        chain = [b for name in ZERO_RANGE_CHAIN for b in live if b.name == name]
        for lo, hi in zip(chain, chain[1:]):
            rec.assertions[f"{lo.name}<={hi.name}"] = bool(lo.value <= hi.value + ord_tol)
    for b in reports:
        if not b.rigorous:
            rec.extras.setdefault("margins", {})[b.name] = gap - b.value

    n_be = int(cfg.verify.get("n_functions", 100))
    be = sp.bakry_emery_check(gen, spec, n_be, cfg.seed)
    rec.residuals["bakry_emery_violation"] = be.max_violation
    rec.residuals["bakry_emery_eigvec"] = be.eigvec_defect
    rec.assertions["bakry_emery"] = bool(be.max_violation <= tol["bakry_emery"]
                                         and be.eigvec_defect <= tol["bakry_emery"])
    return rec


def compute_point(task: str, cfg: ExperimentConfig, point: dict) -> ResultRecord:
    if task == "verify":
        return compute_verify(cfg, point)
    return compute_gap(cfg, point, task=task)


def _guarded(task: str, cfg: ExperimentConfig, point: dict) -> ResultRecord:
    try:
        return compute_point(task, cfg, point)
    except GaplabError as exc:
        rec = _record(cfg, task, point)
        rec.errors.append(f"{type(exc).__name__}: {exc}")
        return rec


def run_points(task: str, cfg: ExperimentConfig, points: list[dict], out: Path,
               workers: int = 1) -> list[ResultRecord]:
    """Evaluate each grid point, reusing cached records keyed by config hash."""
    cfgs = [cfg.with_point(p) for p in points]
    records: list[ResultRecord | None] = []
    todo = []
    for i, (c, p) in enumerate(zip(cfgs, points)):
        key = config_hash({**c.canonical(), "task": task})
        hit = cache_load(out, key)
        if hit is not None:
            hit.timings = {"cached": 1.0}
            log.info("cache hit %s", key)
        else:
            todo.append(i)
        records.append(hit)
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            fresh = list(pool.map(_guarded, [task] * len(todo), [cfgs[i] for i in todo],
                                  [points[i] for i in todo]))
    else:
        fresh = [_guarded(task, cfgs[i], points[i]) for i in todo]
    for i, rec in zip(todo, fresh):
        if not rec.errors:
            cache_store(out, rec)
        records[i] = rec
    return records


# ---------------------------------------------------------------------------
# Tasks
# ---------------------------------------------------------------------------

def run_verify(cfg: ExperimentConfig, out: Path, workers: int = 1) -> list[ResultRecord]:
    return run_points("verify", cfg, [{}], out, workers)


def run_gap_and_bounds(cfg: ExperimentConfig, out: Path, workers: int = 1) -> list[ResultRecord]:
    return run_points("gap", cfg, [{}], out, workers)


def sweep_points(cfg: ExperimentConfig) -> list[dict]:
    keys = list(cfg.sweep)
    out = []
    for combo in itertools.product(*(cfg.sweep[k] for k in keys)):
        point = {}
        for k, v in zip(keys, combo):
            if k == "size":
                point["model.lattice"] = {**cfg.model.get("lattice", {}), "shape": [int(v)]}
            else:
                point[k if "." in k else f"model.{k}"] = v
        out.append(point)
    return out


def check_budget(cfg: ExperimentConfig, points: list[dict]) -> int:
    total = sum(describe_model(cfg.with_point(p))["states"] for p in points)
    cap = int(cfg.budget["max_states"])
    if total > cap:
        raise BudgetError(f"sweep needs about {total} states in total over {len(points)} points; "
                          f"budget.max_states is {cap}")
    return total


def run_sweep(cfg: ExperimentConfig, out: Path, workers: int = 1) -> list[ResultRecord]:
    points = sweep_points(cfg)
    check_budget(cfg, points)
    return run_points("sweep", cfg, points, out, workers)


def run_scaling(cfg: ExperimentConfig, out: Path, workers: int = 1) -> list[ResultRecord]:
    if cfg.model["kind"] != "kawasaki-nn":
        raise ConfigError("scaling needs model.kind = 'kawasaki-nn'")
    points = scaling_points(cfg)
    check_budget(cfg, points)
    return run_points("scaling", cfg, points, out, workers)


def scaling_summary(cfg: ExperimentConfig, records: list[ResultRecord]) -> dict:
    rows = []
    for rec in records:
        if rec.exact_gap is None:
            continue
        L = rec.point["model.lattice"]["shape"][0]
        rows.append({"L": L, "gap": rec.exact_gap, "gap_L2": rec.exact_gap * L * L,
                     "gap_diam2": rec.exact_gap * (L - 1) ** 2})
    vals = [r["gap_L2"] for r in rows]
    lo, hi = (min(vals), max(vals)) if vals else (float("nan"), float("nan"))
    ratio = hi / lo if vals and lo > 0 else float("inf")
    max_ratio = float(cfg.scaling.get("max_ratio", 4.0))
    return {"rows": rows, "c1": lo, "c2": hi, "ratio": ratio, "max_ratio": max_ratio,
            "passed": bool(vals) and lo > 0 and ratio <= max_ratio}


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, (list, dict)):
        return json.dumps(value, separators=(";", "=")).replace(",", ";")
    return str(value)


def summary_rows(records: list[ResultRecord]) -> tuple[list[str], list[list]]:
    params: list[str] = []
    names: list[str] = []
    for rec in records:
        for k in rec.point:
            if k not in params:
                params.append(k)
        for b in rec.bounds:
            if b["name"] not in names:
                names.append(b["name"])
    header = params + ["states", "exact_gap", "certified"] + names + ["passed"]
    rows = []
    for rec in records:
        by_name = {b["name"]: b["value"] for b in rec.bounds}
        row = [_param_value(rec.point.get(k)) for k in params]
        row += [rec.extras.get("states"), rec.exact_gap, rec.certified]
        row += [by_name.get(n) for n in names]
        row.append(rec.passed)
        rows.append(row)
    return header, rows


def _param_value(value):
    # lattice tables collapse to their linear size
    if isinstance(value, dict) and "shape" in value:
        shape = value["shape"]
        return shape[0] if len(shape) == 1 else "x".join(map(str, shape))
    return value


def write_outputs(task: str, records: list[ResultRecord], out: Path, figures: bool = True,
                  extra: dict | None = None) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    paths = {"records": out / "records.jsonl", "summary": out / f"{task}_summary.csv"}
    with open(paths["records"], "a") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
    header, rows = summary_rows(records)
    with open(paths["summary"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    if extra is not None:
        paths["extra"] = out / f"{task}_summary.json"
        paths["extra"].write_text(json.dumps(extra, sort_keys=True, indent=1, default=_plain) + "\n")
    if figures and task in ("sweep", "scaling") and rows:
        from . import plotting
        paths["figure"] = out / f"{task}.png"
        if task == "sweep":
            plotting.sweep_figure(header, rows, paths["figure"])
        else:
            plotting.scaling_figure(extra["rows"], extra, paths["figure"])
    return paths


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

RUNNERS = {"verify": run_verify, "gap": run_gap_and_bounds, "sweep": run_sweep, "scaling": run_scaling}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaplab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"gaplab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="experiment TOML file")
        p.add_argument("--out", type=Path, default=Path("gaplab-out"), help="output directory")
        p.add_argument("--workers", type=int, default=1, help="parallel grid points")
        p.add_argument("--seed", type=int, default=None, help="override experiment.seed")
        p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def execute(command: str, cfg: ExperimentConfig, out: Path, workers: int = 1,
            figures: bool = True) -> tuple[bool, list[ResultRecord], dict]:
    accepted = {command, "bounds"} if command == "gap" else {command}
    if not accepted & set(cfg.tasks):
        raise ConfigError(f"{cfg.source}: task {command!r} is not listed in experiment.tasks {cfg.tasks}")
    records = RUNNERS[command](cfg, out, max(1, workers))
    extra = scaling_summary(cfg, records) if command == "scaling" else None
    paths = write_outputs(command, records, out, figures, extra)
    ok = all(r.passed for r in records) and (extra is None or extra["passed"])
    return ok, records, paths


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        ok, records, paths = execute(args.command, cfg, args.out, args.workers, not args.no_figures)
    except (ConfigError, BudgetError) as exc:
        print(f"gaplab: error: {exc}", file=sys.stderr)
        return 2
    except GaplabError as exc:
        print(f"gaplab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for rec in records:
        failed = [k for k, v in rec.assertions.items() if not v]
        gap = "" if rec.exact_gap is None else f" gap={rec.exact_gap:.12g}"
        status = "ok" if rec.passed else "FAIL"
        print(f"{status} {rec.task} {rec.config_hash}{gap}"
              + (f" failed={','.join(failed)}" if failed else "")
              + (f" errors={'; '.join(rec.errors)}" if rec.errors else ""))
        if not rec.passed:
            for name, value in sorted(rec.residuals.items()):
                print(f"  {name} = {value:.3e}")
    print(f"records: {paths['records']}  summary: {paths['summary']}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
