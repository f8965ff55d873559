import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from gaplab import cli
from gaplab.config import load_config, parse_config
from gaplab.errors import BudgetError, ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

KAWASAKI = """
[experiment]
tasks = ["verify", "gap"]
seed = 0

[model]
kind = "kawasaki-complete"
beta = {beta}
N = 3
lattice = {{ shape = [6] }}

[potential]
kind = "nn-pair"
coupling = 0.1
"""


def with_sweep(beta, grid, extra=""):
    text = KAWASAKI.format(beta=beta).replace('"verify", "gap"', '"verify", "gap", "sweep"')
    return text + f"[sweep]\nbeta = {grid}\n" + extra


def write(tmp_path, text, name="exp.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def records(out):
    return [json.loads(line) for line in (out / "records.jsonl").read_text().splitlines()]


def numeric_fields(rec):
    """Flatten every numeric leaf except timings."""
    out = {}

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                if prefix == "" and k == "timings":
                    continue
                walk(f"{prefix}.{k}", v)
        elif isinstance(obj, list):
            for i, v in enumerate(obj):
                walk(f"{prefix}[{i}]", v)
        elif isinstance(obj, (int, float)) and not isinstance(obj, bool):
            out[prefix] = float(obj)

    walk("", rec)
    return out


def test_parse_errors_carry_location(tmp_path):
    with pytest.raises(ConfigError, match="line"):
        parse_config("[experiment\ntasks = 1")
    with pytest.raises(ConfigError, match="experiment.tasks"):
        parse_config('[experiment]\ntasks = []\nseed = 0\n[model]\nkind = "zero-range"\n')
    with pytest.raises(ConfigError, match="unknown task"):
        parse_config('[experiment]\ntasks = ["plot"]\nseed = 0\n[model]\nkind = "zero-range"\n')
    with pytest.raises(ConfigError, match="model.kind"):
        parse_config('[experiment]\ntasks = ["gap"]\nseed = 0\n[model]\nkind = "ising"\n')
    with pytest.raises(ConfigError, match="model.N"):
        parse_config('[experiment]\ntasks = ["gap"]\nseed = 0\n[model]\nkind = "zero-range"\nlattice = {n = 3}\n')
    with pytest.raises(ConfigError, match="seed"):
        parse_config('[experiment]\ntasks = ["gap"]\n[model]\nkind = "zero-range"\nN = 2\nlattice = {n = 3}\n')
    with pytest.raises(ConfigError, match="sweep"):
        parse_config('[experiment]\ntasks = ["sweep"]\nseed = 0\n[model]\nkind = "zero-range"\nN = 2\n'
                     'lattice = {n = 3}\n')
    with pytest.raises(ConfigError, match="sweep.beta"):
        parse_config(with_sweep(0.1, []))
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.toml")


def test_every_shipped_config_parses():
    paths = sorted(CONFIGS.glob("*.toml"))
    assert len(paths) >= 8
    for p in paths:
        cfg = load_config(p)
        assert cfg.tasks


def test_bad_potential_reported_at_build():
    cfg = parse_config(KAWASAKI.format(beta=0.1).replace('kind = "nn-pair"', 'kind = "indicator"'))
    with pytest.raises(ConfigError, match="potential.kind"):
        cli.compute_gap(cfg)


def test_empty_task_config_exits_with_validation_error(tmp_path, capsys):
    p = write(tmp_path, '[experiment]\ntasks = []\nseed = 0\n[model]\nkind = "zero-range"\n')
    assert cli.main(["verify", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "experiment.tasks" in capsys.readouterr().err


def test_task_must_be_enabled(tmp_path):
    p = write(tmp_path, KAWASAKI.format(beta=0.1).replace('"verify", "gap"', '"verify"'))
    assert cli.main(["gap", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_verify_passes_and_reports_residuals(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["verify", "--config", str(write(tmp_path, KAWASAKI.format(beta=0.1))),
                     "--out", str(out)]) == 0
    (rec,) = records(out)
    assert rec["task"] == "verify" and rec["tool_version"]
    for key in ("A3", "A4", "lemma1", "corollary1", "detailed_balance"):
        assert rec["residuals"][key] <= 1e-10
    assert rec["model"]["states"] == 20


def test_corrupted_fixture_fails(tmp_path, capsys):
    out = tmp_path / "o"
    code = cli.main(["verify", "--config", str(CONFIGS / "kawasaki_corrupted.toml"), "--out", str(out)])
    assert code == 1
    (rec,) = records(out)
    assert rec["residuals"]["detailed_balance"] > 1e-3
    assert rec["assertions"]["detailed_balance<=tol"] is False
    assert "detailed_balance" in capsys.readouterr().out


def test_gap_at_infinite_temperature(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["gap", "--config", str(write(tmp_path, KAWASAKI.format(beta=0.0))), "--out", str(out)]) == 0
    (rec,) = records(out)
    assert rec["exact_gap"] == pytest.approx(1.0, abs=1e-12)
    assert rec["certified"] == pytest.approx(1.0, abs=1e-12)
    (bound,) = rec["bounds"]
    assert bound["value"] == 1.0


def test_vacuous_bound_is_flagged_not_asserted(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["gap", "--config", str(write(tmp_path, KAWASAKI.format(beta=1.0))), "--out", str(out)]) == 0
    (rec,) = records(out)
    assert rec["bounds"][0]["vacuous"] is True
    assert not any(k.startswith("kawasaki") for k in rec["assertions"])


def test_zero_range_gap_ordering(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["gap", "--config", str(CONFIGS / "zero_range_quadratic.toml"), "--out", str(out)]) == 0
    (rec,) = records(out)
    names = [b["name"] for b in rec["bounds"]]
    assert {"jjbound", "jbound", "cobound", "teom-delta", "uno"} <= set(names)
    for key in ("jjbound<=jbound", "jbound<=cobound", "cobound<=teom-delta", "certified<=gap"):
        assert rec["assertions"][key] is True


def test_sweep_summary_and_cache(tmp_path):
    text = with_sweep(0.1, [0.0, 0.1, 0.2])
    cfgp = write(tmp_path, text)
    out = tmp_path / "o"
    assert cli.main(["sweep", "--config", str(cfgp), "--out", str(out)]) == 0
    rows = list(csv.reader((out / "sweep_summary.csv").open()))
    assert rows[0][:3] == ["model.beta", "states", "exact_gap"]
    gaps = [float(r[2]) for r in rows[1:]]
    bound_col = rows[0].index("kawasaki")
    bounds = [float(r[bound_col]) for r in rows[1:]]
    assert all(g >= b - 1e-12 for g, b in zip(gaps, bounds))
    assert bounds == sorted(bounds, reverse=True)
    first = records(out)
    # 17 significant digits survive the round trip exactly
    assert [float(r[2]) for r in rows[1:]] == [rec["exact_gap"] for rec in first]
    assert (out / "sweep.png").stat().st_size > 1000
    assert len(list((out / "cache").glob("*.json"))) == 3

    assert cli.main(["sweep", "--config", str(cfgp), "--out", str(out)]) == 0
    second = records(out)[3:]
    assert all(rec["timings"] == {"cached": 1.0} for rec in second)
    for a, b in zip(first, second):
        fa, fb = numeric_fields(a), numeric_fields(b)
        assert fa.keys() == fb.keys()
        assert all(abs(fa[k] - fb[k]) <= 1e-12 for k in fa)


def test_cached_record_matches_fresh_recomputation(tmp_path):
    cfg = parse_config(KAWASAKI.format(beta=0.05))
    a = cli.run_gap_and_bounds(cfg, tmp_path / "a")[0]
    cached = cli.run_gap_and_bounds(cfg, tmp_path / "a")[0]
    fresh = cli.compute_gap(cfg)
    fa = numeric_fields(json.loads(cached.to_json()))
    fb = numeric_fields(json.loads(fresh.to_json()))
    assert fa.keys() == fb.keys() and all(abs(fa[k] - fb[k]) <= 1e-12 for k in fa)
    assert cached.config_hash == a.config_hash == fresh.config_hash


def test_seed_changes_hash_but_not_gap(tmp_path):
    cfgp = write(tmp_path, KAWASAKI.format(beta=0.1))
    cli.main(["verify", "--config", str(cfgp), "--out", str(tmp_path / "a"), "--seed", "1"])
    cli.main(["verify", "--config", str(cfgp), "--out", str(tmp_path / "b"), "--seed", "2"])
    ra, rb = records(tmp_path / "a")[0], records(tmp_path / "b")[0]
    assert ra["seed"] == 1 and rb["seed"] == 2 and ra["config_hash"] != rb["config_hash"]


def test_budget_cap_refuses_with_estimate(tmp_path):
    text = with_sweep(0.1, [0.0, 0.1], "[budget]\nmax_states = 30\n")
    cfg = parse_config(text)
    with pytest.raises(BudgetError, match="40 states"):
        cli.run_sweep(cfg, tmp_path / "o")
    assert cli.main(["sweep", "--config", str(write(tmp_path, text)), "--out", str(tmp_path / "o")]) == 2


def test_workers_give_identical_records(tmp_path):
    text = with_sweep(0.1, [0.0, 0.05, 0.1, 0.15])
    cfg = parse_config(text)
    serial = cli.run_sweep(cfg, tmp_path / "s", workers=1)
    parallel = cli.run_sweep(cfg, tmp_path / "p", workers=2)
    for a, b in zip(serial, parallel):
        a.timings = b.timings = {}
        assert a.to_json() == b.to_json()


def test_scaling_band(tmp_path):
    text = """
[experiment]
tasks = ["scaling"]
seed = 0
[model]
kind = "kawasaki-nn"
beta = 0.0
[potential]
kind = "none"
[scaling]
sizes = [4, 6, 8]
"""
    out = tmp_path / "o"
    assert cli.main(["scaling", "--config", str(write(tmp_path, text)), "--out", str(out)]) == 0
    summary = json.loads((out / "scaling_summary.json").read_text())
    for row in summary["rows"]:
        assert row["gap"] == pytest.approx(2 * (1 - math.cos(math.pi / row["L"])), abs=1e-12)
    assert 0 < summary["c1"] <= summary["c2"] and summary["ratio"] <= 4
    assert (out / "scaling.png").exists()


def test_single_size_scaling_is_degenerate(tmp_path):
    cfg = parse_config('[experiment]\ntasks = ["scaling"]\nseed = 0\n[model]\nkind = "kawasaki-nn"\n'
                       '[scaling]\nsizes = [5]\n')
    recs = cli.run_scaling(cfg, tmp_path)
    summary = cli.scaling_summary(cfg, recs)
    assert summary["c1"] == summary["c2"] and summary["ratio"] == 1.0 and summary["passed"]


def test_scaling_requires_nearest_neighbour_model(tmp_path):
    cfg = parse_config(KAWASAKI.format(beta=0.1).replace('"verify", "gap"', '"scaling"')
                       + "[scaling]\nsizes = [4]\n")
    with pytest.raises(ConfigError):
        cli.run_scaling(cfg, tmp_path)


def test_number_formatting():
    assert cli.fmt(0.1) == "0.10000000000000001"
    assert float(cli.fmt(1 / 3)) == 1 / 3
    assert cli.fmt(None) == "" and cli.fmt(True) == "1" and cli.fmt(7) == "7"


def test_console_entry_point(tmp_path):
    out = tmp_path / "o"
    proc = subprocess.run([sys.executable, "-m", "gaplab.cli", "gap", "--config",
                           str(CONFIGS / "zero_range_free.toml"), "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "ok gap" in proc.stdout
