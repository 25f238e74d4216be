import csv
import json

import numpy as np
import pytest

from sinhq import cli, io, verify
from sinhq.lattice import Grid2, Grid4

SMALL = {"grid": {"Mx": 2, "hx": 0.5, "Nz": 4, "eps": 0.5}, "physics": {"m": 1.0, "a2": 0.25}}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


@pytest.mark.parametrize("grid", [Grid2(8, 0.25), Grid4(2, 0.5, 4, 0.5)])
def test_snapshot_roundtrip(tmp_path, grid, rng):
    v = rng.standard_normal(grid.shape)
    io.write_field(tmp_path / "a.fld", grid, v, {"note": 1})
    g, w, pre = io.read_field(tmp_path / "a.fld")
    assert g == grid and np.array_equal(v, w) and pre["extra"] == {"note": 1}
    raw = (tmp_path / "a.fld").read_bytes()
    assert raw[:8] == io.MAGIC and len(raw) == 32 + len(json.dumps(pre, sort_keys=True)) + 8 * v.size


def test_snapshot_rejects_garbage(tmp_path):
    (tmp_path / "bad.fld").write_bytes(b"NOTAFILE" + bytes(40))
    with pytest.raises(ValueError):
        io.read_field(tmp_path / "bad.fld")
    (tmp_path / "short.fld").write_bytes(b"SINH")
    with pytest.raises(ValueError):
        io.read_field(tmp_path / "short.fld")


def test_manifest_resume(tmp_path):
    (tmp_path / "x.fld").write_bytes(b"")
    m = io.Manifest(tmp_path / "m.json")
    m.add(5, 0, "x.fld")
    m.add(5, 1, "missing.fld")
    again = io.Manifest(tmp_path / "m.json")
    assert again.done(5, 0) and not again.done(5, 1) and not again.done(6, 0)


def test_artifact_name():
    g = Grid4(2, 0.5, 4, 0.5)
    assert io.artifact_name("gff", 3, g) == f"gff-{io.seed_hash(3)}-{g.tag}"
    assert io.seed_hash(3) != io.seed_hash(4)


def test_config_requires_mass():
    with pytest.raises(cli.ConfigError) as e:
        cli.validate_config({"physics": {"a2": 0.25}})
    assert "physics.m: required" in e.value.errors


def test_config_charge_derivation():
    cfg = cli.validate_config({"physics": {"m": 1.0, "alpha": 2.0}})
    assert cfg["physics"]["beta"] == pytest.approx(2.0 / np.sqrt(4 * np.pi))
    with pytest.raises(cli.ConfigError):
        cli.validate_config({"physics": {"m": 1.0, "alpha": 2.0, "beta": 2.0}})


def test_config_supercritical():
    with pytest.raises(cli.ConfigError):
        cli.validate_config({"physics": {"m": 1.0, "a2": 1.0}})
    cfg = cli.validate_config({"physics": {"m": 1.0, "a2": 1.0}}, allow_supercritical=True)
    assert cfg["physics"]["a2"] == 1.0


def test_config_ladder_and_roundtrip():
    cfg = cli.validate_config({"grid": {"Mx": 4, "hx": 0.5, "Nz": 8, "eps": 0.5,
                                        "ladder": {"eps": [0.5, 0.25]}},
                               "physics": {"m": 1.0, "a2": 0.1}})
    assert [g["Nz"] for g in cfg["grids"]] == [8, 16]
    again = cli.validate_config(json.loads(cli.emit_config(cfg)))
    assert again == cfg


def test_config_field_errors():
    with pytest.raises(cli.ConfigError) as e:
        cli.validate_config({"grid": {"Mx": 3}, "physics": {"m": -1, "a2": 0.1}, "junk": 1})
    errs = "\n".join(e.value.errors)
    assert "grid.Mx" in errs and "physics.m" in errs and "junk: unknown section" in errs


def test_cli_solve_is_deterministic(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    for d in ("a", "b"):
        assert cli.main(["solve", "--config", str(cfg), "--out", str(tmp_path / d), "--seed", "7"]) == 0
    fa = sorted((tmp_path / "a").glob("*.fld"))
    fb = sorted((tmp_path / "b").glob("*.fld"))
    assert fa and [p.name for p in fa] == [p.name for p in fb]
    assert all(x.read_bytes() == y.read_bytes() for x, y in zip(fa, fb))
    assert (tmp_path / "a" / "config.resolved.json").exists()


def test_cli_exit_codes(tmp_path):
    bad = write_cfg(tmp_path, {"physics": {"a2": 0.25}})
    assert cli.main(["gff", "--config", str(bad), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    good = write_cfg(tmp_path, SMALL, "good.json")
    assert cli.main(["verify", "nope", "--config", str(good), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["frobnicate"]) == cli.EXIT_CONFIG
    assert cli.main(["gen-noise", "--config", str(good), "--out", str(tmp_path / "n")]) == 0
    # rerun resumes from the manifest and writes nothing new
    before = sorted(p.stat().st_mtime_ns for p in (tmp_path / "n").glob("*.fld"))
    assert cli.main(["gen-noise", "--config", str(good), "--out", str(tmp_path / "n")]) == 0
    assert sorted(p.stat().st_mtime_ns for p in (tmp_path / "n").glob("*.fld")) == before


def test_cli_gibbs_outputs(tmp_path):
    cfg = dict(SMALL, ensemble={"n_samples": 50}, chain={"burn_in": 10})
    assert cli.main(["gibbs", "--config", str(write_cfg(tmp_path, cfg)), "--out", str(tmp_path)]) == 0
    csvs = list(tmp_path.glob("gibbs-*.csv"))
    rows = list(csv.DictReader(open(csvs[0])))
    assert {r["observable"] for r in rows} == {"phi2_site", "phi4_site", "S2_bump"}
    _, block, _ = io.read_field(next(tmp_path.glob("gibbs-*.fld")))
    assert block.shape == (50, 4, 4)


def test_report_aggregation(tmp_path):
    reps = [
        {"check": "a", "metrics": {}, "pass": True, "seed": 1, "runtime_s": 0.1,
         "ladder": [{"Nz": 8, "eps": 0.25}, {"Nz": 16, "eps": 0.125}], "criteria": {}},
        {"check": "b", "metrics": {}, "pass": False, "seed": 1, "runtime_s": 0.2, "ladder": [],
         "criteria": {"x": {"pass": False}, "y": {"pass": True}}},
    ]
    for r in reps:
        io.write_json(tmp_path / f"check-{r['check']}.json", r)
    out = tmp_path / "rep"
    assert cli.main(["report", str(tmp_path), "--out", str(out)]) == cli.EXIT_CHECK
    rows = list(csv.DictReader(open(out / "report.csv")))
    assert [(r["check"], r["rung"]) for r in rows] == [("a", "0"), ("a", "1"), ("b", "0")]
    assert rows[2]["failed_criteria"] == "x"
    assert cli.main(["report", str(tmp_path / "empty"), "--out", str(out)]) == cli.EXIT_CONFIG


@pytest.mark.slow
def test_verify_all_quick(tmp_path):
    rc = cli.main(["verify", "all", "--quick", "--out", str(tmp_path)])
    assert rc in (cli.EXIT_OK, cli.EXIT_CHECK)
    names = {p.name for p in tmp_path.glob("check-*.json")}
    assert names == {f"check-{c}.json" for c in verify.CHECKS}
    for p in tmp_path.glob("check-*.json"):
        d = io.read_json(p)
        assert {"check", "params", "metrics", "thresholds", "pass", "seed", "git_describe",
                "runtime_s"} <= set(d)
    rows = list(csv.DictReader(open(tmp_path / "summary.csv")))
    assert {r["check"] for r in rows} == set(verify.CHECKS)
