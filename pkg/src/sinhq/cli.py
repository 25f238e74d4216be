"""Command line driver: config validation, sample generation, solves,
chains, check suites and report aggregation.

    sinhq solve --config run.json --out runs/
    sinhq verify all --out reports/
    sinhq report reports/

Exit codes: 0 success, 1 a check failed, 2 usage or config error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from . import fields, gibbs2d, io, solver, verify
from .lattice import Grid2, Grid4, PhysicsParams

log = logging.getLogger("sinhq")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {
    "grid": {"Mx": 8, "hx": 0.25, "Nz": 16, "eps": 0.125},
    "physics": {"lambda": 1.0, "gamma": 0.0},
    "ensemble": {"n_samples": 1, "seed": 0},
    "solver": {"tol": 1e-9, "max_iter": 100, "restarts": 0},
    "chain": {"step": 0.3, "traj_len": 5, "burn_in": 200, "thin": 1},
    "tilt": {"radius": 0.25},
    "output": "out",
}

DESK_CONFIG = {"physics": {"m": 1.0, "a2": 0.25}}

QUICK = {
    "gmc-identities": {"n_samples": 500},
    "gmc-scaling": {"n_samples": 2, "N": 32, "r_range": (1, 3)},
    "gmc-functionals": {"n_samples": 5},
    "besov": {"n_measures": 5},
    "apriori": {"n_solves": 5},
    "reduction-interacting": {"n_solves": 10, "n_hmc": 2000},
    "os": {"n_samples": 1000, "n_boot": 50},
    "clustering-tilted": {"n_noise": 2},
}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _pow2(n) -> bool:
    return isinstance(n, int) and n >= 2 and n & (n - 1) == 0


def _number(section, key, value, errors, positive=True, integer=False):
    kind = int if integer else (int, float)
    if isinstance(value, bool) or not isinstance(value, kind):
        errors.append(f"{section}.{key}: expected {'an integer' if integer else 'a number'}")
        return None
    if positive and not value > 0:
        errors.append(f"{section}.{key}: must be positive")
        return None
    return value


def validate_config(cfg, allow_supercritical: bool = False) -> dict:
    """Fill defaults, derive dependent fields and return the normalized config.

    ``cfg`` is a dict or a path to a JSON file.  Raises ConfigError with one
    message per offending field.
    """
    if isinstance(cfg, (str, Path)):
        try:
            cfg = json.loads(Path(cfg).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError([f"config: {e}"]) from None
    if not isinstance(cfg, dict):
        raise ConfigError(["config: top level must be an object"])
    errors = []
    known = set(DEFAULTS) | {"grids"}
    for k in cfg:
        if k not in known:
            errors.append(f"{k}: unknown section")
    out = copy.deepcopy(DEFAULTS)
    for sec in ("grid", "physics", "ensemble", "solver", "chain", "tilt"):
        if sec in cfg:
            if not isinstance(cfg[sec], dict):
                errors.append(f"{sec}: expected an object")
                continue
            out[sec].update(copy.deepcopy(cfg[sec]))
    if "output" in cfg:
        out["output"] = str(cfg["output"])

    g = out["grid"]
    for key in ("Mx", "Nz"):
        v = _number("grid", key, g.get(key), errors, integer=True)
        if v is not None and not _pow2(v):
            errors.append(f"grid.{key}: must be a power of two >= 2")
    for key in ("hx", "eps"):
        _number("grid", key, g.get(key), errors)
    ladder = g.get("ladder")
    if ladder is not None:
        if not isinstance(ladder, dict) or not set(ladder) <= {"eps", "hx"}:
            errors.append("grid.ladder: expected {'eps': [...]} and/or {'hx': [...]}")
            ladder = None

    ph = out["physics"]
    if "m" not in ph:
        errors.append("physics.m: required")
    else:
        _number("physics", "m", ph["m"], errors)
    _number("physics", "lambda", ph.get("lambda"), errors, positive=False)
    _number("physics", "gamma", ph.get("gamma"), errors, positive=False)
    charge = [k for k in ("alpha", "beta", "a2") if k in ph]
    if not charge:
        errors.append("physics.alpha: one of alpha, beta or a2 is required")
    else:
        for k in charge:
            _number("physics", k, ph[k], errors, positive=False)
    for sec, key, integer in (("ensemble", "n_samples", True), ("solver", "tol", False),
                              ("solver", "max_iter", True), ("chain", "step", False),
                              ("chain", "traj_len", True), ("chain", "thin", True),
                              ("tilt", "radius", False)):
        _number(sec, key, out[sec].get(key), errors, integer=integer)
    _number("ensemble", "seed", out["ensemble"].get("seed"), errors, positive=False, integer=True)
    _number("solver", "restarts", out["solver"].get("restarts"), errors, positive=False, integer=True)
    _number("chain", "burn_in", out["chain"].get("burn_in"), errors, positive=False, integer=True)
    if errors:
        raise ConfigError(errors)

    # charge: alpha is primary, beta = alpha / sqrt(4 pi), a2 = alpha^2 / (4 pi)^2
    if "alpha" in ph:
        alpha = float(ph["alpha"])
    elif "beta" in ph:
        alpha = float(ph["beta"]) * math.sqrt(4 * math.pi)
    else:
        alpha = 4 * math.pi * math.sqrt(float(ph["a2"]))
    derived = {"alpha": alpha, "beta": alpha / math.sqrt(4 * math.pi),
               "a2": alpha**2 / (4 * math.pi) ** 2}
    for k in charge:
        if not math.isclose(float(ph[k]), derived[k], rel_tol=1e-12, abs_tol=1e-15):
            errors.append(f"physics.{k}: inconsistent with the other charge fields")
    if derived["a2"] >= 1.0 and not allow_supercritical:
        errors.append("physics.alpha: alpha^2 >= (4 pi)^2 needs --allow-supercritical")
    if errors:
        raise ConfigError(errors)
    ph.update(derived)

    base = {k: g[k] for k in ("Mx", "hx", "Nz", "eps")}
    grids = [dict(base)]
    if ladder:
        grids = []
        Lz, Lx = base["Nz"] * base["eps"], base["Mx"] * base["hx"]
        for e in ladder.get("eps", [base["eps"]]):
            for h in ladder.get("hx", [base["hx"]]):
                nz, mx = Lz / e, Lx / h
                if abs(nz - round(nz)) > 1e-9 or not _pow2(int(round(nz))):
                    errors.append(f"grid.ladder.eps: {e} does not give a power-of-two Nz")
                    continue
                if abs(mx - round(mx)) > 1e-9 or not _pow2(int(round(mx))):
                    errors.append(f"grid.ladder.hx: {h} does not give a power-of-two Mx")
                    continue
                grids.append({"Mx": int(round(mx)), "hx": float(h), "Nz": int(round(nz)),
                              "eps": float(e)})
    if errors:
        raise ConfigError(errors)
    out["grids"] = grids
    return out


def emit_config(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True)


# ---------------------------------------------------------------- helpers

def _physics(cfg, allow) -> PhysicsParams:
    ph = cfg["physics"]
    return PhysicsParams(m=ph["m"], alpha=ph["alpha"], lam=ph["lambda"], gamma=ph["gamma"],
                         allow_supercritical=allow)


def _grids(cfg):
    return [Grid4(g["Mx"], g["hx"], g["Nz"], g["eps"]) for g in cfg["grids"]]


def _sample_loop(cfg, out: Path, command: str, make):
    """Run ``make(grid, stream)`` for every grid and sample not yet in the manifest."""
    seed = cfg["ensemble"]["seed"]
    written = []
    for grid in _grids(cfg):
        name = io.artifact_name(command, seed, grid)
        man = io.Manifest(out / f"{name}.manifest.json")
        for k in range(cfg["ensemble"]["n_samples"]):
            if man.done(seed, k):
                continue
            fname = f"{name}-s{k}.fld"
            values, extra = make(grid, k)
            io.write_field(out / fname, grid, values, extra)
            man.add(seed, k, fname)
            written.append(fname)
    return written


# ---------------------------------------------------------------- commands

def cmd_gen_noise(cfg, out, args):
    seed = cfg["ensemble"]["seed"]
    return _sample_loop(cfg, out, "gen-noise", lambda g, k: (
        fields.sample_noise(g, seed, k).values, {"seed": seed, "stream": k}))


def cmd_gff(cfg, out, args):
    seed, m = cfg["ensemble"]["seed"], cfg["physics"]["m"]
    return _sample_loop(cfg, out, "gff", lambda g, k: (
        fields.sample_gff(g, m, seed, k), {"seed": seed, "stream": k, "m": m}))


def cmd_gmc(cfg, out, args):
    seed, ph = cfg["ensemble"]["seed"], _physics(cfg, args.allow_supercritical)

    def make(g, k):
        W = fields.sample_gff(g, ph.m, seed, k)
        eta = fields.gmc(g, W, ph.alpha, fields.wick_constant(g, ph.m), ph.allow_supercritical)
        return eta.mass, {"seed": seed, "stream": k, "alpha": ph.alpha, "kind": "cell_mass"}
    return _sample_loop(cfg, out, "gmc", make)


def _problem(cfg, g, k, ph):
    seed = cfg["ensemble"]["seed"]
    W = fields.sample_gff(g, ph.m, seed, k)
    wick = fields.wick_constant(g, ph.m)
    mp = fields.gmc(g, W, ph.alpha, wick, ph.allow_supercritical).mass
    mm = fields.gmc(g, W, -ph.alpha, wick, ph.allow_supercritical).mass
    return solver.EllipticProblem(g, ph, mp, mm)


def cmd_solve(cfg, out, args, tilted=False):
    ph = _physics(cfg, args.allow_supercritical)
    sc = cfg["solver"]
    command = "solve-tilted" if tilted else "solve"

    def make(g, k):
        prob = _problem(cfg, g, k, ph)
        if tilted:
            zeta = verify.compact_bump(g.zgrid, (0.0, 0.0), cfg["tilt"]["radius"])
            rep = solver.solve_tilted(prob, ph.gamma, zeta, sc["tol"])
        elif sc["restarts"]:
            rep = solver.solve_with_restarts(prob, sc["tol"], sc["restarts"],
                                             seed=cfg["ensemble"]["seed"])
        else:
            rep = solver.solve(prob, sc["tol"], sc["max_iter"])
        if not rep.converged:
            raise solver.SolverError("solver did not converge", rep.to_dict())
        name = io.artifact_name(command, cfg["ensemble"]["seed"], g)
        info = rep.to_dict()
        info.pop("solution", None)
        io.write_json(out / f"{name}-s{k}.report.json", info)
        return rep.solution, {"seed": cfg["ensemble"]["seed"], "stream": k}
    return _sample_loop(cfg, out, command, make)


def cmd_gibbs(cfg, out, args):
    ph = _physics(cfg, args.allow_supercritical)
    ch = cfg["chain"]
    seed = cfg["ensemble"]["seed"]
    written = []
    for g4 in _grids(cfg):
        g = g4.zgrid
        model = gibbs2d.CoshModel2D(g, ph.m, ph.alpha, 4 * math.pi * ph.lam, base="slice", grid4=g4)
        samples, stats = gibbs2d.sample_chain(model, cfg["ensemble"]["n_samples"], seed,
                                              step=ch["step"], n_leap=ch["traj_len"],
                                              burn_in=ch["burn_in"], thin=ch["thin"])
        for w in stats.warnings:
            log.warning(w)
        name = io.artifact_name("gibbs", seed, g)
        io.write_field(out / f"{name}.fld", g, samples,
                       {"seed": seed, "acceptance": stats.acceptance, "kind": "sample_block"})
        f = verify.bump(g, (0.0, 0.0), 0.25)
        obs = {"phi2_site": lambda s: float(np.mean(s**2)),
               "phi4_site": lambda s: float(np.mean(s**4)),
               "S2_bump": lambda s: float((np.sum(s * f) * g.cell_vol) ** 2)}
        rows = gibbs2d.estimator_rows(samples, obs, g.cell_vol)
        io.write_csv(out / f"{name}.csv", rows, ["observable", "value", "stderr", "tau_int", "ESS"])
        written += [f"{name}.fld", f"{name}.csv"]
    return written


def cmd_verify(cfg, out, args):
    ids = list(verify.CHECKS) if args.check == "all" else [args.check]
    for cid in ids:
        if cid not in verify.CHECKS:
            raise ConfigError([f"verify: unknown check id '{cid}'"])
    reports = []
    for cid in ids:
        kw = dict(QUICK.get(cid, {})) if args.quick else {}
        log.info("running %s", cid)
        rep = verify.run_check(cid, seed=cfg["ensemble"]["seed"], **kw)
        io.write_json(out / f"check-{cid}.json", rep.to_dict())
        reports.append(rep)
        print(f"{cid:24s} {'PASS' if rep.passed else 'FAIL'}  ({rep.runtime_s:.1f} s)")
    rows = report_rows([r.to_dict() for r in reports])
    io.write_csv(out / "summary.csv", rows, REPORT_COLUMNS)
    return [f"check-{c}.json" for c in ids], all(r.passed for r in reports)


REPORT_COLUMNS = ["check", "rung", "grid", "pass", "failed_criteria", "seed", "runtime_s"]


def report_rows(reports: list[dict]) -> list[dict]:
    rows = []
    for rep in reports:
        failed = [k for k, v in rep.get("criteria", {}).items() if not v["pass"]]
        rungs = rep.get("ladder") or [None]
        for i, g in enumerate(rungs):
            tag = ""
            if g:
                grid = Grid4(g["Mx"], g["hx"], g["Nz"], g["eps"]) if "Mx" in g else Grid2(g["Nz"], g["eps"])
                tag = grid.tag
            rows.append({"check": rep["check"], "rung": i, "grid": tag, "pass": rep["pass"],
                         "failed_criteria": ";".join(failed), "seed": rep.get("seed", ""),
                         "runtime_s": f"{rep.get('runtime_s', 0.0):.3f}"})
    return rows


def cmd_report(cfg, out, args):
    src = Path(args.directory)
    reports = []
    for p in sorted(src.glob("*.json")):
        try:
            d = io.read_json(p)
        except (OSError, ValueError):
            continue
        if isinstance(d, dict) and "check" in d and "metrics" in d:
            reports.append(d)
    if not reports:
        raise ConfigError([f"report: no check reports in {src}"])
    rows = report_rows(reports)
    io.write_csv(out / "report.csv", rows, REPORT_COLUMNS)
    lines = [f"{'check':24s} {'rung':>4s} {'grid':28s} {'pass':5s} failed"]
    for r in rows:
        lines.append(f"{r['check']:24s} {r['rung']:>4d} {r['grid']:28s} {str(r['pass']):5s} "
                     f"{r['failed_criteria']}")
    text = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(text)
    print(text, end="")
    return ["report.csv", "report.txt"], all(r["pass"] for r in reports)


COMMANDS = {
    "gen-noise": cmd_gen_noise, "gff": cmd_gff, "gmc": cmd_gmc, "solve": cmd_solve,
    "solve-tilted": lambda c, o, a: cmd_solve(c, o, a, tilted=True), "gibbs": cmd_gibbs,
    "verify": cmd_verify, "report": cmd_report,
}


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, help="64-bit seed")
    common.add_argument("--threads", type=int, help="FFT worker threads (env SINHQ_THREADS)")
    common.add_argument("--tol", type=float)
    common.add_argument("--max-iter", type=int)
    common.add_argument("--restarts", type=int)
    common.add_argument("--allow-supercritical", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="sinhq", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "verify":
            sp.add_argument("check", help="check id or 'all'")
            sp.add_argument("--quick", action="store_true", help="reduced sample sizes (smoke run)")
        if name == "report":
            sp.add_argument("directory")
    return p


def _apply_overrides(raw: dict, args) -> dict:
    raw = copy.deepcopy(raw)
    if args.seed is not None:
        raw.setdefault("ensemble", {})["seed"] = args.seed
    for flag, key in (("tol", "tol"), ("max_iter", "max_iter"), ("restarts", "restarts")):
        v = getattr(args, flag)
        if v is not None:
            raw.setdefault("solver", {})[key] = v
    if args.out is not None:
        raw["output"] = str(args.out)
    return raw


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        raw = json.loads(args.config.read_text()) if args.config else copy.deepcopy(DESK_CONFIG)
        if not isinstance(raw, dict):
            raise ConfigError(["config: top level must be an object"])
        cfg = validate_config(_apply_overrides(raw, args), args.allow_supercritical)
    except (OSError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as e:
        for msg in e.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    threads = args.threads or int(os.environ.get("SINHQ_THREADS", "1") or 1)
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.json").write_text(emit_config(cfg) + "\n")
    t0 = time.perf_counter()
    try:
        with sfft.set_workers(max(1, threads)):
            res = COMMANDS[args.command](cfg, out, args)
    except ConfigError as e:
        for msg in e.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (solver.SolverError, OverflowError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("%s finished in %.2f s", args.command, time.perf_counter() - t0)
    if isinstance(res, tuple):
        return EXIT_OK if res[1] else EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
