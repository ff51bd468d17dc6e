"""Command-line front end: ``levybranch <command> --config FILE [options]``."""
from __future__ import annotations

import argparse
import datetime as _dt
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import formulas
from .cmj import simulate_cmj, total_mass_series
from .config import RunConfig, parse_levels
from .errors import ConfigError, LevyBranchError
from .extract import extract, genealogy
from .levy_model import Orientation, laplace_exponent, phi, scale_W, tilt
from .offspring import OffspringLaw
from .paths import batch_simulate, read_paths, write_paths
from .rng import RNG_ID, derive_seed, stream
from .solver import solve_single_birth_U
from .testfunctions import Constant
from .verify import SuiteContext, run_suite

PATHS_FILE = "paths.jsonl"


def _stamp() -> str:
    return "# created " + _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds") + "\n"


def _header(cfg: RunConfig, **extra) -> str:
    items = {"config": cfg.digest, "seed": cfg.seed, "rng": RNG_ID}
    items.update(extra)
    return "# " + " ".join(f"{k}={v}" for k, v in items.items()) + "\n"


def _out(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return os.path.join(cfg.out_dir, name)


# ------------------------------------------------------------------ commands


def cmd_model_info(cfg: RunConfig, args) -> int:
    model = cfg.model
    m = model.measure.mean()
    c = model.c
    regime = f"subcritical (<Pi,rho>={m:g} < c={c:g})" if m < c else f"supercritical (<Pi,rho>={m:g} > c={c:g})"
    beta0 = phi(model, 0.0)
    print(f"orientation: {model.orientation.value}")
    print(f"c: {c:g}")
    print(f"<Pi,rho>: {m:g}")
    print(f"regime: {regime}")
    print(f"Phi(0): {beta0:.12g}")
    print("psi table:")
    for b in (0.5, 1.0, 2.0, 4.0):
        print(f"  psi({b:g}) = {laplace_exponent(model, b):.12g}")
    W = scale_W(model, cfg.x_max, tol=cfg.tol, step=cfg.step)
    print(f"W table: step={W.step:g} x_max={W.x_max:g} terms={W.n_terms} bound={W.truncation_bound:.3g}")
    for x in (0.0, 0.5, 1.0, 2.0):
        if x <= W.x_max:
            print(f"  W({x:g}) = {float(W(x)):.12g}")
    if beta0 > 0 or model.orientation is Orientation.SPECTRALLY_NEGATIVE:
        t = tilt(model)
        print(f"tilted measure: {t.measure.to_dict()}  <Pi+,rho>={t.measure.mean():.12g}")
    return 0


def cmd_simulate(cfg: RunConfig, args) -> int:
    path = _out(cfg, PATHS_FILE)
    paths = batch_simulate(cfg.model, cfg.eps, cfg.n_paths, cfg.seed, threads=args.threads)
    with open(path, "w") as fp:
        fp.write(_stamp())
        write_paths(fp, paths, cfg.model, cfg.eps, cfg.seed, {"config": cfg.digest})
    print(f"wrote {cfg.n_paths} paths to {path}")
    return 0


def cmd_extract(cfg: RunConfig, args) -> int:
    src = args.input or os.path.join(cfg.out_dir, PATHS_FILE)
    if not os.path.exists(src):
        raise ConfigError(f"no paths file at {src}; run simulate first or pass --input", "input")
    with open(src) as fp:
        header, paths = read_paths(fp)
    atoms_path = _out(cfg, "atoms.tsv")
    with open(atoms_path, "w") as fp:
        fp.write(_stamp())
        fp.write(_header(cfg, eps=header.get("eps")))
        fp.write("path_index\tlevel\tatom_position\n")
        for p in paths:
            for t in cfg.levels:
                for x in extract(p, t).atoms:
                    fp.write(f"{p.index}\t{t:.10g}\t{x:.17g}\n")
    print(f"wrote atoms at levels {','.join(f'{t:g}' for t in cfg.levels)} to {atoms_path}")
    if paths and paths[0].orientation is Orientation.SUBORDINATOR:
        tree_path = _out(cfg, "genealogy.tsv")
        with open(tree_path, "w") as fp:
            fp.write(_stamp())
            fp.write(_header(cfg))
            fp.write("path_index\tnode_id\tparent_id\tbirth\tposition\tdeath\n")
            for p in paths:
                for row in genealogy(p).rows():
                    fp.write("%d\t%d\t%d\t%.17g\t%.17g\t%.17g\n" % ((p.index,) + row))
        print(f"wrote genealogy to {tree_path}")
    return 0


def cmd_solve(cfg: RunConfig, args) -> int:
    model = cfg.model
    if model.orientation is Orientation.SPECTRALLY_NEGATIVE:
        model = tilt(model)
        print("spectrally negative model: solving the tilted single-birth system")
    f = cfg.test_function or Constant(math.log(2.0))
    horizon = max(cfg.horizon, max(cfg.levels))
    sol = solve_single_birth_U(model, f, horizon, step=cfg.step, tol=cfg.tol)
    path = _out(cfg, "grid.tsv")
    with open(path, "w") as fp:
        fp.write(_stamp())
        sol.curve.dump(fp, {"config": cfg.digest})
    print(f"Picard sweeps: {sol.curve.iterations}, residual {sol.curve.residual:.3g}")
    for t in cfg.levels:
        print(f"U_{t:g} f({model.start:g}) = {float(sol(t, model.start)):.12g}")
    print(f"wrote kernel curve to {path}")
    return 0


def cmd_cmj(cfg: RunConfig, args) -> int:
    model = cfg.model
    law = cfg.offspring
    if law is None:
        if model.orientation is Orientation.SPECTRALLY_NEGATIVE:
            model = tilt(model)
        law = OffspringLaw.single_birth(model, cfg.eps)
    a = model.start
    horizon = max(cfg.levels)
    seed = derive_seed(cfg.seed, "cmj")
    log_path = _out(cfg, "cmj_log.tsv")
    series_path = _out(cfg, "cmj_mass.tsv")
    grid = np.asarray(cfg.levels)
    with open(log_path, "w") as log, open(series_path, "w") as ser:
        for fp in (log, ser):
            fp.write(_stamp())
            fp.write(_header(cfg, start=a, horizon=horizon))
        log.write("replica\tid\tparent\tbirth\tposition\n")
        ser.write("replica\t" + "\t".join(f"Z({t:g})" for t in grid) + "\n")
        for k in range(cfg.n_paths):
            run = simulate_cmj(law, [a], horizon, stream(seed, k))
            for row in zip(run.ids, run.parents, run.births, run.positions):
                log.write("%d\t%d\t%d\t%.17g\t%.17g\n" % ((k,) + row))
            ser.write(f"{k}\t" + "\t".join(str(int(z)) for z in total_mass_series(run, grid)) + "\n")
    print(f"wrote {cfg.n_paths} replicas to {log_path} and {series_path}")
    return 0


def cmd_verify(cfg: RunConfig, args) -> int:
    ctx = SuiteContext(cfg.model, cfg.xstar_model, seed=cfg.seed, n_paths=cfg.n_paths,
                       n_two_sample=cfg.n_two_sample, eps=cfg.eps, step=cfg.step, tol=cfg.tol,
                       threads=args.threads)
    report = run_suite(cfg.suite, ctx)
    with open(_out(cfg, f"report_{cfg.suite}.json"), "w") as fp:
        fp.write(report.to_json() + "\n")
    with open(_out(cfg, f"report_{cfg.suite}.tsv"), "w") as fp:
        fp.write(_stamp())
        fp.write(_header(cfg, suite=cfg.suite))
        fp.write(report.table())
    for c in report.checks:
        print(c.line())
    print(f"{sum(c.passed for c in report.checks)}/{len(report.checks)} checks passed in {report.runtime:.1f}s")
    return 0 if report.passed else 1


COMMANDS = {
    "model-info": cmd_model_info,
    "simulate": cmd_simulate,
    "extract": cmd_extract,
    "solve": cmd_solve,
    "cmj": cmd_cmj,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levybranch", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--paths", type=int, help="number of paths (or CMJ replicas)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--eps", type=float, help="small-jump truncation")
    parser.add_argument("--levels", help="comma-separated levels t1,t2,...")
    parser.add_argument("--suite", help="verification suite name")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--input", help="paths file for extract (default OUT/paths.jsonl)")
    return parser


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    doc = dict(cfg.source)
    kw = {}
    if args.paths is not None:
        if args.paths < 1:
            raise ConfigError("--paths must be positive", "n_paths")
        kw["n_paths"] = doc["n_paths"] = args.paths
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be nonnegative", "rng.seed")
        kw["seed"] = args.seed
        doc["rng"] = dict(doc.get("rng", {}), seed=args.seed)
    if args.eps is not None:
        if not args.eps > 0:
            raise ConfigError("--eps must be positive", "eps")
        kw["eps"] = doc["eps"] = args.eps
    if args.levels is not None:
        kw["levels"] = parse_levels(args.levels, "--levels")
        doc["levels"] = list(kw["levels"])
    if args.suite is not None:
        kw["suite"] = doc["suite"] = args.suite
    if args.out is not None:
        kw["out_dir"] = args.out
    return replace(cfg, source=doc, **kw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_overrides(RunConfig.load(args.config), args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except LevyBranchError as exc:
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
