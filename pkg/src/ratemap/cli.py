"""Command-line front end.

    ratemap run-sequential --config earth32 --out runs/e32
    ratemap run-oneshot --config mars --alpha 0.02 --out runs/mars
    ratemap sweep-alpha --config mars --values 1e-5,1e-4,1e-3 --out runs/sweep
    ratemap preprocess-elevation elev.csv trav.pgm
    ratemap verify-oracles

Exit status is 1 for configuration errors and 2 for failed assertions or
oracle checks.  Set ``RATEMAP_LOG`` to ``error``, ``info`` or ``debug``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .gridmap import MapFormatError, elevation_to_traversability, read_csv_grid, save_map
from .oracles import run_all
from .sim import ConfigError, SimConfig, coerce_overrides, load_config, run_oneshot, run_sequential

log = logging.getLogger("ratemap")

_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    level = os.environ.get("RATEMAP_LOG", "error").lower()
    if level not in _LEVELS:
        raise ConfigError(f"RATEMAP_LOG must be one of {sorted(_LEVELS)}, got {level!r}")
    logging.basicConfig(level=_LEVELS[level], stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="config file, or name of a bundled config")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="sets both the dither and measurement-noise seeds")
    p.add_argument("--alpha", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--strategy", choices=["rd", "fully_informed", "uninformed"])
    p.add_argument("--max-steps", type=int)
    p.add_argument("--full-scale", action="store_true", help="allow maps above 64x64")
    p.add_argument("overrides", nargs="*", metavar="key=value", help="extra config overrides")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ratemap", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (("run-sequential", "Seeker/Supporter run to the goal"),
                       ("run-oneshot", "single whole-map transmission")):
        _add_run_options(sub.add_parser(name, help=text))

    sweep = sub.add_parser("sweep-alpha", help="run one experiment per alpha and tabulate")
    _add_run_options(sweep)
    sweep.add_argument("--values", required=True, help="comma-separated alpha values")
    sweep.add_argument("--jobs", type=int, default=1, help="worker processes")

    pre = sub.add_parser("preprocess-elevation", help="elevation CSV to traversability PGM")
    pre.add_argument("input")
    pre.add_argument("output")

    ver = sub.add_parser("verify-oracles", help="cross-check solvers against brute force")
    ver.add_argument("--seed", type=int, default=0)
    return parser


def config_from_args(args) -> SimConfig:
    overrides = coerce_overrides(args.overrides)
    if args.seed is not None:
        overrides["session_seed"] = args.seed
        overrides["noise_seed"] = args.seed
    for key in ("alpha", "tau", "strategy", "max_steps"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if args.full_scale:
        overrides["full_scale"] = True
    return load_config(args.config, overrides)


def _run_one(cfg: SimConfig, out):
    if cfg.mode == "oneshot":
        r = run_oneshot(cfg, out_dir=out)
        return {"alpha": cfg.alpha, "rank_ratio": r.rank_ratio, "error_ratio": r.error_ratio}
    m = run_sequential(cfg, out_dir=out).metrics
    return {"alpha": cfg.alpha, "r_avg": m.r_avg, "t_reach": m.t_reach, "c_reach": m.c_reach,
            "b_avg": m.b_avg, "reached": int(m.reached)}


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


def cmd_run(args) -> int:
    cfg = config_from_args(args)
    mode = "oneshot" if args.command == "run-oneshot" else "sequential"
    cfg = cfg.with_overrides(mode=mode)
    row = _run_one(cfg, args.out)
    print(" ".join(f"{k}={_fmt(v)}" for k, v in row.items()))
    return 0


def cmd_sweep(args) -> int:
    cfg = config_from_args(args)
    try:
        alphas = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --values: {exc}") from exc
    if not alphas:
        raise ConfigError("--values is empty")
    out = Path(args.out or ".")
    cfgs = [cfg.with_overrides(alpha=a) for a in alphas]
    dirs = [out / f"alpha_{i:02d}" for i in range(len(alphas))]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_run_one, cfgs, dirs))
    else:
        rows = [_run_one(c, d) for c, d in zip(cfgs, dirs)]
    out.mkdir(parents=True, exist_ok=True)
    with (out / "sweep.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(rows[0]))
        for row in rows:
            w.writerow([_fmt(v) for v in row.values()])
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} rows)")
    return 0


def cmd_preprocess(args) -> int:
    save_map(args.output, elevation_to_traversability(read_csv_grid(args.input)))
    return 0


def cmd_verify(args) -> int:
    failed = 0
    for name, ok, detail in run_all(args.seed):
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failed += not ok
    return 2 if failed else 0


_COMMANDS = {
    "run-sequential": cmd_run,
    "run-oneshot": cmd_run,
    "sweep-alpha": cmd_sweep,
    "preprocess-elevation": cmd_preprocess,
    "verify-oracles": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _setup_logging()
        return _COMMANDS[args.command](args)
    except (ConfigError, MapFormatError, FileNotFoundError) as exc:
        print(f"ratemap: error: {exc}", file=sys.stderr)
        return 1
    except AssertionError as exc:
        print(f"ratemap: assertion failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
