"""Command-line entry point: gsifit {score,fit,simulate,analyze,curves}."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import pipeline
from .config import RunConfig, load_config
from .records import write_table
from .safety import ValidationError

log = logging.getLogger("gsifit")

EXIT_VALIDATION = 2
EXIT_IO = 3


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    p.add_argument("--out-dir", help="directory for output files (overrides the config)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="gsifit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", parents=[common],
                       help="score a trajectory stream (JSON lines) with the safety index")
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--input", default="-", help="trajectory JSON lines; '-' for stdin")
    p.add_argument("--output", default="-", help="'-' for stdout")

    p = sub.add_parser("fit", parents=[common], help="fit rho per participant")
    p.add_argument("--trajectories")
    p.add_argument("--ratings")
    p.add_argument("--method", choices=["QuasiNewton", "FixedStep", "Grid"])
    p.add_argument("--output", help="fit table path (default: <out-dir>/fits.csv)")

    p = sub.add_parser("simulate", parents=[common], help="generate a synthetic cohort")
    p.add_argument("--n-bys", type=int, default=30)
    p.add_argument("--n-cas", type=int, default=31)
    p.add_argument("--rating-noise", type=float, default=0.05)
    p.add_argument("--quantize", action="store_true", help="emit 5-point Likert ratings")

    p = sub.add_parser("analyze", parents=[common], help="descriptives, tests, clusters, KDE")
    p.add_argument("--fits")
    p.add_argument("--trajectories")
    p.add_argument("--ratings")

    p = sub.add_parser("curves", parents=[common], help="GSI-versus-distance curves per rho")
    p.add_argument("--rho", type=float, action="append", dest="rhos")
    p.add_argument("--velocity", "--v", type=float, default=0.0, dest="velocity")
    p.add_argument("--n-points", type=int, default=375)
    p.add_argument("--output", help="curve table path (default: <out-dir>/curves.csv)")
    return parser


def _resolve(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.out_dir is not None:
        cfg = dataclasses.replace(cfg, paths=dataclasses.replace(cfg.paths, out_dir=args.out_dir))
    if getattr(args, "method", None):
        cfg = dataclasses.replace(cfg, method=args.method)
    return cfg


def _need(value: Optional[str], name: str) -> Path:
    if not value:
        raise ValidationError(f"missing required path: {name}")
    return Path(value)


def _out_dir(cfg: RunConfig) -> Path:
    return Path(cfg.paths.out_dir or ".")


def run(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    paths = cfg.paths
    if args.command == "score":
        src = sys.stdin if args.input == "-" else open(args.input, encoding="utf-8")
        dst = sys.stdout if args.output == "-" else open(args.output, "w", encoding="utf-8")
        try:
            for line in pipeline.score_lines(src, args.rho, cfg.safety):
                dst.write(line + "\n")
        finally:
            if src is not sys.stdin:
                src.close()
            if dst is not sys.stdout:
                dst.close()
    elif args.command == "fit":
        rows = pipeline.fit_files(_need(args.trajectories or paths.trajectories, "--trajectories"),
                                  _need(args.ratings or paths.ratings, "--ratings"), cfg)
        out = Path(args.output) if args.output else _out_dir(cfg) / "fits.csv"
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            pipeline.write_fits(rows, fh)
        flagged = [r["participant_id"] for r in rows if r["status"] != "ok"]
        if flagged:
            log.info("flagged participants: %s", ", ".join(flagged))
    elif args.command == "simulate":
        manifest = pipeline.simulate(_out_dir(cfg), cfg, args.n_bys, args.n_cas,
                                     args.rating_noise, args.quantize)
        log.info("wrote %d participants, %d trajectory rows", manifest["n_participants"],
                 manifest["trajectory_rows"])
    elif args.command == "analyze":
        pipeline.analyze_files(_need(args.fits or paths.fits, "--fits"),
                               _need(args.trajectories or paths.trajectories, "--trajectories"),
                               _need(args.ratings or paths.ratings, "--ratings"),
                               cfg, _out_dir(cfg))
    elif args.command == "curves":
        rows, columns = pipeline.curves(args.rhos or [0.5, 1.0, 2.0], args.velocity,
                                        cfg.safety, args.n_points)
        out = Path(args.output) if args.output else _out_dir(cfg) / "curves.csv"
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            write_table(rows, columns, fh)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return run(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
