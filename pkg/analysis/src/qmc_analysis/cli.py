"""Command-line entry point: fits to fits.json, figures to image files."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import figures, fits
from .io import SchemaError


def _cmd_fit(args) -> int:
    results = []
    if args.model in ("dim", "both"):
        results.append(fits.fit_dim_scaling(fits.dim_records(args.run_dirs)))
    if args.model in ("hermiticity", "both"):
        herm = fits.fit_hermiticity(fits.hermiticity_records(args.run_dirs))
        results.append(herm)
        if args.threshold_n is not None:
            print(f"walkers for eps <= {args.tol} at n={args.threshold_n}: "
                  f"{fits.walker_threshold(herm, args.threshold_n, args.tol):.3e}")
    payload = {"fits": [r.to_dict() for r in results]}
    out = Path(args.out)
    out.write_text(json.dumps(payload, indent=2) + "\n")
    for r in results:
        print(f"{r.model}: {r.parameters} (residual {r.residual:.3e})")
    print(f"wrote {out}")
    return 0


def _cmd_figures(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = {
        "fidelity": lambda: figures.fidelity_figure(
            args.run_dir, out_dir / "fidelity.png", exact_dir=args.exact_dir),
        "density": lambda: figures.density_figure(
            args.run_dir, out_dir / "density.png", exact_dir=args.exact_dir),
        "walkers": lambda: figures.walker_figure(
            args.run_dir, out_dir / "walkers.png"),
    }
    wanted = list(jobs) if args.style == "all" else [args.style]
    made = []
    for style in wanted:
        try:
            made.append(jobs[style]())
        except SchemaError as exc:
            # with --style all, runs lacking a style's observables are skipped
            if args.style != "all":
                raise
            print(f"skipping {style}: {exc}")
    for p in made:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lindqmc-analyze",
        description="Fit scaling models and render figures from run outputs")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit scaling models over run directories")
    fit.add_argument("run_dirs", nargs="+")
    fit.add_argument("--model", choices=("dim", "hermiticity", "both"),
                     default="both")
    fit.add_argument("--out", default="fits.json")
    fit.add_argument("--threshold-n", type=int, default=None,
                     help="also report the walker threshold at this qubit count")
    fit.add_argument("--tol", type=float, default=0.02)
    fit.set_defaults(func=_cmd_fit)

    figs = sub.add_parser("figures", help="render figures from one run")
    figs.add_argument("run_dir")
    figs.add_argument("--exact-dir", default=None)
    figs.add_argument("--style", choices=("fidelity", "density", "walkers", "all"),
                      default="all")
    figs.add_argument("--out-dir", default="figures")
    figs.set_defaults(func=_cmd_figures)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, fits.FitError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
