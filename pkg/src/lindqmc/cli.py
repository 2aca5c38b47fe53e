"""Command-line interface.

Subcommands:
  run        stochastic QMC run (observables.csv, walkers.csv, meta.json)
  exact      deterministic reference integration, same schema
  redfield   sugar for run with experiment=redfield
  aggregate  combine replica snapshot dumps into one estimate
  bound      QMC run that additionally emits the statistical error bound

Exit codes: 0 success, 2 configuration error, 3 numerical guard tripped.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .circuits import ScheduleValidationError
from .operators import ModelValidationError
from .runner import ConfigError, RunConfig, aggregate, run_exact, run_qmc
from .walkers import StepSizeError

_EXIT_CONFIG = 2
_EXIT_NUMERIC = 3


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its fields")
    for f in dataclasses.fields(RunConfig):
        if f.name == "schema_version":
            continue
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            p.add_argument(flag, action="store_true", default=None)
        else:
            p.add_argument(flag, default=None)


_FLOAT_FIELDS = {"total_duration", "tau", "t1", "t2", "j_khz", "xi", "base_dt",
                 "p_max", "obs_stride", "redfield_omega1", "redfield_omega2",
                 "redfield_gamma1", "redfield_gamma2", "redfield_alpha",
                 "redfield_kappa"}
_INT_FIELDS = {"n", "n_diag", "n_samples", "n_replicas", "seed"}
_OPTIONAL_FLOAT = {"t1", "t2"}


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.config:
        with open(args.config) as f:
            config = RunConfig.from_json(f.read())
    else:
        config = RunConfig()
    for f in dataclasses.fields(RunConfig):
        if f.name == "schema_version":
            continue
        value = getattr(args, f.name, None)
        if value is None:
            continue
        if f.name in _OPTIONAL_FLOAT and str(value).lower() in ("none", "inf"):
            value = None
        elif f.name in _FLOAT_FIELDS:
            value = float(value)
        elif f.name in _INT_FIELDS:
            value = int(value)
        setattr(config, f.name, value)
    return config


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="lindqmc")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("run", "exact", "redfield", "bound"):
        p = sub.add_parser(name)
        _add_config_args(p)

    p_agg = sub.add_parser("aggregate")
    p_agg.add_argument("snapshot_dirs", nargs="+")
    p_agg.add_argument("--out-dir", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "aggregate":
            out = aggregate(args.snapshot_dirs, args.out_dir)
        else:
            config = _config_from_args(args)
            if args.command == "redfield":
                config.experiment = "redfield"
                if getattr(args, "total_duration", None) is None and not args.config:
                    config.total_duration = 2.0
            # figure-resolution stride defaults when not set explicitly
            if getattr(args, "obs_stride", None) is None and not args.config:
                config.obs_stride = {"ghz": 1.0, "redfield": 0.05}.get(
                    config.experiment, 10.0)
            if args.command == "exact":
                out = run_exact(config)
            else:
                out = run_qmc(config, collect_bound=args.command == "bound")
        print(json.dumps({"out_dir": str(out)}))
        return 0
    except (ConfigError, ScheduleValidationError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except (StepSizeError, ModelValidationError) as exc:
        print(f"numerical guard: {exc}; reduce base-dt or p-max, or shrink n",
              file=sys.stderr)
        return _EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
