"""Command line entry point.

    adhcal run [EXPERIMENT] [--config PATH] [--seed N] [--out-dir DIR] ...
    adhcal validate --config PATH

Without ``--config`` the reference task is used. Flags override the config.
Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .data import ConfigError
from .experiments import EXPERIMENTS, dump_json, reference_config, run, validate_config

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

# flag -> (section, key); section None means top level
OVERRIDES = {
    "seed": (None, "seed"),
    "out_dir": (None, "out_dir"),
    "beta0": ("train", "beta0"),
    "calib_period": ("train", "calib_period"),
    "lr_main": ("train", "lr_main"),
    "lr_calib": ("train", "lr_calib"),
    "epochs": ("train", "epochs"),
    "bins": ("train", "n_bins"),
    "loss_main": ("train", "loss_main"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="adhcal", description="Double-head calibration experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run an experiment and write its artifacts")
    r.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
    r.add_argument("--experiment", dest="experiment_flag", choices=EXPERIMENTS)
    r.add_argument("--config", help="JSON config file (default: the reference task)")
    r.add_argument("--seed", type=int)
    r.add_argument("--out-dir")
    r.add_argument("--beta0", type=float)
    r.add_argument("--calib-period", type=int)
    r.add_argument("--lr-main", type=float)
    r.add_argument("--lr-calib", type=float)
    r.add_argument("--epochs", type=int)
    r.add_argument("--bins", type=int)
    r.add_argument("--loss-main")

    v = sub.add_parser("validate", help="print the normalized config or its errors")
    v.add_argument("--config", required=True)
    return p


def _load(path):
    if path is None:
        return reference_config()
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _report_config_error(exc):
    for line in getattr(exc, "errors", [str(exc)]):
        print(f"config error: {line}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args.config)
        if args.command == "validate":
            print(dump_json(validate_config(cfg).to_dict()), end="")
            return EXIT_OK
        experiment = args.experiment_flag or args.experiment
        if experiment:
            cfg["experiment"] = experiment
        for attr, (section, key) in OVERRIDES.items():
            value = getattr(args, attr)
            if value is None:
                continue
            if section is None:
                cfg[key] = value
            else:
                cfg.setdefault(section, {})
                if not isinstance(cfg[section], dict):
                    raise ConfigError(f"{section}: expected an object")
                cfg[section][key] = value
        spec = validate_config(cfg)
    except ConfigError as exc:
        _report_config_error(exc)
        return EXIT_CONFIG
    try:
        run(spec)
    except ConfigError as exc:
        _report_config_error(exc)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any failure mid-run maps to one exit code
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {spec.experiment} artifacts to {spec.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
