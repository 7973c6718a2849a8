"""Command-line entry point.

Subcommands take a JSON config file; flags override config fields, which
override defaults.  No environment variables are read.  Exit codes:
0 = pass, 1 = a verified inequality was violated, 2 = configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from .errors import ConfigError
from .harness import ExperimentConfig, run_ap_scan, run_cheeger, run_comparison, run_gap, run_verify

_COMMANDS = {
    "gap": run_gap,
    "compare": run_comparison,
    "ap-scan": run_ap_scan,
    "cheeger": run_cheeger,
    "verify": run_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="daviesgap",
        description="Davies generators: spectral gaps, progression scans, and "
                    "inequality verification on desk-scale instances.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0] if fn.__doc__ else None)
        p.add_argument("config", help="path to a JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="write the report to this path")
        p.add_argument("--format", choices=("json", "csv"), default=None,
                       help="report format (default json)")
        p.add_argument("--tol-scale", type=float, default=None,
                       help="multiply every verification tolerance by this factor")
    return parser


def load_config(args) -> ExperimentConfig:
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    cfg = ExperimentConfig.from_json(doc)
    # flag > config file field > default
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.format is not None:
        cfg.format = args.format
    if args.tol_scale is not None:
        if args.tol_scale <= 0:
            raise ConfigError("--tol-scale must be positive")
        cfg.tol_scale = args.tol_scale
    cfg.validate()
    return cfg


def render_report(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True) + "\n"
    return _render_csv(report)


def _render_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    kind = report.get("kind")
    if kind == "verify":
        rows = list(report["suites"].values())
        fields = ["name", "trials", "checks", "max_violation", "tol", "passed"]
    elif kind == "ap-scan":
        rows = [{"case": name, **stats} for name, stats in report["cases"].items()]
        fields = ["case", "trials", "three_ap_count", "repeated_eigenvalue_count",
                  "three_ap_fraction", "repeated_fraction"]
    else:
        rows = report.get("rows", [])
        fields = sorted({k for r in rows for k in r if not isinstance(r[k], (dict, list))})
    writer.writerow(fields)
    for r in rows:
        writer.writerow([r.get(k, "") for k in fields])
    return buf.getvalue()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        report = _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    text = render_report(report, cfg.format)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 1 if report.get("violations", 0) else 0


if __name__ == "__main__":
    sys.exit(main())
