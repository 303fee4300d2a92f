"""Command-line experiment runner."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError
from .experiment import build_plan, load_config_file
from .metrics import gnuplot_columns, summary_csv, sweep, tasks_csv
from .profiles import CalibrationError
from .workload import describe_presets

logger = logging.getLogger("edgesched")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CALIBRATION = 3
EXIT_RUN_FAILED = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgesched",
        description="Run edge scheduling experiments (AOR / AOE / EODS / DDS) in a deterministic simulator.",
    )
    parser.add_argument("config", nargs="?", help="experiment config file (JSON)")
    parser.add_argument("--preset", help="workload preset named after a figure, e.g. fig5a")
    parser.add_argument("--policy", help="run only this policy (aor, aoe, eods, dds) or preset curve label")
    parser.add_argument("--seed", type=int, help="random seed (only transfer loss is random)")
    parser.add_argument("--out", help="output directory (default: config's output_dir or ./results)")
    parser.add_argument("--trace", action="store_true", help="also write the dispatched event trace")
    parser.add_argument("--list-presets", action="store_true", help="print the presets and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _write_outputs(out: Path, table, plan, partial: bool) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    suffix = ".partial" if partial else ""
    files = {
        f"results{suffix}.csv": summary_csv(table),
        f"tasks{suffix}.csv": tasks_csv(table),
        f"results{suffix}.dat": gnuplot_columns(table),
        "config.json": json.dumps(
            {
                "experiment": plan.base.echo(),
                "curves": [v.label for v in plan.variants],
                "axis": plan.axis,
                "values": list(plan.values),
            },
            indent=2,
            sort_keys=True,
            default=str,
        )
        + "\n",
    }
    if plan.base.trace:
        lines = []
        for p in table.points:
            lines.append(f"# {p.label} {p.axis}={p.value}")
            lines.extend(p.result.trace or [])
        files[f"trace{suffix}.txt"] = "\n".join(lines) + "\n"
    written = []
    for name, text in files.items():
        path = out / name
        path.write_text(text)
        written.append(path)
    return written


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.list_presets:
        print(describe_presets())
        return EXIT_OK
    if not args.config:
        print("error: a config file is required (use --list-presets to see presets)", file=sys.stderr)
        return EXIT_CONFIG

    config_path = Path(args.config)
    try:
        data = load_config_file(config_path)
        plan = build_plan(
            data,
            base_dir=config_path.resolve().parent,
            preset=args.preset,
            policy=args.policy,
            seed=args.seed,
            output_dir=args.out,
            trace=args.trace,
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationError as exc:
        print(f"calibration error: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION

    table = sweep(plan.base, plan.axis, plan.values, plan.variants)
    written = _write_outputs(plan.output_dir, table, plan, table.partial)
    for path in written:
        logger.info("wrote %s", path)
    if table.partial:
        print(f"run failed, partial results kept: {table.error}", file=sys.stderr)
        return EXIT_RUN_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
