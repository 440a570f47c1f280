"""Main entry point for the mural command line."""

import argparse
import json
import logging
import sys

from mural.domain import Instance
from mural.errors import ConfigError, MuralError, ReportMismatchError
from mural.report import RunReport

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbosity: int) -> None:
    """Send the mural loggers to stderr: -1 warnings only, 0 info, 1 debug."""
    level = logging.INFO
    if verbosity > 0:
        level = logging.DEBUG
    elif verbosity < 0:
        level = logging.WARNING
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger("mural")
    root.handlers[:] = [handler]
    root.setLevel(level)


def cmd_run(args) -> int:
    """Run a config; exit 1 on misses under --strict."""
    from mural.harness.config import load_config
    from mural.harness.runner import run_experiment

    config = load_config(args.config)
    result = run_experiment(config, out_dir=args.out, jobs=args.jobs, strict=args.strict,
                            seed_offset=args.seed_offset)
    for outcome in result.failures:
        print(f"Error: {outcome.cell.name}: {'; '.join(outcome.problems)}", file=sys.stderr)
    if result.misses:
        names = ", ".join(o.cell.name for o in result.misses)
        print(f"{'Error' if args.strict else 'Warning'}: guarantee missed by {names}", file=sys.stderr)
    print(result.csv_path)
    return result.exit_status


def cmd_compare(args) -> int:
    """Print the active and passive comparison table as CSV."""
    from mural.harness.compare import COMPARISON_COLUMNS, compare_reports, load_reports
    from mural.harness.runner import render_csv, write_atomic

    rows = compare_reports(load_reports(args.reports))
    text = render_csv(COMPARISON_COLUMNS, [row.as_row() for row in rows])
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _read_json(path: str):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def cmd_verify(args) -> int:
    """Recompute a report against its instance."""
    from mural.harness.verify import check_report
    from mural.scenarios import build_scenario

    report = RunReport.from_dict(_read_json(args.report))
    if args.instance:
        inst = Instance.from_dict(_read_json(args.instance))
    elif report.scenario is not None:
        inst = build_scenario(report.scenario["name"], report.scenario.get("params", {}))
    else:
        raise ConfigError("report carries no scenario; pass --instance", args.report)
    check_report(report, inst)
    print(f"{args.report}: ok (excess {report.excess:.6g}, {report.total_labels} labels)")
    return 0


def cmd_gen(args) -> int:
    """Write a scenario instance as JSON."""
    from mural.harness.config import load_config
    from mural.harness.runner import write_atomic
    from mural.scenarios import build_scenario

    if args.config:
        config = load_config(args.config)
        inst = build_scenario(config.scenario, config.scenario_params)
    else:
        try:
            params = json.loads(args.params)
        except json.JSONDecodeError as err:
            raise ConfigError(f"--params is not valid JSON: {err.msg}") from err
        inst = build_scenario(args.scenario, params)
    text = inst.to_json(indent=2) + "\n"
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_plot(args) -> int:
    """Plot median labels against 1/eps from a results.csv."""
    from mural.harness.plotting import plot_label_complexity, read_rows

    plot_label_complexity(read_rows(args.csv), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    """The mural argument parser."""
    from mural.harness.config import default_jobs

    parser = argparse.ArgumentParser(
        prog="mural",
        description="Multi-group active learning experiments on finite instances",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_const", const=1, dest="verbosity",
                           help="Log debug output")
    verbosity.add_argument("-q", "--quiet", action="store_const", const=-1, dest="verbosity",
                           help="Only log warnings and errors")
    parser.set_defaults(verbosity=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run every cell of an experiment config")
    run.add_argument("--config", required=True, help="Experiment config (JSON)")
    run.add_argument("--out", help="Output directory, overrides the config's out_dir")
    run.add_argument("--strict", action="store_true", help="Exit 1 when a run misses its guarantee")
    run.add_argument("--jobs", type=int, default=None,
                     help="Worker processes (default: $MURAL_JOBS or 1)")
    run.add_argument("--seed-offset", type=int, default=0, help="Added to every seed of the config")
    run.set_defaults(func=cmd_run, default_jobs=default_jobs)

    compare = sub.add_parser("compare", help="Pair active reports with passive ones")
    compare.add_argument("reports", nargs="+", help="Report files or glob patterns")
    compare.add_argument("--out", help="Comparison CSV (default: stdout)")
    compare.set_defaults(func=cmd_compare)

    verify = sub.add_parser("verify", help="Re-check a report against its instance")
    verify.add_argument("report", help="Run report (JSON)")
    verify.add_argument("--instance", help="Instance JSON (default: rebuild the report's scenario)")
    verify.set_defaults(func=cmd_verify)

    gen = sub.add_parser("gen", help="Emit a scenario as instance JSON")
    source = gen.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", help="Scenario name")
    source.add_argument("--config", help="Take the scenario from an experiment config")
    gen.add_argument("--params", default="{}", help="Scenario parameters as a JSON object")
    gen.add_argument("--out", help="Output file (default: stdout)")
    gen.set_defaults(func=cmd_gen)

    plot = sub.add_parser("plot", help="Plot label complexity from an aggregate CSV")
    plot.add_argument("csv", help="Aggregate CSV written by 'mural run'")
    plot.add_argument("--out", required=True, help="Image file to write")
    plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    """Run the mural command line."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbosity)

    try:
        if getattr(args, "jobs", 0) is None:
            args.jobs = args.default_jobs()
        return args.func(args)
    except ReportMismatchError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except (MuralError, OSError, ValueError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
