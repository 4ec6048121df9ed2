"""chainlint command line.

Usage:
    python -m src.cli analyze <root> [--output sarif] [--baseline FILE]
    python -m src.cli scope <root> [--mode blacklist] [--dump-graph]
    python -m src.cli eval <results.sarif>... --labels labels.csv [--group-by project]
    python -m src.cli compare <first.json> <second.json> [--fp-only-gain]
    python -m src.cli baseline write <root> --out FILE
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any

from . import __version__
from .callgraph import CallGraphError
from .config import FAIL_ON, MODES, OUTPUTS, ConfigError, RunConfig, load_run_config, validate_run_config
from .metrics import GROUP_BY, LabelSet, MetricsError, compare, compute_metrics, load_report, load_sarif_findings, save_report
from .pipeline import build_scope, run_analysis
from .report import BaselineError, write_baseline
from .report_builder import emit_sarif, emit_text, render_comparison, render_metrics, render_sarif
from .scope import graph_listing, scope_listing
from .source_model import EmptyTreeError, RootNotFoundError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2
EXIT_FATAL = 3

USAGE_ERRORS = (ConfigError, RootNotFoundError, OSError)
FATAL_ERRORS = (EmptyTreeError, CallGraphError, MetricsError, BaselineError)


def setup_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )


def _tree_options() -> argparse.ArgumentParser:
    """Flags shared by the commands that analyze a source tree."""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("root", type=Path, help="Analysis root (a Go module checkout)")
    parent.add_argument("--config", type=Path, help="Config document (default: <root>/.chainlint)")
    parent.add_argument("--mode", choices=MODES, help="Scope strategy")
    parent.add_argument("--include", help="Comma-separated include globs")
    parent.add_argument("--exclude", help="Comma-separated exclude globs")
    parent.add_argument("--blacklist", help="Comma-separated package substrings for blacklist mode")
    parent.add_argument("--entry-methods", help="Comma-separated Name or Name/arity entry methods")
    parent.add_argument("--server-suffixes", help="Comma-separated server interface suffixes")
    parent.add_argument("--extra-entries", help="Comma-separated extra entry point names")
    parent.add_argument("--include-init-chain", action="store_true", default=None,
                        help="Treat InitChain as an extra entry point")
    parent.add_argument("--rules", help="Comma-separated rule names to enable")
    parent.add_argument("--project", help="Project name recorded in reports")
    parent.add_argument("--workers", type=int, help="Parser threads")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chainlint", description="Consensus-critical static analysis for Cosmos-SDK appchains")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    commands = parser.add_subparsers(dest="command", required=True)
    tree = _tree_options()

    analyze = commands.add_parser("analyze", parents=[tree], help="Run the detectors")
    analyze.add_argument("--output", choices=OUTPUTS, help="Report format")
    analyze.add_argument("--output-file", type=Path, help="Write the report here instead of stdout")
    analyze.add_argument("--baseline", type=Path, help="Baseline fingerprint file")
    analyze.add_argument("--fail-on", choices=FAIL_ON, help="Which findings make the run fail")

    scope = commands.add_parser("scope", parents=[tree], help="List the consensus-critical scope")
    scope.add_argument("--dump-graph", action="store_true", help="List call graph edges instead")
    scope.add_argument("--output-file", type=Path, help="Write the listing here instead of stdout")

    evaluate = commands.add_parser("eval", help="Precision and noise ratio of labeled findings")
    evaluate.add_argument("sarif", type=Path, nargs="+", help="SARIF documents written by analyze")
    evaluate.add_argument("--labels", type=Path, required=True, help="CSV: fingerprint,label[,canonical]")
    evaluate.add_argument("--group-by", choices=GROUP_BY, default="rule")
    evaluate.add_argument("--allow-unlabeled", action="store_true", help="Exclude unlabeled findings instead of failing")
    evaluate.add_argument("--json", type=Path, help="Also write the report as JSON")

    comparison = commands.add_parser("compare", help="Compare two metrics reports")
    comparison.add_argument("first", type=Path, help="JSON report of the first run")
    comparison.add_argument("second", type=Path, help="JSON report of the second run")
    comparison.add_argument("--fp-only-gain", action="store_true",
                            help="Count a group going from only FPs to no findings as a 100%% precision gain")

    baseline = commands.add_parser("baseline", help="Baseline management")
    baseline_commands = baseline.add_subparsers(dest="baseline_command", required=True)
    write = baseline_commands.add_parser("write", parents=[tree], help="Write current fingerprints")
    write.add_argument("--out", type=Path, required=True, help="Baseline file to write")
    return parser


def _load_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None and not args.config.is_file():
        raise ConfigError(f"Config file not found: {args.config}")
    overrides: dict[str, Any] = {
        "mode": args.mode,
        "include": args.include,
        "exclude": args.exclude,
        "blacklist": args.blacklist,
        "entry.methods": args.entry_methods,
        "entry.server_suffixes": args.server_suffixes,
        "entry.extra": args.extra_entries,
        "scope.include_init_chain": "true" if args.include_init_chain else None,
        "rules.enabled": args.rules,
        "project": args.project,
        "workers": args.workers,
        "output": getattr(args, "output", None),
        "output_file": getattr(args, "output_file", None),
        "baseline": getattr(args, "baseline", None),
        "fail_on": getattr(args, "fail_on", None),
    }
    config = load_run_config(args.root, overrides, args.config)
    errors = validate_run_config(config)
    if errors:
        for error in errors:
            logger.error(f"Configuration error: {error}")
        raise ConfigError("Configuration validation failed")
    return config


def _write(text: str, output_file: Path | None) -> None:
    if output_file is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        output_file.write_text(text, encoding="utf-8")
        logger.info(f"Wrote {output_file}")


def cmd_analyze(args: argparse.Namespace) -> int:
    config = _load_config(args)
    result = run_analysis(config)
    if config.output == "sarif":
        text = render_sarif(emit_sarif(result.findings, config.project))
    else:
        text = emit_text(result.findings)
    _write(text, config.output_file)

    actionable = result.actionable(config.fail_on)
    if actionable:
        logger.info(f"{len(actionable)} actionable findings (fail_on={config.fail_on})")
        return EXIT_FINDINGS
    return EXIT_OK


def cmd_scope(args: argparse.Namespace) -> int:
    config = _load_config(args)
    scoped = build_scope(config)
    lines = graph_listing(scoped.graph) if args.dump_graph else scope_listing(scoped.scope)
    _write("".join(f"{line}\n" for line in lines), config.output_file)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    findings, projects = load_sarif_findings(args.sarif)
    labels = LabelSet.load(args.labels)
    report = compute_metrics(findings, labels, args.group_by, args.allow_unlabeled, groups=projects)
    sys.stdout.write(render_metrics(report))
    if args.json is not None:
        save_report(args.json, report)
        logger.info(f"Wrote {args.json}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    comparison = compare(load_report(args.first), load_report(args.second), args.fp_only_gain)
    sys.stdout.write(render_comparison(comparison))
    return EXIT_OK


def cmd_baseline_write(args: argparse.Namespace) -> int:
    config = _load_config(args)
    config.baseline = None
    result = run_analysis(config)
    count = write_baseline(args.out, result.findings)
    logger.info(f"Wrote {count} fingerprints to {args.out}")
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "scope": cmd_scope,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "baseline": cmd_baseline_write,
}


def main(argv: list[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    setup_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except FATAL_ERRORS as e:
        logger.error(f"Analysis failed: {e}")
        return EXIT_FATAL
    except USAGE_ERRORS as e:
        logger.error(f"{e}")
        return EXIT_USAGE
    except Exception:
        logger.exception("Analysis failed with an unexpected error")
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
