"""Analysis pipeline: parse, bind, graph, scope, rules, suppressions.

Usage:
    from src.pipeline import run_analysis
    result = run_analysis(load_run_config(Path(".")))
"""

import logging
from dataclasses import dataclass, field

from .binder import SourceModel, bind_types
from .callgraph import CallGraph, build_call_graph
from .config import RunConfig
from .report import Finding, apply_suppressions, diff_baseline, read_baseline, to_findings
from .rules import run_all
from .scope import EntryKind, ScopeSet, block_entries, compute_scope, find_entry_points, legacy_blacklist_scope
from .source_model import FuncId, ParseDiagnostic, parse_tree

logger = logging.getLogger(__name__)

COVERAGE_SAMPLE = 5


@dataclass
class ScopeResult:
    model: SourceModel
    graph: CallGraph
    entries: dict[EntryKind, set[FuncId]]
    scope: ScopeSet


@dataclass
class AnalysisResult:
    scope: ScopeResult
    findings: list[Finding]
    diagnostics: list[ParseDiagnostic] = field(default_factory=list)
    new: list[Finding] = field(default_factory=list)
    fixed: list[str] = field(default_factory=list)

    def actionable(self, fail_on: str) -> list[Finding]:
        """Unsuppressed findings that fail the run under the policy."""
        if fail_on == "none":
            return []
        candidates = self.new if fail_on == "new-only" else self.findings
        return [finding for finding in candidates if not finding.suppressed]


def build_scope(config: RunConfig) -> ScopeResult:
    """Parse, bind and build the call graph, then compute the configured scope."""
    tree = parse_tree(config.root, config.include, config.exclude, config.workers)
    model = bind_types(tree)
    graph = build_call_graph(model)

    unresolved = graph.coverage()
    if unresolved:
        sample = ", ".join(f"{edge.site.file}:{edge.site.line}" for edge in unresolved[:COVERAGE_SAMPLE])
        logger.warning(f"Coverage: {len(unresolved)} call sites could not be resolved (e.g. {sample})")

    entries = find_entry_points(model, config.entry_spec)
    if config.mode == "blacklist":
        scope = legacy_blacklist_scope(model, config.blacklist_patterns)
    else:
        scope = compute_scope(graph, entries)
    return ScopeResult(model=model, graph=graph, entries=entries, scope=scope)


def run_analysis(config: RunConfig) -> AnalysisResult:
    """Run the whole analysis for one root.

    Raises:
        SourceTreeError: If the root is missing or holds no parseable file
        BaselineError: If the configured baseline cannot be read
    """
    logger.info("=" * 60)
    logger.info(f"CHAINLINT ANALYSIS - {config.project} ({config.mode})")
    logger.info("=" * 60)

    baseline = read_baseline(config.baseline) if config.baseline is not None else None

    scoped = build_scope(config)
    diagnostics = list(scoped.model.tree.diagnostics)

    logger.info("Running detectors...")
    raw = run_all(scoped.model, scoped.graph, scoped.scope, block_entries(scoped.entries), config.rules)
    findings = apply_suppressions(to_findings(raw), scoped.model, diagnostics)

    result = AnalysisResult(scope=scoped, findings=findings, diagnostics=diagnostics)
    if baseline is not None:
        result.new, result.fixed = diff_baseline(findings, baseline)
        logger.info(f"Baseline: {len(result.new)} new, {len(result.fixed)} fixed")

    logger.info("=" * 60)
    logger.info(f"ANALYSIS COMPLETE - {len(findings)} findings "
                f"({sum(1 for f in findings if f.suppressed)} suppressed)")
    logger.info("=" * 60)
    return result
