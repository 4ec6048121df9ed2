"""Report rendering: text findings, SARIF 2.1.0 and metrics tables."""

import json
from pathlib import Path
from typing import Any

from jinja2 import Environment, FileSystemLoader, select_autoescape

from . import __version__
from .config import RULE_NAMES
from .metrics import FINGERPRINT_KEY, ComparisonReport, MetricsReport, format_percent
from .report import Finding
from .rules import RULE_DESCRIPTIONS
from .source_model import FuncId, Position

TEMPLATES_DIR = Path(__file__).parent / "templates"

SARIF_SCHEMA = "https://json.schemastore.org/sarif-2.1.0.json"
SARIF_VERSION = "2.1.0"
TOOL_NAME = "chainlint"


def get_template_env(templates_dir: Path = TEMPLATES_DIR) -> Environment:
    """Get Jinja2 template environment.

    Args:
        templates_dir: Path to templates directory

    Returns:
        Configured Jinja2 Environment
    """
    env = Environment(
        loader=FileSystemLoader(templates_dir),
        autoescape=select_autoescape(["html", "xml"]),
        trim_blocks=True,
        lstrip_blocks=True,
        keep_trailing_newline=True,
    )
    env.filters["percent"] = format_percent
    env.filters["signed_percent"] = lambda value: format_percent(value, signed=True)
    env.filters["signed"] = lambda value: f"{value:+d}" if value else "0"
    return env


# =============================================================================
# Findings
# =============================================================================

def emit_text(findings: list[Finding]) -> str:
    """`file:line:col<TAB>rule<TAB>message<TAB>fingerprint` lines, sorted."""
    lines = []
    for finding in sorted(findings, key=Finding.sort_key):
        message = finding.message
        if finding.suppressed:
            message = f"{message} [suppressed: {finding.suppression_reason}]"
        lines.append(f"{finding.location}\t{finding.rule}\t{message}\t{finding.fingerprint}")
    return "".join(f"{line}\n" for line in lines)


def _physical_location(file: str, line: int, column: int, start_byte: int | None = None,
                       end_byte: int | None = None) -> dict[str, Any]:
    region: dict[str, Any] = {"startLine": line, "startColumn": column}
    if start_byte is not None and end_byte is not None:
        region["byteOffset"] = start_byte
        region["byteLength"] = end_byte - start_byte
    return {
        "artifactLocation": {"uri": file, "uriBaseId": "%SRCROOT%"},
        "region": region,
    }


def _code_flow(path: list[tuple[FuncId, Position]]) -> dict[str, Any]:
    locations = []
    for func_id, position in path:
        locations.append({
            "location": {
                "physicalLocation": _physical_location(position.file, position.line, position.column),
                "message": {"text": str(func_id)},
            },
        })
    return {"threadFlows": [{"locations": locations}]}


def _sarif_result(finding: Finding) -> dict[str, Any]:
    location = finding.location
    qualified = str(finding.enclosing) if finding.enclosing else f"{finding.import_path}.{finding.anchor}"
    result: dict[str, Any] = {
        "ruleId": finding.rule,
        "ruleIndex": RULE_NAMES.index(finding.rule),
        "level": "error",
        "message": {"text": finding.message},
        "locations": [{
            "physicalLocation": _physical_location(
                location.file, location.line, location.column, location.start_byte, location.end_byte,
            ),
            "logicalLocations": [{
                "fullyQualifiedName": qualified,
                "kind": "function" if finding.enclosing else "declaration",
            }],
        }],
        "partialFingerprints": {FINGERPRINT_KEY: finding.fingerprint},
    }
    if finding.witness_path:
        result["codeFlows"] = [_code_flow(finding.witness_path)]
    if finding.entry_kinds:
        result["properties"] = {"entryKinds": sorted(finding.entry_kinds)}
    if finding.suppressed:
        result["suppressions"] = [{"kind": "inSource", "justification": finding.suppression_reason or ""}]
    return result


def emit_sarif(findings: list[Finding], project: str = "", version: str = __version__) -> dict[str, Any]:
    """One-run SARIF document; paths stay relative to the analysis root."""
    rules = [
        {
            "id": rule,
            "name": rule.split("/", 1)[-1],
            "shortDescription": {"text": RULE_DESCRIPTIONS[rule]},
            "defaultConfiguration": {"level": "error"},
        }
        for rule in RULE_NAMES
    ]
    run: dict[str, Any] = {
        "tool": {"driver": {"name": TOOL_NAME, "version": version, "rules": rules}},
        "results": [_sarif_result(finding) for finding in sorted(findings, key=Finding.sort_key)],
        "properties": {"project": project},
    }
    return {"$schema": SARIF_SCHEMA, "version": SARIF_VERSION, "runs": [run]}


def render_sarif(document: dict[str, Any]) -> str:
    return json.dumps(document, indent=2) + "\n"


# =============================================================================
# Metrics tables
# =============================================================================

def render_metrics(report: MetricsReport, templates_dir: Path = TEMPLATES_DIR) -> str:
    template = get_template_env(templates_dir).get_template("metrics.txt.j2")
    width = max([len("total")] + [len(name) for name in report.groups])
    return template.render(report=report, width=width)


def render_comparison(comparison: ComparisonReport, templates_dir: Path = TEMPLATES_DIR) -> str:
    template = get_template_env(templates_dir).get_template("comparison.txt.j2")
    width = max([len("total")] + [len(name) for name in comparison.groups])
    return template.render(comparison=comparison, width=width)
