"""Findings: fingerprints, in-source suppressions and baselines."""

import hashlib
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .binder import SourceModel
from .config import RULE_NAMES
from .rules import RawFinding
from .source_model import FuncId, ParseDiagnostic, Position, SyntaxNode

logger = logging.getLogger(__name__)

SUPPRESSION_TOKEN = "consensus:ignore"
_DIRECTIVE = re.compile(r"^//\s*consensus:ignore\b(?P<rest>.*)$")


class BaselineError(Exception):
    """Exception raised when a baseline file cannot be read or written."""
    pass


@dataclass(frozen=True, order=True)
class Location:
    file: str
    line: int
    column: int
    start_byte: int
    end_byte: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass
class Finding:
    rule: str
    message: str
    location: Location
    import_path: str
    anchor: str
    fingerprint: str
    enclosing: FuncId | None = None
    witness_path: list[tuple[FuncId, Position]] | None = None
    entry_kinds: frozenset[str] = field(default_factory=frozenset)
    suppressed: bool = False
    suppression_reason: str | None = None

    def sort_key(self) -> tuple:
        return self.location.file, self.location.line, self.location.column, RULE_NAMES.index(self.rule)


# =============================================================================
# Fingerprints
# =============================================================================

def node_path(root: SyntaxNode, target: SyntaxNode) -> list[str]:
    """Node types from root down to target, each with its ordinal among
    same-type siblings.

    Returns:
        Path labels like `block#0`; empty when target is root
    """
    stack: list[tuple[SyntaxNode, list[str]]] = [(root, [])]
    while stack:
        node, path = stack.pop()
        if node is target:
            return path
        counts: dict[str, int] = {}
        for child in node.children:
            ordinal = counts.get(child.ts_type, 0)
            counts[child.ts_type] = ordinal + 1
            if child.start_byte <= target.start_byte and target.end_byte <= child.end_byte:
                stack.append((child, path + [f"{child.ts_type}#{ordinal}"]))
    raise ValueError(f"Node at {target.position} is not below {root.position}")


def fingerprint(raw: RawFinding) -> str:
    """Location-independent digest of a finding.

    Depends on the rule, the package, the enclosing declaration's name and the
    node path inside it; not on file names, line numbers or other files.
    """
    parts = [raw.rule, raw.import_path, raw.anchor, *node_path(raw.root, raw.node)]
    return hashlib.sha256("\x00".join(parts).encode("utf-8")).hexdigest()


def to_findings(raw_findings: list[RawFinding]) -> list[Finding]:
    findings = []
    for raw in raw_findings:
        node = raw.node
        findings.append(Finding(
            rule=raw.rule,
            message=raw.message,
            location=Location(node.position.file, node.position.line, node.position.column,
                              node.start_byte, node.end_byte),
            import_path=raw.import_path,
            anchor=raw.anchor,
            fingerprint=fingerprint(raw),
            enclosing=raw.enclosing,
            witness_path=raw.witness_path,
            entry_kinds=raw.entry_kinds,
        ))
    return sorted(findings, key=Finding.sort_key)


# =============================================================================
# Suppressions
# =============================================================================

@dataclass(frozen=True)
class Directive:
    rule: str
    justification: str


def parse_directives(model: SourceModel, diagnostics: list[ParseDiagnostic] | None = None) -> dict[tuple[str, int], list[Directive]]:
    """Well-formed `//consensus:ignore <rule> <justification>` comments by (file, line).

    Malformed directives are reported as diagnostics and ignored.
    """
    directives: dict[tuple[str, int], list[Directive]] = {}
    for file in model.tree.files():
        for comment in file.root.find("comment"):
            match = _DIRECTIVE.match(comment.text or "")
            if match is None:
                continue
            rule, _, justification = match.group("rest").strip().partition(" ")
            justification = justification.strip()
            line = comment.position.line
            problem = None
            if not rule:
                problem = "suppression directive is missing a rule name"
            elif not justification:
                problem = f"suppression directive for {rule} is missing a justification"
            elif rule not in RULE_NAMES:
                problem = f"suppression directive names unknown rule {rule}"
            if problem is not None:
                diagnostic = ParseDiagnostic(file.path, line, problem)
                logger.warning(str(diagnostic))
                if diagnostics is not None:
                    diagnostics.append(diagnostic)
                continue
            directives.setdefault((file.path, line), []).append(Directive(rule, justification))
    return directives


def apply_suppressions(
    findings: list[Finding],
    model: SourceModel,
    diagnostics: list[ParseDiagnostic] | None = None,
) -> list[Finding]:
    """Mark findings covered by a directive on their line or the line above.

    Findings are never dropped; only their suppression status changes.
    """
    directives = parse_directives(model, diagnostics)
    result = []
    for finding in findings:
        location = finding.location
        reason = None
        for line in (location.line, location.line - 1):
            for directive in directives.get((location.file, line), []):
                if directive.rule == finding.rule:
                    reason = directive.justification
                    break
            if reason is not None:
                break
        if reason is not None:
            finding = replace(finding, suppressed=True, suppression_reason=reason)
        result.append(finding)
    suppressed = sum(1 for f in result if f.suppressed)
    if suppressed:
        logger.info(f"Suppressed {suppressed} of {len(result)} findings")
    return result


# =============================================================================
# Baselines
# =============================================================================

def read_baseline(path: Path) -> set[str]:
    """Read a newline-separated fingerprint file; `#` starts a comment.

    Raises:
        BaselineError: If the file cannot be read
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise BaselineError(f"Cannot read baseline {path}: {e}") from e
    fingerprints = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            fingerprints.add(line)
    logger.info(f"Loaded {len(fingerprints)} baseline fingerprints from {path}")
    return fingerprints


def write_baseline(path: Path, findings: list[Finding]) -> int:
    """Write the fingerprints of the unsuppressed findings.

    Returns:
        Number of fingerprints written
    """
    fingerprints = sorted({f.fingerprint for f in findings if not f.suppressed})
    lines = ["# chainlint baseline"] + fingerprints
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise BaselineError(f"Cannot write baseline {path}: {e}") from e
    return len(fingerprints)


def diff_baseline(findings: list[Finding], baseline: set[str]) -> tuple[list[Finding], list[str]]:
    """Split into findings absent from the baseline and baseline entries no longer found."""
    current = {finding.fingerprint for finding in findings}
    new = [finding for finding in findings if finding.fingerprint not in baseline]
    fixed = sorted(baseline - current)
    return new, fixed
