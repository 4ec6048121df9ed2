"""Precision and noise-ratio statistics over labeled findings."""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from .config import RULE_NAMES

logger = logging.getLogger(__name__)

GROUP_BY = ("rule", "project")
LABEL_KINDS = ("TP", "FP", "DUP")
FINGERPRINT_KEY = "chainlint/v1"


class MetricsError(Exception):
    """Exception raised for inconsistent labels or reports."""
    pass


# =============================================================================
# Labels and inputs
# =============================================================================

@dataclass(frozen=True)
class Label:
    kind: str
    canonical: str | None = None


@dataclass
class LabelSet:
    entries: dict[str, Label] = field(default_factory=dict)

    def get(self, fingerprint: str) -> Label | None:
        return self.entries.get(fingerprint)

    def validate(self) -> None:
        """Raises MetricsError unless every DUP points at a TP."""
        dangling = sorted(
            f"{fingerprint} -> {label.canonical}"
            for fingerprint, label in self.entries.items()
            if label.kind == "DUP" and (self.entries.get(label.canonical or "") or Label("")).kind != "TP"
        )
        if dangling:
            raise MetricsError("DUP labels must point at TP labels: " + ", ".join(dangling))

    @classmethod
    def load(cls, path: Path) -> "LabelSet":
        """Read `fingerprint,label[,canonical]` rows (header required).

        Raises:
            OSError: If the file cannot be read
            MetricsError: On unknown labels, repeated fingerprints or dangling DUPs
        """
        labels = cls()
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None or not {"fingerprint", "label"} <= set(reader.fieldnames):
                raise MetricsError(f"{path}: header must be fingerprint,label[,canonical]")
            for row in reader:
                fingerprint = (row.get("fingerprint") or "").strip()
                kind = (row.get("label") or "").strip().upper()
                canonical = (row.get("canonical") or "").strip() or None
                if not fingerprint:
                    continue
                if kind not in LABEL_KINDS:
                    raise MetricsError(f"{path}: unknown label {kind!r} for {fingerprint}")
                if kind == "DUP" and canonical is None:
                    raise MetricsError(f"{path}: DUP label for {fingerprint} has no canonical fingerprint")
                if fingerprint in labels.entries:
                    raise MetricsError(f"{path}: {fingerprint} is labeled twice")
                labels.entries[fingerprint] = Label(kind, canonical if kind == "DUP" else None)
        labels.validate()
        logger.info(f"Loaded {len(labels.entries)} labels from {path}")
        return labels


@dataclass(frozen=True)
class EvalFinding:
    rule: str
    project: str
    fingerprint: str
    suppressed: bool = False


def load_sarif_findings(paths: list[Path]) -> tuple[list[EvalFinding], list[str]]:
    """Findings and project names from SARIF documents written by `analyze`.

    Raises:
        OSError: If a document cannot be read
        ValueError: If a document is not JSON
    """
    findings = []
    projects = []
    for path in paths:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
        for run in document.get("runs", []):
            project = run.get("properties", {}).get("project") or Path(path).stem
            projects.append(project)
            for result in run.get("results", []):
                findings.append(EvalFinding(
                    rule=result.get("ruleId", ""),
                    project=project,
                    fingerprint=result.get("partialFingerprints", {}).get(FINGERPRINT_KEY, ""),
                    suppressed=bool(result.get("suppressions")),
                ))
    return findings, sorted(set(projects))


# =============================================================================
# Statistics
# =============================================================================

@dataclass(frozen=True)
class GroupStats:
    positives: int
    false_positives: int
    true_positives: int
    unique_true_positives: int
    precision: Fraction | None
    noise_ratio: Fraction | None


def counts_to_stats(positives: int, false_positives: int, duplicates: int) -> GroupStats:
    """TP = P - FP, UTP = TP - dups, precision = TP/P, NR = (TP - UTP)/TP."""
    if min(positives, false_positives, duplicates) < 0 or false_positives + duplicates > positives:
        raise MetricsError(f"Inconsistent counts P={positives} FP={false_positives} dups={duplicates}")
    true_positives = positives - false_positives
    unique = true_positives - duplicates
    return GroupStats(
        positives=positives,
        false_positives=false_positives,
        true_positives=true_positives,
        unique_true_positives=unique,
        precision=Fraction(true_positives, positives) if positives else None,
        noise_ratio=Fraction(true_positives - unique, true_positives) if true_positives else None,
    )


@dataclass
class MetricsReport:
    group_by: str
    groups: dict[str, GroupStats]
    total: GroupStats
    unlabeled: list[str] = field(default_factory=list)


def compute_metrics(
    findings: list[EvalFinding],
    labels: LabelSet,
    group_by: str = "rule",
    allow_unlabeled: bool = False,
    groups: list[str] | None = None,
) -> MetricsReport:
    """Statistics per rule or per project.

    Suppressed findings are not positives. With `allow_unlabeled`, unlabeled
    findings are left out and listed in the report instead of failing.

    Raises:
        MetricsError: On unlabeled findings (unless allowed) or an unknown grouping
    """
    if group_by not in GROUP_BY:
        raise MetricsError(f"group_by must be one of {', '.join(GROUP_BY)}")
    labels.validate()

    seeded = list(RULE_NAMES) if group_by == "rule" else list(groups or [])
    counts: dict[str, list[int]] = {name: [0, 0, 0] for name in seeded}
    unlabeled = []

    for finding in findings:
        if finding.suppressed:
            continue
        label = labels.get(finding.fingerprint)
        if label is None:
            unlabeled.append(finding.fingerprint)
            continue
        key = finding.rule if group_by == "rule" else finding.project
        group = counts.setdefault(key, [0, 0, 0])
        group[0] += 1
        if label.kind == "FP":
            group[1] += 1
        elif label.kind == "DUP":
            group[2] += 1

    if unlabeled and not allow_unlabeled:
        raise MetricsError("Unlabeled findings: " + ", ".join(sorted(unlabeled)))
    if unlabeled:
        logger.warning(f"Excluded {len(unlabeled)} unlabeled findings")

    stats = {name: counts_to_stats(*counts[name]) for name in sorted(counts)}
    total = counts_to_stats(*(sum(group[i] for group in counts.values()) for i in range(3)))
    return MetricsReport(group_by=group_by, groups=stats, total=total, unlabeled=sorted(unlabeled))


# =============================================================================
# Comparison
# =============================================================================

@dataclass(frozen=True)
class GroupDelta:
    false_positives: int
    unique_true_positives: int
    true_positives: int
    noise_ratio: Fraction | None
    precision: Fraction | None


@dataclass
class ComparisonReport:
    group_by: str
    groups: dict[str, GroupDelta]
    total: GroupDelta
    first: MetricsReport
    second: MetricsReport


def _delta(first: GroupStats, second: GroupStats, fp_only_gain: bool) -> GroupDelta:
    def minus(a: Fraction | None, b: Fraction | None) -> Fraction | None:
        return None if a is None or b is None else b - a

    precision = minus(first.precision, second.precision)
    # a group that only ever produced FPs and now produces nothing
    if (precision is None and fp_only_gain and second.positives == 0
            and first.positives > 0 and first.true_positives == 0):
        precision = Fraction(1)
    return GroupDelta(
        false_positives=second.false_positives - first.false_positives,
        unique_true_positives=second.unique_true_positives - first.unique_true_positives,
        true_positives=second.true_positives - first.true_positives,
        noise_ratio=minus(first.noise_ratio, second.noise_ratio),
        precision=precision,
    )


def compare(first: MetricsReport, second: MetricsReport, fp_only_gain: bool = False) -> ComparisonReport:
    """Second run minus first run, per group.

    Raises:
        MetricsError: If the reports group differently or cover different groups
    """
    if first.group_by != second.group_by:
        raise MetricsError(f"Reports are grouped by {first.group_by} and {second.group_by}")
    missing = sorted(set(first.groups) ^ set(second.groups))
    if missing:
        raise MetricsError("Group sets differ: " + ", ".join(missing))
    return ComparisonReport(
        group_by=first.group_by,
        groups={name: _delta(first.groups[name], second.groups[name], fp_only_gain) for name in sorted(first.groups)},
        total=_delta(first.total, second.total, fp_only_gain),
        first=first,
        second=second,
    )


# =============================================================================
# Display and persistence
# =============================================================================

def format_percent(value: Fraction | None, signed: bool = False) -> str:
    """Two-decimal percentage rounded half-up (away from zero); N/A for None."""
    if value is None:
        return "N/A"
    hundredths = math.floor(abs(value) * 10000 + Fraction(1, 2))
    sign = "-" if value < 0 and hundredths else ("+" if signed and hundredths else "")
    return f"{sign}{hundredths // 100}.{hundredths % 100:02d}%"


def _fraction_to_json(value: Fraction | None) -> str | None:
    return None if value is None else f"{value.numerator}/{value.denominator}"


def _fraction_from_json(value: str | None) -> Fraction | None:
    return None if value is None else Fraction(value)


def _stats_to_dict(stats: GroupStats) -> dict[str, Any]:
    return {
        "P": stats.positives,
        "FP": stats.false_positives,
        "TP": stats.true_positives,
        "UTP": stats.unique_true_positives,
        "precision": _fraction_to_json(stats.precision),
        "NR": _fraction_to_json(stats.noise_ratio),
    }


def _stats_from_dict(data: dict[str, Any]) -> GroupStats:
    stats = GroupStats(
        positives=int(data["P"]),
        false_positives=int(data["FP"]),
        true_positives=int(data["TP"]),
        unique_true_positives=int(data["UTP"]),
        precision=_fraction_from_json(data.get("precision")),
        noise_ratio=_fraction_from_json(data.get("NR")),
    )
    expected = counts_to_stats(stats.positives, stats.false_positives,
                               stats.true_positives - stats.unique_true_positives)
    if expected != stats:
        raise MetricsError(f"Stored statistics are inconsistent: {data}")
    return stats


def report_to_dict(report: MetricsReport) -> dict[str, Any]:
    return {
        "group_by": report.group_by,
        "groups": {name: _stats_to_dict(stats) for name, stats in report.groups.items()},
        "total": _stats_to_dict(report.total),
        "unlabeled": report.unlabeled,
    }


def report_from_dict(data: dict[str, Any]) -> MetricsReport:
    try:
        return MetricsReport(
            group_by=data["group_by"],
            groups={name: _stats_from_dict(stats) for name, stats in sorted(data["groups"].items())},
            total=_stats_from_dict(data["total"]),
            unlabeled=list(data.get("unlabeled", [])),
        )
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as e:
        raise MetricsError(f"Malformed metrics report: {e}") from e


def save_report(path: Path, report: MetricsReport) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report), indent=2) + "\n", encoding="utf-8")


def load_report(path: Path) -> MetricsReport:
    """Raises OSError/ValueError for unreadable files, MetricsError for bad content."""
    return report_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
