"""Tests for fingerprints, suppressions, baselines and report emission."""

import json
from pathlib import Path

import jsonschema
import pytest

from src.config import RULE_NAMES, load_run_config
from src.pipeline import run_analysis
from src.report import BaselineError, diff_baseline, read_baseline, write_baseline
from src.report_builder import emit_sarif, emit_text, render_sarif

from .conftest import write_tree

SARIF_SCHEMA = json.loads((Path(__file__).parent / "sarif_schema.json").read_text())

KEEPER = """
package keeper

type Keeper struct{}

func (k Keeper) BeginBlock() {
	k.check(1)
	go k.flush()
}

func (k Keeper) flush() {}

func (k Keeper) check(n int64) {
	if n < 0 {
		panic("negative")
	}
	if n > 100 {
		panic("overflow")
	}
}
"""


def analyze(root, **overrides):
    return run_analysis(load_run_config(root, overrides or None))


def fingerprints(result) -> dict[tuple[str, int], str]:
    return {(f.rule, f.location.line): f.fingerprint for f in result.findings}


# =============================================================================
# Fingerprints
# =============================================================================

def test_fingerprints_are_stable_under_unrelated_edits(tmp_path):
    first = analyze(write_tree(tmp_path / "a", {"x/k/keeper.go": KEEPER}))
    shifted = KEEPER.replace("type Keeper struct{}\n", "type Keeper struct{}\n\n// padding\n\n")
    second = analyze(write_tree(tmp_path / "b", {
        "x/k/keeper.go": shifted,
        "x/k/other.go": "package keeper\n\nfunc unrelated() {}\n",
    }))

    assert sorted(fingerprints(first).values()) == sorted(fingerprints(second).values())
    assert [f.location.line for f in first.findings] != [f.location.line for f in second.findings]


def test_fingerprint_survives_moving_the_function_to_another_file(tmp_path):
    first = analyze(write_tree(tmp_path / "a", {"x/k/keeper.go": KEEPER}))
    second = analyze(write_tree(tmp_path / "b", {"x/k/abci.go": KEEPER}))

    assert {f.fingerprint for f in first.findings} == {f.fingerprint for f in second.findings}


def test_distinct_sites_have_distinct_fingerprints(tmp_path):
    result = analyze(write_tree(tmp_path, {"x/k/keeper.go": KEEPER}))

    panics = [f for f in result.findings if f.rule == "cosmos/block-panic"]
    assert len(panics) == 2
    assert len({f.fingerprint for f in result.findings}) == len(result.findings)


def test_same_code_in_another_package_fingerprints_differently(tmp_path):
    result = analyze(write_tree(tmp_path, {"x/a/keeper.go": KEEPER, "x/b/keeper.go": KEEPER}))

    assert len(result.findings) == 6
    assert len({f.fingerprint for f in result.findings}) == 6


# =============================================================================
# Suppressions
# =============================================================================

def test_directive_suppresses_matching_rule_only(tmp_path):
    source = KEEPER.replace(
        "\tgo k.flush()",
        "\t//consensus:ignore cosmos/goroutine flush is fire and forget\n\tgo k.flush()",
    ).replace(
        '\t\tpanic("negative")',
        '\t\t// consensus:ignore cosmos/goroutine wrong rule\n\t\tpanic("negative")',
    )
    result = analyze(write_tree(tmp_path, {"x/k/keeper.go": source}))

    goroutine = next(f for f in result.findings if f.rule == "cosmos/goroutine")
    assert goroutine.suppressed
    assert goroutine.suppression_reason == "flush is fire and forget"
    assert not any(f.suppressed for f in result.findings if f.rule == "cosmos/block-panic")
    assert len(result.findings) == 3
    assert result.actionable("any") == [f for f in result.findings if not f.suppressed]


def test_trailing_directive_on_the_same_line(tmp_path):
    source = KEEPER.replace("\tgo k.flush()", "\tgo k.flush() //consensus:ignore cosmos/goroutine async flush")
    result = analyze(write_tree(tmp_path, {"x/k/keeper.go": source}))

    assert next(f for f in result.findings if f.rule == "cosmos/goroutine").suppressed


@pytest.mark.parametrize("directive", [
    "//consensus:ignore cosmos/goroutine",
    "//consensus:ignore",
    "//consensus:ignore cosmos/unknown-rule because",
])
def test_malformed_directive_is_a_diagnostic(tmp_path, directive):
    source = KEEPER.replace("\tgo k.flush()", f"\t{directive}\n\tgo k.flush()")
    result = analyze(write_tree(tmp_path, {"x/k/keeper.go": source}))

    assert not any(f.suppressed for f in result.findings)
    assert len(result.diagnostics) == 1
    assert result.diagnostics[0].file == "x/k/keeper.go"


# =============================================================================
# Baselines
# =============================================================================

def test_baseline_write_read_and_diff(tmp_path):
    root = write_tree(tmp_path / "src", {"x/k/keeper.go": KEEPER})
    result = analyze(root)
    path = tmp_path / "baseline.txt"

    count = write_baseline(path, result.findings)

    assert count == 3
    assert path.read_text().startswith("# chainlint baseline\n")
    baseline = read_baseline(path)
    assert baseline == {f.fingerprint for f in result.findings}

    new, fixed = diff_baseline(result.findings, baseline | {"stale"})
    assert new == []
    assert fixed == ["stale"]


def test_new_only_fails_on_findings_missing_from_baseline(tmp_path):
    root = write_tree(tmp_path / "src", {"x/k/keeper.go": KEEPER})
    path = tmp_path / "baseline.txt"
    first = analyze(root)
    write_baseline(path, [f for f in first.findings if f.rule != "cosmos/goroutine"])

    result = analyze(root, baseline=str(path), fail_on="new-only")

    assert [f.rule for f in result.actionable("new-only")] == ["cosmos/goroutine"]
    assert result.actionable("none") == []


def test_missing_baseline_raises(tmp_path):
    with pytest.raises(BaselineError):
        read_baseline(tmp_path / "absent.txt")


def test_baseline_ignores_comments_and_blank_lines(tmp_path):
    path = tmp_path / "baseline.txt"
    path.write_text("# header\n\nabc  # trailing\n  def\n")

    assert read_baseline(path) == {"abc", "def"}


# =============================================================================
# Emission
# =============================================================================

def test_text_report_lines(tmp_path):
    result = analyze(write_tree(tmp_path, {"x/k/keeper.go": KEEPER}))

    lines = emit_text(result.findings).splitlines()

    assert len(lines) == 3
    location, rule, message, digest = lines[0].split("\t")
    assert location == "x/k/keeper.go:7:2"
    assert rule == "cosmos/goroutine"
    assert len(digest) == 64


def test_sarif_document(tmp_path):
    source = KEEPER.replace("\tgo k.flush()", "\t//consensus:ignore cosmos/goroutine async\n\tgo k.flush()")
    result = analyze(write_tree(tmp_path, {"x/k/keeper.go": source}))

    document = emit_sarif(result.findings, project="minichain", version="9.9.9")

    assert document["version"] == "2.1.0"
    run = document["runs"][0]
    assert run["properties"]["project"] == "minichain"
    assert run["tool"]["driver"]["version"] == "9.9.9"
    assert [r["id"] for r in run["tool"]["driver"]["rules"]] == RULE_NAMES

    by_rule = {r["ruleId"]: r for r in run["results"]}
    panic = by_rule["cosmos/block-panic"]
    assert panic["ruleIndex"] == 0
    assert panic["locations"][0]["physicalLocation"]["artifactLocation"]["uri"] == "x/k/keeper.go"
    assert panic["properties"]["entryKinds"] == ["BeginBlock"]
    steps = panic["codeFlows"][0]["threadFlows"][0]["locations"]
    assert [s["location"]["message"]["text"].rsplit(".", 1)[-1] for s in steps] == ["BeginBlock", "check"]
    assert len(panic["partialFingerprints"]["chainlint/v1"]) == 64

    goroutine = by_rule["cosmos/goroutine"]
    assert goroutine["suppressions"] == [{"kind": "inSource", "justification": "async"}]
    assert "codeFlows" not in goroutine


def test_sarif_rendering_is_deterministic(tmp_path):
    result = analyze(write_tree(tmp_path, {"x/k/keeper.go": KEEPER}))

    first = render_sarif(emit_sarif(result.findings, "p"))
    second = render_sarif(emit_sarif(list(reversed(result.findings)), "p"))

    assert first == second
    assert first.endswith("\n")
    assert json.loads(first)["runs"][0]["results"][0]["ruleId"] == "cosmos/goroutine"


def test_sarif_document_matches_schema(tmp_path):
    source = KEEPER.replace("\tgo k.flush()", "\t//consensus:ignore cosmos/goroutine async\n\tgo k.flush()")
    result = analyze(write_tree(tmp_path, {"x/k/keeper.go": source}))
    document = json.loads(render_sarif(emit_sarif(result.findings, project="minichain")))
    assert {r["ruleId"] for r in document["runs"][0]["results"]} == {"cosmos/block-panic", "cosmos/goroutine"}

    jsonschema.validate(instance=document, schema=SARIF_SCHEMA)

    document["runs"][0]["results"][0]["locations"][0]["physicalLocation"]["region"]["startLine"] = 0
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(instance=document, schema=SARIF_SCHEMA)
