"""Tests for the eight determinism detectors."""

import textwrap
from collections import Counter

import pytest

from src.config import RULE_NAMES, RuleConfig
from src.rules import (
    BLOCK_PANIC,
    GOROUTINE,
    detect_block_panic,
    detect_float,
    detect_goroutine,
    detect_hardcoded_bech32,
    detect_map_iteration,
    detect_platform_types,
    detect_system_time,
    detect_unsafe_package,
    run_all,
)
from src.scope import all_functions_scope, block_entries

from .go_corpus import VALID_BECH32, corpus_files

KEEPER_PATH = "x/bank/keeper/keeper.go"


def keeper_files(body: str, decls: str = "", imports: tuple[str, ...] = ()) -> dict[str, str]:
    """A keeper package whose BeginBlock runs `body`; `decls` follow at top level."""
    source = (
        "package keeper\n\n"
        + "".join(f"import {spec}\n" for spec in imports)
        + "\ntype Keeper struct{}\n\n"
        + "func (k Keeper) BeginBlock() {\n"
        + textwrap.indent(textwrap.dedent(body).strip("\n"), "\t") + "\n}\n\n"
        + textwrap.dedent(decls).strip("\n") + "\n"
    )
    return {KEEPER_PATH: source}


def line_of(files: dict[str, str], snippet: str, path: str = KEEPER_PATH) -> int:
    for number, line in enumerate(files[path].splitlines(), start=1):
        if snippet in line:
            return number
    raise AssertionError(f"{snippet!r} not in {path}")


def lines(findings) -> list[int]:
    return sorted(f.position.line for f in findings)


# =============================================================================
# cosmos/block-panic
# =============================================================================

PANIC_CHAIN = """
package keeper

type Keeper struct{}

func (k Keeper) BeginBlock() { k.a() }
func (k Keeper) EndBlock()   { k.c() }

func (k Keeper) a() { k.b() }
func (k Keeper) b() { k.c() }
func (k Keeper) c() {
	panic("invariant broken")
}
"""


def test_panic_reached_from_both_block_entries_is_reported_once(scoped):
    result = scoped({KEEPER_PATH: PANIC_CHAIN})

    (finding,) = detect_block_panic(result.model, result.graph, block_entries(result.entries))

    assert finding.position.line == 11
    assert finding.entry_kinds == frozenset({"BeginBlock", "EndBlock"})
    assert [step.name for step, _ in finding.witness_path] == ["EndBlock", "c"]


def test_witness_path_walks_the_helpers(scoped):
    result = scoped({KEEPER_PATH: PANIC_CHAIN}, {"entry.methods": "BeginBlock"})

    (finding,) = detect_block_panic(result.model, result.graph, block_entries(result.entries))

    assert finding.entry_kinds == frozenset({"BeginBlock"})
    assert [step.name for step, _ in finding.witness_path] == ["BeginBlock", "a", "b", "c"]
    assert [position.line for _, position in finding.witness_path[1:]] == [5, 8, 9]


DIAMOND = """package keeper

type Keeper struct{}

func (k Keeper) BeginBlock() {
	k.gamma()
	k.beta()
	k.alpha()
}

func (k Keeper) alpha() { k.helper() }
func (k Keeper) beta()  { k.sink() }
func (k Keeper) gamma() { k.sink() }

func (k Keeper) helper() { k.sink() }

func (k Keeper) sink() {
	panic("invariant broken")
}
"""


def test_diamond_reports_one_panic_with_the_shortest_smallest_path(scoped):
    files = {KEEPER_PATH: DIAMOND}
    result = scoped(files)

    (finding,) = detect_block_panic(result.model, result.graph, block_entries(result.entries))

    assert finding.position.line == line_of(files, "panic(")
    assert finding.entry_kinds == frozenset({"BeginBlock"})
    assert [step.name for step, _ in finding.witness_path] == ["BeginBlock", "beta", "sink"]
    assert [position.line for _, position in finding.witness_path[1:]] == [
        line_of(files, "k.beta()"),
        line_of(files, "func (k Keeper) beta()"),
    ]


def test_panic_in_entry_itself(scoped):
    files = keeper_files('panic("halt")')
    result = scoped(files)

    (finding,) = detect_block_panic(result.model, result.graph, block_entries(result.entries))

    assert finding.position.line == line_of(files, "panic")
    assert len(finding.witness_path) == 1


def test_panic_only_in_message_handler_is_not_reported(scoped):
    result = scoped({
        KEEPER_PATH: """
            package keeper

            type Keeper struct{}

            func (k Keeper) BeginBlock() {}

            type MsgServer interface {
                Send()
            }

            type msgServer struct{ Keeper }

            func (m msgServer) Send() {
                panic("bad message")
            }
        """,
    })

    assert result.entries
    assert detect_block_panic(result.model, result.graph, block_entries(result.entries)) == []


def test_panic_behind_function_value_is_not_reported(scoped):
    files = keeper_files("run(boom)", decls="""
        func run(callback func()) {
            callback()
        }

        func boom() {
            panic("hidden")
        }
    """)
    result = scoped(files)

    assert detect_block_panic(result.model, result.graph, block_entries(result.entries)) == []
    assert len(result.graph.coverage()) == 1


def test_panic_in_test_file_is_not_reported(scoped):
    files = keeper_files("")
    files["x/bank/keeper/keeper_test.go"] = 'package keeper\n\nfunc (k Keeper) EndBlock() { panic("t") }\n'
    result = scoped(files)

    assert detect_block_panic(result.model, result.graph, block_entries(result.entries)) == []


# =============================================================================
# cosmos/map-iteration
# =============================================================================

def test_map_iteration(scoped):
    files = keeper_files("""
        balances := map[string]int64{}
        for addr := range balances {
            _ = addr
        }
        keys := []string{"a", "b"}
        for _, key := range keys {
            _ = key
        }
        var held Holdings
        for denom, amount := range held {
            _, _ = denom, amount
        }
        for _, item := range oracle.Load() {
            _ = item
        }
    """, decls="type Holdings map[string]uint64", imports=('"example.com/ext/oracle"',))
    result = scoped(files)

    findings = detect_map_iteration(result.model, result.scope)

    assert lines(findings) == [line_of(files, "range balances"), line_of(files, "range held")]


# =============================================================================
# cosmos/hardcoded-bech32
# =============================================================================

def test_bech32_literal_setter_and_constant(scoped):
    files = keeper_files(f"""
        owner := "{VALID_BECH32}"
        _ = owner
        broken := "{VALID_BECH32[:-1]}q"
        _ = broken
        cfg := sdk.GetConfig()
        cfg.SetBech32PrefixForAccount("cosmos", "cosmospub")
        _ = FeeAddress
        _ = Mutable
    """, decls=f"""
        const FeeAddress = "{VALID_BECH32}"

        var Mutable = "{VALID_BECH32}"
    """, imports=('sdk "github.com/cosmos/cosmos-sdk/types"',))
    result = scoped(files)

    findings = detect_hardcoded_bech32(result.model, result.scope, RuleConfig())

    assert lines(findings) == sorted([
        line_of(files, "owner :="),
        line_of(files, "SetBech32PrefixForAccount"),
        line_of(files, "SetBech32PrefixForAccount"),
        line_of(files, "const FeeAddress"),
    ])
    constant = next(f for f in findings if f.enclosing is None)
    assert constant.anchor == "FeeAddress"


def test_valid_literal_passed_to_setter_is_reported_once(scoped):
    files = keeper_files(f'cfg.SetBech32PrefixForValidator("{VALID_BECH32}")', decls="""
        type config struct{}

        func (config) SetBech32PrefixForValidator(prefix string) {}

        var cfg config
    """)
    result = scoped(files)

    findings = detect_hardcoded_bech32(result.model, result.scope, RuleConfig())

    assert len(findings) == 1


# =============================================================================
# cosmos/goroutine
# =============================================================================

def test_goroutines_and_select(scoped):
    files = keeper_files("""
        done := make(chan struct{})
        go k.worker(done)
        select {
        case <-done:
        default:
        }
    """, decls="""
        func (k Keeper) worker(done chan struct{}) {
            close(done)
        }

        func (k Keeper) unreachable() {
            go k.worker(nil)
        }
    """)
    result = scoped(files)

    findings = detect_goroutine(result.model, result.scope)

    assert lines(findings) == [line_of(files, "go k.worker(done)"), line_of(files, "select {")]
    assert {f.rule for f in findings} == {GOROUTINE}


# =============================================================================
# cosmos/float-arith
# =============================================================================

def test_float_constructs(scoped):
    files = keeper_files("""
        var ratio float64
        n := int64(3)
        scaled := float64(n)
        _ = ratio * 1.5
        _ = ratio > 1
        total := n + 1
        _, _ = scaled, total
        _ = k.price()
        _ = oracle.Ratio() * 2
    """, decls="""
        func (k Keeper) price() float64 {
            return 1
        }
    """, imports=('"example.com/ext/oracle"',))
    result = scoped(files)

    findings = detect_float(result.model, result.scope)

    assert lines(findings) == sorted([
        line_of(files, "var ratio float64"),
        line_of(files, "scaled := float64(n)"),
        line_of(files, "_ = ratio * 1.5"),
        line_of(files, "price() float64"),
    ])


def test_nested_float_arithmetic_is_one_finding(scoped):
    files = keeper_files("""
        var a float64 = 1.5
        _ = (a + 2) * a / 3
    """)
    result = scoped(files)

    findings = detect_float(result.model, result.scope)

    assert lines(findings) == [line_of(files, "var a float64"), line_of(files, "(a + 2) * a / 3")]


def test_inferred_float_declarations(scoped):
    files = keeper_files("""
        ratio := 0.5
        var scale = 1.5
        p := k.price()
        fee := scale * 2
        count := 3
        _, _, _, _, _ = ratio, scale, p, fee, count
    """, decls="""
        func (k Keeper) price() float64 {
            return 1
        }
    """)
    result = scoped(files)

    findings = detect_float(result.model, result.scope)

    assert lines(findings) == sorted([
        line_of(files, "ratio := 0.5"),
        line_of(files, "var scale = 1.5"),
        line_of(files, "p := k.price()"),
        line_of(files, "fee := scale * 2"),
        line_of(files, "price() float64"),
    ])
    assert {f.message for f in findings} == {"floating point declaration", "float result type"}


# =============================================================================
# cosmos/system-time
# =============================================================================

def test_system_time(scoped):
    files = keeper_files("""
        _ = clock.Now()
        start := clock.Unix(0, 0)
        _ = clock.Since(start)
        _ = clock.Duration(5)
        _ = ctx.BlockTime()
    """, decls="""
        type blockContext struct{}

        func (blockContext) BlockTime() int64 { return 0 }

        var ctx blockContext
    """, imports=('clock "time"',))
    result = scoped(files)

    findings = detect_system_time(result.model, result.scope, RuleConfig())

    assert lines(findings) == [line_of(files, "clock.Now()"), line_of(files, "clock.Since(start)")]


def test_local_named_like_the_time_package_is_ignored(scoped):
    files = keeper_files("""
        time := fakeClock{}
        _ = time.Now()
    """, decls="""
        type fakeClock struct{}

        func (fakeClock) Now() int64 { return 0 }
    """, imports=('"time"',))
    result = scoped(files)

    assert detect_system_time(result.model, result.scope, RuleConfig()) == []


# =============================================================================
# cosmos/unsafe-package
# =============================================================================

def test_unsafe_packages(scoped):
    files = keeper_files("""
        _ = rand.Intn(3)
        _, _ = crand.Read(nil)
        k.inspect(nil)
    """, decls="""
        func (k Keeper) inspect(v reflect.Value) {
            _ = unsafe.Sizeof(v)
        }
    """, imports=('"math/rand"', 'crand "crypto/rand"', '"reflect"', '"unsafe"'))
    result = scoped(files)

    findings = detect_unsafe_package(result.model, result.scope, RuleConfig())

    assert lines(findings) == sorted([
        line_of(files, "rand.Intn"),
        line_of(files, "reflect.Value"),
        line_of(files, "unsafe.Sizeof"),
    ])


def test_unsafe_package_list_is_configurable(scoped):
    files = keeper_files("_ = rand.Intn(3)", imports=('"math/rand"',))
    result = scoped(files)

    assert detect_unsafe_package(result.model, result.scope, RuleConfig(unsafe_packages=("reflect",))) == []


# =============================================================================
# cosmos/platform-int
# =============================================================================

def test_platform_dependent_types(scoped):
    files = keeper_files("""
        var count int
        var height int64
        size := len("abc")
        _ = uint(size)
        var params Params
        _, _, _ = count, height, params
        _ = k.width()
    """, decls="""
        type Params struct {
            MaxValidators uint32
            Window        int
        }

        type Unused struct {
            Slots uintptr
        }

        func (k Keeper) width() int {
            return 0
        }
    """)
    result = scoped(files)

    findings = detect_platform_types(result.model, result.scope)

    assert lines(findings) == sorted([
        line_of(files, "var count int"),
        line_of(files, "uint(size)"),
        line_of(files, "Window        int"),
        line_of(files, "width() int"),
    ])
    field = next(f for f in findings if f.enclosing is None)
    assert field.anchor == "Params"


def test_platform_dependent_named_types(scoped):
    files = keeper_files("""
        var c Count
        var h Hook
        _, _ = c, h
    """, decls="""
        type Count int

        type Hook func(n uint) bool

        type Spare uintptr
    """)
    result = scoped(files)

    findings = detect_platform_types(result.model, result.scope)

    assert lines(findings) == sorted([
        line_of(files, "type Count int"),
        line_of(files, "type Hook func(n uint) bool"),
    ])
    assert sorted((f.anchor, f.message) for f in findings) == [
        ("Count", "platform-dependent type int in declaration of Count"),
        ("Hook", "platform-dependent type uint in declaration of Hook"),
    ]


# =============================================================================
# Runner
# =============================================================================

def test_run_all_one_violation_per_rule(scoped):
    result = scoped(corpus_files(["bank"]))

    findings = run_all(result.model, result.graph, result.scope, block_entries(result.entries), RuleConfig())

    assert Counter(f.rule for f in findings) == Counter(RULE_NAMES)
    keys = [f.sort_key() for f in findings]
    assert keys == sorted(keys)


def test_run_all_respects_enabled_rules(scoped):
    result = scoped(corpus_files(["bank"]))
    config = RuleConfig(enabled=frozenset({GOROUTINE, BLOCK_PANIC}))

    findings = run_all(result.model, result.graph, result.scope, block_entries(result.entries), config)

    assert {f.rule for f in findings} == {GOROUTINE, BLOCK_PANIC}


@pytest.mark.parametrize("mode", ["whitelist", "blacklist"])
def test_unknown_types_stay_silent(scoped, mode):
    files = keeper_files("""
        for _, v := range oracle.Table() {
            _ = v
        }
        _ = oracle.Ratio() * oracle.Ratio()
    """, imports=('"example.com/ext/oracle"',))
    result = scoped(files, {"mode": mode})

    findings = run_all(result.model, result.graph, result.scope, block_entries(result.entries), RuleConfig())

    assert findings == []


def test_scoped_findings_are_unscoped_findings_restricted_to_scope(scoped):
    result = scoped(corpus_files(["bank", "staking"]))
    config = RuleConfig(enabled=frozenset(RULE_NAMES) - {BLOCK_PANIC})
    entries = block_entries(result.entries)

    def keyed(findings):
        return {(f.rule, str(f.position), f.enclosing) for f in findings if f.enclosing is not None}

    scoped_findings = keyed(run_all(result.model, result.graph, result.scope, entries, config))
    everywhere = keyed(run_all(result.model, result.graph, all_functions_scope(result.model), entries, config))

    assert scoped_findings == {key for key in everywhere if key[2] in result.scope.members}
    assert len(everywhere) > len(scoped_findings)
