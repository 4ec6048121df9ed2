"""The eight determinism detectors.

Every detector only looks at functions inside the supplied scope (rule 1: the
functions reachable from BeginBlock/EndBlock) and never fires on expressions
whose type is Unknown.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator

from . import bech32
from .binder import PLATFORM_DEPENDENT_NAMES, SourceModel, TypeClass, TypeRef
from .callgraph import CallGraph, local_names, reachable_from, shortest_witness_path
from .config import RULE_NAMES, RuleConfig
from .scope import EntryKind, ScopeSet
from .source_model import FuncDecl, FuncId, NodeKind, Position, SourceFile, SyntaxNode, unquote

logger = logging.getLogger(__name__)

BLOCK_PANIC = "cosmos/block-panic"
MAP_ITERATION = "cosmos/map-iteration"
HARDCODED_BECH32 = "cosmos/hardcoded-bech32"
GOROUTINE = "cosmos/goroutine"
FLOAT_ARITH = "cosmos/float-arith"
SYSTEM_TIME = "cosmos/system-time"
UNSAFE_PACKAGE = "cosmos/unsafe-package"
PLATFORM_INT = "cosmos/platform-int"

RULE_DESCRIPTIONS = {
    BLOCK_PANIC: "Panic reachable from BeginBlock/EndBlock halts the chain",
    MAP_ITERATION: "Map iteration order is randomized",
    HARDCODED_BECH32: "Bech32 prefixes and addresses should not be hardcoded",
    GOROUTINE: "Goroutines and select statements schedule non-deterministically",
    FLOAT_ARITH: "Floating point results can differ between nodes",
    SYSTEM_TIME: "System clock times are not synchronized between nodes",
    UNSAFE_PACKAGE: "Randomness, reflection, unsafe and runtime packages break determinism",
    PLATFORM_INT: "int, uint and uintptr have platform-dependent sizes",
}

ARITHMETIC_OPERATORS = frozenset({"+", "-", "*", "/", "%"})
STRING_LITERALS = ("interpreted_string_literal", "raw_string_literal")


@dataclass
class RawFinding:
    """A detector hit before fingerprinting and suppression.

    `root` is the declaration the node path for the fingerprint starts at:
    the enclosing function, or the package-level declaration for findings
    outside any function.
    """

    rule: str
    message: str
    node: SyntaxNode
    file: SourceFile
    root: SyntaxNode
    anchor: str
    enclosing: FuncId | None = None
    witness_path: list[tuple[FuncId, Position]] | None = None
    entry_kinds: frozenset[str] = field(default_factory=frozenset)

    @property
    def import_path(self) -> str:
        return self.file.import_path

    @property
    def position(self) -> Position:
        return self.node.position

    def sort_key(self) -> tuple:
        position = self.node.position
        return position.file, position.line, position.column, RULE_NAMES.index(self.rule)


def _scope_functions(model: SourceModel, scope: ScopeSet) -> list[FuncDecl]:
    return [
        model.functions[func_id] for func_id in sorted(scope.members)
        if func_id in model.functions and not model.functions[func_id].is_test
    ]


def _finding(rule: str, message: str, node: SyntaxNode, model: SourceModel, decl: FuncDecl, **extra) -> RawFinding:
    return RawFinding(
        rule=rule,
        message=message,
        node=node,
        file=model.file_of(decl.id),
        root=decl.node,
        anchor=decl.anchor,
        enclosing=decl.id,
        **extra,
    )


def _type_of(node: SyntaxNode | None) -> TypeRef | None:
    if node is None or not isinstance(node.resolved_type, TypeRef):
        return None
    return node.resolved_type


def _is_class(node: SyntaxNode | None, classification: TypeClass) -> bool:
    type_ref = _type_of(node)
    return type_ref is not None and type_ref.classification is classification


def _qualified_callee(node: SyntaxNode, file: SourceFile, locals_: set[str]) -> tuple[str, str] | None:
    """(import path, member) for `alias.Member` where alias is an import."""
    if node.ts_type != "selector_expression":
        return None
    operand = node.child("operand")
    member = node.child("field")
    if operand is None or member is None or operand.ts_type != "identifier":
        return None
    if operand.text in locals_ or operand.text not in file.imports:
        return None
    return file.imports[operand.text], member.text or ""


# =============================================================================
# Rule 1: panics reachable from block entries
# =============================================================================

def detect_block_panic(
    model: SourceModel,
    graph: CallGraph,
    block_entries: dict[EntryKind, set[FuncId]],
    scope: ScopeSet | None = None,
) -> list[RawFinding]:
    """One finding per explicit panic call reachable from BeginBlock/EndBlock.

    The panic site is the deduplication key; reaching entry kinds and one
    shortest witness path are metadata.
    """
    reached_by: dict[FuncId, set[EntryKind]] = {}
    for kind, seeds in sorted(block_entries.items()):
        for func_id in reachable_from(graph, seeds):
            reached_by.setdefault(func_id, set()).add(kind)

    findings = []
    for func_id in sorted(reached_by):
        decl = model.functions.get(func_id)
        if decl is None or decl.is_test or decl.body is None:
            continue
        if scope is not None and func_id not in scope:
            continue
        panics = [node for node in decl.body.walk() if node.kind is NodeKind.PANIC_CALL]
        if not panics:
            continue

        kinds = reached_by[func_id]
        witnesses = []
        for kind in sorted(kinds):
            for entry in sorted(block_entries[kind]):
                if func_id == entry or func_id in reachable_from(graph, {entry}):
                    steps = shortest_witness_path(graph, entry, func_id)
                    witnesses.append((len(steps), entry, steps))
        _, entry, steps = min(witnesses, key=lambda item: (item[0], item[1]))
        witness = [(entry, model.functions[entry].position)] + steps
        kind_names = frozenset(str(kind) for kind in kinds)

        for node in panics:
            findings.append(_finding(
                BLOCK_PANIC,
                f"panic in {decl.anchor} is reachable from {', '.join(sorted(kind_names))} "
                f"({len(steps)} call{'s' if len(steps) != 1 else ''} from {entry.name})",
                node, model, decl,
                witness_path=witness,
                entry_kinds=kind_names,
            ))
    return findings


# =============================================================================
# Rules 2-8: scope-gated syntax detectors
# =============================================================================

def detect_map_iteration(model: SourceModel, scope: ScopeSet) -> list[RawFinding]:
    findings = []
    for decl in _scope_functions(model, scope):
        if decl.body is None:
            continue
        for node in decl.body.walk():
            if node.kind is not NodeKind.RANGE_STMT:
                continue
            clause = next((c for c in node.children if c.ts_type == "range_clause"), None)
            operand = clause.child("right") if clause is not None else None
            if _is_class(operand, TypeClass.MAP):
                findings.append(_finding(
                    MAP_ITERATION, "range over a map iterates in random order", node, model, decl,
                ))
    return findings


def _is_setter(call: SyntaxNode, setter_names: tuple[str, ...]) -> bool:
    callee = call.child("function")
    if callee is None:
        return False
    if callee.ts_type == "selector_expression":
        member = callee.child("field")
        name = member.text if member is not None else ""
    else:
        name = callee.text or ""
    return any(name == setter.rsplit(".", 1)[-1] for setter in setter_names)


def detect_hardcoded_bech32(model: SourceModel, scope: ScopeSet, config: RuleConfig) -> list[RawFinding]:
    """Valid Bech32 literals in scope, and literal prefixes passed to setters."""
    findings = []
    seen: set[int] = set()
    referenced: dict[tuple[str, str], None] = {}

    for decl in _scope_functions(model, scope):
        if decl.body is None:
            continue
        file = model.file_of(decl.id)
        locals_ = local_names(decl)
        for node in decl.body.walk():
            if node.ts_type in STRING_LITERALS:
                if id(node) in seen or not bech32.is_valid(unquote(node.text or "")):
                    continue
                seen.add(id(node))
                findings.append(_finding(
                    HARDCODED_BECH32, f"hardcoded Bech32 string {node.text}", node, model, decl,
                ))
            elif node.kind is NodeKind.CALL_EXPR and _is_setter(node, config.bech32_setter_names):
                arguments = node.child("arguments")
                for argument in arguments.named_children() if arguments is not None else []:
                    if argument.ts_type in STRING_LITERALS and id(argument) not in seen:
                        seen.add(id(argument))
                        findings.append(_finding(
                            HARDCODED_BECH32, f"hardcoded Bech32 prefix {argument.text} passed to setter",
                            argument, model, decl,
                        ))
            elif node.ts_type == "identifier" and node.text not in locals_:
                referenced.setdefault((file.import_path, node.text or ""), None)
            elif qualified := _qualified_callee(node, file, locals_):
                referenced.setdefault(qualified, None)

    for key in referenced:
        value = model.package_values.get(key)
        if value is None or not value.is_const:
            continue
        for node in value.spec.walk():
            if node.ts_type in STRING_LITERALS and id(node) not in seen and bech32.is_valid(unquote(node.text or "")):
                seen.add(id(node))
                findings.append(RawFinding(
                    rule=HARDCODED_BECH32,
                    message=f"hardcoded Bech32 string {node.text} in constant {value.name}",
                    node=node,
                    file=value.file,
                    root=value.spec,
                    anchor=value.name,
                ))
    return findings


def detect_goroutine(model: SourceModel, scope: ScopeSet) -> list[RawFinding]:
    findings = []
    for decl in _scope_functions(model, scope):
        if decl.body is None:
            continue
        for node in decl.body.walk():
            if node.kind is NodeKind.SPAWN_STMT:
                findings.append(_finding(GOROUTINE, "goroutine started in consensus code", node, model, decl))
            elif node.kind is NodeKind.SELECT_STMT:
                findings.append(_finding(GOROUTINE, "select statement in consensus code", node, model, decl))
    return findings


def _float_construct(node: SyntaxNode) -> str | None:
    """What makes node a float finding, or None."""
    if node.kind in (NodeKind.VAR_DECL, NodeKind.CONST_DECL, NodeKind.FIELD_DECL):
        type_node = node.child("type")
        if type_node is not None:
            return "declaration" if _is_class(type_node, TypeClass.FLOAT) else None
        if any(_is_class(name, TypeClass.FLOAT) for name in node.children_by_field("name")):
            return "declaration"
        return None
    if node.ts_type == "short_var_declaration":
        left = node.child("left")
        names = left.named_children() if left is not None else []
        if any(name.ts_type == "identifier" and _is_class(name, TypeClass.FLOAT) for name in names):
            return "declaration"
        return None
    if node.kind is NodeKind.CONVERSION_EXPR and _is_class(node, TypeClass.FLOAT):
        return "conversion"
    if node.kind is NodeKind.BINARY_EXPR and _is_class(node, TypeClass.FLOAT):
        operator = node.child("operator")
        if operator is not None and operator.text in ARITHMETIC_OPERATORS:
            return "arithmetic"
    return None


def _outermost(root: SyntaxNode, match: Callable[[SyntaxNode], str | None]) -> Iterator[tuple[SyntaxNode, str]]:
    """Matching nodes in pre-order, skipping those nested in an earlier match."""
    stack = [root]
    while stack:
        node = stack.pop()
        what = match(node)
        if what is not None:
            yield node, what
            continue
        stack.extend(reversed(node.children))


def detect_float(model: SourceModel, scope: ScopeSet) -> list[RawFinding]:
    """Float declarations, conversions and arithmetic in scope functions and signatures."""
    findings = []
    for decl in _scope_functions(model, scope):
        result = decl.node.child("result")
        if result is not None and result.kind is NodeKind.TYPE_SPELLING and _is_class(result, TypeClass.FLOAT):
            findings.append(_finding(FLOAT_ARITH, "float result type", result, model, decl))
        for node, what in _outermost(decl.node, _float_construct):
            findings.append(_finding(FLOAT_ARITH, f"floating point {what}", node, model, decl))
    return findings


def detect_system_time(model: SourceModel, scope: ScopeSet, config: RuleConfig) -> list[RawFinding]:
    deny = set(config.time_deny_list)
    findings = []
    for decl in _scope_functions(model, scope):
        if decl.body is None:
            continue
        file = model.file_of(decl.id)
        locals_ = local_names(decl)
        for node in decl.body.walk():
            if node.kind is not NodeKind.CALL_EXPR:
                continue
            callee = node.child("function")
            qualified = _qualified_callee(callee, file, locals_) if callee is not None else None
            if qualified is not None and f"{qualified[0]}.{qualified[1]}" in deny:
                findings.append(_finding(
                    SYSTEM_TIME, f"call to {qualified[0]}.{qualified[1]} reads the local clock", node, model, decl,
                ))
    return findings


def detect_unsafe_package(model: SourceModel, scope: ScopeSet, config: RuleConfig) -> list[RawFinding]:
    """One finding per use site of an unsafe package, in signatures and bodies."""
    unsafe = set(config.unsafe_packages)
    findings = []
    for decl in _scope_functions(model, scope):
        file = model.file_of(decl.id)
        locals_ = local_names(decl)
        for node in decl.node.walk():
            import_path = None
            if node.ts_type == "selector_expression":
                qualified = _qualified_callee(node, file, locals_)
                import_path = qualified[0] if qualified is not None else None
            elif node.ts_type == "qualified_type":
                package = node.child("package")
                import_path = file.imports.get(package.text if package is not None else "")
            if import_path in unsafe:
                findings.append(_finding(
                    UNSAFE_PACKAGE, f"use of package {import_path}", node, model, decl,
                ))
    return findings


def _platform_spellings(type_node: SyntaxNode | None) -> Iterator[SyntaxNode]:
    if type_node is None:
        return
    for node in type_node.walk():
        if node.ts_type == "type_identifier" and node.text in PLATFORM_DEPENDENT_NAMES:
            yield node


def _used_type_decls(model: SourceModel, decls: list[FuncDecl]) -> list[tuple[str, str]]:
    """In-tree named types spelled by the functions, closed over their fields."""
    pending = []
    for decl in decls:
        for node in decl.node.walk():
            type_ref = _type_of(node) if node.kind is NodeKind.TYPE_SPELLING else None
            if type_ref is not None and type_ref.named in model.type_decls:
                pending.append(type_ref.named)
    used: set[tuple[str, str]] = set()
    while pending:
        key = pending.pop()
        if key in used:
            continue
        used.add(key)
        type_decl = model.type_decls[key]
        for node in type_decl.type_node.walk():
            if node.kind is NodeKind.TYPE_SPELLING:
                named = model.classify(node, type_decl.file).named
                if named in model.type_decls and named not in used:
                    pending.append(named)
    return sorted(used)


def detect_platform_types(model: SourceModel, scope: ScopeSet) -> list[RawFinding]:
    """Explicit int/uint/uintptr spellings in declarations and conversions."""
    findings = []
    seen: set[int] = set()
    decls = _scope_functions(model, scope)

    for decl in decls:
        declared = []
        result = decl.node.child("result")
        if result is not None and result.kind is NodeKind.TYPE_SPELLING:
            declared.append(result)
        for node in decl.node.walk():
            if node.kind in (NodeKind.VAR_DECL, NodeKind.CONST_DECL, NodeKind.FIELD_DECL):
                declared.append(node.child("type"))
            elif node.kind is NodeKind.CONVERSION_EXPR:
                callee = node.child("function") or node.child("type")
                if callee is not None and callee.text in PLATFORM_DEPENDENT_NAMES:
                    findings.append(_finding(
                        PLATFORM_INT, f"conversion to platform-dependent {callee.text}", node, model, decl,
                    ))
        for type_node in declared:
            for spelling in _platform_spellings(type_node):
                if id(spelling) not in seen:
                    seen.add(id(spelling))
                    findings.append(_finding(
                        PLATFORM_INT, f"platform-dependent type {spelling.text}", spelling, model, decl,
                    ))

    for key in _used_type_decls(model, decls):
        type_decl = model.type_decls[key]
        if type_decl.file.is_test:
            continue
        place = "field of" if type_decl.is_struct else "declaration of"
        for spelling in _platform_spellings(type_decl.type_node):
            if id(spelling) not in seen:
                seen.add(id(spelling))
                findings.append(RawFinding(
                    rule=PLATFORM_INT,
                    message=f"platform-dependent type {spelling.text} in {place} {type_decl.name}",
                    node=spelling,
                    file=type_decl.file,
                    root=type_decl.spec,
                    anchor=type_decl.name,
                ))
    return findings


# =============================================================================
# Runner
# =============================================================================

def run_all(
    model: SourceModel,
    graph: CallGraph,
    scope: ScopeSet,
    block_entries: dict[EntryKind, set[FuncId]],
    config: RuleConfig,
) -> list[RawFinding]:
    """Run every enabled detector.

    Returns:
        Findings sorted by (file, line, column, rule)
    """
    detectors: dict[str, Callable[[], list[RawFinding]]] = {
        BLOCK_PANIC: lambda: detect_block_panic(model, graph, block_entries, scope),
        MAP_ITERATION: lambda: detect_map_iteration(model, scope),
        HARDCODED_BECH32: lambda: detect_hardcoded_bech32(model, scope, config),
        GOROUTINE: lambda: detect_goroutine(model, scope),
        FLOAT_ARITH: lambda: detect_float(model, scope),
        SYSTEM_TIME: lambda: detect_system_time(model, scope, config),
        UNSAFE_PACKAGE: lambda: detect_unsafe_package(model, scope, config),
        PLATFORM_INT: lambda: detect_platform_types(model, scope),
    }

    findings = []
    for rule in RULE_NAMES:
        if rule not in config.enabled:
            continue
        found = detectors[rule]()
        logger.info(f"  {rule}: {len(found)}")
        findings.extend(found)
    return sorted(findings, key=RawFinding.sort_key)
