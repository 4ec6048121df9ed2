"""Consensus-critical scope: whitelist via entry-point reachability, or legacy blacklist."""

import logging
from dataclasses import dataclass, field
from enum import Enum

from .binder import SourceModel
from .callgraph import CallGraph, reachable_from
from .config import EntryPointSpec
from .source_model import FuncId

logger = logging.getLogger(__name__)

BEGIN_BLOCK = "BeginBlock"
END_BLOCK = "EndBlock"
DELIVER_TX = "DeliverTx"
BLOCK_KINDS = (BEGIN_BLOCK, END_BLOCK)


class ScopeMode(Enum):
    WHITELIST = "whitelist"
    BLACKLIST = "blacklist"


@dataclass(frozen=True, order=True)
class EntryKind:
    """BeginBlock, EndBlock, DeliverTx or Extra(name)."""

    name: str
    extra: bool = False

    def __str__(self) -> str:
        return f"Extra({self.name})" if self.extra else self.name


@dataclass
class ScopeSet:
    members: set[FuncId] = field(default_factory=set)
    provenance: dict[FuncId, set[EntryKind]] = field(default_factory=dict)
    mode: ScopeMode = ScopeMode.WHITELIST

    def __contains__(self, func_id: FuncId) -> bool:
        return func_id in self.members

    def __len__(self) -> int:
        return len(self.members)

    def kinds(self, func_id: FuncId) -> set[EntryKind]:
        return self.provenance.get(func_id, set())


def _method_matches(name: str, arity: int, patterns: tuple[tuple[str, int | None], ...]) -> str | None:
    """The pattern a method matches, by exact name or `*Suffix`."""
    for pattern, wanted_arity in patterns:
        if wanted_arity is not None and wanted_arity != arity:
            continue
        if pattern.startswith("*"):
            if name.endswith(pattern[1:]):
                return pattern
        elif name == pattern:
            return pattern
    return None


def find_entry_points(model: SourceModel, spec: EntryPointSpec) -> dict[EntryKind, set[FuncId]]:
    """Locate ABCI entry points.

    BeginBlock/EndBlock (or whatever `spec.method_names` lists) are methods
    matched by name. DeliverTx is approximated by the methods declared on in-tree
    types satisfying an interface whose name carries a server suffix.
    Extra names match methods or functions.

    Returns:
        Entry kind -> FuncIds; every configured kind is present, possibly empty
    """
    entries: dict[EntryKind, set[FuncId]] = {}
    for pattern, _ in spec.method_names:
        entries[EntryKind(pattern.lstrip("*"))] = set()
    entries[EntryKind(DELIVER_TX)] = set()
    for name in spec.extra_entry_names:
        entries[EntryKind(name, extra=True)] = set()

    candidates = [decl for decl in model.functions.values() if not decl.is_test]

    for decl in candidates:
        if decl.receiver_type:
            pattern = _method_matches(decl.name, len(decl.params), spec.method_names)
            if pattern is not None:
                entries[EntryKind(pattern.lstrip("*"))].add(decl.id)
        if decl.name in spec.extra_entry_names:
            entries[EntryKind(decl.name, extra=True)].add(decl.id)

    servers = sorted(
        key for key, type_decl in model.type_decls.items()
        if type_decl.is_interface and any(key[1].endswith(s) for s in spec.server_interface_suffixes)
    )
    deliver = entries[EntryKind(DELIVER_TX)]
    for server in servers:
        for implementer in model.implementers(*server):
            # declared methods only; promoted ones belong to the embedded type
            for decls in model.methods.get(implementer, {}).values():
                deliver.update(d.id for d in decls if not d.is_test)

    for kind, members in sorted(entries.items()):
        logger.info(f"Entry points {kind}: {len(members)}")
    return entries


def block_entries(entries: dict[EntryKind, set[FuncId]]) -> dict[EntryKind, set[FuncId]]:
    """The BeginBlock/EndBlock subset rule 1 starts from."""
    return {kind: ids for kind, ids in entries.items() if not kind.extra and kind.name in BLOCK_KINDS}


def compute_scope(graph: CallGraph, entries: dict[EntryKind, set[FuncId]]) -> ScopeSet:
    """Union of the closures of every entry kind, with provenance."""
    scope = ScopeSet(mode=ScopeMode.WHITELIST)
    for kind, seeds in sorted(entries.items()):
        for func_id in reachable_from(graph, seeds):
            scope.members.add(func_id)
            scope.provenance.setdefault(func_id, set()).add(kind)
    logger.info(f"Whitelist scope: {len(scope.members)} of {len(graph.nodes)} functions")
    return scope


def legacy_blacklist_scope(model: SourceModel, blacklist_patterns: list[str]) -> ScopeSet:
    """Every non-test function whose import path contains no blacklisted substring."""
    members = {
        func_id for func_id, decl in model.functions.items()
        if not decl.is_test and not any(pattern in func_id.import_path for pattern in blacklist_patterns)
    }
    logger.info(f"Blacklist scope: {len(members)} of {len(model.functions)} functions")
    return ScopeSet(members=members, provenance={}, mode=ScopeMode.BLACKLIST)


def all_functions_scope(model: SourceModel) -> ScopeSet:
    return ScopeSet(members=set(model.functions), mode=ScopeMode.BLACKLIST)


def scope_listing(scope: ScopeSet) -> list[str]:
    """`importPath<TAB>func<TAB>entryKinds` lines, sorted."""
    lines = []
    for func_id in scope.members:
        name = f"{func_id.receiver}.{func_id.name}" if func_id.receiver else func_id.name
        kinds = ",".join(sorted(str(kind) for kind in scope.kinds(func_id)))
        lines.append(f"{func_id.import_path}\t{name}\t{kinds}")
    return sorted(lines)


def graph_listing(graph: CallGraph) -> list[str]:
    return sorted(edge.listing() for edge in graph.edges)
