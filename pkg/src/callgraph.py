"""Static call graph over function declarations, with reachability and witness paths."""

import logging
from dataclasses import dataclass, field
from enum import Enum

import networkx as nx

from .binder import SourceModel, TypeRef
from .source_model import FuncDecl, FuncId, NodeKind, Position, SourceFile, SyntaxNode

logger = logging.getLogger(__name__)


class CallGraphError(Exception):
    """Exception raised for invalid call graph queries."""
    pass


class Resolution(Enum):
    DIRECT = "Direct"
    INTERFACE_DISPATCH = "InterfaceDispatch"
    UNRESOLVED = "Unresolved"


# Callee of every unresolved edge; never a graph node.
UNRESOLVED_CALLEE = FuncId(import_path="", name="<unresolved>", file="", offset=-1)


@dataclass(frozen=True, order=True)
class CallEdge:
    caller: FuncId
    callee: FuncId
    site: Position
    resolution: Resolution = field(compare=False)

    def listing(self) -> str:
        callee = self.callee.name if self.callee == UNRESOLVED_CALLEE else str(self.callee)
        return f"{self.caller}\t{callee}\t{self.site.file}:{self.site.line}\t{self.resolution.value}"


class CallGraph:
    """Call graph with resolved edges in a networkx DiGraph.

    Each graph edge keeps the sorted call-site positions it was built from.
    Unresolved edges are kept aside and never take part in reachability.
    """

    def __init__(self, nodes: set[FuncId] | None = None):
        self.graph = nx.DiGraph()
        self.graph.add_nodes_from(sorted(nodes or ()))
        self._edges: set[CallEdge] = set()

    @property
    def nodes(self) -> set[FuncId]:
        return set(self.graph.nodes)

    @property
    def edges(self) -> list[CallEdge]:
        return sorted(self._edges, key=lambda e: (e.caller, e.callee, e.site, e.resolution.value))

    def add_edge(self, edge: CallEdge) -> None:
        if edge.caller not in self.graph:
            raise CallGraphError(f"Caller is not a graph node: {edge.caller}")
        if edge.resolution is Resolution.UNRESOLVED:
            self._edges.add(edge)
            return
        if edge.callee not in self.graph:
            raise CallGraphError(f"Callee is not a graph node: {edge.callee}")
        self._edges.add(edge)
        if self.graph.has_edge(edge.caller, edge.callee):
            sites = self.graph.edges[edge.caller, edge.callee]["sites"]
            if edge.site not in sites:
                sites.append(edge.site)
                sites.sort()
        else:
            self.graph.add_edge(edge.caller, edge.callee, sites=[edge.site])

    def coverage(self) -> list[CallEdge]:
        """Unresolved call sites, sorted."""
        return [edge for edge in self.edges if edge.resolution is Resolution.UNRESOLVED]

    @classmethod
    def from_edges(cls, nodes: set[FuncId], edges: list[CallEdge]) -> "CallGraph":
        graph = cls(nodes)
        for edge in edges:
            graph.add_edge(edge)
        return graph


def reachable_from(graph: CallGraph, seeds: set[FuncId]) -> set[FuncId]:
    """Transitive closure over resolved edges, seeds included.

    Raises:
        CallGraphError: If a seed is not a graph node
    """
    for seed in sorted(seeds):
        if seed not in graph.graph:
            raise CallGraphError(f"Seed is not a graph node: {seed}")
    reached = set(seeds)
    for seed in seeds:
        reached |= nx.descendants(graph.graph, seed)
    return reached


def shortest_witness_path(graph: CallGraph, source: FuncId, target: FuncId) -> list[tuple[FuncId, Position]]:
    """Minimum-edge path from source to target as (callee, call site) steps.

    Among equally short paths the walk always takes the smallest next callee
    (import path, name, file, offset), and the earliest site for that edge.

    Raises:
        CallGraphError: If either endpoint is missing or target is unreachable
    """
    for func_id in (source, target):
        if func_id not in graph.graph:
            raise CallGraphError(f"Function is not a graph node: {func_id}")
    if source == target:
        return []

    distance = nx.single_source_shortest_path_length(graph.graph.reverse(copy=False), target)
    if source not in distance:
        raise CallGraphError(f"{target} is not reachable from {source}")

    path = []
    current = source
    while current != target:
        step = distance[current] - 1
        following = min(
            callee for callee in graph.graph.successors(current)
            if distance.get(callee) == step
        )
        path.append((following, graph.graph.edges[current, following]["sites"][0]))
        current = following
    return path


# =============================================================================
# Construction
# =============================================================================

def local_names(decl: FuncDecl) -> set[str]:
    names = {param.name for param in decl.params + decl.results if param.name}
    if decl.receiver_name:
        names.add(decl.receiver_name)
    if decl.body is None:
        return names
    for node in decl.body.walk():
        if node.ts_type in ("var_spec", "const_spec"):
            names.update(n.text for n in node.children_by_field("name") if n.text)
        elif node.ts_type in ("short_var_declaration", "range_clause"):
            left = node.child("left")
            if left is not None:
                names.update(n.text for n in left.named_children() if n.ts_type == "identifier" and n.text)
        elif node.ts_type in ("parameter_declaration", "variadic_parameter_declaration"):
            names.update(n.text for n in node.children_by_field("name") if n.text)
    return names


class _Resolver:
    """Resolves the call sites of one function."""

    def __init__(self, model: SourceModel, decl: FuncDecl, file: SourceFile):
        self.model = model
        self.decl = decl
        self.file = file
        self.locals = local_names(decl)
        self.aliases = self._function_aliases()

    def _function_target(self, node: SyntaxNode | None) -> list[FuncDecl]:
        """In-tree functions a plain function-reference expression names."""
        if node is None:
            return []
        if node.ts_type == "identifier" and node.text not in self.locals:
            return self._package_funcs(self.file.import_path, node.text or "")
        if node.ts_type == "selector_expression":
            operand = node.child("operand")
            field_node = node.child("field")
            if (operand is not None and operand.ts_type == "identifier"
                    and operand.text not in self.locals and operand.text in self.file.imports):
                return self._package_funcs(self.file.imports[operand.text], field_node.text if field_node else "")
        return []

    def _function_aliases(self) -> dict[str, list[FuncDecl]]:
        """Locals assigned exactly once, from a function reference."""
        if self.decl.body is None:
            return {}
        assignments: dict[str, list[SyntaxNode | None]] = {}
        for node in self.decl.body.walk():
            if node.ts_type in ("short_var_declaration", "assignment_statement", "var_spec"):
                if node.ts_type == "var_spec":
                    targets = node.children_by_field("name")
                    values_node = node.child("value")
                else:
                    left = node.child("left")
                    targets = left.named_children() if left is not None else []
                    values_node = node.child("right")
                values = values_node.named_children() if values_node is not None else []
                for index, target in enumerate(targets):
                    if target.ts_type != "identifier" or not target.text:
                        continue
                    value = values[index] if len(values) == len(targets) else None
                    assignments.setdefault(target.text, []).append(value)
        aliases = {}
        for name, values in assignments.items():
            if len(values) == 1:
                targets = self._function_target(values[0])
                if targets:
                    aliases[name] = targets
        return aliases

    def _package_funcs(self, import_path: str, name: str) -> list[FuncDecl]:
        return [d for d in self.model.package_funcs.get((import_path, name), []) if not d.is_test]

    def resolve(self, call: SyntaxNode) -> tuple[Resolution, list[FuncDecl]] | None:
        """Resolution and targets of a call site; None for leaf calls."""
        callee = call.child("function")
        if callee is None:
            return None

        if callee.ts_type == "identifier":
            name = callee.text or ""
            if name in self.locals:
                if name in self.aliases:
                    return Resolution.DIRECT, self.aliases[name]
                return Resolution.UNRESOLVED, []
            targets = self._package_funcs(self.file.import_path, name)
            return (Resolution.DIRECT, targets) if targets else None

        if callee.ts_type == "selector_expression":
            return self._resolve_selector(callee)

        # immediately invoked literals are walked as part of this body
        if callee.ts_type == "func_literal":
            return None
        return Resolution.UNRESOLVED, []

    def _resolve_selector(self, callee: SyntaxNode) -> tuple[Resolution, list[FuncDecl]] | None:
        model = self.model
        operand = callee.child("operand")
        field_node = callee.child("field")
        method = field_node.text if field_node is not None else ""

        if (operand is not None and operand.ts_type == "identifier"
                and operand.text not in self.locals and operand.text in self.file.imports):
            import_path = self.file.imports[operand.text]
            if not model.has_package(import_path):
                return None
            targets = self._package_funcs(import_path, method)
            return (Resolution.DIRECT, targets) if targets else None

        base = operand.resolved_type if operand is not None else None
        if not isinstance(base, TypeRef) or base.is_unknown:
            return Resolution.UNRESOLVED, []
        if base.named is None:
            return None

        targets = model.lookup_method(*base.named, method)
        if targets:
            return Resolution.DIRECT, targets

        if model.interface_methods(*base.named) is not None:
            dispatched: dict[FuncId, FuncDecl] = {}
            for implementer in model.implementers(*base.named):
                for target in model.lookup_method(*implementer, method):
                    dispatched[target.id] = target
            if not dispatched:
                return None
            return Resolution.INTERFACE_DISPATCH, [dispatched[key] for key in sorted(dispatched)]

        if model.field_type(base, method) is not None:
            return Resolution.UNRESOLVED, []
        return None


def build_call_graph(model: SourceModel) -> CallGraph:
    """Build the call graph of a bound source model.

    Args:
        model: Bound source model

    Returns:
        CallGraph with one node per function declaration
    """
    graph = CallGraph(set(model.functions))
    for decl in model.functions.values():
        if decl.body is None:
            continue
        resolver = _Resolver(model, decl, model.file_of(decl.id))
        for node in decl.body.walk():
            if node.kind is not NodeKind.CALL_EXPR:
                continue
            resolved = resolver.resolve(node)
            if resolved is None:
                continue
            resolution, targets = resolved
            if resolution is Resolution.UNRESOLVED:
                graph.add_edge(CallEdge(decl.id, UNRESOLVED_CALLEE, node.position, resolution))
                continue
            for target in targets:
                graph.add_edge(CallEdge(decl.id, target.id, node.position, resolution))

    unresolved = len(graph.coverage())
    logger.info(f"Call graph: {graph.graph.number_of_nodes()} functions, "
                f"{graph.graph.number_of_edges()} resolved edges, {unresolved} unresolved call sites")
    return graph
