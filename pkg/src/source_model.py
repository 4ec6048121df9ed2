"""Go source tree parsing into a position-annotated syntax model."""

import fnmatch
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path, PurePosixPath
from typing import Iterator

import tree_sitter_go as tsgo
from tree_sitter import Language, Node, Parser

from .config import DEFAULT_EXCLUDE, DEFAULT_INCLUDE, DEFAULT_WORKERS

logger = logging.getLogger(__name__)

GO_LANG = Language(tsgo.language())

TEST_FILE_SUFFIX = "_test.go"


class SourceTreeError(Exception):
    """Exception raised when a source tree cannot be analyzed."""
    pass


class RootNotFoundError(SourceTreeError):
    """The analysis root does not exist or is not a directory."""
    pass


class EmptyTreeError(SourceTreeError):
    """No parseable Go file was found under the analysis root."""
    pass


# =============================================================================
# Syntax Model
# =============================================================================

class NodeKind(Enum):
    CALL_EXPR = "CallExpr"
    RANGE_STMT = "RangeStmt"
    SPAWN_STMT = "SpawnStmt"
    SELECT_STMT = "SelectStmt"
    DEFER_STMT = "DeferStmt"
    PANIC_CALL = "PanicCall"
    BASIC_LITERAL = "BasicLiteral"
    BINARY_EXPR = "BinaryExpr"
    SELECTOR_EXPR = "SelectorExpr"
    TYPE_SPELLING = "TypeSpelling"
    VAR_DECL = "VarDecl"
    CONST_DECL = "ConstDecl"
    FIELD_DECL = "FieldDecl"
    CONVERSION_EXPR = "ConversionExpr"
    IMPORT_DECL = "ImportDecl"
    OTHER = "other"


# Built-in type names; a call whose callee is one of these is a conversion.
BUILTIN_TYPES = frozenset({
    "bool", "byte", "rune", "string", "error", "any",
    "int", "int8", "int16", "int32", "int64",
    "uint", "uint8", "uint16", "uint32", "uint64", "uintptr",
    "float32", "float64", "complex64", "complex128",
})

LITERAL_TYPES = frozenset({
    "int_literal", "float_literal", "imaginary_literal", "rune_literal",
    "interpreted_string_literal", "raw_string_literal",
})

TYPE_NODE_TYPES = frozenset({
    "type_identifier", "qualified_type", "pointer_type", "map_type",
    "slice_type", "array_type", "implicit_length_array_type", "channel_type",
    "function_type", "struct_type", "interface_type", "generic_type",
    "parenthesized_type", "negated_type",
})

# Nodes whose source text is kept on the model node.
TEXT_NODE_TYPES = frozenset({
    "identifier", "field_identifier", "type_identifier", "package_identifier",
    "blank_identifier", "comment", "true", "false", "nil", "iota",
}) | LITERAL_TYPES


@dataclass(frozen=True, order=True)
class Position:
    file: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(eq=False, slots=True)
class SyntaxNode:
    """One node of the syntax model.

    `ts_type` keeps the grammar's node type so detectors can be precise;
    `kind` is the fixed construct vocabulary. `resolved_type` is filled once
    by the binder and never changed afterwards.
    """

    kind: NodeKind
    ts_type: str
    field: str | None
    start_byte: int
    end_byte: int
    position: Position
    text: str | None = None
    is_named: bool = True
    children: tuple["SyntaxNode", ...] = ()
    resolved_type: object | None = None

    def child(self, field_name: str) -> "SyntaxNode | None":
        for node in self.children:
            if node.field == field_name:
                return node
        return None

    def children_by_field(self, field_name: str) -> list["SyntaxNode"]:
        return [node for node in self.children if node.field == field_name]

    def named_children(self) -> list["SyntaxNode"]:
        return [node for node in self.children if node.is_named]

    def walk(self) -> Iterator["SyntaxNode"]:
        """Pre-order traversal including self."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def find(self, *ts_types: str) -> Iterator["SyntaxNode"]:
        wanted = set(ts_types)
        return (node for node in self.walk() if node.ts_type in wanted)


@dataclass(frozen=True, order=True)
class FuncId:
    """Identity of a function declaration.

    Field order is the tie-break order used by witness paths.
    """

    import_path: str
    name: str
    file: str
    offset: int
    receiver: str = ""

    @property
    def qualified_name(self) -> str:
        if self.receiver:
            return f"{self.import_path}.({self.receiver}).{self.name}"
        return f"{self.import_path}.{self.name}"

    def __str__(self) -> str:
        return self.qualified_name


@dataclass(slots=True)
class Param:
    name: str
    type_node: SyntaxNode | None
    type_ref: object | None = None


@dataclass(slots=True)
class FuncDecl:
    id: FuncId
    name: str
    receiver_type: str | None
    receiver_name: str | None
    params: list[Param]
    results: list[Param]
    body: SyntaxNode | None
    node: SyntaxNode
    position: Position
    is_test: bool

    @property
    def anchor(self) -> str:
        """Receiver-qualified name used for location-independent identity."""
        return f"{self.receiver_type}.{self.name}" if self.receiver_type else self.name


@dataclass(slots=True)
class SourceFile:
    path: str
    package_name: str
    import_path: str
    imports: dict[str, str]
    root: SyntaxNode
    source: bytes
    is_test: bool

    @property
    def lines(self) -> list[str]:
        return self.source.decode("utf-8", errors="replace").splitlines()


@dataclass(slots=True)
class Package:
    import_path: str
    name: str
    files: list[SourceFile]
    is_test: bool


@dataclass(frozen=True, order=True)
class ParseDiagnostic:
    file: str
    line: int
    message: str

    def __str__(self) -> str:
        return f"{self.file}:{self.line}: {self.message}"


@dataclass
class SourceTree:
    root: Path
    module_path: str
    packages: list[Package]
    diagnostics: list[ParseDiagnostic] = field(default_factory=list)

    def files(self) -> Iterator[SourceFile]:
        for package in self.packages:
            yield from package.files

    def package(self, import_path: str) -> Package | None:
        for package in self.packages:
            if package.import_path == import_path:
                return package
        return None


# =============================================================================
# Tree-sitter conversion
# =============================================================================

def _is_conversion_callee(node: Node) -> bool:
    callee = node.child_by_field_name("function")
    if callee is None:
        return False
    if callee.type == "identifier":
        return callee.text.decode("utf-8") in BUILTIN_TYPES
    if callee.type == "parenthesized_expression":
        inner = callee.named_children[0] if callee.named_children else None
        return inner is not None and inner.type in TYPE_NODE_TYPES
    return callee.type in TYPE_NODE_TYPES


def _classify(node: Node) -> NodeKind:
    ts_type = node.type
    if ts_type == "call_expression":
        callee = node.child_by_field_name("function")
        if callee is not None and callee.type == "identifier" and callee.text == b"panic":
            return NodeKind.PANIC_CALL
        if _is_conversion_callee(node):
            return NodeKind.CONVERSION_EXPR
        return NodeKind.CALL_EXPR
    if ts_type == "type_conversion_expression":
        return NodeKind.CONVERSION_EXPR
    if ts_type == "for_statement":
        if any(child.type == "range_clause" for child in node.named_children):
            return NodeKind.RANGE_STMT
        return NodeKind.OTHER
    if ts_type in LITERAL_TYPES:
        return NodeKind.BASIC_LITERAL
    if ts_type in TYPE_NODE_TYPES:
        return NodeKind.TYPE_SPELLING
    return {
        "go_statement": NodeKind.SPAWN_STMT,
        "select_statement": NodeKind.SELECT_STMT,
        "defer_statement": NodeKind.DEFER_STMT,
        "binary_expression": NodeKind.BINARY_EXPR,
        "selector_expression": NodeKind.SELECTOR_EXPR,
        "var_spec": NodeKind.VAR_DECL,
        "parameter_declaration": NodeKind.VAR_DECL,
        "variadic_parameter_declaration": NodeKind.VAR_DECL,
        "const_spec": NodeKind.CONST_DECL,
        "field_declaration": NodeKind.FIELD_DECL,
        "import_spec": NodeKind.IMPORT_DECL,
    }.get(ts_type, NodeKind.OTHER)


def _syntax_node(node: Node, file_path: str, field_name: str | None, children: list[SyntaxNode]) -> SyntaxNode:
    text = None
    if node.type in TEXT_NODE_TYPES or node.child_count == 0:
        text = node.text.decode("utf-8", errors="replace") if node.text is not None else ""

    return SyntaxNode(
        kind=_classify(node),
        ts_type=node.type,
        field=field_name,
        start_byte=node.start_byte,
        end_byte=node.end_byte,
        position=Position(file_path, node.start_point[0] + 1, node.start_point[1] + 1),
        text=text,
        is_named=node.is_named,
        children=tuple(children),
    )


def _convert(root: Node, file_path: str) -> SyntaxNode:
    """Convert a tree-sitter tree with an explicit stack.

    Nodes are listed in pre-order, then built in reverse so every child
    exists before its parent.
    """
    order: list[tuple[Node, str | None, int]] = []
    stack: list[tuple[Node, str | None, int]] = [(root, None, -1)]
    while stack:
        node, field_name, parent = stack.pop()
        index = len(order)
        order.append((node, field_name, parent))
        kept = []
        for position, child in enumerate(node.children):
            child_field = node.field_name_for_child(position)
            if not child.is_named and child_field is None:
                continue
            kept.append((child, child_field, index))
        stack.extend(reversed(kept))

    children: list[list[SyntaxNode]] = [[] for _ in order]
    converted = None
    for index in range(len(order) - 1, -1, -1):
        node, field_name, parent = order[index]
        # siblings arrive last-first
        syntax = _syntax_node(node, file_path, field_name, children[index][::-1])
        if parent < 0:
            converted = syntax
        else:
            children[parent].append(syntax)
    return converted


def unquote(literal: str) -> str:
    """Strip Go string literal quotes (escape sequences are left as written)."""
    if len(literal) >= 2 and literal[0] == literal[-1] and literal[0] in "\"`":
        return literal[1:-1]
    return literal


def default_import_alias(import_path: str) -> str:
    """Package name Go assumes for an import path without an explicit alias."""
    segments = import_path.split("/")
    last = segments[-1]
    if re.fullmatch(r"v\d+", last) and len(segments) > 1:
        last = segments[-2]
    last = last.split(".")[0]
    return last.replace("-", "_")


def _first_error_line(node: Node) -> int:
    stack = [node]
    while stack:
        current = stack.pop()
        if current.type == "ERROR" or current.is_missing:
            return current.start_point[0] + 1
        stack.extend(reversed([child for child in current.children if child.has_error or child.is_missing]))
    return node.start_point[0] + 1


def _read_imports(root: SyntaxNode) -> list[tuple[str | None, str]]:
    imports = []
    for spec in root.find("import_spec"):
        path_node = spec.child("path")
        if path_node is None or path_node.text is None:
            continue
        alias_node = spec.child("name")
        alias = alias_node.text if alias_node is not None else None
        imports.append((alias, unquote(path_node.text)))
    return imports


def _package_name(root: SyntaxNode) -> str | None:
    for clause in root.find("package_clause"):
        for child in clause.children:
            if child.ts_type == "package_identifier":
                return child.text
    return None


def _parse_file(root: Path, rel_path: str) -> tuple[str, SyntaxNode | None, bytes, ParseDiagnostic | None]:
    try:
        source = (root / rel_path).read_bytes()
    except OSError as e:
        return rel_path, None, b"", ParseDiagnostic(rel_path, 0, f"unreadable: {e}")

    parser = Parser(GO_LANG)
    tree = parser.parse(source)
    if tree.root_node.has_error:
        line = _first_error_line(tree.root_node)
        return rel_path, None, source, ParseDiagnostic(rel_path, line, "syntax error")

    return rel_path, _convert(tree.root_node, rel_path), source, None


def _read_module_path(root: Path) -> str:
    go_mod = root / "go.mod"
    if go_mod.is_file():
        match = re.search(r"^module\s+(\S+)", go_mod.read_text(encoding="utf-8", errors="replace"), re.MULTILINE)
        if match:
            return unquote(match.group(1))
    return root.resolve().name


def _matches(rel_path: str, patterns: list[str]) -> bool:
    return any(fnmatch.fnmatchcase(rel_path, pattern) for pattern in patterns)


def discover_files(root: Path, include: list[str], exclude: list[str]) -> list[str]:
    """List root-relative POSIX paths of Go files selected by the globs."""
    selected = []
    for path in root.rglob("*.go"):
        if not path.is_file():
            continue
        rel_path = path.relative_to(root).as_posix()
        if any(part.startswith(".") for part in PurePosixPath(rel_path).parts[:-1]):
            continue
        if _matches(rel_path, include) and not _matches(rel_path, exclude):
            selected.append(rel_path)
    return sorted(selected)


def parse_tree(
    root: Path,
    include: list[str] | None = None,
    exclude: list[str] | None = None,
    workers: int = DEFAULT_WORKERS,
) -> SourceTree:
    """Parse every selected Go file under root.

    Args:
        root: Analysis root directory
        include: fnmatch globs selecting files (root-relative POSIX paths)
        exclude: fnmatch globs removing files again
        workers: Parser threads

    Returns:
        SourceTree with files grouped into packages; syntax errors become
        diagnostics

    Raises:
        RootNotFoundError: If root is missing
        EmptyTreeError: If no file parses
    """
    root = Path(root)
    if not root.is_dir():
        raise RootNotFoundError(f"Analysis root does not exist: {root}")

    include = DEFAULT_INCLUDE if include is None else include
    exclude = DEFAULT_EXCLUDE if exclude is None else exclude
    rel_paths = discover_files(root, include, exclude)
    logger.info(f"Parsing {len(rel_paths)} Go files under {root}")

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parsed = list(pool.map(lambda rel: _parse_file(root, rel), rel_paths))

    module_path = _read_module_path(root)
    diagnostics: list[ParseDiagnostic] = []
    grouped: dict[str, list[SourceFile]] = {}
    names: dict[str, str] = {}

    for rel_path, syntax_root, source, diagnostic in sorted(parsed, key=lambda item: item[0]):
        if diagnostic is not None:
            logger.warning(f"Skipping {diagnostic}")
            diagnostics.append(diagnostic)
            continue

        package_name = _package_name(syntax_root) or "main"
        directory = PurePosixPath(rel_path).parent.as_posix()
        import_path = module_path if directory == "." else f"{module_path}/{directory}"
        if package_name.endswith("_test"):
            import_path = f"{import_path}_test"

        file = SourceFile(
            path=rel_path,
            package_name=package_name,
            import_path=import_path,
            imports={},
            root=syntax_root,
            source=source,
            is_test=rel_path.endswith(TEST_FILE_SUFFIX),
        )
        grouped.setdefault(import_path, []).append(file)
        names.setdefault(import_path, package_name)

    if not grouped:
        raise EmptyTreeError(f"No parseable Go files under {root}")

    packages = [
        Package(
            import_path=import_path,
            name=names[import_path],
            files=files,
            is_test=import_path.endswith("_test") or all(f.is_test for f in files),
        )
        for import_path, files in sorted(grouped.items())
    ]

    # Import aliases need every package name, so they are resolved last.
    package_names = {package.import_path: package.name for package in packages}
    for package in packages:
        for file in package.files:
            for alias, path in _read_imports(file.root):
                if alias in ("_", "."):
                    continue
                file.imports[alias or package_names.get(path, default_import_alias(path))] = path

    logger.info(f"Parsed {sum(len(p.files) for p in packages)} files in {len(packages)} packages "
                f"({len(diagnostics)} diagnostics)")
    return SourceTree(root=root, module_path=module_path, packages=packages, diagnostics=diagnostics)


def iter_function_nodes(file: SourceFile) -> Iterator[SyntaxNode]:
    for node in file.root.children:
        if node.ts_type in ("function_declaration", "method_declaration"):
            yield node


def _param_list(node: SyntaxNode | None) -> list[Param]:
    if node is None:
        return []
    if node.ts_type != "parameter_list":
        # single unnamed result type
        return [Param(name="", type_node=node)]
    params = []
    for decl in node.children:
        if decl.ts_type not in ("parameter_declaration", "variadic_parameter_declaration"):
            continue
        type_node = decl.child("type")
        names = decl.children_by_field("name")
        if not names:
            params.append(Param(name="", type_node=type_node))
        for name in names:
            params.append(Param(name=name.text or "", type_node=type_node))
    return params


def receiver_type_name(receiver: SyntaxNode | None) -> tuple[str | None, str | None]:
    """(type name, receiver variable) of a method receiver list."""
    if receiver is None:
        return None, None
    for decl in receiver.children:
        if decl.ts_type != "parameter_declaration":
            continue
        type_node = decl.child("type")
        name_node = decl.child("name")
        while type_node is not None and type_node.ts_type in ("pointer_type", "generic_type", "parenthesized_type"):
            inner = type_node.child("type") if type_node.ts_type == "generic_type" else None
            type_node = inner or next(iter(type_node.named_children()), None)
        if type_node is not None and type_node.ts_type == "type_identifier":
            return type_node.text, name_node.text if name_node is not None else None
    return None, None


def collect_functions(tree: SourceTree) -> dict[FuncId, FuncDecl]:
    """Index every function and method declaration of the tree by FuncId."""
    functions: dict[FuncId, FuncDecl] = {}
    for file in tree.files():
        for node in iter_function_nodes(file):
            name_node = node.child("name")
            if name_node is None:
                continue
            receiver_type, receiver_name = (None, None)
            if node.ts_type == "method_declaration":
                receiver_type, receiver_name = receiver_type_name(node.child("receiver"))
            func_id = FuncId(
                import_path=file.import_path,
                name=name_node.text or "",
                file=file.path,
                offset=node.start_byte,
                receiver=receiver_type or "",
            )
            functions[func_id] = FuncDecl(
                id=func_id,
                name=func_id.name,
                receiver_type=receiver_type,
                receiver_name=receiver_name,
                params=_param_list(node.child("parameters")),
                results=_param_list(node.child("result")),
                body=node.child("body"),
                node=node,
                position=node.position,
                is_test=file.is_test,
            )
    return dict(sorted(functions.items()))
