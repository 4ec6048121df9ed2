"""Lightweight, intra-tree, flow-insensitive type binding.

Resolution uses declared types, literal forms, built-in constructors and the
type declarations found in the analyzed tree. Anything else is Unknown, and
detectors stay silent on Unknown.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

from .source_model import (
    BUILTIN_TYPES,
    FuncDecl,
    FuncId,
    NodeKind,
    SourceFile,
    SourceTree,
    SyntaxNode,
    collect_functions,
)

logger = logging.getLogger(__name__)

PLATFORM_DEPENDENT_NAMES = frozenset({"int", "uint", "uintptr"})
FLOAT_NAMES = frozenset({"float32", "float64", "complex64", "complex128"})

COMPARISON_OPERATORS = frozenset({"==", "!=", "<", "<=", ">", ">=", "&&", "||"})


class TypeClass(Enum):
    MAP = "MapType"
    FLOAT = "FloatType"
    PLATFORM_DEPENDENT = "PlatformDependent"
    NAMED = "NamedType"
    STRING = "StringType"
    UNKNOWN = "Unknown"
    OTHER = "other"


@dataclass(frozen=True)
class TypeRef:
    """Classification of a type or expression.

    `import_path`/`name` identify a named type when there is one, even if the
    classification comes from its underlying type (a named map is MAP).
    `value` is the map value or slice/array element type.
    """

    classification: TypeClass
    name: str = ""
    import_path: str = ""
    key: "TypeRef | None" = None
    value: "TypeRef | None" = None

    @property
    def is_unknown(self) -> bool:
        return self.classification is TypeClass.UNKNOWN

    @property
    def named(self) -> tuple[str, str] | None:
        if self.import_path and self.name:
            return self.import_path, self.name
        return None


UNKNOWN = TypeRef(TypeClass.UNKNOWN)
BOOL = TypeRef(TypeClass.OTHER, name="bool")
INT = TypeRef(TypeClass.PLATFORM_DEPENDENT, name="int")
FUNC = TypeRef(TypeClass.OTHER, name="func")


def builtin_type(name: str) -> TypeRef:
    if name in PLATFORM_DEPENDENT_NAMES:
        return TypeRef(TypeClass.PLATFORM_DEPENDENT, name=name)
    if name in FLOAT_NAMES:
        return TypeRef(TypeClass.FLOAT, name=name)
    if name == "string":
        return TypeRef(TypeClass.STRING, name=name)
    return TypeRef(TypeClass.OTHER, name=name)


@dataclass
class TypeDecl:
    import_path: str
    name: str
    file: SourceFile
    type_node: SyntaxNode
    spec: SyntaxNode
    is_alias: bool = False

    @property
    def is_interface(self) -> bool:
        return self.type_node.ts_type == "interface_type"

    @property
    def is_struct(self) -> bool:
        return self.type_node.ts_type == "struct_type"

    def field_declarations(self) -> list[SyntaxNode]:
        if not self.is_struct:
            return []
        return [
            field_decl
            for body in self.type_node.children if body.ts_type == "field_declaration_list"
            for field_decl in body.children if field_decl.ts_type == "field_declaration"
        ]


@dataclass
class PackageValue:
    """A package-level var or const."""

    import_path: str
    name: str
    file: SourceFile
    spec: SyntaxNode
    is_const: bool
    type_ref: TypeRef = UNKNOWN


@dataclass
class SourceModel:
    """Parsed and bound source tree plus the indexes detectors query."""

    tree: SourceTree
    functions: dict[FuncId, FuncDecl]
    type_decls: dict[tuple[str, str], TypeDecl] = field(default_factory=dict)
    package_values: dict[tuple[str, str], PackageValue] = field(default_factory=dict)
    methods: dict[tuple[str, str], dict[str, list[FuncDecl]]] = field(default_factory=dict)
    package_funcs: dict[tuple[str, str], list[FuncDecl]] = field(default_factory=dict)
    files_by_path: dict[str, SourceFile] = field(default_factory=dict)
    _implementers: dict[tuple[str, str], list[tuple[str, str]]] = field(default_factory=dict, repr=False)

    def file_of(self, func_id: FuncId) -> SourceFile:
        return self.files_by_path[func_id.file]

    def has_package(self, import_path: str) -> bool:
        return self.tree.package(import_path) is not None

    # -------------------------------------------------------------------------
    # Type classification
    # -------------------------------------------------------------------------

    def classify(self, node: SyntaxNode | None, file: SourceFile, seen: frozenset = frozenset()) -> TypeRef:
        """Classify a type spelling in the context of the file it occurs in."""
        if node is None:
            return UNKNOWN
        ts_type = node.ts_type

        if ts_type == "type_identifier":
            name = node.text or ""
            if name in BUILTIN_TYPES:
                return builtin_type(name)
            return self.named_type(file.import_path, name, seen)
        if ts_type == "qualified_type":
            package = node.child("package")
            name = node.child("name")
            import_path = file.imports.get(package.text if package is not None else "")
            if import_path is None or name is None:
                return UNKNOWN
            return self.named_type(import_path, name.text or "", seen)
        if ts_type == "map_type":
            return TypeRef(
                TypeClass.MAP,
                key=self.classify(node.child("key"), file, seen),
                value=self.classify(node.child("value"), file, seen),
            )
        if ts_type in ("slice_type", "array_type", "implicit_length_array_type"):
            return TypeRef(TypeClass.OTHER, name="slice", value=self.classify(node.child("element"), file, seen))
        if ts_type == "pointer_type":
            inner = self.classify(next(iter(node.named_children()), None), file, seen)
            return pointer_to(inner)
        if ts_type == "parenthesized_type":
            return self.classify(next(iter(node.named_children()), None), file, seen)
        if ts_type == "generic_type":
            return self.classify(node.child("type"), file, seen)
        if ts_type == "function_type":
            return FUNC
        if ts_type in ("channel_type", "struct_type", "interface_type", "negated_type"):
            return TypeRef(TypeClass.OTHER, name=ts_type)
        return UNKNOWN

    def named_type(self, import_path: str, name: str, seen: frozenset = frozenset()) -> TypeRef:
        key = (import_path, name)
        decl = self.type_decls.get(key)
        if decl is None or key in seen:
            return TypeRef(TypeClass.NAMED, name=name, import_path=import_path)
        underlying = self.classify(decl.type_node, decl.file, seen | {key})
        if decl.is_alias:
            return underlying
        if underlying.classification in (TypeClass.MAP, TypeClass.FLOAT, TypeClass.STRING):
            return replace(underlying, name=name, import_path=import_path)
        return TypeRef(TypeClass.NAMED, name=name, import_path=import_path)

    # -------------------------------------------------------------------------
    # Method sets and fields
    # -------------------------------------------------------------------------

    def _embedded_types(self, decl: TypeDecl) -> list[TypeRef]:
        embedded = []
        for field_decl in decl.field_declarations():
            if field_decl.child("name") is None:
                embedded.append(self.classify(field_decl.child("type"), decl.file))
        return embedded

    def field_type(self, base: TypeRef, field_name: str, seen: frozenset = frozenset()) -> TypeRef | None:
        """Type of `base.field_name` when base is an in-tree struct type."""
        if base.named is None or base.named in seen:
            return None
        decl = self.type_decls.get(base.named)
        if decl is None or not decl.is_struct:
            return None
        for field_decl in decl.field_declarations():
            type_node = field_decl.child("type")
            names = [n.text for n in field_decl.children_by_field("name")]
            if field_name in names:
                return self.classify(type_node, decl.file)
            if not names:
                embedded = self.classify(type_node, decl.file)
                if embedded.name == field_name:
                    return embedded
        for embedded in self._embedded_types(decl):
            found = self.field_type(embedded, field_name, seen | {base.named})
            if found is not None:
                return found
        return None

    def lookup_method(
        self, import_path: str, type_name: str, method: str, seen: frozenset = frozenset()
    ) -> list[FuncDecl]:
        """Declarations of `method` on a named type, following embedded fields."""
        key = (import_path, type_name)
        if key in seen:
            return []
        declared = self.methods.get(key, {}).get(method)
        if declared:
            return [decl for decl in declared if not decl.is_test]
        decl = self.type_decls.get(key)
        if decl is None or not decl.is_struct:
            return []
        for embedded in self._embedded_types(decl):
            if embedded.named is None:
                continue
            found = self.lookup_method(*embedded.named, method, seen | {key})
            if found:
                return found
        return []

    def method_names(self, import_path: str, type_name: str, seen: frozenset = frozenset()) -> set[str]:
        key = (import_path, type_name)
        if key in seen:
            return set()
        names = {name for name, decls in self.methods.get(key, {}).items() if any(not d.is_test for d in decls)}
        decl = self.type_decls.get(key)
        if decl is not None and decl.is_struct:
            for embedded in self._embedded_types(decl):
                if embedded.named is not None:
                    names |= self.method_names(*embedded.named, seen | {key})
        return names

    def interface_methods(self, import_path: str, name: str, seen: frozenset = frozenset()) -> set[str] | None:
        """Method names of an in-tree interface, or None if it is not one."""
        key = (import_path, name)
        decl = self.type_decls.get(key)
        if decl is None or not decl.is_interface or key in seen:
            return None
        names: set[str] = set()
        for element in decl.type_node.named_children():
            if element.ts_type in ("method_elem", "method_spec"):
                name_node = element.child("name")
                if name_node is not None and name_node.text:
                    names.add(name_node.text)
            elif element.ts_type in ("type_elem", "constraint_elem", "interface_type_name",
                                     "type_identifier", "qualified_type"):
                spelling = element if element.kind is NodeKind.TYPE_SPELLING else next(
                    iter(element.named_children()), None)
                embedded = self.classify(spelling, decl.file)
                if embedded.named is not None:
                    names |= self.interface_methods(*embedded.named, seen | {key}) or set()
        return names

    def implementers(self, import_path: str, interface_name: str) -> list[tuple[str, str]]:
        """In-tree named types whose method set satisfies the interface.

        Satisfaction is by method name. Empty interfaces have no implementers
        here so that `any` parameters do not fan out to every type.
        """
        cache_key = (import_path, interface_name)
        if cache_key not in self._implementers:
            required = self.interface_methods(import_path, interface_name)
            self._implementers[cache_key] = sorted(
                key for key, decl in self.type_decls.items()
                if required and not decl.is_interface and required <= self.method_names(*key)
            )
        return self._implementers[cache_key]


def pointer_to(inner: TypeRef) -> TypeRef:
    """Pointers keep the pointee's name for method and field lookup only."""
    if inner.classification is TypeClass.NAMED:
        return inner
    return TypeRef(TypeClass.OTHER, name=inner.name, import_path=inner.import_path)


# =============================================================================
# Expression typing
# =============================================================================

class _Scope:
    """Flow-insensitive local environment of one function."""

    def __init__(self, model: SourceModel, file: SourceFile):
        self.model = model
        self.file = file
        self.env: dict[str, TypeRef] = {}
        self._memo: dict[int, TypeRef] = {}

    def declare(self, name: str | None, type_ref: TypeRef) -> None:
        if not name or name == "_":
            return
        previous = self.env.get(name)
        if previous is not None and previous != type_ref:
            self.env[name] = UNKNOWN
        else:
            self.env[name] = type_ref

    def reset_memo(self) -> None:
        self._memo.clear()

    def is_import_alias(self, name: str | None) -> bool:
        return bool(name) and name not in self.env and name in self.file.imports

    # -------------------------------------------------------------------------

    def type_of(self, node: SyntaxNode | None) -> TypeRef:
        """Type of an expression, memoized per node.

        Nested sub-expressions are typed innermost first, so deep operator
        chains never recurse more than one level.
        """
        if node is None:
            return UNKNOWN
        cached = self._memo.get(id(node))
        if cached is not None:
            return cached
        for pending in reversed(self._untyped_subexpressions(node)):
            self._memo[id(pending)] = self._type_of(pending)
        return self._memo[id(node)]

    def _untyped_subexpressions(self, root: SyntaxNode) -> list[SyntaxNode]:
        """Pre-order list of root and its not yet typed expression descendants."""
        order = []
        stack = [root]
        while stack:
            node = stack.pop()
            if id(node) in self._memo:
                continue
            order.append(node)
            if node.ts_type in _NESTED_EXPRESSION_TYPES:
                stack.extend(node.children)
        return order

    def _type_of(self, node: SyntaxNode) -> TypeRef:
        model = self.model
        ts_type = node.ts_type

        if ts_type == "identifier":
            name = node.text or ""
            if name in self.env:
                return self.env[name]
            value = model.package_values.get((self.file.import_path, name))
            if value is not None:
                return value.type_ref
            if (self.file.import_path, name) in model.package_funcs:
                return FUNC
            return UNKNOWN
        if ts_type in ("true", "false"):
            return BOOL
        if ts_type == "int_literal":
            return TypeRef(TypeClass.OTHER, name="untyped int")
        if ts_type == "float_literal":
            return TypeRef(TypeClass.FLOAT, name="untyped float")
        if ts_type == "imaginary_literal":
            return TypeRef(TypeClass.FLOAT, name="untyped complex")
        if ts_type == "rune_literal":
            return TypeRef(TypeClass.OTHER, name="rune")
        if ts_type in ("interpreted_string_literal", "raw_string_literal"):
            return TypeRef(TypeClass.STRING, name="string")
        if ts_type == "parenthesized_expression":
            return self.type_of(next(iter(node.named_children()), None))
        if ts_type in ("call_expression", "type_conversion_expression"):
            results = self.call_results(node)
            return results[0] if len(results) == 1 else UNKNOWN
        if ts_type == "composite_literal":
            return model.classify(node.child("type"), self.file)
        if ts_type == "type_assertion_expression":
            return model.classify(node.child("type"), self.file)
        if ts_type == "func_literal":
            return FUNC
        if ts_type == "selector_expression":
            return self._selector_type(node)
        if ts_type == "index_expression":
            base = self.type_of(node.child("operand"))
            if base.classification is TypeClass.MAP:
                return base.value or UNKNOWN
            if base.classification is TypeClass.STRING:
                return TypeRef(TypeClass.OTHER, name="byte")
            if base.name == "slice" and base.value is not None:
                return base.value
            return UNKNOWN
        if ts_type == "slice_expression":
            return self.type_of(node.child("operand"))
        if ts_type == "unary_expression":
            operator = node.child("operator")
            operand = self.type_of(node.child("operand"))
            op = operator.text if operator is not None else ""
            if op == "&":
                return pointer_to(operand) if not operand.is_unknown else UNKNOWN
            if op == "!":
                return BOOL
            if op in ("-", "+", "^"):
                return operand
            if op == "*" and operand.named is not None:
                return model.named_type(*operand.named)
            return UNKNOWN
        if ts_type == "binary_expression":
            return self._binary_type(node)
        return UNKNOWN

    def _binary_type(self, node: SyntaxNode) -> TypeRef:
        operator = node.child("operator")
        op = operator.text if operator is not None else ""
        if op in COMPARISON_OPERATORS:
            return BOOL
        left = self.type_of(node.child("left"))
        right = self.type_of(node.child("right"))
        if op in ("<<", ">>"):
            return left
        if left.is_unknown or right.is_unknown:
            return UNKNOWN
        for wanted in (TypeClass.FLOAT, TypeClass.STRING):
            if left.classification is wanted and not left.name.startswith("untyped"):
                return left
            if right.classification is wanted and not right.name.startswith("untyped"):
                return right
            if wanted in (left.classification, right.classification):
                return left if left.classification is wanted else right
        return right if left.name.startswith("untyped") else left

    def _selector_type(self, node: SyntaxNode) -> TypeRef:
        operand = node.child("operand")
        field_node = node.child("field")
        field_name = field_node.text if field_node is not None else ""
        if operand is not None and operand.ts_type == "identifier" and self.is_import_alias(operand.text):
            import_path = self.file.imports[operand.text]
            value = self.model.package_values.get((import_path, field_name))
            if value is not None:
                return value.type_ref
            if (import_path, field_name) in self.model.package_funcs:
                return FUNC
            return UNKNOWN
        base = self.type_of(operand)
        found = self.model.field_type(base, field_name)
        if found is not None:
            return found
        if base.named is not None and self.model.lookup_method(*base.named, field_name):
            return FUNC
        return UNKNOWN

    def call_results(self, node: SyntaxNode) -> list[TypeRef]:
        """Result types of a call; a single UNKNOWN when unresolvable."""
        model = self.model
        if node.ts_type == "type_conversion_expression":
            return [model.classify(node.child("type"), self.file)]

        callee = node.child("function")
        arguments = node.child("arguments")
        args = arguments.named_children() if arguments is not None else []

        if node.kind is NodeKind.CONVERSION_EXPR and callee is not None:
            if callee.ts_type == "identifier":
                return [builtin_type(callee.text or "")]
            if callee.ts_type == "parenthesized_expression":
                return [model.classify(next(iter(callee.named_children()), None), self.file)]
            return [model.classify(callee, self.file)]

        if callee is None:
            return [UNKNOWN]

        if callee.ts_type == "identifier":
            name = callee.text or ""
            if name not in self.env:
                builtin = self._builtin_results(name, args)
                if builtin is not None:
                    return builtin
            if name in self.env:
                return [UNKNOWN]
            if (self.file.import_path, name) in model.type_decls:
                return [model.named_type(self.file.import_path, name)]
            decls = model.package_funcs.get((self.file.import_path, name))
            return _results_of(decls)

        if callee.ts_type == "selector_expression":
            operand = callee.child("operand")
            field_node = callee.child("field")
            method = field_node.text if field_node is not None else ""
            if operand is not None and operand.ts_type == "identifier" and self.is_import_alias(operand.text):
                import_path = self.file.imports[operand.text]
                if (import_path, method) in model.type_decls:
                    return [model.named_type(import_path, method)]
                return _results_of(model.package_funcs.get((import_path, method)))
            base = self.type_of(operand)
            if base.named is not None:
                return _results_of(model.lookup_method(*base.named, method))
        return [UNKNOWN]

    def type_argument(self, node: SyntaxNode | None) -> TypeRef:
        """A type passed where an expression is parsed, as in `new(Keeper)`."""
        if node is None:
            return UNKNOWN
        if node.ts_type == "identifier":
            name = node.text or ""
            if name in BUILTIN_TYPES:
                return builtin_type(name)
            return self.model.named_type(self.file.import_path, name)
        if node.ts_type == "selector_expression":
            operand = node.child("operand")
            member = node.child("field")
            if operand is not None and member is not None and self.is_import_alias(operand.text):
                return self.model.named_type(self.file.imports[operand.text], member.text or "")
            return UNKNOWN
        return self.model.classify(node, self.file)

    def _builtin_results(self, name: str, args: list[SyntaxNode]) -> list[TypeRef] | None:
        first = args[0] if args else None
        if name == "make":
            return [self.type_argument(first)]
        if name == "new":
            return [pointer_to(self.type_argument(first))]
        if name in ("len", "cap", "copy"):
            return [INT]
        if name in ("append", "min", "max"):
            return [self.type_of(first)]
        if name in ("real", "imag", "complex"):
            return [TypeRef(TypeClass.FLOAT, name=name)]
        if name in ("panic", "print", "println", "delete", "close", "clear"):
            return []
        if name == "recover":
            return [UNKNOWN]
        return None

    def multi_types(self, node: SyntaxNode, count: int) -> list[TypeRef]:
        """Types bound by `a, b := expr` style single-expression assignments."""
        if node.ts_type in ("call_expression", "type_conversion_expression"):
            results = self.call_results(node)
        elif node.ts_type == "index_expression":
            results = [self.type_of(node), BOOL]
        elif node.ts_type == "type_assertion_expression":
            results = [self.type_of(node), BOOL]
        else:
            results = [self.type_of(node)]
        return (results + [UNKNOWN] * count)[:count] if len(results) >= 1 else [UNKNOWN] * count

    def bind_assignment(self, names: list[str | None], values: list[SyntaxNode]) -> None:
        if len(values) == len(names):
            for name, value in zip(names, values):
                self.declare(name, self.type_of(value))
        elif len(values) == 1:
            for name, type_ref in zip(names, self.multi_types(values[0], len(names))):
                self.declare(name, type_ref)
        else:
            for name in names:
                self.declare(name, UNKNOWN)

    def bind_range(self, clause: SyntaxNode) -> None:
        left = clause.child("left")
        if left is None:
            return
        names = [n.text if n.ts_type == "identifier" else None for n in left.named_children()]
        operand = self.type_of(clause.child("right"))
        if operand.classification is TypeClass.MAP:
            bound = [operand.key or UNKNOWN, operand.value or UNKNOWN]
        elif operand.name == "slice":
            bound = [INT, operand.value or UNKNOWN]
        elif operand.classification is TypeClass.STRING:
            bound = [INT, TypeRef(TypeClass.OTHER, name="rune")]
        else:
            bound = [UNKNOWN, UNKNOWN]
        for name, type_ref in zip(names, bound):
            self.declare(name, type_ref)

    def bind_declarations(self, root: SyntaxNode) -> None:
        """Collect local declarations in source order."""
        for node in root.walk():
            ts_type = node.ts_type
            if ts_type in ("var_spec", "const_spec"):
                names = [n.text for n in node.children_by_field("name")]
                type_node = node.child("type")
                if type_node is not None:
                    type_ref = self.model.classify(type_node, self.file)
                    for name in names:
                        self.declare(name, type_ref)
                else:
                    value = node.child("value")
                    self.bind_assignment(names, value.named_children() if value is not None else [])
            elif ts_type == "short_var_declaration":
                left = node.child("left")
                right = node.child("right")
                names = [n.text if n.ts_type == "identifier" else None
                         for n in (left.named_children() if left is not None else [])]
                self.bind_assignment(names, right.named_children() if right is not None else [])
            elif ts_type == "range_clause":
                self.bind_range(node)
            elif ts_type == "func_literal":
                for param in _literal_params(node):
                    self.declare(param[0], self.model.classify(param[1], self.file))

    def annotate(self, root: SyntaxNode) -> None:
        for node in root.walk():
            if node.kind is NodeKind.TYPE_SPELLING:
                node.resolved_type = self.model.classify(node, self.file)
            elif node.is_named and node.field != "operator":
                type_ref = self.type_of(node)
                if not type_ref.is_unknown or node.ts_type in _EXPRESSION_TYPES:
                    node.resolved_type = type_ref


_EXPRESSION_TYPES = frozenset({
    "identifier", "call_expression", "selector_expression", "binary_expression",
    "unary_expression", "index_expression", "composite_literal",
    "parenthesized_expression", "type_assertion_expression",
    "type_conversion_expression", "slice_expression",
})

# expressions whose type is computed from their children
_NESTED_EXPRESSION_TYPES = frozenset({
    "binary_expression", "unary_expression", "parenthesized_expression",
    "selector_expression", "index_expression", "slice_expression",
    "call_expression", "argument_list",
})


def _literal_params(node: SyntaxNode) -> list[tuple[str, SyntaxNode | None]]:
    params = node.child("parameters")
    found = []
    for decl in params.named_children() if params is not None else []:
        for name in decl.children_by_field("name"):
            found.append((name.text, decl.child("type")))
    return found


def _results_of(decls: list[FuncDecl] | None) -> list[TypeRef]:
    if not decls:
        return [UNKNOWN]
    return [param.type_ref or UNKNOWN for param in decls[0].results]


# =============================================================================
# Binding entry point
# =============================================================================

def _index_declarations(model: SourceModel) -> None:
    for file in model.tree.files():
        model.files_by_path[file.path] = file
        for top in file.root.children:
            if top.ts_type == "type_declaration":
                for spec in top.named_children():
                    name = spec.child("name")
                    type_node = spec.child("type")
                    if name is None or type_node is None:
                        continue
                    model.type_decls.setdefault((file.import_path, name.text or ""), TypeDecl(
                        import_path=file.import_path,
                        name=name.text or "",
                        file=file,
                        type_node=type_node,
                        spec=spec,
                        is_alias=spec.ts_type == "type_alias",
                    ))
            elif top.ts_type in ("var_declaration", "const_declaration"):
                for spec in top.find("var_spec", "const_spec"):
                    for name in spec.children_by_field("name"):
                        model.package_values.setdefault((file.import_path, name.text or ""), PackageValue(
                            import_path=file.import_path,
                            name=name.text or "",
                            file=file,
                            spec=spec,
                            is_const=spec.ts_type == "const_spec",
                        ))

    for decl in model.functions.values():
        if decl.receiver_type:
            key = (decl.id.import_path, decl.receiver_type)
            model.methods.setdefault(key, {}).setdefault(decl.name, []).append(decl)
        else:
            model.package_funcs.setdefault((decl.id.import_path, decl.name), []).append(decl)
    # non-test declarations first so resolution prefers them
    for decls in list(model.package_funcs.values()) + [d for m in model.methods.values() for d in m.values()]:
        decls.sort(key=lambda d: (d.is_test, d.id))


def bind_types(tree: SourceTree) -> SourceModel:
    """Bind types across the parsed tree.

    Args:
        tree: Parsed source tree

    Returns:
        SourceModel whose expression and type nodes carry TypeRefs
    """
    model = SourceModel(tree=tree, functions=collect_functions(tree))
    _index_declarations(model)

    # Signatures first: call results need them regardless of file order.
    for decl in model.functions.values():
        file = model.file_of(decl.id)
        for param in decl.params + decl.results:
            param.type_ref = model.classify(param.type_node, file)

    for value in model.package_values.values():
        scope = _Scope(model, value.file)
        type_node = value.spec.child("type")
        if type_node is not None:
            value.type_ref = model.classify(type_node, value.file)
            continue
        names = [n.text for n in value.spec.children_by_field("name")]
        values = value.spec.child("value")
        scope.bind_assignment(names, values.named_children() if values is not None else [])
        value.type_ref = scope.env.get(value.name, UNKNOWN)

    for file in tree.files():
        scope = _Scope(model, file)
        for top in file.root.children:
            if top.ts_type in ("var_declaration", "const_declaration", "type_declaration"):
                scope.annotate(top)

    for decl in model.functions.values():
        file = model.file_of(decl.id)
        scope = _Scope(model, file)
        if decl.receiver_type and decl.receiver_name:
            scope.declare(decl.receiver_name, model.named_type(decl.id.import_path, decl.receiver_type))
        for param in decl.params + decl.results:
            scope.declare(param.name, param.type_ref or UNKNOWN)
        try:
            if decl.body is not None:
                scope.bind_declarations(decl.body)
                scope.reset_memo()
            scope.annotate(decl.node)
        except RecursionError:
            logger.warning(f"{decl.id}: expression nesting too deep, types left Unknown")

    unknown = sum(
        1 for decl in model.functions.values() if decl.body is not None
        for node in decl.body.walk()
        if node.ts_type in _EXPRESSION_TYPES and node.resolved_type is not None and node.resolved_type.is_unknown
    )
    logger.info(f"Bound {len(model.functions)} functions, {len(model.type_decls)} types "
                f"({unknown} expressions left Unknown)")
    return model
