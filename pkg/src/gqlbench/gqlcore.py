"""Schema model, query parsing/validation and result-size measurement.

Lexing, parsing and rule-based validation are delegated to graphql-core; the
parsed document is converted into small frozen dataclasses that the rest of
the package works with. Only the subset of the language used by the query
templates is accepted: one query operation with variables, nested fields and
arguments. Fragments, aliases and directives are rejected explicitly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any, Mapping

import graphql
from graphql import language as ast

SCALARS = frozenset({"ID", "String", "Int", "Float", "Boolean"})


class GqlError(Exception):
    """Base class of query errors."""


class QuerySyntaxError(GqlError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" at {line}:{column}" if line is not None else ""
        super().__init__(f"syntax error{where}: {message}")
        self.line = line
        self.column = column


class UnsupportedConstructError(GqlError):
    """The query uses a construct outside the supported subset."""


class VariableError(GqlError):
    """Variables supplied with a query do not match its declarations."""


# --------------------------------------------------------------------------
# schema
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TypeRef:
    """A possibly wrapped named type, e.g. ``[GraduateStudent!]!``."""

    name: str
    is_list: bool = False
    non_null: bool = False
    item_non_null: bool = False

    def __str__(self) -> str:
        inner = self.name + ("!" if self.item_non_null else "")
        text = f"[{inner}]" if self.is_list else self.name
        return text + ("!" if self.non_null else "")

    @classmethod
    def parse(cls, text: str) -> "TypeRef":
        text = text.strip()
        non_null = text.endswith("!")
        text = text.rstrip("!")
        if text.startswith("["):
            inner = text[1:-1].strip()
            return cls(inner.rstrip("!"), True, non_null, inner.endswith("!"))
        return cls(text, False, non_null)


@dataclass(frozen=True)
class ArgDef:
    name: str
    type: TypeRef
    default: Any = None


@dataclass(frozen=True)
class FieldDef:
    name: str
    type: TypeRef
    args: Mapping[str, ArgDef] = field(default_factory=dict)


@dataclass(frozen=True)
class ObjectType:
    name: str
    fields: Mapping[str, FieldDef]


@dataclass(frozen=True)
class InputType:
    name: str
    fields: Mapping[str, ArgDef]


@dataclass(frozen=True, eq=False)
class Schema:
    object_types: Mapping[str, ObjectType]
    input_types: Mapping[str, InputType]
    enums: Mapping[str, tuple[str, ...]]
    query_type: str
    sdl: str
    _compiled: graphql.GraphQLSchema = field(repr=False, default=None)

    @property
    def query(self) -> ObjectType:
        return self.object_types[self.query_type]

    def is_object(self, type_name: str) -> bool:
        return type_name in self.object_types

    def field(self, type_name: str, field_name: str) -> FieldDef:
        return self.object_types[type_name].fields[field_name]


def _type_ref(t) -> TypeRef:
    non_null = isinstance(t, graphql.GraphQLNonNull)
    if non_null:
        t = t.of_type
    if isinstance(t, graphql.GraphQLList):
        inner = t.of_type
        item_nn = isinstance(inner, graphql.GraphQLNonNull)
        if item_nn:
            inner = inner.of_type
        return TypeRef(inner.name, True, non_null, item_nn)
    return TypeRef(t.name, False, non_null)


def _default(d):
    node = getattr(d, "ast_node", None)
    if node is not None and node.default_value is not None:
        return resolve_value(_value(node.default_value), {})
    value = getattr(d, "default_value", None)
    return None if value is graphql.Undefined else value


def build_schema(sdl: str) -> Schema:
    """Build a :class:`Schema` from SDL text."""
    try:
        compiled = graphql.build_schema(sdl)
    except graphql.GraphQLError as exc:
        raise GqlError(f"invalid schema: {exc.message}") from None
    objects: dict[str, ObjectType] = {}
    inputs: dict[str, InputType] = {}
    enums: dict[str, tuple[str, ...]] = {}
    for name, t in compiled.type_map.items():
        if name.startswith("__"):
            continue
        if isinstance(t, graphql.GraphQLObjectType):
            fields = {}
            for fname, f in t.fields.items():
                args = {a: ArgDef(a, _type_ref(d.type), _default(d)) for a, d in f.args.items()}
                fields[fname] = FieldDef(fname, _type_ref(f.type), args)
            objects[name] = ObjectType(name, fields)
        elif isinstance(t, graphql.GraphQLInputObjectType):
            inputs[name] = InputType(name, {
                a: ArgDef(a, _type_ref(d.type), _default(d)) for a, d in t.fields.items()})
        elif isinstance(t, graphql.GraphQLEnumType):
            enums[name] = tuple(t.values)
    if compiled.query_type is None:
        raise GqlError("invalid schema: no Query type")
    return Schema(objects, inputs, enums, compiled.query_type.name, sdl, compiled)


@lru_cache(maxsize=1)
def default_schema() -> Schema:
    """The shipped schema of the university dataset."""
    sdl = resources.files("gqlbench").joinpath("schema.graphql").read_text(encoding="utf-8")
    return build_schema(sdl)


# --------------------------------------------------------------------------
# query documents
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class EnumValue:
    name: str


@dataclass(frozen=True)
class ListValue:
    items: tuple


@dataclass(frozen=True)
class ObjectValue:
    fields: tuple  # ((name, value), ...)

    def get(self, name, default=None):
        for k, v in self.fields:
            if k == name:
                return v
        return default


@dataclass(frozen=True)
class VariableDef:
    name: str
    type: TypeRef
    default: Any = None


@dataclass(frozen=True)
class Field:
    name: str
    args: tuple = ()  # ((name, value), ...) in source order
    selections: tuple["Field", ...] = ()

    @property
    def arguments(self) -> dict:
        return dict(self.args)

    @property
    def is_leaf(self) -> bool:
        return not self.selections


@dataclass(frozen=True)
class QueryDoc:
    operation_name: str | None
    variable_defs: tuple[VariableDef, ...]
    selections: tuple[Field, ...]
    # graphql-core document the doc was parsed from, reused by validate()
    source_ast: Any = field(default=None, compare=False, repr=False, hash=False)

    def variable(self, name: str) -> VariableDef | None:
        for v in self.variable_defs:
            if v.name == name:
                return v
        return None


def _type_node(node) -> TypeRef:
    non_null = isinstance(node, ast.NonNullTypeNode)
    if non_null:
        node = node.type
    if isinstance(node, ast.ListTypeNode):
        inner = node.type
        item_nn = isinstance(inner, ast.NonNullTypeNode)
        if item_nn:
            inner = inner.type
        return TypeRef(inner.name.value, True, non_null, item_nn)
    return TypeRef(node.name.value, False, non_null)


def _value(node):
    if isinstance(node, ast.VariableNode):
        return Variable(node.name.value)
    if isinstance(node, ast.IntValueNode):
        return int(node.value)
    if isinstance(node, ast.FloatValueNode):
        return float(node.value)
    if isinstance(node, ast.StringValueNode):
        return node.value
    if isinstance(node, ast.BooleanValueNode):
        return node.value
    if isinstance(node, ast.NullValueNode):
        return None
    if isinstance(node, ast.EnumValueNode):
        return EnumValue(node.value)
    if isinstance(node, ast.ListValueNode):
        return ListValue(tuple(_value(v) for v in node.values))
    if isinstance(node, ast.ObjectValueNode):
        return ObjectValue(tuple((f.name.value, _value(f.value)) for f in node.fields))
    raise UnsupportedConstructError(f"unsupported value node {node.kind}")


def _selections(selection_set) -> tuple[Field, ...]:
    if selection_set is None:
        return ()
    out = []
    for sel in selection_set.selections:
        if not isinstance(sel, ast.FieldNode):
            raise UnsupportedConstructError("fragments are not supported")
        if sel.alias is not None:
            raise UnsupportedConstructError(f"alias on field '{sel.name.value}' is not supported")
        if sel.directives:
            raise UnsupportedConstructError(f"directives on field '{sel.name.value}' are not supported")
        args = tuple((a.name.value, _value(a.value)) for a in sel.arguments or ())
        out.append(Field(sel.name.value, args, _selections(sel.selection_set)))
    return tuple(out)


def parse(text: str) -> QueryDoc:
    """Parse query text into a :class:`QueryDoc`."""
    try:
        document = graphql.parse(text)
    except graphql.GraphQLSyntaxError as exc:
        loc = exc.locations[0] if exc.locations else None
        raise QuerySyntaxError(exc.description, loc.line if loc else None,
                               loc.column if loc else None) from None
    ops = []
    for definition in document.definitions:
        if isinstance(definition, ast.FragmentDefinitionNode):
            raise UnsupportedConstructError("fragments are not supported")
        if not isinstance(definition, ast.OperationDefinitionNode):
            raise UnsupportedConstructError(f"unsupported definition {definition.kind}")
        ops.append(definition)
    if len(ops) != 1:
        raise UnsupportedConstructError("exactly one operation per document is supported")
    op = ops[0]
    if op.operation != ast.OperationType.QUERY:
        raise UnsupportedConstructError(f"{op.operation.value} operations are not supported")
    if op.directives:
        raise UnsupportedConstructError("directives are not supported")
    variables = tuple(
        VariableDef(v.variable.name.value, _type_node(v.type),
                    _value(v.default_value) if v.default_value is not None else None)
        for v in op.variable_definitions or ()
    )
    return QueryDoc(op.name.value if op.name else None, variables, _selections(op.selection_set), document)


# --------------------------------------------------------------------------
# printing
# --------------------------------------------------------------------------


def print_value(value) -> str:
    if isinstance(value, Variable):
        return "$" + value.name
    if isinstance(value, EnumValue):
        return value.name
    if isinstance(value, ListValue):
        return "[" + ", ".join(print_value(v) for v in value.items) + "]"
    if isinstance(value, ObjectValue):
        return "{" + ", ".join(f"{k}: {print_value(v)}" for k, v in value.fields) + "}"
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    return json.dumps(value)


def _print_field(f: Field, indent: str, step: str, sep: str) -> str:
    text = indent + f.name
    if f.args:
        text += "(" + ", ".join(f"{k}: {print_value(v)}" for k, v in f.args) + ")"
    if f.selections:
        inner = indent + step
        body = sep.join(_print_field(s, inner, step, sep) for s in f.selections)
        text += (" {" + sep + body + sep + indent + "}") if step else (" { " + body + " }")
    return text


def print_query(doc: QueryDoc, compact: bool = False) -> str:
    """Render ``doc`` as query text; ``compact`` puts it on one line."""
    head = "query"
    if doc.operation_name:
        head += " " + doc.operation_name
    if doc.variable_defs:
        defs = []
        for v in doc.variable_defs:
            d = f"${v.name}: {v.type}"
            if v.default is not None:
                d += f" = {print_value(v.default)}"
            defs.append(d)
        head += "(" + ", ".join(defs) + ")"
    if compact:
        return head + " { " + " ".join(_print_field(f, "", "", " ") for f in doc.selections) + " }"
    body = "\n".join(_print_field(f, "  ", "  ", "\n") for f in doc.selections)
    return head + " {\n" + body + "\n}\n"


def nesting_depth(doc: QueryDoc) -> int:
    """Length of the longest chain of fields that carry a selection set."""

    def depth(fields: tuple[Field, ...]) -> int:
        return max((1 + depth(f.selections) for f in fields if f.selections), default=0)

    return depth(doc.selections)


def variable_refs(doc: QueryDoc) -> set[str]:
    out: set[str] = set()

    def visit(value):
        if isinstance(value, Variable):
            out.add(value.name)
        elif isinstance(value, ListValue):
            for v in value.items:
                visit(v)
        elif isinstance(value, ObjectValue):
            for _, v in value.fields:
                visit(v)

    def walk(fields):
        for f in fields:
            for _, v in f.args:
                visit(v)
            walk(f.selections)

    walk(doc.selections)
    return out


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QueryViolation:
    rule: str
    message: str

    def __str__(self) -> str:
        return self.message


_RULES = [
    (re.compile(r"Cannot query field '(\w+)' on type '(\w+)'"),
     "unknown-field", "unknown field '{0}' on {1}"),
    (re.compile(r"Field '(\w+)' of type '.+?' must have a selection of subfields"),
     "missing-selection-set", "missing selection set on object field '{0}'"),
    (re.compile(r"Field '(\w+)' must not have a selection since type '.+?' has no subfields"),
     "leaf-with-selection", "scalar field '{0}' must not have a selection set"),
    (re.compile(r"Unknown argument '(\w+)' on field '([\w.]+)'"),
     "unknown-argument", "unknown argument '{0}' on {1}"),
    (re.compile(r"Variable '\$(\w+)' is not defined"),
     "undeclared-variable", "variable '${0}' is not declared"),
    (re.compile(r"Variable '\$(\w+)' is never used"),
     "unused-variable", "variable '${0}' is declared but never used"),
    (re.compile(r"Variable '\$(\w+)' of type '(.+?)' used in position expecting type '(.+?)'"),
     "variable-type", "variable '${0}' of type {1} used where {2} is expected"),
    (re.compile(r"Value '(\w+)' does not exist in '(\w+)' enum"),
     "enum-value", "'{0}' is not a value of enum {1}"),
    (re.compile(r"Unknown type '(\w+)'"),
     "unknown-type", "unknown type '{0}'"),
]


def _violation(error: graphql.GraphQLError) -> QueryViolation:
    msg = error.message
    for pattern, rule, template in _RULES:
        m = pattern.search(msg)
        if m:
            return QueryViolation(rule, template.format(*m.groups()))
    if "Argument" in msg and "required" in msg:
        return QueryViolation("missing-argument", msg)
    return QueryViolation("argument-type" if "cannot represent" in msg or "Expected value" in msg
                          else "other", msg)


def validate(doc: QueryDoc | str, schema: Schema | None = None) -> list[QueryViolation]:
    """Check ``doc`` against ``schema``; an empty list means the query is valid."""
    schema = schema or default_schema()
    if isinstance(doc, str):
        doc = parse(doc)
    document = doc.source_ast if doc.source_ast is not None else graphql.parse(print_query(doc))
    return [_violation(e) for e in graphql.validate(schema._compiled, document)]


# --------------------------------------------------------------------------
# argument values
# --------------------------------------------------------------------------


def _coerce_scalar(type_name: str, value, what: str):
    if value is None:
        return None
    if type_name == "ID":
        if isinstance(value, bool):
            raise VariableError(f"{what}: expected ID, got {value!r}")
        if isinstance(value, int):
            return value
        if isinstance(value, str):
            return int(value) if value.lstrip("-").isdigit() else value
        raise VariableError(f"{what}: expected ID, got {value!r}")
    if type_name == "Int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise VariableError(f"{what}: expected Int, got {value!r}")
        return value
    if type_name == "Float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise VariableError(f"{what}: expected Float, got {value!r}")
        return float(value)
    if type_name == "String":
        if not isinstance(value, str):
            raise VariableError(f"{what}: expected String, got {value!r}")
        return value
    if type_name == "Boolean":
        if not isinstance(value, bool):
            raise VariableError(f"{what}: expected Boolean, got {value!r}")
        return value
    return value


def coerce_value(value, type_ref: TypeRef, schema: Schema, what: str = "value"):
    """Coerce a plain (JSON-like) value to ``type_ref``.

    IDs become ints when they are numeric, enums stay strings and single
    values are wrapped when a list is expected.
    """
    if value is None:
        if type_ref.non_null:
            raise VariableError(f"{what}: null for non-null type {type_ref}")
        return None
    if type_ref.is_list:
        items = value if isinstance(value, (list, tuple)) else [value]
        item_type = TypeRef(type_ref.name, False, type_ref.item_non_null)
        return [coerce_value(v, item_type, schema, what) for v in items]
    name = type_ref.name
    if name in schema.enums:
        if value not in schema.enums[name]:
            raise VariableError(f"{what}: {value!r} is not a value of enum {name}")
        return value
    if name in schema.input_types:
        if not isinstance(value, Mapping):
            raise VariableError(f"{what}: expected input object {name}")
        spec = schema.input_types[name]
        unknown = set(value) - set(spec.fields)
        if unknown:
            raise VariableError(f"{what}: unknown field(s) {sorted(unknown)} of {name}")
        out = {}
        for fname, fdef in spec.fields.items():
            if fname in value:
                out[fname] = coerce_value(value[fname], fdef.type, schema, f"{what}.{fname}")
            elif fdef.default is not None:
                out[fname] = fdef.default
            elif fdef.type.non_null:
                raise VariableError(f"{what}: missing required field {fname} of {name}")
        return out
    return _coerce_scalar(name, value, what)


def coerce_variables(doc: QueryDoc, variables: Mapping | None, schema: Schema | None = None) -> dict:
    """Validate and coerce the variables payload against the declarations."""
    schema = schema or default_schema()
    variables = dict(variables or {})
    out = {}
    for v in doc.variable_defs:
        if v.name in variables:
            out[v.name] = coerce_value(variables[v.name], v.type, schema, f"${v.name}")
        elif v.default is not None:
            out[v.name] = resolve_value(v.default, {})
        elif v.type.non_null:
            raise VariableError(f"missing value for non-null variable ${v.name}")
        else:
            out[v.name] = None
    return out


def resolve_value(value, variables: Mapping):
    """Substitute variables and turn AST values into plain Python values."""
    if isinstance(value, Variable):
        return variables.get(value.name)
    if isinstance(value, EnumValue):
        return value.name
    if isinstance(value, ListValue):
        return [resolve_value(v, variables) for v in value.items]
    if isinstance(value, ObjectValue):
        return {k: resolve_value(v, variables) for k, v in value.fields}
    return value


def field_arguments(f: Field, fdef: FieldDef, variables: Mapping, schema: Schema) -> dict:
    """Resolved and coerced arguments of one field, including defaults."""
    out = {}
    given = dict(f.args)
    for name, adef in fdef.args.items():
        if name in given:
            out[name] = coerce_value(resolve_value(given[name], variables), adef.type, schema, name)
        elif adef.default is not None:
            out[name] = adef.default
    return out


# --------------------------------------------------------------------------
# results
# --------------------------------------------------------------------------


def count_leaf_nodes(result) -> int:
    """Number of scalar positions in a result tree; nulls count, empty lists do not."""
    if isinstance(result, Mapping):
        return sum(count_leaf_nodes(v) for v in result.values())
    if isinstance(result, (list, tuple)):
        return sum(count_leaf_nodes(v) for v in result)
    return 1
