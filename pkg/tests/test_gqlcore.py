import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gqlbench import gqlcore
from gqlbench.gqlcore import (
    EnumValue,
    Field,
    ListValue,
    ObjectValue,
    QueryDoc,
    QuerySyntaxError,
    TypeRef,
    UnsupportedConstructError,
    Variable,
    VariableDef,
    VariableError,
    build_schema,
    coerce_variables,
    count_leaf_nodes,
    default_schema,
    nesting_depth,
    parse,
    print_query,
    validate,
    variable_refs,
)
from gqlbench.workload import get_template

QT5 = get_template("QT5").text
QT9 = get_template("QT9").text


# --------------------------------------------------------------------------
# schema
# --------------------------------------------------------------------------


def test_schema_has_required_roots_and_fields():
    s = default_schema()
    assert s.query_type == "Query"
    assert {"department", "university"} <= set(s.query.fields)
    assert "nr" in s.field("Query", "department").args
    assert {"emailAddress", "memberOf"} <= set(s.object_types["GraduateStudent"].fields)
    assert {"graduateStudents", "subOrganizationOf"} <= set(s.object_types["Department"].fields)
    assert "limit" in s.field("University", "undergraduateDegreeObtainedBystudent").args
    order = s.field("Faculty", "publications").args["order"]
    assert set(s.input_types[order.type.name].fields) == {"field", "direction"}


def test_every_object_reference_resolves():
    s = default_schema()
    known = set(s.object_types) | set(s.enums) | {"ID", "Int", "String", "Float", "Boolean"}
    for t in s.object_types.values():
        for f in t.fields.values():
            assert f.type.name in known, (t.name, f.name)


def test_graduate_student_has_six_sortable_fields():
    s = default_schema()
    assert len(s.enums["GraduateStudentField"]) == 6
    assert "emailAddress" in s.enums["GraduateStudentField"]
    assert set(s.enums["PublicationField"]) >= {"title", "abstract"}


def test_schema_without_query_type_is_rejected():
    with pytest.raises(gqlcore.GqlError):
        build_schema("type Foo { id: ID }")


def test_type_ref_roundtrip():
    for text in ("ID", "ID!", "[Int]", "[Int!]!", "[String]!"):
        assert str(TypeRef.parse(text)) == text


# --------------------------------------------------------------------------
# parse
# --------------------------------------------------------------------------


def test_parse_qt5():
    doc = parse(QT5)
    assert doc.operation_name == "qt5"
    assert doc.variable_defs == (VariableDef("departmentID", TypeRef("ID")),)
    assert nesting_depth(doc) == 7
    assert variable_refs(doc) == {"departmentID"}


def test_parse_minimal():
    doc = parse("query{ university(nr:3){ id } }")
    (root,) = doc.selections
    assert root.name == "university" and root.arguments == {"nr": 3}
    assert root.selections == (Field("id"),)


def test_parse_qt9_arguments():
    doc = parse(QT9)
    ug = doc.selections[0].selections[0]
    assert ug.arguments == {"limit": 50}
    pubs = ug.selections[0].selections[0]
    order = pubs.arguments["order"]
    assert isinstance(order, ObjectValue)
    assert order.get("direction") == EnumValue("DESC")
    assert order.get("field") == Variable("attrPublicationField")


def test_syntax_error_has_position():
    with pytest.raises(QuerySyntaxError) as err:
        parse("query {\n  university(nr: 3 { id }\n}")
    assert err.value.line == 2 and err.value.column is not None


@pytest.mark.parametrize("text", [
    "query { ...F } fragment F on Query { university(nr: 1) { id } }",
    "query { university(nr: 1) { ... on University { id } } }",
    "query { u: university(nr: 1) { id } }",
    "query { university(nr: 1) @skip(if: true) { id } }",
    "mutation { university(nr: 1) { id } }",
    "query a { university(nr: 1) { id } } query b { university(nr: 2) { id } }",
])
def test_unsupported_constructs(text):
    with pytest.raises(UnsupportedConstructError):
        parse(text)


def test_unsupported_is_distinct_from_syntax():
    assert not issubclass(UnsupportedConstructError, QuerySyntaxError)


# --------------------------------------------------------------------------
# validate
# --------------------------------------------------------------------------


@pytest.mark.parametrize("tid", [f"QT{i}" for i in range(1, 17)])
def test_templates_validate(tid):
    assert validate(get_template(tid).text) == []


def test_unknown_field():
    (v,) = validate("query { departmen(nr: 1) { id } }")
    assert v.rule == "unknown-field"
    assert "unknown field 'departmen' on Query" in v.message


def test_missing_selection_set():
    (v,) = validate("query { department(nr: 1) }")
    assert v.rule == "missing-selection-set"
    assert "missing selection set" in v.message


def test_leaf_with_selection():
    (v,) = validate("query { department(nr: 1) { id { x } } }")
    assert v.rule == "leaf-with-selection"


def test_unknown_argument():
    (v,) = validate("query { department(id: 1) { id } }")
    assert v.rule == "unknown-argument"


def test_undeclared_and_unused_variables():
    rules = {v.rule for v in validate("query q($a: ID) { department(nr: $b) { id } }")}
    assert rules == {"undeclared-variable", "unused-variable"}


def test_variable_type_mismatch():
    (v,) = validate("query q($a: String) { department(nr: 1) { graduateStudents(limit: $a) { id } } }")
    assert v.rule == "variable-type"


def test_enum_value_checked():
    text = "query { faculty(nr: 1) { publications(order: {field: title, direction: SIDEWAYS}) { id } } }"
    (v,) = validate(text)
    assert v.rule == "enum-value"


def test_argument_literal_type():
    (v,) = validate('query { department(nr: 1) { graduateStudents(limit: "x") { id } } }')
    assert v.rule == "argument-type"


# --------------------------------------------------------------------------
# variables
# --------------------------------------------------------------------------


def test_coerce_variables():
    doc = parse(QT9)
    out = coerce_variables(doc, {"universityID": "12", "attrPublicationField": "title"})
    assert out == {"universityID": 12, "attrPublicationField": "title"}
    with pytest.raises(VariableError):
        coerce_variables(doc, {"universityID": 1, "attrPublicationField": "nope"})


def test_missing_non_null_variable():
    doc = parse(get_template("QT10").text)
    with pytest.raises(VariableError):
        coerce_variables(doc, {})


# --------------------------------------------------------------------------
# leaf counting
# --------------------------------------------------------------------------


def test_leaf_counts():
    assert count_leaf_nodes({"data": {"hero": None}}) == 1
    assert count_leaf_nodes({"a": []}) == 0
    assert count_leaf_nodes({"a": [{"id": 1}, {"id": 2, "b": None}]}) == 3
    assert count_leaf_nodes({}) == 0


json_trees = st.recursive(
    st.none() | st.integers() | st.text(max_size=5) | st.booleans(),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=4), inner, max_size=4),
    max_leaves=30,
)


@given(st.dictionaries(st.text(max_size=4), json_trees, max_size=5))
def test_leaf_count_is_additive(tree):
    assert count_leaf_nodes(tree) == sum(count_leaf_nodes({k: v}) for k, v in tree.items())
    assert count_leaf_nodes(list(tree.values())) == count_leaf_nodes(tree)
    assert count_leaf_nodes({"x": [], **{f"_{k}": v for k, v in tree.items()}}) == count_leaf_nodes(tree)


# --------------------------------------------------------------------------
# parse / print identity
# --------------------------------------------------------------------------

names = st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,7}", fullmatch=True)
enum_names = names.filter(lambda n: n not in ("true", "false", "null"))
var_names = st.sampled_from(["a", "b", "c"])
scalars = (st.integers(min_value=-2**31, max_value=2**31 - 1) | st.text(max_size=10)
           | st.booleans() | st.none() | enum_names.map(EnumValue) | var_names.map(Variable))
values = st.recursive(
    scalars,
    lambda inner: (st.lists(inner, max_size=3).map(lambda xs: ListValue(tuple(xs)))
                   | st.lists(st.tuples(names, inner), max_size=3, unique_by=lambda kv: kv[0])
                   .map(lambda kvs: ObjectValue(tuple(kvs)))),
    max_leaves=6,
)
arg_lists = st.lists(st.tuples(names, values), max_size=3, unique_by=lambda kv: kv[0]).map(tuple)
fields = st.recursive(
    st.builds(Field, names, arg_lists),
    lambda inner: st.builds(Field, names, arg_lists, st.lists(inner, min_size=1, max_size=3).map(tuple)),
    max_leaves=12,
)
type_refs = st.builds(TypeRef, st.sampled_from(["ID", "Int", "String", "Foo"]), st.booleans(), st.booleans(),
                      st.booleans()).map(lambda t: t if t.is_list else TypeRef(t.name, False, t.non_null))
docs = st.builds(
    QueryDoc,
    st.none() | names,
    st.lists(st.builds(VariableDef, var_names, type_refs), max_size=3, unique_by=lambda v: v.name).map(tuple),
    st.lists(fields, min_size=1, max_size=3).map(tuple),
)


@settings(max_examples=200)
@given(docs, st.booleans())
def test_print_parse_identity(doc, compact):
    assert parse(print_query(doc, compact=compact)) == doc


def test_print_templates_roundtrip():
    for i in range(1, 17):
        doc = get_template(f"QT{i}").doc
        again = parse(print_query(doc))
        assert again == doc
        assert validate(again) == []
