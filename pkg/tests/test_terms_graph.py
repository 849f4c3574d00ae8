"""Terms, triple store, ontology, and validation behaviour."""

import random

import pytest

from windtwin.errors import ValidationError
from windtwin.graph import (
    DEFAULT_ONTOLOGY,
    Graph,
    Ontology,
    PropertyAxiom,
    ontology_from_graph,
    subsumption_closure,
    validate,
)
from windtwin.terms import (
    BOOLEAN,
    DATATYPE_TO_IRI,
    CLS_CLASS,
    CLS_INFRASTRUCTURE,
    CLS_REGULATION,
    CLS_TURBINE,
    CLS_WINDFARM,
    DOUBLE,
    INTEGER,
    P_CONFLICT,
    P_GEOMETRY,
    P_DOMAIN,
    P_RANGE,
    P_PITCH,
    P_SUBCLASS_OF,
    P_TYPE,
    STRING,
    WKT,
    WT_NS,
    Iri,
    Literal,
    Triple,
    Var,
    wt,
)
from windtwin.storm import local_name


# ---------------------------------------------------------------------------
# Terms


def test_iri_rejects_empty_and_forbidden_characters():
    Iri("http://example.org/x")
    with pytest.raises(ValidationError):
        Iri("")
    with pytest.raises(ValidationError):
        Iri("http://example.org/has space")
    with pytest.raises(ValidationError):
        Iri("http://example.org/<angle>")


def test_literal_default_datatype_is_string():
    lit = Literal("hello")
    assert lit.datatype == STRING
    assert lit.value() == "hello"


def test_literal_value_parses_by_datatype():
    assert Literal("2.5", DOUBLE).value() == 2.5
    assert Literal("-7", INTEGER).value() == -7
    assert Literal("true", BOOLEAN).value() is True
    assert Literal("false", BOOLEAN).value() is False
    geom = Literal("POINT (1 2)", WKT).value()
    assert (geom.point.lon, geom.point.lat) == (1.0, 2.0)


def test_literal_rejects_bad_lexical_forms():
    with pytest.raises(ValidationError):
        Literal("not-a-number", DOUBLE)
    with pytest.raises(ValidationError):
        Literal("1e9999", DOUBLE)
    with pytest.raises(ValidationError):
        Literal("1.5", INTEGER)
    with pytest.raises(ValidationError):
        Literal("True", BOOLEAN)
    with pytest.raises(ValidationError):
        Literal("POINT (1)", WKT)


def test_var_name_rules():
    Var("x")
    Var("farAway_2")
    with pytest.raises(ValidationError):
        Var("")
    with pytest.raises(ValidationError):
        Var("two words")


def test_triple_slot_types():
    s = wt("T001")
    with pytest.raises(ValidationError):
        Triple(Literal("x"), P_TYPE, CLS_TURBINE)
    with pytest.raises(ValidationError):
        Triple(s, Literal("p"), CLS_TURBINE)
    with pytest.raises(ValidationError):
        Triple(s, P_TYPE, Var("o"))
    assert Triple(s, P_TYPE, CLS_TURBINE).object == CLS_TURBINE


def test_local_name():
    assert local_name(wt("Turbine_T001")) == "Turbine_T001"
    assert local_name(Iri("http://example.org/path/leaf")) == "leaf"


# ---------------------------------------------------------------------------
# Graph


def _small_graph():
    return Graph.of([
        Triple(wt("T1"), P_TYPE, CLS_TURBINE),
        Triple(wt("T2"), P_TYPE, CLS_TURBINE),
        Triple(wt("T1"), P_PITCH, Literal("12.0", DOUBLE)),
    ])


def test_match_with_variables():
    g = _small_graph()
    rows = g.match((Var("x"), P_TYPE, CLS_TURBINE))
    assert {r["x"] for r in rows} == {wt("T1"), wt("T2")}


def test_match_all_ground_present_gives_one_empty_binding():
    g = _small_graph()
    assert g.match((wt("T1"), P_TYPE, CLS_TURBINE)) == [{}]
    assert g.match((wt("T3"), P_TYPE, CLS_TURBINE)) == []


def test_match_repeated_variable_must_unify():
    g = Graph.of([
        Triple(wt("a"), wt("linked"), wt("a")),
        Triple(wt("a"), wt("linked"), wt("b")),
    ])
    rows = g.match((Var("x"), wt("linked"), Var("x")))
    assert rows == [{"x": wt("a")}]


def test_match_rejects_short_pattern():
    with pytest.raises((ValidationError, ValueError)):
        _small_graph().match((Var("x"), P_TYPE))


def test_insert_returns_same_object_when_no_change():
    g = _small_graph()
    t = Triple(wt("T1"), P_TYPE, CLS_TURBINE)
    assert g.insert(t) is g
    g2 = g.insert(Triple(wt("T3"), P_TYPE, CLS_TURBINE))
    assert g2 is not g
    assert len(g2) == 4
    assert len(g) == 3


def test_remove_all_identity_and_removal():
    g = _small_graph()
    assert g.remove_all([Triple(wt("nope"), P_TYPE, CLS_TURBINE)]) is g
    g2 = g.remove_all([Triple(wt("T1"), P_PITCH, Literal("12.0", DOUBLE))])
    assert len(g2) == 2


def test_graph_contains_and_iter():
    g = _small_graph()
    assert Triple(wt("T1"), P_TYPE, CLS_TURBINE) in g
    assert len(list(iter(g))) == 3


def test_graph_prefixes_kept():
    g = Graph.of((), prefixes=(("wt", WT_NS),))
    assert g.prefixes == (("wt", WT_NS),)


# ---------------------------------------------------------------------------
# Ontology


def test_ontology_of_rejects_undeclared_class():
    with pytest.raises(ValidationError):
        Ontology.of(
            classes=(CLS_TURBINE,),
            subclass_axioms=((CLS_TURBINE, CLS_INFRASTRUCTURE),),
        )


def test_ontology_of_rejects_cycles():
    with pytest.raises(ValidationError):
        Ontology.of(
            classes=(CLS_TURBINE, CLS_INFRASTRUCTURE),
            subclass_axioms=(
                (CLS_TURBINE, CLS_INFRASTRUCTURE),
                (CLS_INFRASTRUCTURE, CLS_TURBINE),
            ),
        )


def test_ontology_rejects_conflicting_axioms_for_one_property():
    ont = Ontology.of(
        classes=(CLS_TURBINE,),
        property_axioms=(
            PropertyAxiom(P_PITCH, CLS_TURBINE, DOUBLE),
            PropertyAxiom(P_PITCH, None, DOUBLE),
        ),
    )
    with pytest.raises(ValidationError):
        ont.axiom_for(P_PITCH)


def test_superclasses_transitive():
    supers = DEFAULT_ONTOLOGY.superclasses(CLS_TURBINE)
    assert CLS_INFRASTRUCTURE in supers
    assert CLS_TURBINE not in supers
    assert DEFAULT_ONTOLOGY.is_subclass(CLS_TURBINE, CLS_INFRASTRUCTURE)
    assert DEFAULT_ONTOLOGY.is_subclass(CLS_TURBINE, CLS_TURBINE)
    assert not DEFAULT_ONTOLOGY.is_subclass(CLS_INFRASTRUCTURE, CLS_TURBINE)


def test_subsumption_closure_materializes_supertypes():
    g = Graph.of([Triple(wt("T1"), P_TYPE, CLS_TURBINE)])
    g2 = subsumption_closure(g, DEFAULT_ONTOLOGY)
    assert Triple(wt("T1"), P_TYPE, CLS_INFRASTRUCTURE) in g2
    # Idempotent: a second pass adds nothing and returns the same object.
    assert subsumption_closure(g2, DEFAULT_ONTOLOGY) is g2


def test_subsumption_closure_monotone():
    rng = random.Random(7)
    classes = [CLS_TURBINE, CLS_WINDFARM, CLS_REGULATION, CLS_INFRASTRUCTURE]
    for _ in range(20):
        triples = [
            Triple(wt(f"e{rng.randrange(5)}"), P_TYPE, rng.choice(classes))
            for _ in range(rng.randrange(1, 8))
        ]
        g = Graph.of(triples)
        g2 = subsumption_closure(g, DEFAULT_ONTOLOGY)
        assert set(g.triples) <= set(g2.triples)


def test_validate_clean_graph():
    g = subsumption_closure(
        Graph.of([
            Triple(wt("T1"), P_TYPE, CLS_TURBINE),
            Triple(wt("T1"), P_PITCH, Literal("3.5", DOUBLE)),
            Triple(wt("T1"), P_GEOMETRY, Literal("POINT (0 0)", WKT)),
        ]),
        DEFAULT_ONTOLOGY,
    )
    assert validate(g, DEFAULT_ONTOLOGY) == []


def test_validate_flags_domain_violation():
    g = Graph.of([
        Triple(wt("R1"), P_TYPE, CLS_REGULATION),
        Triple(wt("R1"), P_PITCH, Literal("3.5", DOUBLE)),
    ])
    violations = validate(g, DEFAULT_ONTOLOGY)
    assert len(violations) == 1
    assert violations[0].triple.predicate == P_PITCH
    assert "domain" in violations[0].message


def test_validate_untyped_subject_passes_domain_check():
    g = Graph.of([Triple(wt("mystery"), P_PITCH, Literal("3.5", DOUBLE))])
    assert validate(g, DEFAULT_ONTOLOGY) == []


def test_validate_flags_range_violations():
    g = Graph.of([
        Triple(wt("T1"), P_TYPE, CLS_TURBINE),
        Triple(wt("T1"), P_PITCH, Literal("3.5")),
    ])
    violations = validate(g, DEFAULT_ONTOLOGY)
    assert len(violations) == 1
    assert "datatype" in violations[0].message

    g = Graph.of([Triple(wt("T1"), P_CONFLICT, wt("T2"))])
    assert len(validate(g, DEFAULT_ONTOLOGY)) == 1


def test_validate_iri_range_uses_subsumption():
    part_of = wt("partOfFarm")
    ont = Ontology.of(
        classes=(CLS_TURBINE, CLS_INFRASTRUCTURE, CLS_WINDFARM),
        subclass_axioms=((CLS_TURBINE, CLS_INFRASTRUCTURE),),
        property_axioms=(PropertyAxiom(part_of, None, CLS_INFRASTRUCTURE),),
    )
    g = subsumption_closure(
        Graph.of([
            Triple(wt("T1"), P_TYPE, CLS_TURBINE),
            Triple(wt("X"), part_of, wt("T1")),
        ]),
        ont,
    )
    assert validate(g, ont) == []
    bad = Graph.of([
        Triple(wt("F1"), P_TYPE, CLS_WINDFARM),
        Triple(wt("X"), part_of, wt("F1")),
    ])
    assert len(validate(bad, ont)) == 1


def test_ontology_from_graph_round_trip():
    g = Graph.of([
        Triple(CLS_TURBINE, P_TYPE, CLS_CLASS),
        Triple(CLS_INFRASTRUCTURE, P_TYPE, CLS_CLASS),
        Triple(CLS_TURBINE, P_SUBCLASS_OF, CLS_INFRASTRUCTURE),
        Triple(P_PITCH, P_DOMAIN, CLS_TURBINE),
        Triple(P_PITCH, P_RANGE, Iri(DATATYPE_TO_IRI[DOUBLE])),
    ])
    ont = ontology_from_graph(g)
    assert ont.is_subclass(CLS_TURBINE, CLS_INFRASTRUCTURE)
    axiom = ont.axiom_for(P_PITCH)
    assert axiom.domain == CLS_TURBINE
    assert axiom.range == DOUBLE
