import logging

import pytest
from hypothesis import given, settings, strategies as st

from ontomcq.ontology import (
    Condition,
    Literal,
    Ontology,
    OntologyParseError,
    UnknownIdentifierError,
    UnsupportedSyntaxError,
    condition_profile,
    connectivity,
    hierarchy_leq,
    instance_popularity,
    load_ontology,
    parse_text,
    satisfiers,
    serialize,
)

from .conftest import MOVIES, M
from .oracle import Oracle, as_tuple, random_triples

PREFIX = "@prefix : <http://example.org/movies#> .\n@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n@prefix owl: <http://www.w3.org/2002/07/owl#> .\n"


def test_fixture_counts(movies):
    assert len(movies.instances) == 6
    assert len(movies.concepts) == 6
    assert len(movies.object_roles) == 2
    assert len(movies.datatype_roles) == 1


def test_empty_document():
    o = parse_text("", "turtle")
    assert not o.instances and not o.concepts and not o.roles and not o.triples


def test_upward_closure_from_subclass_only():
    o = parse_text(PREFIX + ":OscarMovie rdfs:subClassOf :Movie .\n:m a :OscarMovie .\n")
    assert o.holds(Condition.concept(M("Movie")), M("m"))


def test_load_from_stream_and_bytes():
    data = MOVIES.read_bytes()
    with open(MOVIES, "rb") as fh:
        a = load_ontology(fh, "turtle")
    b = load_ontology(data, "turtle")
    assert a.triples == b.triples


def test_ntriples_round_trip(movies, tmp_path):
    path = tmp_path / "m.nt"
    path.write_text(serialize(movies, "ntriples"))
    again = load_ontology(path)
    assert again.triples == movies.triples
    for inst in movies.instances:
        assert condition_profile(again, inst) == condition_profile(movies, inst)


@pytest.mark.parametrize("kind,a,b,expected", [
    ("concept", "OscarMovie", "Movie", True),
    ("concept", "Movie", "Movie", True),
    ("concept", "Movie", "OscarMovie", False),
    ("concept", "Director", "Person", True),
    ("concept", "Director", "Movie", False),
    ("role", "actsIn", "actsIn", True),
])
def test_hierarchy_leq(movies, kind, a, b, expected):
    assert hierarchy_leq(movies, kind, M(a), M(b)) is expected


def test_hierarchy_unknown_identifier(movies):
    with pytest.raises(UnknownIdentifierError, match="Nope"):
        hierarchy_leq(movies, "concept", M("Nope"), M("Movie"))


def test_satisfiers_examples(movies):
    assert satisfiers(movies, Condition.concept(M("Movie"))) == {M("m1"), M("m2"), M("m3")}
    assert satisfiers(movies, Condition.outgoing(M("isDirectedBy"), M("d1"))) == {M("m1"), M("m2")}
    assert satisfiers(movies, Condition.concept(M("Unused"))) == frozenset()
    assert satisfiers(movies, Condition.incoming(M("actsIn"), M("a1"))) == {M("m1"), M("m2")}
    assert satisfiers(movies, Condition.datatype(M("hasReleaseYear"), "2014")) == {M("m1")}


def test_condition_profile_examples(movies):
    assert condition_profile(movies, M("m1")) == {
        Condition.concept(M("Movie")),
        Condition.concept(M("OscarMovie")),
        Condition.outgoing(M("isDirectedBy"), M("d1")),
        Condition.incoming(M("actsIn"), M("a1")),
        Condition.datatype(M("hasReleaseYear"), "2014"),
    }
    assert condition_profile(movies, M("m3")) == {
        Condition.concept(M("Movie")),
        Condition.concept(M("ThrillerMovie")),
        Condition.outgoing(M("isDirectedBy"), M("d2")),
    }


def test_condition_profile_isolated_instance():
    o = parse_text(PREFIX + ":A a owl:Class .\n:B rdfs:subClassOf :A .\n:z a :B .\n")
    assert condition_profile(o, M("z")) == {Condition.concept(M("A")), Condition.concept(M("B"))}
    with pytest.raises(UnknownIdentifierError):
        condition_profile(o, M("missing"))


def test_instance_popularity_examples(movies):
    movie = Condition.concept(M("Movie"))
    assert instance_popularity(movies, movie, M("m1")) == 1
    assert instance_popularity(movies, movie, M("m3")) == 0
    with pytest.raises(ValueError, match="does not satisfy"):
        instance_popularity(movies, movie, M("d1"))


def test_connectivity_examples(movies):
    assert connectivity(movies, M("m1")) == 1
    assert connectivity(movies, M("d1")) == 2
    assert connectivity(movies, M("m3")) == 0
    assert connectivity(movies, M("a1")) == 0
    with pytest.raises(UnknownIdentifierError):
        connectivity(movies, M("zz"))


def test_connectivity_ignores_same_hierarchy_sources():
    o = parse_text(PREFIX + ":Movie a owl:Class .\n:Sequel rdfs:subClassOf :Movie .\n"
                   ":r a owl:ObjectProperty .\n:s a :Movie .\n:t a :Movie .\n:s :r :t .\n")
    # the only source shares every concept with the target
    assert connectivity(o, M("t")) == 0


def test_inverse_of_entails_reverse_triples():
    o = parse_text(PREFIX + ":directed owl:inverseOf :isDirectedBy .\n:m :isDirectedBy :d .\n")
    assert o.holds(Condition.outgoing(M("directed"), M("m")), M("d"))
    assert satisfiers(o, Condition.incoming(M("isDirectedBy"), M("m"))) == {M("d")}


def test_subproperty_entailment():
    o = parse_text(PREFIX + ":directedBy rdfs:subPropertyOf :madeBy .\n:m :directedBy :d .\n")
    assert satisfiers(o, Condition.outgoing(M("madeBy"), M("d"))) == {M("m")}
    assert hierarchy_leq(o, "role", M("directedBy"), M("madeBy"))


def test_duplicate_triples_are_deduplicated():
    text = PREFIX + ":m :r :d .\n:m :r :d .\n:x :r :d .\n"
    o = parse_text(text)
    assert len(o.in_neighbours(M("d"))) == 2


def test_blank_nodes_flagged():
    o = parse_text(PREFIX + ":Movie a owl:Class .\n_:b a :Movie .\n:m a :Movie .\n")
    assert len(o.blank_nodes) == 1
    assert next(iter(o.blank_nodes)).startswith("_:")


def test_cyclic_subclass_collapses_with_warning(caplog):
    with caplog.at_level(logging.WARNING):
        o = parse_text(PREFIX + ":A rdfs:subClassOf :B .\n:B rdfs:subClassOf :A .\n:x a :A .\n")
    assert "cyclic" in caplog.text
    assert hierarchy_leq(o, "concept", M("A"), M("B")) and hierarchy_leq(o, "concept", M("B"), M("A"))
    assert frozenset({M("A"), M("B")}) in o.equivalence_classes
    assert o.holds(Condition.concept(M("B")), M("x"))


def test_turtle_parse_error_has_position():
    with pytest.raises(OntologyParseError) as err:
        parse_text(PREFIX + ":a :b :c\n:d :e .\n")
    assert err.value.line is not None and err.value.column is not None


def test_ntriples_parse_error_names_line():
    text = "<http://a> <http://b> <http://c> .\n<http://a> <http://b> .\n"
    with pytest.raises(OntologyParseError) as err:
        parse_text(text, "ntriples")
    assert err.value.line == 2


def test_unsupported_construct_named():
    with pytest.raises(UnsupportedSyntaxError) as err:
        parse_text(PREFIX + "{ :a :b :c } => { :a :b :d } .\n")
    assert "N3 formula" in str(err.value)
    with pytest.raises(UnsupportedSyntaxError):
        parse_text("<http://a> <http://b> <http://c> .", "rdfxml")


def test_labels_and_fallback():
    o = parse_text(PREFIX + ':m rdfs:label "Birdman" .\n:m :r :clint_eastwood .\n')
    assert o.label(M("m")) == "Birdman"
    assert o.label(M("clint_eastwood")) == "clint eastwood"


# oracle equivalence on random ontologies


def _check_against_oracle(seed):
    triples = random_triples(seed)
    assert len(triples) <= 200
    o = Ontology(triples)
    ref = Oracle(triples)
    assert set(o.instances) == ref.instances
    for x in sorted(ref.instances):
        prof = condition_profile(o, x)
        assert {as_tuple(c) for c in prof} == ref.profile(x)
        for c in prof:
            assert satisfiers(o, c) == ref.satisfiers(as_tuple(c))
            assert instance_popularity(o, c, x) == ref.popularity(as_tuple(c), x)
        assert connectivity(o, x) == ref.connectivity(x)
    for c in sorted(ref.concepts):
        assert satisfiers(o, Condition.concept(c)) == ref.satisfiers(("concept", c, None))
        for d in ref.concepts:
            assert hierarchy_leq(o, "concept", c, d) == ((c, d) in ref.leq)


@given(st.integers(min_value=0, max_value=10**9))
@settings(max_examples=40, deadline=None)
def test_random_ontologies_match_oracle(seed):
    _check_against_oracle(seed)


@given(st.integers(min_value=0, max_value=10**9))
@settings(max_examples=40, deadline=None)
def test_store_invariants(seed):
    o = Ontology(random_triples(seed))
    for c in o.concepts:
        members = satisfiers(o, Condition.concept(c))
        for d in o.concept_supers(c):
            assert members <= satisfiers(o, Condition.concept(d))
    for x in o.instances:
        indeg = len(o.in_neighbours(x))
        assert connectivity(o, x) <= indeg
        if indeg == 0:
            assert connectivity(o, x) == 0
        for c in condition_profile(o, x):
            assert instance_popularity(o, c, x) <= indeg


@given(st.integers(min_value=0, max_value=10**9))
@settings(max_examples=15, deadline=None)
def test_serialize_round_trip_random(seed):
    o = Ontology(random_triples(seed))
    again = parse_text(serialize(o, "ntriples"), "ntriples")
    assert again.triples == o.triples
    for x in o.instances:
        assert condition_profile(again, x) == condition_profile(o, x)
        assert connectivity(again, x) == connectivity(o, x)


def test_literal_identity():
    assert Literal("2014") == Literal("2014")
    assert Literal("2014") != Literal("2014", "http://www.w3.org/2001/XMLSchema#gYear")
