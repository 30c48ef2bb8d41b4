"""Immutable, indexed instance store built from Turtle / N-Triples files.

Only the inferences the difficulty measures consume are materialised:
reflexive-transitive closure of ``rdfs:subClassOf`` and
``rdfs:subPropertyOf``, upward propagation of ``rdf:type`` and
``owl:inverseOf``.  Everything else is kept as a plain assertion.
"""
from __future__ import annotations

import logging
import os
import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Union

import rdflib
from rdflib.plugins.parsers.notation3 import BadSyntax

log = logging.getLogger(__name__)

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
OWL = "http://www.w3.org/2002/07/owl#"
XSD = "http://www.w3.org/2001/XMLSchema#"
VOCAB_NAMESPACES = (RDF, RDFS, OWL, XSD)

RDF_TYPE = RDF + "type"
SUBCLASS_OF = RDFS + "subClassOf"
SUBPROPERTY_OF = RDFS + "subPropertyOf"
DOMAIN = RDFS + "domain"
RANGE = RDFS + "range"
LABEL = RDFS + "label"
INVERSE_OF = OWL + "inverseOf"
OWL_CLASS = OWL + "Class"
RDFS_CLASS = RDFS + "Class"
OBJECT_PROPERTY = OWL + "ObjectProperty"
DATATYPE_PROPERTY = OWL + "DatatypeProperty"
NAMED_INDIVIDUAL = OWL + "NamedIndividual"

FORMATS = ("turtle", "ntriples")


class OntologyError(Exception):
    pass


class OntologyParseError(OntologyError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" at line {line}" + (f", column {column}" if column is not None else "")
        super().__init__(f"parse error{where}: {message}")


class UnsupportedSyntaxError(OntologyParseError):
    def __init__(self, construct, line=None, column=None):
        self.construct = construct
        OntologyParseError.__init__(self, f"unsupported syntax construct: {construct}", line, column)


class UnknownIdentifierError(OntologyError, KeyError):
    def __init__(self, what, ident):
        self.ident = ident
        OntologyError.__init__(self, f"unknown {what}: {ident}")

    __str__ = OntologyError.__str__


@dataclass(frozen=True, order=True)
class Literal:
    """A datatype value; equality is on lexical form, datatype and language."""

    lexical: str
    datatype: str | None = None
    lang: str | None = None

    def __str__(self):
        return self.lexical


Term = Union[str, Literal]
Triple = tuple[str, str, Term]


def is_blank(ident) -> bool:
    return isinstance(ident, str) and ident.startswith("_:")


def is_vocab(ident) -> bool:
    return isinstance(ident, str) and ident.startswith(VOCAB_NAMESPACES)


def local_name(iri: str) -> str:
    for sep in ("#", "/", ":"):
        if sep in iri:
            tail = iri.rsplit(sep, 1)[1]
            if tail:
                return tail
    return iri


def humanize(name: str) -> str:
    """``isDirectedBy`` -> ``is directed by``; ``has_release_date`` -> ``has release date``."""
    name = name.replace("_", " ").replace("-", " ")
    name = re.sub(r"(?<=[a-z0-9])(?=[A-Z])", " ", name)
    name = re.sub(r"(?<=[A-Z])(?=[A-Z][a-z])", " ", name)
    return " ".join(name.split()).lower()


CONCEPT = "concept"
OUTGOING = "outgoing"
INCOMING = "incoming"
DATATYPE = "datatype"
_KIND_ORDER = {CONCEPT: 0, OUTGOING: 1, INCOMING: 2, DATATYPE: 3}


@dataclass(frozen=True)
class Condition:
    """Atomic predicate over instances.

    ``concept``: membership in ``predicate``.  ``outgoing``: ``(y, predicate, value)``
    holds.  ``incoming``: ``(value, predicate, y)`` holds.  ``datatype``:
    ``(y, predicate, value)`` with a literal ``value``.
    """

    kind: str
    predicate: str
    value: Term | None = None

    @classmethod
    def concept(cls, concept: str) -> "Condition":
        return cls(CONCEPT, concept)

    @classmethod
    def outgoing(cls, role: str, filler: str) -> "Condition":
        return cls(OUTGOING, role, filler)

    @classmethod
    def incoming(cls, role: str, filler: str) -> "Condition":
        return cls(INCOMING, role, filler)

    @classmethod
    def datatype(cls, role: str, value) -> "Condition":
        if not isinstance(value, Literal):
            value = Literal(str(value))
        return cls(DATATYPE, role, value)

    def sort_key(self):
        v = self.value
        if isinstance(v, Literal):
            v = (v.lexical, v.datatype or "", v.lang or "")
        elif v is not None:
            v = (v, "", "")
        else:
            v = ("", "", "")
        return (_KIND_ORDER[self.kind], self.predicate, v)

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()

    def __repr__(self):
        if self.kind == CONCEPT:
            return f"Concept({local_name(self.predicate)})"
        name = {OUTGOING: "Out", INCOMING: "In", DATATYPE: "Data"}[self.kind]
        v = self.value if isinstance(self.value, Literal) else local_name(self.value)
        return f"{name}({local_name(self.predicate)}, {v!r})"


def _closure(edges: dict[str, set[str]], nodes: Iterable[str]) -> dict[str, frozenset[str]]:
    out = {}
    for n in nodes:
        seen = {n}
        stack = [n]
        while stack:
            for m in edges.get(stack.pop(), ()):
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        out[n] = frozenset(seen)
    return out


class Ontology:
    """Queryable world model.  Build with :func:`load_ontology` or :meth:`from_triples`.

    All attributes are read-only after construction; queries are pure.
    """

    def __init__(self, triples: Iterable[Triple]):
        self.triples: frozenset[Triple] = frozenset(triples)
        self._build()

    @classmethod
    def from_triples(cls, triples: Iterable[Triple]) -> "Ontology":
        return cls(triples)

    def _build(self):
        concepts: set[str] = set()
        declared_obj: set[str] = set()
        declared_data: set[str] = set()
        sub_edges: dict[str, set[str]] = defaultdict(set)
        subprop_edges: dict[str, set[str]] = defaultdict(set)
        domains: dict[str, set[str]] = defaultdict(set)
        ranges: dict[str, set[str]] = defaultdict(set)
        labels: dict[str, str] = {}
        inverse_pairs: set[tuple[str, str]] = set()
        asserted_types: dict[str, set[str]] = defaultdict(set)
        individuals: set[str] = set()
        assertions: list[Triple] = []
        mentioned_roles: set[str] = set()

        for s, p, o in self.triples:
            if p == RDF_TYPE:
                if o in (OWL_CLASS, RDFS_CLASS):
                    if not is_blank(s):
                        concepts.add(s)
                elif o == OBJECT_PROPERTY:
                    declared_obj.add(s)
                elif o == DATATYPE_PROPERTY:
                    declared_data.add(s)
                elif o == NAMED_INDIVIDUAL:
                    individuals.add(s)
                elif isinstance(o, str) and not is_vocab(o) and not is_blank(o):
                    concepts.add(o)
                    asserted_types[s].add(o)
            elif p == SUBCLASS_OF:
                if isinstance(o, str) and not is_blank(s) and not is_blank(o):
                    for c in (s, o):
                        if not is_vocab(c):
                            concepts.add(c)
                    if not is_vocab(s) and not is_vocab(o):
                        sub_edges[s].add(o)
            elif p == SUBPROPERTY_OF:
                if isinstance(o, str) and not is_blank(s) and not is_blank(o):
                    for r in (s, o):
                        if not is_vocab(r):
                            mentioned_roles.add(r)
                    if not is_vocab(s) and not is_vocab(o):
                        subprop_edges[s].add(o)
            elif p in (DOMAIN, RANGE):
                if isinstance(o, str) and not is_blank(o) and not is_vocab(o) and not is_vocab(s):
                    (domains if p == DOMAIN else ranges)[s].add(o)
                    concepts.add(o)
                    mentioned_roles.add(s)
            elif p == LABEL:
                if isinstance(o, Literal) and (s not in labels or o.lang in (None, "en")):
                    labels[s] = o.lexical
            elif p == INVERSE_OF:
                if isinstance(o, str) and not is_blank(o) and not is_blank(s):
                    inverse_pairs.add((s, o))
                    inverse_pairs.add((o, s))
                    declared_obj.update((s, o))
            elif not is_vocab(p):
                assertions.append((s, p, o))

        obj_usage = {p for s, p, o in assertions if isinstance(o, str) and p not in declared_data}
        data_usage = {p for s, p, o in assertions if isinstance(o, Literal)}
        object_roles = (declared_obj | obj_usage) - declared_data
        datatype_roles = declared_data | (data_usage - object_roles)
        for r in mentioned_roles - object_roles - datatype_roles:
            object_roles.add(r)

        self.concepts = frozenset(concepts)
        self.object_roles = frozenset(object_roles)
        self.datatype_roles = frozenset(datatype_roles)
        self.roles = self.object_roles | self.datatype_roles
        self.labels = dict(labels)

        self._concept_supers = _closure(sub_edges, self.concepts)
        self._role_supers = _closure(subprop_edges, self.roles)
        self.equivalence_classes = self._report_cycles(self._concept_supers, "subclass")
        self._report_cycles(self._role_supers, "subproperty")

        instances = set(individuals) | set(asserted_types)
        object_facts: set[tuple[str, str, str]] = set()
        data_facts: set[tuple[str, str, Literal]] = set()
        for s, p, o in assertions:
            if isinstance(o, Literal):
                data_facts.add((s, p, o))
                instances.add(s)
            elif p in self.object_roles:
                object_facts.add((s, p, o))
                instances.update((s, o))
        instances -= self.concepts
        instances -= self.roles
        instances = {i for i in instances if not is_vocab(i)}
        object_facts = {t for t in object_facts if t[0] in instances and t[2] in instances}
        data_facts = {t for t in data_facts if t[0] in instances}

        inverses: dict[str, set[str]] = defaultdict(set)
        for a, b in inverse_pairs:
            inverses[a].add(b)
        self.inverses = {r: frozenset(v) for r, v in inverses.items()}

        # entailment closure: subproperty lifting + inverse flipping, to fixpoint
        entailed = set()
        work = list(object_facts)
        while work:
            t = work.pop()
            if t in entailed:
                continue
            entailed.add(t)
            s, p, o = t
            for sup in self._role_supers.get(p, (p,)):
                if (s, sup, o) not in entailed:
                    work.append((s, sup, o))
            for inv in inverses.get(p, ()):
                if (o, inv, s) not in entailed:
                    work.append((o, inv, s))
        data_entailed = set()
        for s, p, v in data_facts:
            for sup in self._role_supers.get(p, (p,)):
                data_entailed.add((s, sup, v))

        self.instances = frozenset(instances)
        self.blank_nodes = frozenset(i for i in instances if is_blank(i))
        self.object_facts = frozenset(entailed)
        self.data_facts = frozenset(data_entailed)

        types: dict[str, frozenset[str]] = {}
        for i in instances:
            closed = set()
            for c in asserted_types.get(i, ()):
                closed |= self._concept_supers.get(c, {c})
            types[i] = frozenset(closed)
        self._types = types

        members: dict[str, set[str]] = defaultdict(set)
        for i, cs in types.items():
            for c in cs:
                members[c].add(i)
        self._members = {c: frozenset(v) for c, v in members.items()}

        out_edges: dict[str, set] = defaultdict(set)
        in_edges: dict[str, set] = defaultdict(set)
        for s, p, o in entailed:
            out_edges[s].add((p, o))
            in_edges[o].add((p, s))
        self._out = {k: frozenset(v) for k, v in out_edges.items()}
        self._in = {k: frozenset(v) for k, v in in_edges.items()}
        data_by_subject: dict[str, set] = defaultdict(set)
        data_index: dict[tuple, set] = defaultdict(set)
        for s, p, v in data_entailed:
            data_by_subject[s].add((p, v))
            data_index[(p, v)].add(s)
        self._data = {k: frozenset(v) for k, v in data_by_subject.items()}
        self._data_index = {k: frozenset(v) for k, v in data_index.items()}

        def declared(table, role):
            acc = set()
            for sup in self._role_supers.get(role, (role,)):
                acc |= table.get(sup, set())
            return frozenset(acc)

        self.domains = {r: declared(domains, r) for r in self.roles if declared(domains, r)}
        self.ranges = {r: declared(ranges, r) for r in self.roles if declared(ranges, r)}

    @staticmethod
    def _report_cycles(supers, what):
        classes = set()
        for a, ups in supers.items():
            eq = frozenset(b for b in ups if a in supers.get(b, ()))
            if len(eq) > 1:
                classes.add(eq)
        for eq in sorted(classes, key=sorted):
            log.warning("cyclic %s declarations collapsed into equivalence class %s",
                        what, sorted(eq))
        return frozenset(classes)

    # basic lookups

    def __repr__(self):
        return (f"<Ontology concepts={len(self.concepts)} object_roles={len(self.object_roles)} "
                f"datatype_roles={len(self.datatype_roles)} instances={len(self.instances)}>")

    def types(self, i: str) -> frozenset[str]:
        return self._types.get(i, frozenset())

    def concept_supers(self, c: str) -> frozenset[str]:
        return self._concept_supers.get(c, frozenset((c,)))

    def role_supers(self, r: str) -> frozenset[str]:
        return self._role_supers.get(r, frozenset((r,)))

    def outgoing(self, i: str) -> frozenset[tuple[str, str]]:
        """``(role, target)`` pairs of entailed object triples with subject ``i``."""
        return self._out.get(i, frozenset())

    def incoming(self, i: str) -> frozenset[tuple[str, str]]:
        """``(role, source)`` pairs of entailed object triples with object ``i``."""
        return self._in.get(i, frozenset())

    def data_values(self, i: str) -> frozenset[tuple[str, Literal]]:
        return self._data.get(i, frozenset())

    def in_neighbours(self, i: str) -> frozenset[str]:
        return frozenset(src for _, src in self.incoming(i))

    def label(self, ident: str) -> str:
        if ident in self.labels:
            return self.labels[ident]
        return local_name(ident).replace("_", " ")

    def holds(self, c: Condition, y: str) -> bool:
        if c.kind == CONCEPT:
            return c.predicate in self.types(y)
        if c.kind == OUTGOING:
            return (c.predicate, c.value) in self.outgoing(y)
        if c.kind == INCOMING:
            return (c.predicate, c.value) in self.incoming(y)
        if c.kind == DATATYPE:
            return (c.predicate, c.value) in self.data_values(y)
        raise ValueError(f"unknown condition kind {c.kind!r}")

    def require_instance(self, i: str):
        if i not in self.instances:
            raise UnknownIdentifierError("instance", i)


def hierarchy_leq(o: Ontology, kind: str, a: str, b: str) -> bool:
    """``a ⊑ b`` in the reflexive-transitive concept or role hierarchy."""
    if kind == "concept":
        vocab, supers = o.concepts, o.concept_supers
    elif kind == "role":
        vocab, supers = o.roles, o.role_supers
    else:
        raise ValueError(f"kind must be 'concept' or 'role', got {kind!r}")
    for x in (a, b):
        if x not in vocab:
            raise UnknownIdentifierError(kind, x)
    return b in supers(a)


def strictly_below(o: Ontology, a: str, b: str) -> bool:
    return b in o.concept_supers(a) and a not in o.concept_supers(b)


def satisfiers(o: Ontology, c: Condition) -> frozenset[str]:
    if c.kind == CONCEPT:
        return o._members.get(c.predicate, frozenset())
    if c.kind == OUTGOING:
        return frozenset(src for r, src in o.incoming(c.value) if r == c.predicate)
    if c.kind == INCOMING:
        return frozenset(dst for r, dst in o.outgoing(c.value) if r == c.predicate)
    if c.kind == DATATYPE:
        return o._data_index.get((c.predicate, c.value), frozenset())
    raise ValueError(f"unknown condition kind {c.kind!r}")


def satisfiers_of_all(o: Ontology, conditions: Iterable[Condition]) -> frozenset[str]:
    """Instances satisfying every condition; the empty conjunction is satisfied by all."""
    result = None
    for c in sorted(conditions, key=lambda c: len(satisfiers(o, c))):
        s = satisfiers(o, c)
        result = s if result is None else result & s
        if not result:
            return frozenset()
    return o.instances if result is None else result


def condition_profile(o: Ontology, i: str) -> frozenset[Condition]:
    o.require_instance(i)
    conds = {Condition.concept(c) for c in o.types(i)}
    conds.update(Condition.outgoing(r, t) for r, t in o.outgoing(i))
    conds.update(Condition.incoming(r, s) for r, s in o.incoming(i))
    conds.update(Condition(DATATYPE, r, v) for r, v in o.data_values(i))
    return frozenset(conds)


def instance_popularity(o: Ontology, p: Condition, i: str) -> int:
    """Distinct instances pointing at ``i`` through any object role that do not satisfy ``p``."""
    if not o.holds(p, i):
        raise ValueError(f"instance does not satisfy predicate: {i} / {p!r}")
    return sum(1 for j in o.in_neighbours(i) if not o.holds(p, j))


def connectivity(o: Ontology, x: str) -> int:
    o.require_instance(x)
    tx = o.types(x)
    count = 0
    for y in o.in_neighbours(x):
        found = False
        for cy in o.types(y):
            if cy in tx:
                continue
            for cx in tx:
                if cy not in o.concept_supers(cx) and not strictly_below(o, cy, cx):
                    found = True
                    break
            if found:
                break
        count += found
    return count


# parsing / serialisation


def _convert(term) -> Term:
    if isinstance(term, rdflib.BNode):
        return "_:" + str(term)
    if isinstance(term, rdflib.Literal):
        dt = str(term.datatype) if term.datatype is not None else None
        return Literal(str(term), dt, term.language)
    return str(term)


def _to_rdflib(term: Term):
    if isinstance(term, Literal):
        return rdflib.Literal(term.lexical, lang=term.lang,
                              datatype=rdflib.URIRef(term.datatype) if term.datatype else None)
    if is_blank(term):
        return rdflib.BNode(term[2:])
    return rdflib.URIRef(term)


_UNSUPPORTED = (
    ("{", "N3 formula"),
    ("=>", "N3 implication"),
    ("<=", "N3 implication"),
    ("@forAll", "N3 universal quantifier"),
    ("@forSome", "N3 existential quantifier"),
    ("<<", "quoted triple"),
)


def _turtle_error(text: str, err: BadSyntax) -> OntologyParseError:
    pos = getattr(err, "_i", None)
    line = col = None
    if isinstance(pos, int):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        rest = text[pos:].lstrip()
        for token, construct in _UNSUPPORTED:
            if rest.startswith(token):
                return UnsupportedSyntaxError(construct, line, col)
    return OntologyParseError(getattr(err, "_why", str(err)), line, col)


def _parse_ntriples(text: str) -> rdflib.Graph:
    g = rdflib.Graph()
    try:
        g.parse(data=text, format="nt")
        return g
    except Exception:
        pass
    # locate the first offending line; N-Triples lines are independent
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            rdflib.Graph().parse(data=line + "\n", format="nt")
        except Exception as e:
            stripped = line.lstrip()
            if stripped.startswith("@prefix") or stripped.startswith("PREFIX"):
                raise UnsupportedSyntaxError("prefix directive", n, 1) from None
            raise OntologyParseError(str(e) or "invalid N-Triples statement", n, 1) from None
    raise OntologyParseError("invalid N-Triples document")


def parse_text(text: str, format: str = "turtle") -> Ontology:
    if format not in FORMATS:
        raise UnsupportedSyntaxError(f"format {format!r}")
    if format == "turtle":
        g = rdflib.Graph()
        try:
            g.parse(data=text, format="turtle")
        except BadSyntax as e:
            raise _turtle_error(text, e) from None
    else:
        g = _parse_ntriples(text)
    return Ontology((_convert(s), _convert(p), _convert(o)) for s, p, o in g)


def load_ontology(source, format: str | None = None) -> Ontology:
    """Parse a file path, bytes, or binary/text stream.

    ``format`` defaults from the file suffix (``.nt`` -> ntriples, otherwise turtle).
    """
    if isinstance(source, (str, os.PathLike)):
        path = os.fspath(source)
        if format is None:
            format = "ntriples" if path.endswith(".nt") else "turtle"
        with open(path, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    o = parse_text(text, format or "turtle")
    log.info("loaded %r", o)
    return o


def serialize(o: Ontology, format: str = "ntriples") -> str:
    g = rdflib.Graph()
    for s, p, obj in o.triples:
        g.add((_to_rdflib(s), _to_rdflib(p), _to_rdflib(obj)))
    return g.serialize(format="nt" if format == "ntriples" else "turtle")


def dump_ontology(o: Ontology, dest, format: str = "ntriples"):
    text = serialize(o, format)
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        dest.write(text)

