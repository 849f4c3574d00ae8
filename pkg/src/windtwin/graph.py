"""Immutable triple graphs with pattern matching and ontology checks.

A Graph is a set of triples: inserting a triple twice yields the same
graph, and two graphs built from the same triples in any order compare
equal. All mutation-shaped operations return a new Graph; instances are
safe to share across threads and to use as dict keys.

The Ontology type carries class declarations, a subclass hierarchy, and
per-property domain/range axioms. ``validate`` flags triples that provably
violate a declared axiom under the subclass closure; entities with no
declared type are given the benefit of the doubt.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from .errors import ValidationError
from .terms import (
    BOOLEAN, DATATYPE_TO_IRI, DOUBLE, IRI_TO_DATATYPE, STRING, WKT,
    CLS_CABLE, CLS_CLASS, CLS_EVENT, CLS_GOVERNING_ENTITY, CLS_INFRASTRUCTURE,
    CLS_REGULATION, CLS_TURBINE, CLS_WINDFARM,
    P_CONFLICT, P_DOMAIN, P_GEOMETRY, P_IMPACT_AREA, P_IMPACT_UNIT,
    P_IMPACT_VALUE, P_PITCH, P_RANGE, P_REG_DESCRIPTION, P_STATUS,
    P_SUBCLASS_OF, P_TYPE, P_WINDSPEED, P_YAW,
    Iri, Literal, Triple, Var, triple_sort_key,
)


@dataclass(frozen=True, eq=False)
class Graph:
    """An immutable set of triples plus display-only prefix hints.

    Equality and hashing consider the triple set only; prefixes are
    carried along for serialization convenience and never affect identity.
    """

    triples: frozenset[Triple] = frozenset()
    prefixes: tuple[tuple[str, str], ...] = ()

    @classmethod
    def of(cls, triples=(), prefixes=()) -> "Graph":
        triples = frozenset(triples)
        for t in triples:
            if not isinstance(t, Triple):
                raise ValidationError(f"not a triple: {t!r}")
        return cls(triples, tuple(prefixes))

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.triples == other.triples

    def __hash__(self):
        return hash(self.triples)

    def __len__(self):
        return len(self.triples)

    def __contains__(self, triple):
        return triple in self.triples

    def __iter__(self):
        return iter(self.sorted_triples)

    @cached_property
    def sorted_triples(self) -> tuple[Triple, ...]:
        return tuple(sorted(self.triples, key=triple_sort_key))

    @cached_property
    def _by_predicate(self):
        index = {}
        for t in self.sorted_triples:
            index.setdefault(t.predicate, []).append(t)
        return index

    @cached_property
    def _by_subject(self):
        index = {}
        for t in self.sorted_triples:
            index.setdefault(t.subject, []).append(t)
        return index

    def insert(self, triple: Triple) -> "Graph":
        """Return a graph also containing ``triple`` (self if present)."""

        if not isinstance(triple, Triple):
            raise ValidationError(f"not a triple: {triple!r}")
        if triple in self.triples:
            return self
        return Graph(self.triples | {triple}, self.prefixes)

    def insert_all(self, triples) -> "Graph":
        new = frozenset(triples)
        for t in new:
            if not isinstance(t, Triple):
                raise ValidationError(f"not a triple: {t!r}")
        if new <= self.triples:
            return self
        return Graph(self.triples | new, self.prefixes)

    def remove_all(self, triples) -> "Graph":
        gone = frozenset(triples)
        if not gone & self.triples:
            return self
        return Graph(self.triples - gone, self.prefixes)

    def match(self, pattern) -> list[dict[str, "Iri | Literal"]]:
        """All variable bindings under which ``pattern`` is in the graph.

        ``pattern`` is a (subject, predicate, object) tuple mixing ground
        terms and Var placeholders; a repeated variable must bind to the
        same term in every position. The result order is deterministic
        (triple sort order) and an all-ground pattern yields ``[{}]`` when
        the triple is present.
        """

        s, p, o = pattern
        candidates = self._candidates(s, p, o)
        bindings = []
        for t in candidates:
            bound = _unify(pattern, t)
            if bound is not None:
                bindings.append(bound)
        return bindings

    def _candidates(self, s, p, o):
        if isinstance(p, Iri):
            by_p = self._by_predicate.get(p, ())
            if isinstance(s, Iri):
                return [t for t in by_p if t.subject == s]
            return by_p
        if isinstance(s, Iri):
            return self._by_subject.get(s, ())
        return self.sorted_triples


def _unify(pattern, triple):
    bound = {}
    for want, got in zip(pattern, (triple.subject, triple.predicate, triple.object)):
        if isinstance(want, Var):
            if want.name in bound and bound[want.name] != got:
                return None
            bound[want.name] = got
        elif want != got:
            return None
    return bound


# ---------------------------------------------------------------------------
# Ontology


@dataclass(frozen=True)
class PropertyAxiom:
    """Domain/range declaration for one property.

    ``domain`` is a class IRI or None (unconstrained). ``range`` is a class
    IRI, a datatype name (e.g. ``"double"``), or None.
    """

    property: Iri
    domain: Iri | None = None
    range: "Iri | str | None" = None

    def __post_init__(self):
        if isinstance(self.range, str) and self.range not in DATATYPE_TO_IRI:
            raise ValidationError(f"unknown range datatype {self.range!r}")


@dataclass(frozen=True, eq=False)
class Ontology:
    classes: frozenset[Iri]
    subclass_axioms: frozenset[tuple[Iri, Iri]]
    property_axioms: frozenset[PropertyAxiom]

    @classmethod
    def of(cls, classes=(), subclass_axioms=(), property_axioms=()) -> "Ontology":
        return cls(frozenset(classes), frozenset(subclass_axioms),
                   frozenset(property_axioms))

    def __post_init__(self):
        for child, parent in self.subclass_axioms:
            for c in (child, parent):
                if c not in self.classes:
                    raise ValidationError(f"subclass axiom references undeclared class {c!r}")
        for ax in self.property_axioms:
            for c in (ax.domain, ax.range):
                if isinstance(c, Iri) and c not in self.classes:
                    raise ValidationError(f"property axiom references undeclared class {c!r}")
        cycle = _find_cycle(self.subclass_axioms)
        if cycle:
            chain = " -> ".join(c.value for c in cycle)
            raise ValidationError(f"subclass cycle: {chain}")

    @cached_property
    def _parents(self):
        parents = {}
        for child, parent in sorted(self.subclass_axioms,
                                    key=lambda cp: (cp[0].value, cp[1].value)):
            parents.setdefault(child, []).append(parent)
        return parents

    @cached_property
    def _axiom_by_property(self):
        by_p = {}
        for ax in self.property_axioms:
            if ax.property in by_p:
                raise ValidationError(f"duplicate axiom for property {ax.property!r}")
            by_p[ax.property] = ax
        return by_p

    def axiom_for(self, prop: Iri) -> PropertyAxiom | None:
        return self._axiom_by_property.get(prop)

    def superclasses(self, cls: Iri) -> frozenset[Iri]:
        """All strict superclasses of ``cls`` under transitive closure."""

        seen = set()
        stack = list(self._parents.get(cls, ()))
        while stack:
            c = stack.pop()
            if c not in seen:
                seen.add(c)
                stack.extend(self._parents.get(c, ()))
        return frozenset(seen)

    def is_subclass(self, cls: Iri, ancestor: Iri) -> bool:
        return cls == ancestor or ancestor in self.superclasses(cls)


def _find_cycle(subclass_axioms):
    parents = {}
    for child, parent in subclass_axioms:
        parents.setdefault(child, []).append(parent)
    done = set()

    def walk(node, trail):
        if node in trail:
            return trail[trail.index(node):] + [node]
        if node in done:
            return None
        for parent in parents.get(node, ()):
            found = walk(parent, trail + [node])
            if found:
                return found
        done.add(node)
        return None

    for start in sorted(parents, key=lambda c: c.value):
        found = walk(start, [])
        if found:
            return found
    return None


# ---------------------------------------------------------------------------
# Reasoned closure and validation


def subsumption_closure(graph: Graph, ontology: Ontology) -> Graph:
    """Materialize inherited type triples.

    For every ``(x type C)`` and every superclass D of C, the result also
    holds ``(x type D)``. Idempotent and monotone.
    """

    extra = []
    for t in graph._by_predicate.get(P_TYPE, ()):
        if isinstance(t.object, Iri):
            for ancestor in sorted(ontology.superclasses(t.object), key=lambda c: c.value):
                extra.append(Triple(t.subject, P_TYPE, ancestor))
    return graph.insert_all(extra)


@dataclass(frozen=True)
class Violation:
    triple: Triple
    message: str


def validate(graph: Graph, ontology: Ontology) -> list[Violation]:
    """Report triples that provably violate a declared domain/range axiom.

    A subject or object entity violates a class constraint only when it
    has at least one declared type and none of its types reaches the
    constraint class through the subclass closure; untyped entities pass.
    Literal objects must carry exactly the declared range datatype.
    """

    closed = subsumption_closure(graph, ontology)
    types = {}
    for t in closed._by_predicate.get(P_TYPE, ()):
        if isinstance(t.object, Iri):
            types.setdefault(t.subject, set()).add(t.object)

    report = []
    for t in graph:
        axiom = ontology.axiom_for(t.predicate)
        if axiom is None:
            continue
        if axiom.domain is not None:
            declared = types.get(t.subject)
            if declared and axiom.domain not in declared:
                report.append(Violation(
                    t, f"subject type(s) outside domain {axiom.domain.value}"))
        if axiom.range is None:
            continue
        if isinstance(axiom.range, str):
            if not isinstance(t.object, Literal):
                report.append(Violation(t, f"object must be a {axiom.range} literal"))
            elif t.object.datatype != axiom.range:
                report.append(Violation(
                    t, f"object datatype {t.object.datatype} != {axiom.range}"))
        else:
            if not isinstance(t.object, Iri):
                report.append(Violation(t, f"object must be an IRI of class {axiom.range.value}"))
            else:
                declared = types.get(t.object)
                if declared and axiom.range not in declared:
                    report.append(Violation(
                        t, f"object type(s) outside range {axiom.range.value}"))
    return report


# ---------------------------------------------------------------------------
# Built-in ontology


DEFAULT_ONTOLOGY = Ontology.of(
    classes=[
        CLS_INFRASTRUCTURE, CLS_WINDFARM, CLS_TURBINE, CLS_CABLE,
        CLS_REGULATION, CLS_EVENT, CLS_GOVERNING_ENTITY,
    ],
    subclass_axioms=[
        (CLS_WINDFARM, CLS_INFRASTRUCTURE),
        (CLS_TURBINE, CLS_INFRASTRUCTURE),
        (CLS_CABLE, CLS_INFRASTRUCTURE),
    ],
    property_axioms=[
        PropertyAxiom(P_GEOMETRY, CLS_INFRASTRUCTURE, WKT),
        # hasConflict applies to infrastructure entities and to regulations,
        # so its domain stays open.
        PropertyAxiom(P_CONFLICT, None, BOOLEAN),
        PropertyAxiom(P_STATUS, CLS_TURBINE, None),
        PropertyAxiom(P_PITCH, CLS_TURBINE, DOUBLE),
        PropertyAxiom(P_YAW, CLS_TURBINE, DOUBLE),
        PropertyAxiom(P_WINDSPEED, CLS_TURBINE, DOUBLE),
        PropertyAxiom(P_REG_DESCRIPTION, CLS_REGULATION, STRING),
        # hasImpactArea holds either a place-name string or a WKT literal,
        # so its range stays open.
        PropertyAxiom(P_IMPACT_AREA, CLS_REGULATION, None),
        PropertyAxiom(P_IMPACT_VALUE, CLS_REGULATION, DOUBLE),
        PropertyAxiom(P_IMPACT_UNIT, CLS_REGULATION, STRING),
    ],
)


def ontology_from_graph(graph: Graph, base: Ontology | None = DEFAULT_ONTOLOGY) -> Ontology:
    """Build an Ontology from declaration triples, extending ``base``.

    Recognized forms: ``(C type Class)``, ``(C subClassOf D)``,
    ``(p hasDomain C)``, and ``(p hasRange C-or-datatype-IRI)``.
    """

    classes = set(base.classes) if base else set()
    subclass = set(base.subclass_axioms) if base else set()
    domains = {}
    ranges = {}
    axioms = {ax.property: ax for ax in (base.property_axioms if base else ())}

    for t in graph:
        if t.predicate == P_TYPE and t.object == CLS_CLASS:
            classes.add(t.subject)
        elif t.predicate == P_SUBCLASS_OF:
            if not isinstance(t.object, Iri):
                raise ValidationError(f"subClassOf object must be an IRI: {t!r}")
            classes.update((t.subject, t.object))
            subclass.add((t.subject, t.object))
        elif t.predicate == P_DOMAIN:
            if not isinstance(t.object, Iri):
                raise ValidationError(f"hasDomain object must be an IRI: {t!r}")
            classes.add(t.object)
            domains[t.subject] = t.object
        elif t.predicate == P_RANGE:
            if not isinstance(t.object, Iri):
                raise ValidationError(f"hasRange object must be an IRI: {t!r}")
            if t.object.value in IRI_TO_DATATYPE:
                ranges[t.subject] = IRI_TO_DATATYPE[t.object.value]
            else:
                classes.add(t.object)
                ranges[t.subject] = t.object

    for prop in sorted(set(domains) | set(ranges), key=lambda p: p.value):
        old = axioms.get(prop)
        axioms[prop] = PropertyAxiom(
            prop,
            domains.get(prop, old.domain if old else None),
            ranges.get(prop, old.range if old else None),
        )
    return Ontology.of(classes, subclass, axioms.values())
