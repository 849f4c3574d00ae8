"""Turn structured planning-document extractions into triples and rules.

The pipeline has three stages.  An :class:`ExtractionClient` obtains a JSON
payload for a document (live over HTTP, or replayed from a stored corpus).
:func:`parse_extraction` validates that payload into an
:class:`ExtractionDocument`.  From there, :func:`instantiate` mints graph
triples for every component, constraint, and governing entity, while
:func:`compile_rules` lowers each constraint onto a small table of executable
rule templates; constraints no template can express become annotation triples
plus a warning, never silent drops.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import geo
from .errors import IngestError, ParseError
from .graph import DEFAULT_ONTOLOGY, Graph, Ontology, validate
from .rules import BuiltinCall, Rule, RuleSet, TriplePattern
from .terms import (
    BOOLEAN,
    CLS_CABLE,
    CLS_GOVERNING_ENTITY,
    CLS_INFRASTRUCTURE,
    CLS_REGULATION,
    CLS_TURBINE,
    CLS_WINDFARM,
    P_ACRONYM,
    P_ANNOTATION,
    P_APPLIES_TO,
    P_CATEGORY,
    P_CONFLICT,
    P_DESCRIPTION,
    P_GEOMETRY,
    P_IMPACT_AREA,
    P_IMPACT_UNIT,
    P_IMPACT_VALUE,
    P_JURISDICTION,
    P_NAME,
    P_PROJECT_LOCATION,
    P_PROJECT_NAME,
    P_REG_DESCRIPTION,
    P_ROLE,
    P_SOURCE_SECTION,
    P_TITLE,
    P_TYPE,
    P_VIOLATES,
    P_WINDSPEED,
    STRING,
    WKT,
    WT_NS,
    Iri,
    Literal,
    Triple,
    Var,
    double_literal,
)

CATEGORIES = (
    "Design Specification",
    "Environmental Mitigation",
    "Operational Parameter",
    "Safety Standard",
    "Regulatory Requirement",
)

_COMPONENT_ID = re.compile(r"COMP-\d{2,}")
_CONSTRAINT_ID = re.compile(r"C-\d{3,}")
_ENTITY_ID = re.compile(r"E-\d{2,}")


# ---------------------------------------------------------------------------
# Extraction documents


@dataclass(frozen=True)
class DocumentMetadata:
    title: str | None = None
    project_name: str | None = None
    project_location: str | None = None


@dataclass(frozen=True)
class ProjectComponent:
    component_id: str
    name: str
    acronym: str | None = None
    description: str | None = None
    source_section: str | None = None


@dataclass(frozen=True)
class ConstraintSnippet:
    """One extracted constraint; the unit of rule compilation."""

    constraint_id: str
    linked_component_id: str
    category: str
    description: str
    geographic_scope: str
    context_quote: str
    value: float | None = None
    unit: str | None = None
    source_section: str | None = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise IngestError(
                f"{self.constraint_id}: unknown category {self.category!r}")
        if self.value is not None and self.unit is None:
            raise IngestError(f"{self.constraint_id}: value without a unit")
        if not self.context_quote:
            raise IngestError(f"{self.constraint_id}: empty context_quote")


@dataclass(frozen=True)
class GoverningEntity:
    entity_id: str
    name: str
    acronym: str | None = None
    jurisdiction: str | None = None
    role: str | None = None
    source_section: str | None = None


@dataclass(frozen=True)
class ExtractionDocument:
    metadata: DocumentMetadata = field(default_factory=DocumentMetadata)
    components: tuple[ProjectComponent, ...] = ()
    constraints: tuple[ConstraintSnippet, ...] = ()
    entities: tuple[GoverningEntity, ...] = ()

    def __post_init__(self):
        known = set()
        for comp in self.components:
            _check_id(_COMPONENT_ID, comp.component_id, known)
        seen = set()
        for con in self.constraints:
            _check_id(_CONSTRAINT_ID, con.constraint_id, seen)
            if con.linked_component_id not in known:
                raise IngestError(
                    f"{con.constraint_id}: linked_component_id "
                    f"{con.linked_component_id!r} does not match any component")
        seen = set()
        for ent in self.entities:
            _check_id(_ENTITY_ID, ent.entity_id, seen)

    def component(self, component_id: str) -> ProjectComponent:
        for comp in self.components:
            if comp.component_id == component_id:
                return comp
        raise KeyError(component_id)


def _check_id(pattern: re.Pattern, value: str, seen: set) -> None:
    if not pattern.fullmatch(value):
        raise IngestError(f"ill-formed id {value!r} (expected {pattern.pattern})")
    if value in seen:
        raise IngestError(f"duplicate id {value!r}")
    seen.add(value)


@dataclass(frozen=True)
class QuantityValue:
    """A magnitude in canonical SI units (m for lengths, m/s for speeds)."""

    magnitude: float
    unit: str

    def __post_init__(self):
        if not math.isfinite(self.magnitude):
            raise IngestError(f"non-finite magnitude {self.magnitude!r}")


@dataclass(frozen=True)
class AttributeSnippet:
    """An entity-level property statement (the I_A side of a document)."""

    subject_id: str
    property: str
    value: QuantityValue | str


# ---------------------------------------------------------------------------
# Units

# unit alias -> (canonical unit, multiplier into that unit)
_UNIT_TABLE = {
    "m": ("m", 1.0),
    "meter": ("m", 1.0),
    "meters": ("m", 1.0),
    "metre": ("m", 1.0),
    "metres": ("m", 1.0),
    "ft": ("m", 0.3048),
    "foot": ("m", 0.3048),
    "feet": ("m", 0.3048),
    "km": ("m", 1000.0),
    "kilometer": ("m", 1000.0),
    "kilometers": ("m", 1000.0),
    "kilometre": ("m", 1000.0),
    "kilometres": ("m", 1000.0),
    "nm": ("m", 1852.0),
    "nautical mile": ("m", 1852.0),
    "nautical miles": ("m", 1852.0),
    "kt": ("m/s", 0.514444),
    "kts": ("m/s", 0.514444),
    "knot": ("m/s", 0.514444),
    "knots": ("m/s", 0.514444),
    "mph": ("m/s", 0.44704),
    "miles per hour": ("m/s", 0.44704),
    "m/s": ("m/s", 1.0),
    "meters per second": ("m/s", 1.0),
    "metres per second": ("m/s", 1.0),
}


def unit_conversion(unit: str) -> tuple[str, float]:
    """Return (canonical unit, multiplier) for a raw unit string."""
    try:
        return _UNIT_TABLE[unit.strip().lower()]
    except KeyError:
        raise IngestError(f"unknown unit {unit!r}") from None


def normalize_quantity(value: float, unit: str) -> QuantityValue:
    """Convert a raw (value, unit) pair into canonical SI units."""
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise IngestError(f"value {value!r} is not a number")
    if not math.isfinite(value):
        raise IngestError(f"value {value!r} is not finite (unit {unit!r})")
    try:
        canonical, factor = _UNIT_TABLE[unit.strip().lower()]
    except KeyError:
        raise IngestError(f"unknown unit {unit!r} for value {value!r}") from None
    return QuantityValue(float(value) * factor, canonical)


# ---------------------------------------------------------------------------
# Prompt construction

_PROMPT_PLACEHOLDER = "{{DOCUMENTATION}}"
_CLOSE_TAG = "</documentation>"


def prompt_template() -> str:
    return (resources.files("windtwin") / "assets" / "extraction_prompt.txt").read_text("utf-8")


def build_prompt(document_text: str) -> tuple[str, list[str]]:
    """Fill the extraction prompt template with a document.

    Returns (prompt, warnings).  A document containing the literal closing
    tag of the documentation block would let its own text escape the block,
    so the tag is defused with a backslash and a warning is recorded.
    """
    if not document_text or not document_text.strip():
        raise IngestError("document text is empty")
    warnings = []
    body = document_text
    if _CLOSE_TAG in body:
        body = body.replace(_CLOSE_TAG, "<\\/documentation>")
        warnings.append(
            f"document contains the literal tag {_CLOSE_TAG!r}; escaped it inside "
            "the documentation block")
    template = prompt_template()
    if _PROMPT_PLACEHOLDER not in template:
        raise IngestError("prompt template is missing the documentation placeholder")
    return template.replace(_PROMPT_PLACEHOLDER, body), warnings


# ---------------------------------------------------------------------------
# Payload parsing

_FENCE = re.compile(r"```[A-Za-z0-9_-]*\r?\n(.*?)```", re.DOTALL)


def _strip_fences(raw_text: str) -> str:
    m = _FENCE.search(raw_text)
    return m.group(1) if m else raw_text


def _string(obj: dict, key: str, where: str, required: bool = False) -> str | None:
    value = obj.get(key)
    if value is None:
        if required:
            raise IngestError(f"{where}: missing required field {key!r}")
        return None
    if not isinstance(value, str):
        raise IngestError(f"{where}: field {key!r} must be a string, got {value!r}")
    return value


def _warn_unknown(obj: dict, known: set, where: str, warnings: list) -> None:
    for key in obj:
        if key not in known:
            warnings.append(f"{where}: ignoring unknown field {key!r}")


def parse_extraction(raw_text: str) -> tuple[ExtractionDocument, list[str]]:
    """Parse a raw extraction payload (possibly inside code fences).

    Validates the id patterns, category vocabulary, and component linkage.
    Unknown fields are ignored with a warning; missing optional fields are
    allowed.  Returns (document, warnings).
    """
    warnings: list[str] = []
    try:
        payload = json.loads(_strip_fences(raw_text))
    except json.JSONDecodeError as exc:
        raise IngestError(f"extraction is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise IngestError("extraction must be a JSON object")
    _warn_unknown(
        payload,
        {"document_metadata", "project_components", "project_constraints",
         "governing_entities"},
        "extraction", warnings)

    meta_obj = payload.get("document_metadata")
    if not isinstance(meta_obj, dict):
        raise IngestError("extraction is missing the document_metadata object")
    _warn_unknown(meta_obj, {"title", "project_name", "project_location"},
                  "document_metadata", warnings)
    metadata = DocumentMetadata(
        title=_string(meta_obj, "title", "document_metadata"),
        project_name=_string(meta_obj, "project_name", "document_metadata"),
        project_location=_string(meta_obj, "project_location", "document_metadata"),
    )

    components = []
    for obj in _array(payload, "project_components"):
        where = obj.get("component_id", "project_components entry")
        _warn_unknown(
            obj,
            {"component_id", "component_name", "component_acronym", "description",
             "source_section_number"},
            str(where), warnings)
        components.append(ProjectComponent(
            component_id=_string(obj, "component_id", str(where), required=True),
            name=_string(obj, "component_name", str(where), required=True),
            acronym=_string(obj, "component_acronym", str(where)),
            description=_string(obj, "description", str(where)),
            source_section=_section(obj, str(where)),
        ))

    constraints = []
    for obj in _array(payload, "project_constraints"):
        where = obj.get("constraint_id", "project_constraints entry")
        _warn_unknown(
            obj,
            {"constraint_id", "linked_component_id", "category", "description",
             "value", "unit", "source_section_number", "geographic_scope",
             "context_quote"},
            str(where), warnings)
        constraints.append(ConstraintSnippet(
            constraint_id=_string(obj, "constraint_id", str(where), required=True),
            linked_component_id=_string(obj, "linked_component_id", str(where),
                                        required=True),
            category=_string(obj, "category", str(where), required=True),
            description=_string(obj, "description", str(where), required=True),
            geographic_scope=_string(obj, "geographic_scope", str(where)) or "",
            context_quote=_string(obj, "context_quote", str(where), required=True),
            value=_number(obj, str(where), warnings),
            unit=_string(obj, "unit", str(where)),
            source_section=_section(obj, str(where)),
        ))

    entities = []
    for obj in _array(payload, "governing_entities"):
        where = obj.get("entity_id", "governing_entities entry")
        _warn_unknown(
            obj,
            {"entity_id", "entity_name", "entity_acronym", "jurisdiction",
             "role_description", "source_section_number"},
            str(where), warnings)
        entities.append(GoverningEntity(
            entity_id=_string(obj, "entity_id", str(where), required=True),
            name=_string(obj, "entity_name", str(where), required=True),
            acronym=_string(obj, "entity_acronym", str(where)),
            jurisdiction=_string(obj, "jurisdiction", str(where)),
            role=_string(obj, "role_description", str(where)),
            source_section=_section(obj, str(where)),
        ))

    doc = ExtractionDocument(
        metadata=metadata,
        components=tuple(components),
        constraints=tuple(constraints),
        entities=tuple(entities),
    )
    return doc, warnings


def _array(payload: dict, key: str) -> list[dict]:
    value = payload.get(key, [])
    if not isinstance(value, list):
        raise IngestError(f"{key} must be an array")
    for item in value:
        if not isinstance(item, dict):
            raise IngestError(f"{key} entries must be objects, got {item!r}")
    return value


def _section(obj: dict, where: str) -> str | None:
    value = obj.get("source_section_number")
    if value is None:
        return None
    # Models sometimes emit bare numbers for section 4 etc.
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return repr(value) if isinstance(value, float) else str(value)
    if not isinstance(value, str):
        raise IngestError(f"{where}: source_section_number must be a string")
    return value


def _number(obj: dict, where: str, warnings: list) -> float | None:
    value = obj.get("value")
    if value is None:
        return None
    if isinstance(value, bool):
        raise IngestError(f"{where}: value must be a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            coerced = float(value)
        except ValueError:
            raise IngestError(f"{where}: value must be a number, got {value!r}") from None
        warnings.append(f"{where}: coerced string value {value!r} to a number")
        return coerced
    raise IngestError(f"{where}: value must be a number, got {value!r}")


# ---------------------------------------------------------------------------
# Instantiation (document -> triples)

DOCUMENT_IRI = Iri(WT_NS + "Document")


def component_iri(component_id: str) -> Iri:
    return Iri(WT_NS + "Component_" + component_id)


def constraint_iri(constraint_id: str) -> Iri:
    return Iri(WT_NS + "Constraint_" + constraint_id)


def entity_iri(entity_id: str) -> Iri:
    return Iri(WT_NS + "Entity_" + entity_id)


def _component_class(name: str) -> Iri:
    lowered = name.lower()
    if "turbine" in lowered:
        return CLS_TURBINE
    if "cable" in lowered:
        return CLS_CABLE
    if "wind farm" in lowered or "windfarm" in lowered:
        return CLS_WINDFARM
    return CLS_INFRASTRUCTURE


def _scope_literal(scope: str) -> Literal:
    try:
        geo.parse_wkt(scope)
    except ParseError:
        return Literal(scope, STRING)
    return Literal(scope, WKT)


def instantiate(doc: ExtractionDocument, ontology: Ontology = DEFAULT_ONTOLOGY) -> Graph:
    """Mint triples for every snippet in the document.

    IRIs are deterministic functions of the extraction ids, so the same
    document always produces the same graph.  Every constraint starts with
    hasConflict false; reasoning may later flip it.  The result is checked
    against the ontology and violations are a hard error.
    """
    triples = []

    def emit(subject, predicate, obj):
        triples.append(Triple(subject, predicate, obj))

    meta = doc.metadata
    if meta.title is not None:
        emit(DOCUMENT_IRI, P_TITLE, Literal(meta.title, STRING))
    if meta.project_name is not None:
        emit(DOCUMENT_IRI, P_PROJECT_NAME, Literal(meta.project_name, STRING))
    if meta.project_location is not None:
        emit(DOCUMENT_IRI, P_PROJECT_LOCATION, Literal(meta.project_location, STRING))

    for comp in doc.components:
        iri = component_iri(comp.component_id)
        emit(iri, P_TYPE, _component_class(comp.name))
        emit(iri, P_NAME, Literal(comp.name, STRING))
        if comp.acronym is not None:
            emit(iri, P_ACRONYM, Literal(comp.acronym, STRING))
        if comp.description is not None:
            emit(iri, P_DESCRIPTION, Literal(comp.description, STRING))
        if comp.source_section is not None:
            emit(iri, P_SOURCE_SECTION, Literal(comp.source_section, STRING))

    for con in doc.constraints:
        iri = constraint_iri(con.constraint_id)
        emit(iri, P_TYPE, CLS_REGULATION)
        emit(iri, P_REG_DESCRIPTION, Literal(con.description, STRING))
        emit(iri, P_CATEGORY, Literal(con.category, STRING))
        emit(iri, P_APPLIES_TO, component_iri(con.linked_component_id))
        emit(iri, P_CONFLICT, Literal("false", BOOLEAN))
        if con.geographic_scope:
            emit(iri, P_IMPACT_AREA, _scope_literal(con.geographic_scope))
        if con.value is not None:
            try:
                quantity = normalize_quantity(con.value, con.unit)
                emit(iri, P_IMPACT_VALUE, double_literal(quantity.magnitude))
                emit(iri, P_IMPACT_UNIT, Literal(quantity.unit, STRING))
            except IngestError:
                # Unit outside the conversion table: keep the raw value so
                # nothing is lost; compile_rules will warn about it.
                emit(iri, P_IMPACT_VALUE, double_literal(con.value))
                emit(iri, P_IMPACT_UNIT, Literal(con.unit, STRING))
        if con.source_section is not None:
            emit(iri, P_SOURCE_SECTION, Literal(con.source_section, STRING))

    for ent in doc.entities:
        iri = entity_iri(ent.entity_id)
        emit(iri, P_TYPE, CLS_GOVERNING_ENTITY)
        emit(iri, P_NAME, Literal(ent.name, STRING))
        if ent.acronym is not None:
            emit(iri, P_ACRONYM, Literal(ent.acronym, STRING))
        if ent.jurisdiction is not None:
            emit(iri, P_JURISDICTION, Literal(ent.jurisdiction, STRING))
        if ent.role is not None:
            emit(iri, P_ROLE, Literal(ent.role, STRING))
        if ent.source_section is not None:
            emit(iri, P_SOURCE_SECTION, Literal(ent.source_section, STRING))

    graph = Graph(frozenset(triples))
    violations = validate(graph, ontology)
    if violations:
        details = "; ".join(str(v) for v in violations)
        raise IngestError(f"instantiated graph violates the ontology: {details}")
    return graph


# ---------------------------------------------------------------------------
# Rule compilation (constraints -> executable rules)


@dataclass(frozen=True)
class CompiledRules:
    """Executable rules plus the constraints that could not be compiled."""

    ruleset: RuleSet
    annotations: Graph
    warnings: tuple[str, ...]


def load_gazetteer(path: str | Path) -> dict[str, geo.Geometry]:
    """Load a named-geometry table: one `name<TAB>WKT` pair per line."""
    table: dict[str, geo.Geometry] = {}
    text = Path(path).read_text("utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        name, sep, wkt = stripped.partition("\t")
        name = name.strip()
        if not sep or not name or not wkt.strip():
            raise IngestError(f"gazetteer line {lineno}: expected name<TAB>WKT")
        if name in table:
            raise IngestError(f"gazetteer line {lineno}: duplicate name {name!r}")
        try:
            table[name] = geo.parse_wkt(wkt.strip())
        except ParseError as exc:
            raise IngestError(f"gazetteer line {lineno}: {exc}") from exc
    return table


def _resolve_scope(scope: str, gazetteer) -> geo.Geometry | None:
    if not scope:
        return None
    try:
        return geo.parse_wkt(scope)
    except ParseError:
        pass
    if gazetteer:
        return gazetteer.get(scope) or gazetteer.get(scope.strip())
    return None


def _wkt_arg(geometry: geo.Geometry) -> Literal:
    return Literal(geo.serialize_wkt(geometry), WKT)


_TRUE = Literal("true", BOOLEAN)

# Threshold direction cues for operational limits.  "not exceed 25 m/s" is a
# maximum, so the violation guard is greaterThan; minimums get lessThan.
_MIN_CUES = ("at least", "minimum", "no less", "not fall below", "below which")
_TURBINE_PROPERTIES = (
    (("wind speed", "wind-speed", "windspeed"), P_WINDSPEED),
)


def _conflict_head(subject: Var, iri: Iri) -> tuple[TriplePattern, TriplePattern]:
    return (
        TriplePattern(subject, P_CONFLICT, _TRUE),
        TriplePattern(subject, P_VIOLATES, iri),
    )


def _spacing_rule(con: ConstraintSnippet, meters: float) -> Rule:
    a, b, ga, gb = Var("a"), Var("b"), Var("ga"), Var("gb")
    return Rule(
        name=con.constraint_id,
        body=(
            TriplePattern(a, P_TYPE, CLS_TURBINE),
            TriplePattern(a, P_GEOMETRY, ga),
            TriplePattern(b, P_TYPE, CLS_TURBINE),
            TriplePattern(b, P_GEOMETRY, gb),
            BuiltinCall("notEqual", (a, b)),
            BuiltinCall("withinDistance", (ga, gb, double_literal(meters))),
        ),
        head=_conflict_head(a, constraint_iri(con.constraint_id)),
    )


def _buffer_rule(con: ConstraintSnippet, geometry: geo.Geometry, meters: float) -> Rule:
    x, g = Var("x"), Var("g")
    return Rule(
        name=con.constraint_id,
        body=(
            TriplePattern(x, P_TYPE, CLS_INFRASTRUCTURE),
            TriplePattern(x, P_GEOMETRY, g),
            BuiltinCall("withinDistance", (g, _wkt_arg(geometry), double_literal(meters))),
        ),
        head=_conflict_head(x, constraint_iri(con.constraint_id)),
    )


def _exclusion_rule(con: ConstraintSnippet, geometry: geo.Geometry) -> Rule:
    x, g = Var("x"), Var("g")
    return Rule(
        name=con.constraint_id,
        body=(
            TriplePattern(x, P_TYPE, CLS_INFRASTRUCTURE),
            TriplePattern(x, P_GEOMETRY, g),
            BuiltinCall("intersects", (g, _wkt_arg(geometry))),
        ),
        head=_conflict_head(x, constraint_iri(con.constraint_id)),
    )


def _threshold_rule(con: ConstraintSnippet, prop: Iri, guard: str, limit: float) -> Rule:
    t, v = Var("t"), Var("v")
    return Rule(
        name=con.constraint_id,
        body=(
            TriplePattern(t, P_TYPE, CLS_TURBINE),
            TriplePattern(t, prop, v),
            BuiltinCall(guard, (v, double_literal(limit))),
        ),
        head=_conflict_head(t, constraint_iri(con.constraint_id)),
    )


def compile_rules(doc: ExtractionDocument, gazetteer=None) -> CompiledRules:
    """Lower constraints onto executable rule templates.

    Template ladder, first match wins:

    1. spacing: a Design Specification length mentioning spacing becomes a
       pairwise turbine rule.  The requirement is a minimum separation, so
       the violation guard is withinDistance at the extracted threshold.
    2. buffer: a length plus a resolvable scope geometry becomes a
       withinDistance rule around that geometry.
    3. exclusion: a valueless polygon scope becomes an intersects rule.
    4. operational threshold: an Operational Parameter speed limit on a
       turbine property becomes a greaterThan/lessThan guard.
    5. anything else becomes an annotation triple plus a warning.

    geographic_scope strings are used directly when they parse as WKT and
    otherwise looked up in the gazetteer (a name -> geometry mapping).
    """
    rules = []
    annotations = []
    warnings = []

    def annotate(con: ConstraintSnippet, reason: str) -> None:
        annotations.append(Triple(
            constraint_iri(con.constraint_id), P_ANNOTATION,
            Literal(f"not compiled to an executable rule: {reason}", STRING)))
        warnings.append(f"{con.constraint_id}: {reason}")

    for con in doc.constraints:
        quantity = None
        if con.value is not None:
            try:
                quantity = normalize_quantity(con.value, con.unit)
            except IngestError:
                annotate(con, f"unit {con.unit!r} is not in the conversion table")
                continue

        lowered = con.description.lower()
        if (quantity is not None and quantity.unit == "m"
                and con.category == "Design Specification" and "spacing" in lowered):
            rules.append(_spacing_rule(con, quantity.magnitude))
            continue

        geometry = _resolve_scope(con.geographic_scope, gazetteer)
        if quantity is not None and quantity.unit == "m":
            if geometry is not None:
                rules.append(_buffer_rule(con, geometry, quantity.magnitude))
                continue
            annotate(con, f"geographic scope {con.geographic_scope!r} does not "
                          "resolve to a geometry")
            continue

        if quantity is None and isinstance(geometry, geo.Polygon):
            rules.append(_exclusion_rule(con, geometry))
            continue

        if quantity is not None and con.category == "Operational Parameter":
            prop = None
            for cues, candidate in _TURBINE_PROPERTIES:
                if any(cue in lowered for cue in cues):
                    prop = candidate
                    break
            if prop is not None:
                guard = "lessThan" if any(c in lowered for c in _MIN_CUES) else "greaterThan"
                rules.append(_threshold_rule(con, prop, guard, quantity.magnitude))
                continue

        annotate(con, "no executable rule template matches")

    return CompiledRules(
        ruleset=RuleSet(tuple(rules)),
        annotations=Graph(frozenset(annotations)),
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# Attribute/constraint partition


def split(doc: ExtractionDocument) -> tuple[list[AttributeSnippet], list[ConstraintSnippet]]:
    """Partition a document into attribute statements and spatial constraints.

    Constraints carrying both a value and a geographic scope drive rule
    compilation; everything else (components and the remaining constraints)
    is entity-level attribute data.
    """
    attributes = []
    spatial = []
    for comp in doc.components:
        attributes.append(AttributeSnippet(comp.component_id, "hasName", comp.name))
        if comp.acronym is not None:
            attributes.append(AttributeSnippet(comp.component_id, "hasAcronym", comp.acronym))
        if comp.description is not None:
            attributes.append(
                AttributeSnippet(comp.component_id, "hasDescription", comp.description))
    for con in doc.constraints:
        if con.value is not None and con.geographic_scope:
            spatial.append(con)
        elif con.value is not None:
            try:
                value = normalize_quantity(con.value, con.unit)
            except IngestError:
                value = f"{con.value} {con.unit}"
            attributes.append(
                AttributeSnippet(con.constraint_id, "hasImpactValue", value))
        else:
            attributes.append(
                AttributeSnippet(con.constraint_id, "hasRegulationDescription",
                                 con.description))
    return attributes, spatial


# ---------------------------------------------------------------------------
# Extraction clients


class ExtractionClient:
    """Turns (prompt, document text) into raw structured extraction text."""

    def extract(self, prompt: str, document_text: str) -> str:
        raise NotImplementedError


class ReplayExtractionClient(ExtractionClient):
    """Replays stored responses keyed by the SHA-256 of the document text."""

    def __init__(self, store_dir: str | Path):
        self.store_dir = Path(store_dir)

    @staticmethod
    def key_for(document_text: str) -> str:
        return hashlib.sha256(document_text.encode("utf-8")).hexdigest() + ".txt"

    def extract(self, prompt: str, document_text: str) -> str:
        path = self.store_dir / self.key_for(document_text)
        if not path.exists():
            raise IngestError(f"no stored extraction for this document: {path}")
        return path.read_text("utf-8")


class HttpExtractionClient(ExtractionClient):
    """Minimal chat-completion client for live extraction runs."""

    def __init__(self, endpoint: str, model: str, api_key: str | None = None,
                 timeout: float = 120.0):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout

    def extract(self, prompt: str, document_text: str) -> str:
        body = json.dumps({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        }).encode("utf-8")
        request = urllib.request.Request(
            self.endpoint, data=body, method="POST",
            headers={"Content-Type": "application/json"})
        if self.api_key:
            request.add_header("Authorization", f"Bearer {self.api_key}")
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except urllib.error.URLError as exc:
            raise IngestError(f"extraction request failed: {exc}") from exc
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise IngestError(f"unexpected extraction response shape: {payload!r}") from exc


# ---------------------------------------------------------------------------
# End-to-end pipeline


@dataclass(frozen=True)
class IngestResult:
    document: ExtractionDocument
    graph: Graph
    compiled: CompiledRules
    warnings: tuple[str, ...]


def ingest_document(document_text: str, client: ExtractionClient,
                    ontology: Ontology = DEFAULT_ONTOLOGY,
                    gazetteer=None) -> IngestResult:
    """Run the full pipeline: prompt, extract, parse, instantiate, compile."""
    prompt, warnings = build_prompt(document_text)
    raw = client.extract(prompt, document_text)
    doc, parse_warnings = parse_extraction(raw)
    graph = instantiate(doc, ontology)
    compiled = compile_rules(doc, gazetteer)
    return IngestResult(
        document=doc,
        graph=graph,
        compiled=compiled,
        warnings=tuple(warnings) + tuple(parse_warnings) + compiled.warnings,
    )
