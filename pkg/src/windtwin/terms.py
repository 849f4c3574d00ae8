"""RDF-style terms and the built-in planning vocabulary.

Everything downstream (triple graphs, rules, ingestion, simulation) speaks
in these four term kinds: IRIs, typed literals, variables (only meaningful
inside rule patterns), and triples. Identity is value-based: two literals
are the same term only when both lexical form and datatype agree.

The built-in vocabulary lives in a single namespace and covers the entities
the planning pipeline mints itself (turbines, regulations, state properties).
It is intentionally minimal; user ontologies may extend it.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import math

from . import geo
from .errors import ParseError, ValidationError

WT_NS = "http://windtwin.example/ont#"
XSD_NS = "http://www.w3.org/2001/XMLSchema#"

STRING = "string"
DOUBLE = "double"
INTEGER = "integer"
BOOLEAN = "boolean"
DATETIME = "dateTime"
WKT = "wktLiteral"

DATATYPE_TO_IRI = {
    STRING: XSD_NS + "string",
    DOUBLE: XSD_NS + "double",
    INTEGER: XSD_NS + "integer",
    BOOLEAN: XSD_NS + "boolean",
    DATETIME: XSD_NS + "dateTime",
    WKT: "http://www.opengis.net/ont/geosparql#wktLiteral",
}
IRI_TO_DATATYPE = {v: k for k, v in DATATYPE_TO_IRI.items()}

_BAD_IRI_CHARS = set(' \t\n\r<>"{}|^`\\')


@dataclass(frozen=True)
class Iri:
    """An absolute IRI. Prefixed names are resolved before construction."""

    value: str

    def __post_init__(self):
        if not self.value:
            raise ValidationError("empty IRI")
        if any(c in _BAD_IRI_CHARS for c in self.value):
            raise ValidationError(f"IRI contains forbidden character: {self.value!r}")

    def __repr__(self):
        return f"<{self.value}>"


@dataclass(frozen=True)
class Literal:
    """A typed literal. The lexical form must parse under its datatype."""

    lexical: str
    datatype: str = STRING

    def __post_init__(self):
        if self.datatype not in DATATYPE_TO_IRI:
            raise ValidationError(f"unknown datatype {self.datatype!r}")
        _check_lexical(self.lexical, self.datatype)

    def value(self):
        """The parsed Python value of this literal."""

        dt = self.datatype
        if dt == STRING:
            return self.lexical
        if dt == DOUBLE:
            return float(self.lexical)
        if dt == INTEGER:
            return int(self.lexical)
        if dt == BOOLEAN:
            return self.lexical == "true"
        if dt == DATETIME:
            return _parse_datetime(self.lexical)
        return geo.parse_wkt(self.lexical)

    def __repr__(self):
        if self.datatype == STRING:
            return f'"{self.lexical}"'
        return f'"{self.lexical}"^^{self.datatype}'


def _parse_datetime(lexical):
    return datetime.fromisoformat(lexical.replace("Z", "+00:00"))


def _check_lexical(lexical, datatype):
    if not isinstance(lexical, str):
        raise ValidationError(f"literal lexical form must be str, got {type(lexical).__name__}")
    try:
        if datatype == DOUBLE:
            if not math.isfinite(float(lexical)):
                raise ValueError("non-finite")
        elif datatype == INTEGER:
            int(lexical)
        elif datatype == BOOLEAN:
            if lexical not in ("true", "false"):
                raise ValueError("boolean lexical must be 'true' or 'false'")
        elif datatype == DATETIME:
            _parse_datetime(lexical)
        elif datatype == WKT:
            geo.parse_wkt(lexical)
    except (ValueError, ParseError) as exc:
        raise ValidationError(f"invalid {datatype} literal {lexical!r}: {exc}") from exc


@dataclass(frozen=True)
class Var:
    """A rule/pattern variable, written ?name in rule text."""

    name: str

    def __post_init__(self):
        if not self.name or not self.name.replace("_", "a").isalnum():
            raise ValidationError(f"bad variable name {self.name!r}")

    def __repr__(self):
        return f"?{self.name}"


@dataclass(frozen=True)
class Triple:
    subject: Iri
    predicate: Iri
    object: "Iri | Literal"

    def __post_init__(self):
        if not isinstance(self.subject, Iri):
            raise ValidationError(f"triple subject must be an IRI, got {self.subject!r}")
        if not isinstance(self.predicate, Iri):
            raise ValidationError(f"triple predicate must be an IRI, got {self.predicate!r}")
        if not isinstance(self.object, (Iri, Literal)):
            raise ValidationError(f"triple object must be an IRI or literal, got {self.object!r}")

    def __repr__(self):
        return f"({self.subject!r} {self.predicate!r} {self.object!r})"


def term_sort_key(term):
    """Total deterministic ordering over IRIs and literals (IRIs first)."""

    if isinstance(term, Iri):
        return (0, term.value, "")
    if isinstance(term, Literal):
        return (1, term.lexical, term.datatype)
    raise ValidationError(f"not a ground term: {term!r}")


def triple_sort_key(t: Triple):
    return (t.subject.value, t.predicate.value, term_sort_key(t.object))


# Literal constructors -------------------------------------------------------


def string_literal(text: str) -> Literal:
    return Literal(str(text), STRING)


def double_literal(x: float) -> Literal:
    return Literal(repr(float(x)), DOUBLE)


def integer_literal(n: int) -> Literal:
    return Literal(str(int(n)), INTEGER)


def boolean_literal(flag: bool) -> Literal:
    return Literal("true" if flag else "false", BOOLEAN)


def wkt_literal(geometry_or_text) -> Literal:
    if isinstance(geometry_or_text, geo.Geometry):
        return Literal(geo.serialize_wkt(geometry_or_text), WKT)
    return Literal(geometry_or_text, WKT)


def datetime_literal(dt: datetime) -> Literal:
    return Literal(dt.isoformat().replace("+00:00", "Z"), DATETIME)


def wt(local: str) -> Iri:
    """Mint an IRI in the built-in namespace."""

    return Iri(WT_NS + local)


# Built-in vocabulary --------------------------------------------------------

CLS_INFRASTRUCTURE = wt("Infrastructure")
CLS_WINDFARM = wt("WindFarm")
CLS_TURBINE = wt("Turbine")
CLS_CABLE = wt("Cable")
CLS_REGULATION = wt("Regulation")
CLS_EVENT = wt("Event")
CLS_GOVERNING_ENTITY = wt("GoverningEntity")
CLS_CLASS = wt("Class")

P_TYPE = wt("type")
P_SUBCLASS_OF = wt("subClassOf")
P_DOMAIN = wt("hasDomain")
P_RANGE = wt("hasRange")
P_GEOMETRY = wt("hasGeometry")
P_CONFLICT = wt("hasConflict")
P_STATUS = wt("hasTurbineStatus")
P_PITCH = wt("hasPitchAngle")
P_YAW = wt("hasYawAngle")
P_WINDSPEED = wt("hasWindSpeed")
P_REG_DESCRIPTION = wt("hasRegulationDescription")
P_IMPACT_AREA = wt("hasImpactArea")
P_IMPACT_VALUE = wt("hasImpactValue")
P_IMPACT_UNIT = wt("hasImpactUnit")
P_VIOLATES = wt("violates")
P_ANNOTATION = wt("hasAnnotation")
P_NAME = wt("hasName")
P_ACRONYM = wt("hasAcronym")
P_DESCRIPTION = wt("hasDescription")
P_JURISDICTION = wt("hasJurisdiction")
P_ROLE = wt("hasRole")
P_SOURCE_SECTION = wt("hasSourceSection")
P_CATEGORY = wt("hasCategory")
P_APPLIES_TO = wt("appliesTo")
P_TITLE = wt("hasTitle")
P_PROJECT_NAME = wt("hasProjectName")
P_PROJECT_LOCATION = wt("hasProjectLocation")

STATUS_OPERATIONAL = wt("Operational")
STATUS_PARKED = wt("Parked")

# Default prefix table used by the rule and triple parsers.
DEFAULT_PREFIXES = {
    "": WT_NS,
    "xsd": XSD_NS,
    "geo": "http://www.opengis.net/ont/geosparql#",
}
