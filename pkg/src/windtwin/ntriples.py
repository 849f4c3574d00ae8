"""Line-oriented triple serialization.

One triple per line: ``<iri> <iri> (<iri> | "literal"[^^<datatype-iri>]) .``
String literals omit the datatype suffix. Output is UTF-8, sorted by
subject, predicate, then object, so serialization is deterministic and
``parse(serialize(g)) == g`` for every graph.

Input additionally accepts blank lines, ``#`` comment lines, trailing
comments after the closing dot, ``@prefix p: <iri> .`` header lines, and
prefixed names using the declared or built-in prefixes. Output is always
fully absolute.
"""

from __future__ import annotations

from .errors import ParseError, ValidationError
from .graph import Graph
from .terms import (
    DATATYPE_TO_IRI, DEFAULT_PREFIXES, IRI_TO_DATATYPE, STRING,
    Iri, Literal, Triple,
)

_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t"}


def _escape(text: str) -> str:
    return "".join(_ESCAPES.get(c, c) for c in text)


def serialize_graph(graph: Graph) -> str:
    lines = []
    for t in graph.sorted_triples:
        lines.append(f"{_term(t.subject)} {_term(t.predicate)} {_term(t.object)} .")
    return "\n".join(lines) + ("\n" if lines else "")


def _term(term) -> str:
    if isinstance(term, Iri):
        return f"<{term.value}>"
    if isinstance(term, Literal):
        lex = f'"{_escape(term.lexical)}"'
        if term.datatype == STRING:
            return lex
        return f"{lex}^^<{DATATYPE_TO_IRI[term.datatype]}>"
    raise ValidationError(f"cannot serialize term {term!r}")


def parse_graph(text: str) -> Graph:
    """Parse the serialization format back into a Graph."""

    prefixes = dict(DEFAULT_PREFIXES)
    declared = []
    triples = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        scanner = _LineScanner(raw, lineno, prefixes)
        if line.startswith("@prefix"):
            name, base = scanner.prefix_declaration()
            prefixes[name] = base
            declared.append((name, base))
            continue
        subject = scanner.term()
        predicate = scanner.term()
        obj = scanner.term()
        scanner.dot()
        if not isinstance(subject, Iri):
            raise ParseError("subject must be an IRI", lineno, 1)
        if not isinstance(predicate, Iri):
            raise ParseError("predicate must be an IRI", lineno, 1)
        triples.append(Triple(subject, predicate, obj))
    return Graph.of(triples, prefixes=tuple(declared))


class _LineScanner:
    def __init__(self, line, lineno, prefixes):
        self.line = line
        self.lineno = lineno
        self.prefixes = prefixes
        self.pos = 0

    def _fail(self, message):
        raise ParseError(message, self.lineno, self.pos + 1)

    def _skip_ws(self):
        while self.pos < len(self.line) and self.line[self.pos] in " \t":
            self.pos += 1

    def prefix_declaration(self):
        self._skip_ws()
        if not self.line.startswith("@prefix", self.pos):
            self._fail("expected @prefix")
        self.pos += len("@prefix")
        self._skip_ws()
        start = self.pos
        while self.pos < len(self.line) and self.line[self.pos] not in ": \t":
            self.pos += 1
        name = self.line[start:self.pos]
        self._skip_ws()
        if self.pos >= len(self.line) or self.line[self.pos] != ":":
            self._fail("expected ':' in prefix declaration")
        self.pos += 1
        base = self._iri_ref()
        self.dot()
        return name, base.value

    def term(self):
        self._skip_ws()
        if self.pos >= len(self.line):
            self._fail("unexpected end of line, expected a term")
        c = self.line[self.pos]
        if c == "<":
            return self._iri_ref()
        if c == '"':
            return self._literal()
        return self._prefixed_name()

    def _iri_ref(self):
        self._skip_ws()
        if self.pos >= len(self.line) or self.line[self.pos] != "<":
            self._fail("expected '<'")
        end = self.line.find(">", self.pos + 1)
        if end < 0:
            self._fail("unterminated IRI")
        value = self.line[self.pos + 1:end]
        self.pos = end + 1
        try:
            return Iri(value)
        except ValidationError as exc:
            self._fail(str(exc))

    def _literal(self):
        start_col = self.pos
        self.pos += 1
        out = []
        while True:
            if self.pos >= len(self.line):
                raise ParseError("unterminated literal", self.lineno, start_col + 1)
            c = self.line[self.pos]
            if c == "\\":
                if self.pos + 1 >= len(self.line):
                    self._fail("dangling escape")
                esc = self.line[self.pos + 1]
                if esc not in _UNESCAPES:
                    self._fail(f"unknown escape \\{esc}")
                out.append(_UNESCAPES[esc])
                self.pos += 2
            elif c == '"':
                self.pos += 1
                break
            else:
                out.append(c)
                self.pos += 1
        lexical = "".join(out)
        datatype = STRING
        if self.line.startswith("^^", self.pos):
            self.pos += 2
            if self.pos < len(self.line) and self.line[self.pos] == "<":
                dt_iri = self._iri_ref().value
            else:
                name = self._prefixed_name()
                dt_iri = name.value
            datatype = IRI_TO_DATATYPE.get(dt_iri)
            if datatype is None:
                self._fail(f"unsupported datatype IRI <{dt_iri}>")
        try:
            return Literal(lexical, datatype)
        except ValidationError as exc:
            self._fail(str(exc))

    def _prefixed_name(self):
        self._skip_ws()
        start = self.pos
        while self.pos < len(self.line) and self.line[self.pos] not in " \t<\">":
            self.pos += 1
        token = self.line[start:self.pos]
        if token.endswith("."):
            token = token[:-1]
            self.pos -= 1
        if ":" not in token:
            self.pos = start
            self._fail(f"expected a term, got {token!r}")
        prefix, _, local = token.partition(":")
        base = self.prefixes.get(prefix)
        if base is None:
            self.pos = start
            self._fail(f"undeclared prefix {prefix!r}")
        try:
            return Iri(base + local)
        except ValidationError as exc:
            self._fail(str(exc))

    def dot(self):
        self._skip_ws()
        if self.pos >= len(self.line) or self.line[self.pos] != ".":
            self._fail("expected '.' terminator")
        self.pos += 1
        self._skip_ws()
        rest = self.line[self.pos:]
        if rest and not rest.startswith("#"):
            self._fail(f"trailing input {rest!r}")
