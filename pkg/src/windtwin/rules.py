"""Spatial rule language: parsing, forward chaining, and explanation.

Rules follow the bracketed Horn-clause form

    [name: (body triple patterns...) guards... -> (head triple patterns...)]

where guards are calls to a fixed registry of built-in predicates
(distance, containment, and comparison checks). Built-ins are pure guards:
they can only test values bound by body triple patterns, never bind new
ones, so every rule is range-restricted and reasoning is monotone.

``reason`` computes the least fixpoint by forward chaining; because rules
only ever add triples built from terms already present in the rule or
graph, the fixpoint exists, is finite, and does not depend on rule order.
Each derived triple remembers its first derivation, which ``explain``
unwinds into a base-facts-first trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import geo
from .errors import EvaluationError, ParseError, ValidationError
from .terms import (
    BOOLEAN, DATETIME, DOUBLE, INTEGER, STRING, WKT,
    DATATYPE_TO_IRI, DEFAULT_PREFIXES, IRI_TO_DATATYPE,
    Iri, Literal, Triple, Var, term_sort_key,
)
from .graph import Graph

BUILTIN_ARITY = {
    "withinDistance": 3,
    "distanceGreaterThan": 3,
    "intersects": 2,
    "contains": 2,
    "lessThan": 2,
    "greaterThan": 2,
    "equal": 2,
    "notEqual": 2,
}


@dataclass(frozen=True)
class TriplePattern:
    subject: "Iri | Literal | Var"
    predicate: "Iri | Var"
    object: "Iri | Literal | Var"

    def __post_init__(self):
        if not isinstance(self.subject, (Iri, Var)):
            raise ValidationError(f"pattern subject must be IRI or variable: {self.subject!r}")
        if not isinstance(self.predicate, (Iri, Var)):
            raise ValidationError(f"pattern predicate must be IRI or variable: {self.predicate!r}")
        if not isinstance(self.object, (Iri, Literal, Var)):
            raise ValidationError(f"pattern object must be a term or variable: {self.object!r}")

    def variables(self):
        return {t.name for t in (self.subject, self.predicate, self.object)
                if isinstance(t, Var)}


@dataclass(frozen=True)
class BuiltinCall:
    name: str
    args: tuple

    def __post_init__(self):
        arity = BUILTIN_ARITY.get(self.name)
        if arity is None:
            raise ValidationError(f"unknown built-in {self.name!r}")
        if len(self.args) != arity:
            raise ValidationError(
                f"built-in {self.name} expects {arity} args, got {len(self.args)}")

    def variables(self):
        return {t.name for t in self.args if isinstance(t, Var)}


@dataclass(frozen=True)
class Rule:
    name: str
    body: tuple
    head: tuple[TriplePattern, ...]

    def __post_init__(self):
        if not self.name:
            raise ValidationError("rule needs a name")
        patterns = [b for b in self.body if isinstance(b, TriplePattern)]
        if not patterns:
            raise ValidationError(f"rule {self.name}: body needs at least one triple pattern")
        if not self.head:
            raise ValidationError(f"rule {self.name}: head is empty")
        bound = set().union(*(p.variables() for p in patterns))
        for h in self.head:
            loose = h.variables() - bound
            if loose:
                raise ValidationError(
                    f"rule {self.name}: head variable(s) {sorted(loose)} "
                    "not bound by any body triple pattern")
        for b in self.body:
            if isinstance(b, BuiltinCall):
                loose = b.variables() - bound
                if loose:
                    raise ValidationError(
                        f"rule {self.name}: built-in {b.name} uses variable(s) "
                        f"{sorted(loose)} not bound by any body triple pattern")


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...] = ()

    def __post_init__(self):
        names = [r.name for r in self.rules]
        if len(names) != len(set(names)):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValidationError(f"duplicate rule name(s): {dupes}")

    def __iter__(self):
        return iter(self.rules)

    def __len__(self):
        return len(self.rules)


EMPTY_RULESET = RuleSet()


# ---------------------------------------------------------------------------
# Parsing


def parse_rules(text: str, prefixes=None) -> RuleSet:
    """Parse rule text into a RuleSet.

    ``#`` starts a comment through end of line. Terms may be written as
    ``<absolute-iri>``, prefixed names (built-in prefixes plus any passed
    in), ``?variables``, quoted literals with optional ``^^datatype``, or
    bare integer/decimal numbers.
    """

    table = dict(DEFAULT_PREFIXES)
    if prefixes:
        table.update(prefixes)
    tokens = _lex(text)
    parser = _RuleParser(tokens, table)
    return parser.ruleset()


@dataclass(frozen=True)
class _Token:
    kind: str
    value: str
    line: int
    column: int


_PUNCT = {"[": "LBRACKET", "]": "RBRACKET", "(": "LPAREN", ")": "RPAREN",
          ",": "COMMA", ":": "COLON"}
_NAME_CHARS = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-.")


def _lex(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(text)

    def tok(kind, value, width):
        tokens.append(_Token(kind, value, line, col))
        return width

    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c == "-" and text.startswith("->", i):
            i += tok("ARROW", "->", 2)
            col += 2
            continue
        if c in _PUNCT and c != ":":
            i += tok(_PUNCT[c], c, 1)
            col += 1
            continue
        if c == "<":
            end = text.find(">", i + 1)
            if end < 0 or "\n" in text[i:end]:
                raise ParseError("unterminated IRI", line, col)
            i_new = end + 1
            width = i_new - i
            tok("IRIREF", text[i + 1:end], width)
            i = i_new
            col += width
            continue
        if c == "?":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            if j == i + 1:
                raise ParseError("expected variable name after '?'", line, col)
            width = j - i
            tok("VAR", text[i + 1:j], width)
            i = j
            col += width
            continue
        if c == '"':
            j = i + 1
            out = []
            while True:
                if j >= n or text[j] == "\n":
                    raise ParseError("unterminated literal", line, col)
                if text[j] == "\\":
                    if j + 1 >= n:
                        raise ParseError("dangling escape", line, col)
                    esc = text[j + 1]
                    mapped = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t"}.get(esc)
                    if mapped is None:
                        raise ParseError(f"unknown escape \\{esc}", line, col)
                    out.append(mapped)
                    j += 2
                elif text[j] == '"':
                    j += 1
                    break
                else:
                    out.append(text[j])
                    j += 1
            width = j - i
            tok("STRING", "".join(out), width)
            i = j
            col += width
            continue
        if text.startswith("^^", i):
            i += tok("HATHAT", "^^", 2)
            col += 2
            continue
        if c.isdigit() or (c in "+-" and i + 1 < n and (text[i + 1].isdigit() or text[i + 1] == ".")):
            j = i + 1
            while j < n and (text[j].isdigit() or text[j] in ".eE"
                             or (text[j] in "+-" and text[j - 1] in "eE")):
                j += 1
            width = j - i
            tok("NUMBER", text[i:j], width)
            i = j
            col += width
            continue
        if c == ":":
            # default-prefixed name when a local part follows, else COLON
            j = i + 1
            if j < n and text[j] in _NAME_CHARS:
                while j < n and text[j] in _NAME_CHARS:
                    j += 1
                width = j - i
                tok("PNAME", text[i:j], width)
                i = j
                col += width
            else:
                i += tok("COLON", ":", 1)
                col += 1
            continue
        if c in _NAME_CHARS:
            j = i
            while j < n and text[j] in _NAME_CHARS:
                j += 1
            # a ':' glued to a following local part makes a prefixed name;
            # a ':' followed by anything else belongs to the rule header
            if j + 1 < n and text[j] == ":" and text[j + 1] in _NAME_CHARS:
                k = j + 1
                while k < n and text[k] in _NAME_CHARS:
                    k += 1
                width = k - i
                tok("PNAME", text[i:k], width)
                i = k
                col += width
                continue
            width = j - i
            tok("NAME", text[i:j], width)
            i = j
            col += width
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    tokens.append(_Token("EOF", "", line, col))
    return tokens


class _RuleParser:
    def __init__(self, tokens, prefixes):
        self.tokens = tokens
        self.prefixes = prefixes
        self.pos = 0

    def _peek(self):
        return self.tokens[self.pos]

    def _next(self):
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def _fail(self, message, token=None):
        token = token or self._peek()
        raise ParseError(message, token.line, token.column)

    def _expect(self, kind):
        t = self._next()
        if t.kind != kind:
            self._fail(f"expected {kind}, got {t.kind} {t.value!r}", t)
        return t

    def ruleset(self) -> RuleSet:
        rules = []
        while self._peek().kind != "EOF":
            rules.append(self.rule())
        try:
            return RuleSet(tuple(rules))
        except ValidationError as exc:
            raise ParseError(str(exc)) from exc

    def rule(self) -> Rule:
        start = self._expect("LBRACKET")
        name_tok = self._next()
        if name_tok.kind not in ("NAME", "NUMBER"):
            self._fail(f"expected rule name, got {name_tok.value!r}", name_tok)
        self._expect("COLON")
        body = []
        while self._peek().kind != "ARROW":
            if self._peek().kind == "EOF":
                self._fail("unterminated rule (missing '->')", start)
            body.append(self.body_item())
        self._expect("ARROW")
        head = []
        while self._peek().kind != "RBRACKET":
            if self._peek().kind == "EOF":
                self._fail("unterminated rule (missing ']')", start)
            item = self.body_item()
            if not isinstance(item, TriplePattern):
                self._fail(f"rule {name_tok.value}: head may only contain triple patterns",
                           start)
            head.append(item)
        self._expect("RBRACKET")
        try:
            return Rule(name_tok.value, tuple(body), tuple(head))
        except ValidationError as exc:
            raise ParseError(str(exc), start.line, start.column) from exc

    def body_item(self):
        t = self._peek()
        if t.kind == "LPAREN":
            return self.triple_pattern()
        if t.kind == "NAME":
            return self.builtin_call()
        self._fail(f"expected '(' or built-in name, got {t.value!r}")

    def triple_pattern(self) -> TriplePattern:
        start = self._expect("LPAREN")
        s = self.term()
        p = self.term()
        o = self.term()
        self._expect("RPAREN")
        try:
            return TriplePattern(s, p, o)
        except ValidationError as exc:
            raise ParseError(str(exc), start.line, start.column) from exc

    def builtin_call(self) -> BuiltinCall:
        name_tok = self._expect("NAME")
        self._expect("LPAREN")
        args = [self.term()]
        while self._peek().kind == "COMMA":
            self._next()
            args.append(self.term())
        self._expect("RPAREN")
        try:
            return BuiltinCall(name_tok.value, tuple(args))
        except ValidationError as exc:
            raise ParseError(str(exc), name_tok.line, name_tok.column) from exc

    def term(self):
        t = self._next()
        if t.kind == "VAR":
            return Var(t.value)
        if t.kind == "IRIREF":
            try:
                return Iri(t.value)
            except ValidationError as exc:
                raise ParseError(str(exc), t.line, t.column) from exc
        if t.kind == "PNAME":
            prefix, _, local = t.value.partition(":")
            base = self.prefixes.get(prefix)
            if base is None:
                self._fail(f"undeclared prefix {prefix!r}", t)
            return Iri(base + local)
        if t.kind == "NUMBER":
            datatype = INTEGER if _is_integer_lexical(t.value) else DOUBLE
            try:
                return Literal(t.value, datatype)
            except ValidationError as exc:
                raise ParseError(str(exc), t.line, t.column) from exc
        if t.kind == "STRING":
            datatype = STRING
            if self._peek().kind == "HATHAT":
                self._next()
                dt_term = self.term()
                if not isinstance(dt_term, Iri):
                    self._fail("datatype must be an IRI", t)
                datatype = IRI_TO_DATATYPE.get(dt_term.value)
                if datatype is None:
                    self._fail(f"unsupported datatype IRI <{dt_term.value}>", t)
            try:
                return Literal(t.value, datatype)
            except ValidationError as exc:
                raise ParseError(str(exc), t.line, t.column) from exc
        self._fail(f"expected a term, got {t.kind} {t.value!r}", t)


def _is_integer_lexical(text: str) -> bool:
    body = text[1:] if text[:1] in "+-" else text
    return body.isdigit()


def serialize_rules(ruleset: RuleSet, prefixes=None) -> str:
    """Render a RuleSet in the rule syntax; parseable back to equal rules."""

    table = dict(DEFAULT_PREFIXES)
    if prefixes:
        table.update(prefixes)
    by_length = sorted(table.items(), key=lambda kv: -len(kv[1]))

    def iri(term):
        for prefix, base in by_length:
            if term.value.startswith(base):
                local = term.value[len(base):]
                if local and all(c in _NAME_CHARS for c in local):
                    return f"{prefix}:{local}"
        return f"<{term.value}>"

    def render(term):
        if isinstance(term, Var):
            return f"?{term.name}"
        if isinstance(term, Iri):
            return iri(term)
        # bare numbers only when reparsing recovers the same datatype
        if term.datatype == INTEGER and _is_integer_lexical(term.lexical):
            return term.lexical
        if term.datatype == DOUBLE and _plain_number(term.lexical) \
                and not _is_integer_lexical(term.lexical):
            return term.lexical
        lex = term.lexical.replace("\\", "\\\\").replace('"', '\\"') \
                          .replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t")
        if term.datatype == STRING:
            return f'"{lex}"'
        return f'"{lex}"^^<{DATATYPE_TO_IRI[term.datatype]}>'

    def pattern(p):
        return f"({render(p.subject)} {render(p.predicate)} {render(p.object)})"

    lines = []
    for rule in ruleset:
        parts = []
        for item in rule.body:
            if isinstance(item, TriplePattern):
                parts.append(pattern(item))
            else:
                parts.append(f"{item.name}({', '.join(render(a) for a in item.args)})")
        head = " ".join(pattern(h) for h in rule.head)
        lines.append(f"[{rule.name}: {' '.join(parts)} -> {head}]")
    return "\n".join(lines) + ("\n" if lines else "")


def _plain_number(lexical: str) -> bool:
    body = lexical[1:] if lexical[:1] in "+-" else lexical
    return bool(body) and all(c.isdigit() or c in ".eE+-" for c in body) \
        and body[0].isdigit()


# ---------------------------------------------------------------------------
# Built-in evaluation


def _geometry_arg(builtin, term):
    if isinstance(term, Literal) and term.datatype in (WKT, STRING):
        try:
            return geo.parse_wkt(term.lexical)
        except ParseError as exc:
            raise EvaluationError(
                f"{builtin}: malformed WKT {term.lexical!r}: {exc}") from exc
    raise EvaluationError(f"{builtin}: expected a WKT literal, got {term!r}")


def _numeric_arg(builtin, term):
    if isinstance(term, Literal) and term.datatype in (INTEGER, DOUBLE):
        return term.value()
    raise EvaluationError(f"{builtin}: expected a numeric literal, got {term!r}")


def _equal_terms(builtin, a, b):
    if isinstance(a, Iri) or isinstance(b, Iri):
        return a == b
    numeric = (INTEGER, DOUBLE)
    if a.datatype in numeric and b.datatype in numeric:
        return a.value() == b.value()
    if (a.datatype in numeric) != (b.datatype in numeric):
        if STRING in (a.datatype, b.datatype):
            raise EvaluationError(
                f"{builtin}: cannot compare number with string "
                f"({a!r} vs {b!r})")
        return False
    return (a.lexical, a.datatype) == (b.lexical, b.datatype)


def evaluate_builtin(call: BuiltinCall, args) -> bool:
    """Evaluate one built-in over ground terms. Raises EvaluationError."""

    name = call.name
    if name == "withinDistance":
        a = _geometry_arg(name, args[0])
        b = _geometry_arg(name, args[1])
        return geo.within_distance(a, b, _numeric_arg(name, args[2]))
    if name == "distanceGreaterThan":
        a = _geometry_arg(name, args[0])
        b = _geometry_arg(name, args[1])
        return geo.min_distance_m(a, b) > _numeric_arg(name, args[2])
    if name == "intersects":
        return geo.intersects(_geometry_arg(name, args[0]),
                              _geometry_arg(name, args[1]))
    if name == "contains":
        a = _geometry_arg(name, args[0])
        b = _geometry_arg(name, args[1])
        if not isinstance(a, geo.Polygon) or not isinstance(b, geo.Point):
            raise EvaluationError("contains: expected (polygon, point)")
        return geo.contains(a, b)
    if name == "lessThan":
        return _numeric_arg(name, args[0]) < _numeric_arg(name, args[1])
    if name == "greaterThan":
        return _numeric_arg(name, args[0]) > _numeric_arg(name, args[1])
    if name == "equal":
        return _equal_terms(name, args[0], args[1])
    if name == "notEqual":
        return not _equal_terms(name, args[0], args[1])
    raise EvaluationError(f"unknown built-in {name!r}")


# ---------------------------------------------------------------------------
# Forward chaining


@dataclass(frozen=True)
class DerivationStep:
    """One rule application: ``conclusion`` follows from ``premises``."""

    conclusion: Triple
    rule: str
    bindings: tuple[tuple[str, "Iri | Literal"], ...]
    premises: tuple[Triple, ...]


def reason(graph: Graph, ruleset: RuleSet) -> Graph:
    """Forward-chain ``ruleset`` over ``graph`` to the least fixpoint.

    Returns a graph containing the input triples plus every derivable
    triple. The result is independent of rule order and iteration detail;
    with an empty ruleset the input graph is returned unchanged. Built-in
    evaluation failures abort with an EvaluationError naming the rule and
    the binding under evaluation.
    """

    if not len(ruleset):
        return graph
    derivations = {}
    current = graph
    while True:
        added = []
        for rule in ruleset:
            for bound, premises in _body_matches(current, rule):
                for pattern in rule.head:
                    t = _instantiate(pattern, bound, rule.name)
                    if t in current or any(t == a for a in added):
                        continue
                    added.append(t)
                    derivations[t] = DerivationStep(
                        t, rule.name,
                        tuple(sorted(bound.items())),
                        tuple(premises),
                    )
        if not added:
            break
        current = current.insert_all(added)
    if current is graph:
        return graph
    object.__setattr__(current, "_derivations", derivations)
    return current


def _body_matches(current: Graph, rule: Rule):
    """Yield (bindings, premise triples) for every body match, in a
    deterministic order."""

    patterns = [b for b in rule.body if isinstance(b, TriplePattern)]
    guards = [b for b in rule.body if isinstance(b, BuiltinCall)]
    states = [({}, [])]
    for pattern in patterns:
        next_states = []
        for bound, premises in states:
            resolved = tuple(_resolve(term, bound) for term in
                             (pattern.subject, pattern.predicate, pattern.object))
            for extra in current.match(resolved):
                merged = dict(bound)
                merged.update(extra)
                premise = Triple(*(_resolve(term, merged) for term in
                                   (pattern.subject, pattern.predicate, pattern.object)))
                next_states.append((merged, premises + [premise]))
        states = next_states
        if not states:
            return
    for bound, premises in states:
        ok = True
        for guard in guards:
            args = [_resolve(a, bound) for a in guard.args]
            try:
                result = evaluate_builtin(guard, args)
            except EvaluationError as exc:
                binding_text = ", ".join(
                    f"?{k}={v!r}" for k, v in sorted(bound.items()))
                raise EvaluationError(
                    f"rule {rule.name} [{binding_text}]: {exc}") from exc
            if not result:
                ok = False
                break
        if ok:
            yield bound, premises


def _resolve(term, bound):
    if isinstance(term, Var):
        return bound.get(term.name, term)
    return term


def _instantiate(pattern: TriplePattern, bound, rule_name) -> Triple:
    parts = []
    for term in (pattern.subject, pattern.predicate, pattern.object):
        value = _resolve(term, bound)
        if isinstance(value, Var):
            raise EvaluationError(f"rule {rule_name}: unbound head variable ?{value.name}")
        parts.append(value)
    try:
        return Triple(*parts)
    except ValidationError as exc:
        raise EvaluationError(f"rule {rule_name}: cannot assert {parts!r}: {exc}") from exc


def explain(graph_star: Graph, triple: Triple) -> list[DerivationStep]:
    """Derivation trace for ``triple`` in a graph returned by ``reason``.

    Base facts yield an empty list. Derived facts yield the steps of one
    complete derivation ordered premises-first, ending with the step that
    concluded ``triple``. Asking about a triple not in the graph is an
    error.
    """

    if triple not in graph_star:
        raise EvaluationError(f"triple not in graph: {triple!r}")
    derivations = getattr(graph_star, "_derivations", {})
    steps = []
    seen = set()

    def visit(t):
        step = derivations.get(t)
        if step is None or t in seen:
            return
        seen.add(t)
        for premise in step.premises:
            visit(premise)
        steps.append(step)

    visit(triple)
    return steps
