"""Exception hierarchy shared by all windtwin modules."""


class WindtwinError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(WindtwinError):
    """Syntax error in a textual input (triples, rules, WKT, track files).

    Carries the position where scanning failed so callers can point at
    the offending input.
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", col {column}"
            where += ": "
        super().__init__(where + message)


class ValidationError(WindtwinError):
    """A value or structure violates a declared invariant."""


class EvaluationError(WindtwinError):
    """A rule built-in or derivation lookup could not be evaluated."""


class IngestError(WindtwinError):
    """Extraction output could not be parsed or resolved."""


class SimulationError(WindtwinError):
    """Storm response simulation was handed unusable state."""


class LayoutError(WindtwinError):
    """Layout construction or optimization could not proceed."""


class ConfigError(WindtwinError):
    """Scenario configuration is missing or malformed."""


class UndefinedAlphaError(WindtwinError):
    """Agreement coefficient is undefined (zero expected disagreement)."""
