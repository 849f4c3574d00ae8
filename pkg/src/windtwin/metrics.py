"""Evaluation metrics: inter-annotator agreement and extraction accuracy."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

from .errors import ParseError, UndefinedAlphaError, ValidationError
from .ingest import ConstraintSnippet, normalize_quantity


@dataclass(frozen=True)
class AnnotationSet:
    """Nominal labels assigned to the same items by two coders."""

    items: tuple[str, ...]
    coder1: tuple[str, ...]
    coder2: tuple[str, ...]

    def __post_init__(self):
        if not len(self.items) == len(self.coder1) == len(self.coder2):
            raise ValidationError("items and both coder label lists must align")
        if len(set(self.items)) != len(self.items):
            raise ValidationError("item ids must be unique")

    def labels(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.coder1) | set(self.coder2)))


def load_annotations_csv(text: str) -> AnnotationSet:
    items, c1, c2 = [], [], []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if not header_seen:
            if fields != ["item_id", "coder1", "coder2"]:
                raise ParseError(f"expected header item_id,coder1,coder2, got {raw!r}",
                                 line=lineno)
            header_seen = True
            continue
        if len(fields) != 3:
            raise ParseError(f"expected 3 fields, got {len(fields)}", line=lineno)
        items.append(fields[0])
        c1.append(fields[1])
        c2.append(fields[2])
    if not header_seen:
        raise ParseError("annotation file has no header")
    return AnnotationSet(tuple(items), tuple(c1), tuple(c2))


def krippendorff_alpha(annotations: AnnotationSet) -> float:
    """Chance-corrected agreement between two coders, nominal labels.

    alpha = 1 - D_o/D_e with observed disagreement D_o the fraction of
    items the coders label differently and expected disagreement D_e the
    probability two labels drawn from the pooled distribution differ.
    """
    n = len(annotations.items)
    if n < 2:
        raise ValidationError("need at least 2 items")
    d_o = sum(1 for a, b in zip(annotations.coder1, annotations.coder2)
              if a != b) / n
    counts = Counter(annotations.coder1) + Counter(annotations.coder2)
    total = 2 * n
    d_e = 1.0 - sum((c / total) ** 2 for c in counts.values())
    if d_e == 0.0:
        raise UndefinedAlphaError(
            "all annotations share one label; expected disagreement is zero")
    return 1.0 - d_o / d_e


# ---------------------------------------------------------------------------
# Extraction accuracy


@dataclass(frozen=True)
class MatchReport:
    """Extraction-vs-reference matching outcome.

    accuracy is the fraction of reference constraints matched; the count
    column is how many constraints the extractor produced, so spurious
    extras raise the count without touching accuracy.
    """

    matched: tuple[tuple[str, str], ...]
    unmatched_extracted: tuple[str, ...]
    unmatched_ground_truth: tuple[str, ...]
    accuracy: float
    extracted_count: int

    def csv(self) -> str:
        return ("accuracy,regulation_count\n"
                f"{self.accuracy:.3f},{self.extracted_count}\n")


def _tokens(snippet: ConstraintSnippet) -> frozenset:
    text = f"{snippet.description} {snippet.geographic_scope or ''}"
    return frozenset(t for t in re.split(r"[^a-z0-9]+", text.lower()) if t)


def _similarity(a: ConstraintSnippet, b: ConstraintSnippet) -> float:
    ta, tb = _tokens(a), _tokens(b)
    if not ta and not tb:
        return 1.0
    union = ta | tb
    return len(ta & tb) / len(union)


def _values_agree(a: ConstraintSnippet, b: ConstraintSnippet) -> bool:
    if (a.value is None) != (b.value is None):
        return False
    if a.value is None:
        return True
    try:
        qa = normalize_quantity(a.value, a.unit)
        qb = normalize_quantity(b.value, b.unit)
    except Exception:
        # Unknown units fall back to literal comparison.
        return a.value == b.value and (a.unit or "") == (b.unit or "")
    return qa.unit == qb.unit and math.isclose(
        qa.magnitude, qb.magnitude, rel_tol=1e-9, abs_tol=1e-12)


def extraction_accuracy(extracted, ground_truth, threshold: float = 0.5) -> MatchReport:
    """Greedy one-to-one matching of extracted constraints to a reference set.

    A pair is eligible when the normalized (value, unit) agree exactly and
    the token-set overlap of description plus geographic scope reaches the
    threshold; eligible pairs are claimed in descending overlap order.
    """
    extracted = list(extracted)
    ground_truth = list(ground_truth)
    if not ground_truth:
        raise ValidationError("ground truth must be non-empty")
    if not 0 < threshold <= 1:
        raise ValidationError("threshold must be in (0, 1]")
    candidates = []
    for i, ext in enumerate(extracted):
        for j, ref in enumerate(ground_truth):
            if not _values_agree(ext, ref):
                continue
            sim = _similarity(ext, ref)
            if sim >= threshold:
                candidates.append((-sim, i, j))
    candidates.sort()
    used_e, used_g = set(), set()
    pairs = []
    for _, i, j in candidates:
        if i not in used_e and j not in used_g:
            pairs.append((extracted[i].constraint_id,
                          ground_truth[j].constraint_id))
            used_e.add(i)
            used_g.add(j)
    return MatchReport(
        matched=tuple(pairs),
        unmatched_extracted=tuple(e.constraint_id for i, e in enumerate(extracted)
                                  if i not in used_e),
        unmatched_ground_truth=tuple(g.constraint_id for j, g in enumerate(ground_truth)
                                     if j not in used_g),
        accuracy=len(pairs) / len(ground_truth),
        extracted_count=len(extracted),
    )
