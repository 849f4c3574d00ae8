"""Agreement coefficient and extraction accuracy scoring."""

import math

import pytest

from windtwin.errors import ParseError, UndefinedAlphaError, ValidationError
from windtwin.ingest import ConstraintSnippet
from windtwin.metrics import (
    AnnotationSet,
    extraction_accuracy,
    krippendorff_alpha,
    load_annotations_csv,
)


def _annotations(pairs):
    items = tuple(f"item{i}" for i in range(len(pairs)))
    return AnnotationSet(
        items=items,
        coder1=tuple(p[0] for p in pairs),
        coder2=tuple(p[1] for p in pairs),
    )


def _constraint(constraint_id, description, value=None, unit=None, scope=""):
    return ConstraintSnippet(
        constraint_id=constraint_id,
        linked_component_id="COMP-01",
        category="Regulatory Requirement",
        description=description,
        geographic_scope=scope,
        context_quote="quote",
        value=value,
        unit=unit,
    )


# ---------------------------------------------------------------------------
# Krippendorff's alpha


def test_alpha_perfect_agreement_is_exactly_one():
    data = _annotations([("A", "A"), ("B", "B"), ("C", "C"), ("A", "A")])
    assert krippendorff_alpha(data) == 1.0


def test_alpha_known_four_item_value():
    # Two labels over four items with one disagreement:
    # D_o = 1/4, D_e = 1 - (5/8)^2 - (3/8)^2 = 15/32, alpha = 1 - 8/15.
    data = _annotations([("A", "A"), ("A", "A"), ("B", "B"), ("B", "A")])
    assert math.isclose(krippendorff_alpha(data), 0.4666666666666667, abs_tol=1e-12)


def test_alpha_item_order_invariant():
    pairs = [("A", "A"), ("A", "B"), ("B", "B"), ("C", "C")]
    reordered = [pairs[2], pairs[0], pairs[3], pairs[1]]
    assert krippendorff_alpha(_annotations(pairs)) == pytest.approx(
        krippendorff_alpha(_annotations(reordered)), rel=1e-15)


def test_alpha_coder_symmetric():
    pairs = [("A", "B"), ("B", "B"), ("C", "A"), ("A", "A")]
    swapped = [(b, a) for a, b in pairs]
    assert krippendorff_alpha(_annotations(pairs)) == pytest.approx(
        krippendorff_alpha(_annotations(swapped)), rel=1e-15)


def test_alpha_undefined_for_single_label():
    data = _annotations([("A", "A"), ("A", "A")])
    with pytest.raises(UndefinedAlphaError):
        krippendorff_alpha(data)


def test_alpha_requires_two_items():
    with pytest.raises(ValidationError):
        krippendorff_alpha(_annotations([("A", "B")]))


def test_alpha_can_go_negative():
    # Systematic disagreement scores below chance.
    data = _annotations([("A", "B"), ("B", "A"), ("A", "B"), ("B", "A")])
    assert krippendorff_alpha(data) < 0.0


# ---------------------------------------------------------------------------
# Annotation CSV


def test_load_annotations_csv():
    text = (
        "item_id,coder1,coder2\n"
        "# comment line\n"
        "R-01,Environmental Mitigation,Environmental Mitigation\n"
        "R-02,Safety Standard,Regulatory Requirement\n"
    )
    data = load_annotations_csv(text)
    assert data.items == ("R-01", "R-02")
    assert data.coder1[1] == "Safety Standard"


def test_load_annotations_csv_errors():
    with pytest.raises(ParseError):
        load_annotations_csv("wrong,header,names\nR-01,A,B\n")
    with pytest.raises(ParseError):
        load_annotations_csv("item_id,coder1,coder2\nR-01,A\n")
    with pytest.raises((ParseError, ValidationError)):
        load_annotations_csv("item_id,coder1,coder2\nR-01,A,B\nR-01,A,B\n")


# ---------------------------------------------------------------------------
# Extraction accuracy


def test_accuracy_identical_sets_is_one():
    gt = [
        _constraint("C-001", "Vessels must not exceed 10 knots in the lane.",
                    10, "knots", "Transit Lane"),
        _constraint("C-002", "No work within 500 meters of the wreck.",
                    500, "meters", "Wreck site"),
    ]
    report = extraction_accuracy(gt, gt)
    assert report.accuracy == 1.0
    assert report.unmatched_extracted == ()
    assert report.unmatched_ground_truth == ()


def test_accuracy_matches_across_unit_normalization():
    gt = [_constraint("C-001", "Buffer of 500 meters around the wreck site.",
                      500, "meters", "Wreck site")]
    ex = [_constraint("C-101", "Buffer of 0.5 km around the wreck site.",
                      0.5, "km", "Wreck site")]
    report = extraction_accuracy(ex, gt)
    assert report.accuracy == 1.0


def test_accuracy_value_mismatch_blocks_match():
    gt = [_constraint("C-001", "Buffer of 500 meters around the wreck site.",
                      500, "meters", "Wreck site")]
    ex = [_constraint("C-101", "Buffer of 600 meters around the wreck site.",
                      600, "meters", "Wreck site")]
    report = extraction_accuracy(ex, gt)
    assert report.accuracy == 0.0
    assert len(report.unmatched_extracted) == 1


def test_accuracy_dissimilar_text_blocks_match():
    gt = [_constraint("C-001", "Vessels must not exceed ten knots in the lane.")]
    ex = [_constraint("C-101", "Completely unrelated sentence about cables.")]
    assert extraction_accuracy(ex, gt).accuracy == 0.0


def test_accuracy_spurious_extraction_counts_against_nothing():
    gt = [_constraint("C-001", "No work within 500 meters of the wreck.",
                      500, "meters", "Wreck site")]
    ex = [
        _constraint("C-101", "No work within 500 meters of the wreck.",
                    500, "meters", "Wreck site"),
        _constraint("C-102", "An invented constraint nobody asked for."),
    ]
    report = extraction_accuracy(ex, gt)
    # Denominator is the ground truth set; extras appear as unmatched.
    assert report.accuracy == 1.0
    assert report.extracted_count == 2
    assert len(report.unmatched_extracted) == 1


def test_accuracy_missing_extraction_lowers_score():
    gt = [
        _constraint("C-001", "No work within 500 meters of the wreck.",
                    500, "meters", "Wreck site"),
        _constraint("C-002", "Vessels must not exceed 10 knots in the lane.",
                    10, "knots", "Transit Lane"),
    ]
    ex = [gt[0]]
    report = extraction_accuracy(ex, gt)
    assert report.accuracy == 0.5
    assert len(report.unmatched_ground_truth) == 1


def test_accuracy_threshold_validation_and_empty_ground_truth():
    gt = [_constraint("C-001", "Anything.")]
    with pytest.raises(ValidationError):
        extraction_accuracy(gt, gt, threshold=0.0)
    with pytest.raises(ValidationError):
        extraction_accuracy(gt, gt, threshold=1.5)
    with pytest.raises(ValidationError):
        extraction_accuracy(gt, [])


def test_accuracy_report_csv():
    gt = [_constraint("C-001", "No work within 500 meters of the wreck.",
                      500, "meters", "Wreck site")]
    report = extraction_accuracy(gt, gt)
    assert report.csv() == "accuracy,regulation_count\n1.000,1\n"
