"""Ontology-backed digital twin toolkit for offshore wind planning.

The pipeline: permitting documents are distilled into structured
constraint snippets, instantiated as a typed triple graph, and compiled
into executable spatial rules; candidate turbine layouts are checked
against those rules, optimized for annual energy yield under spacing and
boundary constraints, and replayed through historical storm tracks to
exercise shutdown and recovery behavior.
"""

from .errors import (
    ConfigError,
    EvaluationError,
    IngestError,
    LayoutError,
    ParseError,
    SimulationError,
    UndefinedAlphaError,
    ValidationError,
    WindtwinError,
)
from .terms import Iri, Literal, Triple, Var, WT_NS, double_literal
from .graph import (
    DEFAULT_ONTOLOGY,
    Graph,
    Ontology,
    PropertyAxiom,
    Violation,
    ontology_from_graph,
    subsumption_closure,
    validate,
)
from .ntriples import parse_graph, serialize_graph
from .rules import (
    BuiltinCall,
    DerivationStep,
    EMPTY_RULESET,
    Rule,
    RuleSet,
    TriplePattern,
    explain,
    parse_rules,
    reason,
    serialize_rules,
)
from .geo import (
    GeoPoint,
    LineString,
    Point,
    Polygon,
    bearing_deg,
    contains,
    haversine_km,
    intersects,
    min_distance_m,
    parse_wkt,
    serialize_wkt,
    within_distance,
)
from .ingest import (
    AttributeSnippet,
    CompiledRules,
    ConstraintSnippet,
    ExtractionClient,
    ExtractionDocument,
    HttpExtractionClient,
    IngestResult,
    QuantityValue,
    ReplayExtractionClient,
    build_prompt,
    compile_rules,
    ingest_document,
    instantiate,
    load_gazetteer,
    normalize_quantity,
    parse_extraction,
    split,
)
from .storm import (
    SimConfig,
    SimulationResult,
    SimulationSummary,
    StormState,
    StormTrack,
    TrackRecord,
    TurbineState,
    holland_speed,
    hub_adjust,
    interpolate,
    parse_hurdat2,
    run_simulation,
    serialize_hurdat2,
    step,
    summarize,
)
from .layout import (
    IEA_15MW,
    Layout,
    OptConfig,
    OptResult,
    TurbineSpec,
    WindRose,
    WindSector,
    aep,
    effective_speed,
    generate_grid_layout,
    optimize,
    parse_layout_csv,
    penalties,
    power,
    row_deviation_stats,
    serialize_layout_csv,
    wake_deficit,
)
from .metrics import (
    AnnotationSet,
    MatchReport,
    extraction_accuracy,
    krippendorff_alpha,
    load_annotations_csv,
)

__version__ = "0.1.0"
