"""Command-line scenario runner.

Wires the pipeline end to end: document ingestion, conflict reasoning over
a candidate layout, layout optimization, storm-response simulation, and
metric evaluation.  Configuration is an INI-style file whose keys can all
be overridden on the command line as ``--section.key value``; paths inside
the file are resolved relative to the file itself.  Every command is
deterministic for a fixed config and seed.

Exit codes: 0 success (and, for ``reason``, conflict-free), 1 usage or
configuration error, 2 domain error, 3 conflicts found (``reason`` only).
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import geo
from . import ingest as ingest_mod
from . import layout as layout_mod
from . import metrics as metrics_mod
from . import storm as storm_mod
from .errors import ConfigError, WindtwinError
from .graph import DEFAULT_ONTOLOGY, Graph, subsumption_closure
from .ntriples import parse_graph, serialize_graph
from .rules import EMPTY_RULESET, RuleSet, explain, parse_rules, reason, serialize_rules
from .terms import BOOLEAN, P_CONFLICT, P_VIOLATES, Literal, Triple, Var

_CONFLICT_TRUE = Literal("true", BOOLEAN)

_KNOWN_KEYS = {
    "paths": {"docs_dir", "replay_store", "gazetteer", "boundary", "track",
              "layout", "reference_layout", "graph", "rules", "annotations",
              "extracted", "ground_truth"},
    "sim": {"storm_id", "t_start", "t_end", "hub_height", "ref_height",
            "cutout", "holland_b", "rmax_km", "shear_alpha", "proximity_km",
            "timestep_minutes", "cyclonic_offset", "recovery_margin"},
    "opt": {"rows", "count", "sectors", "weibull_k", "weibull_a",
            "iterations", "spacing_min", "penalty_weight", "seed",
            "sample_directions", "lr_start", "lr_end", "fd_step"},
    "eval": {"similarity_threshold"},
}

_SIM_FIELDS = ("hub_height", "ref_height", "cutout", "holland_b", "rmax_km",
               "shear_alpha", "proximity_km", "timestep_minutes",
               "cyclonic_offset", "recovery_margin")
_OPT_FIELDS = ("iterations", "spacing_min", "penalty_weight", "seed",
               "sample_directions", "lr_start", "lr_end", "fd_step")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="windtwin",
                     description="Regulatory digital twin scenario runner.")
    sub = parser.add_subparsers(dest="command")
    for name, brief in (
            ("ingest", "extract documents into a graph and compiled rules"),
            ("reason", "check a layout against the compiled rules"),
            ("optimize", "generate and optimize a turbine layout"),
            ("simulate", "replay a storm track over the farm"),
            ("eval", "compute agreement and extraction-accuracy metrics")):
        p = sub.add_parser(name, help=brief)
        p.add_argument("--config", help="INI config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, help="override [opt] seed")
        p.add_argument("--verbose", action="store_true")
        if name == "reason":
            p.add_argument("--layout", help="layout CSV to check")
    return parser


# ---------------------------------------------------------------------------
# Configuration plumbing


def _load_config(path_str: str | None) -> tuple[configparser.ConfigParser, Path]:
    config = configparser.ConfigParser(interpolation=None)
    config.optionxform = str
    if path_str is None:
        return config, Path.cwd()
    path = Path(path_str)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        config.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"bad config file: {exc}") from None
    return config, path.parent


def _apply_overrides(config: configparser.ConfigParser, extras: list[str]) -> None:
    i = 0
    while i < len(extras):
        token = extras[i]
        if not token.startswith("--") or "." not in token:
            raise _UsageError(f"unrecognized argument: {token}")
        section, _, key = token[2:].partition(".")
        if i + 1 >= len(extras):
            raise _UsageError(f"missing value for {token}")
        if not config.has_section(section):
            config.add_section(section)
        config.set(section, key, extras[i + 1])
        i += 2


def _check_keys(config: configparser.ConfigParser) -> None:
    for section in config.sections():
        known = _KNOWN_KEYS.get(section)
        if known is None:
            raise ConfigError(f"unknown config section [{section}]")
        for key in config[section]:
            if key not in known:
                raise ConfigError(f"unknown config key [{section}] {key}")


def _cfg_path(config, base: Path, key: str, required: bool = False,
              must_exist: bool = True) -> Path | None:
    value = config.get("paths", key, fallback=None)
    if value is None:
        if required:
            raise ConfigError(f"config key [paths] {key} is required")
        return None
    path = base / value
    if must_exist and not path.exists():
        raise ConfigError(f"[paths] {key}: {path} does not exist")
    return path


def _cfg_float(config, section: str, key: str, default: float) -> float:
    value = config.get(section, key, fallback=None)
    if value is None:
        return default
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"[{section}] {key} must be a number, got {value!r}") from None


def _cfg_int(config, section: str, key: str, default: int) -> int:
    value = config.get(section, key, fallback=None)
    if value is None:
        return default
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"[{section}] {key} must be an integer, got {value!r}") from None


def _parse_time(value: str, key: str) -> datetime:
    try:
        stamp = datetime.fromisoformat(value.strip().replace("Z", "+00:00"))
    except ValueError:
        raise ConfigError(f"[sim] {key}: bad timestamp {value!r}") from None
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp


def _outdir(args) -> Path:
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str, verbose: bool) -> None:
    path.write_text(text, encoding="utf-8")
    if verbose:
        print(f"wrote {path}")


def _load_boundary(config, base: Path) -> geo.Polygon:
    path = _cfg_path(config, base, "boundary", required=True)
    shape = geo.parse_wkt(path.read_text(encoding="utf-8").strip())
    if not isinstance(shape, geo.Polygon):
        raise ConfigError(f"boundary must be a POLYGON, got {type(shape).__name__}")
    return shape


def _load_layout(path: Path) -> layout_mod.Layout:
    return layout_mod.parse_layout_csv(path.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Commands


def cmd_ingest(args, config, base: Path) -> int:
    docs_dir = _cfg_path(config, base, "docs_dir", required=True)
    store = _cfg_path(config, base, "replay_store", required=True)
    gazetteer_path = _cfg_path(config, base, "gazetteer")
    gazetteer = (ingest_mod.load_gazetteer(gazetteer_path)
                 if gazetteer_path else None)
    docs = sorted(docs_dir.glob("*.txt"))
    if not docs:
        raise ConfigError(f"no .txt documents in {docs_dir}")
    client = ingest_mod.ReplayExtractionClient(store)
    graph = Graph()
    rules = []
    warnings = []
    for doc_path in docs:
        result = ingest_mod.ingest_document(
            doc_path.read_text(encoding="utf-8"), client,
            ontology=DEFAULT_ONTOLOGY, gazetteer=gazetteer)
        graph = graph.insert_all(result.graph.triples)
        graph = graph.insert_all(result.compiled.annotations.triples)
        rules.extend(result.compiled.ruleset.rules)
        warnings.extend(result.warnings)
        if args.verbose:
            print(f"{doc_path.name}: {len(result.graph)} triples, "
                  f"{len(result.compiled.ruleset)} rule(s)")
    ruleset = RuleSet(tuple(rules))
    out = _outdir(args)
    _write(out / "graph.nt", serialize_graph(graph), args.verbose)
    _write(out / "rules.txt", serialize_rules(ruleset), args.verbose)
    for warning in warnings:
        print(f"warning: {warning}")
    print(f"ingested {len(docs)} document(s): {len(graph)} triples, "
          f"{len(ruleset)} executable rule(s), {len(warnings)} warning(s)")
    return 0


def _term_display(term) -> str:
    if isinstance(term, Literal):
        return term.lexical
    return storm_mod.local_name(term)


def cmd_reason(args, config, base: Path) -> int:
    graph_path = _cfg_path(config, base, "graph", required=True)
    rules_path = _cfg_path(config, base, "rules", required=True)
    if args.layout is not None:
        layout_path = Path(args.layout)
        if not layout_path.is_file():
            raise _UsageError(f"layout file not found: {layout_path}")
    else:
        layout_path = _cfg_path(config, base, "layout", required=True)
    graph = parse_graph(graph_path.read_text(encoding="utf-8"))
    ruleset = parse_rules(rules_path.read_text(encoding="utf-8"))
    layout = _load_layout(layout_path)
    graph = graph.insert_all(layout.to_graph().triples)
    # Materialize subclass facts so rules quantified over broad classes
    # also see the specific layout entities.
    graph = subsumption_closure(graph, DEFAULT_ONTOLOGY)
    star = reason(graph, ruleset)
    out = _outdir(args)
    _write(out / "materialized.nt", serialize_graph(star), args.verbose)
    subjects = sorted(
        {binding["x"] for binding in star.match((Var("x"), P_CONFLICT, _CONFLICT_TRUE))},
        key=lambda iri: iri.value)
    for subject in subjects:
        names = sorted(storm_mod.local_name(b["c"])
                       for b in star.match((subject, P_VIOLATES, Var("c"))))
        print(f"conflict: {storm_mod.local_name(subject)} "
              f"violates {', '.join(names) if names else '(unspecified)'}")
        for step in explain(star, Triple(subject, P_CONFLICT, _CONFLICT_TRUE)):
            bound = ", ".join(f"{k}={_term_display(v)}" for k, v in step.bindings)
            print(f"  rule {step.rule}: {bound}")
    print(f"{len(subjects)} conflict(s) in {len(layout)} turbine(s)")
    return 3 if subjects else 0


def cmd_optimize(args, config, base: Path) -> int:
    boundary = _load_boundary(config, base)
    rows = _cfg_int(config, "opt", "rows", 13)
    count = _cfg_int(config, "opt", "count", 121)
    kwargs = {}
    for name in _OPT_FIELDS:
        value = config.get("opt", name, fallback=None)
        if value is not None:
            kwargs[name] = (int(value) if name in ("iterations", "seed",
                                                   "sample_directions")
                            else float(value))
    if args.seed is not None:
        kwargs["seed"] = args.seed
    opt_config = layout_mod.OptConfig(boundary=boundary, **kwargs)
    rose = layout_mod.WindRose.uniform(
        _cfg_int(config, "opt", "sectors", 24),
        weibull_k=_cfg_float(config, "opt", "weibull_k", 2.5),
        weibull_a=_cfg_float(config, "opt", "weibull_a", 8.0))
    grid = layout_mod.generate_grid_layout(rows, count, boundary,
                                           opt_config.spacing_min)
    result = layout_mod.optimize(grid, rose, layout_mod.IEA_15MW, opt_config)
    out = _outdir(args)
    _write(out / "layout_initial.csv", layout_mod.serialize_layout_csv(grid),
           args.verbose)
    _write(out / "layout_opt.csv", layout_mod.serialize_layout_csv(result.layout),
           args.verbose)
    _write(out / "trace.csv", layout_mod.trace_csv(result.trace), args.verbose)
    reference_path = _cfg_path(config, base, "reference_layout")
    if reference_path is not None:
        stats = layout_mod.row_deviation_stats(result.layout,
                                               _load_layout(reference_path))
        _write(out / "deviation.csv", layout_mod.deviation_report_csv(stats),
               args.verbose)
    first, last = result.trace[0], result.trace[-1]
    final_aep = layout_mod.aep(result.layout, rose, layout_mod.IEA_15MW)
    print(f"{count} turbines, {opt_config.iterations} iterations: "
          f"AEP {first.aep_gwh:.3f} -> {final_aep:.3f} GWh "
          f"(last iterate {last.aep_gwh:.3f}), feasible={result.feasible}")
    if not result.feasible:
        print("error: no feasible layout found", file=sys.stderr)
        return 2
    return 0


def cmd_simulate(args, config, base: Path) -> int:
    track_path = _cfg_path(config, base, "track", required=True)
    tracks = storm_mod.parse_hurdat2(track_path.read_text(encoding="utf-8"))
    storm_id = config.get("sim", "storm_id", fallback=None)
    if storm_id is None:
        if len(tracks) != 1:
            raise ConfigError("multiple storms in track file; set [sim] storm_id")
        track = tracks[0]
    else:
        matching = [t for t in tracks if t.storm_id == storm_id]
        if not matching:
            raise storm_mod.SimulationError(
                f"storm {storm_id} not in {track_path.name} "
                f"(contains {', '.join(t.storm_id for t in tracks)})")
        track = matching[0]

    # The simulation graph holds the physical farm: layout turbines only.
    # Document graphs describe the project abstractly and stay with reason.
    graph = Graph()
    layout_path = _cfg_path(config, base, "layout")
    if layout_path is not None:
        graph = graph.insert_all(_load_layout(layout_path).to_graph().triples)
    graph = subsumption_closure(graph, DEFAULT_ONTOLOGY)
    rules_path = _cfg_path(config, base, "rules")
    ruleset = (parse_rules(rules_path.read_text(encoding="utf-8"))
               if rules_path else EMPTY_RULESET)

    kwargs = {}
    for name in _SIM_FIELDS:
        value = config.get("sim", name, fallback=None)
        if value is not None:
            kwargs[name] = _cfg_float(config, "sim", name, 0.0)
    sim_config = storm_mod.SimConfig(**kwargs)
    t_start_raw = config.get("sim", "t_start", fallback=None)
    t_end_raw = config.get("sim", "t_end", fallback=None)
    t_start = (_parse_time(t_start_raw, "t_start") if t_start_raw
               else track.records[0].time)
    t_end = (_parse_time(t_end_raw, "t_end") if t_end_raw
             else track.records[-1].time)

    result = storm_mod.run_simulation(graph, track, sim_config, ruleset,
                                      t_start, t_end)
    out = _outdir(args)
    _write(out / "timeline.csv", result.csv(), args.verbose)
    _write(out / "triples_log.nt", result.triples_log(), args.verbose)
    summary = storm_mod.summarize(result)
    print(f"{track.name.strip()} ({track.storm_id}): {len(result.steps)} steps "
          f"at {sim_config.timestep_minutes:g}-minute cadence")
    print(summary.text())
    return 0


def _load_constraints(path: Path) -> list:
    text = path.read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ingest_mod.IngestError(f"{path.name}: bad JSON: {exc}") from None
    if isinstance(payload, list):
        # A bare constraint list has no component context; stub out the
        # referenced components so cross-reference checks stay satisfied.
        refs = sorted({c.get("linked_component_id") for c in payload
                       if isinstance(c, dict) and c.get("linked_component_id")})
        text = json.dumps({
            "document_metadata": {},
            "project_components": [
                {"component_id": r, "component_name": r} for r in refs],
            "project_constraints": payload,
        })
    document, _ = ingest_mod.parse_extraction(text)
    return list(document.constraints)


def cmd_eval(args, config, base: Path) -> int:
    out = _outdir(args)
    did_anything = False
    annotations_path = _cfg_path(config, base, "annotations")
    if annotations_path is not None:
        annotations = metrics_mod.load_annotations_csv(
            annotations_path.read_text(encoding="utf-8"))
        alpha = metrics_mod.krippendorff_alpha(annotations)
        _write(out / "alpha.csv", f"alpha\n{alpha:.4f}\n", args.verbose)
        print(f"krippendorff alpha: {alpha:.4f} "
              f"({len(annotations.items)} items)")
        did_anything = True
    extracted_path = _cfg_path(config, base, "extracted")
    truth_path = _cfg_path(config, base, "ground_truth")
    if (extracted_path is None) != (truth_path is None):
        raise ConfigError("extracted and ground_truth must be supplied together")
    if extracted_path is not None:
        threshold = _cfg_float(config, "eval", "similarity_threshold", 0.5)
        report = metrics_mod.extraction_accuracy(
            _load_constraints(extracted_path), _load_constraints(truth_path),
            threshold=threshold)
        _write(out / "accuracy.csv", report.csv(), args.verbose)
        print(f"extraction accuracy: {report.accuracy:.3f} "
              f"({len(report.matched)} matched, "
              f"{report.extracted_count} extracted)")
        did_anything = True
    if not did_anything:
        raise ConfigError(
            "eval needs [paths] annotations and/or extracted + ground_truth")
    return 0


_DISPATCH = {
    "ingest": cmd_ingest,
    "reason": cmd_reason,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args, extras = parser.parse_known_args(argv)
        if args.command is None:
            raise _UsageError("a subcommand is required "
                              "(ingest | reason | optimize | simulate | eval)")
        config, base = _load_config(args.config)
        _apply_overrides(config, extras)
        _check_keys(config)
        return _DISPATCH[args.command](args, config, base)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except WindtwinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
