"""Hurricane tracks, parametric wind fields, and storm-driven graph updates.

HURDAT2 best-track files supply 6-hourly storm positions and intensities.
A Holland radial profile turns those into wind speeds at each turbine, a
power-law shear correction lifts them to hub height, and a shutdown
protocol decides which turbines park.  Each timestep the turbine states are
written back into the graph and the rule set is re-run, so the graph
sequence is the storm response.
"""

from __future__ import annotations

import math
import re
from bisect import bisect_left
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

from . import geo
from .errors import ParseError, SimulationError, ValidationError
from .graph import Graph
from .ntriples import serialize_graph
from .rules import RuleSet, reason
from .terms import (
    CLS_TURBINE,
    P_GEOMETRY,
    P_PITCH,
    P_STATUS,
    P_TYPE,
    P_WINDSPEED,
    P_YAW,
    STATUS_OPERATIONAL,
    STATUS_PARKED,
    WKT,
    Iri,
    Literal,
    Triple,
    Var,
    double_literal,
)

KNOTS_TO_MS = 0.514444
MS_TO_MPH = 2.23694

MISSING = -999


# ---------------------------------------------------------------------------
# Wind models


def holland_speed(vmax: float, rmax: float, b: float, r: float) -> float:
    """Holland radial wind profile, m/s at distance r km from the center.

    V(r) = sqrt(vmax^2 * (rmax/r)^B * exp(1 - (rmax/r)^B)); peaks at exactly
    vmax when r = rmax and decays on both sides.
    """
    if r <= 0:
        raise ValidationError(f"radius must be positive, got {r!r}")
    if rmax <= 0 or b <= 0:
        raise ValidationError(f"rmax and B must be positive, got {rmax!r}, {b!r}")
    ratio = (rmax / r) ** b
    return math.sqrt(vmax * vmax * ratio * math.exp(1.0 - ratio))


def hub_adjust(v_ref: float, h_hub: float, h_ref: float, alpha: float) -> float:
    """Power-law shear: wind at hub height from a reference-height speed."""
    if h_hub <= 0 or h_ref <= 0:
        raise ValidationError("heights must be positive")
    return v_ref * (h_hub / h_ref) ** alpha


# ---------------------------------------------------------------------------
# HURDAT2 tracks


@dataclass(frozen=True)
class TrackRecord:
    """One best-track line; vmax stays in knots as archived."""

    time: datetime
    record_id: str
    status: str
    position: geo.GeoPoint
    vmax_kt: float
    pressure_mb: int | None
    radii: tuple[int, ...] = (MISSING,) * 12

    def __post_init__(self):
        if self.vmax_kt < 0:
            raise ValidationError(f"vmax must be nonnegative, got {self.vmax_kt}")


@dataclass(frozen=True)
class StormTrack:
    storm_id: str
    name: str
    records: tuple[TrackRecord, ...]


_STORM_ID = re.compile(r"[A-Z]{2}\d{6}")
_COORD = re.compile(r"(\d+(?:\.\d+)?)([NSEW])")


def _parse_coord(text: str, lineno: int) -> tuple[float, str]:
    m = _COORD.fullmatch(text.strip())
    if not m:
        raise ParseError(f"unparseable coordinate {text.strip()!r}", line=lineno)
    return float(m.group(1)), m.group(2)


def _parse_int(text: str, what: str, lineno: int) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ParseError(f"bad {what} field {text.strip()!r}", line=lineno) from None


def parse_hurdat2(text: str) -> list[StormTrack]:
    """Parse a HURDAT2 v2 file into storm tracks.

    Hemisphere suffixes become signed degrees (south and west negative),
    -999 pressure becomes None, and each header's declared record count
    must match the rows that follow it.
    """
    lines = text.splitlines()
    tracks = []
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        fields = [f.strip() for f in line.split(",")]
        if not _STORM_ID.fullmatch(fields[0]):
            raise ParseError(f"expected a storm header, got {line!r}", line=i + 1)
        if len(fields) < 3:
            raise ParseError("storm header needs id, name, and row count", line=i + 1)
        storm_id, name = fields[0], fields[1]
        count = _parse_int(fields[2], "row count", i + 1)
        records = []
        for k in range(count):
            lineno = i + 2 + k
            if i + 1 + k >= len(lines):
                raise ParseError(
                    f"{storm_id}: header declares {count} rows, file ends after {k}",
                    line=lineno)
            row = [f.strip() for f in lines[i + 1 + k].split(",")]
            if _STORM_ID.fullmatch(row[0]):
                raise ParseError(
                    f"{storm_id}: header declares {count} rows but row {k + 1} "
                    "is the next storm header", line=lineno)
            if len(row) < 8:
                raise ParseError(f"track row has {len(row)} fields, expected >= 8",
                                 line=lineno)
            try:
                when = datetime.strptime(row[0] + row[1], "%Y%m%d%H%M")
            except ValueError:
                raise ParseError(f"bad date/time {row[0]!r} {row[1]!r}",
                                 line=lineno) from None
            when = when.replace(tzinfo=timezone.utc)
            lat, ns = _parse_coord(row[4], lineno)
            lon, ew = _parse_coord(row[5], lineno)
            if ns not in "NS" or ew not in "EW":
                raise ParseError(f"bad hemisphere pair {row[4]!r}, {row[5]!r}",
                                 line=lineno)
            vmax = _parse_int(row[6], "vmax", lineno)
            if vmax < 0:
                raise ParseError(f"negative vmax {vmax}", line=lineno)
            pressure = _parse_int(row[7], "pressure", lineno)
            radii = tuple(_parse_int(f, "wind radius", lineno)
                          for f in row[8:] if f != "")
            if records and when <= records[-1].time:
                raise ParseError(
                    f"{storm_id}: timestamps not strictly increasing at {when}",
                    line=lineno)
            records.append(TrackRecord(
                time=when,
                record_id=row[2],
                status=row[3],
                position=geo.GeoPoint(
                    lon=lon if ew == "E" else -lon,
                    lat=lat if ns == "N" else -lat),
                vmax_kt=float(vmax),
                pressure_mb=None if pressure == MISSING else pressure,
                radii=radii if radii else (MISSING,) * 12,
            ))
        tracks.append(StormTrack(storm_id, name, tuple(records)))
        i += 1 + count
    return tracks


def serialize_hurdat2(tracks) -> str:
    """Emit tracks in the fixed-width HURDAT2 v2 comma format.

    Positions are written at the archive's native 0.1 degree resolution, so
    parse(serialize(tracks)) is the identity for data at that resolution.
    """
    lines = []
    for track in tracks:
        lines.append(f"{track.storm_id},{track.name.rjust(19)},"
                     f"{str(len(track.records)).rjust(7)},")
        for rec in track.records:
            lat, lon = rec.position.lat, rec.position.lon
            pressure = MISSING if rec.pressure_mb is None else round(rec.pressure_mb)
            fields = [
                rec.time.strftime("%Y%m%d"),
                rec.time.strftime("%H%M").rjust(5),
                rec.record_id.rjust(2),
                rec.status.rjust(3),
                f"{abs(lat):.1f}{'N' if lat >= 0 else 'S'}".rjust(6),
                f"{abs(lon):.1f}{'E' if lon >= 0 else 'W'}".rjust(7),
                str(round(rec.vmax_kt)).rjust(4),
                str(pressure).rjust(5),
            ]
            fields.extend(str(r).rjust(5) for r in rec.radii)
            lines.append(",".join(fields) + ",")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Track interpolation


@dataclass(frozen=True)
class StormState:
    """Storm center and intensity at one instant; vmax in m/s."""

    time: datetime
    position: geo.GeoPoint
    vmax: float


def _records(track) -> tuple[TrackRecord, ...]:
    return track.records if isinstance(track, StormTrack) else tuple(track)


def interpolate(track, t: datetime) -> StormState:
    """Linear interpolation of position and intensity between track records."""
    records = _records(track)
    if not records:
        raise SimulationError("track has no records")
    times = [r.time for r in records]
    if t < times[0] or t > times[-1]:
        raise SimulationError(
            f"{t.isoformat()} outside track span "
            f"[{times[0].isoformat()}, {times[-1].isoformat()}]")
    i = bisect_left(times, t)
    if times[i] == t:
        rec = records[i]
        return StormState(t, rec.position, rec.vmax_kt * KNOTS_TO_MS)
    lo, hi = records[i - 1], records[i]
    frac = (t - lo.time) / (hi.time - lo.time)
    lat = lo.position.lat + frac * (hi.position.lat - lo.position.lat)
    lon = lo.position.lon + frac * (hi.position.lon - lo.position.lon)
    vmax_kt = lo.vmax_kt + frac * (hi.vmax_kt - lo.vmax_kt)
    return StormState(t, geo.GeoPoint(lon=lon, lat=lat), vmax_kt * KNOTS_TO_MS)


# ---------------------------------------------------------------------------
# Shutdown protocol and the per-step graph update


@dataclass(frozen=True)
class SimConfig:
    hub_height: float = 150.0
    ref_height: float = 10.0
    cutout: float = 25.0
    holland_b: float = 1.5
    rmax_km: float = 50.0
    shear_alpha: float = 0.11
    proximity_km: float = 500.0
    timestep_minutes: float = 30.0
    # +90 models cyclonic rotation of the surface wind; 0 keeps the radial
    # outward bearing.
    cyclonic_offset: float = 0.0
    # Recovery requires hub wind <= cutout - margin; 0 disables hysteresis.
    recovery_margin: float = 0.0

    def __post_init__(self):
        for name in ("hub_height", "ref_height", "cutout", "rmax_km",
                     "holland_b", "proximity_km", "timestep_minutes"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if not 0 < self.shear_alpha < 1:
            raise ValidationError("shear_alpha must be in (0, 1)")
        if self.recovery_margin < 0:
            raise ValidationError("recovery_margin must be nonnegative")


@dataclass(frozen=True)
class TurbineState:
    turbine: Iri
    status: str
    pitch: float
    yaw: float
    wind_at_hub: float
    distance_to_storm: float

    def __post_init__(self):
        if self.status not in ("Operational", "Parked"):
            raise ValidationError(f"unknown status {self.status!r}")
        if (self.status == "Parked") != (self.pitch == 90.0):
            raise ValidationError("Parked requires pitch 90, Operational pitch 0")


def _turbine_point(graph: Graph, turbine: Iri) -> geo.GeoPoint:
    for binding in graph.match((turbine, P_GEOMETRY, Var("g"))):
        term = binding["g"]
        if isinstance(term, Literal) and term.datatype == WKT:
            shape = geo.parse_wkt(term.lexical)
            if isinstance(shape, geo.Point):
                return shape.point
    raise SimulationError(f"turbine {turbine.value} has no point geometry")


def step(graph_prev: Graph, storm: StormState, config: SimConfig,
         ruleset: RuleSet) -> tuple[Graph, list[TurbineState]]:
    """Inject one storm state into the graph and re-run the rules.

    For every turbine: distance is the great-circle distance to the storm
    center, wind direction is the bearing from the center outward, surface
    wind comes from the Holland profile and is lifted to hub height.  A
    turbine parks when it is inside the proximity threshold and the hub
    wind exceeds cut-out; parked turbines feather to 90 degrees.  The prior
    status/pitch/yaw/wind triples are replaced, never accumulated.
    """
    turbines = sorted(
        {b["t"] for b in graph_prev.match((Var("t"), P_TYPE, CLS_TURBINE))},
        key=lambda iri: iri.value)
    removals = []
    additions = []
    states = []
    for turbine in turbines:
        point = _turbine_point(graph_prev, turbine)
        distance = geo.haversine_km(storm.position, point)
        try:
            wind_dir = geo.bearing_deg(storm.position, point)
        except ValidationError:
            wind_dir = 0.0
        wind_dir = (wind_dir + config.cyclonic_offset) % 360.0
        if distance == 0:
            surface = 0.0
        else:
            surface = holland_speed(storm.vmax, config.rmax_km, config.holland_b,
                                    distance)
        hub = hub_adjust(surface, config.hub_height, config.ref_height,
                         config.shear_alpha)

        was_parked = bool(graph_prev.match((turbine, P_STATUS, STATUS_PARKED)))
        in_proximity = distance <= config.proximity_km
        if was_parked:
            parked = in_proximity and hub > config.cutout - config.recovery_margin
        else:
            parked = in_proximity and hub > config.cutout

        states.append(TurbineState(
            turbine=turbine,
            status="Parked" if parked else "Operational",
            pitch=90.0 if parked else 0.0,
            yaw=wind_dir,
            wind_at_hub=hub,
            distance_to_storm=distance,
        ))
        for prop in (P_STATUS, P_PITCH, P_YAW, P_WINDSPEED):
            for binding in graph_prev.match((turbine, prop, Var("o"))):
                removals.append(Triple(turbine, prop, binding["o"]))
        additions.extend([
            Triple(turbine, P_STATUS, STATUS_PARKED if parked else STATUS_OPERATIONAL),
            Triple(turbine, P_PITCH, double_literal(90.0 if parked else 0.0)),
            Triple(turbine, P_YAW, double_literal(wind_dir)),
            Triple(turbine, P_WINDSPEED, double_literal(hub)),
        ])
    updated = graph_prev.remove_all(removals).insert_all(additions)
    return reason(updated, ruleset), states


# ---------------------------------------------------------------------------
# Simulation runner


@dataclass(frozen=True)
class SimStep:
    time: datetime
    storm: StormState
    turbines: tuple[TurbineState, ...]
    graph: Graph


@dataclass(frozen=True)
class SimulationResult:
    steps: tuple[SimStep, ...]
    initial_graph: Graph

    @property
    def final_graph(self) -> Graph:
        return self.steps[-1].graph if self.steps else self.initial_graph

    def csv(self) -> str:
        """One row per turbine per timestep."""
        lines = ["time_utc,storm_lat,storm_lon,storm_vmax_ms,turbine_id,"
                 "distance_km,wind_hub_ms,wind_dir_deg,status,pitch_deg,yaw_deg"]
        for snap in self.steps:
            stamp = _utc(snap.time)
            storm = snap.storm
            for st in snap.turbines:
                lines.append(
                    f"{stamp},{storm.position.lat:.4f},{storm.position.lon:.4f},"
                    f"{storm.vmax:.4f},{local_name(st.turbine)},"
                    f"{st.distance_to_storm:.4f},{st.wind_at_hub:.4f},"
                    f"{st.yaw:.4f},{st.status},{st.pitch:.1f},{st.yaw:.4f}")
        return "\n".join(lines) + "\n"

    def triples_log(self) -> str:
        """Per-timestep added triples as commented N-Triples blocks."""
        blocks = []
        prev = self.initial_graph
        for snap in self.steps:
            added = snap.graph.triples - prev.triples
            blocks.append(f"# time={_utc(snap.time)}\n"
                          + serialize_graph(Graph(frozenset(added))))
            prev = snap.graph
        return "".join(blocks)


def local_name(iri: Iri) -> str:
    value = iri.value
    for sep in ("#", "/"):
        if sep in value:
            return value.rsplit(sep, 1)[1]
    return value


def _utc(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def run_simulation(graph0: Graph, track, config: SimConfig, ruleset: RuleSet,
                   t_start: datetime, t_end: datetime) -> SimulationResult:
    """Fixed-timestep replay of a storm track against a turbine graph."""
    if t_end < t_start:
        raise SimulationError("t_end is before t_start")
    dt = timedelta(minutes=config.timestep_minutes)
    steps = []
    graph = graph0
    t = t_start
    while t <= t_end:
        storm = interpolate(track, t)
        graph, states = step(graph, storm, config, ruleset)
        steps.append(SimStep(t, storm, tuple(states), graph))
        t = t + dt
    return SimulationResult(tuple(steps), graph0)


# ---------------------------------------------------------------------------
# Summaries


@dataclass(frozen=True)
class TurbineSummary:
    turbine_id: str
    transitions: int
    shutdown_time: datetime | None
    recovery_time: datetime | None
    max_hub_wind: float
    min_distance_km: float


@dataclass(frozen=True)
class SimulationSummary:
    turbines: tuple[TurbineSummary, ...]
    peak_vmax_ms: float
    min_site_distance_km: float

    def text(self) -> str:
        lines = [f"peak storm intensity: {self.peak_vmax_ms:.2f} m/s "
                 f"({self.peak_vmax_ms * MS_TO_MPH:.1f} mph)",
                 f"closest site approach: {self.min_site_distance_km:.1f} km"]
        for ts in self.turbines:
            shutdown = _utc(ts.shutdown_time) if ts.shutdown_time else "-"
            recovery = _utc(ts.recovery_time) if ts.recovery_time else "-"
            lines.append(
                f"{ts.turbine_id}: transitions={ts.transitions} "
                f"shutdown={shutdown} recovery={recovery} "
                f"max_hub_wind={ts.max_hub_wind:.2f} "
                f"min_distance={ts.min_distance_km:.1f}")
        return "\n".join(lines) + "\n"


def summarize(result: SimulationResult) -> SimulationSummary:
    if not result.steps:
        raise SimulationError("simulation produced no steps")
    order = [st.turbine for st in result.steps[0].turbines]
    summaries = []
    for idx, turbine in enumerate(order):
        history = [snap.turbines[idx] for snap in result.steps]
        transitions = 0
        recovery = None
        # A turbine already parked at the first step counts as shut down
        # then, so a later restart still registers as its recovery.
        shutdown = result.steps[0].time if history[0].status == "Parked" else None
        for prev, cur, snap in zip(history, history[1:], result.steps[1:]):
            if prev.status != cur.status:
                transitions += 1
                if cur.status == "Parked" and shutdown is None:
                    shutdown = snap.time
                if cur.status == "Operational" and shutdown is not None \
                        and recovery is None:
                    recovery = snap.time
        summaries.append(TurbineSummary(
            turbine_id=local_name(turbine),
            transitions=transitions,
            shutdown_time=shutdown,
            recovery_time=recovery,
            max_hub_wind=max(st.wind_at_hub for st in history),
            min_distance_km=min(st.distance_to_storm for st in history),
        ))
    return SimulationSummary(
        turbines=tuple(summaries),
        peak_vmax_ms=max(snap.storm.vmax for snap in result.steps),
        min_site_distance_km=min(st.distance_to_storm
                                 for snap in result.steps
                                 for st in snap.turbines),
    )
