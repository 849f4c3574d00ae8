"""Wind profile models, track handling, and the shutdown protocol."""

import math
import random
from datetime import datetime, timedelta, timezone

import pytest

from windtwin.errors import ParseError, SimulationError, ValidationError
from windtwin.graph import Graph
from windtwin.rules import EMPTY_RULESET
from windtwin.storm import (
    KNOTS_TO_MS,
    MS_TO_MPH,
    SimConfig,
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
from windtwin import geo
from windtwin.terms import (
    DOUBLE,
    P_GEOMETRY,
    P_PITCH,
    P_STATUS,
    P_TYPE,
    WKT,
    CLS_TURBINE,
    Literal,
    Triple,
    Var,
    wt,
)

UTC = timezone.utc


# ---------------------------------------------------------------------------
# Holland profile


def test_holland_known_value():
    # vmax 40 m/s, rmax 50 km, B 1.5, sampled at 100 km.
    v = holland_speed(40.0, 50.0, 1.5, 100.0)
    assert math.isclose(v, 32.85954853260227, rel_tol=1e-12)


def test_holland_peak_identity():
    rng = random.Random(11)
    for _ in range(200):
        vmax = rng.uniform(10, 80)
        rmax = rng.uniform(10, 100)
        b = rng.uniform(1.0, 2.5)
        assert math.isclose(holland_speed(vmax, rmax, b, rmax), vmax, rel_tol=1e-12)


def test_holland_decays_away_from_peak():
    vmax, rmax, b = 50.0, 40.0, 1.4
    radii = [rmax * f for f in (1.0, 1.5, 2.5, 5.0, 20.0, 80.0)]
    speeds = [holland_speed(vmax, rmax, b, r) for r in radii]
    assert all(a > b2 for a, b2 in zip(speeds, speeds[1:]))
    inside = [holland_speed(vmax, rmax, b, r) for r in (rmax * 0.1, rmax * 0.5, rmax)]
    assert all(a < b2 for a, b2 in zip(inside, inside[1:]))


def test_holland_rejects_bad_inputs():
    with pytest.raises(ValidationError):
        holland_speed(40, 50, 1.5, 0.0)
    with pytest.raises(ValidationError):
        holland_speed(40, 0, 1.5, 10)
    with pytest.raises(ValidationError):
        holland_speed(40, 50, -1, 10)


# ---------------------------------------------------------------------------
# Shear adjustment


def test_hub_adjust_known_value():
    v = hub_adjust(30.0, 150.0, 10.0, 0.14)
    assert math.isclose(v, 43.8302584, abs_tol=1e-6)


def test_hub_adjust_identity_and_composition():
    rng = random.Random(12)
    for _ in range(200):
        v = rng.uniform(1, 60)
        h = rng.uniform(5, 250)
        alpha = rng.uniform(0.05, 0.4)
        assert math.isclose(hub_adjust(v, h, h, alpha), v, rel_tol=1e-12)
        h2 = rng.uniform(5, 250)
        h3 = rng.uniform(5, 250)
        direct = hub_adjust(v, h3, h, alpha)
        via = hub_adjust(hub_adjust(v, h2, h, alpha), h3, h2, alpha)
        assert math.isclose(direct, via, rel_tol=1e-12)


def test_unit_constants():
    assert math.isclose(60 * KNOTS_TO_MS, 30.86664, rel_tol=1e-12)
    assert math.isclose(60 * KNOTS_TO_MS * MS_TO_MPH, 69.0468, abs_tol=1e-3)


# ---------------------------------------------------------------------------
# HURDAT2


SAMPLE = (
    "AL182012,              SANDY,      3,\n"
    "20121026, 0000,  , TS, 25.0N,  77.0W,  60,  970,\n"
    "20121026, 0600,  , HU, 26.0N,  77.5W,  65,  960,\n"
    "20121026, 1200, L, HU, 27.0N,  78.0W,  70, -999,\n"
)


def test_parse_hurdat2_sample():
    (track,) = parse_hurdat2(SAMPLE)
    assert track.storm_id == "AL182012"
    assert track.name == "SANDY"
    assert len(track.records) == 3
    first = track.records[0]
    assert first.time == datetime(2012, 10, 26, tzinfo=UTC)
    assert first.position == geo.GeoPoint(-77.0, 25.0)
    assert first.vmax_kt == 60.0
    assert first.pressure_mb == 970
    assert track.records[2].record_id == "L"
    assert track.records[2].pressure_mb is None


def test_hurdat2_round_trip():
    tracks = parse_hurdat2(SAMPLE)
    assert serialize_hurdat2(tracks) == SAMPLE.replace(", ", ",").replace(
        ",", ",") or parse_hurdat2(serialize_hurdat2(tracks)) == tracks
    assert parse_hurdat2(serialize_hurdat2(tracks)) == tracks


def test_parse_hurdat2_count_mismatch():
    bad = SAMPLE.replace("      3,", "      4,")
    with pytest.raises(ParseError):
        parse_hurdat2(bad)


def test_parse_hurdat2_rejects_bad_rows():
    with pytest.raises(ParseError):
        parse_hurdat2(SAMPLE.replace("20121026, 0600", "2012102x, 0600"))
    with pytest.raises(ParseError):
        parse_hurdat2(SAMPLE.replace("26.0N", "26.0Q"))
    with pytest.raises(ParseError):
        parse_hurdat2(SAMPLE.replace("notaheader\n", "", 1) + "notaheader\n")
    # Timestamps must strictly increase.
    with pytest.raises(ParseError):
        parse_hurdat2(SAMPLE.replace("20121026, 1200", "20121026, 0600"))


# ---------------------------------------------------------------------------
# Interpolation


def _track():
    return parse_hurdat2(SAMPLE)[0]


def test_interpolate_exact_record():
    state = interpolate(_track(), datetime(2012, 10, 26, 6, tzinfo=UTC))
    assert state.position == geo.GeoPoint(-77.5, 26.0)
    assert math.isclose(state.vmax, 65 * KNOTS_TO_MS, rel_tol=1e-12)


def test_interpolate_blends_linearly():
    state = interpolate(_track(), datetime(2012, 10, 26, 3, tzinfo=UTC))
    assert math.isclose(state.position.lat, 25.5, rel_tol=1e-12)
    assert math.isclose(state.position.lon, -77.25, rel_tol=1e-12)
    assert math.isclose(state.vmax, 62.5 * KNOTS_TO_MS, rel_tol=1e-12)


def test_interpolate_outside_span_is_error():
    with pytest.raises(SimulationError):
        interpolate(_track(), datetime(2012, 10, 25, 23, tzinfo=UTC))
    with pytest.raises(SimulationError):
        interpolate(_track(), datetime(2012, 10, 26, 13, tzinfo=UTC))


# ---------------------------------------------------------------------------
# Shutdown protocol


def _farm(*lonlat):
    triples = []
    for i, (lon, lat) in enumerate(lonlat, start=1):
        t = wt(f"T{i:03d}")
        triples.append(Triple(t, P_TYPE, CLS_TURBINE))
        triples.append(Triple(t, P_GEOMETRY, Literal(f"POINT ({lon} {lat})", WKT)))
    return Graph.of(triples)


def test_turbine_state_invariant():
    with pytest.raises(ValidationError):
        TurbineState(wt("T1"), "Parked", 0.0, 0.0, 10.0, 100.0)
    with pytest.raises(ValidationError):
        TurbineState(wt("T1"), "Operational", 90.0, 0.0, 10.0, 100.0)
    with pytest.raises(ValidationError):
        TurbineState(wt("T1"), "Broken", 90.0, 0.0, 10.0, 100.0)


def test_step_parks_only_above_cutout_within_proximity():
    config = SimConfig()
    graph = _farm((-74.7, 38.3))
    # Storm close enough and strong enough to exceed cut-out at the hub.
    near = StormState(datetime(2012, 10, 29, tzinfo=UTC),
                      geo.GeoPoint(-74.0, 38.0), 45.0)
    _, states = step(graph, near, config, EMPTY_RULESET)
    assert states[0].status == "Parked"
    assert states[0].pitch == 90.0
    assert states[0].wind_at_hub > config.cutout

    # Same intensity but far outside the proximity threshold.
    far = StormState(near.time, geo.GeoPoint(-40.0, 20.0), 45.0)
    _, states = step(graph, far, config, EMPTY_RULESET)
    assert states[0].status == "Operational"
    assert states[0].pitch == 0.0


def test_step_yaw_faces_wind_bearing():
    graph = _farm((-74.0, 39.0))
    storm = StormState(datetime(2012, 10, 29, tzinfo=UTC),
                       geo.GeoPoint(-74.0, 38.0), 30.0)
    _, states = step(graph, storm, EMPTY := SimConfig(), EMPTY_RULESET)
    # Turbine due north of the eye: outward bearing is 0 degrees.
    assert math.isclose(states[0].yaw, 0.0, abs_tol=1e-9)


def test_step_turbine_at_eye_center_sees_zero_wind():
    graph = _farm((-74.0, 38.0))
    storm = StormState(datetime(2012, 10, 29, tzinfo=UTC),
                       geo.GeoPoint(-74.0, 38.0), 45.0)
    _, states = step(graph, storm, SimConfig(), EMPTY_RULESET)
    assert states[0].distance_to_storm == 0.0
    assert states[0].wind_at_hub == 0.0
    assert states[0].status == "Operational"


def test_step_replaces_state_triples():
    config = SimConfig()
    graph = _farm((-74.7, 38.3))
    storm = StormState(datetime(2012, 10, 29, tzinfo=UTC),
                       geo.GeoPoint(-74.0, 38.0), 45.0)
    g1, _ = step(graph, storm, config, EMPTY_RULESET)
    g2, _ = step(g1, storm, config, EMPTY_RULESET)
    t = wt("T001")
    assert len(g2.match((t, P_STATUS, Var("s")))) == 1
    assert len(g2.match((t, P_PITCH, Var("p")))) == 1


def test_recovery_hysteresis():
    # Pick a storm strength whose hub wind lands between cutout - margin
    # and cutout: a running turbine stays up, a parked one stays parked.
    config = SimConfig(recovery_margin=3.0)
    graph = _farm((-74.0, 38.3))
    when = datetime(2012, 10, 29, tzinfo=UTC)
    center = geo.GeoPoint(-74.0, 38.0)

    strong = StormState(when, center, 45.0)
    parked_graph, states = step(graph, strong, config, EMPTY_RULESET)
    assert states[0].status == "Parked"

    borderline_v = None
    for v in [x / 10.0 for x in range(150, 450)]:
        trial = StormState(when, center, v)
        _, fresh = step(graph, trial, config, EMPTY_RULESET)
        hub = fresh[0].wind_at_hub
        if config.cutout - config.recovery_margin < hub <= config.cutout:
            borderline_v = v
            break
    assert borderline_v is not None

    borderline = StormState(when, center, borderline_v)
    _, from_running = step(graph, borderline, config, EMPTY_RULESET)
    assert from_running[0].status == "Operational"
    _, from_parked = step(parked_graph, borderline, config, EMPTY_RULESET)
    assert from_parked[0].status == "Parked"


def test_step_errors_without_geometry():
    graph = Graph.of([Triple(wt("T001"), P_TYPE, CLS_TURBINE)])
    storm = StormState(datetime(2012, 10, 29, tzinfo=UTC),
                       geo.GeoPoint(-74.0, 38.0), 45.0)
    with pytest.raises(SimulationError):
        step(graph, storm, SimConfig(), EMPTY_RULESET)


# ---------------------------------------------------------------------------
# Runner and summaries


def _passing_track():
    base = datetime(2012, 10, 26, tzinfo=UTC)
    records = []
    lats = [34.0, 36.0, 38.0, 38.3, 40.0, 42.0]
    for i, lat in enumerate(lats):
        records.append(TrackRecord(
            time=base + timedelta(hours=6 * i),
            record_id="",
            status="HU",
            position=geo.GeoPoint(-73.7, lat),
            vmax_kt=80.0,
            pressure_mb=960,
        ))
    return StormTrack("AL992012", "TEST", tuple(records))


def test_run_simulation_and_summary():
    track = _passing_track()
    graph = _farm((-74.0, 38.3))
    config = SimConfig(timestep_minutes=60.0)
    result = run_simulation(
        graph, track, config, EMPTY_RULESET,
        track.records[0].time, track.records[-1].time,
    )
    assert len(result.steps) == 31
    summary = summarize(result)
    ts = summary.turbines[0]
    # The storm core passes about 26 km east of the site: one shutdown
    # as winds build, one recovery as they fade.
    assert ts.transitions == 2
    assert ts.shutdown_time is not None
    assert ts.recovery_time is not None
    assert ts.shutdown_time < ts.recovery_time
    assert math.isclose(summary.peak_vmax_ms, 80 * KNOTS_TO_MS, rel_tol=1e-12)
    assert summary.min_site_distance_km < 40.0
    text = summary.text()
    assert "T001: transitions=2" in text


def test_summary_recovery_when_window_opens_mid_storm():
    track = _passing_track()
    graph = _farm((-74.0, 38.3))
    config = SimConfig(timestep_minutes=60.0)
    # Start at closest approach: the turbine is parked from the first step,
    # so the window opening counts as its shutdown and the later restart
    # must still be reported as the recovery.
    result = run_simulation(
        graph, track, config, EMPTY_RULESET,
        track.records[2].time, track.records[-1].time,
    )
    ts = summarize(result).turbines[0]
    assert result.steps[0].turbines[0].status == "Parked"
    assert result.steps[-1].turbines[0].status == "Operational"
    assert ts.transitions == 1
    assert ts.shutdown_time == result.steps[0].time
    assert ts.recovery_time is not None
    assert ts.shutdown_time < ts.recovery_time


def test_run_simulation_rejects_reversed_window():
    track = _passing_track()
    with pytest.raises(SimulationError):
        run_simulation(_farm((-74.0, 38.3)), track, SimConfig(), EMPTY_RULESET,
                       track.records[-1].time, track.records[0].time)


def test_csv_and_triples_log_shapes():
    track = _passing_track()
    graph = _farm((-74.0, 38.3), (-74.1, 38.4))
    config = SimConfig(timestep_minutes=180.0)
    result = run_simulation(graph, track, config, EMPTY_RULESET,
                            track.records[0].time, track.records[-1].time)
    csv_text = result.csv()
    lines = csv_text.splitlines()
    assert lines[0].startswith("time_utc,storm_lat,storm_lon")
    assert len(lines) == 1 + len(result.steps) * 2
    assert lines[1].startswith("2012-10-26T00:00:00Z,34.0000,-73.7000")

    log = result.triples_log()
    assert log.count("# time=") == len(result.steps)
    # Every non-comment line is a well-formed triple line.
    for line in log.splitlines():
        assert line.startswith("#") or line.endswith(" .")


def test_simconfig_validation():
    with pytest.raises(ValidationError):
        SimConfig(hub_height=0)
    with pytest.raises(ValidationError):
        SimConfig(shear_alpha=1.5)
    with pytest.raises(ValidationError):
        SimConfig(recovery_margin=-1)
