"""Wind-farm layouts: wake-aware energy yield and gradient-based placement.

Positions live in a local tangent plane (meters east/north of a geographic
anchor), which keeps the wake geometry and spacing arithmetic planar; the
CSV form stores longitude/latitude.  The yield objective combines a
Gaussian wake deficit model, a cubic-ramp power curve, and per-sector
Weibull wind climates integrated by fixed quadrature.  The optimizer is
plain stochastic gradient ascent with quadratic constraint penalties and a
best-feasible-iterate memory.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import geo
from .errors import LayoutError, ParseError, ValidationError
from .graph import Graph
from .terms import CLS_TURBINE, P_GEOMETRY, P_TYPE, WKT, Iri, Literal, Triple, WT_NS


# ---------------------------------------------------------------------------
# Turbine and wind climate


@dataclass(frozen=True)
class TurbineSpec:
    """Turbine physics; defaults follow the IEA 15 MW reference machine."""

    rotor_diameter: float = 240.0
    hub_height: float = 150.0
    rated_power: float = 15.0e6
    cut_in: float = 3.0
    rated_speed: float = 10.59
    cut_out: float = 25.0
    wake_k: float = 0.04
    # Optional (wind speed, CT) table; linear interpolation, clamped ends.
    ct_table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if not 0 < self.cut_in < self.rated_speed < self.cut_out:
            raise ValidationError("need 0 < cut_in < rated_speed < cut_out")
        if self.rotor_diameter <= 0 or self.rated_power <= 0 or self.wake_k <= 0:
            raise ValidationError("rotor, rated power, and wake growth must be positive")
        if self.ct_table is not None:
            for ws, ct in self.ct_table:
                if not 0 < ct < 1:
                    raise ValidationError(f"CT must be in (0,1), got {ct} at {ws} m/s")

    def ct(self, ws: float) -> float:
        """Thrust coefficient at a free-stream speed."""
        if self.ct_table is not None:
            table = sorted(self.ct_table)
            speeds = [s for s, _ in table]
            cts = [c for _, c in table]
            return float(np.interp(ws, speeds, cts))
        if ws < self.rated_speed:
            return 0.8
        return max(0.05, 0.8 * (self.rated_speed / ws) ** 3)


IEA_15MW = TurbineSpec()


@dataclass(frozen=True)
class WindSector:
    direction: float
    probability: float
    weibull_k: float = 2.5
    weibull_a: float = 8.0

    def __post_init__(self):
        if not 0 <= self.probability <= 1:
            raise ValidationError("sector probability must be in [0,1]")
        if self.weibull_k <= 0 or self.weibull_a <= 0:
            raise ValidationError("Weibull parameters must be positive")


@dataclass(frozen=True)
class WindRose:
    sectors: tuple[WindSector, ...]

    def __post_init__(self):
        if not self.sectors:
            raise ValidationError("wind rose needs at least one sector")
        total = sum(s.probability for s in self.sectors)
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"sector probabilities sum to {total}, not 1")

    @classmethod
    def uniform(cls, n_sectors: int = 24, weibull_k: float = 2.5,
                weibull_a: float = 8.0) -> "WindRose":
        prob = 1.0 / n_sectors
        return cls(tuple(
            WindSector(direction=i * 360.0 / n_sectors, probability=prob,
                       weibull_k=weibull_k, weibull_a=weibull_a)
            for i in range(n_sectors)))


# ---------------------------------------------------------------------------
# Layout representation


def to_xy(anchor: geo.GeoPoint, point: geo.GeoPoint) -> tuple[float, float]:
    """Project lon/lat to meters east/north of the anchor."""
    kx = geo.METERS_PER_DEG * math.cos(math.radians(anchor.lat))
    return ((point.lon - anchor.lon) * kx,
            (point.lat - anchor.lat) * geo.METERS_PER_DEG)


def to_lonlat(anchor: geo.GeoPoint, x: float, y: float) -> geo.GeoPoint:
    kx = geo.METERS_PER_DEG * math.cos(math.radians(anchor.lat))
    return geo.GeoPoint(lon=anchor.lon + x / kx,
                        lat=anchor.lat + y / geo.METERS_PER_DEG)


@dataclass(frozen=True)
class Layout:
    """Turbine positions in meters east/north of a geographic anchor."""

    anchor: geo.GeoPoint
    positions: tuple[tuple[float, float], ...]
    ids: tuple[str, ...]
    rows: tuple[int, ...] | None = None

    def __post_init__(self):
        if len(self.positions) != len(self.ids):
            raise ValidationError("position count must equal id count")
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("turbine ids must be unique")
        if self.rows is not None and len(self.rows) != len(self.ids):
            raise ValidationError("row count must equal id count")

    def __len__(self):
        return len(self.positions)

    def points(self) -> tuple[geo.GeoPoint, ...]:
        return tuple(to_lonlat(self.anchor, x, y) for x, y in self.positions)

    def to_graph(self) -> Graph:
        """Graph delta for a candidate layout: typed turbines with geometry."""
        triples = []
        for tid, point in zip(self.ids, self.points()):
            iri = Iri(WT_NS + tid)
            triples.append(Triple(iri, P_TYPE, CLS_TURBINE))
            triples.append(Triple(
                iri, P_GEOMETRY,
                Literal(geo.serialize_wkt(geo.Point(point)), WKT)))
        return Graph(frozenset(triples))


def serialize_layout_csv(layout: Layout) -> str:
    lines = [f"# anchor,{layout.anchor.lon!r},{layout.anchor.lat!r}"]
    has_rows = layout.rows is not None
    lines.append("turbine_id,lon,lat,row" if has_rows else "turbine_id,lon,lat")
    for i, (tid, point) in enumerate(zip(layout.ids, layout.points())):
        row = f",{layout.rows[i]}" if has_rows else ""
        lines.append(f"{tid},{point.lon!r},{point.lat!r}{row}")
    return "\n".join(lines) + "\n"


def parse_layout_csv(text: str) -> Layout:
    anchor = None
    header = None
    ids, lonlats, rows = [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = re.fullmatch(r"#\s*anchor,([^,]+),([^,]+)", line)
            if m:
                anchor = geo.GeoPoint(lon=float(m.group(1)), lat=float(m.group(2)))
            continue
        fields = [f.strip() for f in line.split(",")]
        if header is None:
            header = fields
            if header not in (["turbine_id", "lon", "lat"],
                              ["turbine_id", "lon", "lat", "row"]):
                raise ParseError(f"unexpected layout header {raw!r}", line=lineno)
            continue
        if len(fields) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(fields)}",
                             line=lineno)
        try:
            lonlats.append(geo.GeoPoint(lon=float(fields[1]), lat=float(fields[2])))
            if len(fields) == 4:
                rows.append(int(fields[3]))
        except ValueError:
            raise ParseError(f"bad numeric field in {raw!r}", line=lineno) from None
        ids.append(fields[0])
    if header is None:
        raise ParseError("layout file has no header")
    if anchor is None:
        if not lonlats:
            raise ParseError("layout file has no turbines and no anchor")
        anchor = geo.GeoPoint(lon=sum(p.lon for p in lonlats) / len(lonlats),
                              lat=sum(p.lat for p in lonlats) / len(lonlats))
    return Layout(
        anchor=anchor,
        positions=tuple(to_xy(anchor, p) for p in lonlats),
        ids=tuple(ids),
        rows=tuple(rows) if rows else None,
    )


# ---------------------------------------------------------------------------
# Wake model


def _flow_vectors(wind_dir: float) -> tuple[np.ndarray, np.ndarray]:
    # wind_dir is the compass direction the wind comes FROM; flow points the
    # opposite way.
    theta = math.radians(wind_dir)
    flow = np.array([-math.sin(theta), -math.cos(theta)])
    return flow, np.array([-flow[1], flow[0]])


def wake_deficit(upstream_pos, downstream_pos, wind_dir: float, ws: float,
                 spec: TurbineSpec = IEA_15MW) -> float:
    """Fractional speed deficit a downstream rotor sees from one upstream wake.

    Gaussian self-similar profile: the wake width grows linearly with
    downwind distance, the centerline deficit follows the thrust
    coefficient, and crosswind offsets decay as a Gaussian.  Points not
    strictly downwind contribute nothing.
    """
    flow, perp = _flow_vectors(wind_dir)
    dx = ((downstream_pos[0] - upstream_pos[0]) * flow[0]
          + (downstream_pos[1] - upstream_pos[1]) * flow[1])
    if dx <= 0:
        return 0.0
    dy = ((downstream_pos[0] - upstream_pos[0]) * perp[0]
          + (downstream_pos[1] - upstream_pos[1]) * perp[1])
    d = spec.rotor_diameter
    ct = spec.ct(ws)
    beta = (1.0 + math.sqrt(1.0 - ct)) / (2.0 * math.sqrt(1.0 - ct))
    sigma_d = spec.wake_k * dx / d + 0.2 * math.sqrt(beta)
    arg = max(0.0, 1.0 - ct / (8.0 * sigma_d * sigma_d))
    sigma = sigma_d * d
    return (1.0 - math.sqrt(arg)) * math.exp(-(dy * dy) / (2.0 * sigma * sigma))


def effective_speed(layout: Layout, i: int, wind_dir: float, ws: float,
                    spec: TurbineSpec = IEA_15MW) -> float:
    """Waked wind speed at turbine i: root-sum-square deficit combination."""
    total = 0.0
    target = layout.positions[i]
    for j, pos in enumerate(layout.positions):
        if j == i:
            continue
        d = wake_deficit(pos, target, wind_dir, ws, spec)
        total += d * d
    return max(0.0, ws * (1.0 - math.sqrt(total)))


def power(ws: float, spec: TurbineSpec = IEA_15MW) -> float:
    """Power in watts: cubic ramp to rated, plateau, cut-out drop to zero."""
    if ws < spec.cut_in or ws >= spec.cut_out:
        return 0.0
    if ws >= spec.rated_speed:
        return spec.rated_power
    frac = (ws - spec.cut_in) / (spec.rated_speed - spec.cut_in)
    return spec.rated_power * frac * frac * frac


def _power_np(ws: np.ndarray, spec: TurbineSpec) -> np.ndarray:
    frac = np.clip((ws - spec.cut_in) / (spec.rated_speed - spec.cut_in), 0.0, 1.0)
    out = spec.rated_power * frac ** 3
    return np.where((ws < spec.cut_in) | (ws >= spec.cut_out), 0.0, out)


def _weibull_pdf(ws: np.ndarray, k: float, a: float) -> np.ndarray:
    return (k / a) * (ws / a) ** (k - 1.0) * np.exp(-((ws / a) ** k))


def _quadrature(spec: TurbineSpec) -> tuple[np.ndarray, np.ndarray]:
    # Split at rated speed where the power curve kinks: 14 + 13 = 27 nodes
    # on [cut_in, cut_out].
    def mapped(n, lo, hi):
        x, w = np.polynomial.legendre.leggauss(n)
        return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w
    n1, w1 = mapped(14, spec.cut_in, spec.rated_speed)
    n2, w2 = mapped(13, spec.rated_speed, spec.cut_out)
    return np.concatenate([n1, n2]), np.concatenate([w1, w2])


def _ct_np(ws: np.ndarray, spec: TurbineSpec) -> np.ndarray:
    if spec.ct_table is not None:
        table = sorted(spec.ct_table)
        return np.interp(ws, [s for s, _ in table], [c for _, c in table])
    above = np.maximum(0.05, 0.8 * (spec.rated_speed / ws) ** 3)
    return np.where(ws < spec.rated_speed, 0.8, above)


def _defsq(x: np.ndarray, y: np.ndarray, ct: np.ndarray, beta: np.ndarray,
           spec: TurbineSpec) -> np.ndarray:
    """Squared deficits; x, y broadcast against per-node ct and beta."""
    d = spec.rotor_diameter
    sigma_d = spec.wake_k * x / d + 0.2 * np.sqrt(beta)
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.clip(1.0 - ct / (8.0 * sigma_d ** 2), 0.0, None)
        amp = 1.0 - np.sqrt(arg)
        gauss = np.exp(-(y ** 2) / (2.0 * (sigma_d * d) ** 2))
        deficit = np.where(x > 0, amp * gauss, 0.0)
    return deficit ** 2


def _node_physics(spec: TurbineSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    nodes, weights = _quadrature(spec)
    ct = _ct_np(nodes, spec)
    beta = (1.0 + np.sqrt(1.0 - ct)) / (2.0 * np.sqrt(1.0 - ct))
    return nodes, weights, ct, beta


def _deficit_sq_sums(pos: np.ndarray, wind_dir: float, ct: np.ndarray,
                     beta: np.ndarray, spec: TurbineSpec) -> np.ndarray:
    """Per-node, per-turbine sum of squared deficits from all upstream wakes."""
    flow, perp = _flow_vectors(wind_dir)
    rel = pos[None, :, :] - pos[:, None, :]
    x = rel @ flow
    y = rel @ perp
    defsq = _defsq(x[None, :, :], y[None, :, :],
                   ct[:, None, None], beta[:, None, None], spec)
    return defsq.sum(axis=1)


def aep(layout: Layout, rose: WindRose, spec: TurbineSpec = IEA_15MW) -> float:
    """Annual energy production in GWh/year."""
    return _aep_positions(np.array(layout.positions, dtype=float).reshape(-1, 2),
                          rose, spec)


def _aep_positions(pos: np.ndarray, rose: WindRose, spec: TurbineSpec) -> float:
    if len(pos) == 0:
        return 0.0
    nodes, weights, ct, beta = _node_physics(spec)
    total_w = 0.0
    for sector in rose.sectors:
        ssum = _deficit_sq_sums(pos, sector.direction, ct, beta, spec)
        eff = np.clip(nodes[:, None] * (1.0 - np.sqrt(ssum)), 0.0, None)
        farm = _power_np(eff, spec).sum(axis=1)
        pdf = _weibull_pdf(nodes, sector.weibull_k, sector.weibull_a)
        total_w += sector.probability * float((weights * pdf * farm).sum())
    return 8760.0 * total_w / 1e9


# ---------------------------------------------------------------------------
# Constraint penalties


@dataclass(frozen=True)
class OptConfig:
    boundary: geo.Polygon
    iterations: int = 400
    spacing_min: float = 1200.0
    penalty_weight: float = 0.1
    seed: int = 0
    sample_directions: int = 6
    lr_start: float = 30.0
    lr_end: float = 2.0
    fd_step: float = 5.0

    def __post_init__(self):
        if self.iterations <= 0:
            raise ValidationError("iterations must be positive")
        if self.spacing_min <= 0:
            raise ValidationError("spacing_min must be positive")
        for name in ("penalty_weight", "sample_directions", "lr_start", "lr_end",
                     "fd_step"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")


def _boundary_edges(anchor: geo.GeoPoint, boundary: geo.Polygon) -> np.ndarray:
    """All ring edges of the boundary in the anchor plane, shape (E, 2, 2)."""
    edges = []
    for ring in (boundary.outer, *boundary.holes):
        pts = [to_xy(anchor, p) for p in ring]
        edges.extend([(pts[i], pts[i + 1]) for i in range(len(pts) - 1)])
    return np.array(edges, dtype=float)


def _outside_mask(pos: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Even-odd test over all rings; True where a point is outside."""
    ax, ay = edges[:, 0, 0], edges[:, 0, 1]
    bx, by = edges[:, 1, 0], edges[:, 1, 1]
    px = pos[:, 0][:, None]
    py = pos[:, 1][:, None]
    straddles = (ay <= py) != (by <= py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = ax + (py - ay) * (bx - ax) / (by - ay)
    crossings = (straddles & (px < xcross)).sum(axis=1)
    return crossings % 2 == 0


def _edge_distance(pos: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Distance from each point to the nearest boundary edge."""
    a = edges[:, 0, :]
    ab = edges[:, 1, :] - a
    ap = pos[:, None, :] - a[None, :, :]
    denom = (ab * ab).sum(axis=1)
    t = np.clip((ap * ab[None, :, :]).sum(axis=2) / np.where(denom == 0, 1, denom),
                0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    return np.sqrt(((pos[:, None, :] - closest) ** 2).sum(axis=2)).min(axis=1)


def _outside_distances(pos: np.ndarray, edges: np.ndarray) -> np.ndarray:
    out = _outside_mask(pos, edges)
    dist = np.zeros(len(pos))
    if out.any():
        dist[out] = _edge_distance(pos[out], edges)
    return dist


def _spacing_shortfalls(pos: np.ndarray, spacing_min: float) -> np.ndarray:
    rel = pos[None, :, :] - pos[:, None, :]
    dist = np.sqrt((rel ** 2).sum(axis=2))
    short = np.triu(np.clip(spacing_min - dist, 0.0, None), k=1)
    return short[short > 0]


def penalties(layout: Layout, config: OptConfig) -> tuple[float, float]:
    """(spacing shortfall sum, boundary overshoot sum), both meters.

    Zero in both components exactly when every pairwise distance reaches
    spacing_min and every turbine is inside the boundary polygon.
    """
    pos = np.array(layout.positions, dtype=float).reshape(-1, 2)
    if len(pos) == 0:
        return 0.0, 0.0
    edges = _boundary_edges(layout.anchor, config.boundary)
    spacing = float(_spacing_shortfalls(pos, config.spacing_min).sum())
    boundary = float(_outside_distances(pos, edges).sum())
    return spacing, boundary


# ---------------------------------------------------------------------------
# Optimizer


@dataclass(frozen=True)
class TracePoint:
    iteration: int
    aep_gwh: float
    spacing_pen_m: float
    boundary_pen_m: float


@dataclass(frozen=True)
class OptResult:
    layout: Layout
    trace: tuple[TracePoint, ...]
    feasible: bool


def trace_csv(trace) -> str:
    lines = ["iteration,aep_gwh,spacing_pen_m,boundary_pen_m"]
    for pt in trace:
        lines.append(f"{pt.iteration},{pt.aep_gwh:.6f},"
                     f"{pt.spacing_pen_m:.6f},{pt.boundary_pen_m:.6f}")
    return "\n".join(lines) + "\n"


class _WakeField:
    """Incremental yield evaluator over a fixed direction subsample.

    Caches the squared-deficit tensor so that probing a single moved
    turbine only recomputes that turbine's row and column.
    """

    def __init__(self, pos: np.ndarray, sectors, spec: TurbineSpec):
        self.pos = pos
        self.spec = spec
        self.nodes, weights, self.ct, self.beta = _node_physics(spec)
        self.ct_b = self.ct[:, None]
        self.beta_b = self.beta[:, None]
        total_p = sum(s.probability for s in sectors)
        self.flows = []
        self.meas_w = []
        for s in sectors:
            self.flows.append(_flow_vectors(s.direction))
            pdf = _weibull_pdf(self.nodes, s.weibull_k, s.weibull_a)
            self.meas_w.append((s.probability / total_p) * weights * pdf)
        rel = pos[None, :, :] - pos[:, None, :]
        self.x = [rel @ f for f, _ in self.flows]
        self.y = [rel @ p for _, p in self.flows]
        self.defsq = [
            _defsq(x[None, :, :], y[None, :, :],
                   self.ct[:, None, None], self.beta[:, None, None], spec)
            for x, y in zip(self.x, self.y)]
        self.sums = [d.sum(axis=1) for d in self.defsq]

    def _value(self, sums_by_sector) -> float:
        total = 0.0
        for meas, ssum in zip(self.meas_w, sums_by_sector):
            eff = np.clip(self.nodes[:, None] * (1.0 - np.sqrt(ssum)), 0.0, None)
            farm = _power_np(eff, self.spec).sum(axis=1)
            total += float((meas * farm).sum())
        return 8760.0 * total / 1e9

    def aep(self) -> float:
        return self._value(self.sums)

    def probe(self, k: int, new_pos: np.ndarray) -> float:
        """Yield with turbine k moved to new_pos, caches untouched."""
        probe_sums = []
        for (flow, perp), defsq, base in zip(self.flows, self.defsq, self.sums):
            rel_out = self.pos - new_pos
            x_row = rel_out @ flow
            y_row = rel_out @ perp
            row = _defsq(x_row[None, :], y_row[None, :], self.ct_b, self.beta_b,
                         self.spec)
            row[:, k] = 0.0
            x_col = -x_row
            y_col = -y_row
            col = _defsq(x_col[None, :], y_col[None, :], self.ct_b, self.beta_b,
                         self.spec)
            col[:, k] = 0.0
            updated = base + (row - defsq[:, k, :])
            updated[:, k] = col.sum(axis=1)
            probe_sums.append(updated)
        return self._value(probe_sums)


def _quad_penalty(pos: np.ndarray, edges: np.ndarray, config: OptConfig) -> float:
    spacing = _spacing_shortfalls(pos, config.spacing_min)
    outside = _outside_distances(pos, edges)
    return config.penalty_weight * (float((spacing ** 2).sum())
                                    + float((outside ** 2).sum()))


def _quad_penalty_moved(pos: np.ndarray, k: int, new_pos: np.ndarray,
                        edges: np.ndarray, config: OptConfig) -> float:
    moved = pos.copy()
    moved[k] = new_pos
    return _quad_penalty(moved, edges, config)


def _gradient(pos: np.ndarray, field: _WakeField, edges: np.ndarray,
              config: OptConfig) -> np.ndarray:
    """Central finite differences of (yield - quadratic penalties)."""
    h = config.fd_step
    grad = np.zeros_like(pos)
    offsets = (np.array([h, 0.0]), np.array([0.0, h]))
    for k in range(len(pos)):
        for axis, off in enumerate(offsets):
            plus = (field.probe(k, pos[k] + off)
                    - _quad_penalty_moved(pos, k, pos[k] + off, edges, config))
            minus = (field.probe(k, pos[k] - off)
                     - _quad_penalty_moved(pos, k, pos[k] - off, edges, config))
            grad[k, axis] = (plus - minus) / (2.0 * h)
    return grad


def _project_feasible(pos: np.ndarray, edges: np.ndarray,
                      config: OptConfig) -> np.ndarray:
    """Best-effort repair: push violating pairs apart, pull strays inside."""
    pos = pos.copy()
    centroid = edges[:, 0, :].mean(axis=0)
    target = config.spacing_min * (1.0 + 1e-9)
    for _ in range(200):
        moved = False
        outside = _outside_distances(pos, edges)
        for i in np.nonzero(outside > 0)[0]:
            direction = centroid - pos[i]
            norm = np.hypot(*direction)
            if norm == 0:
                continue
            pos[i] += direction / norm * (outside[i] + 1.0)
            moved = True
        rel = pos[None, :, :] - pos[:, None, :]
        dist = np.sqrt((rel ** 2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        if dist[i, j] < config.spacing_min:
            gap = target - dist[i, j]
            direction = pos[j] - pos[i]
            norm = np.hypot(*direction)
            if norm == 0:
                direction, norm = np.array([1.0, 0.0]), 1.0
            shift = direction / norm * (gap / 2.0)
            pos[i] -= shift
            pos[j] += shift
            moved = True
        if not moved:
            return pos
    return pos


def optimize(layout0: Layout, rose: WindRose, spec: TurbineSpec,
             config: OptConfig) -> OptResult:
    """Stochastic gradient ascent on yield with quadratic constraint penalties.

    Each iteration draws a seeded subsample of wind-rose sectors, estimates
    the gradient by central finite differences with single-turbine delta
    updates, and takes a normalized step on a geometric learning-rate
    decay.  The best feasible iterate (including the starting layout) is
    remembered and returned; if no iterate is ever feasible, a push-apart
    and pull-inside repair is attempted and the result is flagged.
    """
    rng = np.random.default_rng(config.seed)
    pos = np.array(layout0.positions, dtype=float).reshape(-1, 2)
    edges = _boundary_edges(layout0.anchor, config.boundary)
    n_sectors = len(rose.sectors)
    n_sample = min(config.sample_directions, n_sectors)
    probs = np.array([s.probability for s in rose.sectors])
    probs = probs / probs.sum()

    def full_eval(p: np.ndarray) -> tuple[float, float, float]:
        yield_gwh = _aep_positions(p, rose, spec)
        spacing = float(_spacing_shortfalls(p, config.spacing_min).sum())
        boundary = float(_outside_distances(p, edges).sum())
        return yield_gwh, spacing, boundary

    trace = []
    best = None
    aep0, sp0, bd0 = full_eval(pos)
    trace.append(TracePoint(0, aep0, sp0, bd0))
    if sp0 == 0.0 and bd0 == 0.0:
        best = (aep0, pos.copy())

    for it in range(1, config.iterations + 1):
        picked = rng.choice(n_sectors, size=n_sample, replace=False, p=probs)
        sectors = [rose.sectors[i] for i in sorted(picked)]
        field = _WakeField(pos, sectors, spec)
        grad = _gradient(pos, field, edges, config)
        norm = float(np.sqrt((grad ** 2).sum()))
        if norm > 0:
            if config.iterations > 1:
                decay = (config.lr_end / config.lr_start) ** ((it - 1) / (config.iterations - 1))
            else:
                decay = 1.0
            pos = pos + config.lr_start * decay * grad / norm
        aep_t, sp, bd = full_eval(pos)
        trace.append(TracePoint(it, aep_t, sp, bd))
        if sp == 0.0 and bd == 0.0 and (best is None or aep_t > best[0]):
            best = (aep_t, pos.copy())

    if best is not None:
        final, feasible = best[1], True
    else:
        final = _project_feasible(pos, edges, config)
        _, sp, bd = full_eval(final)
        feasible = sp == 0.0 and bd == 0.0
    result = Layout(
        anchor=layout0.anchor,
        positions=tuple((float(x), float(y)) for x, y in final),
        ids=layout0.ids,
        rows=layout0.rows,
    )
    return OptResult(result, tuple(trace), feasible)


# ---------------------------------------------------------------------------
# Grid seeding


def _principal_axes(verts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    centered = verts - verts.mean(axis=0)
    cov = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    major = eigvecs[:, int(np.argmax(eigvals))]
    if major[1] < 0 or (major[1] == 0 and major[0] < 0):
        major = -major
    minor = np.array([-major[1], major[0]])
    return major, minor


def generate_grid_layout(rows: int, count: int, boundary: geo.Polygon,
                         spacing_min: float = 1200.0) -> Layout:
    """Near-regular grid: rows stacked along the boundary's long axis.

    Row sizes differ by at most one.  The grid is scaled to the boundary
    extent with a margin, retrying with larger margins if corner cuts push
    points outside; if no margin fits, the boundary is too small.
    """
    if rows <= 0 or count <= 0:
        raise ValidationError("rows and count must be positive")
    if count < rows:
        raise ValidationError("need at least one turbine per row")
    ring = boundary.outer[:-1]
    anchor = geo.GeoPoint(lon=sum(p.lon for p in ring) / len(ring),
                          lat=sum(p.lat for p in ring) / len(ring))
    verts = np.array([to_xy(anchor, p) for p in ring])
    major, minor = _principal_axes(verts)
    u = verts @ major
    v = verts @ minor
    base, extra = divmod(count, rows)
    sizes = [base + 1] * extra + [base] * (rows - extra)

    for margin in (0.02, 0.06, 0.12, 0.2, 0.3):
        ulo = u.min() + margin * (u.max() - u.min())
        uhi = u.max() - margin * (u.max() - u.min())
        vlo = v.min() + margin * (v.max() - v.min())
        vhi = v.max() - margin * (v.max() - v.min())
        positions = []
        row_ids = []
        for r, size in enumerate(sizes):
            ur = 0.5 * (ulo + uhi) if rows == 1 else ulo + r * (uhi - ulo) / (rows - 1)
            for j in range(size):
                vj = 0.5 * (vlo + vhi) if size == 1 else vlo + j * (vhi - vlo) / (size - 1)
                positions.append(tuple(ur * major + vj * minor))
                row_ids.append(r + 1)
        pos = np.array(positions)
        rel = pos[None, :, :] - pos[:, None, :]
        dist = np.sqrt((rel ** 2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        if dist.min() < spacing_min:
            continue
        points = [to_lonlat(anchor, x, y) for x, y in positions]
        if all(geo.contains(boundary, geo.Point(p)) for p in points):
            return Layout(
                anchor=anchor,
                positions=tuple((float(x), float(y)) for x, y in positions),
                ids=tuple(f"T{i + 1:03d}" for i in range(count)),
                rows=tuple(row_ids),
            )
    raise LayoutError(
        f"boundary cannot contain {count} turbines in {rows} rows "
        f"at {spacing_min} m spacing")


# ---------------------------------------------------------------------------
# Layout comparison


@dataclass(frozen=True)
class RowDeviation:
    row: str
    mean_x: float
    std_dev_x: float
    mean_y: float
    std_dev_y: float


def _greedy_pairs(a_pts: list, b_pts: list) -> list[tuple[int, int]]:
    remaining_a = set(range(len(a_pts)))
    remaining_b = set(range(len(b_pts)))
    pairs = []
    dists = sorted(
        (math.dist(a_pts[i], b_pts[j]), i, j)
        for i in remaining_a for j in remaining_b)
    for _, i, j in dists:
        if i in remaining_a and j in remaining_b:
            pairs.append((i, j))
            remaining_a.remove(i)
            remaining_b.remove(j)
    return pairs


def row_deviation_stats(layout_a: Layout, layout_b: Layout,
                        rows=None) -> tuple[RowDeviation, ...]:
    """Per-row and overall positional deviation between two layouts.

    Turbines are matched greedily (closest pairs first) within each row,
    then the absolute east/north differences are summarized per row plus a
    pooled Overall row.  Statistics are mean and population standard
    deviation of the absolute differences, in meters.
    """
    if len(layout_a) != len(layout_b):
        raise ValidationError(
            f"layouts have {len(layout_a)} and {len(layout_b)} turbines")
    rows_a = tuple(rows) if rows is not None else layout_a.rows
    rows_b = tuple(rows) if rows is not None else layout_b.rows
    if rows_a is None or rows_b is None:
        raise ValidationError("both layouts need a row assignment")
    a_xy = list(layout_a.positions)
    # Compare in layout_a's anchor frame.
    b_xy = [to_xy(layout_a.anchor, p) for p in layout_b.points()]
    labels = sorted(set(rows_a))
    if sorted(set(rows_b)) != labels:
        raise ValidationError("row labels differ between layouts")
    all_dx, all_dy = [], []
    out = []

    def stats(label: str, dx: list, dy: list) -> RowDeviation:
        ax = np.abs(np.array(dx))
        ay = np.abs(np.array(dy))
        return RowDeviation(label, float(ax.mean()), float(ax.std()),
                            float(ay.mean()), float(ay.std()))

    for label in labels:
        ia = [i for i, r in enumerate(rows_a) if r == label]
        ib = [i for i, r in enumerate(rows_b) if r == label]
        if len(ia) != len(ib):
            raise ValidationError(f"row {label} has {len(ia)} vs {len(ib)} turbines")
        pairs = _greedy_pairs([a_xy[i] for i in ia], [b_xy[i] for i in ib])
        dx = [a_xy[ia[i]][0] - b_xy[ib[j]][0] for i, j in pairs]
        dy = [a_xy[ia[i]][1] - b_xy[ib[j]][1] for i, j in pairs]
        all_dx.extend(dx)
        all_dy.extend(dy)
        out.append(stats(str(label), dx, dy))
    out.append(stats("Overall", all_dx, all_dy))
    return tuple(out)


def deviation_report_csv(stats) -> str:
    lines = ["row,mean_x,std_dev_x,mean_y,std_dev_y"]
    for row in stats:
        lines.append(f"{row.row},{row.mean_x:.2f},{row.std_dev_x:.2f},"
                     f"{row.mean_y:.2f},{row.std_dev_y:.2f}")
    return "\n".join(lines) + "\n"
