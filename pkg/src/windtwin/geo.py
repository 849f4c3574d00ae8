"""Geodesy and planar geometry for siting and proximity checks.

All coordinates are geographic longitude/latitude in decimal degrees,
WGS84-style axis order (longitude first, matching WKT ``POINT (lon lat)``).
Great-circle math treats the earth as a sphere of radius 6371.0 km.
Distances between non-point geometries are evaluated in a local
equirectangular projection centered on the pair being compared, which is
accurate to well under 0.1% at the tens-of-kilometres scale this toolkit
works at.

Topological predicates (``contains``, ``intersects``) treat boundaries as
part of the geometry: a point on a polygon edge is contained, and two
polygons sharing only an edge intersect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ParseError, ValidationError

EARTH_RADIUS_KM = 6371.0
METERS_PER_DEG = EARTH_RADIUS_KM * 1000.0 * math.pi / 180.0

# Perpendicular tolerance (degrees) for treating a point as lying on a
# segment; ~0.1 micrometre at the equator.
_ON_SEGMENT_EPS = 1e-12


@dataclass(frozen=True)
class GeoPoint:
    """A longitude/latitude pair in decimal degrees."""

    lon: float
    lat: float

    def __post_init__(self):
        # Coerce numpy scalars so repr-based serialization stays clean.
        object.__setattr__(self, "lon", float(self.lon))
        object.__setattr__(self, "lat", float(self.lat))
        if not (math.isfinite(self.lon) and math.isfinite(self.lat)):
            raise ValidationError(f"non-finite coordinate ({self.lon}, {self.lat})")
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError(f"longitude {self.lon} outside [-180, 180]")
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"latitude {self.lat} outside [-90, 90]")


class Geometry:
    """Marker base class for WKT-expressible geometries."""

    __slots__ = ()


@dataclass(frozen=True)
class Point(Geometry):
    point: GeoPoint


@dataclass(frozen=True)
class LineString(Geometry):
    points: tuple[GeoPoint, ...]

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValidationError("linestring needs at least 2 points")
        for a, b in zip(self.points, self.points[1:]):
            if a == b:
                raise ValidationError("linestring has consecutive duplicate points")


@dataclass(frozen=True)
class Polygon(Geometry):
    """Outer ring plus optional hole rings.

    Rings must be explicitly closed (first point repeated last), contain at
    least three distinct vertices, and must not self-intersect.
    """

    outer: tuple[GeoPoint, ...]
    holes: tuple[tuple[GeoPoint, ...], ...] = field(default=())

    def __post_init__(self):
        for ring in self.rings():
            _check_ring(ring)

    def rings(self):
        return (self.outer, *self.holes)


def _check_ring(ring):
    if len(ring) < 4:
        raise ValidationError("ring needs at least 4 points (closed triangle)")
    if ring[0] != ring[-1]:
        raise ValidationError("ring is not closed (first point must repeat last)")
    segs = list(zip(ring[:-1], ring[1:]))
    for a, b in segs:
        if a == b:
            raise ValidationError("ring has a zero-length edge")
    n = len(segs)
    for i in range(n):
        for j in range(i + 1, n):
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            if adjacent:
                continue
            a, b = segs[i]
            c, d = segs[j]
            if _segments_intersect((a.lon, a.lat), (b.lon, b.lat),
                                   (c.lon, c.lat), (d.lon, d.lat)):
                raise ValidationError(f"ring self-intersects (edges {i} and {j})")


# ---------------------------------------------------------------------------
# WKT


def parse_wkt(text: str) -> Geometry:
    """Parse a WKT POINT, LINESTRING, or POLYGON (lon lat axis order).

    Keywords are case-insensitive and whitespace is free-form. Raises
    ParseError with the character position on malformed input.
    """

    if not isinstance(text, str):
        raise ParseError("WKT input must be a string")
    scanner = _WktScanner(text)
    keyword = scanner.keyword()
    if keyword == "POINT":
        scanner.expect("(")
        pt = scanner.coordinate()
        scanner.expect(")")
        scanner.end()
        return Point(pt)
    if keyword == "LINESTRING":
        pts = scanner.coordinate_list()
        scanner.end()
        return _validated(LineString, scanner, points=tuple(pts))
    if keyword == "POLYGON":
        scanner.expect("(")
        rings = [tuple(scanner.coordinate_list())]
        while scanner.peek() == ",":
            scanner.expect(",")
            rings.append(tuple(scanner.coordinate_list()))
        scanner.expect(")")
        scanner.end()
        return _validated(Polygon, scanner, outer=rings[0], holes=tuple(rings[1:]))
    raise ParseError(f"unknown geometry type {keyword!r}", column=1)


def _validated(cls, scanner, **kwargs):
    try:
        return cls(**kwargs)
    except ValidationError as exc:
        raise ParseError(str(exc), column=scanner.pos + 1) from exc


def serialize_wkt(geometry: Geometry) -> str:
    """Render a geometry as WKT with shortest round-trip decimals."""

    if isinstance(geometry, Point):
        return f"POINT ({_coord(geometry.point)})"
    if isinstance(geometry, LineString):
        return f"LINESTRING ({_coords(geometry.points)})"
    if isinstance(geometry, Polygon):
        rings = ", ".join(f"({_coords(ring)})" for ring in geometry.rings())
        return f"POLYGON ({rings})"
    raise ValidationError(f"cannot serialize {type(geometry).__name__}")


def _coord(p: GeoPoint) -> str:
    return f"{p.lon!r} {p.lat!r}"


def _coords(points) -> str:
    return ", ".join(_coord(p) for p in points)


class _WktScanner:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def _skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def _fail(self, message):
        raise ParseError(message, column=self.pos + 1)

    def peek(self):
        self._skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def keyword(self):
        self._skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isalpha():
            self.pos += 1
        if start == self.pos:
            self._fail("expected geometry keyword")
        return self.text[start:self.pos].upper()

    def expect(self, char):
        self._skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != char:
            self._fail(f"expected {char!r}")
        self.pos += 1

    def number(self):
        self._skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] in "+-0123456789.eE":
            self.pos += 1
        token = self.text[start:self.pos]
        try:
            value = float(token)
        except ValueError:
            self.pos = start
            self._fail(f"expected a number, got {token!r}")
        if not math.isfinite(value):
            self.pos = start
            self._fail(f"non-finite coordinate {token!r}")
        return value

    def coordinate(self):
        lon = self.number()
        lat = self.number()
        try:
            return GeoPoint(lon, lat)
        except ValidationError as exc:
            self._fail(str(exc))

    def coordinate_list(self):
        self.expect("(")
        pts = [self.coordinate()]
        while self.peek() == ",":
            self.expect(",")
            pts.append(self.coordinate())
        self.expect(")")
        return pts

    def end(self):
        self._skip_ws()
        if self.pos != len(self.text):
            self._fail(f"trailing input {self.text[self.pos:]!r}")


# ---------------------------------------------------------------------------
# Great-circle math


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points in kilometres.

    Uses the haversine formulation on a sphere of radius 6371.0 km, which
    is numerically stable for both small and near-antipodal separations.
    """

    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = (math.sin(dphi / 2.0) ** 2
         + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2)
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def bearing_deg(a: GeoPoint, b: GeoPoint) -> float:
    """Initial great-circle bearing from a to b, degrees clockwise from north.

    Due north is 0, due east 90. Raises ValidationError for coincident
    points, where the bearing is undefined.
    """

    if a.lon == b.lon and a.lat == b.lat:
        raise ValidationError("bearing undefined for coincident points")
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dlam = math.radians(b.lon - a.lon)
    x = math.sin(dlam) * math.cos(phi2)
    y = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)
    return math.degrees(math.atan2(x, y)) % 360.0


# ---------------------------------------------------------------------------
# Planar primitives (shared with the layout optimizer, which works in a
# local metric frame). Points are plain (x, y) tuples.


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _on_segment(p, a, b, eps=_ON_SEGMENT_EPS):
    ab = math.hypot(b[0] - a[0], b[1] - a[1])
    if ab == 0.0:
        return math.hypot(p[0] - a[0], p[1] - a[1]) <= eps
    if abs(_cross(a, b, p)) > eps * ab:
        return False
    dot = (p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])
    return -eps * ab <= dot <= ab * ab + eps * ab


def _segments_intersect(a, b, c, d):
    d1 = _cross(c, d, a)
    d2 = _cross(c, d, b)
    d3 = _cross(a, b, c)
    d4 = _cross(a, b, d)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and \
       ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    return (_on_segment(a, c, d) or _on_segment(b, c, d)
            or _on_segment(c, a, b) or _on_segment(d, a, b))


def point_in_ring(p, ring) -> bool:
    """Even-odd test of an (x, y) point against a closed coordinate ring.

    Boundary points are not guaranteed a stable answer here; callers that
    need inclusive boundaries must test the boundary separately.
    """

    inside = False
    for (x1, y1), (x2, y2) in zip(ring[:-1], ring[1:]):
        if (y1 > p[1]) != (y2 > p[1]):
            x_cross = x1 + (p[1] - y1) * (x2 - x1) / (y2 - y1)
            if p[0] < x_cross:
                inside = not inside
    return inside


def point_segment_distance(p, a, b) -> float:
    """Planar distance from point p to segment ab."""

    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return math.hypot(p[0] - ax, p[1] - ay)
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / seg2
    t = max(0.0, min(1.0, t))
    return math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))


def segment_segment_distance(a, b, c, d) -> float:
    if _segments_intersect(a, b, c, d):
        return 0.0
    return min(point_segment_distance(a, c, d),
               point_segment_distance(b, c, d),
               point_segment_distance(c, a, b),
               point_segment_distance(d, a, b))


# ---------------------------------------------------------------------------
# Predicates on geographic geometries


def _xy(p: GeoPoint):
    return (p.lon, p.lat)


def _vertices(g: Geometry):
    if isinstance(g, Point):
        return (g.point,)
    if isinstance(g, LineString):
        return g.points
    if isinstance(g, Polygon):
        return tuple(p for ring in g.rings() for p in ring)
    raise ValidationError(f"unsupported geometry {type(g).__name__}")


def _edges(g: Geometry):
    """Segments of a geometry in (x, y) tuples; a point is a degenerate one."""

    if isinstance(g, Point):
        p = _xy(g.point)
        return [(p, p)]
    if isinstance(g, LineString):
        pts = [_xy(p) for p in g.points]
        return list(zip(pts[:-1], pts[1:]))
    if isinstance(g, Polygon):
        out = []
        for ring in g.rings():
            pts = [_xy(p) for p in ring]
            out.extend(zip(pts[:-1], pts[1:]))
        return out
    raise ValidationError(f"unsupported geometry {type(g).__name__}")


def contains(polygon: Polygon, point) -> bool:
    """True when the point lies inside the polygon or on its boundary.

    Points inside a hole ring are outside. Accepts a GeoPoint or a Point
    geometry.
    """

    if isinstance(point, Point):
        point = point.point
    if not isinstance(polygon, Polygon):
        raise ValidationError("contains expects a polygon as first argument")
    p = _xy(point)
    for ring in polygon.rings():
        pts = [_xy(q) for q in ring]
        for a, b in zip(pts[:-1], pts[1:]):
            if _on_segment(p, a, b):
                return True
    inside = False
    for ring in polygon.rings():
        if point_in_ring(p, [_xy(q) for q in ring]):
            inside = not inside
    return inside


def intersects(a: Geometry, b: Geometry) -> bool:
    """True when the two geometries share at least one point.

    Boundary contact counts: polygons sharing an edge or a single vertex
    intersect.
    """

    if isinstance(a, Point) and isinstance(b, Point):
        return a.point == b.point
    if isinstance(a, Point):
        return intersects(b, a)
    if isinstance(b, Point):
        if isinstance(a, Polygon):
            return contains(a, b.point)
        p = _xy(b.point)
        return any(_on_segment(p, s, e) for s, e in _edges(a))
    if isinstance(a, Polygon) and any(contains(a, v) for v in _vertices(b)):
        return True
    if isinstance(b, Polygon) and any(contains(b, v) for v in _vertices(a)):
        return True
    edges_b = _edges(b)
    return any(_segments_intersect(s1, e1, s2, e2)
               for s1, e1 in _edges(a) for s2, e2 in edges_b)


def min_distance_m(a: Geometry, b: Geometry) -> float:
    """Minimum separation between two geometries in metres.

    Point-to-point separation is exactly ``haversine_km * 1000``; anything
    else is measured in a local equirectangular plane centered between the
    two geometries. Touching or overlapping geometries are at distance 0.
    """

    if isinstance(a, Point) and isinstance(b, Point):
        return haversine_km(a.point, b.point) * 1000.0
    if intersects(a, b):
        return 0.0
    verts = [*_vertices(a), *_vertices(b)]
    lon0 = sum(p.lon for p in verts) / len(verts)
    lat0 = sum(p.lat for p in verts) / len(verts)
    klon = METERS_PER_DEG * math.cos(math.radians(lat0))
    klat = METERS_PER_DEG

    def project(seg):
        (x1, y1), (x2, y2) = seg
        return (((x1 - lon0) * klon, (y1 - lat0) * klat),
                ((x2 - lon0) * klon, (y2 - lat0) * klat))

    edges_a = [project(s) for s in _edges(a)]
    edges_b = [project(s) for s in _edges(b)]
    return min(segment_segment_distance(p1, p2, q1, q2)
               for p1, p2 in edges_a for q1, q2 in edges_b)


def within_distance(a: Geometry, b: Geometry, distance_m: float) -> bool:
    """True when the geometries are separated by at most distance_m metres."""

    return min_distance_m(a, b) <= distance_m
