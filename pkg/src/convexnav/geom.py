"""Convex obstacle-free regions built from 2D point clouds, plus polygon queries.

Regions are stored as clockwise vertex arrays.  Every predicate works on the
signed distance of a query point to each edge line, which is the edge-length
normalised form of ``cross(P_j - q, P_{j+1} - q)``; negative means inside.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import StartOutsideRegion

GEOM_TOL = 1e-9
TWO_PI = 2.0 * math.pi


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class ConvexRegion:
    """Clockwise convex polygon of free space around ``origin``."""

    vertices: np.ndarray
    origin: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(2))

    @property
    def num_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def area(self) -> float:
        return -signed_area(self.vertices)

    @property
    def centroid(self) -> np.ndarray:
        return polygon_centroid(self.vertices)

    def translated(self, offset: Sequence[float]) -> "ConvexRegion":
        off = np.asarray(offset, dtype=float)
        return ConvexRegion(self.vertices + off, self.origin + off)

    def is_valid(self, tol: float = GEOM_TOL) -> bool:
        if self.num_vertices < 3 or not np.all(np.isfinite(self.vertices)):
            return False
        return is_convex_clockwise(self.vertices, tol) and point_in_convex(self, self.origin, tol)

    def to_dict(self) -> dict:
        return {
            "origin": [float(v) for v in self.origin],
            "vertices": [[float(x), float(y)] for x, y in self.vertices],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ConvexRegion":
        return cls(np.array(payload["vertices"], dtype=float), np.array(payload["origin"], dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ConvexRegion":
        return cls.from_dict(json.loads(text))


def signed_area(vertices: np.ndarray) -> float:
    """Shoelace area; positive for counter-clockwise order."""
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(vertices: np.ndarray) -> np.ndarray:
    x, y = vertices[:, 0], vertices[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    if abs(a) < 1e-15:
        return vertices.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * a)
    cy = ((y + yn) * cross).sum() / (6.0 * a)
    return np.array([cx, cy])


def half_planes(vertices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit outward normals ``n`` and offsets ``b`` with inside <=> ``n @ x <= b``.

    One row per edge, closing edge included.
    """
    edges = np.roll(vertices, -1, axis=0) - vertices
    normals = np.column_stack((-edges[:, 1], edges[:, 0]))
    lengths = np.hypot(normals[:, 0], normals[:, 1])
    lengths[lengths == 0.0] = 1.0
    normals = normals / lengths[:, None]
    offsets = np.einsum("ij,ij->i", normals, vertices)
    return normals, offsets


def edge_signed_distances(vertices: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Signed distance of each point to each edge line, shape ``(k, n)``."""
    normals, offsets = half_planes(vertices)
    return np.atleast_2d(points) @ normals.T - offsets


def is_convex_clockwise(vertices: np.ndarray, tol: float = GEOM_TOL) -> bool:
    a = vertices
    b = np.roll(vertices, -1, axis=0)
    c = np.roll(vertices, -2, axis=0)
    ab, bc = b - a, c - b
    cross = ab[:, 0] * bc[:, 1] - ab[:, 1] * bc[:, 0]
    scale = np.maximum(np.hypot(ab[:, 0], ab[:, 1]) * np.hypot(bc[:, 0], bc[:, 1]), 1.0)
    return bool(np.all(cross <= tol * scale)) and signed_area(vertices) < 0.0


def point_in_convex(region: ConvexRegion, q: Sequence[float], tol: float = GEOM_TOL) -> bool:
    """True iff ``q`` is inside the region or on its boundary (within ``tol``)."""
    dist = edge_signed_distances(region.vertices, np.asarray(q, dtype=float))
    return bool(np.all(dist <= tol))


def points_in_convex(region: ConvexRegion, points: np.ndarray, tol: float = GEOM_TOL) -> np.ndarray:
    dist = edge_signed_distances(region.vertices, np.asarray(points, dtype=float))
    return np.all(dist <= tol, axis=1)


def strictly_inside(region: ConvexRegion, q: Sequence[float], tol: float = GEOM_TOL) -> bool:
    dist = edge_signed_distances(region.vertices, np.asarray(q, dtype=float))
    return bool(np.all(dist < -tol))


def regular_polygon(center: Sequence[float], radius: float, sides: int) -> np.ndarray:
    """Clockwise regular polygon with vertices on the circle, first vertex at angle 0."""
    phi = -TWO_PI * np.arange(sides) / sides
    c = np.asarray(center, dtype=float)
    return c + radius * np.column_stack((np.cos(phi), np.sin(phi)))


def _dedupe(vertices: list) -> list:
    out = []
    for v in vertices:
        if not out or abs(v[0] - out[-1][0]) > 1e-12 or abs(v[1] - out[-1][1]) > 1e-12:
            out.append(v)
    while len(out) > 1 and abs(out[0][0] - out[-1][0]) <= 1e-12 and abs(out[0][1] - out[-1][1]) <= 1e-12:
        out.pop()
    return out


def clip_half_plane(vertices: list, nx: float, ny: float, b: float) -> list:
    """Keep the part of a convex polygon with ``nx*x + ny*y <= b``.

    Vertices are ``(x, y)`` tuples; order is preserved.
    """
    n = len(vertices)
    s = [nx * x + ny * y - b for x, y in vertices]
    out = []
    for i in range(n):
        j = (i + 1) % n
        si, sj = s[i], s[j]
        if si <= 0.0:
            out.append(vertices[i])
        if (si < 0.0 < sj) or (sj < 0.0 < si):
            t = si / (si - sj)
            xi, yi = vertices[i]
            xj, yj = vertices[j]
            out.append((xi + t * (xj - xi), yi + t * (yj - yi)))
    return _dedupe(out)


def build_convex_region(
    cloud: np.ndarray | Sequence[Sequence[float]],
    origin: Sequence[float],
    max_range: float,
    seed_sides: int = 24,
) -> ConvexRegion:
    """Carve a convex free-space polygon around ``origin`` out of a point cloud.

    Starts from a regular ``seed_sides``-gon inscribed in the sensor disc and,
    visiting points nearest first, cuts away the half-plane beyond every point
    that is still strictly inside.  Each cut passes through the point with its
    normal along origin->point, so the origin always survives.
    """
    if max_range <= 0:
        raise ValueError("max_range must be positive")
    if seed_sides < 8:
        raise ValueError("seed_sides must be at least 8")
    o = np.asarray(origin, dtype=float).reshape(2)
    seed = regular_polygon((0.0, 0.0), max_range, seed_sides)
    pts = np.asarray(cloud, dtype=float).reshape(-1, 2) - o
    cuts: list[tuple[float, float, float]] = []
    if len(pts):
        dist = np.hypot(pts[:, 0], pts[:, 1])
        order = np.argsort(dist, kind="stable")
        pts, dist = pts[order], dist[order]
        inside = np.all(edge_signed_distances(seed, pts) < -GEOM_TOL, axis=1)
        start = 0
        while True:
            rest = np.flatnonzero(inside[start:])
            if rest.size == 0:
                break
            j = start + int(rest[0])
            n = pts[j] / dist[j]
            cuts.append((float(n[0]), float(n[1]), float(dist[j])))
            inside &= pts @ n < dist[j] - GEOM_TOL
            start = j + 1
    poly = [(float(x), float(y)) for x, y in seed]
    for nx, ny, b in cuts:
        poly = clip_half_plane(poly, nx, ny, b)
    verts = np.array(poly, dtype=float) + o
    return ConvexRegion(verts, o)


def _split_longest(verts: list, target: int) -> list:
    verts = list(verts)
    while len(verts) < target:
        n = len(verts)
        best, best_len = 0, -1.0
        for i in range(n):
            ax, ay = verts[i]
            bx, by = verts[(i + 1) % n]
            length = (bx - ax) ** 2 + (by - ay) ** 2
            if length > best_len:
                best, best_len = i, length
        ax, ay = verts[best]
        bx, by = verts[(best + 1) % n]
        verts.insert(best + 1, (0.5 * (ax + bx), 0.5 * (ay + by)))
    return verts


def _drop_smallest(verts: np.ndarray, origin: np.ndarray, target: int) -> np.ndarray:
    v = verts.copy()
    while len(v) > target:
        prev = np.roll(v, 1, axis=0)
        nxt = np.roll(v, -1, axis=0)
        a = v - prev
        c = nxt - prev
        area = 0.5 * np.abs(a[:, 0] * c[:, 1] - a[:, 1] * c[:, 0])
        # chord prev->next becomes the new edge; origin must stay strictly inside it
        chord_len = np.hypot(c[:, 0], c[:, 1])
        chord_len[chord_len == 0.0] = 1.0
        w = origin - prev
        margin = -(c[:, 0] * w[:, 1] - c[:, 1] * w[:, 0]) / chord_len
        ok = margin > GEOM_TOL
        if ok.any():
            area = np.where(ok, area, np.inf)
            k = int(np.argmin(area))
        else:
            k = int(np.argmax(margin))
        v = np.delete(v, k, axis=0)
    return v


def normalize_vertex_count(region: ConvexRegion, rnum_v: int) -> ConvexRegion:
    """Resample a region to exactly ``rnum_v`` vertices.

    Too few vertices: split the longest edge at its midpoint (shape unchanged).
    Too many: drop the vertex whose removal loses the least area, which only
    ever shrinks the polygon.
    """
    if rnum_v < 3:
        raise ValueError("rnum_v must be at least 3")
    n = region.num_vertices
    if n == rnum_v:
        return region
    if n < rnum_v:
        verts = _split_longest([tuple(p) for p in region.vertices.tolist()], rnum_v)
        return ConvexRegion(np.array(verts, dtype=float), region.origin)
    return ConvexRegion(_drop_smallest(region.vertices, region.origin, rnum_v), region.origin)


def erode_convex(region: ConvexRegion, margin: float) -> ConvexRegion | None:
    """Points of ``region`` at least ``margin`` from its boundary.

    Every edge moves inward by ``margin``; the shifted half-planes are
    intersected by clipping the original polygon.  Returns ``None`` when the
    origin does not stay strictly inside.
    """
    if margin <= 0.0:
        return region
    normals, offsets = half_planes(region.vertices)
    verts = [tuple(p) for p in region.vertices.tolist()]
    for (nx, ny), b in zip(normals.tolist(), offsets.tolist()):
        verts = clip_half_plane(verts, nx, ny, b - margin)
        if len(verts) < 3:
            return None
    out = ConvexRegion(np.array(verts, dtype=float), region.origin)
    if not strictly_inside(out, out.origin):
        return None
    return out


def ray_polygon_distance(region: ConvexRegion, start: Sequence[float], theta: float) -> tuple[np.ndarray, float]:
    """Boundary hit of the ray from ``start`` at angle ``theta``.

    The edge is found from the polar angles of the vertices around ``start``,
    then the ray and edge lines are intersected.
    """
    s = np.asarray(start, dtype=float)
    if not strictly_inside(region, s):
        raise StartOutsideRegion(f"ray start {s.tolist()} is not strictly inside the region")
    rel = region.vertices - s
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    span = np.mod(ang - np.roll(ang, -1), TWO_PI)
    offset = np.mod(ang - theta, TWO_PI)
    offset = np.where(offset > TWO_PI - 1e-12, 0.0, offset)
    candidates = np.flatnonzero(offset <= span + 1e-12)
    d = np.array([math.cos(theta), math.sin(theta)])
    n = len(rel)
    best = None
    for j in candidates:
        a = rel[j]
        e = rel[(j + 1) % n] - a
        denom = d[0] * e[1] - d[1] * e[0]
        if denom == 0.0:
            continue
        t = (a[0] * e[1] - a[1] * e[0]) / denom
        if t > 0.0 and (best is None or t < best):
            best = t
    if best is None:
        best = ray_exit_distance(region, s, theta)
    return s + best * d, float(best)


def ray_exit_distance(region: ConvexRegion, start: Sequence[float], theta: float) -> float:
    """Distance along the ray to the boundary for a start inside or on the region.

    Half-plane (Cyrus-Beck) form; returns 0 when the ray leaves immediately.
    """
    s = np.asarray(start, dtype=float)
    normals, offsets = half_planes(region.vertices)
    d = np.array([math.cos(theta), math.sin(theta)])
    rate = normals @ d
    slack = np.maximum(offsets - normals @ s, 0.0)
    leaving = rate > 1e-15
    if not leaving.any():
        return 0.0
    return float(np.min(slack[leaving] / rate[leaving]))
