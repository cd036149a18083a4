"""Planar convex hulls (monotone chain) and point-in-polygon tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hullgap.errors import InputError

# relative tolerance for orientation tests; boundary points count as inside
EPS = 1e-12


@dataclass(frozen=True, eq=False)
class HullPolygon:
    """Counter-clockwise hull vertices starting at the lexicographic minimum.

    One vertex for a single point, two for a segment.
    """

    vertices: np.ndarray

    def __len__(self):
        return self.vertices.shape[0]


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def hull_2d(points) -> HullPolygon:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise InputError("hull_2d needs at least one point")
    uniq = sorted({(float(x), float(y)) for x, y in pts})
    if len(uniq) <= 2:
        return HullPolygon(np.array(uniq))

    def chain(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = chain(uniq)
    upper = chain(reversed(uniq))
    verts = lower[:-1] + upper[:-1]
    return HullPolygon(np.array(verts))


def point_in_polygon(p, polygon: HullPolygon) -> bool:
    return bool(polygon_mask(polygon, np.asarray(p, dtype=np.float64).reshape(1, 2))[0])


def polygon_mask(polygon: HullPolygon, points) -> np.ndarray:
    """Vectorized inside test for many points; the boundary counts as inside."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    v = polygon.vertices
    scale = max(1.0, float(np.abs(v).max()), float(np.abs(pts).max()) if pts.size else 1.0)
    tol = EPS * scale * scale
    if len(v) == 1:
        return np.all(np.abs(pts - v[0]) <= EPS * scale, axis=1)
    if len(v) == 2:
        a, b = v
        ab = b - a
        ap = pts - a
        cross = ab[0] * ap[:, 1] - ab[1] * ap[:, 0]
        t = ap @ ab / float(ab @ ab)
        return (np.abs(cross) <= tol) & (t >= -EPS) & (t <= 1 + EPS)
    inside = np.ones(pts.shape[0], dtype=bool)
    for a, b in zip(v, np.roll(v, -1, axis=0)):
        cross = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
        inside &= cross >= -tol
    return inside
