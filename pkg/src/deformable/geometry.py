"""Polyline geometry shared by the solvers and the benchmarks."""

from __future__ import annotations

import numpy as np


def signed_area(pts: np.ndarray) -> float:
    """Shoelace area of a closed polygon; positive for counter-clockwise."""
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def perimeter(pts: np.ndarray) -> float:
    return float(np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1).sum())


def distance_to_polyline(points: np.ndarray, poly: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Unsigned distance from each point to the closed polyline ``poly``."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    a = poly
    b = np.roll(poly, -1, axis=0)
    best = np.full(len(points), np.inf)
    px = points[:, 0:1]
    py = points[:, 1:2]
    for s in range(0, len(a), chunk):
        ax, ay = a[s:s + chunk, 0], a[s:s + chunk, 1]
        dx, dy = b[s:s + chunk, 0] - ax, b[s:s + chunk, 1] - ay
        len2 = dx * dx + dy * dy
        t = ((px - ax) * dx + (py - ay) * dy) / np.where(len2 > 0, len2, 1.0)
        t = np.clip(t, 0.0, 1.0)
        ex = px - (ax + t * dx)
        ey = py - (ay + t * dy)
        best = np.minimum(best, np.sqrt(ex * ex + ey * ey).min(axis=1))
    return best


def inside_polygon(points: np.ndarray, poly: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Even-odd rule membership test."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    a = poly
    b = np.roll(poly, -1, axis=0)
    inside = np.zeros(len(points), dtype=bool)
    px = points[:, 0:1]
    py = points[:, 1:2]
    for s in range(0, len(a), chunk):
        ax, ay = a[s:s + chunk, 0], a[s:s + chunk, 1]
        bx, by = b[s:s + chunk, 0], b[s:s + chunk, 1]
        straddle = (ay > py) != (by > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = ax + (py - ay) * (bx - ax) / (by - ay)
        crossing = straddle & (px < xc)
        inside ^= (np.count_nonzero(crossing, axis=1) % 2).astype(bool)
    return inside


def signed_distance_to_polygon(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Distance to ``poly``, positive inside."""
    d = distance_to_polyline(points, poly)
    return np.where(inside_polygon(points, poly), d, -d)


def densify(poly: np.ndarray, spacing: float) -> np.ndarray:
    """Sample each edge of the closed polyline at spacing <= ``spacing``."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    out = []
    for p, q in zip(a, b):
        n = max(1, int(np.ceil(np.linalg.norm(q - p) / spacing)))
        t = np.arange(n)[:, None] / n
        out.append(p + t * (q - p))
    return np.concatenate(out)


def fit_circle(pts: np.ndarray) -> tuple[float, float, float]:
    """Algebraic least-squares circle fit; returns ``(cx, cy, r)``."""
    x, y = pts[:, 0], pts[:, 1]
    A = np.column_stack([x, y, np.ones_like(x)])
    rhs = x * x + y * y
    (a, b, c), *_ = np.linalg.lstsq(A, rhs, rcond=None)
    cx, cy = a / 2, b / 2
    return float(cx), float(cy), float(np.sqrt(c + cx * cx + cy * cy))


def circle_polygon(center: tuple[float, float], radius: float, n: int) -> np.ndarray:
    """Regular counter-clockwise ``n``-gon inscribed in the circle."""
    theta = 2 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(theta),
                            center[1] + radius * np.sin(theta)])
