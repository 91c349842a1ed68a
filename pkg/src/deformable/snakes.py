"""Parametric active contours (snakes) with explicit Euler time stepping.

Each vertex moves under ``alpha * C_ss + beta * N + gamma * F(C)``: an
elastic (curve-shortening) term, a balloon term along the outward normal,
and the image force sampled bilinearly at the vertex.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import distance_to_polyline, perimeter, signed_area
from .grid import VectorField, bilinear
from .report import EvolutionReport


class ContourCollapsed(ValueError):
    """Fewer than four distinct vertices remain."""


@dataclass(frozen=True, eq=False)
class Contour:
    """Closed polyline, stored counter-clockwise (positive shoelace area)."""

    vertices: np.ndarray
    closed: bool = True

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValueError(f"vertices must have shape (n, 2), got {v.shape}")
        if len(v) < 4:
            raise ValueError(f"a contour needs at least 4 vertices, got {len(v)}")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices must be finite")
        gaps = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
        if np.any(gaps <= 1e-9):
            raise ValueError("consecutive duplicate vertices")
        if not self.closed:
            raise ValueError("only closed contours are supported")
        if signed_area(v) < 0:
            v = v[::-1].copy()
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)

    @classmethod
    def from_points(cls, pts, min_gap: float = 1e-9) -> "Contour":
        """Build a contour after dropping consecutive near-duplicate points."""
        pts = np.asarray(pts, dtype=np.float64)
        keep = [0]
        for i in range(1, len(pts)):
            if np.linalg.norm(pts[i] - pts[keep[-1]]) > min_gap:
                keep.append(i)
        while len(keep) > 1 and np.linalg.norm(pts[keep[-1]] - pts[keep[0]]) <= min_gap:
            keep.pop()
        if len(keep) < 4:
            raise ContourCollapsed(f"only {len(keep)} distinct vertices left")
        return cls(pts[keep])

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def perimeter(self) -> float:
        return perimeter(self.vertices)

    @property
    def area(self) -> float:
        return signed_area(self.vertices)

    def to_json(self) -> str:
        verts = [[float(f"{x:.10g}"), float(f"{y:.10g}")] for x, y in self.vertices]
        return json.dumps({"closed": True, "vertices": verts})

    @classmethod
    def from_json(cls, text: str) -> "Contour":
        obj = json.loads(text)
        if obj.get("closed", True) is not True:
            raise ValueError("only closed contours are supported")
        return cls(np.asarray(obj["vertices"], dtype=np.float64))


@dataclass(frozen=True)
class SnakeParams:
    alpha: float = 0.05
    beta: float = 0.0
    gamma: float = 1.0
    dt: float = 0.5
    resample_spacing: float = 1.0
    resample_every: int = 5
    max_iters: int = 2000
    tol: float = 0.01
    tol_window: int = 10

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.resample_spacing <= 0:
            raise ValueError("resample_spacing must be positive")
        if self.resample_every < 1:
            raise ValueError("resample_every must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if self.tol_window < 1:
            raise ValueError("tol_window must be >= 1")


def resample(c: Contour, spacing: float) -> Contour:
    """Redistribute vertices uniformly in arclength, starting at vertex 0."""
    v = c.vertices
    closed = np.vstack([v, v[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    n = max(4, int(round(total / spacing)))
    targets = np.arange(n) * (total / n)
    x = np.interp(targets, s, closed[:, 0])
    y = np.interp(targets, s, closed[:, 1])
    return Contour.from_points(np.column_stack([x, y]))


def needs_resample(c: Contour, spacing: float, slack: float = 0.5) -> bool:
    """True when some edge is outside ``[1 - slack, 1 + slack] * spacing``.

    Resampling a converged contour would shave its corners and restart the
    motion, so well-spaced contours are left alone.
    """
    gaps = np.linalg.norm(np.roll(c.vertices, -1, axis=0) - c.vertices, axis=1)
    return bool(gaps.max() > (1 + slack) * spacing or gaps.min() < (1 - slack) * spacing)


def outward_normals(c: Contour) -> np.ndarray:
    """Unit normals: central-difference tangent rotated by -90 degrees."""
    v = c.vertices
    t = np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)
    n = np.column_stack([t[:, 1], -t[:, 0]])
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def tangents(c: Contour) -> np.ndarray:
    """Unit central-difference tangents in the direction of traversal."""
    v = c.vertices
    t = np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)
    return t / np.linalg.norm(t, axis=1, keepdims=True)


def elastic_term(c: Contour) -> np.ndarray:
    """Second arclength derivative ``(C[i-1] - 2 C[i] + C[i+1]) / ds**2``."""
    v = c.vertices
    ds = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1).mean()
    return (np.roll(v, 1, axis=0) - 2.0 * v + np.roll(v, -1, axis=0)) / (ds * ds)


def sample_force(f: VectorField, p) -> np.ndarray:
    """Bilinear interpolation of ``f`` at one point or an ``(n, 2)`` array.

    Points outside the raster are clamped onto its border.
    """
    pts = np.asarray(p, dtype=np.float64)
    out = bilinear(f.stacked(), pts.reshape(-1, 2))
    return out[0] if pts.ndim == 1 else out


def snakes_step(c: Contour, f: VectorField, p: SnakeParams,
                shape: tuple[int, int] | None = None) -> tuple[Contour, int]:
    """One explicit Euler step; returns the new contour and the clamp count.

    ``f`` is normally a :class:`VectorField`; a callable mapping an ``(n, 2)``
    point array to force vectors is accepted too, in which case ``shape``
    gives the raster bounds.
    """
    v = c.vertices
    vel = np.zeros_like(v)
    if p.alpha:
        vel += p.alpha * elastic_term(c)
    if p.beta:
        vel += p.beta * outward_normals(c)
    if p.gamma:
        vel += p.gamma * (f(v) if callable(f) else sample_force(f, v))
    new = v + p.dt * vel
    h, w = f.shape if shape is None else shape
    clipped = np.column_stack([np.clip(new[:, 0], 0.0, w - 1.0), np.clip(new[:, 1], 0.0, h - 1.0)])
    n_clamped = int(np.count_nonzero(np.any(clipped != new, axis=1)))
    return Contour.from_points(clipped), n_clamped


ForceSource = Callable[[int], VectorField]


def _is_calm(old: Contour, new: Contour, tol: float) -> bool:
    """True if every vertex of ``new`` lies within ``tol`` of the polyline ``old``.

    With matching vertex counts each vertex is only checked against the few
    old segments around its own index; that can only overestimate the
    distance, so a calm verdict is never wrong.
    """
    pts = new.vertices
    if len(old) != len(new):
        return bool(distance_to_polyline(pts, old.vertices).max() < tol)
    step = np.linalg.norm(pts - old.vertices, axis=1)
    idx = np.nonzero(step >= tol)[0]
    if len(idx) == 0:
        return True
    ov = old.vertices
    n = len(ov)
    best = step[idx]
    for k in (-2, -1, 0, 1):
        a = ov[(idx + k) % n]
        b = ov[(idx + k + 1) % n]
        d = b - a
        t = np.clip(((pts[idx] - a) * d).sum(axis=1) / np.maximum((d * d).sum(axis=1), 1e-300), 0.0, 1.0)
        best = np.minimum(best, np.linalg.norm(pts[idx] - (a + t[:, None] * d), axis=1))
    return bool(best.max() < tol)


def evolve_snake(c0: Contour, force_source: ForceSource, p: SnakeParams,
                 callback: Callable[[int, Contour], None] | None = None
                 ) -> tuple[Contour, EvolutionReport]:
    """Iterate :func:`snakes_step` until the contour stops moving.

    Converged means every vertex stayed within ``p.tol`` of the previous
    contour for ``p.tol_window`` consecutive iterations.
    """
    report = EvolutionReport()
    c = c0
    calm = 0
    start = time.perf_counter()
    for it in range(1, p.max_iters + 1):
        sampler = getattr(force_source, "sampler", None)
        if sampler is not None:
            nxt, clamped = snakes_step(c, sampler(it), p, shape=force_source.shape)
        else:
            nxt, clamped = snakes_step(c, force_source(it), p)
        report.clamped_vertices += clamped
        # sliding along the curve does not change the shape, so displacement
        # is measured against the previous polyline rather than the old vertex
        calm = calm + 1 if _is_calm(c, nxt, p.tol) else 0
        c = nxt
        report.iterations = it
        if it % p.resample_every == 0 and needs_resample(c, p.resample_spacing):
            c = resample(c, p.resample_spacing)
        if callback is not None:
            callback(it, c)
        if calm >= p.tol_window:
            report.converged = True
            break
    report.wall_time = time.perf_counter() - start
    return c, report
