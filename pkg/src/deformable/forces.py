"""External image forces: electrostatic, heat diffusion and their scheduled union.

All potentials peak on edges and forces are ``+grad P``, so every force
field points toward nearby edge pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .grid import ScalarField, VectorField, bilinear, gradient


@dataclass(frozen=True)
class ElectroParams:
    """Transfer function ``1 / (k * r**lam)`` with ``r = sqrt(d**2 + h**2)``."""

    lam: float = 1.0
    k: float = 1.0
    h: float = 1.0

    def __post_init__(self):
        if not (self.lam > 0 and self.k > 0 and self.h > 0):
            raise ValueError(f"ElectroParams need lam, k, h > 0, got {self}")


@dataclass(frozen=True)
class HeatParams:
    steps: int = 400
    dt: float = 0.06

    def __post_init__(self):
        if self.steps < 0 or int(self.steps) != self.steps:
            raise ValueError(f"steps must be a non-negative integer, got {self.steps}")
        if not 0 < self.dt <= 0.25:
            raise ValueError(f"dt must lie in (0, 0.25] for the explicit stencil, got {self.dt}")


@dataclass(frozen=True)
class UnitedParams:
    gamma_e: float = 1.0
    gamma_h: float = 1.0

    def __post_init__(self):
        if self.gamma_e < 0 or self.gamma_h < 0 or self.gamma_e + self.gamma_h <= 0:
            raise ValueError(f"need gamma_e, gamma_h >= 0 with a positive sum, got {self}")


def _kernel(dy: np.ndarray, dx: np.ndarray, p: ElectroParams) -> np.ndarray:
    r = np.sqrt(dx * dx + dy * dy + p.h * p.h)
    return 1.0 / (p.k * r ** p.lam)


def electrostatic_potential_direct(edge: ScalarField, p: ElectroParams) -> ScalarField:
    """Reference double sum over every nonzero edge cell."""
    g = edge.values
    if np.any(g < 0):
        raise ValueError("edge map must be non-negative")
    h, w = g.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    out = np.zeros((h, w))
    for yi, xi in zip(*np.nonzero(g)):
        out += g[yi, xi] * _kernel(yy - yi, xx - xi, p)
    return ScalarField(out)


def electrostatic_potential(edge: ScalarField, p: ElectroParams = ElectroParams(),
                            method: str = "fft") -> ScalarField:
    """Superpose one ``1/(k r^lam)`` kernel per edge cell, weighted by its gray level.

    ``method="fft"`` convolves with the full translation-invariant kernel
    (exact up to FFT rounding); ``method="direct"`` is the reference sum.
    """
    if method == "direct":
        return electrostatic_potential_direct(edge, p)
    if method != "fft":
        raise ValueError(f"unknown method {method!r}")
    g = edge.values
    if np.any(g < 0):
        raise ValueError("edge map must be non-negative")
    if not np.any(g):
        return ScalarField(np.zeros_like(g))
    h, w = g.shape
    dy, dx = np.mgrid[-(h - 1):h, -(w - 1):w].astype(np.float64)
    full = signal.fftconvolve(g, _kernel(dy, dx, p), mode="full")
    out = full[h - 1:2 * h - 1, w - 1:2 * w - 1]
    # fft noise can dip a hair below zero where the sum is tiny
    return ScalarField(np.maximum(out, 0.0))


def force_from_potential(P: ScalarField, normalize: bool = True) -> VectorField:
    """``F = +grad P``, optionally scaled so the largest |F| is 1."""
    g = gradient(P)
    if not normalize:
        return g
    peak = g.magnitude().max()
    if peak == 0:
        return g
    return VectorField(ScalarField(g.fx.values / peak), ScalarField(g.fy.values / peak))


def heat_potential(edge: ScalarField, p: HeatParams = HeatParams()) -> ScalarField:
    """Diffuse the edge map as temperature with an explicit 5-point stencil.

    Boundaries are zero-flux (ghost cells mirror the border), so the total
    heat is conserved.
    """
    T = np.array(edge.values, dtype=np.float64)
    if np.any(T < 0):
        raise ValueError("edge map must be non-negative")
    for _ in range(p.steps):
        q = np.pad(T, 1, mode="edge")
        lap = q[:-2, 1:-1] + q[2:, 1:-1] + q[1:-1, :-2] + q[1:-1, 2:] - 4.0 * T
        T = T + p.dt * lap
    return ScalarField(T)


def k_schedule(iteration: int) -> float:
    """Heat weight decay ``1 / (1 + ln n)``."""
    if iteration < 1:
        raise ValueError(f"iteration must be >= 1, got {iteration}")
    return 1.0 / (1.0 + math.log(iteration))


def united_force(f_elect: VectorField, f_heat: VectorField, p: UnitedParams,
                 iteration: int) -> VectorField:
    if f_elect.shape != f_heat.shape:
        raise ValueError(f"field shapes differ: {f_elect.shape} vs {f_heat.shape}")
    wh = k_schedule(iteration) * p.gamma_h
    fx = p.gamma_e * f_elect.fx.values + wh * f_heat.fx.values
    fy = p.gamma_e * f_elect.fy.values + wh * f_heat.fy.values
    return VectorField(ScalarField(fx), ScalarField(fy))


# ---------------------------------------------------------------------------
# force providers: callables mapping an iteration number (>= 1) to a field


class StaticForce:
    """Time-invariant force field."""

    def __init__(self, field: VectorField):
        self.field = field
        self.shape = field.shape

    def __call__(self, iteration: int) -> VectorField:
        return self.field

    def sampler(self, iteration: int):
        stack = self.field.stacked()
        return lambda pts: bilinear(stack, pts)


class UnitedForce:
    """United field whose heat share decays with the iteration count."""

    def __init__(self, f_elect: VectorField, f_heat: VectorField, params: UnitedParams):
        if f_elect.shape != f_heat.shape:
            raise ValueError(f"field shapes differ: {f_elect.shape} vs {f_heat.shape}")
        self.f_elect = f_elect
        self.f_heat = f_heat
        self.params = params
        self.shape = f_elect.shape
        self._stack = np.concatenate([f_elect.stacked(), f_heat.stacked()], axis=-1)

    def __call__(self, iteration: int) -> VectorField:
        return united_force(self.f_elect, self.f_heat, self.params, iteration)

    def sampler(self, iteration: int):
        """Point sampler equal to bilinear sampling of ``self(iteration)``.

        Bilinear interpolation is linear in the field, so the two fields are
        sampled separately and blended without building the raster.
        """
        we = self.params.gamma_e
        wh = k_schedule(iteration) * self.params.gamma_h

        def sample(pts):
            s = bilinear(self._stack, pts)
            return we * s[:, :2] + wh * s[:, 2:]
        return sample


def build_force_source(edge: ScalarField, kind: str, electro: ElectroParams | None = None,
                       heat: HeatParams | None = None, united: UnitedParams | None = None,
                       normalize: bool = True):
    """Return ``(force_source, potentials)`` for ``kind`` in electrostatic/heat/united."""
    potentials = {}
    if kind in ("electrostatic", "united"):
        if electro is None:
            raise ValueError(f"{kind} force needs electrostatic parameters")
        potentials["electrostatic"] = electrostatic_potential(edge, electro)
    if kind in ("heat", "united"):
        if heat is None:
            raise ValueError(f"{kind} force needs heat parameters")
        potentials["heat"] = heat_potential(edge, heat)
    if kind == "electrostatic":
        return StaticForce(force_from_potential(potentials["electrostatic"], normalize)), potentials
    if kind == "heat":
        return StaticForce(force_from_potential(potentials["heat"], normalize)), potentials
    if kind == "united":
        if united is None:
            raise ValueError("united force needs united weights")
        fe = force_from_potential(potentials["electrostatic"], normalize)
        fh = force_from_potential(potentials["heat"], normalize)
        return UnitedForce(fe, fh, united), potentials
    raise ValueError(f"unknown force kind {kind!r}")
