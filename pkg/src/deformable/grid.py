"""Raster types, PGM I/O, finite differences and synthetic test shapes.

Coordinates follow raster storage: ``x`` is the column index, ``y`` the row
index, origin at the top-left pixel centre, one unit per pixel.  Arrays are
indexed ``values[y, x]``.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


class PGMError(ValueError):
    """Base class for PGM decoding failures."""


class PGMHeaderError(PGMError):
    """Unknown magic number or unparsable header fields."""


class PGMTruncatedError(PGMError):
    """Payload holds fewer samples than the header promises."""


class PGMMaxvalError(PGMError):
    """maxval outside 1..255 (16-bit PGM is not supported)."""


class ShapeError(ValueError):
    """Synthetic shape parameters violate the generator's preconditions."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real-valued 2-D raster, ``values[y, x]``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"ScalarField needs a 2-D array, got shape {v.shape}")
        if v.shape[0] < 3 or v.shape[1] < 3:
            raise ValueError(f"ScalarField must be at least 3x3, got {v.shape[1]}x{v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("ScalarField values must be finite")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def to_csv(self) -> str:
        return field_to_csv(self)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Pair of x/y component rasters of identical size."""

    fx: ScalarField
    fy: ScalarField

    def __post_init__(self):
        if not isinstance(self.fx, ScalarField):
            object.__setattr__(self, "fx", ScalarField(self.fx))
        if not isinstance(self.fy, ScalarField):
            object.__setattr__(self, "fy", ScalarField(self.fy))
        if self.fx.shape != self.fy.shape:
            raise ValueError(f"component shapes differ: {self.fx.shape} vs {self.fy.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.fx.shape

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.fx.values, self.fy.values)

    def stacked(self) -> np.ndarray:
        """``(H, W, 2)`` array of ``(fx, fy)``, built once and cached."""
        st = self.__dict__.get("_stacked")
        if st is None:
            st = _frozen(np.stack([self.fx.values, self.fy.values], axis=-1))
            object.__setattr__(self, "_stacked", st)
        return st


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit grayscale image, ``pixels[y, x]`` in 0..255."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 2 or p.size == 0:
            raise ValueError(f"GrayImage needs a non-empty 2-D array, got shape {p.shape}")
        if np.issubdtype(p.dtype, np.floating) and not np.all(p == np.round(p)):
            raise ValueError("GrayImage pixels must be integers")
        if p.min() < 0 or p.max() > 255:
            raise ValueError("GrayImage pixels must lie in [0, 255]")
        object.__setattr__(self, "pixels", _frozen(p.astype(np.uint8)))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.all(self.pixels == other.pixels))

    __hash__ = None


# ---------------------------------------------------------------------------
# PGM

_WS = b" \t\n\r\v\f"


def _read_header(data: bytes) -> tuple[bytes, int, int, int, int]:
    """Return (magic, width, height, maxval, payload_offset)."""
    pos = 0
    fields: list[bytes] = []
    n = len(data)
    while len(fields) < 4:
        while pos < n and data[pos] in _WS:
            pos += 1
        if pos < n and data[pos] == ord("#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
            continue
        if pos >= n:
            raise PGMHeaderError("header ends before width/height/maxval")
        start = pos
        while pos < n and data[pos] not in _WS and data[pos] != ord("#"):
            pos += 1
        fields.append(data[start:pos])
        if len(fields) == 1 and fields[0] not in (b"P2", b"P5"):
            raise PGMHeaderError(f"unsupported magic {fields[0][:8]!r}")
    magic = fields[0]
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise PGMHeaderError(f"non-integer header field in {fields[1:]!r}") from None
    if width < 1 or height < 1:
        raise PGMHeaderError(f"bad dimensions {width}x{height}")
    if maxval > 255:
        raise PGMMaxvalError(f"maxval {maxval} > 255 is not supported")
    if maxval < 1:
        raise PGMHeaderError(f"bad maxval {maxval}")
    # exactly one whitespace byte separates the header from a binary raster
    if pos >= n and magic == b"P5":
        raise PGMTruncatedError("missing raster")
    return magic, width, height, maxval, pos + 1


def load_pgm(data: bytes) -> GrayImage:
    """Decode a P2 (ASCII) or P5 (binary) PGM byte string."""
    magic, width, height, maxval, offset = _read_header(bytes(data))
    count = width * height
    if magic == b"P5":
        raster = data[offset:offset + count]
        if len(raster) < count:
            raise PGMTruncatedError(f"expected {count} bytes, found {len(raster)}")
        pixels = np.frombuffer(raster, dtype=np.uint8)
    else:
        text = re.sub(rb"#[^\r\n]*", b" ", data[offset - 1:])
        tokens = text.split()
        if len(tokens) < count:
            raise PGMTruncatedError(f"expected {count} samples, found {len(tokens)}")
        try:
            pixels = np.array([int(t) for t in tokens[:count]], dtype=np.int64)
        except ValueError:
            raise PGMHeaderError("non-integer sample in ASCII raster") from None
    if pixels.max(initial=0) > maxval:
        raise PGMError(f"sample exceeds maxval {maxval}")
    return GrayImage(pixels.reshape(height, width))


def save_pgm(image: GrayImage, format: str = "binary") -> bytes:
    """Encode ``image`` as P5 (``format="binary"``) or P2 (``"ascii"``)."""
    h, w = image.pixels.shape
    if format == "binary":
        return f"P5\n{w} {h}\n255\n".encode("ascii") + image.pixels.tobytes()
    if format != "ascii":
        raise ValueError(f"format must be 'ascii' or 'binary', not {format!r}")
    out = io.StringIO()
    out.write(f"P2\n{w} {h}\n255\n")
    line = ""
    for v in image.pixels.ravel():
        tok = str(int(v))
        if line and len(line) + 1 + len(tok) > 70:
            out.write(line + "\n")
            line = tok
        else:
            line = f"{line} {tok}" if line else tok
    if line:
        out.write(line + "\n")
    return out.getvalue().encode("ascii")


def field_to_csv(field: ScalarField) -> str:
    """One CSV row per raster row, ``repr`` precision, ``\\n`` line ends."""
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in field.values)


# ---------------------------------------------------------------------------
# finite differences and interpolation


def bilinear(stack: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Bilinear samples of an ``(H, W, C)`` stack at ``(n, 2)`` points ``(x, y)``.

    Points outside the raster are clamped onto its border.
    """
    h, w = stack.shape[:2]
    x = np.clip(pts[:, 0], 0.0, w - 1.0)
    y = np.clip(pts[:, 1], 0.0, h - 1.0)
    x0 = np.minimum(x.astype(np.intp), w - 2)
    y0 = np.minimum(y.astype(np.intp), h - 2)
    tx = (x - x0)[:, None]
    ty = (y - y0)[:, None]
    top = stack[y0, x0] * (1 - tx) + stack[y0, x0 + 1] * tx
    bottom = stack[y0 + 1, x0] * (1 - tx) + stack[y0 + 1, x0 + 1] * tx
    return top * (1 - ty) + bottom * ty


def gradient(f: ScalarField) -> VectorField:
    """Central differences inside, one-sided first differences on the border."""
    gy, gx = np.gradient(f.values)
    return VectorField(ScalarField(gx), ScalarField(gy))


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 2-D Gaussian, zero beyond distance ``3 * sigma``."""
    if 3 * sigma < 1:
        # no neighbour lies within the cut-off radius
        return np.ones((1, 1))
    r = int(np.ceil(3 * sigma))
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1].astype(np.float64)
    d2 = xx * xx + yy * yy
    k = np.exp(-d2 / (2 * sigma * sigma))
    k[d2 > (3 * sigma) ** 2] = 0.0
    return k / k.sum()


def edge_map(image: GrayImage, smooth_sigma: float = 1.0, threshold: float = 0.0) -> ScalarField:
    """Normalized gradient magnitude of the (optionally smoothed) image.

    Smoothing uses a Gaussian cut off at radius 3 sigma (a disc, so that
    edge responses stay within 1 + ceil(3 sigma) px of the step along every
    direction) and renormalized.  Values below ``threshold * max`` are
    zeroed after normalization to [0, 1].
    """
    if smooth_sigma < 0:
        raise ValueError("smooth_sigma must be >= 0")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    img = image.pixels.astype(np.float64)
    if smooth_sigma > 0:
        img = ndimage.convolve(img, gaussian_kernel(smooth_sigma), mode="nearest")
    g = gradient(ScalarField(img))
    mag = np.hypot(g.fx.values, g.fy.values)
    peak = mag.max()
    if peak > 0:
        mag = mag / peak
        mag[mag < threshold] = 0.0
    return ScalarField(mag)


# ---------------------------------------------------------------------------
# synthetic shapes


def synth_circle(width: int, height: int, center: tuple[float, float], radius: float,
                 fg: int = 255, bg: int = 0) -> GrayImage:
    """Disc of intensity ``fg`` on ``bg``; distance == radius counts as inside."""
    cx, cy = center
    if radius <= 0:
        raise ShapeError("radius must be positive")
    margin = 3
    if (cx - radius < margin or cy - radius < margin
            or cx + radius > width - 1 - margin or cy + radius > height - 1 - margin):
        raise ShapeError(
            f"circle (c=({cx}, {cy}), r={radius}) needs a {margin}px margin inside {width}x{height}")
    yy, xx = np.mgrid[0:height, 0:width]
    inside = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2
    return GrayImage(np.where(inside, fg, bg))


@dataclass(frozen=True)
class Rect:
    """Pixel rectangle: columns x..x+w-1, rows y..y+h-1."""

    x: int
    y: int
    w: int
    h: int

    @property
    def x1(self) -> int:
        return self.x + self.w

    @property
    def y1(self) -> int:
        return self.y + self.h


DEFAULT_BAR = Rect(34, 24, 60, 20)
DEFAULT_STEM = Rect(54, 40, 20, 60)


def synth_t_shape(width: int = 128, height: int = 128, stem: Rect = DEFAULT_STEM,
                  bar: Rect = DEFAULT_BAR, fg: int = 255, bg: int = 0
                  ) -> tuple[GrayImage, np.ndarray]:
    """Draw a "T" and return it with its 8-vertex ground-truth polygon.

    Polygon vertices sit on pixel borders (half-integer coordinates), i.e.
    exactly on the foreground/background transition.
    """
    stem = stem if isinstance(stem, Rect) else Rect(*stem)
    bar = bar if isinstance(bar, Rect) else Rect(*bar)
    for name, r in (("stem", stem), ("bar", bar)):
        if r.w < 1 or r.h < 1:
            raise ShapeError(f"{name} rectangle is empty")
        if r.x < 1 or r.y < 1 or r.x1 > width - 1 or r.y1 > height - 1:
            raise ShapeError(f"{name} rectangle {r} is not fully interior to {width}x{height}")
    ox = min(stem.x1, bar.x1) - max(stem.x, bar.x)
    oy = min(stem.y1, bar.y1) - max(stem.y, bar.y)
    if ox <= 0 or oy <= 0:
        raise ShapeError("stem and bar rectangles do not overlap")
    if not (bar.x < stem.x and stem.x1 < bar.x1 and stem.y1 > bar.y1 and stem.y >= bar.y):
        raise ShapeError("rectangles do not form a T (stem must hang inside the bar's span)")
    img = np.full((height, width), bg, dtype=np.int64)
    img[bar.y:bar.y1, bar.x:bar.x1] = fg
    img[stem.y:stem.y1, stem.x:stem.x1] = fg
    e = 0.5
    poly = np.array([
        (bar.x - e, bar.y - e),
        (bar.x - e, bar.y1 - e),
        (stem.x - e, bar.y1 - e),
        (stem.x - e, stem.y1 - e),
        (stem.x1 - e, stem.y1 - e),
        (stem.x1 - e, bar.y1 - e),
        (bar.x1 - e, bar.y1 - e),
        (bar.x1 - e, bar.y - e),
    ], dtype=np.float64)
    return GrayImage(img), poly
