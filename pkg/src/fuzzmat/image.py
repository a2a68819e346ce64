"""Gray-level images, PGM input/output, histogram stretching and quantization."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels

QUANT_METHODS = ("linear", "logarithmic", "equal-population", "clustering")
# short aliases used by the command line and pipeline strings
_METHOD_ALIASES = {
    "linear": "linear",
    "lin": "linear",
    "log": "logarithmic",
    "logarithmic": "logarithmic",
    "equal": "equal-population",
    "equal-population": "equal-population",
    "histogram": "equal-population",
    "kmeans": "clustering",
    "clustering": "clustering",
}


class PGMError(ValueError):
    """Malformed or unreadable PGM data; ``offset`` is the byte position of the fault."""

    def __init__(self, message, offset=None, path=None):
        self.offset = offset
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}: "
        if offset is not None:
            where += f"byte {offset}: "
        super().__init__(where + message)


class EmptyRegionError(ValueError):
    """Raised when a descriptor is requested on an image with no inside pixels."""


def _readonly(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Discrete 2D raster with ``levels`` representable values and an optional mask.

    ``pixels`` is a read-only ``(height, width)`` int64 array with values in
    ``[0, levels - 1]``. ``mask`` (if any) is a read-only boolean array of the same
    shape where True marks the region of interest.
    """

    pixels: np.ndarray
    levels: int
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"pixels must be 2-D, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if not np.issubdtype(px.dtype, np.integer):
            if not np.all(np.equal(np.mod(px, 1), 0)):
                raise ValueError("pixel values must be integers")
        px = px.astype(np.int64)
        levels = int(self.levels)
        if levels < 1:
            raise ValueError("levels must be >= 1")
        if px.min() < 0 or px.max() > levels - 1:
            raise ValueError(
                f"pixel values must lie in [0, {levels - 1}], got [{px.min()}, {px.max()}]"
            )
        object.__setattr__(self, "pixels", _readonly(px))
        object.__setattr__(self, "levels", levels)
        if self.mask is not None:
            m = np.asarray(self.mask).astype(bool)
            if m.shape != px.shape:
                raise ValueError(f"mask shape {m.shape} does not match image shape {px.shape}")
            object.__setattr__(self, "mask", _readonly(m))

    @classmethod
    def from_array(cls, arr, levels=None, mask=None):
        arr = np.asarray(arr)
        if levels is None:
            levels = int(arr.max()) + 1
        return cls(arr, levels, mask)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def shape(self):
        return self.pixels.shape

    @property
    def inside(self):
        """Boolean support array (all True when no mask is attached)."""
        if self.mask is None:
            return np.ones(self.shape, dtype=bool)
        return self.mask

    @property
    def n_inside(self):
        return int(self.pixels.size if self.mask is None else self.mask.sum())

    def inside_values(self):
        return self.pixels[self.inside]

    def require_nonempty(self):
        if self.n_inside == 0:
            raise EmptyRegionError("empty region: the mask selects no pixels")

    def with_pixels(self, pixels, levels):
        """Same mask, new pixel data."""
        return GrayImage(pixels, levels, self.mask)

    def __repr__(self):
        m = "" if self.mask is None else f", inside={self.n_inside}"
        return f"GrayImage({self.height}x{self.width}, levels={self.levels}{m})"


# --------------------------------------------------------------------------- PGM


def _tokens(data, start, count, path):
    """Read ``count`` whitespace-separated ASCII integers, skipping ``#`` comments.

    Returns (values, offsets, position after the last token).
    """
    out = []
    offsets = []
    i = start
    n = len(data)
    while len(out) < count:
        while i < n and data[i] in b" \t\r\n\v\f":
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i] not in b"\r\n":
                i += 1
            continue
        if i >= n:
            raise PGMError(
                f"truncated data: expected {count} values, found {len(out)}", i, path
            )
        j = i
        while j < n and data[j] not in b" \t\r\n\v\f#":
            j += 1
        tok = data[i:j]
        if not tok.isdigit():
            raise PGMError(f"invalid integer token {tok[:16]!r}", i, path)
        out.append(int(tok))
        offsets.append(i)
        i = j
    return out, offsets, i


def parse_pgm(data: bytes, path=None) -> GrayImage:
    """Decode P2 (ASCII) or P5 (binary) PGM bytes."""
    if len(data) < 2 or data[:2] not in (b"P2", b"P5"):
        raise PGMError(f"bad magic number {data[:2]!r}, expected P2 or P5", 0, path)
    magic = data[:2]
    (width, height, maxval), offs, pos = _tokens(data, 2, 3, path)
    if width < 1 or height < 1:
        raise PGMError(f"invalid dimensions {width}x{height}", offs[0], path)
    if not 1 <= maxval <= 65535:
        raise PGMError(f"maxval {maxval} outside [1, 65535]", offs[2], path)
    n = width * height
    if magic == b"P2":
        vals, voffs, _ = _tokens(data, pos, n, path)
        arr = np.array(vals, dtype=np.int64)
        bad = np.flatnonzero(arr > maxval)
        if bad.size:
            k = int(bad[0])
            raise PGMError(f"value {vals[k]} exceeds maxval {maxval}", voffs[k], path)
    else:
        # exactly one whitespace byte separates the header from the raster
        if pos >= len(data) or data[pos] not in b" \t\r\n\v\f":
            raise PGMError("missing whitespace after header", pos, path)
        pos += 1
        width_bytes = 1 if maxval < 256 else 2
        need = n * width_bytes
        if len(data) - pos < need:
            raise PGMError(
                f"truncated payload: expected {need} bytes, found {len(data) - pos}",
                len(data),
                path,
            )
        dtype = np.uint8 if width_bytes == 1 else np.dtype(">u2")
        arr = np.frombuffer(data, dtype=dtype, count=n, offset=pos).astype(np.int64)
        bad = np.flatnonzero(arr > maxval)
        if bad.size:
            k = int(bad[0])
            raise PGMError(
                f"value {int(arr[k])} exceeds maxval {maxval}", pos + k * width_bytes, path
            )
    return GrayImage(arr.reshape(height, width), maxval + 1)


def load_image(path) -> GrayImage:
    """Read a P2 or P5 PGM file. The image has ``levels = maxval + 1`` and no mask."""
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except FileNotFoundError:
        raise PGMError("no such file", None, path) from None
    return parse_pgm(data, path)


def format_pgm(image: GrayImage, binary=True) -> bytes:
    maxval = max(image.levels - 1, 1)
    header = f"{'P5' if binary else 'P2'}\n{image.width} {image.height}\n{maxval}\n".encode()
    if binary:
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        return header + image.pixels.astype(dtype).tobytes()
    rows = "\n".join(" ".join(str(v) for v in row) for row in image.pixels)
    return header + rows.encode() + b"\n"


def save_image(image: GrayImage, path, binary=True):
    with open(path, "wb") as fh:
        fh.write(format_pgm(image, binary=binary))


def attach_mask(image: GrayImage, mask_image) -> GrayImage:
    """Return ``image`` restricted to the nonzero pixels of ``mask_image``.

    ``mask_image`` may be a GrayImage or any array-like of the same shape.
    """
    m = mask_image.pixels if isinstance(mask_image, GrayImage) else np.asarray(mask_image)
    if m.shape != image.shape:
        raise ValueError(f"mask shape {m.shape} does not match image shape {image.shape}")
    return GrayImage(image.pixels, image.levels, m != 0)


# ------------------------------------------------------------------ gray levels


def stretch_histogram(image: GrayImage) -> GrayImage:
    """Affine map of the inside range [min, max] onto [0, L-1], rounding half up.

    Constant images are returned unchanged. Pixels outside the mask use the same
    map, clipped to the valid range.
    """
    image.require_nonempty()
    vals = image.inside_values()
    lo, hi = int(vals.min()), int(vals.max())
    if lo == hi:
        return image
    span = hi - lo
    top = image.levels - 1
    # floor(x + 1/2) in exact integer arithmetic
    out = (2 * (image.pixels - lo) * top + span) // (2 * span)
    return image.with_pixels(np.clip(out, 0, top), image.levels)


@dataclass(frozen=True)
class QuantizationSpec:
    method: str
    levels: int

    def __post_init__(self):
        method = _METHOD_ALIASES.get(self.method)
        if method is None:
            raise ValueError(
                f"unknown quantization method {self.method!r}; expected one of {QUANT_METHODS}"
            )
        object.__setattr__(self, "method", method)
        if int(self.levels) < 2:
            raise ValueError(f"target levels must be >= 2, got {self.levels}")
        object.__setattr__(self, "levels", int(self.levels))

    @classmethod
    def parse(cls, text):
        """``"linear:8"`` -> QuantizationSpec("linear", 8)."""
        method, sep, n = text.partition(":")
        if not sep:
            raise ValueError(f"quantization must look like METHOD:N, got {text!r}")
        try:
            levels = int(n)
        except ValueError:
            raise ValueError(f"quantization level count must be an integer, got {n!r}") from None
        return cls(method.strip(), levels)

    def __str__(self):
        short = {"linear": "linear", "logarithmic": "log",
                 "equal-population": "equal", "clustering": "kmeans"}[self.method]
        return f"{short}:{self.levels}"


def _equal_population_lut(hist, n):
    present = np.flatnonzero(hist)
    lut = np.zeros(hist.size, dtype=np.int64)
    d = present.size
    if d <= n:
        # fewer distinct values than bins: one value per bin, spread over the range
        groups = (np.arange(d) * n) // d
    else:
        groups = _kernels.contiguous_partition(hist[present].astype(np.float64), n)
    lut[present] = groups
    # absent values follow the next lower present value
    idx = np.maximum(np.searchsorted(present, np.arange(hist.size), side="right") - 1, 0)
    lut = np.where(hist > 0, lut, lut[present[idx]])
    return lut


def _kmeans_lut(hist, n, max_iter=100):
    values = np.flatnonzero(hist).astype(np.float64)
    weights = hist[hist > 0].astype(np.float64)
    cdf = np.cumsum(weights) / weights.sum()
    q = (np.arange(n) + 0.5) / n
    centroids = values[np.minimum(np.searchsorted(cdf, q, side="left"), values.size - 1)]
    assign = None
    for _ in range(max_iter):
        # argmin picks the lowest index on ties
        new = np.argmin(np.abs(values[:, None] - centroids[None, :]), axis=1)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for k in range(n):
            sel = assign == k
            if sel.any():
                centroids[k] = np.average(values[sel], weights=weights[sel])
    order = np.argsort(centroids, kind="stable")
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    full = np.arange(hist.size, dtype=np.float64)
    nearest = np.argmin(np.abs(full[:, None] - centroids[None, :]), axis=1)
    lut = rank[nearest]
    lut[hist > 0] = rank[assign]
    return lut


def quantize(image: GrayImage, spec: QuantizationSpec) -> GrayImage:
    """Reduce the image to ``spec.levels`` gray values.

    linear / logarithmic stretch the histogram first, then apply
    ``floor(v*N/L)`` or ``floor(N*log(1+v)/log(L))``; equal-population cuts the
    cumulative histogram into contiguous groups of near-equal pixel count;
    clustering runs a deterministic 1-D k-means on the pixel values.
    """
    n = spec.levels
    src = image.levels
    if n > src:
        raise ValueError(f"cannot quantize {src} levels into {n} (N > L)")
    image.require_nonempty()
    if spec.method in ("linear", "logarithmic"):
        stretched = stretch_histogram(image).pixels
        if spec.method == "linear":
            out = (stretched * n) // src
        else:
            out = np.floor(n * np.log1p(stretched) / math.log(src)).astype(np.int64)
            out = np.minimum(out, n - 1)
        return image.with_pixels(out, n)
    hist = np.bincount(image.inside_values(), minlength=src)
    if spec.method == "equal-population":
        lut = _equal_population_lut(hist, n)
    else:
        lut = _kmeans_lut(hist, n)
    return image.with_pixels(lut[image.pixels], n)
