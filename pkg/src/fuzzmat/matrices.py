"""Crisp statistical matrices: co-occurrence, difference/sum histograms, run-length,
size-zone and multiple-quantization size-zone matrices.

Offsets are (d_row, d_col). The four standard directions are
0 deg = (0, 1), 45 deg = (-1, 1), 90 deg = (-1, 0), 135 deg = (-1, -1).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from .image import GrayImage, QuantizationSpec, quantize
from .zones import check_connectivity, zone_table

CRISP_KINDS = frozenset({"COM", "DH", "SH", "RLM", "SZM"})


class Offset(NamedTuple):
    d_row: int
    d_col: int

    @classmethod
    def make(cls, value):
        if isinstance(value, Offset):
            off = value
        elif isinstance(value, str):
            parts = value.replace(" ", "").split(",")
            if len(parts) != 2:
                raise ValueError(f"offset must look like DR,DC, got {value!r}")
            off = cls(int(parts[0]), int(parts[1]))
        else:
            dr, dc = value
            off = cls(int(dr), int(dc))
        if off.d_row == 0 and off.d_col == 0:
            raise ValueError("offset (0, 0) is not allowed")
        return off

    def __neg__(self):
        return Offset(-self.d_row, -self.d_col)


DIRECTIONS = {
    0: Offset(0, 1),
    45: Offset(-1, 1),
    90: Offset(-1, 0),
    135: Offset(-1, -1),
}


def direction_offset(angle) -> Offset:
    try:
        return DIRECTIONS[int(angle)]
    except (KeyError, ValueError):
        raise ValueError(f"direction must be one of 0, 45, 90, 135; got {angle!r}") from None


STANDARD_OFFSETS = tuple(DIRECTIONS.values())


@dataclass(eq=False)
class StatMatrix:
    """A real-valued accumulation matrix.

    Rows are gray levels. ``column_values[j]`` is the run length, zone size, gray
    level (COM family) or difference/sum value that column ``j`` stands for.
    """

    kind: str
    cells: np.ndarray
    column_semantics: str
    column_values: np.ndarray
    params: dict = field(default_factory=dict)

    @property
    def rows(self):
        return self.cells.shape[0]

    @property
    def cols(self):
        return self.cells.shape[1]

    @property
    def crisp(self):
        return self.kind in CRISP_KINDS

    @property
    def total(self):
        return float(self.cells.sum())

    def column_index(self, value):
        hits = np.flatnonzero(self.column_values == value)
        if hits.size == 0:
            raise KeyError(f"no column for {self.column_semantics} {value}")
        return int(hits[0])

    def at(self, row, col_value):
        """Cell addressed by gray row and column *value* (not position)."""
        if not 0 <= row < self.rows:
            return 0
        try:
            return self.cells[row, self.column_index(col_value)]
        except KeyError:
            return 0

    def as_dense(self, n_cols=None):
        """Cells re-laid so that column ``v`` holds column value ``v`` (0-based array)."""
        top = int(self.column_values.max()) + 1 if n_cols is None else n_cols
        out = np.zeros((self.rows, top), dtype=self.cells.dtype)
        keep = self.column_values < top
        out[:, self.column_values[keep]] = self.cells[:, keep]
        return out

    def to_csv(self, sep=","):
        fmt = (lambda x: str(int(x))) if self.crisp else (lambda x: repr(float(x)))
        lines = [sep.join(["level"] + [str(int(v)) for v in self.column_values])]
        for g, row in enumerate(self.cells):
            lines.append(sep.join([str(g)] + [fmt(x) for x in row]))
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return f"StatMatrix({self.kind}, {self.rows}x{self.cols})"


# ------------------------------------------------------------ pair statistics


def _pairs(image: GrayImage, offset):
    """Values (a, b) of all inside pixel pairs (p, p + offset)."""
    image.require_nonempty()
    dr, dc = Offset.make(offset)
    h, w = image.shape
    if abs(dr) >= h or abs(dc) >= w:
        warnings.warn(
            f"offset {(dr, dc)} leaves no pixel pairs in a {h}x{w} image", RuntimeWarning
        )
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    src = (slice(max(0, -dr), h - max(0, dr)), slice(max(0, -dc), w - max(0, dc)))
    dst = (slice(max(0, dr), h - max(0, -dr)), slice(max(0, dc), w - max(0, -dc)))
    a = image.pixels[src]
    b = image.pixels[dst]
    if image.mask is not None:
        ok = image.mask[src] & image.mask[dst]
        return a[ok], b[ok]
    return a.ravel(), b.ravel()


def com(image: GrayImage, offset) -> StatMatrix:
    """Co-occurrence counts: cell (i, j) counts pairs with f(p)=i, f(p+offset)=j."""
    offset = Offset.make(offset)
    a, b = _pairs(image, offset)
    L = image.levels
    cells = np.bincount(a * L + b, minlength=L * L).reshape(L, L).astype(np.int64)
    return StatMatrix("COM", cells, "gray-level", np.arange(L), {"offset": tuple(offset)})


def com_average(image: GrayImage, offsets: Sequence = STANDARD_OFFSETS) -> StatMatrix:
    """Elementwise mean of the co-occurrence matrices over ``offsets``."""
    offsets = [Offset.make(o) for o in offsets]
    if not offsets:
        raise ValueError("com_average needs at least one offset")
    acc = np.zeros((image.levels, image.levels))
    for off in offsets:
        acc += com(image, off).cells
    cells = acc / len(offsets)
    return StatMatrix(
        "COMAVG", cells, "gray-level", np.arange(image.levels),
        {"offsets": [tuple(o) for o in offsets]},
    )


def diff_histogram(image: GrayImage, offset) -> StatMatrix:
    """1 x L histogram of |f(p) - f(p+offset)|."""
    offset = Offset.make(offset)
    a, b = _pairs(image, offset)
    L = image.levels
    cells = np.bincount(np.abs(a - b), minlength=L)[None, :].astype(np.int64)
    return StatMatrix("DH", cells, "gray-difference", np.arange(L), {"offset": tuple(offset)})


def sum_histogram(image: GrayImage, offset) -> StatMatrix:
    """1 x (2L-1) histogram of f(p) + f(p+offset)."""
    offset = Offset.make(offset)
    a, b = _pairs(image, offset)
    n = 2 * (image.levels - 1) + 1
    cells = np.bincount(a + b, minlength=n)[None, :].astype(np.int64)
    return StatMatrix("SH", cells, "gray-sum", np.arange(n), {"offset": tuple(offset)})


# ----------------------------------------------------------- run / zone matrices


def count_matrix(gray, column, levels, weights=None):
    """Accumulate events (gray, column >= 1) into a levels x max(column) array."""
    width = int(column.max()) if column.size else 1
    cells = np.zeros((levels, width), dtype=np.int64 if weights is None else np.float64)
    np.add.at(cells, (gray, column - 1), 1 if weights is None else weights)
    return cells


def run_events(image: GrayImage, direction):
    """(start flat index, length, gray) of every maximal run along ``direction``."""
    image.require_nonempty()
    dr, dc = direction_offset(direction)
    return _kernels.scan_runs(
        np.ascontiguousarray(image.pixels), np.ascontiguousarray(image.inside), dr, dc
    )


def rlm(image: GrayImage, direction=0) -> StatMatrix:
    """Run-length matrix: cell (g, l) counts maximal runs of gray g and length l."""
    _, length, gray = run_events(image, direction)
    cells = count_matrix(gray, length, image.levels)
    return StatMatrix(
        "RLM", cells, "run-length", np.arange(1, cells.shape[1] + 1),
        {"direction": int(direction), "pixels": image.n_inside},
    )


def _zone_matrix(kind, gray, size, levels, params, weights=None, size_bins=None):
    """Zone-size matrix; ``size_bins='log2'`` buckets sizes into columns 1, 2, 4, ..."""
    if size_bins in (None, "identity"):
        cells = count_matrix(gray, size, levels, weights)
        values = np.arange(1, cells.shape[1] + 1)
    elif size_bins == "log2":
        bucket = np.floor(np.log2(size)).astype(np.int64) + 1
        cells = count_matrix(gray, bucket, levels, weights)
        values = np.left_shift(1, np.arange(cells.shape[1]))
    else:
        raise ValueError(f"unknown size_bins {size_bins!r}; expected 'identity' or 'log2'")
    params = dict(params, size_bins=size_bins or "identity")
    return StatMatrix(kind, cells, "zone-size", values, params)


def szm(image: GrayImage, conn=8, size_bins=None) -> StatMatrix:
    """Size-zone matrix: cell (g, s) counts flat zones of gray g and size s."""
    conn = check_connectivity(conn)
    t = zone_table(image, conn)
    return _zone_matrix(
        "SZM", t.gray, t.size, image.levels,
        {"conn": conn, "pixels": image.n_inside}, size_bins=size_bins,
    )


def pad_columns(cells, width):
    if cells.shape[1] >= width:
        return cells
    return np.pad(cells, ((0, 0), (0, width - cells.shape[1])))


def mszm(image: GrayImage, levels: Sequence[int], weights: Sequence[float], conn=8) -> StatMatrix:
    """Weighted sum of size-zone matrices at several linear quantizations.

    Each quantized SZM has its rows re-indexed onto ``max(levels)`` rows with
    ``g' = floor(g * N_max / N_k)`` before summing.
    """
    levels = [int(n) for n in levels]
    weights = [float(x) for x in weights]
    if len(levels) != len(weights):
        raise ValueError(f"{len(levels)} quantizations but {len(weights)} weights")
    if not levels:
        raise ValueError("mszm needs at least one quantization")
    if any(x < 0 for x in weights) or sum(weights) <= 0:
        raise ValueError("weights must be >= 0 with a positive sum")
    for n in levels:
        if n > image.levels:
            raise ValueError(f"quantization {n} exceeds the image's {image.levels} levels")
    n_max = max(levels)
    parts = []
    for n in levels:
        m = szm(quantize(image, QuantizationSpec("linear", n)), conn)
        rows = (np.arange(n) * n_max) // n
        re = np.zeros((n_max, m.cols))
        np.add.at(re, rows, m.cells)
        parts.append(re)
    width = max(p.shape[1] for p in parts)
    cells = np.zeros((n_max, width))
    for w_k, p in zip(weights, parts):
        cells += w_k * pad_columns(p, width)
    return StatMatrix(
        "MSZM", cells, "zone-size", np.arange(1, width + 1),
        {"conn": conn, "levels": levels, "weights": weights, "pixels": image.n_inside},
    )
