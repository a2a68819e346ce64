"""Flat-zone (connected constant region) labeling."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .image import GrayImage

CONNECTIVITIES = (4, 8)


def check_connectivity(conn):
    conn = int(conn)
    if conn not in CONNECTIVITIES:
        raise ValueError(f"connectivity must be 4 or 8, got {conn}")
    return conn


class ZoneTable(NamedTuple):
    """Per-zone arrays, indexed by zone id (raster order of first pixel)."""

    labels: np.ndarray  # (h, w) zone id per pixel, -1 outside the mask
    gray: np.ndarray
    size: np.ndarray
    first: np.ndarray  # flat index of the first pixel


def label_regions(values, inside, conn) -> ZoneTable:
    """Union-find labeling of equal-valued connected regions of ``values``."""
    values = np.ascontiguousarray(values, dtype=np.int64)
    inside = np.ascontiguousarray(inside, dtype=np.bool_)
    labels, first = _kernels.label_equal(values, inside, check_connectivity(conn) == 8)
    size = np.bincount(labels[labels >= 0], minlength=first.size)
    return ZoneTable(labels, values.ravel()[first], size, first)


def zone_table(image: GrayImage, conn=8) -> ZoneTable:
    image.require_nonempty()
    return label_regions(image.pixels, image.inside, conn)


@dataclass(frozen=True)
class FlatZone:
    gray: int
    size: int
    first: tuple  # (row, col) of the raster-first pixel
    _labels: np.ndarray = field(repr=False, compare=False)
    _id: int = field(repr=False, compare=False)

    @property
    def pixels(self):
        """Member coordinates as an (s, 2) array of (row, col), raster order."""
        return np.argwhere(self._labels == self._id)


def label_flat_zones(image: GrayImage, conn=8) -> list[FlatZone]:
    """Partition the inside pixels into flat zones, ordered by first pixel."""
    t = zone_table(image, conn)
    w = image.width
    return [
        FlatZone(int(g), int(s), divmod(int(f), w), t.labels, j)
        for j, (g, s, f) in enumerate(zip(t.gray, t.size, t.first))
    ]
