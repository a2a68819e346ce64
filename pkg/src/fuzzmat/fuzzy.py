"""Fuzzy statistical matrices.

Two families live here:

* fill-level spreading (``fcom``, ``frlm``, ``fszm``): the crisp matrix is built
  as usual and every increment is spread over neighbouring gray rows by the
  membership function;
* fuzzy zones and runs (``fuzzy_szm``, ``fuzzy_rlm``, ``multi_fuzzy_szm``): a
  zone grown from a start pixel ``p0`` holds every connected pixel ``q`` with
  ``beta(|f(p0) - f(q)|) > 0``; each distinct zone adds its aggregate
  membership to cell ``(f(p0), size)``.

A fuzzy zone is the connected component, containing ``p0``, of the support
``{q : beta(|f(p0) - f(q)|) > 0}``. Zones are therefore computed with one
labeling pass per distinct start gray instead of one flood fill per pixel;
two start pixels of the same gray in the same component give the same zone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from .image import GrayImage
from .matrices import StatMatrix, count_matrix, direction_offset, com, rlm, szm, \
    _zone_matrix, pad_columns
from .zones import check_connectivity

MEMBERSHIP_KINDS = ("binary", "linear", "gaussian")
AGGREGATIONS = ("mean", "median")


@dataclass(frozen=True)
class MembershipFunction:
    """Non-increasing map from gray distance to probability, zero beyond ``radius``.

    binary: 1 for x <= R; linear: max(1 - x/R, 0); gaussian: exp(-x^2 / (2 sigma^2))
    with sigma = R/3, cut to 0 for x > R. R = 0 gives the crisp indicator of x = 0.
    """

    kind: str = "linear"
    radius: float = 2.0

    def __post_init__(self):
        if self.kind not in MEMBERSHIP_KINDS:
            raise ValueError(f"unknown membership {self.kind!r}; expected one of {MEMBERSHIP_KINDS}")
        r = float(self.radius)
        if not r >= 0 or math.isinf(r):
            raise ValueError(f"radius must be a finite nonnegative number, got {self.radius!r}")
        object.__setattr__(self, "radius", r)

    @property
    def crisp(self):
        return self.radius == 0

    def __call__(self, x):
        x = np.abs(np.asarray(x, dtype=np.float64))
        r = self.radius
        if r == 0:
            return (x == 0).astype(np.float64)
        if self.kind == "binary":
            return (x <= r).astype(np.float64)
        with np.errstate(over="ignore"):  # tiny radii
            t = x / r
        if self.kind == "linear":
            return np.maximum(1.0 - t, 0.0)
        # sigma = R/3, written as x/sigma = 3t so tiny radii cannot produce 0/0
        with np.errstate(over="ignore"):
            return np.where(x <= r, np.exp(-4.5 * t * t), 0.0)

    def kernel(self, levels):
        """``K[i, j] = beta(|i - j|)`` over ``levels`` gray values (border mass dropped)."""
        g = np.arange(levels)
        return self(g[:, None] - g[None, :])

    def __str__(self):
        return f"{self.kind}:{self.radius:g}"


def eval_membership(fn: MembershipFunction, x) -> float:
    if x < 0:
        raise ValueError(f"membership is defined for x >= 0, got {x}")
    return float(fn(x))


def _check_agg(agg):
    if agg not in AGGREGATIONS:
        raise ValueError(f"aggregation must be one of {AGGREGATIONS}, got {agg!r}")
    return agg


def group_median(groups, values, n_groups):
    """Median of ``values`` within each group id 0..n_groups-1 (every group nonempty)."""
    order = np.lexsort((values, groups))
    v = values[order]
    counts = np.bincount(groups, minlength=n_groups)
    starts = np.cumsum(counts) - counts
    mid = starts + counts // 2
    lower = np.where(counts % 2 == 0, mid - 1, mid)
    return 0.5 * (v[lower] + v[mid])


# ---------------------------------------------------------- fill-level family


def fcom(image: GrayImage, offset, fn: MembershipFunction) -> StatMatrix:
    """Fuzzy co-occurrence: each pair (i, j) adds beta(|i-i'|) * beta(|j-j'|) to (i', j')."""
    crisp = com(image, offset)
    k = fn.kernel(image.levels)
    cells = k @ crisp.cells @ k.T
    return StatMatrix(
        "FCOM", cells, "gray-level", crisp.column_values,
        dict(crisp.params, beta=fn.kind, radius=fn.radius),
    )


def fill_level_fuzzify(events, fn: MembershipFunction, rows: int, kind: str) -> StatMatrix:
    """Spread (gray, column) events over gray rows: each adds beta(|g - g0|) to (g, column)."""
    if kind not in ("FRLM", "FSZM"):
        raise ValueError(f"kind must be FRLM or FSZM, got {kind!r}")
    events = np.asarray(events, dtype=np.int64).reshape(-1, 2)
    if events.shape[0] == 0:
        raise ValueError("no events to fuzzify")
    gray, column = events[:, 0], events[:, 1]
    if gray.min() < 0 or gray.max() >= rows or column.min() < 1:
        raise ValueError("events must have gray in [0, rows) and column >= 1")
    crisp = count_matrix(gray, column, rows)
    cells = fn.kernel(rows) @ crisp
    semantics = "run-length" if kind == "FRLM" else "zone-size"
    return StatMatrix(kind, cells, semantics, np.arange(1, cells.shape[1] + 1),
                      {"beta": fn.kind, "radius": fn.radius})


def _spread(crisp: StatMatrix, fn, kind):
    cells = fn.kernel(crisp.rows) @ crisp.cells
    params = dict(crisp.params, beta=fn.kind, radius=fn.radius)
    return StatMatrix(kind, cells, crisp.column_semantics, crisp.column_values, params)


def frlm(image: GrayImage, direction, fn: MembershipFunction) -> StatMatrix:
    """Run-length matrix with fill-level gray spreading."""
    return _spread(rlm(image, direction), fn, "FRLM")


def fszm(image: GrayImage, conn, fn: MembershipFunction) -> StatMatrix:
    """Size-zone matrix with fill-level gray spreading."""
    return _spread(szm(image, conn), fn, "FSZM")


# ------------------------------------------------------------- fuzzy zones


@dataclass(frozen=True, eq=False)
class FuzzyZone:
    start: tuple  # (row, col)
    start_gray: int
    members: np.ndarray  # (s, 2) coordinates, raster order
    chi: np.ndarray  # membership of each member
    aggregate: float

    @property
    def size(self):
        return len(self.members)

    def member_set(self):
        return frozenset(map(tuple, self.members.tolist()))


class ZoneStats(NamedTuple):
    start: np.ndarray  # flat index of the representative start pixel
    gray: np.ndarray
    size: np.ndarray
    chi_sum: np.ndarray
    aggregate: np.ndarray


def _zones_for_gray(image, g0, fn, eight, median=False, members=False):
    px = image.pixels
    beta = fn(px - g0)
    support = (beta > 0) & image.inside
    labels, first = _kernels.label_equal(
        np.ascontiguousarray(support, dtype=np.int64), np.ascontiguousarray(support), eight
    )
    flat = labels.ravel()
    seeds = np.flatnonzero(image.inside.ravel() & (px.ravel() == g0))
    comps, pos = np.unique(flat[seeds], return_index=True)
    n = first.size
    inside = flat >= 0
    ids = flat[inside]
    b = beta.ravel()[inside]
    size = np.bincount(ids, minlength=n)
    chi_sum = np.bincount(ids, weights=b, minlength=n)
    out = {"start": seeds[pos], "size": size[comps], "chi_sum": chi_sum[comps]}
    if median:
        out["median"] = group_median(ids, b, n)[comps]
    if members:
        keep = np.zeros(n, dtype=bool)
        keep[comps] = True
        pix = np.flatnonzero(inside)
        sel = keep[ids]
        order = np.argsort(ids[sel], kind="stable")
        grouped = pix[sel][order]
        bounds = np.cumsum(size[comps])[:-1]
        out["members"] = np.split(grouped, bounds)
    return out


def _gray_levels(image):
    return np.unique(image.inside_values())


def fuzzy_zone_stats(image: GrayImage, conn, fn: MembershipFunction, agg="mean",
                     size_mode="count") -> ZoneStats:
    """Per-zone (start, gray, size, chi sum, aggregate) for every distinct fuzzy zone,
    ordered by raster position of the representative start pixel."""
    image.require_nonempty()
    eight = check_connectivity(conn) == 8
    _check_agg(agg)
    parts = []
    for g0 in _gray_levels(image):
        z = _zones_for_gray(image, int(g0), fn, eight, median=agg == "median")
        aggv = z["chi_sum"] / z["size"] if agg == "mean" else z["median"]
        parts.append((z["start"], np.full(z["start"].size, g0), z["size"], z["chi_sum"], aggv))
    start, gray, size, chi_sum, aggv = (np.concatenate(c) for c in zip(*parts))
    order = np.argsort(start, kind="stable")
    size = size[order]
    chi_sum = chi_sum[order]
    if size_mode == "fuzzy":
        size = np.maximum(np.floor(chi_sum + 0.5).astype(np.int64), 1)
    elif size_mode != "count":
        raise ValueError(f"size_mode must be 'count' or 'fuzzy', got {size_mode!r}")
    return ZoneStats(start[order], gray[order], size, chi_sum, aggv[order])


def extract_fuzzy_zones(image: GrayImage, conn=8, fn: MembershipFunction = MembershipFunction(),
                        agg="mean") -> list[FuzzyZone]:
    """All distinct fuzzy zones, in raster order of their earliest start pixel.

    Zones with the same member set and start gray are the same zone; the one
    started from the raster-earliest pixel is kept.
    """
    image.require_nonempty()
    eight = check_connectivity(conn) == 8
    _check_agg(agg)
    w = image.width
    px = image.pixels.ravel()
    zones = []
    for g0 in _gray_levels(image):
        z = _zones_for_gray(image, int(g0), fn, eight, median=agg == "median", members=True)
        for k, start in enumerate(z["start"]):
            flat = z["members"][k]
            chi = fn(px[flat] - g0)
            aggv = chi.mean() if agg == "mean" else z["median"][k]
            members = np.column_stack(np.divmod(flat, w))
            zones.append(FuzzyZone(divmod(int(start), w), int(g0), members, chi, float(aggv)))
    zones.sort(key=lambda zn: zn.start)
    return zones


def fuzzy_szm(image: GrayImage, conn=8, fn: MembershipFunction = MembershipFunction(),
              agg="mean", size_mode="count", size_bins=None) -> StatMatrix:
    """Zone-level fuzzy size-zone matrix: each fuzzy zone adds its aggregate
    membership to cell (start gray, size)."""
    conn = check_connectivity(conn)
    st = fuzzy_zone_stats(image, conn, fn, agg, size_mode)
    params = {"conn": conn, "beta": fn.kind, "radius": fn.radius, "agg": agg,
              "size_mode": size_mode, "pixels": image.n_inside, "zones": int(st.size.size)}
    return _zone_matrix("FuzzySZM", st.gray, st.size, image.levels, params,
                        weights=st.aggregate, size_bins=size_bins)


def multi_fuzzy_szm(image: GrayImage, conn, fns: Sequence[MembershipFunction],
                    agg="mean") -> StatMatrix:
    """One matrix filled by every membership function in turn (contributions add)."""
    fns = list(fns)
    if not fns:
        raise ValueError("multi_fuzzy_szm needs at least one membership function")
    parts = [fuzzy_szm(image, conn, fn, agg) for fn in fns]
    width = max(p.cols for p in parts)
    cells = np.zeros((image.levels, width))
    for p in parts:
        cells += pad_columns(p.cells, width)
    params = {"conn": int(conn), "functions": [str(f) for f in fns], "agg": agg,
              "pixels": image.n_inside}
    return StatMatrix("MultiFuzzySZM", cells, "zone-size", np.arange(1, width + 1), params)


# -------------------------------------------------------------- fuzzy runs


@dataclass(frozen=True, eq=False)
class FuzzyRun:
    start: tuple
    start_gray: int
    members: np.ndarray  # (l, 2) coordinates along the run direction
    chi: np.ndarray
    aggregate: float

    @property
    def length(self):
        return len(self.members)


def _runs_for_gray(image, g0, fn, dr, dc):
    h, w = image.shape
    beta = fn(image.pixels - g0)
    support = (beta > 0) & image.inside
    start, length, _ = _kernels.scan_runs(
        np.ascontiguousarray(support, dtype=np.int64), np.ascontiguousarray(support), dr, dc
    )
    seeds = (image.pixels == g0) & image.inside
    total, nseed, first_seed = _kernels.run_sums(
        start, length, dr * w + dc, beta.ravel(), seeds.ravel()
    )
    keep = nseed > 0
    return start[keep], length[keep], total[keep], first_seed[keep], beta.ravel()


def _run_pixels(start, length, step):
    offs = np.arange(length.sum()) - np.repeat(np.cumsum(length) - length, length)
    return np.repeat(start, length) + offs * step


def fuzzy_run_stats(image: GrayImage, direction, fn: MembershipFunction, agg="mean"):
    """(start, gray, length, aggregate) for every distinct fuzzy run, raster ordered."""
    image.require_nonempty()
    _check_agg(agg)
    dr, dc = direction_offset(direction)
    step = dr * image.width + dc
    parts = []
    for g0 in _gray_levels(image):
        start, length, total, first_seed, beta = _runs_for_gray(image, int(g0), fn, dr, dc)
        if agg == "mean":
            aggv = total / length
        else:
            pix = _run_pixels(start, length, step)
            groups = np.repeat(np.arange(length.size), length)
            aggv = group_median(groups, beta[pix], length.size)
        parts.append((first_seed, np.full(start.size, g0), length, aggv))
    first, gray, length, aggv = (np.concatenate(c) for c in zip(*parts))
    order = np.argsort(first, kind="stable")
    return first[order], gray[order], length[order], aggv[order]


def extract_fuzzy_runs(image: GrayImage, direction=0, fn: MembershipFunction = MembershipFunction(),
                       agg="mean") -> list[FuzzyRun]:
    image.require_nonempty()
    _check_agg(agg)
    dr, dc = direction_offset(direction)
    w = image.width
    px = image.pixels.ravel()
    runs = []
    for g0 in _gray_levels(image):
        start, length, _, first_seed, _ = _runs_for_gray(image, int(g0), fn, dr, dc)
        for s, ln, fs in zip(start, length, first_seed):
            flat = s + np.arange(ln) * (dr * w + dc)
            chi = fn(px[flat] - g0)
            aggv = chi.mean() if agg == "mean" else np.median(chi)
            members = np.column_stack(np.divmod(flat, w))
            runs.append(FuzzyRun(divmod(int(fs), w), int(g0), members, chi, float(aggv)))
    runs.sort(key=lambda r: r.start)
    return runs


def fuzzy_rlm(image: GrayImage, direction=0, fn: MembershipFunction = MembershipFunction(),
              agg="mean") -> StatMatrix:
    """Run-level fuzzy run-length matrix: a fuzzy run through p0 extends along the
    direction while beta(|f(p0) - f(q)|) > 0 and adds its aggregate membership to
    cell (f(p0), length)."""
    _, gray, length, aggv = fuzzy_run_stats(image, direction, fn, agg)
    cells = count_matrix(gray, length, image.levels, weights=aggv)
    params = {"direction": int(direction), "beta": fn.kind, "radius": fn.radius, "agg": agg,
              "pixels": image.n_inside, "runs": int(length.size)}
    return StatMatrix("FuzzyRLM", cells, "run-length", np.arange(1, cells.shape[1] + 1), params)
