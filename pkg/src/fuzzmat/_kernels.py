"""Compiled inner loops: union-find labeling, run scanning, partition DP."""
import numpy as np
from numba import njit


@njit(cache=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    # path compression
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True)
def _union(parent, size, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]


@njit(cache=True)
def label_equal(values, inside, eight):
    """Label connected equal-valued regions of ``values`` restricted to ``inside``.

    Returns ``(labels, first)``: labels are numbered 0..J-1 in raster order of
    each region's first pixel (-1 outside), ``first[j]`` is that pixel's flat index.
    """
    h, w = values.shape
    n = h * w
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    for r in range(h):
        for c in range(w):
            if not inside[r, c]:
                continue
            i = r * w + c
            v = values[r, c]
            if c > 0 and inside[r, c - 1] and values[r, c - 1] == v:
                _union(parent, size, i, i - 1)
            if r > 0:
                if inside[r - 1, c] and values[r - 1, c] == v:
                    _union(parent, size, i, i - w)
                if eight:
                    if c > 0 and inside[r - 1, c - 1] and values[r - 1, c - 1] == v:
                        _union(parent, size, i, i - w - 1)
                    if c < w - 1 and inside[r - 1, c + 1] and values[r - 1, c + 1] == v:
                        _union(parent, size, i, i - w + 1)
    labels = np.full((h, w), -1, dtype=np.int64)
    root_label = np.full(n, -1, dtype=np.int64)
    first = np.empty(n, dtype=np.int64)
    count = 0
    for r in range(h):
        for c in range(w):
            if not inside[r, c]:
                continue
            i = r * w + c
            root = _find(parent, i)
            if root_label[root] < 0:
                root_label[root] = count
                first[count] = i
                count += 1
            labels[r, c] = root_label[root]
    return labels, first[:count].copy()


@njit(cache=True)
def scan_runs(values, inside, dr, dc):
    """Maximal collinear constant runs along (dr, dc).

    Returns ``(start, length, value)`` with starts in raster order. A run starts at
    a pixel whose predecessor (p - d) is out of bounds, outside, or differs.
    """
    h, w = values.shape
    n = h * w
    start = np.empty(n, dtype=np.int64)
    length = np.empty(n, dtype=np.int64)
    value = np.empty(n, dtype=values.dtype)
    k = 0
    for r in range(h):
        for c in range(w):
            if not inside[r, c]:
                continue
            v = values[r, c]
            pr = r - dr
            pc = c - dc
            if 0 <= pr < h and 0 <= pc < w and inside[pr, pc] and values[pr, pc] == v:
                continue
            ln = 1
            qr = r + dr
            qc = c + dc
            while 0 <= qr < h and 0 <= qc < w and inside[qr, qc] and values[qr, qc] == v:
                ln += 1
                qr += dr
                qc += dc
            start[k] = r * w + c
            length[k] = ln
            value[k] = v
            k += 1
    return start[:k].copy(), length[:k].copy(), value[:k].copy()


@njit(cache=True)
def run_sums(start, length, step, weights, seeds):
    """Per-run weight sum, seed count and smallest seed flat index (-1 if none)."""
    m = start.shape[0]
    total = np.zeros(m)
    nseed = np.zeros(m, dtype=np.int64)
    first_seed = np.full(m, -1, dtype=np.int64)
    for k in range(m):
        i = start[k]
        for _ in range(length[k]):
            total[k] += weights[i]
            if seeds[i]:
                if first_seed[k] < 0 or i < first_seed[k]:
                    first_seed[k] = i
                nseed[k] += 1
            i += step
    return total, nseed, first_seed


@njit(cache=True)
def contiguous_partition(counts, nbins):
    """Split ``counts`` into ``nbins`` nonempty contiguous groups minimizing the
    squared deviation of group totals from the mean total.

    Divide-and-conquer DP; valid because the cost is convex in the group total.
    Returns the group index of every element.
    """
    d = counts.shape[0]
    cum = np.zeros(d + 1)
    for i in range(d):
        cum[i + 1] = cum[i] + counts[i]
    target = cum[d] / nbins
    inf = np.inf
    prev = np.full(d + 1, inf)
    prev[0] = 0.0
    arg = np.zeros((nbins + 1, d + 1), dtype=np.int32)
    stack = np.empty((4 * (d + 2) + 16, 4), dtype=np.int64)
    for k in range(1, nbins + 1):
        cur = np.full(d + 1, inf)
        # solve cur[j] for j in [k, d - (nbins - k)], split i in [k-1, j-1]
        lo_j = k
        hi_j = d - (nbins - k)
        top = 0
        stack[0, 0] = lo_j
        stack[0, 1] = hi_j
        stack[0, 2] = k - 1
        stack[0, 3] = hi_j - 1
        top = 1
        while top > 0:
            top -= 1
            jl = stack[top, 0]
            jh = stack[top, 1]
            ol = stack[top, 2]
            oh = stack[top, 3]
            if jl > jh:
                continue
            mid = (jl + jh) // 2
            best = inf
            bi = ol
            upper = min(oh, mid - 1)
            for i in range(ol, upper + 1):
                if prev[i] == inf:
                    continue
                dev = cum[mid] - cum[i] - target
                val = prev[i] + dev * dev
                if val < best:
                    best = val
                    bi = i
            cur[mid] = best
            arg[k, mid] = bi
            stack[top, 0] = jl
            stack[top, 1] = mid - 1
            stack[top, 2] = ol
            stack[top, 3] = bi
            top += 1
            stack[top, 0] = mid + 1
            stack[top, 1] = jh
            stack[top, 2] = bi
            stack[top, 3] = oh
            top += 1
        prev = cur
    groups = np.empty(d, dtype=np.int64)
    j = d
    for k in range(nbins, 0, -1):
        i = arg[k, j]
        for t in range(i, j):
            groups[t] = k - 1
        j = i
    return groups
