"""Hot numeric kernels with two interchangeable backends.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
version.  The active backend is chosen at import time from the
``SALBENCH_KERNELS`` environment variable (``numba`` or ``numpy``; default
``numba`` when importable) and can be switched at runtime with
``set_backend``.  ``benchmarks/bench_kernels.py`` times one against the
other.

Kernels are deliberately allocation-light: AUC counting is a single pass
with a binary search per pixel, and the statistics kernels are one- or
two-pass reductions.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


BACKENDS = ("numba", "numpy")


def _initial_backend() -> str:
    requested = os.environ.get("SALBENCH_KERNELS", "").strip().lower()
    if requested and requested not in BACKENDS:
        raise ValueError(f"SALBENCH_KERNELS must be one of {BACKENDS}, got {requested!r}")
    if requested == "numpy":
        return "numpy"
    if requested == "numba" and not HAVE_NUMBA:
        raise ValueError("SALBENCH_KERNELS=numba but numba is not importable")
    return "numba" if HAVE_NUMBA else "numpy"


_BACKEND = _initial_backend()


def backend() -> str:
    return _BACKEND


def set_backend(name: str) -> None:
    if name not in BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise ValueError("numba backend requested but numba is not importable")
    global _BACKEND
    _BACKEND = name


# ---------------------------------------------------------------------------
# Gaussian splatting (saliency rendering)
# ---------------------------------------------------------------------------


def splat_add_numpy(out: np.ndarray, template: np.ndarray, xs: np.ndarray, ys: np.ndarray, radius: int) -> None:
    h, w = out.shape
    for x, y in zip(xs, ys):
        x0 = max(0, x - radius)
        x1 = min(w, x + radius + 1)
        y0 = max(0, y - radius)
        y1 = min(h, y + radius + 1)
        tx0 = x0 - (x - radius)
        ty0 = y0 - (y - radius)
        out[y0:y1, x0:x1] += template[ty0 : ty0 + (y1 - y0), tx0 : tx0 + (x1 - x0)]


@njit(cache=True)
def splat_add_numba(out, template, xs, ys, radius):  # pragma: no cover - jitted
    h, w = out.shape
    for i in range(xs.shape[0]):
        x = xs[i]
        y = ys[i]
        y0 = y - radius if y - radius > 0 else 0
        y1 = y + radius + 1 if y + radius + 1 < h else h
        x0 = x - radius if x - radius > 0 else 0
        x1 = x + radius + 1 if x + radius + 1 < w else w
        for yy in range(y0, y1):
            ty = yy - (y - radius)
            for xx in range(x0, x1):
                out[yy, xx] += template[ty, xx - (x - radius)]


def splat_add(out: np.ndarray, template: np.ndarray, xs: np.ndarray, ys: np.ndarray, radius: int) -> None:
    """Add ``template`` (a (2r+1)^2 patch) centered at each (x, y), clipped."""
    xs = np.ascontiguousarray(xs, dtype=np.int64)
    ys = np.ascontiguousarray(ys, dtype=np.int64)
    if _BACKEND == "numba":
        splat_add_numba(out, template, xs, ys, radius)
    else:
        splat_add_numpy(out, template, xs, ys, radius)


# ---------------------------------------------------------------------------
# Threshold counting (AUC)
# ---------------------------------------------------------------------------


def count_ge_numpy(values: np.ndarray, thresholds_asc: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(thresholds_asc, values, side="right")
    hist = np.bincount(idx, minlength=len(thresholds_asc) + 1)
    # counts of values >= thresholds_asc[j] = number with idx > j
    suffix = np.cumsum(hist[::-1])[::-1]
    return suffix[1:].astype(np.int64)


@njit(cache=True)
def count_ge_numba(values, thresholds_asc):  # pragma: no cover - jitted
    m = thresholds_asc.shape[0]
    hist = np.zeros(m + 1, dtype=np.int64)
    t_lo = thresholds_asc[0]
    t_hi = thresholds_asc[m - 1]
    below = 0
    for i in range(values.shape[0]):
        v = values[i]
        # most pixels sit below the lowest fixation value; skip the search
        if v < t_lo:
            below += 1
            continue
        if v >= t_hi:
            hist[m] += 1
            continue
        lo = 0
        hi = m
        while lo < hi:
            mid = (lo + hi) // 2
            if thresholds_asc[mid] <= v:
                lo = mid + 1
            else:
                hi = mid
        hist[lo] += 1
    hist[0] += below
    out = np.empty(m, dtype=np.int64)
    acc = 0
    for j in range(m, 0, -1):
        acc += hist[j]
        out[j - 1] = acc
    return out


def count_ge(values: np.ndarray, thresholds_asc: np.ndarray) -> np.ndarray:
    """For each threshold (ascending), count how many values are >= it."""
    values = np.ascontiguousarray(values, dtype=np.float64).ravel()
    thresholds_asc = np.ascontiguousarray(thresholds_asc, dtype=np.float64)
    if thresholds_asc.size == 0:
        return np.empty(0, dtype=np.int64)
    if _BACKEND == "numba":
        return count_ge_numba(values, thresholds_asc)
    return count_ge_numpy(values, thresholds_asc)


# ---------------------------------------------------------------------------
# Correlation / similarity / standardized lookup
# ---------------------------------------------------------------------------


def pearson_numpy(p: np.ndarray, g: np.ndarray) -> float:
    pm = p - p.mean()
    gm = g - g.mean()
    vp = float(np.dot(pm, pm))
    vg = float(np.dot(gm, gm))
    if vp <= 0.0 or vg <= 0.0:
        return float("nan")
    return float(np.dot(pm, gm) / np.sqrt(vp * vg))


@njit(cache=True)
def pearson_numba(p, g):  # pragma: no cover - jitted
    n = p.shape[0]
    sp = 0.0
    sg = 0.0
    for i in range(n):
        sp += p[i]
        sg += g[i]
    mp = sp / n
    mg = sg / n
    vp = 0.0
    vg = 0.0
    cov = 0.0
    for i in range(n):
        dp = p[i] - mp
        dg = g[i] - mg
        vp += dp * dp
        vg += dg * dg
        cov += dp * dg
    if vp <= 0.0 or vg <= 0.0:
        return np.nan
    return cov / np.sqrt(vp * vg)


def pearson(p: np.ndarray, g: np.ndarray) -> float:
    """Pearson correlation over flat arrays; NaN when either is constant."""
    p = np.ascontiguousarray(p, dtype=np.float64).ravel()
    g = np.ascontiguousarray(g, dtype=np.float64).ravel()
    if _BACKEND == "numba":
        return float(pearson_numba(p, g))
    return pearson_numpy(p, g)


def overlap_numpy(p: np.ndarray, g: np.ndarray, p_sum: float, g_sum: float) -> float:
    return float(np.minimum(p / p_sum, g / g_sum).sum())


@njit(cache=True)
def overlap_numba(p, g, p_sum, g_sum):  # pragma: no cover - jitted
    inv_p = 1.0 / p_sum
    inv_g = 1.0 / g_sum
    acc = 0.0
    for i in range(p.shape[0]):
        a = p[i] * inv_p
        b = g[i] * inv_g
        acc += a if a < b else b
    return acc


def overlap(p: np.ndarray, g: np.ndarray, p_sum: float, g_sum: float) -> float:
    """Histogram intersection of the two sum-normalized arrays."""
    p = np.ascontiguousarray(p, dtype=np.float64).ravel()
    g = np.ascontiguousarray(g, dtype=np.float64).ravel()
    if _BACKEND == "numba":
        return float(overlap_numba(p, g, p_sum, g_sum))
    return overlap_numpy(p, g, p_sum, g_sum)


def standardized_mean_at_numpy(p: np.ndarray, flat_idx: np.ndarray) -> float:
    n = p.size
    mean = float(p.mean())
    var = float(np.dot(p.ravel() - mean, p.ravel() - mean)) / (n - 1) if n > 1 else 0.0
    if var <= 0.0:
        return float("nan")
    std = np.sqrt(var)
    return float(np.mean((p.ravel()[flat_idx] - mean) / std))


@njit(cache=True)
def standardized_mean_at_numba(p, flat_idx):  # pragma: no cover - jitted
    n = p.shape[0]
    s = 0.0
    for i in range(n):
        s += p[i]
    mean = s / n
    ss = 0.0
    for i in range(n):
        d = p[i] - mean
        ss += d * d
    if n <= 1:
        return np.nan
    var = ss / (n - 1)
    if var <= 0.0:
        return np.nan
    std = np.sqrt(var)
    acc = 0.0
    for j in range(flat_idx.shape[0]):
        acc += (p[flat_idx[j]] - mean) / std
    return acc / flat_idx.shape[0]


def standardized_mean_at(p: np.ndarray, flat_idx: np.ndarray) -> float:
    """Mean of (p - mean)/std (sample std) at the given flat indices."""
    p = np.ascontiguousarray(p, dtype=np.float64).ravel()
    flat_idx = np.ascontiguousarray(flat_idx, dtype=np.int64)
    if _BACKEND == "numba":
        return float(standardized_mean_at_numba(p, flat_idx))
    return standardized_mean_at_numpy(p, flat_idx)


def warmup() -> None:
    """Trigger JIT compilation of the numba kernels with tiny inputs."""
    if not HAVE_NUMBA:
        return
    out = np.zeros((4, 4))
    splat_add_numba(out, np.ones((3, 3)), np.array([1], dtype=np.int64), np.array([1], dtype=np.int64), 1)
    count_ge_numba(np.array([0.5, 1.0]), np.array([0.25, 0.75]))
    pearson_numba(np.array([0.0, 1.0, 2.0]), np.array([1.0, 0.0, 2.0]))
    overlap_numba(np.array([1.0, 2.0]), np.array([2.0, 1.0]), 3.0, 3.0)
    standardized_mean_at_numba(np.array([0.0, 1.0, 2.0, 3.0]), np.array([1], dtype=np.int64))
