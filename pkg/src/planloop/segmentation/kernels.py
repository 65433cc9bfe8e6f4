"""Windowed histogram mutual-information kernels.

The per-window loop is the package's hot path, so it is compiled with numba
``@njit`` by default. Set ``PLANLOOP_DISABLE_NUMBA=1`` to force the pure-numpy
fallback (also used automatically when numba is unavailable). Both paths share
the same binning rule and summation structure; ``benchmarks/bench_mi.py``
compares them.

Probabilities come from equal-width histograms over each window's min-max
range. Entropies sum ``-p log2 p`` over the *sorted* positive probabilities,
which makes MI(x, x) == H(x) and MI(x, y) == MI(y, x) hold bit-exactly.

Windowed estimates carry a large finite-sample bias (about 1.1 bits for 31
samples in 8x8 bins on independent signals). ``independence_baseline_table``
tabulates the exact conditional mean of each plugin cell term under the
fixed-margins independence null (joint counts hypergeometric given margins),
so subtracting it zero-centres the series on independent signals while leaving
genuine dependence large.
"""
from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

_ENV_FLAG = "PLANLOOP_DISABLE_NUMBA"

try:  # pragma: no cover - exercised via env flag in tests
    if os.environ.get(_ENV_FLAG, "").strip() in ("", "0"):
        from numba import njit

        _HAVE_NUMBA = True
    else:
        _HAVE_NUMBA = False
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


def numba_enabled() -> bool:
    return _HAVE_NUMBA


def digitize_equal_width(values: np.ndarray, bins: int) -> np.ndarray:
    """Bin index per sample: floor((v - lo) * bins / (hi - lo)), top edge inclusive.

    A constant window maps everything to bin 0.
    """
    lo = values.min()
    hi = values.max()
    if hi <= lo:
        return np.zeros(len(values), dtype=np.int64)
    idx = ((values - lo) * (bins / (hi - lo))).astype(np.int64)
    return np.minimum(idx, bins - 1)


@lru_cache(maxsize=16)
def independence_baseline_table(n: int) -> np.ndarray:
    """(n+1, n+1) table: E[(k/n) log2(k n / (a b))], k ~ Hypergeom(n, a, b).

    Entry [a, b] is the exact null mean of one joint-histogram MI term for a
    cell whose margins hold a and b of the n window samples. Summing the table
    over all cell margin pairs gives the exact expected plugin MI of the
    window under independence.
    """
    from scipy.special import gammaln

    lf = gammaln(np.arange(n + 1) + 1.0)  # lf[k] = ln k!

    def lchoose(m, k):
        return lf[m] - lf[k] - lf[m - k]

    table = np.zeros((n + 1, n + 1))
    for a in range(1, n + 1):
        for b in range(1, n + 1):
            k = np.arange(max(1, a + b - n), min(a, b) + 1)
            logpmf = lchoose(a, k) + lchoose(n - a, b - k) - lchoose(n, b)
            table[a, b] = float(np.sum(np.exp(logpmf) * (k / n) * np.log2(k * n / (a * b))))
    table.flags.writeable = False
    return table


def _mi_window_series_py(x, y, w, bins, table, debias):
    n = x.shape[0]
    m = n - w + 1
    out = np.empty(m)
    for s in range(m):
        xs = x[s:s + w]
        ys = y[s:s + w]
        ix = digitize_equal_width(xs, bins)
        iy = digitize_equal_width(ys, bins)
        joint = np.zeros((bins, bins), dtype=np.int64)
        np.add.at(joint, (ix, iy), 1)
        cx = joint.sum(axis=1)
        cy = joint.sum(axis=0)
        mi = (_entropy_sorted(cx, w) + _entropy_sorted(cy, w)
              - _entropy_sorted(joint.ravel(), w))
        if debias:
            mi -= float(table[np.ix_(cx, cy)].sum())
        out[s] = mi
    return out


def _entropy_sorted(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    p = np.sort(p)
    return float(-(p * np.log2(p)).sum()) + 0.0


def _make_numba_kernel():  # pragma: no cover - compiled code measured by tests
    @njit(cache=True)
    def entropy(counts, n, scratch):
        k = 0
        for c in counts:
            if c > 0:
                scratch[k] = c / n
                k += 1
        pv = np.sort(scratch[:k])
        h = 0.0
        for j in range(k):
            h -= pv[j] * np.log2(pv[j])
        return h

    @njit(cache=True)
    def kernel(x, y, w, bins, table, debias):
        n = x.shape[0]
        m = n - w + 1
        out = np.empty(m)
        cx = np.empty(bins, np.int64)
        cy = np.empty(bins, np.int64)
        cj = np.empty(bins * bins, np.int64)
        scratch = np.empty(bins * bins)
        for s in range(m):
            xlo = x[s]
            xhi = x[s]
            ylo = y[s]
            yhi = y[s]
            for i in range(s, s + w):
                if x[i] < xlo:
                    xlo = x[i]
                elif x[i] > xhi:
                    xhi = x[i]
                if y[i] < ylo:
                    ylo = y[i]
                elif y[i] > yhi:
                    yhi = y[i]
            cx[:] = 0
            cy[:] = 0
            cj[:] = 0
            xr = xhi - xlo
            yr = yhi - ylo
            for i in range(s, s + w):
                bx = 0
                by = 0
                if xr > 0:
                    bx = int((x[i] - xlo) * (bins / xr))
                    if bx > bins - 1:
                        bx = bins - 1
                if yr > 0:
                    by = int((y[i] - ylo) * (bins / yr))
                    if by > bins - 1:
                        by = bins - 1
                cx[bx] += 1
                cy[by] += 1
                cj[bx * bins + by] += 1
            mi = entropy(cx, w, scratch) + entropy(cy, w, scratch) - entropy(cj, w, scratch)
            if debias:
                base = 0.0
                for bx in range(bins):
                    if cx[bx] == 0:
                        continue
                    for by in range(bins):
                        base += table[cx[bx], cy[by]]
                mi -= base
            out[s] = mi
        return out

    return kernel


_numba_kernel = _make_numba_kernel() if _HAVE_NUMBA else None
_EMPTY_TABLE = np.zeros((1, 1))


def mi_window_series(x: np.ndarray, y: np.ndarray, w: int, bins: int, debias: bool = True) -> np.ndarray:
    """Unclamped per-window MI (bits) for a scalar signal pair.

    Output length is ``len(x) - w + 1``; entry ``s`` covers samples
    ``[s, s + w)``. With ``debias`` the exact independence baseline is
    subtracted, so values fluctuate around zero for unrelated signals.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("signals must be equal-length 1-D arrays")
    if len(x) < w:
        raise ValueError(f"need at least {w} samples, got {len(x)}")
    table = independence_baseline_table(w) if debias else _EMPTY_TABLE
    if _numba_kernel is not None:
        return _numba_kernel(x, y, w, bins, table, debias)
    return _mi_window_series_py(x, y, w, bins, table, debias)
