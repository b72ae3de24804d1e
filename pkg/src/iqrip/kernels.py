"""Hot numeric kernels with a numba and a pure-numpy implementation.

The numba versions are used when numba imports cleanly and the environment
variable ``IQRIP_DISABLE_NUMBA`` is unset (or ``0``).  Both implementations
are always importable as ``numpy_impl`` and ``numba_impl`` so they can be
compared against each other; ``numba_impl`` is ``None`` when numba is absent.

Band codes used by :func:`assign_bands`::

    0 VeryHigh, 1 High, 2 Medium, 3 Low, 4 VeryLow
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

VERY_HIGH, HIGH, MEDIUM, LOW, VERY_LOW = 0, 1, 2, 3, 4

_WINDOW_BATCH = 512


# --------------------------------------------------------------------------
# pure numpy
# --------------------------------------------------------------------------


def _np_inverse_cdf_index(probs, u):
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return min(idx, probs.shape[0] - 1)


def _np_assign_bands(probs, hi, q3, q1, lo, allow_very_high):
    codes = np.full(probs.shape[0], VERY_LOW, dtype=np.int8)
    codes[probs >= lo] = LOW
    codes[probs >= q1] = MEDIUM
    codes[probs >= q3] = HIGH
    if allow_very_high:
        codes[probs >= hi] = VERY_HIGH
    return codes


def _np_window_entropies(codes, window, n_codes):
    """Entropy of every stride-1 window; ``codes`` are dense ints in [0, n_codes)."""
    n_windows = codes.shape[0] - window + 1
    out = np.empty(n_windows, dtype=np.float64)
    views = np.lib.stride_tricks.sliding_window_view(codes, window)
    log_w = np.log(window)
    for start in range(0, n_windows, _WINDOW_BATCH):
        block = views[start : start + _WINDOW_BATCH]
        rows = block.shape[0]
        keys = np.sort(block, axis=1) + (np.arange(rows, dtype=np.int64) * n_codes)[:, None]
        uniq, counts = np.unique(keys.ravel(), return_counts=True)
        c = counts.astype(np.float64)
        s = np.bincount(uniq // n_codes, weights=c * np.log(c), minlength=rows)
        out[start : start + rows] = log_w - s / window
    np.maximum(out, 0.0, out=out)
    return out


def _np_mix_level(lower, next_ids, counts, total, alpha, lam):
    d = total + alpha * lower.shape[0]
    out = lam * (alpha / d) + (1.0 - lam) * lower
    out[next_ids] += lam * (counts / d)
    return out


numpy_impl = SimpleNamespace(
    name="numpy",
    inverse_cdf_index=_np_inverse_cdf_index,
    assign_bands=_np_assign_bands,
    window_entropies=_np_window_entropies,
    mix_level=_np_mix_level,
)


# --------------------------------------------------------------------------
# numba
# --------------------------------------------------------------------------


def _build_numba():
    from numba import njit

    @njit(cache=True)
    def inverse_cdf_index(probs, u):
        n = probs.shape[0]
        total = 0.0
        for i in range(n):
            total += probs[i]
        target = u * total
        acc = 0.0
        for i in range(n):
            acc += probs[i]
            if target < acc:
                return i
        return n - 1

    @njit(cache=True)
    def assign_bands(probs, hi, q3, q1, lo, allow_very_high):
        n = probs.shape[0]
        codes = np.empty(n, dtype=np.int8)
        for i in range(n):
            v = probs[i]
            if allow_very_high and v >= hi:
                codes[i] = 0
            elif v >= q3:
                codes[i] = 1
            elif v >= q1:
                codes[i] = 2
            elif v >= lo:
                codes[i] = 3
            else:
                codes[i] = 4
        return codes

    @njit(cache=True)
    def window_entropies(codes, window, n_codes):
        n_windows = codes.shape[0] - window + 1
        out = np.empty(n_windows, dtype=np.float64)
        counts = np.zeros(n_codes, dtype=np.int64)
        table = np.zeros(window + 1, dtype=np.float64)
        for c in range(1, window + 1):
            table[c] = c * np.log(c)
        s = 0.0
        for i in range(window):
            c = counts[codes[i]]
            s += table[c + 1] - table[c]
            counts[codes[i]] = c + 1
        log_w = np.log(window)
        for w in range(n_windows):
            if w > 0:
                gone = codes[w - 1]
                c = counts[gone]
                s += table[c - 1] - table[c]
                counts[gone] = c - 1
                new = codes[w + window - 1]
                c = counts[new]
                s += table[c + 1] - table[c]
                counts[new] = c + 1
            h = log_w - s / window
            out[w] = h if h > 0.0 else 0.0
        return out

    @njit(cache=True)
    def mix_level(lower, next_ids, counts, total, alpha, lam):
        n = lower.shape[0]
        d = total + alpha * n
        base = lam * (alpha / d)
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            out[i] = base + (1.0 - lam) * lower[i]
        for j in range(next_ids.shape[0]):
            out[next_ids[j]] += lam * (counts[j] / d)
        return out

    return SimpleNamespace(
        name="numba",
        inverse_cdf_index=inverse_cdf_index,
        assign_bands=assign_bands,
        window_entropies=window_entropies,
        mix_level=mix_level,
    )


try:
    numba_impl = _build_numba()
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba_impl = None

NUMBA_DISABLED = os.environ.get("IQRIP_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

active = numpy_impl if (NUMBA_DISABLED or numba_impl is None) else numba_impl
BACKEND = active.name


def inverse_cdf_index(probs: np.ndarray, u: float) -> int:
    """Index of the first cumulative mass exceeding ``u * total``."""
    return int(active.inverse_cdf_index(probs, u))


def assign_bands(
    probs: np.ndarray, hi: float, q3: float, q1: float, lo: float, allow_very_high: bool
) -> np.ndarray:
    return active.assign_bands(probs, hi, q3, q1, lo, allow_very_high)


def window_entropies(codes: np.ndarray, window: int, n_codes: int) -> np.ndarray:
    return active.window_entropies(codes, window, n_codes)


def mix_level(
    lower: np.ndarray, next_ids: np.ndarray, counts: np.ndarray, total: float, alpha: float, lam: float
) -> np.ndarray:
    """One interpolation level: ``lam * add_alpha(counts) + (1 - lam) * lower``."""
    return active.mix_level(lower, next_ids, counts, total, alpha, lam)
