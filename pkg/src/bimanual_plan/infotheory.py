"""Histogram estimators of entropy, mutual information and co-information.

All quantities are in bits.  Signals are discretized per window with
equal-width bins spanning the window's own ``[min, max]``; the top edge is
closed so the maximum lands in the last bin.  An optional ``resolution``
(meters) caps the bin count at ``ceil(range / resolution)`` so that sensor
jitter smaller than the resolution collapses into a single symbol.

The scalar functions are the one-window case of the vectorized
``windowed_*`` functions, so both paths produce identical bits.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import LengthMismatch, UnknownElement, WindowOutOfRange

AXES = 3


@dataclass(frozen=True)
class WindowSpec:
    width_s: float = 1.0
    center_t: float = 0.0
    bins: int = 8

    def __post_init__(self):
        if self.width_s <= 0:
            raise ValueError("width_s must be positive")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")

    def half_samples(self, rate_hz: float) -> int:
        return max(1, int(round(self.width_s * rate_hz / 2.0)))

    def slice(self, timestamps: np.ndarray, rate_hz: float) -> slice:
        """Index range of the window centered on the grid point nearest ``center_t``."""
        half = self.half_samples(rate_hz)
        k = int(np.argmin(np.abs(timestamps - self.center_t)))
        if k - half < 0 or k + half >= len(timestamps):
            raise WindowOutOfRange(
                f"window of {self.width_s} s around t={self.center_t:.3f} leaves the trace"
            )
        return slice(k - half, k + half + 1)


@dataclass(frozen=True)
class MetricSeries:
    timestamps: np.ndarray
    values: np.ndarray

    def __len__(self):
        return len(self.values)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "value"])
            for t, v in zip(self.timestamps, self.values):
                w.writerow([f"{t:.6f}", f"{v:.9f}"])


# --- vectorized core -------------------------------------------------------

def windowed_discretize(windows: np.ndarray, bins: int, resolution: float = 0.0) -> np.ndarray:
    """Discretize each row of ``windows`` (n_windows, width) independently."""
    windows = np.asarray(windows, dtype=float)
    lo = windows.min(axis=1, keepdims=True)
    hi = windows.max(axis=1, keepdims=True)
    span = hi - lo
    # spreads at round-off level (e.g. a moving average of a constant) are constant
    scale = np.maximum(np.maximum(np.abs(lo), np.abs(hi)), 1.0)
    span = np.where(span <= 16 * np.finfo(float).eps * scale, 0.0, span)
    if resolution > 0:
        nb = np.clip(np.ceil(span / resolution), 1, bins)
    else:
        nb = np.full_like(span, bins)
    safe = np.where(span > 0, span, 1.0)
    sym = np.floor((windows - lo) / safe * nb)
    sym = np.minimum(sym, nb - 1)
    sym[np.broadcast_to(span == 0, sym.shape)] = 0
    return sym.astype(np.int64)


def _entropy_of_codes(codes: np.ndarray, n_codes: int) -> np.ndarray:
    """Row-wise Shannon entropy of integer codes in ``[0, n_codes)``."""
    n_rows, width = codes.shape
    flat = codes + (np.arange(n_rows)[:, None] * n_codes)
    counts = np.bincount(flat.ravel(), minlength=n_rows * n_codes).reshape(n_rows, n_codes)
    # descending sort: identical multisets sum in identical order
    p = -np.sort(-counts, axis=1) / width
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(p), 0.0)
    return np.maximum(-terms.sum(axis=1), 0.0)


def _joint_codes(symbol_sets, bins: int) -> tuple[np.ndarray, int]:
    code = np.zeros_like(symbol_sets[0])
    base = 1
    for s in symbol_sets:
        code = code + s * base
        base *= bins
    return code, base


def windowed_entropy(symbols: np.ndarray, bins: int) -> np.ndarray:
    return _entropy_of_codes(symbols, bins)


def windowed_mi(sx: np.ndarray, sy: np.ndarray, bins: int) -> np.ndarray:
    hx = _entropy_of_codes(sx, bins)
    hy = _entropy_of_codes(sy, bins)
    code, n = _joint_codes([sx, sy], bins)
    hxy = _entropy_of_codes(code, n)
    return np.maximum(hx + hy - hxy, 0.0)


def windowed_coinfo(symbol_sets: list, bins: int) -> np.ndarray:
    """Co-information by inclusion-exclusion over all non-empty subsets."""
    n = len(symbol_sets)
    total = np.zeros(symbol_sets[0].shape[0])
    for size in range(1, n + 1):
        for subset in combinations(range(n), size):
            code, k = _joint_codes([symbol_sets[i] for i in subset], bins)
            total = total - (-1) ** size * _entropy_of_codes(code, k)
    return total


def _aggregate(per_axis: list, aggregate: str) -> np.ndarray:
    stacked = np.vstack(per_axis)
    if aggregate == "mean":
        return stacked.mean(axis=0)
    if aggregate == "sum":
        return stacked.sum(axis=0)
    raise ValueError(f"unknown aggregate {aggregate!r}")


# --- scalar API -------------------------------------------------------------

def discretize(signal, bins: int, resolution: float = 0.0) -> np.ndarray:
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("signal must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite values")
    return windowed_discretize(x[None, :], bins, resolution)[0]


def entropy(symbols) -> float:
    s = np.asarray(symbols)
    if s.size == 0:
        raise ValueError("symbols must be non-empty")
    _, codes = np.unique(s, return_inverse=True)
    codes = codes.reshape(1, -1)
    return float(_entropy_of_codes(codes, int(codes.max()) + 1)[0])


def mi_symbols(sx, sy) -> float:
    """Mutual information between two already-discrete sequences."""
    sx = np.asarray(sx)
    sy = np.asarray(sy)
    if sx.shape != sy.shape:
        raise LengthMismatch(f"{sx.shape} vs {sy.shape}")
    _, cx = np.unique(sx, return_inverse=True)
    _, cy = np.unique(sy, return_inverse=True)
    k = int(max(cx.max(), cy.max())) + 1
    return float(windowed_mi(cx.reshape(1, -1), cy.reshape(1, -1), k)[0])


def _check_pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[0] != y.shape[0]:
        raise LengthMismatch(f"signals have lengths {x.shape[0]} and {y.shape[0]}")
    if x.shape[0] < 2:
        raise ValueError("signals need at least 2 samples")
    return x, y


def mutual_information(x_signal, y_signal, bins: int = 8, resolution: float = 0.0) -> float:
    x, y = _check_pair(x_signal, y_signal)
    sx = windowed_discretize(x[None, :], bins, resolution)
    sy = windowed_discretize(y[None, :], bins, resolution)
    return float(windowed_mi(sx, sy, bins)[0])


def pair_mi_3d(traj_a, traj_b, bins: int = 8, aggregate: str = "mean", resolution: float = 0.0) -> float:
    """Per-axis mutual information of two (n, 3) position windows, aggregated over axes."""
    a, b = _check_pair(traj_a, traj_b)
    per_axis = [
        windowed_mi(
            windowed_discretize(a[None, :, ax], bins, resolution),
            windowed_discretize(b[None, :, ax], bins, resolution),
            bins,
        )
        for ax in range(AXES)
    ]
    return float(_aggregate(per_axis, aggregate)[0])


def co_information(trajs, bins: int = 8, aggregate: str = "mean", resolution: float = 0.0) -> float:
    """Co-information of two or more (n, 3) position windows; may be negative."""
    arrays = [np.asarray(t, dtype=float) for t in trajs]
    if len(arrays) < 2:
        raise ValueError("co-information needs at least two signals")
    n = arrays[0].shape[0]
    if any(a.shape[0] != n for a in arrays):
        raise LengthMismatch("all signals must share one length")
    if arrays[0].ndim == 1:
        arrays = [a[:, None] for a in arrays]
    per_axis = []
    for ax in range(arrays[0].shape[1]):
        syms = [windowed_discretize(a[None, :, ax], bins, resolution) for a in arrays]
        per_axis.append(windowed_coinfo(syms, bins))
    return float(_aggregate(per_axis, aggregate)[0])


# --- sliding-window series over a trace ----------------------------------

def _windows(signal: np.ndarray, width: int) -> np.ndarray:
    return sliding_window_view(signal, width, axis=0)


def _window_width(trace, width_s: float) -> tuple[int, int]:
    half = WindowSpec(width_s).half_samples(trace.rate_hz)
    width = 2 * half + 1
    if width > len(trace):
        raise WindowOutOfRange(f"trace of {len(trace)} samples is shorter than one window ({width})")
    return half, width


def series_mi(pa, pb, width: int, bins: int, aggregate: str, resolution: float) -> np.ndarray:
    wa = _windows(pa, width)  # (nw, 3, width)
    wb = _windows(pb, width)
    per_axis = [
        windowed_mi(
            windowed_discretize(wa[:, ax, :], bins, resolution),
            windowed_discretize(wb[:, ax, :], bins, resolution),
            bins,
        )
        for ax in range(AXES)
    ]
    return _aggregate(per_axis, aggregate)


def series_coinfo(positions: list, width: int, bins: int, aggregate: str, resolution: float) -> np.ndarray:
    ws = [_windows(p, width) for p in positions]
    per_axis = []
    for ax in range(AXES):
        syms = [windowed_discretize(w[:, ax, :], bins, resolution) for w in ws]
        per_axis.append(windowed_coinfo(syms, bins))
    return _aggregate(per_axis, aggregate)


def series_distance(pa, pb, width: int) -> np.ndarray:
    """Windowed mean Euclidean distance (the smoothed distance d̄)."""
    d = np.linalg.norm(pa - pb, axis=1)
    return _windows(d, width).mean(axis=1)


def series_distance_entropy(mean_distance: np.ndarray, half: int, bins: int, resolution: float) -> np.ndarray:
    """Entropy of the smoothed distance over a window centered on each sample.

    Windows are clipped at the ends of the series.
    """
    n = len(mean_distance)
    width = 2 * half + 1
    out = np.empty(n)
    if n >= width:
        w = _windows(mean_distance, width)
        out[half:n - half] = windowed_entropy(windowed_discretize(w, bins, resolution), bins)
    for j in list(range(min(half, n))) + list(range(max(half, n - half), n)):
        seg = mean_distance[max(0, j - half): min(n, j + half + 1)]
        out[j] = windowed_entropy(windowed_discretize(seg[None, :], bins, resolution), bins)[0]
    return out


METRICS = ("MI", "CoInfo", "Distance", "DistanceEntropy")


def metric_series(
    trace,
    elements,
    metric: str,
    width_s: float = 1.0,
    bins: int = 8,
    aggregate: str = "mean",
    resolution: float = 0.0,
) -> MetricSeries:
    """Evaluate ``metric`` at every grid time where a full window fits."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    for name in elements:
        if name not in trace.streams:
            raise UnknownElement(f"no element named {name!r}")
    half, width = _window_width(trace, width_s)
    ts = trace.timestamps[half:len(trace) - half]
    pos = [trace.positions(n) for n in elements]
    if metric == "CoInfo":
        values = series_coinfo(pos, width, bins, aggregate, resolution)
    else:
        if len(pos) != 2:
            raise ValueError(f"{metric} is defined for exactly two elements")
        if metric == "MI":
            values = series_mi(pos[0], pos[1], width, bins, aggregate, resolution)
        else:
            dbar = series_distance(pos[0], pos[1], width)
            values = dbar if metric == "Distance" else series_distance_entropy(dbar, half, bins, resolution)
    return MetricSeries(ts, np.asarray(values))
