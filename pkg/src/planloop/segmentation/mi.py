"""Shannon mutual information over shifting windows of paired 3-D trajectories."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..demo import Trajectory
from ..errors import SegmentationError
from .kernels import digitize_equal_width, mi_window_series


@dataclass(frozen=True)
class WindowConfig:
    """Knobs for the windowed-MI segmentation.

    ``min_prominence`` of None means 10% of the smoothed series maximum.
    ``debias`` subtracts the exact finite-sample independence baseline from
    each window (see kernels module); disable it to get the raw plugin sums.
    """

    window_length: int = 31
    bins: int = 8
    mi_zero_tol: float = 0.6
    smoothing_halfwidth: int = 5
    min_prominence: float | None = None
    debias: bool = True

    def __post_init__(self):
        if self.window_length < 5 or self.window_length % 2 == 0:
            raise ValueError("window_length must be odd and >= 5")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")
        if self.mi_zero_tol <= 0:
            raise ValueError("mi_zero_tol must be > 0")
        if self.min_prominence is not None and self.min_prominence <= 0:
            raise ValueError("min_prominence must be > 0")
        if self.smoothing_halfwidth < 0:
            raise ValueError("smoothing_halfwidth must be >= 0")

    @property
    def halfwidth(self) -> int:
        return self.window_length // 2

    def with_(self, **kw) -> "WindowConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class MISeries:
    """Per-frame MI values where the full window fits, plus a smoothed copy.

    Entry ``i`` is centered on original frame ``first_center + i``.
    """

    values: np.ndarray
    smoothed: np.ndarray
    first_center: int
    config: WindowConfig

    def __post_init__(self):
        for name in ("values", "smoothed"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.values.shape != self.smoothed.shape:
            raise ValueError("values and smoothed must have equal length")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def centers(self) -> np.ndarray:
        return self.first_center + np.arange(len(self.values))

    def index_of_center(self, frame: int) -> int:
        i = frame - self.first_center
        if not 0 <= i < len(self.values):
            raise IndexError(f"frame {frame} outside series domain")
        return i


def histogram_entropy(x: np.ndarray, bins: int) -> float:
    """Entropy (bits) of the equal-width histogram of x over its own range."""
    x = np.asarray(x, dtype=np.float64)
    counts = np.bincount(digitize_equal_width(x, bins), minlength=bins)
    return _entropy(counts, len(x))


def _entropy(counts: np.ndarray, n: int) -> float:
    # summed over sorted probabilities; see kernels module docstring
    p = counts[counts > 0] / n
    p = np.sort(p)
    return float(-(p * np.log2(p)).sum()) + 0.0


def mutual_information(x: np.ndarray, y: np.ndarray, bins: int) -> float:
    """Plugin MI (bits) of one sample window, from equal-width joint/marginal histograms.

    Computed as H(x) + H(y) - H(x, y) with entropies over sorted positive
    probabilities, so MI(x, x) == H(x) and symmetry hold exactly; a constant
    series yields exactly 0. Result clamped to >= 0 (rounding can produce
    values a few ulp below zero).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise SegmentationError("series must be equal-length and 1-D")
    n = len(x)
    if n < 2:
        raise SegmentationError("need at least 2 samples")
    ix = digitize_equal_width(x, bins)
    iy = digitize_equal_width(y, bins)
    joint = np.zeros((bins, bins), dtype=np.int64)
    np.add.at(joint, (ix, iy), 1)
    mi = (_entropy(joint.sum(axis=1), n) + _entropy(joint.sum(axis=0), n)
          - _entropy(joint.ravel(), n))
    if mi < -1e-9:
        raise AssertionError(f"plugin MI fell below -1e-9: {mi}")
    return max(mi, 0.0)


def moving_average(values: np.ndarray, halfwidth: int) -> np.ndarray:
    """Centered moving average; edges average over the available neighbors."""
    if halfwidth == 0:
        return np.asarray(values, dtype=np.float64).copy()
    kernel = np.ones(2 * halfwidth + 1)
    num = np.convolve(values, kernel, mode="same")
    den = np.convolve(np.ones(len(values)), kernel, mode="same")
    return num / den


def windowed_mi_1d(x: np.ndarray, y: np.ndarray, cfg: WindowConfig) -> np.ndarray:
    """Per-window MI series of a scalar pair, clamped to >= 0."""
    vals = mi_window_series(x, y, cfg.window_length, cfg.bins, debias=cfg.debias)
    return np.maximum(vals, 0.0)


def mi_series(hand: Trajectory, obj: Trajectory, cfg: WindowConfig) -> MISeries:
    """Summed component-wise MI between two frame-aligned trajectories.

    For every center frame the window's per-axis MI values are computed and
    summed; the clamped sum and its moving-average copy are returned.
    """
    if not np.array_equal(hand.frames, obj.frames):
        raise SegmentationError("trajectories are not frame-aligned")
    w = cfg.window_length
    if len(hand) < w:
        raise SegmentationError(
            f"trajectory too short: {len(hand)} frames, window needs at least {w}"
        )
    total = np.zeros(len(hand) - w + 1)
    for axis in range(3):
        total += mi_window_series(
            hand.positions[:, axis], obj.positions[:, axis], w, cfg.bins, debias=cfg.debias
        )
    values = np.maximum(total, 0.0)
    smoothed = moving_average(values, cfg.smoothing_halfwidth)
    first_center = int(hand.frames[0]) + cfg.halfwidth
    return MISeries(values=values, smoothed=smoothed, first_center=first_center, config=cfg)
