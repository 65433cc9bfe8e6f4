"""Interaction detection, key instants, and plan extraction from a demonstration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from ..btree import BehaviorTree, ExecTrajectory, Grasp, Sequence, TargetEntry
from ..demo import Demonstration, Trajectory
from ..errors import SegmentationError
from ..transforms import RigidTransform, compose, relative_pose
from .mi import MISeries, WindowConfig, mi_series

DEFAULT_D_TH = 0.15


@dataclass(frozen=True)
class KeyInstant:
    frame: int
    kind: str  # "approach" | "mi_minimum"
    tp: RigidTransform


def detect_interaction(series: MISeries, cfg: WindowConfig) -> list[tuple[int, int]]:
    """Maximal frame intervals where the smoothed series exceeds mi_zero_tol.

    Intervals spanning fewer than window_length/2 frames are discarded.
    Returned endpoints are inclusive center-frame indices.
    """
    above = series.smoothed > cfg.mi_zero_tol
    centers = series.centers
    intervals: list[tuple[int, int]] = []
    i = 0
    while i < len(above):
        if above[i]:
            j = i
            while j + 1 < len(above) and above[j + 1]:
                j += 1
            if j - i + 1 >= cfg.window_length // 2:
                intervals.append((int(centers[i]), int(centers[j])))
            i = j + 1
        else:
            i += 1
    return intervals


def windowed_mean_distance(om: Trajectory, obkg: Trajectory, w: int) -> np.ndarray:
    """Mean centroid distance over the centered window, one value per full window."""
    dist = np.linalg.norm(om.positions - obkg.positions, axis=1)
    kernel = np.ones(w) / w
    return np.convolve(dist, kernel, mode="valid")


def detect_approach_instant(
    om: Trajectory, obkg: Trajectory, cfg: WindowConfig, d_th: float
) -> KeyInstant:
    """First frame whose windowed mean object-object distance drops below d_th."""
    if not np.array_equal(om.frames, obkg.frames):
        raise SegmentationError("trajectories are not frame-aligned")
    means = windowed_mean_distance(om, obkg, cfg.window_length)
    below = means < d_th
    if not below.any():
        raise SegmentationError(
            f"no approach detected: windowed mean distance never fell below {d_th} m"
        )
    frame = int(om.frames[0]) + cfg.halfwidth + int(np.argmax(below))
    return KeyInstant(frame=frame, kind="approach", tp=_relative_at(om, obkg, frame))


def _relative_at(om: Trajectory, obkg: Trajectory, frame: int) -> RigidTransform:
    return relative_pose(om.pose_at_frame(frame), obkg.pose_at_frame(frame))


def find_mi_minima(series: MISeries, interval: tuple[int, int], cfg: WindowConfig) -> list[int]:
    """Frames of prominent local minima of the smoothed series inside the interval.

    Minima closer than half a window to either interval edge are excluded:
    their windows straddle non-interaction data and dip for that reason alone.
    """
    start, end = interval
    h = cfg.halfwidth
    lo = series.index_of_center(max(start + h, series.first_center))
    hi = series.index_of_center(min(end - h, series.first_center + len(series) - 1))
    if hi - lo < 2:
        return []
    inner = series.smoothed[lo:hi + 1]
    prominence = cfg.min_prominence if cfg.min_prominence is not None else 0.1 * float(inner.max())
    peaks, _ = find_peaks(-inner, prominence=prominence)
    return [int(series.first_center + lo + p) for p in peaks]


def detect_key_instants(
    series: MISeries, interval: tuple[int, int], cfg: WindowConfig, demo: Demonstration
) -> list[KeyInstant]:
    """MI-minimum key instants inside the interaction interval, with their TPs."""
    return [
        KeyInstant(frame=f, kind="mi_minimum", tp=demo.relative_pose_at(f))
        for f in find_mi_minima(series, interval, cfg)
    ]


@dataclass(frozen=True)
class PlanExtraction:
    tree: BehaviorTree
    series: MISeries
    interval: tuple[int, int]
    approach: KeyInstant
    minima: tuple[KeyInstant, ...]


def extract_plan(
    demo: Demonstration,
    cfg: WindowConfig | None = None,
    d_th: float = DEFAULT_D_TH,
    lift_height: float = 0.10,
    default_duration: float = 2.0,
    min_duration: float = 0.5,
) -> PlanExtraction:
    """Segment a demonstration and build the executable behavior tree.

    The tree is Grasp(close) at the interaction start, one ExecTrajectory with
    the lift pose, the approach TP and the MI-minimum TPs, then Grasp(open).
    Per-TP durations follow the demonstrated time between key instants.
    """
    cfg = cfg or WindowConfig()
    series = mi_series(demo.hand, demo.om, cfg)
    intervals = detect_interaction(series, cfg)
    if not intervals:
        raise SegmentationError("nothing demonstrated: no hand-object interaction found")
    if len(intervals) > 1:
        raise SegmentationError(
            f"expected one hand-object interaction, found {len(intervals)}"
        )
    interval = intervals[0]
    approach = detect_approach_instant(demo.om, demo.obkg, cfg, d_th)
    minima = detect_key_instants(series, interval, cfg, demo)
    if minima and approach.frame > minima[-1].frame:
        raise SegmentationError(
            f"approach instant (frame {approach.frame}) follows the last MI minimum "
            f"(frame {minima[-1].frame})"
        )

    grasp_frame, release_frame = interval
    lift = RigidTransform(translation=(0.0, 0.0, lift_height))
    world_om = demo.om.pose_at_frame(grasp_frame)
    world_obkg = demo.obkg.pose_at_frame(grasp_frame)
    tp0 = relative_pose(compose(lift, world_om), world_obkg)

    times = demo.hand.times
    frame0 = int(demo.hand.frames[0])

    def t_of(frame: int) -> float:
        return float(times[frame - frame0])

    entries = [TargetEntry(index=0, payload=tp0, duration=default_duration)]
    prev_frame = grasp_frame
    for i, instant in enumerate([approach, *minima], start=1):
        duration = max(t_of(instant.frame) - t_of(prev_frame), min_duration)
        entries.append(TargetEntry(index=i, payload=instant.tp, duration=round(duration, 6)))
        prev_frame = instant.frame

    root = Sequence(children=(
        Grasp(action="close"),
        ExecTrajectory(targets=tuple(entries), stiffness="medium"),
        Grasp(action="open"),
    ))
    tree = BehaviorTree(root=root, variant="executable")
    return PlanExtraction(tree=tree, series=series, interval=interval,
                          approach=approach, minima=tuple(minima))


def generate_plan(
    demo: Demonstration, cfg: WindowConfig | None = None, d_th: float = DEFAULT_D_TH, **kw
) -> BehaviorTree:
    return extract_plan(demo, cfg, d_th, **kw).tree
