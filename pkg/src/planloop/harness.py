"""Kinematic execution harness: waypoints, interpolation, contact/collision checks.

The end-effector is reduced to the manipulated object's reference point. No
dynamics: stiffness is metadata only, contact is a height band, collision a
point-in-box test against boxes not flagged touchable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .btree import BehaviorTree, ExecTrajectory, Grasp, exec_nodes, iter_nodes
from .errors import PlanloopError, VariantError
from .transforms import RigidTransform, compose, matrix_to_quaternion

DEFAULT_CONTACT_TOL = 0.005


@dataclass(frozen=True)
class Box:
    """World-frame axis-aligned box; touchable boxes never flag collision."""

    min_corner: np.ndarray
    max_corner: np.ndarray
    touchable: bool = False

    def __post_init__(self):
        object.__setattr__(self, "min_corner", np.asarray(self.min_corner, dtype=np.float64))
        object.__setattr__(self, "max_corner", np.asarray(self.max_corner, dtype=np.float64))

    def contains(self, p: np.ndarray) -> bool:
        return bool(np.all(p >= self.min_corner) and np.all(p <= self.max_corner))


@dataclass(frozen=True)
class Scene:
    poses: dict[str, RigidTransform]
    background: str
    boxes: dict[str, Box] = field(default_factory=dict)
    surfaces: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.background not in self.poses:
            raise PlanloopError(f"background object {self.background!r} has no pose in the scene")


def scene_from_json(data: dict) -> Scene:
    poses = {
        name: RigidTransform.from_quaternion(
            entry.get("q", [1.0, 0.0, 0.0, 0.0]), entry.get("p", [0.0, 0.0, 0.0])
        )
        for name, entry in data.get("poses", {}).items()
    }
    boxes = {
        name: Box(entry["min"], entry["max"], bool(entry.get("touchable", False)))
        for name, entry in data.get("boxes", {}).items()
    }
    return Scene(
        poses=poses,
        background=data["background"],
        boxes=boxes,
        surfaces={k: float(v) for k, v in data.get("surfaces", {}).items()},
    )


def scene_to_json(scene: Scene) -> dict:
    return {
        "background": scene.background,
        "poses": {
            name: {"p": [float(v) for v in t.translation], "q": [float(v) for v in t.quaternion()]}
            for name, t in scene.poses.items()
        },
        "boxes": {
            name: {"min": [float(v) for v in b.min_corner], "max": [float(v) for v in b.max_corner],
                   "touchable": b.touchable}
            for name, b in scene.boxes.items()
        },
        "surfaces": dict(scene.surfaces),
    }


@dataclass(frozen=True)
class Waypoint:
    pose: RigidTransform
    duration: float
    stiffness: str = "medium"


@dataclass(frozen=True)
class WaypointPlan:
    waypoints: tuple[Waypoint, ...]
    gripper_events: tuple[tuple[int, str], ...]  # (waypoint index the event precedes, action)

    def cumulative_times(self) -> np.ndarray:
        """Arrival time at each waypoint; the first is reached at t = 0."""
        times = [0.0]
        for wp in self.waypoints[1:]:
            times.append(times[-1] + wp.duration)
        return np.array(times)


def plan_waypoints(exe: BehaviorTree, scene: Scene) -> WaypointPlan:
    """Map each relative target pose to a world pose through the background object."""
    if exe.variant != "executable":
        raise VariantError("plan_waypoints expects an executable tree")
    base = scene.poses[scene.background]
    waypoints: list[Waypoint] = []
    events: list[tuple[int, str]] = []
    for _, node in iter_nodes(exe):
        if isinstance(node, Grasp):
            events.append((len(waypoints), node.action))
        elif isinstance(node, ExecTrajectory):
            for entry in node.targets:
                waypoints.append(Waypoint(
                    pose=compose(base, entry.payload),
                    duration=entry.duration,
                    stiffness=node.stiffness,
                ))
    if not waypoints:
        raise PlanloopError("plan has no target poses")
    return WaypointPlan(waypoints=tuple(waypoints), gripper_events=tuple(events))


@dataclass(frozen=True)
class ExecutionTrace:
    times: np.ndarray
    positions: np.ndarray    # (n, 3)
    quaternions: np.ndarray  # (n, 4) wxyz
    contact: np.ndarray      # bool
    collision: np.ndarray    # bool

    def __len__(self) -> int:
        return len(self.times)


def simulate(
    plan: WaypointPlan,
    scene: Scene,
    timestep: float = 0.02,
    contact_surface: str | None = None,
    contact_tol: float = DEFAULT_CONTACT_TOL,
) -> ExecutionTrace:
    """Linear position / spherical rotation interpolation through the waypoints.

    Contact flags |z - surface| <= tol against the named surface; collision
    flags samples inside any non-touchable box. Trace endpoints coincide with
    the first and last waypoints exactly.
    """
    if timestep <= 0:
        raise PlanloopError("timestep must be > 0")
    wps = plan.waypoints
    times = [0.0]
    points = [wps[0].pose.translation]
    quats = [wps[0].pose.quaternion()]
    t0 = 0.0
    for a, b in zip(wps[:-1], wps[1:]):
        duration = b.duration
        steps = max(int(round(duration / timestep)), 1)
        key_rots = Rotation.from_matrix(np.stack([a.pose.rotation, b.pose.rotation]))
        slerp = Slerp([0.0, duration], key_rots)
        local_t = np.arange(1, steps + 1) * (duration / steps)
        rots = slerp(local_t)
        for dt, rot in zip(local_t, rots.as_matrix()):
            alpha = dt / duration
            points.append((1 - alpha) * a.pose.translation + alpha * b.pose.translation)
            quats.append(matrix_to_quaternion(rot))
            times.append(t0 + dt)
        # land exactly on the segment end
        points[-1] = b.pose.translation
        quats[-1] = b.pose.quaternion()
        t0 += duration
    positions = np.array(points)
    quaternions = np.array(quats)
    times_arr = np.array(times)

    if contact_surface is not None:
        height = scene.surfaces[contact_surface]
        contact = np.abs(positions[:, 2] - height) <= contact_tol
    else:
        contact = np.zeros(len(times_arr), dtype=bool)
    collision = np.zeros(len(times_arr), dtype=bool)
    for box in scene.boxes.values():
        if box.touchable:
            continue
        inside = np.all((positions >= box.min_corner) & (positions <= box.max_corner), axis=1)
        collision |= inside
    return ExecutionTrace(times=times_arr, positions=positions, quaternions=quaternions,
                          contact=contact, collision=collision)


@dataclass(frozen=True)
class CheckResult:
    check: dict
    passed: bool
    detail: str
    first_counterexample: dict | None = None


@dataclass(frozen=True)
class TraceReport:
    results: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "results": [
                {"check": r.check, "passed": r.passed, "detail": r.detail,
                 "first_counterexample": r.first_counterexample}
                for r in self.results
            ],
        }


def _sample_dict(trace: ExecutionTrace, i: int) -> dict:
    return {"t": float(trace.times[i]), "p": [float(v) for v in trace.positions[i]]}


def _window_mask(trace: ExecutionTrace, check: dict) -> np.ndarray:
    mask = np.ones(len(trace), dtype=bool)
    if "t_start" in check:
        mask &= trace.times >= float(check["t_start"])
    if "t_end" in check:
        mask &= trace.times <= float(check["t_end"])
    return mask


def check_trace(trace: ExecutionTrace, checks: list[dict]) -> TraceReport:
    """Evaluate declarative checks; each failure reports its first counterexample.

    Kinds: ``no_collision``; ``contact_ratio`` (min_ratio, optional t_start/t_end);
    ``max_z_error`` (target, tol, optional t_start/t_end).
    """
    results = []
    for check in checks:
        kind = check.get("kind")
        mask = _window_mask(trace, check)
        idx = np.flatnonzero(mask)
        if kind == "no_collision":
            bad = np.flatnonzero(trace.collision & mask)
            ok = len(bad) == 0
            results.append(CheckResult(
                check=check, passed=ok,
                detail="no collisions" if ok else f"{len(bad)} colliding samples",
                first_counterexample=None if ok else _sample_dict(trace, int(bad[0])),
            ))
        elif kind == "contact_ratio":
            if len(idx) == 0:
                results.append(CheckResult(check=check, passed=False, detail="empty window"))
                continue
            ratio = float(trace.contact[idx].mean())
            ok = ratio >= float(check["min_ratio"])
            bad = idx[~trace.contact[idx]]
            results.append(CheckResult(
                check=check, passed=ok, detail=f"contact ratio {ratio:.3f}",
                first_counterexample=None if ok or not len(bad) else _sample_dict(trace, int(bad[0])),
            ))
        elif kind == "max_z_error":
            if len(idx) == 0:
                results.append(CheckResult(check=check, passed=False, detail="empty window"))
                continue
            err = np.abs(trace.positions[idx, 2] - float(check["target"]))
            worst = float(err.max())
            ok = worst <= float(check["tol"])
            results.append(CheckResult(
                check=check, passed=ok, detail=f"max |z - target| = {worst:.4f}",
                first_counterexample=None if ok else _sample_dict(trace, int(idx[int(np.argmax(err))])),
            ))
        else:
            results.append(CheckResult(check=check, passed=False, detail=f"unknown check kind {kind!r}"))
    return TraceReport(results=tuple(results))


def trace_to_csv(trace: ExecutionTrace, path) -> None:
    header = "t,x,y,z,qw,qx,qy,qz,contact,collision"
    rows = np.column_stack([
        trace.times,
        trace.positions,
        trace.quaternions,
        trace.contact.astype(int),
        trace.collision.astype(int),
    ])
    np.savetxt(path, rows, delimiter=",", header=header, comments="", fmt="%.9g")


def trace_summary(trace: ExecutionTrace) -> dict:
    return {
        "samples": int(len(trace)),
        "t_end": float(trace.times[-1]) if len(trace) else 0.0,
        "contact_ratio": float(trace.contact.mean()) if len(trace) else 0.0,
        "any_collision": bool(trace.collision.any()),
        "z_min": float(trace.positions[:, 2].min()) if len(trace) else 0.0,
        "z_max": float(trace.positions[:, 2].max()) if len(trace) else 0.0,
    }
