"""Demonstration data model and the JSON-Lines recording format.

A recording starts with a header line naming the hand entity, the manipulated
and background objects, and the object models (interaction points), followed
by one sample line per (frame, entity): ``{"k":..,"t":..,"entity":..,"p":[x,y,z],
"q":[w,x,y,z]}``. Units are meters and seconds.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DemoValidationError, ParseError, SchemaError
from .transforms import QUAT_REJECT_TOL, QUAT_RENORM_TOL, RigidTransform, _readonly


@dataclass(frozen=True)
class ObjectModel:
    name: str
    interaction_points: tuple[tuple[str, np.ndarray], ...]

    def __post_init__(self):
        if not self.interaction_points:
            raise DemoValidationError(f"object {self.name!r} has no interaction points")
        points = []
        seen = set()
        for label, offset in self.interaction_points:
            if label in seen:
                raise DemoValidationError(f"duplicate interaction point {label!r} on {self.name!r}")
            seen.add(label)
            offset = _readonly(np.asarray(offset, dtype=np.float64))
            if offset.shape != (3,):
                raise DemoValidationError(f"interaction point {label!r} offset must be a 3-vector")
            points.append((label, offset))
        object.__setattr__(self, "interaction_points", tuple(points))

    @property
    def labels(self) -> list[str]:
        return [label for label, _ in self.interaction_points]

    def offset(self, label: str) -> np.ndarray:
        for lab, off in self.interaction_points:
            if lab == label:
                return off
        raise KeyError(label)

    @property
    def offsets_array(self) -> np.ndarray:
        return np.array([off for _, off in self.interaction_points])


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed 6-DoF samples of one tracked entity (struct of arrays)."""

    entity_id: str
    frames: np.ndarray       # int64[n], strictly increasing
    times: np.ndarray        # float64[n], non-decreasing seconds
    positions: np.ndarray    # float64[n, 3]
    quaternions: np.ndarray  # float64[n, 4], (w, x, y, z)

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.int64)
        times = np.asarray(self.times, dtype=np.float64)
        positions = np.asarray(self.positions, dtype=np.float64)
        quaternions = np.asarray(self.quaternions, dtype=np.float64)
        n = len(frames)
        if positions.shape != (n, 3) or quaternions.shape != (n, 4) or times.shape != (n,):
            raise DemoValidationError(f"inconsistent sample arrays for {self.entity_id!r}")
        if n and np.any(np.diff(frames) <= 0):
            raise DemoValidationError(f"frame indices not strictly increasing for {self.entity_id!r}")
        if n and np.any(np.diff(times) < 0):
            raise DemoValidationError(f"timestamps decrease for {self.entity_id!r}")
        for name, arr in (("frames", frames), ("times", times), ("positions", positions), ("quaternions", quaternions)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.frames)

    def pose(self, i: int) -> RigidTransform:
        return RigidTransform.from_quaternion(self.quaternions[i], self.positions[i])

    def index_of(self, frame: int) -> int:
        i = int(np.searchsorted(self.frames, frame))
        if i >= len(self.frames) or self.frames[i] != frame:
            raise KeyError(f"frame {frame} not in trajectory {self.entity_id!r}")
        return i

    def pose_at_frame(self, frame: int) -> RigidTransform:
        return self.pose(self.index_of(frame))


@dataclass(frozen=True)
class Demonstration:
    hand: Trajectory
    objects: dict[str, Trajectory]
    models: dict[str, ObjectModel]
    manipulated: str
    background: str

    def __post_init__(self):
        for name in (self.manipulated, self.background):
            if name not in self.objects:
                raise DemoValidationError(f"object {name!r} has no trajectory")
            if name not in self.models:
                raise DemoValidationError(f"object {name!r} has no model")
        ref = self.hand.frames
        for traj in self.objects.values():
            if not np.array_equal(traj.frames, ref):
                raise DemoValidationError(
                    f"trajectory {traj.entity_id!r} does not cover the same frames as the hand"
                )

    @property
    def om(self) -> Trajectory:
        return self.objects[self.manipulated]

    @property
    def obkg(self) -> Trajectory:
        return self.objects[self.background]

    def relative_pose_at(self, frame: int) -> RigidTransform:
        from .transforms import relative_pose

        return relative_pose(self.om.pose_at_frame(frame), self.obkg.pose_at_frame(frame))

    def equal_bits(self, other: "Demonstration") -> bool:
        if set(self.objects) != set(other.objects) or self.manipulated != other.manipulated \
                or self.background != other.background:
            return False
        pairs = [(self.hand, other.hand)] + [(self.objects[k], other.objects[k]) for k in self.objects]
        for a, b in pairs:
            for attr in ("frames", "times", "positions", "quaternions"):
                if not np.array_equal(getattr(a, attr), getattr(b, attr)):
                    return False
        for k, m in self.models.items():
            om = other.models.get(k)
            if om is None or m.labels != om.labels:
                return False
            if not all(np.array_equal(m.offset(l), om.offset(l)) for l in m.labels):
                return False
        return True


def _model_to_json(model: ObjectModel) -> dict:
    return {"interaction_points": [{"label": lab, "offset": list(off)} for lab, off in model.interaction_points]}


def _model_from_json(name: str, obj: dict) -> ObjectModel:
    try:
        points = tuple((ip["label"], np.asarray(ip["offset"], dtype=np.float64)) for ip in obj["interaction_points"])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad model for {name!r}: {exc}") from exc
    return ObjectModel(name, points)


def save_demonstration(demo: Demonstration, path) -> None:
    header = {
        "hand": demo.hand.entity_id,
        "manipulated": demo.manipulated,
        "background": demo.background,
        "models": {name: _model_to_json(m) for name, m in demo.models.items()},
    }
    entities = [demo.hand] + [demo.objects[k] for k in sorted(demo.objects)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for i in range(len(demo.hand)):
            for traj in entities:
                row = {
                    "k": int(traj.frames[i]),
                    "t": float(traj.times[i]),
                    "entity": traj.entity_id,
                    "p": [float(v) for v in traj.positions[i]],
                    "q": [float(v) for v in traj.quaternions[i]],
                }
                fh.write(json.dumps(row) + "\n")


def load_demonstration(path) -> Demonstration:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaError("empty recording")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad header: {exc.msg}", line=1) from exc
    for key in ("hand", "manipulated", "background", "models"):
        if key not in header:
            raise SchemaError(f"header missing {key!r}")
    models = {name: _model_from_json(name, obj) for name, obj in header["models"].items()}

    samples: dict[str, list[tuple[int, float, list, list]]] = {}
    for lineno, text in enumerate(lines[1:], start=2):
        if not text.strip():
            continue
        try:
            row = json.loads(text)
            k, t, entity, p, q = int(row["k"]), float(row["t"]), row["entity"], row["p"], row["q"]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad sample: {exc}", line=lineno) from exc
        if len(p) != 3 or len(q) != 4:
            raise ParseError("p must have 3 and q 4 components", line=lineno)
        samples.setdefault(entity, []).append((k, t, p, q))

    def build(entity: str) -> Trajectory:
        rows = samples.get(entity)
        if not rows:
            raise SchemaError(f"no samples for entity {entity!r}")
        frames = np.array([r[0] for r in rows], dtype=np.int64)
        if len(np.unique(frames)) != len(frames):
            raise DemoValidationError(f"duplicated frame index for entity {entity!r}")
        quats = np.array([r[3] for r in rows], dtype=np.float64)
        norms = np.linalg.norm(quats, axis=1)
        if np.any(np.abs(norms - 1.0) > QUAT_REJECT_TOL):
            worst = float(np.abs(norms - 1.0).max())
            raise DemoValidationError(
                f"entity {entity!r} has a quaternion with |norm-1| = {worst:.2e} > {QUAT_REJECT_TOL}"
            )
        renorm = np.abs(norms - 1.0) > QUAT_RENORM_TOL
        quats[renorm] /= norms[renorm, None]
        return Trajectory(
            entity_id=entity,
            frames=frames,
            times=np.array([r[1] for r in rows], dtype=np.float64),
            positions=np.array([r[2] for r in rows], dtype=np.float64),
            quaternions=quats,
        )

    hand = build(header["hand"])
    objects = {e: build(e) for e in samples if e != header["hand"]}
    return Demonstration(
        hand=hand,
        objects=objects,
        models=models,
        manipulated=header["manipulated"],
        background=header["background"],
    )
