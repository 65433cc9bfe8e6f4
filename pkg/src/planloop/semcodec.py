"""Bidirectional numeric/semantic plan translation.

Encoding replaces each numeric target pose with a triplet: nearest interaction
point of the background object, vertical relation against that point, and the
dominant rotation since the previous entry. Decoding reverses it; entries whose
triplet is unchanged from encoding reuse their original numbers verbatim via a
sidecar, so an untouched plan round-trips bit-exactly.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .btree import BehaviorTree, ExecTrajectory, Grasp, Node, Sequence, TargetEntry, exec_nodes
from .demo import ObjectModel
from .errors import DecodeError, VariantError
from .labels import AXIS_INDEX, AXIS_LABELS, SemanticTargetPose, snap_angle
from .transforms import RigidTransform, euler_xyz_intrinsic, rot_x, rot_y, rot_z

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CodecConfig:
    """Vertical-relation thresholds, meters. Defaults follow the experiment setup:
    z_th 0.01, z_above 0.15, z_below -0.15, eps_z 0."""

    z_th: float = 0.01
    z_above: float = 0.15
    z_below: float = -0.15
    eps_z: float = 0.0

    def __post_init__(self):
        # ordering guarantees that decoded z values re-encode to the same label
        if not (self.z_above > self.z_th > 0.0 > -self.z_th > self.z_below):
            raise ValueError("need z_above > z_th > 0 > -z_th > z_below")
        if abs(self.eps_z) > self.z_th:
            raise ValueError("|eps_z| must not exceed z_th")


def nearest_interaction_point(om_position: np.ndarray, model: ObjectModel) -> str:
    """Label of the interaction point nearest in Euclidean distance.

    Exact ties resolve to the earliest-declared point.
    """
    pos = np.asarray(om_position, dtype=np.float64)
    best_label = None
    best_d2 = np.inf
    for label, offset in model.interaction_points:
        d2 = float(np.sum((pos - offset) ** 2))
        if d2 < best_d2:
            best_label, best_d2 = label, d2
    return best_label


def classify_vertical(delta_z: float, cfg: CodecConfig) -> str:
    """Three-way thresholding of the vertical displacement (boundaries are touching)."""
    if delta_z > cfg.z_th:
        return "above"
    if delta_z < -cfg.z_th:
        return "below"
    return "touching"


def dominant_rotation(prev: RigidTransform, cur: RigidTransform) -> tuple[str, int]:
    """Axis label and snapped angle of the most significant rotation prev -> cur.

    The relative rotation is decomposed into intrinsic x-y-z angles; the axis
    with the largest magnitude wins (earlier axis on exact ties) and its angle
    snaps to the predefined set. A zero rotation canonicalizes to (turning, 0).
    """
    rel = prev.rotation.T @ cur.rotation
    angles = np.degrees(euler_xyz_intrinsic(rel))
    axis_idx = int(np.argmax(np.abs(angles)))
    snapped = snap_angle(float(angles[axis_idx]))
    if snapped == 0:
        return "turning", 0
    return AXIS_LABELS[axis_idx], snapped


def axis_rotation(axis: str, angle_deg: float) -> np.ndarray:
    rad = np.radians(angle_deg)
    return (rot_x, rot_y, rot_z)[AXIS_INDEX[axis]](rad)


@dataclass(frozen=True)
class SidecarEntry:
    desc: str
    transform: RigidTransform


Sidecar = dict[tuple[tuple[int, ...], int], SidecarEntry]


def encode_plan(
    exe: BehaviorTree, obkg_model: ObjectModel, cfg: CodecConfig
) -> tuple[BehaviorTree, Sidecar]:
    """Executable tree -> semantic tree plus the sidecar of original numerics."""
    if exe.variant != "executable":
        raise VariantError("encode_plan expects an executable tree")
    sidecar: Sidecar = {}

    def encode_node(node: Node, path: tuple[int, ...]) -> Node:
        if isinstance(node, Sequence):
            return Sequence(children=tuple(
                encode_node(c, path + (i,)) for i, c in enumerate(node.children)
            ))
        if isinstance(node, Grasp):
            return node
        prev = RigidTransform.identity()
        entries = []
        for entry in node.targets:
            tp: RigidTransform = entry.payload
            ip = nearest_interaction_point(tp.translation, obkg_model)
            delta_z = float(tp.translation[2]) - float(obkg_model.offset(ip)[2])
            axis, angle = dominant_rotation(prev, tp)
            sem = SemanticTargetPose(ip, classify_vertical(delta_z, cfg), axis, angle)
            sidecar[(path, entry.index)] = SidecarEntry(desc=sem.desc, transform=tp)
            entries.append(TargetEntry(index=entry.index, payload=sem, duration=entry.duration))
            prev = tp
        return ExecTrajectory(targets=tuple(entries), stiffness=node.stiffness)

    root = encode_node(exe.root, ())
    return BehaviorTree(root=root, variant="semantic"), sidecar


def decode_plan(
    sem: BehaviorTree,
    obkg_model: ObjectModel,
    cfg: CodecConfig,
    sidecar: Sidecar | None = None,
) -> tuple[BehaviorTree, list[str]]:
    """Semantic tree -> executable tree.

    Entries whose triplet matches the sidecar at the same tree position reuse
    their original transform verbatim. Changed or new entries are synthesized:
    x, y from the named interaction point, z from the point plus the vertical
    offset, orientation chained from the previous entry through the labeled
    rotation (the first entry chains from identity). Out-of-set angles are
    snapped and noted.
    """
    if sem.variant != "semantic":
        raise VariantError("decode_plan expects a semantic tree")
    sidecar = sidecar or {}
    notes: list[str] = []
    valid = obkg_model.labels

    def decode_node(node: Node, path: tuple[int, ...]) -> Node:
        if isinstance(node, Sequence):
            return Sequence(children=tuple(
                decode_node(c, path + (i,)) for i, c in enumerate(node.children)
            ))
        if isinstance(node, Grasp):
            return node
        prev = RigidTransform.identity()
        entries = []
        for entry in node.targets:
            sem_tp: SemanticTargetPose = entry.payload
            original = sidecar.get((path, entry.index))
            if original is not None and original.desc == sem_tp.desc:
                tp = original.transform
            else:
                if sem_tp.ip_label not in valid:
                    raise DecodeError(
                        f"unknown interaction point {sem_tp.ip_label!r}; "
                        f"valid labels: {', '.join(valid)}"
                    )
                if not sem_tp.in_predefined_set:
                    snapped = snap_angle(sem_tp.angle_deg)
                    notes.append(
                        f"snapped angle {sem_tp.angle_deg} to {snapped} at entry {entry.index}"
                    )
                    sem_tp = SemanticTargetPose(sem_tp.ip_label, sem_tp.vertical, sem_tp.axis, snapped)
                offset = obkg_model.offset(sem_tp.ip_label)
                dz = {"above": cfg.z_above, "touching": cfg.eps_z, "below": cfg.z_below}[sem_tp.vertical]
                translation = np.array([offset[0], offset[1], offset[2] + dz])
                rotation = prev.rotation @ axis_rotation(sem_tp.axis, sem_tp.angle_deg)
                tp = RigidTransform(rotation, translation)
            entries.append(TargetEntry(index=entry.index, payload=tp, duration=entry.duration))
            prev = tp
        return ExecTrajectory(targets=tuple(entries), stiffness=node.stiffness)

    root = decode_node(sem.root, ())
    return BehaviorTree(root=root, variant="executable"), notes


def semantic_labels_valid(sem: BehaviorTree, obkg_model: ObjectModel) -> list[str]:
    """IP labels used by the tree that the model does not define."""
    valid = set(obkg_model.labels)
    missing = []
    for _, node in exec_nodes(sem):
        for entry in node.targets:
            if entry.payload.ip_label not in valid and entry.payload.ip_label not in missing:
                missing.append(entry.payload.ip_label)
    return missing
