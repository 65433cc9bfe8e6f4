import numpy as np
import pytest

from planloop.btree import BehaviorTree, ExecTrajectory, Grasp, Node, Sequence, TargetEntry
from planloop.fixtures import generate_fixture
from planloop.labels import SemanticTargetPose
from planloop.segmentation import extract_plan
from planloop.semcodec import CodecConfig, encode_plan


def edit_entry(tree: BehaviorTree, index: int, **changes) -> BehaviorTree:
    """Copy a semantic tree with one target entry's triplet fields replaced."""

    def rebuild(node: Node) -> Node:
        if isinstance(node, Sequence):
            return Sequence(children=tuple(rebuild(c) for c in node.children))
        if isinstance(node, Grasp):
            return node
        entries = []
        for entry in node.targets:
            if entry.index == index:
                sem = entry.payload
                fields = {
                    "ip_label": sem.ip_label, "vertical": sem.vertical,
                    "axis": sem.axis, "angle_deg": sem.angle_deg,
                }
                duration = changes.pop("duration", entry.duration) if "duration" in changes \
                    else entry.duration
                fields.update(changes)
                entry = TargetEntry(index=entry.index,
                                    payload=SemanticTargetPose(**fields),
                                    duration=duration)
            entries.append(entry)
        return ExecTrajectory(targets=tuple(entries), stiffness=node.stiffness)

    return BehaviorTree(root=rebuild(tree.root), variant=tree.variant)


def append_entry(tree: BehaviorTree, payload: SemanticTargetPose, duration: float = 2.0) -> BehaviorTree:
    def rebuild(node: Node) -> Node:
        if isinstance(node, Sequence):
            return Sequence(children=tuple(rebuild(c) for c in node.children))
        if isinstance(node, Grasp):
            return node
        entries = list(node.targets)
        entries.append(TargetEntry(index=len(entries), payload=payload, duration=duration))
        return ExecTrajectory(targets=tuple(entries), stiffness=node.stiffness)

    return BehaviorTree(root=rebuild(tree.root), variant=tree.variant)


def set_stiffness(tree: BehaviorTree, stiffness: str) -> BehaviorTree:
    def rebuild(node: Node) -> Node:
        if isinstance(node, Sequence):
            return Sequence(children=tuple(rebuild(c) for c in node.children))
        if isinstance(node, Grasp):
            return node
        return ExecTrajectory(targets=node.targets, stiffness=stiffness)

    return BehaviorTree(root=rebuild(tree.root), variant=tree.variant)


@pytest.fixture(scope="session")
def pouring_extraction():
    demo, truth = generate_fixture("pouring", seed=0)
    return demo, truth, extract_plan(demo, truth.config, truth.d_th)


@pytest.fixture(scope="session")
def cleaning_extraction():
    demo, truth = generate_fixture("zigzag_cleaning", seed=0)
    return demo, truth, extract_plan(demo, truth.config, truth.d_th)


@pytest.fixture(scope="session")
def pick_extraction():
    demo, truth = generate_fixture("pick_and_place", seed=0)
    return demo, truth, extract_plan(demo, truth.config, truth.d_th)
