"""Behavior-tree model, tick semantics, and XML serialization.

Schema::

    <BehaviorTree variant="executable|semantic">
      <Sequence>
        <Grasp action="close"/>
        <ExecTrajectory stiffness="medium">
          <TargetPose i="0" duration="2.0" p="x y z" q="w x y z"/>   (executable)
          <TargetPose i="0" duration="2.0" desc="plate center, touching, turning 90"/>
        </ExecTrajectory>
        <Grasp action="open"/>
      </Sequence>
    </BehaviorTree>
"""
from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Union

import numpy as np

from .errors import ParseError, TreeError, VariantError
from .labels import SemanticTargetPose, parse_desc
from .transforms import RigidTransform

STIFFNESS_LEVELS = ("low", "medium", "high")
DEFAULT_DURATION = 2.0
KNOWN_ATTRS = {
    "BehaviorTree": {"variant"},
    "Sequence": set(),
    "Grasp": {"action"},
    "ExecTrajectory": {"stiffness"},
    "TargetPose": {"i", "duration", "p", "q", "desc"},
}


class Status(Enum):
    SUCCESS = "SUCCESS"
    FAILURE = "FAILURE"
    RUNNING = "RUNNING"


Payload = Union[RigidTransform, SemanticTargetPose]


@dataclass(frozen=True)
class TargetEntry:
    index: int
    payload: Payload
    duration: float = DEFAULT_DURATION

    def __post_init__(self):
        if self.duration <= 0:
            raise TreeError(f"duration must be > 0, got {self.duration}")


@dataclass(frozen=True)
class Grasp:
    action: str  # "open" | "close"

    def __post_init__(self):
        if self.action not in ("open", "close"):
            raise TreeError(f"grasp action must be open or close, got {self.action!r}")


@dataclass(frozen=True)
class ExecTrajectory:
    targets: tuple[TargetEntry, ...]
    stiffness: str = "medium"

    def __post_init__(self):
        if not self.targets:
            raise TreeError("ExecTrajectory needs at least one target pose")
        if self.stiffness not in STIFFNESS_LEVELS:
            raise TreeError(f"stiffness must be one of {STIFFNESS_LEVELS}, got {self.stiffness!r}")
        if list(e.index for e in self.targets) != list(range(len(self.targets))):
            raise TreeError("target-pose indices must be consecutive from 0")


@dataclass(frozen=True)
class Sequence:
    children: tuple["Node", ...]

    def __post_init__(self):
        if not self.children:
            raise TreeError("Sequence needs at least one child")


Node = Union[Sequence, Grasp, ExecTrajectory]


@dataclass(frozen=True)
class BehaviorTree:
    root: Node
    variant: str  # "executable" | "semantic"

    def __post_init__(self):
        if self.variant not in ("executable", "semantic"):
            raise TreeError(f"variant must be executable or semantic, got {self.variant!r}")
        expected = RigidTransform if self.variant == "executable" else SemanticTargetPose
        for path, node in iter_nodes(self):
            if isinstance(node, ExecTrajectory):
                for entry in node.targets:
                    if not isinstance(entry.payload, expected):
                        raise VariantError(
                            f"{self.variant} tree holds a {type(entry.payload).__name__} "
                            f"payload at node {path}"
                        )


def iter_nodes(tree: BehaviorTree):
    """Depth-first (path, node) pairs; paths are child-index tuples from the root."""

    def walk(node: Node, path: tuple[int, ...]):
        yield path, node
        if isinstance(node, Sequence):
            for i, child in enumerate(node.children):
                yield from walk(child, path + (i,))

    yield from walk(tree.root, ())


def exec_nodes(tree: BehaviorTree) -> list[tuple[tuple[int, ...], ExecTrajectory]]:
    return [(p, n) for p, n in iter_nodes(tree) if isinstance(n, ExecTrajectory)]


def tree_equal(a: BehaviorTree, b: BehaviorTree) -> bool:
    """Structural equality; numeric payloads compared bit-for-bit."""
    if a.variant != b.variant:
        return False

    def node_eq(x: Node, y: Node) -> bool:
        if type(x) is not type(y):
            return False
        if isinstance(x, Sequence):
            return len(x.children) == len(y.children) and all(
                node_eq(c, d) for c, d in zip(x.children, y.children)
            )
        if isinstance(x, Grasp):
            return x.action == y.action
        if x.stiffness != y.stiffness or len(x.targets) != len(y.targets):
            return False
        for e, f in zip(x.targets, y.targets):
            if e.index != f.index or e.duration != f.duration:
                return False
            if isinstance(e.payload, RigidTransform):
                if not isinstance(f.payload, RigidTransform) or not e.payload.equal_bits(f.payload):
                    return False
            elif e.payload != f.payload:
                return False
        return True

    return node_eq(a.root, b.root)


# ---------------------------------------------------------------------------
# tick


class TickState:
    """Per-Sequence resume cursors, kept outside the (immutable) tree."""

    def __init__(self):
        self.cursors: dict[tuple[int, ...], int] = {}

    def _clear_subtree(self, path: tuple[int, ...]):
        for key in [k for k in self.cursors if k[: len(path)] == path]:
            del self.cursors[key]


Executor = Callable[[Node, tuple[int, ...]], Status]


def tick(tree: BehaviorTree, executor: Executor, state: TickState | None = None) -> Status:
    """Propagate one tick. Sequences run children in order, short-circuit on
    FAILURE, and resume from a RUNNING child on the next tick."""
    if tree.variant != "executable":
        raise VariantError("only executable trees can be ticked")
    if state is None:
        state = TickState()

    def run(node: Node, path: tuple[int, ...]) -> Status:
        if not isinstance(node, Sequence):
            status = executor(node, path)
            if not isinstance(status, Status):
                raise TreeError(f"executor returned {status!r} instead of a Status")
            return status
        start = state.cursors.get(path, 0)
        for i in range(start, len(node.children)):
            status = run(node.children[i], path + (i,))
            if status is Status.RUNNING:
                state.cursors[path] = i
                return Status.RUNNING
            if status is Status.FAILURE:
                state._clear_subtree(path)
                return Status.FAILURE
        state._clear_subtree(path)
        return Status.SUCCESS

    return run(tree.root, ())


# ---------------------------------------------------------------------------
# XML


def _fmt_floats(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def _entry_to_element(entry: TargetEntry) -> ET.Element:
    el = ET.Element("TargetPose")
    el.set("i", str(entry.index))
    el.set("duration", repr(float(entry.duration)))
    if isinstance(entry.payload, RigidTransform):
        el.set("p", _fmt_floats(entry.payload.translation))
        el.set("q", _fmt_floats(entry.payload.quaternion()))
    else:
        el.set("desc", entry.payload.desc)
    return el


def _node_to_element(node: Node) -> ET.Element:
    if isinstance(node, Sequence):
        el = ET.Element("Sequence")
        for child in node.children:
            el.append(_node_to_element(child))
        return el
    if isinstance(node, Grasp):
        el = ET.Element("Grasp")
        el.set("action", node.action)
        return el
    el = ET.Element("ExecTrajectory")
    el.set("stiffness", node.stiffness)
    for entry in node.targets:
        el.append(_entry_to_element(entry))
    return el


def to_xml(tree: BehaviorTree) -> str:
    root = ET.Element("BehaviorTree")
    root.set("variant", tree.variant)
    root.append(_node_to_element(tree.root))
    ET.indent(root, space="  ")
    return ET.tostring(root, encoding="unicode")


def _parse_floats(text: str, count: int, what: str) -> np.ndarray:
    parts = text.split()
    if len(parts) != count:
        raise ParseError(f"{what} needs {count} numbers, got {len(parts)}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise ParseError(f"bad number in {what}: {exc}") from exc


def _entry_from_element(el: ET.Element, variant: str, position: int) -> TargetEntry:
    _check_attrs(el)
    try:
        index = int(el.get("i", position))
    except ValueError as exc:
        raise ParseError(f"bad target-pose index {el.get('i')!r}") from exc
    try:
        duration = float(el.get("duration", DEFAULT_DURATION))
    except ValueError as exc:
        raise ParseError(f"bad duration {el.get('duration')!r}") from exc
    has_numeric = el.get("p") is not None or el.get("q") is not None
    has_desc = el.get("desc") is not None
    if has_numeric and has_desc:
        raise VariantError("TargetPose carries both numeric and semantic payloads")
    if variant == "executable":
        if not (el.get("p") and el.get("q")):
            raise VariantError("executable TargetPose needs p and q attributes")
        payload: Payload = RigidTransform.from_quaternion(
            _parse_floats(el.get("q"), 4, "q"), _parse_floats(el.get("p"), 3, "p")
        )
    else:
        if not has_desc:
            raise VariantError("semantic TargetPose needs a desc attribute")
        payload = parse_desc(el.get("desc"))
    return TargetEntry(index=index, payload=payload, duration=duration)


def _check_attrs(el: ET.Element) -> None:
    allowed = KNOWN_ATTRS.get(el.tag, set())
    for key in el.attrib:
        if key not in allowed:
            raise ParseError(f"unknown attribute {key!r} on <{el.tag}>")


def _node_from_element(el: ET.Element, variant: str) -> Node:
    _check_attrs(el)
    if el.tag == "Sequence":
        children = tuple(_node_from_element(c, variant) for c in el)
        try:
            return Sequence(children=children)
        except TreeError as exc:
            raise ParseError(str(exc)) from exc
    if el.tag == "Grasp":
        try:
            return Grasp(action=el.get("action", ""))
        except TreeError as exc:
            raise ParseError(str(exc)) from exc
    if el.tag == "ExecTrajectory":
        entries = tuple(
            _entry_from_element(c, variant, i) if c.tag == "TargetPose"
            else _bad_tag(c.tag) for i, c in enumerate(el)
        )
        stiffness = el.get("stiffness")
        if stiffness is None:
            raise ParseError("ExecTrajectory is missing the stiffness attribute")
        try:
            return ExecTrajectory(targets=entries, stiffness=stiffness)
        except TreeError as exc:
            raise ParseError(str(exc)) from exc
    return _bad_tag(el.tag)


def _bad_tag(tag: str):
    raise ParseError(f"unknown tag <{tag}>")


def from_xml(text: str) -> BehaviorTree:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc}") from exc
    if root.tag != "BehaviorTree":
        raise ParseError(f"expected <BehaviorTree> root, got <{root.tag}>")
    variant = root.get("variant", "")
    if variant not in ("executable", "semantic"):
        raise ParseError(f"bad or missing variant attribute {variant!r}")
    body = list(root)
    if len(body) != 1:
        raise ParseError(f"<BehaviorTree> must hold exactly one root node, got {len(body)}")
    return BehaviorTree(root=_node_from_element(body[0], variant), variant=variant)
