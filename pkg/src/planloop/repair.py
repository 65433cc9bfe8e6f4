"""Structural validation and automatic repair of raw (possibly malformed) BT XML.

Repairs are applied in a fixed order so logs are deterministic:

1. strip non-XML prose wrappers (markdown fences, chatter around the tree)
2. close unclosed known tags
3. drop unknown tags
4. inject the default stiffness where absent
5. renumber target-pose indices consecutively
6. wrap orphan siblings in a Sequence

Anything the rules cannot fix (no recognizable tree at all, a target pose
without a payload, an invalid grasp action) raises RepairError carrying the
raw text so the caller can show it to the user.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .btree import (
    DEFAULT_DURATION,
    KNOWN_ATTRS,
    STIFFNESS_LEVELS,
    BehaviorTree,
    ExecTrajectory,
    Grasp,
    Node,
    Sequence,
    TargetEntry,
    from_xml,
    to_xml,
)
from .errors import ParseError, RepairError, TreeError, VariantError
from .labels import parse_desc
from .transforms import RigidTransform

KNOWN_TAGS = {"behaviortree": "BehaviorTree", "sequence": "Sequence", "grasp": "Grasp",
              "exectrajectory": "ExecTrajectory", "targetpose": "TargetPose"}

_TAG_RE = re.compile(
    r"<\s*(?P<close>/?)\s*(?P<name>[A-Za-z][\w.-]*)"
    r"(?P<attrs>(?:\s+[\w:.-]+\s*=\s*(?:\"[^\"]*\"|'[^']*'|[^\s/>]+))*)"
    r"\s*(?P<self>/?)\s*>")
_ATTR_RE = re.compile(r"([\w:.-]+)\s*=\s*(\"[^\"]*\"|'[^']*'|[^\s/>]+)")


@dataclass
class _Raw:
    tag: str
    attrs: dict[str, str]
    children: list["_Raw"] = field(default_factory=list)


def _scan(text: str, log: list[str]) -> list[_Raw]:
    """Tokenize, drop unknown tags, close unclosed ones; returns top-level elements."""
    stray = []
    last = 0
    tokens = []
    for m in _TAG_RE.finditer(text):
        stray.append(text[last:m.start()])
        last = m.end()
        name = KNOWN_TAGS.get(m.group("name").lower())
        if name is None:
            log.append(f"dropped unknown tag <{'/' if m.group('close') else ''}{m.group('name')}>")
            continue
        attrs = {k: v.strip("\"'") for k, v in _ATTR_RE.findall(m.group("attrs") or "")}
        tokens.append((bool(m.group("close")), name, attrs, bool(m.group("self"))))
    stray.append(text[last:])
    if any(s.strip() for s in stray):
        log.append("stripped non-XML text around the tree")
    if not tokens:
        raise RepairError("no recognizable behavior-tree element in output", raw_text=text)

    top: list[_Raw] = []
    stack: list[_Raw] = []
    leaves = ("Grasp", "TargetPose")

    for is_close, name, attrs, self_close in tokens:
        if is_close:
            if any(el.tag == name for el in stack):
                while stack and stack[-1].tag != name:
                    log.append(f"closed unclosed <{stack[-1].tag}>")
                    stack.pop()
                stack.pop()
            else:
                log.append(f"dropped stray </{name}>")
            continue
        # a new element ends any still-open leaf: leaves cannot nest children
        while stack and stack[-1].tag in leaves:
            log.append(f"closed unclosed <{stack[-1].tag}>")
            stack.pop()
        el = _Raw(tag=name, attrs=attrs)
        (stack[-1].children if stack else top).append(el)
        if not self_close:
            stack.append(el)
    while stack:
        log.append(f"closed unclosed <{stack[-1].tag}>")
        stack.pop()
    return top


def _build_entry(raw: _Raw, variant: str, position: int, log: list[str], raw_text: str) -> TargetEntry:
    attrs = dict(raw.attrs)
    for key in list(attrs):
        if key not in KNOWN_ATTRS["TargetPose"]:
            log.append(f"dropped unknown attribute {key!r} on <TargetPose>")
            del attrs[key]
    duration = DEFAULT_DURATION
    if "duration" in attrs:
        try:
            duration = float(attrs["duration"])
            if duration <= 0:
                raise ValueError
        except ValueError:
            log.append(f"replaced bad duration {attrs['duration']!r} with default")
            duration = DEFAULT_DURATION
    if variant == "semantic":
        if "desc" not in attrs:
            raise RepairError("semantic TargetPose without a desc attribute", raw_text=raw_text)
        try:
            payload = parse_desc(attrs["desc"])
        except ParseError as exc:
            raise RepairError(f"unparseable triplet {attrs['desc']!r}: {exc}", raw_text=raw_text)
    else:
        if "p" not in attrs or "q" not in attrs:
            raise RepairError("executable TargetPose without p/q attributes", raw_text=raw_text)
        try:
            p = [float(v) for v in attrs["p"].split()]
            q = [float(v) for v in attrs["q"].split()]
            payload = RigidTransform.from_quaternion(q, p)
        except (ValueError, TreeError) as exc:
            raise RepairError(f"bad numeric target pose: {exc}", raw_text=raw_text)
    return TargetEntry(index=position, payload=payload, duration=duration)


def _build_node(raw: _Raw, variant: str, log: list[str], raw_text: str) -> Node | None:
    if raw.tag == "Sequence":
        children = []
        for child in raw.children:
            if child.tag == "TargetPose":
                log.append("dropped <TargetPose> outside ExecTrajectory")
                continue
            node = _build_node(child, variant, log, raw_text)
            if node is not None:
                children.append(node)
        if not children:
            log.append("dropped empty <Sequence>")
            return None
        for key in raw.attrs:
            log.append(f"dropped unknown attribute {key!r} on <Sequence>")
        return Sequence(children=tuple(children))
    if raw.tag == "Grasp":
        action = raw.attrs.get("action", "").strip().lower()
        if action not in ("open", "close"):
            raise RepairError(f"grasp action {raw.attrs.get('action')!r} is not open/close",
                              raw_text=raw_text)
        for key in raw.attrs:
            if key != "action":
                log.append(f"dropped unknown attribute {key!r} on <Grasp>")
        return Grasp(action=action)
    if raw.tag == "ExecTrajectory":
        stiffness = raw.attrs.get("stiffness")
        if stiffness is None:
            log.append('injected default stiffness="medium"')
            stiffness = "medium"
        elif stiffness.strip().lower() not in STIFFNESS_LEVELS:
            log.append(f"replaced unknown stiffness {stiffness!r} with default")
            stiffness = "medium"
        else:
            stiffness = stiffness.strip().lower()
        for key in raw.attrs:
            if key != "stiffness":
                log.append(f"dropped unknown attribute {key!r} on <ExecTrajectory>")
        entries = []
        stated: list[str] = []
        for child in raw.children:
            if child.tag != "TargetPose":
                log.append(f"dropped <{child.tag}> inside ExecTrajectory")
                continue
            stated.append(child.attrs.get("i", "?"))
            entries.append(_build_entry(child, variant, len(entries), log, raw_text))
        if not entries:
            raise RepairError("ExecTrajectory without target poses", raw_text=raw_text)
        if stated != [str(i) for i in range(len(entries))]:
            log.append(f"renumbered target-pose indices {stated} to 0..{len(entries) - 1}")
        return ExecTrajectory(targets=tuple(entries), stiffness=stiffness)
    if raw.tag == "BehaviorTree":
        log.append("dropped nested <BehaviorTree>")
        return None
    raise AssertionError(raw.tag)


def validate_and_repair(xml_text: str, variant: str) -> tuple[BehaviorTree, list[str]]:
    """Repair raw model output into a valid tree of the expected variant.

    Valid input passes through unchanged with an empty log. Returns the tree
    and the ordered human-readable repair log.
    """
    if variant not in ("executable", "semantic"):
        raise VariantError(f"variant must be executable or semantic, got {variant!r}")
    try:
        tree = from_xml(xml_text)
        if tree.variant == variant:
            return tree, []
    except (ParseError, TreeError, VariantError):
        pass

    log: list[str] = []
    top = _scan(xml_text, log)

    roots = top
    if len(top) == 1 and top[0].tag == "BehaviorTree":
        stated = top[0].attrs.get("variant")
        if stated is not None and stated != variant:
            log.append(f"overrode variant {stated!r} with {variant!r}")
        roots = top[0].children
    elif not any(el.tag == "BehaviorTree" for el in top):
        log.append("wrapped output in <BehaviorTree>")
    if len(top) > 1 and any(el.tag == "BehaviorTree" for el in top):
        # BehaviorTree mixed with siblings: unwrap it in place
        unwrapped: list[_Raw] = []
        for el in top:
            unwrapped.extend(el.children if el.tag == "BehaviorTree" else [el])
        roots = unwrapped

    nodes = []
    for el in roots:
        if el.tag == "TargetPose":
            log.append("dropped <TargetPose> outside ExecTrajectory")
            continue
        node = _build_node(el, variant, log, xml_text)
        if node is not None:
            nodes.append(node)
    if not nodes:
        raise RepairError("nothing usable left after repair", raw_text=xml_text)
    if len(nodes) == 1 and isinstance(nodes[0], Sequence):
        root: Node = nodes[0]
    else:
        log.append(f"wrapped {len(nodes)} orphan sibling(s) in a Sequence")
        root = Sequence(children=tuple(nodes))

    try:
        tree = BehaviorTree(root=root, variant=variant)
    except (TreeError, VariantError) as exc:
        raise RepairError(f"repaired tree still invalid: {exc}", raw_text=xml_text)
    return tree, log


def repair_roundtrip_stable(xml_text: str, variant: str) -> bool:
    """True when repairing the repaired output changes nothing (idempotence)."""
    tree, _ = validate_and_repair(xml_text, variant)
    again, log2 = validate_and_repair(to_xml(tree), variant)
    from .btree import tree_equal

    return tree_equal(tree, again) and not log2
