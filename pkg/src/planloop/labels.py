"""The semantic target-pose triplet and its sentence grammar.

A triplet reads ``"<ip label>, <above|touching|below>, <axis word> <degrees>"``,
e.g. ``"plate center, touching, turning 90"``. Parsing is case-insensitive;
emission is lowercase.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError

VERTICAL_LABELS = ("above", "touching", "below")
AXIS_LABELS = ("side bending", "tilting", "turning")  # rotations about x, y, z
AXIS_INDEX = {"side bending": 0, "tilting": 1, "turning": 2}
PREDEFINED_ANGLES = (0, 45, 90, 135, 180, -135, -90, -45)


def wrap_degrees(angle: float) -> float:
    """Wrap to (-180, 180]."""
    a = (angle + 180.0) % 360.0 - 180.0
    return 180.0 if a == -180.0 else a


def snap_angle(angle_deg: float) -> int:
    """Nearest predefined angle by circular distance; ties go to the smaller |value|."""
    a = wrap_degrees(angle_deg)
    return min(PREDEFINED_ANGLES, key=lambda c: (abs(wrap_degrees(a - c)), abs(c), c))


@dataclass(frozen=True)
class SemanticTargetPose:
    """(interaction point, vertical relation, dominant rotation) for one target pose.

    A zero-angle rotation is canonicalized to ("turning", 0) regardless of the
    axis given. Angles outside the predefined set are kept as stated (LLMs emit
    them) and snapped at decode time.
    """

    ip_label: str
    vertical: str
    axis: str
    angle_deg: int

    def __post_init__(self):
        object.__setattr__(self, "ip_label", self.ip_label.strip().lower())
        object.__setattr__(self, "vertical", self.vertical.strip().lower())
        object.__setattr__(self, "axis", self.axis.strip().lower())
        object.__setattr__(self, "angle_deg", int(wrap_degrees(self.angle_deg)))
        if not self.ip_label:
            raise ValueError("empty interaction-point label")
        if self.vertical not in VERTICAL_LABELS:
            raise ValueError(f"vertical must be one of {VERTICAL_LABELS}, got {self.vertical!r}")
        if self.axis not in AXIS_LABELS:
            raise ValueError(f"axis must be one of {AXIS_LABELS}, got {self.axis!r}")
        if self.angle_deg == 0 and self.axis != "turning":
            object.__setattr__(self, "axis", "turning")

    @property
    def desc(self) -> str:
        return f"{self.ip_label}, {self.vertical}, {self.axis} {self.angle_deg}"

    @property
    def in_predefined_set(self) -> bool:
        return self.angle_deg in PREDEFINED_ANGLES

    def snapped(self) -> "SemanticTargetPose":
        return SemanticTargetPose(self.ip_label, self.vertical, self.axis, snap_angle(self.angle_deg))


def parse_desc(text: str) -> SemanticTargetPose:
    """Parse a triplet sentence; the ip label may itself contain commas."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) < 3:
        raise ParseError(f"triplet needs 'ip, vertical, rotation': {text!r}")
    rotation = parts[-1].lower()
    vertical = parts[-2].lower()
    ip_label = ",".join(parts[:-2]).strip()
    axis = None
    for candidate in AXIS_LABELS:
        if rotation.startswith(candidate):
            axis = candidate
            rest = rotation[len(candidate):].strip()
            break
    if axis is None:
        raise ParseError(f"unknown rotation axis in {rotation!r}")
    rest = rest.replace("\N{DEGREE SIGN}", "").replace("degrees", "").replace("deg", "").strip()
    try:
        angle = int(round(float(rest)))
    except ValueError as exc:
        raise ParseError(f"bad rotation angle in {rotation!r}") from exc
    try:
        return SemanticTargetPose(ip_label, vertical, axis, angle)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
