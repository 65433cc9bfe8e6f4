"""Synthetic demonstration generators with known ground truth.

Three scripted manipulations: a pick-and-place (bell-shaped MI, no interior
key instants), a zigzag tray cleaning (five direction reversals), and a
two-step pouring (two tilt pauses). Co-moving phases use straight legs with a
trapezoidal speed profile (cosine blends of fixed width), and reversals pause
briefly, which is what makes the MI dips sharp and symmetric. Each generator
returns the demonstration plus a FixtureTruth carrying the phase boundaries
and the segmentation config the fixture was calibrated for.

All randomness is additive Gaussian position noise from a seeded generator:
the same seed reproduces the demonstration bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .demo import Demonstration, ObjectModel, Trajectory
from .errors import PlanloopError
from .harness import Box, Scene
from .segmentation.mi import WindowConfig
from .transforms import RigidTransform, matrix_to_quaternion, rot_y

FPS = 30.0
SPEED = 0.006          # m per frame along co-moving legs
BLEND = 10             # frames of cosine speed blend at eased leg ends
IDENTITY_Q = np.array([1.0, 0.0, 0.0, 0.0])

FIXTURE_KINDS = ("pick_and_place", "zigzag_cleaning", "pouring")

TRAY_IPS = (
    ("bottom-left corner", (-0.15, -0.10, 0.0)),
    ("bottom-right corner", (0.15, -0.10, 0.0)),
    ("top-left corner", (-0.15, 0.10, 0.0)),
    ("top-right corner", (0.15, 0.10, 0.0)),
    ("bottom-edge mid point", (0.0, -0.10, 0.0)),
    ("top-edge mid point", (0.0, 0.10, 0.0)),
    ("left-edge mid point", (-0.15, 0.0, 0.0)),
    ("right-edge mid point", (0.15, 0.0, 0.0)),
    ("center", (0.0, 0.0, 0.0)),
)
GLASS_IPS = (
    ("left rim", (-0.04, 0.0, 0.10)),
    ("right rim", (0.04, 0.0, 0.10)),
    ("center", (0.0, 0.0, 0.05)),
)
PLATE_IPS = (
    ("center", (0.0, 0.0, 0.0)),
    ("north rim", (0.0, 0.08, 0.0)),
    ("south rim", (0.0, -0.08, 0.0)),
    ("east rim", (0.08, 0.0, 0.0)),
    ("west rim", (-0.08, 0.0, 0.0)),
)


@dataclass(frozen=True)
class FixtureTruth:
    kind: str
    grasp_frame: int
    release_frame: int
    turning_frames: tuple[int, ...]
    config: WindowConfig
    d_th: float
    hand_name: str = "hand"
    extras: dict = field(default_factory=dict)


def _leg_profile(length: float, v_peak: float, blend: int, ease_start: bool, ease_end: bool):
    """Normalized progress samples (endpoint excluded) of a blended trapezoid."""
    bs = blend if ease_start else 0
    be = blend if ease_end else 0
    frames = max(int(round(length / v_peak + (bs + be) / 2)), bs + be + 1)
    t = np.arange(frames)
    w = np.ones(frames)
    if bs:
        w[:bs] = 0.5 * (1 - np.cos(np.pi * (t[:bs] + 0.5) / bs))
    if be:
        w[frames - be:] = 0.5 * (1 - np.cos(np.pi * (frames - (t[frames - be:] + 0.5)) / be))
    s = np.concatenate([[0.0], np.cumsum(w)])[:-1]
    s /= s[-1] + w[-1]
    return s, frames


def _leg(p0, p1, v_peak=SPEED, blend=BLEND, ease_start=True, ease_end=True):
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    s, frames = _leg_profile(float(np.linalg.norm(p1 - p0)), v_peak, blend, ease_start, ease_end)
    return p0 + np.outer(s, p1 - p0), frames


def _ease_seg(p0, p1, frames: int, profile: str = "both"):
    """Hand-only connective legs; endpoint excluded."""
    tt = np.linspace(0.0, 1.0, frames, endpoint=False)
    if profile == "both":
        s = 0.5 * (1 - np.cos(np.pi * tt))
    elif profile == "in":       # moving -> stop
        s = np.sin(np.pi * tt / 2)
    else:                        # stop -> moving
        s = 1 - np.cos(np.pi * tt / 2)
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    return p0 + np.outer(s, p1 - p0)


def _hold(p, frames: int):
    return np.tile(np.asarray(p, dtype=np.float64), (frames, 1))


def _trajectory(entity: str, positions: np.ndarray, quats: np.ndarray | None = None) -> Trajectory:
    n = len(positions)
    if quats is None:
        quats = np.tile(IDENTITY_Q, (n, 1))
    return Trajectory(
        entity_id=entity,
        frames=np.arange(n, dtype=np.int64),
        times=np.arange(n) / FPS,
        positions=positions,
        quaternions=quats,
    )


def _assemble(rng, noise, hand_pos, om_name, om_pos, om_quats, obkg_name, obkg_pose,
              om_model, obkg_model, manipulated, background) -> Demonstration:
    n = len(hand_pos)
    obkg_pos = np.tile(obkg_pose.translation, (n, 1))
    obkg_q = np.tile(obkg_pose.quaternion(), (n, 1))
    hand = hand_pos + rng.normal(0.0, noise, hand_pos.shape)
    om = om_pos + rng.normal(0.0, noise, om_pos.shape)
    obkg = obkg_pos + rng.normal(0.0, noise, obkg_pos.shape)
    return Demonstration(
        hand=_trajectory("hand", hand),
        objects={
            om_name: _trajectory(om_name, om, om_quats),
            obkg_name: _trajectory(obkg_name, obkg, obkg_q),
        },
        models={om_name: om_model, obkg_name: obkg_model},
        manipulated=manipulated,
        background=background,
    )


def _pick_and_place(seed: int, noise: float):
    cup0 = np.array([0.0, 0.0, 0.0])
    plate_pose = RigidTransform(translation=(0.35, 0.20, 0.05))
    hand_rest = np.array([-0.30, -0.20, 0.15])
    hand_grip = np.array([0.0, 0.0, 0.04])
    n_pad, n_app, n_dep = 15, 60, 60

    hand = [_hold(hand_rest, n_pad), _ease_seg(hand_rest, cup0 + hand_grip, n_app)]
    cup = [_hold(cup0, n_pad + n_app)]
    grasp = n_pad + n_app
    carry, d_carry = _leg(cup0, plate_pose.translation)
    hand.append(carry + hand_grip)
    cup.append(carry)
    release = grasp + d_carry - 1  # last co-moving frame
    hand.append(_ease_seg(carry[-1] + hand_grip, hand_rest, n_dep))
    hand.append(_hold(hand_rest, n_pad))
    cup.append(_hold(plate_pose.translation, n_dep + n_pad))

    truth = FixtureTruth(
        kind="pick_and_place",
        grasp_frame=grasp,
        release_frame=release,
        turning_frames=(),
        config=WindowConfig(mi_zero_tol=1.1, min_prominence=0.6),
        d_th=0.15,
    )
    rng = np.random.default_rng(seed)
    demo = _assemble(
        rng, noise, np.vstack(hand), "cup", np.vstack(cup), None, "plate", plate_pose,
        ObjectModel("cup", (("base", (0.0, 0.0, 0.0)),)),
        ObjectModel("plate", tuple((n, np.array(o)) for n, o in PLATE_IPS)),
        manipulated="cup", background="plate",
    )
    return demo, truth


DEFAULT_ZIGZAG_OFFSETS = (0.03, -0.02, 0.04, -0.03, 0.02, 0.03)


def _zigzag_cleaning(seed: int, noise: float, reversals: int = 5,
                     vertical_offsets=DEFAULT_ZIGZAG_OFFSETS, hold: int = 9):
    if reversals != len(vertical_offsets) - 1:
        raise PlanloopError("need one vertical offset per stroke (reversals + 1)")
    strokes = reversals + 1
    tray_pose = RigidTransform(translation=(0.0, 0.0, 0.04))
    xs = np.linspace(-0.15, 0.15, strokes + 1)
    ys = [-0.10 if i % 2 == 0 else 0.10 for i in range(strokes + 1)]
    pts = np.array([
        [xs[i], ys[i], 0.04 + (vertical_offsets[i - 1] if i > 0 else 0.0)]
        for i in range(strokes + 1)
    ])
    dir_in = (pts[1] - pts[0]) / np.linalg.norm(pts[1] - pts[0])
    dir_out = (pts[-1] - pts[-2]) / np.linalg.norm(pts[-1] - pts[-2])
    sponge0 = pts[0] - dir_in * 0.30
    exit_end = pts[-1] + dir_out * 0.25
    hand_off = np.array([0.0, 0.02, 0.06])
    hand_rest = sponge0 + np.array([-0.12, 0.06, 0.10])
    n_pad, n_app, n_dep = 15, 45, 45

    hand = [_hold(hand_rest, n_pad), _ease_seg(hand_rest, sponge0 + hand_off, n_app)]
    sponge = [_hold(sponge0, n_pad + n_app)]
    grasp = n_pad + n_app

    legs = []
    bounds = []
    t_acc = grasp
    waypoints = [sponge0, *pts, exit_end]
    eases = [(True, False), (False, True)] + [(True, True)] * (strokes - 2) \
        + [(True, False), (False, False)]
    for i in range(len(waypoints) - 1):
        arr, frames = _leg(waypoints[i], waypoints[i + 1], ease_start=eases[i][0], ease_end=eases[i][1])
        legs.append(arr)
        t_acc += frames
        if 1 <= i <= reversals:  # reversal dwell after each interior stroke
            legs.append(_hold(waypoints[i + 1], hold))
            bounds.append(t_acc + hold // 2)
            t_acc += hold
    co = np.vstack(legs)
    hand.append(co + hand_off)
    sponge.append(co)
    release = grasp + len(co) - 1
    hand.append(_ease_seg(co[-1] + hand_off, hand_rest, n_dep, "in"))
    hand.append(_hold(hand_rest, n_pad))
    sponge.append(_hold(co[-1], n_dep + n_pad))

    truth = FixtureTruth(
        kind="zigzag_cleaning",
        grasp_frame=grasp,
        release_frame=release,
        turning_frames=tuple(bounds),
        config=WindowConfig(mi_zero_tol=0.7, min_prominence=0.6),
        d_th=0.30,
        extras={"reversal_points": pts[1:-1].tolist()},
    )
    rng = np.random.default_rng(seed)
    demo = _assemble(
        rng, noise, np.vstack(hand), "sponge", np.vstack(sponge), None, "tray", tray_pose,
        ObjectModel("sponge", (("front edge", (0.0, 0.0, 0.0)),)),
        ObjectModel("tray", tuple((n, np.array(o)) for n, o in TRAY_IPS)),
        manipulated="sponge", background="tray",
    )
    return demo, truth


def _pouring(seed: int, noise: float, hold: int = 13, tilt_speed: float = 0.004):
    glass_pose = RigidTransform(translation=(0.45, 0.25, 0.0))
    g = glass_pose.translation
    spout0 = np.array([0.0, 0.0, 0.22])
    handle_off = np.array([-0.10, 0.0, -0.12])  # hand on the handle, in jug frame
    hand_rest = spout0 + np.array([-0.25, -0.15, 0.05])
    p_app = g + np.array([-0.04, 0.0, 0.22])     # above the left rim
    p_tilt1 = g + np.array([0.04, 0.02, 0.08])   # spout dips below the right rim
    p_tilt2 = g + np.array([0.04, 0.10, 0.16])
    p_exit = p_tilt2 + np.array([-0.10, -0.06, 0.10])
    n_pad, n_app, n_dep = 15, 60, 60

    hand = [_hold(hand_rest, n_pad), _ease_seg(hand_rest, spout0 + handle_off, n_app)]
    grasp = n_pad + n_app

    segs: list[tuple[np.ndarray, np.ndarray]] = []  # (spout positions, tilt angles deg)

    def add_leg(p0, p1, a0, a1, v, ease_start, ease_end):
        s, frames = _leg_profile(float(np.linalg.norm(np.asarray(p1) - np.asarray(p0))),
                                 v, BLEND, ease_start, ease_end)
        pos = np.asarray(p0) + np.outer(s, np.asarray(p1) - np.asarray(p0))
        segs.append((pos, a0 + s * (a1 - a0)))
        return frames

    t_acc = grasp
    t_acc += add_leg(spout0, p_app, 0.0, 0.0, SPEED, True, False)
    t_acc += add_leg(p_app, p_tilt1, 0.0, -45.0, tilt_speed, False, True)
    segs.append((_hold(p_tilt1, hold), np.full(hold, -45.0)))
    tilt1_frame = t_acc + hold // 2
    t_acc += hold
    t_acc += add_leg(p_tilt1, p_tilt2, -45.0, -135.0, tilt_speed, True, True)
    segs.append((_hold(p_tilt2, hold), np.full(hold, -135.0)))
    tilt2_frame = t_acc + hold // 2
    t_acc += hold
    add_leg(p_tilt2, p_exit, -135.0, -135.0, SPEED, True, False)

    spout = np.vstack([arr for arr, _ in segs])
    angles = np.concatenate([a for _, a in segs])
    release = grasp + len(spout) - 1

    rotations = [rot_y(np.radians(a)) for a in angles]
    co_hand = spout + np.array([r @ handle_off for r in rotations])
    co_quats = np.array([matrix_to_quaternion(r) for r in rotations])

    hand.append(co_hand)
    hand.append(_ease_seg(co_hand[-1], hand_rest, n_dep, "in"))
    hand.append(_hold(hand_rest, n_pad))

    n_tail = n_dep + n_pad
    spout_all = np.vstack([_hold(spout0, grasp), spout, _hold(spout[-1], n_tail)])
    quats_all = np.vstack([
        np.tile(IDENTITY_Q, (grasp, 1)), co_quats, np.tile(co_quats[-1], (n_tail, 1)),
    ])

    truth = FixtureTruth(
        kind="pouring",
        grasp_frame=grasp,
        release_frame=release,
        turning_frames=(tilt1_frame, tilt2_frame),
        config=WindowConfig(mi_zero_tol=0.7, min_prominence=0.6),
        d_th=0.30,
        extras={"rim_height": 0.10},
    )
    rng = np.random.default_rng(seed)
    demo = _assemble(
        rng, noise, np.vstack(hand), "jug", spout_all, quats_all, "glass", glass_pose,
        ObjectModel("jug", (("spout", (0.0, 0.0, 0.0)),)),
        ObjectModel("glass", tuple((n, np.array(o)) for n, o in GLASS_IPS)),
        manipulated="jug", background="glass",
    )
    return demo, truth


def generate_fixture(kind: str, seed: int = 0, noise: float | None = None, **kw):
    """Build a synthetic demonstration; returns (Demonstration, FixtureTruth)."""
    if kind == "pick_and_place":
        return _pick_and_place(seed, 0.001 if noise is None else noise)
    if kind == "zigzag_cleaning":
        return _zigzag_cleaning(seed, 0.002 if noise is None else noise, **kw)
    if kind == "pouring":
        return _pouring(seed, 0.001 if noise is None else noise, **kw)
    raise PlanloopError(f"unknown fixture kind {kind!r}; choose from {FIXTURE_KINDS}")


def fixture_scene(kind: str) -> Scene:
    """Default execution scene matching each fixture's world layout."""
    if kind == "pick_and_place":
        return Scene(
            poses={"plate": RigidTransform(translation=(0.35, 0.20, 0.05))},
            background="plate",
            surfaces={"plate": 0.05},
        )
    if kind == "zigzag_cleaning":
        return Scene(
            poses={"tray": RigidTransform(translation=(0.0, 0.0, 0.04))},
            background="tray",
            boxes={"tray": Box((-0.15, -0.10, 0.0), (0.15, 0.10, 0.04), touchable=True)},
            surfaces={"tray": 0.04},
        )
    if kind == "pouring":
        g = np.array([0.45, 0.25, 0.0])
        return Scene(
            poses={"glass": RigidTransform(translation=g)},
            background="glass",
            boxes={"glass": Box(g + (-0.045, -0.045, 0.0), g + (0.045, 0.045, 0.10))},
        )
    raise PlanloopError(f"unknown fixture kind {kind!r}")
