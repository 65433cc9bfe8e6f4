import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial.transform import Rotation

from planloop.btree import BehaviorTree, ExecTrajectory, Sequence, TargetEntry, exec_nodes, tree_equal
from planloop.demo import ObjectModel
from planloop.errors import DecodeError
from planloop.fixtures import GLASS_IPS, TRAY_IPS
from planloop.labels import PREDEFINED_ANGLES, SemanticTargetPose, parse_desc, snap_angle
from planloop.semcodec import (
    CodecConfig,
    classify_vertical,
    decode_plan,
    dominant_rotation,
    encode_plan,
    nearest_interaction_point,
)
from planloop.transforms import RigidTransform, rot_x, rot_y, rot_z

TRAY = ObjectModel("tray", tuple((n, np.array(o)) for n, o in TRAY_IPS))
GLASS = ObjectModel("glass", tuple((n, np.array(o)) for n, o in GLASS_IPS))


# -- nearest interaction point ----------------------------------------------


def test_nearest_point_basics():
    model = ObjectModel("m", (("center", (0, 0, 0)), ("right rim", (1, 0, 0))))
    assert nearest_interaction_point(np.array([0.2, 0, 0]), model) == "center"
    # exact tie: first declared wins
    assert nearest_interaction_point(np.array([0.5, 0, 0]), model) == "center"


def test_nearest_point_matches_bruteforce_oracle():
    rng = np.random.default_rng(0)
    offs = TRAY.offsets_array
    labels = TRAY.labels
    for _ in range(100):
        q = rng.uniform(-0.3, 0.3, 3)
        expected = labels[int(np.argmin(((offs - q) ** 2).sum(axis=1)))]
        assert nearest_interaction_point(q, TRAY) == expected


# -- vertical classification -------------------------------------------------


def test_classify_vertical_paper_rule():
    cfg = CodecConfig()
    assert classify_vertical(0.05, cfg) == "above"
    assert classify_vertical(0.01, cfg) == "touching"   # boundary inclusive
    assert classify_vertical(-0.01, cfg) == "touching"
    assert classify_vertical(-0.02, cfg) == "below"


@given(st.floats(min_value=-1.0, max_value=1.0, allow_nan=False))
def test_classify_vertical_total_partition(dz):
    cfg = CodecConfig()
    label = classify_vertical(dz, cfg)
    assert label in ("above", "touching", "below")
    if label == "above":
        assert dz > cfg.z_th
    elif label == "below":
        assert dz < -cfg.z_th
    else:
        assert -cfg.z_th <= dz <= cfg.z_th


def test_codec_config_invariants():
    with pytest.raises(ValueError):
        CodecConfig(z_th=0.0)
    with pytest.raises(ValueError):
        CodecConfig(z_above=0.005)
    with pytest.raises(ValueError):
        CodecConfig(eps_z=0.05)


# -- angle snapping -----------------------------------------------------------


def test_snap_examples():
    assert snap_angle(-50.0) == -45
    assert snap_angle(95.0) == 90
    assert snap_angle(-60.0) == -45
    assert snap_angle(22.5) == 0      # tie toward smaller |angle|
    assert snap_angle(157.5) == 135
    assert snap_angle(-170.0) == 180  # circular distance across the wrap
    assert snap_angle(-180.0) == 180


@given(st.integers(min_value=-720, max_value=720))
def test_snap_idempotent(angle):
    snapped = snap_angle(float(angle))
    assert snapped in PREDEFINED_ANGLES
    assert snap_angle(float(snapped)) == snapped


# -- dominant rotation ---------------------------------------------------------


def test_dominant_rotation_identity_is_turning_zero():
    t = RigidTransform(rot_y(0.3), (0, 0, 0))
    assert dominant_rotation(t, t) == ("turning", 0)


def test_dominant_rotation_examples():
    base = RigidTransform.identity()
    assert dominant_rotation(base, RigidTransform(rot_y(np.radians(-50)))) == ("tilting", -45)
    assert dominant_rotation(base, RigidTransform(rot_z(np.radians(95)))) == ("turning", 90)
    assert dominant_rotation(base, RigidTransform(rot_x(np.radians(40)))) == ("side bending", 45)


def test_dominant_rotation_relative_to_previous():
    prev = RigidTransform(rot_y(np.radians(-45)))
    cur = RigidTransform(rot_y(np.radians(-135)))
    assert dominant_rotation(prev, cur) == ("tilting", -90)


def test_dominant_rotation_matches_scipy_oracle_on_axis_rotations():
    rng = np.random.default_rng(1)
    builders = {"side bending": rot_x, "tilting": rot_y, "turning": rot_z}
    axes = {"side bending": "x", "tilting": "y", "turning": "z"}
    for _ in range(200):
        axis = ("side bending", "tilting", "turning")[rng.integers(3)]
        deg = float(rng.uniform(-170, 170))
        if abs(deg) <= 23:  # would snap to 0 and canonicalize to "turning"
            continue
        got_axis, got_angle = dominant_rotation(
            RigidTransform.identity(), RigidTransform(builders[axis](np.radians(deg)))
        )
        oracle = Rotation.from_matrix(builders[axis](np.radians(deg))).as_rotvec(degrees=True)
        oracle_deg = oracle["xyz".index(axes[axis])]
        assert got_axis == axis
        assert got_angle == snap_angle(oracle_deg)


# -- triplet grammar -----------------------------------------------------------


def test_desc_roundtrip_and_case():
    sem = SemanticTargetPose("Plate Center", "Touching", "Turning", 90)
    assert sem.desc == "plate center, touching, turning 90"
    assert parse_desc("PLATE CENTER, TOUCHING, TURNING 90") == sem
    assert parse_desc("plate center, touching, turning 90\N{DEGREE SIGN}") == sem


def test_zero_rotation_canonicalized():
    sem = SemanticTargetPose("a", "above", "tilting", 0)
    assert sem.axis == "turning"
    assert sem.desc == "a, above, turning 0"


# -- encode/decode -------------------------------------------------------------


def single_entry_tree(payload, duration=2.0):
    return BehaviorTree(
        root=Sequence(children=(ExecTrajectory(
            targets=(TargetEntry(index=0, payload=payload, duration=duration),)),)),
        variant="semantic" if isinstance(payload, SemanticTargetPose) else "executable",
    )


def test_label_roundtrip_full_grid():
    """encode(decode(triplet)) == triplet over IPs x verticals x axes x angles."""
    cfg = CodecConfig()
    checked = 0
    for ip in TRAY.labels:
        for vertical in ("above", "touching", "below"):
            for axis in ("side bending", "tilting", "turning"):
                for angle in PREDEFINED_ANGLES:
                    triplet = SemanticTargetPose(ip, vertical, axis, angle)
                    exe, notes = decode_plan(single_entry_tree(triplet), TRAY, cfg)
                    assert notes == []
                    sem, _ = encode_plan(exe, TRAY, cfg)
                    got = exec_nodes(sem)[0][1].targets[0].payload
                    assert got == triplet, (triplet.desc, got.desc)
                    checked += 1
    assert checked == 9 * 3 * 3 * 8


def test_decode_positions_follow_labels():
    cfg = CodecConfig()
    triplet = SemanticTargetPose("right rim", "above", "turning", 0)
    exe, _ = decode_plan(single_entry_tree(triplet), GLASS, cfg)
    tp = exec_nodes(exe)[0][1].targets[0].payload
    rim = GLASS.offset("right rim")
    assert tp.translation[0] == rim[0] and tp.translation[1] == rim[1]
    assert tp.translation[2] == rim[2] + cfg.z_above


def test_decode_unknown_label_lists_valid_ones():
    triplet = SemanticTargetPose("handle", "above", "turning", 0)
    with pytest.raises(DecodeError, match="left rim"):
        decode_plan(single_entry_tree(triplet), GLASS, CodecConfig())


def test_decode_snaps_out_of_set_angles_with_note():
    triplet = SemanticTargetPose("right rim", "above", "tilting", -60)
    exe, notes = decode_plan(single_entry_tree(triplet), GLASS, CodecConfig())
    assert notes and "-60" in notes[0] and "-45" in notes[0]
    tp = exec_nodes(exe)[0][1].targets[0].payload
    assert np.allclose(tp.rotation, rot_y(np.radians(-45)))


def test_orientation_chains_through_previous_entry():
    cfg = CodecConfig()
    entries = (
        TargetEntry(index=0, payload=SemanticTargetPose("right rim", "above", "tilting", -45)),
        TargetEntry(index=1, payload=SemanticTargetPose("right rim", "above", "tilting", -90)),
    )
    sem = BehaviorTree(root=Sequence(children=(ExecTrajectory(targets=entries),)), variant="semantic")
    exe, _ = decode_plan(sem, GLASS, cfg)
    tps = [e.payload for e in exec_nodes(exe)[0][1].targets]
    assert np.allclose(tps[0].rotation, rot_y(np.radians(-45)))
    assert np.allclose(tps[1].rotation, rot_y(np.radians(-135)))


def test_sidecar_roundtrip_bit_exact_on_fixture_plans(pouring_extraction, cleaning_extraction, pick_extraction):
    cfg = CodecConfig()
    for demo, truth, ext in (pouring_extraction, cleaning_extraction, pick_extraction):
        model = demo.models[demo.background]
        sem, sidecar = encode_plan(ext.tree, model, cfg)
        back, notes = decode_plan(sem, model, cfg, sidecar)
        assert notes == []
        assert tree_equal(back, ext.tree)


def test_pouring_mislabel_pattern(pouring_extraction):
    demo, truth, ext = pouring_extraction
    sem, _ = encode_plan(ext.tree, demo.models["glass"], CodecConfig())
    descs = [e.payload.desc for _, n in exec_nodes(sem) for e in n.targets]
    assert descs[1] == "left rim, above, turning 0"
    assert descs[2] == "right rim, below, tilting -45"  # the vision error
    assert descs[3] == "right rim, above, tilting -90"


def test_changed_entry_is_synthesized_others_kept(pouring_extraction):
    demo, truth, ext = pouring_extraction
    cfg = CodecConfig()
    model = demo.models["glass"]
    sem, sidecar = encode_plan(ext.tree, model, cfg)
    from conftest import edit_entry

    fixed = edit_entry(sem, 2, vertical="above")
    exe, _ = decode_plan(fixed, model, cfg, sidecar)
    new_entries = exec_nodes(exe)[0][1].targets
    old_entries = exec_nodes(ext.tree)[0][1].targets
    assert new_entries[1].payload.equal_bits(old_entries[1].payload)  # untouched: original bits
    rim = model.offset("right rim")
    assert new_entries[2].payload.translation[2] == rim[2] + cfg.z_above
    assert new_entries[3].payload.equal_bits(old_entries[3].payload)
