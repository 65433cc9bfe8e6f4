import itertools

import numpy as np
import pytest

from planloop.btree import (
    BehaviorTree,
    ExecTrajectory,
    Grasp,
    Sequence,
    Status,
    TargetEntry,
    TickState,
    exec_nodes,
    from_xml,
    iter_nodes,
    tick,
    to_xml,
    tree_equal,
)
from planloop.errors import ParseError, TreeError, VariantError
from planloop.labels import SemanticTargetPose
from planloop.transforms import RigidTransform, rot_z

S, F, R = Status.SUCCESS, Status.FAILURE, Status.RUNNING


def leaf(i=0):
    return Grasp(action="close")


def exe_entry(i, x=0.0, duration=2.0):
    from planloop.transforms import matrix_to_quaternion

    payload = RigidTransform.from_quaternion(matrix_to_quaternion(rot_z(0.1 * i)), (x, 0.1 * i, 0.0))
    return TargetEntry(index=i, payload=payload, duration=duration)


def sample_exe_tree():
    return BehaviorTree(
        root=Sequence(children=(
            Grasp(action="close"),
            ExecTrajectory(targets=(exe_entry(0), exe_entry(1, 0.5), exe_entry(2, 1.0, 1.5))),
            Grasp(action="open"),
        )),
        variant="executable",
    )


def sample_sem_tree():
    entries = tuple(
        TargetEntry(index=i, payload=SemanticTargetPose("plate center", v, a, d))
        for i, (v, a, d) in enumerate([
            ("above", "turning", 0), ("touching", "turning", 90), ("below", "tilting", -45),
        ])
    )
    return BehaviorTree(
        root=Sequence(children=(
            Grasp(action="close"),
            ExecTrajectory(targets=entries, stiffness="low"),
            Grasp(action="open"),
        )),
        variant="semantic",
    )


# ---------------------------------------------------------------------------
# structural invariants


def test_variant_payload_mismatch_rejected():
    entry = TargetEntry(index=0, payload=SemanticTargetPose("a", "above", "turning", 0))
    with pytest.raises(VariantError):
        BehaviorTree(root=ExecTrajectory(targets=(entry,)), variant="executable")


def test_exec_needs_targets_and_consecutive_indices():
    with pytest.raises(TreeError):
        ExecTrajectory(targets=())
    with pytest.raises(TreeError):
        ExecTrajectory(targets=(exe_entry(0), exe_entry(2)))
    with pytest.raises(TreeError):
        TargetEntry(index=0, payload=RigidTransform.identity(), duration=0.0)


def test_sequence_needs_children():
    with pytest.raises(TreeError):
        Sequence(children=())


# ---------------------------------------------------------------------------
# tick semantics


def scripted_executor(scripts, tick_counter, invocations):
    def executor(node, path):
        invocations.append(path)
        return scripts[path][tick_counter[0]]

    return executor


def test_all_success():
    tree = sample_exe_tree()
    paths = [p for p, n in iter_nodes(tree) if not isinstance(n, Sequence)]
    scripts = {p: [S] for p in paths}
    counter, calls = [0], []
    assert tick(tree, scripted_executor(scripts, counter, calls)) is S
    assert calls == paths


def test_failure_short_circuits():
    tree = sample_exe_tree()
    paths = [p for p, n in iter_nodes(tree) if not isinstance(n, Sequence)]
    scripts = {paths[0]: [S], paths[1]: [F], paths[2]: [S]}
    counter, calls = [0], []
    assert tick(tree, scripted_executor(scripts, counter, calls)) is F
    assert calls == paths[:2]  # third leaf never invoked


def test_running_resumes_without_reexecuting():
    tree = sample_exe_tree()
    paths = [p for p, n in iter_nodes(tree) if not isinstance(n, Sequence)]
    scripts = {paths[0]: [S, S], paths[1]: [R, S], paths[2]: [S, S]}
    counter, calls = [0], []
    state = TickState()
    executor = scripted_executor(scripts, counter, calls)
    assert tick(tree, executor, state) is R
    counter[0] = 1
    assert tick(tree, executor, state) is S
    assert calls.count(paths[0]) == 1  # first leaf executed once overall
    assert calls.count(paths[1]) == 2


def test_semantic_tree_cannot_tick():
    with pytest.raises(VariantError):
        tick(sample_sem_tree(), lambda n, p: S)


# exhaustive oracle ---------------------------------------------------------


def tree_shapes(n_leaves):
    """All nestings of n leaves into sequences with >= 2 children (plus a bare leaf)."""
    if n_leaves == 1:
        yield "leaf"
        return
    for parts in compositions(n_leaves):
        if len(parts) < 2:
            continue
        for combo in itertools.product(*(list(tree_shapes(p)) for p in parts)):
            yield tuple(combo)


def compositions(n):
    if n == 0:
        yield ()
        return
    for first in range(1, n + 1):
        for rest in compositions(n - first):
            yield (first, *rest)


def build_shape(shape):
    if shape == "leaf":
        return Grasp(action="close")
    return Sequence(children=tuple(build_shape(s) for s in shape))


class OracleNode:
    """Independent reference for memory-sequence semantics (id-keyed cursors)."""

    def __init__(self, shape, scripts, leaf_ids=None):
        self.leaf = shape == "leaf"
        if leaf_ids is None:
            leaf_ids = itertools.count()
        if self.leaf:
            self.id = next(leaf_ids)
            self.script = scripts[self.id]
        else:
            self.children = [OracleNode(s, scripts, leaf_ids) for s in shape]
        self.cursor = 0

    def run(self, tick_index, calls):
        if self.leaf:
            calls.append(self.id)
            return self.script[tick_index]
        i = self.cursor
        while i < len(self.children):
            status = self.children[i].run(tick_index, calls)
            if status is R:
                self.cursor = i
                return R
            if status is F:
                self.reset()
                return F
            i += 1
        self.reset()
        return S

    def reset(self):
        self.cursor = 0
        if not self.leaf:
            for child in self.children:
                child.reset()


@pytest.mark.parametrize("n_leaves", [1, 2, 3, 4])
def test_tick_matches_oracle_exhaustively(n_leaves):
    statuses = [S, F, R]
    n_ticks = 2
    script_space = list(itertools.product(statuses, repeat=n_ticks))
    for shape in tree_shapes(n_leaves):
        tree = BehaviorTree(root=build_shape(shape), variant="executable")
        leaf_paths = [p for p, n in iter_nodes(tree) if isinstance(n, Grasp)]
        # cap the cartesian product for the 4-leaf shapes: first tick exhaustive,
        # second tick tied to the first with one flip, still covering resume paths
        if n_leaves <= 3:
            combos = itertools.product(script_space, repeat=n_leaves)
        else:
            combos = (
                tuple((a, b) for a, b in zip(first, second))
                for first in itertools.product(statuses, repeat=n_leaves)
                for second in itertools.product(statuses, repeat=n_leaves)
                if sum(x is not y for x, y in zip(first, second)) <= 1
            )
        for combo in combos:
            scripts = {path: list(script) for path, script in zip(leaf_paths, combo)}
            oracle = OracleNode(shape, {i: list(script) for i, script in enumerate(combo)})
            state = TickState()
            counter = [0]
            for tick_index in range(n_ticks):
                counter[0] = tick_index
                calls: list = []
                executor = scripted_executor(scripts, counter, calls)
                got = tick(tree, executor, state)
                oracle_calls: list = []
                expected = oracle.run(tick_index, oracle_calls)
                assert got is expected, (shape, combo, tick_index)
                got_ids = [leaf_paths.index(p) for p in calls]
                assert got_ids == oracle_calls, (shape, combo, tick_index)


# ---------------------------------------------------------------------------
# XML


def test_xml_roundtrip_executable():
    tree = sample_exe_tree()
    assert tree_equal(from_xml(to_xml(tree)), tree)


def test_matrix_born_tree_serialization_is_a_fixed_point():
    # payloads built straight from rotation matrices normalize onto the
    # quaternion wire in one hop; after that, serialization is the identity
    entries = tuple(
        TargetEntry(index=i, payload=RigidTransform(rot_z(0.2 + 0.1 * i), (0.1 * i, 0, 0)))
        for i in range(3)
    )
    tree = BehaviorTree(root=Sequence(children=(ExecTrajectory(targets=entries),)),
                        variant="executable")
    hop = from_xml(to_xml(tree))
    for (_, a), (_, b) in zip(exec_nodes(tree), exec_nodes(hop)):
        for ea, eb in zip(a.targets, b.targets):
            assert np.array_equal(ea.payload.translation, eb.payload.translation)
            assert np.allclose(ea.payload.rotation, eb.payload.rotation, atol=1e-14, rtol=0)
    assert tree_equal(from_xml(to_xml(hop)), hop)


def test_xml_roundtrip_semantic():
    tree = sample_sem_tree()
    assert tree_equal(from_xml(to_xml(tree)), tree)


def test_fig_style_three_entry_semantic_fixture_parses():
    xml = """
    <BehaviorTree variant="semantic">
      <Sequence>
        <Grasp action="close"/>
        <ExecTrajectory stiffness="medium">
          <TargetPose i="0" duration="2.0" desc="left rim, above, turning 0"/>
          <TargetPose i="1" duration="2.0" desc="right rim, below, tilting -45"/>
          <TargetPose i="2" duration="2.0" desc="right rim, above, tilting -90"/>
        </ExecTrajectory>
        <Grasp action="open"/>
      </Sequence>
    </BehaviorTree>
    """
    tree = from_xml(xml)
    seq = tree.root
    assert isinstance(seq, Sequence) and len(seq.children) == 3
    node = seq.children[1]
    assert isinstance(node, ExecTrajectory) and len(node.targets) == 3
    assert node.targets[1].payload.desc == "right rim, below, tilting -45"


def test_exec_without_targets_is_parse_error():
    xml = """
    <BehaviorTree variant="executable">
      <Sequence><ExecTrajectory stiffness="medium"></ExecTrajectory></Sequence>
    </BehaviorTree>
    """
    with pytest.raises(ParseError):
        from_xml(xml)


def test_unknown_tag_rejected():
    xml = '<BehaviorTree variant="executable"><Fallback/></BehaviorTree>'
    with pytest.raises(ParseError, match="Fallback"):
        from_xml(xml)


def test_mixed_payloads_rejected():
    xml = """
    <BehaviorTree variant="semantic">
      <Sequence>
        <ExecTrajectory stiffness="medium">
          <TargetPose i="0" desc="a, above, turning 0" p="0 0 0"/>
        </ExecTrajectory>
      </Sequence>
    </BehaviorTree>
    """
    with pytest.raises(VariantError):
        from_xml(xml)


def test_numeric_payload_roundtrip_is_bit_exact():
    rng = np.random.default_rng(0)
    from scipy.spatial.transform import Rotation

    entries = tuple(
        TargetEntry(index=i,
                    payload=RigidTransform.from_quaternion(
                        Rotation.random(random_state=rng).as_quat(scalar_first=True),
                        rng.uniform(-1, 1, 3)),
                    duration=float(rng.uniform(0.5, 3)))
        for i in range(4)
    )
    tree = BehaviorTree(root=Sequence(children=(ExecTrajectory(targets=entries),)),
                        variant="executable")
    hop = from_xml(to_xml(tree))
    for (_, a), (_, b) in zip(exec_nodes(tree), exec_nodes(hop)):
        for ea, eb in zip(a.targets, b.targets):
            assert np.array_equal(ea.payload.translation, eb.payload.translation)
            assert ea.duration == eb.duration
            assert np.array_equal(ea.payload.quaternion(), eb.payload.quaternion())
