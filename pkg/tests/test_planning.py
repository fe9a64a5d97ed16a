"""Planner tests: tree metric/serialization, projection algebra, and both
planners' determinism, validity, and edge-replay contracts."""

import numpy as np
import pytest

from fingergait.geometry import STANDARD_SHAPES
from fingergait.hand import (State, constraint_matrix, default_hand,
                             detect_contacts, fingertips)
from fingergait.planning import (ExplorationTree, GRRTConfig, MRRTConfig,
                                 embed, grow_grrt, grow_mrrt, grrt_extend,
                                 metric_weights, nullspace_projector,
                                 project_extension, resnap_contacts,
                                 sample_configurations)
from fingergait.sim import (BatchSimulator, SimConfig, SimState,
                            canonical_grasp_state, rollout_stability_check)
from fingergait.stability import StabilityConfig, is_stable

MODEL = default_hand()
CONFIG = SimConfig()
WEIGHTS = metric_weights(MODEL.dof)

_CACHE = {}


def root_grasp(name="disc") -> SimState:
    if name not in _CACHE:
        _CACHE[name] = canonical_grasp_state(MODEL, STANDARD_SHAPES[name](),
                                             CONFIG)
    return _CACHE[name].copy()


def disc_mrrt():
    if "mrrt" not in _CACHE:
        shape = STANDARD_SHAPES["disc"]()
        stab = StabilityConfig(torque_scale=shape.bounding_radius())
        _CACHE["mrrt"] = grow_mrrt(MODEL, shape, root_grasp().planner_state(),
                                   CONFIG, stab,
                                   MRRTConfig(seed=5, iterations=150,
                                              max_nodes=150))
    return _CACHE["mrrt"]


def disc_grrt():
    if "grrt" not in _CACHE:
        _CACHE["grrt"] = grow_grrt(
            MODEL, STANDARD_SHAPES["disc"](), root_grasp(), CONFIG,
            GRRTConfig(seed=5, max_nodes=120, max_iterations=15,
                       batch_width=8, actions_per_extend=4))
    return _CACHE["grrt"]


# ---------------------------------------------------------------------------
# tree
# ---------------------------------------------------------------------------

def _random_tree(rng, n):
    tree = ExplorationTree(MODEL.dof)
    for i in range(n):
        q = rng.uniform(-1.5, 1.5, MODEL.dof)
        pose = rng.uniform(-0.5, 0.5, 3)
        tree.add(q, pose, parent=-1 if i == 0 else int(rng.integers(i)))
    return tree


def _bruteforce_nearest(tree, raw):
    d = np.linalg.norm(tree.coords - raw * WEIGHTS, axis=1)
    return int(d.argmin())


def test_nearest_matches_bruteforce_linear_path():
    rng = np.random.default_rng(0)
    tree = _random_tree(rng, 500)
    queries = rng.uniform(-2.0, 2.0, (50, MODEL.dof + 3))
    got = tree.nearest_batch(queries)
    for j in range(len(queries)):
        assert got[j] == _bruteforce_nearest(tree, queries[j])


def test_nearest_matches_bruteforce_kdtree_path():
    rng = np.random.default_rng(1)
    tree = _random_tree(rng, 10_500)
    # first query builds the KD-tree over the settled prefix
    tree.nearest_batch(rng.uniform(-1, 1, (1, MODEL.dof + 3)))
    # grow a tail past the rebuild threshold boundary
    for i in range(400):
        tree.add(rng.uniform(-1.5, 1.5, MODEL.dof),
                 rng.uniform(-0.5, 0.5, 3), parent=0)
    queries = rng.uniform(-2.0, 2.0, (40, MODEL.dof + 3))
    got = tree.nearest_batch(queries)
    for j in range(len(queries)):
        assert got[j] == _bruteforce_nearest(tree, queries[j])


def test_nearest_tie_resolves_to_lowest_id():
    tree = ExplorationTree(MODEL.dof)
    q = np.zeros(MODEL.dof)
    tree.add(q, np.zeros(3), parent=-1)
    tree.add(q + 1.0, np.zeros(3), parent=0)
    tree.add(q, np.zeros(3), parent=1)         # duplicate of node 0
    assert tree.nearest(q, np.zeros(3)) == 0


def test_add_rejects_bad_parent():
    tree = ExplorationTree(MODEL.dof)
    tree.add(np.zeros(MODEL.dof), np.zeros(3), parent=-1)
    with pytest.raises(ValueError):
        tree.add(np.zeros(MODEL.dof), np.zeros(3), parent=7)


def test_path_to_root():
    rng = np.random.default_rng(2)
    tree = ExplorationTree(MODEL.dof)
    tree.add(np.zeros(MODEL.dof), np.zeros(3), parent=-1)
    for i in range(1, 6):
        tree.add(rng.uniform(size=MODEL.dof), rng.uniform(size=3),
                 parent=i - 1)
    assert tree.path_to_root(5) == [5, 4, 3, 2, 1, 0]
    assert tree.path_to_root(0) == [0]


def test_tree_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    tree = ExplorationTree(MODEL.dof)
    q0, pose0 = rng.uniform(size=MODEL.dof), rng.uniform(size=3)
    tree.add(q0, pose0, parent=-1,
             state=SimState(q=q0, setpoints=rng.uniform(size=MODEL.dof),
                            pose=pose0, velocity=rng.uniform(size=3)))
    for i in range(1, 30):
        q, pose = rng.uniform(size=MODEL.dof), rng.uniform(size=3)
        state = None
        action = None
        if i % 2 == 0:
            state = SimState(q=q, setpoints=rng.uniform(size=MODEL.dof),
                             pose=pose, velocity=rng.uniform(size=3))
        if i % 3 == 0:
            action = rng.uniform(size=MODEL.dof)
        tree.add(q, pose, parent=int(rng.integers(i)), state=state,
                 action=action)
    path = tmp_path / "tree.txt"
    tree.save(str(path))
    loaded = ExplorationTree.load(str(path))
    assert len(loaded) == len(tree)
    assert np.array_equal(loaded.coords, tree.coords)
    for a, b in zip(tree.nodes, loaded.nodes):
        assert a.node_id == b.node_id and a.parent == b.parent
        assert np.array_equal(a.q, b.q) and np.array_equal(a.pose, b.pose)
        assert (a.state is None) == (b.state is None)
        if a.state is not None:
            assert np.array_equal(a.state.setpoints, b.state.setpoints)
            assert np.array_equal(a.state.velocity, b.state.velocity)
            assert np.array_equal(a.state.q, b.state.q)
        assert (a.action is None) == (b.action is None)
        if a.action is not None:
            assert np.array_equal(a.action, b.action)


def test_sampling_windows():
    rng = np.random.default_rng(4)
    root_pose = np.array([0.01, -0.02, 0.3])
    pts = sample_configurations(rng, MODEL, root_pose, 4000, 1.5,
                                position_window=0.03,
                                rotation_base=2.0 * np.pi)
    q, xy, th = pts[:, :MODEL.dof], pts[:, MODEL.dof:MODEL.dof + 2], pts[:, -1]
    assert (q >= MODEL.joint_lower - 1e-12).all()
    assert (q <= MODEL.joint_upper + 1e-12).all()
    assert (np.abs(xy - root_pose[:2]) <= 0.03 + 1e-12).all()
    half = 2.0 * np.pi * 1.5
    assert (np.abs(th - root_pose[2]) <= half + 1e-12).all()
    # the window is actually used: samples reach beyond one turn
    assert np.abs(th - root_pose[2]).max() > 2.0 * np.pi


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------

def test_projector_annihilates_constraint_and_is_orthogonal():
    state = root_grasp("square").planner_state()
    shape = STANDARD_SHAPES["square"]()
    contacts = detect_contacts(MODEL, shape, state, CONFIG.contact_tol)
    assert len(contacts) >= 3
    n = constraint_matrix(MODEL, state, contacts)
    p = nullspace_projector(MODEL, state, contacts)
    assert np.abs(n @ p).max() < 1e-10
    assert np.abs(p @ p - p).max() < 1e-10
    assert np.abs(p - p.T).max() < 1e-10


def test_projector_keeps_rigid_comotion():
    state = root_grasp("disc").planner_state()
    shape = STANDARD_SHAPES["disc"]()
    contacts = detect_contacts(MODEL, shape, state, CONFIG.contact_tol)
    n = constraint_matrix(MODEL, state, contacts)
    j, g = n[:, :MODEL.dof], -n[:, MODEL.dof:]
    twist = np.array([0.004, -0.003, 0.25])
    dq, *_ = np.linalg.lstsq(j, g @ twist, rcond=None)
    vec = np.concatenate([dq, twist])
    assert np.abs(n @ vec).max() < 1e-9     # genuinely a co-motion
    p = nullspace_projector(MODEL, state, contacts)
    assert np.abs(p @ vec - vec).max() < 1e-8


def test_resnap_restores_contact_after_perturbation():
    state = root_grasp("disc").planner_state()
    shape = STANDARD_SHAPES["disc"]()
    q = state.q.copy()
    q[1::2] += 0.02                       # bend each distal joint outward
    q2, ok = resnap_contacts(MODEL, shape, q, state.pose, [0, 1, 2])
    assert ok
    from fingergait.geometry import surface_query
    tips = fingertips(MODEL, q2)
    sd, _, _ = surface_query(shape, state.pose, tips)
    assert np.abs(sd - MODEL.fingertip_radius).max() < 1e-5


def test_resnap_rejects_large_gaps():
    state = root_grasp("disc").planner_state()
    shape = STANDARD_SHAPES["disc"]()
    far_pose = state.pose + np.array([0.012, 0.0, 0.0])
    _, ok = resnap_contacts(MODEL, shape, state.q, far_pose, [0, 1, 2])
    assert not ok


def test_project_extension_moves_and_stays_valid():
    state = root_grasp("disc").planner_state()
    shape = STANDARD_SHAPES["disc"]()
    stab = StabilityConfig(torque_scale=shape.bounding_radius())
    rng = np.random.default_rng(8)
    alpha = 0.05
    accepted = 0
    for _ in range(20):
        target = sample_configurations(rng, MODEL, state.pose, 1, 1.0)[0]
        new = project_extension(MODEL, shape, state, target, alpha, stab,
                                CONFIG.contact_tol)
        if new is None:
            continue
        accepted += 1
        step = np.linalg.norm((embed(new.q, new.pose)
                               - embed(state.q, state.pose)) * WEIGHTS)
        assert 0.2 * alpha < step < 4.0 * alpha
        after = detect_contacts(MODEL, shape, new, CONFIG.contact_tol)
        assert len(after) >= 3
        assert is_stable(after, new.pose, stab)
    assert accepted >= 10


def test_project_extension_requires_grasp():
    shape = STANDARD_SHAPES["disc"]()
    stab = StabilityConfig(torque_scale=shape.bounding_radius())
    retracted = State(np.tile([1.3, 2.0], MODEL.num_fingers), np.zeros(3))
    target = np.zeros(MODEL.dof + 3)
    assert project_extension(MODEL, shape, retracted, target, 0.05, stab,
                             CONFIG.contact_tol) is None


# ---------------------------------------------------------------------------
# kinematic planner
# ---------------------------------------------------------------------------

def test_mrrt_grows_valid_stable_tree():
    res = disc_mrrt()
    tree = res.tree
    assert len(tree) >= 30
    shape = STANDARD_SHAPES["disc"]()
    stab = StabilityConfig(torque_scale=shape.bounding_radius())
    rng = np.random.default_rng(9)
    for idx in rng.choice(len(tree), size=10, replace=False):
        node = tree.nodes[int(idx)]
        contacts = detect_contacts(MODEL, shape, State(node.q, node.pose),
                                   CONFIG.contact_tol)
        assert len(contacts) >= 3
        assert is_stable(contacts, node.pose, stab)


def test_mrrt_edges_are_short():
    tree = disc_mrrt().tree
    for node in tree.nodes[1:]:
        parent = tree.nodes[node.parent]
        step = np.linalg.norm((embed(node.q, node.pose)
                               - embed(parent.q, parent.pose)) * WEIGHTS)
        assert step < 4.0 * 0.05


def test_mrrt_coverage_checkpoints_monotone():
    res = disc_mrrt()
    its = [c[0] for c in res.coverage]
    nodes = [c[1] for c in res.coverage]
    spread = [c[2] for c in res.coverage]
    assert its == sorted(its)
    assert nodes == sorted(nodes)
    assert spread == sorted(spread)       # max over a growing tree
    assert res.max_rotation() == pytest.approx(spread[-1])


def test_mrrt_deterministic_same_seed():
    shape = STANDARD_SHAPES["disc"]()
    stab = StabilityConfig(torque_scale=shape.bounding_radius())
    cfg = MRRTConfig(seed=5, iterations=60, max_nodes=60)
    a = grow_mrrt(MODEL, shape, root_grasp().planner_state(), CONFIG, stab, cfg)
    b = grow_mrrt(MODEL, shape, root_grasp().planner_state(), CONFIG, stab, cfg)
    assert len(a.tree) == len(b.tree)
    assert np.array_equal(a.tree.coords, b.tree.coords)


# ---------------------------------------------------------------------------
# dynamic planner
# ---------------------------------------------------------------------------

def test_grrt_grows_holdable_tree():
    res = disc_grrt()
    tree = res.tree
    assert len(tree) >= 50
    shape = STANDARD_SHAPES["disc"]()
    rng = np.random.default_rng(10)
    picks = rng.choice(len(tree), size=8, replace=False)
    states = [tree.nodes[int(i)].state for i in picks]
    assert all(s is not None for s in states)
    ok = rollout_stability_check(MODEL, shape, CONFIG, states)
    assert ok.all()


def test_grrt_edge_replay_reproduces_child_exactly():
    tree = disc_grrt().tree
    shape = STANDARD_SHAPES["disc"]()
    rng = np.random.default_rng(11)
    children = [n for n in tree.nodes[1:] if n.action is not None]
    for node in rng.choice(children, size=6, replace=False):
        parent = tree.nodes[node.parent]
        sim = BatchSimulator(MODEL, shape, CONFIG)
        sim.load(parent.state.copy())
        sim.run(CONFIG.control_interval, node.action[None, :])
        got = sim.state(0)
        assert np.array_equal(got.q, node.state.q)
        assert np.array_equal(got.pose, node.state.pose)
        assert np.array_equal(got.velocity, node.state.velocity)
        assert np.array_equal(got.setpoints, node.state.setpoints)


def test_grrt_deterministic_and_prefix_stable():
    shape = STANDARD_SHAPES["disc"]()
    short = grow_grrt(MODEL, shape, root_grasp(), CONFIG,
                      GRRTConfig(seed=5, max_nodes=10_000, max_iterations=4,
                                 batch_width=8, actions_per_extend=4))
    long = grow_grrt(MODEL, shape, root_grasp(), CONFIG,
                     GRRTConfig(seed=5, max_nodes=10_000, max_iterations=8,
                                batch_width=8, actions_per_extend=4))
    n = len(short.tree)
    assert n > 1
    assert len(long.tree) >= n
    assert np.array_equal(long.tree.coords[:n], short.tree.coords)
    parents_short = [node.parent for node in short.tree.nodes]
    parents_long = [node.parent for node in long.tree.nodes[:n]]
    assert parents_short == parents_long


def test_grrt_different_seeds_differ():
    shape = STANDARD_SHAPES["disc"]()
    a = grow_grrt(MODEL, shape, root_grasp(), CONFIG,
                  GRRTConfig(seed=1, max_nodes=60, max_iterations=4,
                             batch_width=8, actions_per_extend=4))
    b = grow_grrt(MODEL, shape, root_grasp(), CONFIG,
                  GRRTConfig(seed=2, max_nodes=60, max_iterations=4,
                             batch_width=8, actions_per_extend=4))
    na, nb = len(a.tree), len(b.tree)
    if na == nb:
        assert not np.array_equal(a.tree.coords, b.tree.coords)


def test_grrt_extend_adds_at_most_batch_width():
    tree = ExplorationTree(MODEL.dof)
    root = root_grasp()
    tree.add(root.q, root.pose, parent=-1, state=root)
    rng = np.random.default_rng(12)
    samples = sample_configurations(rng, MODEL, root.pose, 4, 1.0)
    deltas = rng.uniform(-0.15, 0.15, (4, 3, MODEL.dof))
    added = grrt_extend(MODEL, STANDARD_SHAPES["disc"](), CONFIG, tree,
                        samples, deltas)
    assert 0 <= added <= 4
    assert len(tree) == 1 + added
