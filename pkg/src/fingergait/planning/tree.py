"""Exploration tree shared by both planners.

Nodes live in the combined configuration space [joints, object x, object y,
object angle]. Distances are Euclidean after per-coordinate weighting, so a
single scaled KD-tree (with a linear tail for freshly added nodes) serves
the nearest queries once the tree grows past a few thousand nodes.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from ..errors import SamplerError
from ..hand import HandModel
from ..sim import SimState

# distance weights: 1 per joint radian, 5 per meter of object translation,
# 2 per radian of object rotation
POSITION_WEIGHT = 5.0
ROTATION_WEIGHT = 2.0

# linear scan is faster than KD-tree maintenance below this size
KDTREE_THRESHOLD = 10_000
KDTREE_TAIL = 2_000


def metric_weights(dof: int) -> np.ndarray:
    return np.concatenate([np.ones(dof),
                           [POSITION_WEIGHT, POSITION_WEIGHT, ROTATION_WEIGHT]])


def embed(q: np.ndarray, pose: np.ndarray) -> np.ndarray:
    """Raw (unweighted) configuration vector [q, x, y, theta]."""
    return np.concatenate([np.asarray(q, float), np.asarray(pose, float)])


@dataclass
class TreeNode:
    node_id: int
    parent: int                       # -1 for the root
    q: np.ndarray                     # (d,)
    pose: np.ndarray                  # (3,) theta unwrapped
    state: Optional[SimState] = None  # full dynamic state when available
    action: Optional[np.ndarray] = None   # setpoint target that led here


class ExplorationTree:
    """Append-only tree over weighted configuration space."""

    def __init__(self, dof: int):
        self.dof = dof
        self.weights = metric_weights(dof)
        self.nodes: List[TreeNode] = []
        self.meta: Dict[str, str] = {}       # provenance stamped by save/load
        self._coords = np.zeros((256, dof + 3))   # weighted, grown on demand
        self._kdtree: Optional[cKDTree] = None
        self._kdtree_size = 0

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def coords(self) -> np.ndarray:
        """Weighted coordinates of all nodes, (N, d+3)."""
        return self._coords[:len(self.nodes)]

    def rotations(self) -> np.ndarray:
        """Unwrapped object angle of every node."""
        return self._coords[:len(self.nodes), -1] / ROTATION_WEIGHT

    def add(self, q: np.ndarray, pose: np.ndarray, parent: int,
            state: Optional[SimState] = None,
            action: Optional[np.ndarray] = None) -> int:
        if parent >= len(self.nodes) or (parent < 0 and self.nodes):
            raise ValueError(f"invalid parent id {parent}")
        if state is not None and not (np.array_equal(state.q, q)
                                      and np.array_equal(state.pose, pose)):
            raise ValueError("node state must share the node's q and pose")
        node_id = len(self.nodes)
        node = TreeNode(node_id, parent, np.asarray(q, float).copy(),
                        np.asarray(pose, float).copy(),
                        None if state is None else state.copy(),
                        None if action is None else np.asarray(action, float).copy())
        self.nodes.append(node)
        if node_id >= self._coords.shape[0]:
            grown = np.zeros((2 * self._coords.shape[0], self.dof + 3))
            grown[:node_id] = self._coords[:node_id]
            self._coords = grown
        self._coords[node_id] = embed(node.q, node.pose) * self.weights
        return node_id

    def nearest(self, q: np.ndarray, pose: np.ndarray) -> int:
        return int(self.nearest_batch(embed(q, pose)[None, :])[0])

    def nearest_batch(self, raw_points: np.ndarray) -> np.ndarray:
        """Nearest node ids for raw configuration rows (m, d+3).

        Exact: ties resolve to the lowest node id. Below KDTREE_THRESHOLD
        nodes a vectorized linear scan wins; beyond it a periodically
        rebuilt KD-tree answers for the settled prefix and a linear scan
        covers the tail of nodes added since the last rebuild.
        """
        n = len(self.nodes)
        if n == 0:
            raise SamplerError("nearest query on an empty tree")
        pts = np.asarray(raw_points, float) * self.weights
        if n < KDTREE_THRESHOLD:
            d2 = ((self.coords[None, :, :] - pts[:, None, :]) ** 2).sum(axis=2)
            return d2.argmin(axis=1)

        if self._kdtree is None or n - self._kdtree_size > KDTREE_TAIL:
            self._kdtree = cKDTree(self._coords[:n].copy())
            self._kdtree_size = n
        dist, idx = self._kdtree.query(pts)
        if n > self._kdtree_size:
            tail = self._coords[self._kdtree_size:n]
            d2 = ((tail[None, :, :] - pts[:, None, :]) ** 2).sum(axis=2)
            tmin = d2.argmin(axis=1)
            tdist = np.sqrt(d2[np.arange(len(pts)), tmin])
            better = tdist < dist
            idx = np.where(better, self._kdtree_size + tmin, idx)
        return idx.astype(int)

    def path_to_root(self, node_id: int) -> List[int]:
        """Node ids from ``node_id`` up to and including the root."""
        path = []
        while node_id >= 0:
            path.append(node_id)
            node_id = self.nodes[node_id].parent
        return path

    def prefix(self, count: int) -> "ExplorationTree":
        """The tree as it was after its first ``count`` nodes were added.

        Valid because nodes are appended with already-present parents, so
        any id prefix is itself a consistent tree.
        """
        if not 1 <= count <= len(self.nodes):
            raise ValueError("prefix size out of range")
        sub = ExplorationTree(self.dof)
        for node in self.nodes[:count]:
            sub.add(node.q.copy(), node.pose.copy(), parent=node.parent,
                    state=None if node.state is None else node.state.copy(),
                    action=None if node.action is None else node.action.copy())
        return sub

    # -- serialization -----------------------------------------------------

    def save(self, path: str, meta: Optional[Dict[str, str]] = None) -> None:
        """Line-oriented text dump; '#' lines carry the header.

        ``meta`` entries (e.g. config hash, seed) are written as
        ``# meta <key> <value>`` lines and round-trip through :meth:`load`.
        """
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# fingergait exploration tree v1\n")
            fh.write(f"# dof {self.dof}\n")
            for key, value in (meta or {}).items():
                fh.write(f"# meta {key} {value}\n")
            fh.write("# fields: id parent q.. pose.. "
                     "[S setpoints.. velocity..|-] [A action..|-]\n")
            for node in self.nodes:
                parts = [str(node.node_id), str(node.parent)]
                parts += [format(v, ".17g") for v in node.q]
                parts += [format(v, ".17g") for v in node.pose]
                if node.state is not None:
                    parts.append("S")
                    parts += [format(v, ".17g") for v in node.state.setpoints]
                    parts += [format(v, ".17g") for v in node.state.velocity]
                else:
                    parts.append("-")
                if node.action is not None:
                    parts.append("A")
                    parts += [format(v, ".17g") for v in node.action]
                else:
                    parts.append("-")
                fh.write(" ".join(parts) + "\n")

    @classmethod
    def load(cls, path: str) -> "ExplorationTree":
        dof = None
        meta: Dict[str, str] = {}
        rows = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    tokens = line[1:].split()
                    if tokens[:1] == ["dof"]:
                        dof = int(tokens[1])
                    elif tokens[:1] == ["meta"] and len(tokens) >= 3:
                        meta[tokens[1]] = " ".join(tokens[2:])
                    continue
                rows.append(line.split())
        if dof is None:
            raise ValueError(f"{path}: missing '# dof' header")
        tree = cls(dof)
        tree.meta = meta
        for parts in rows:
            node_id, parent = int(parts[0]), int(parts[1])
            if node_id != len(tree.nodes):
                raise ValueError(f"{path}: node ids must be dense, got {node_id}")
            at = 2
            q = np.array([float(x) for x in parts[at:at + dof]]); at += dof
            pose = np.array([float(x) for x in parts[at:at + 3]]); at += 3
            state = None
            if parts[at] == "S":
                at += 1
                sp = np.array([float(x) for x in parts[at:at + dof]]); at += dof
                vel = np.array([float(x) for x in parts[at:at + 3]]); at += 3
                state = SimState(q=q.copy(), setpoints=sp, pose=pose.copy(),
                                 velocity=vel)
            else:
                at += 1
            action = None
            if parts[at] == "A":
                at += 1
                action = np.array([float(x) for x in parts[at:at + dof]])
            tree.add(q, pose, parent, state=state, action=action)
        return tree


@dataclass
class PlanResult:
    """Outcome of one planner run."""

    tree: ExplorationTree
    coverage: List[Tuple[int, int, float]] = field(default_factory=list)
    # (iteration, node count, max |rotation - root rotation|) checkpoints
    iterations: int = 0
    elapsed_s: float = 0.0

    def max_rotation(self) -> float:
        root = self.tree.nodes[0].pose[2]
        return float(np.abs(self.tree.rotations() - root).max())


def sample_configurations(rng: np.random.Generator, model: HandModel,
                          root_pose: np.ndarray, count: int,
                          window_scale: float,
                          position_window: float = 0.03,
                          rotation_base: float = 2.0 * np.pi) -> np.ndarray:
    """Random raw configuration targets (count, d+3).

    Joints are uniform over their limits, object position uniform in a box
    around the root, and the object angle uniform in a window around the
    root angle that widens with ``window_scale`` so deep rotations stay
    reachable as the tree grows.
    """
    q = rng.uniform(model.joint_lower, model.joint_upper,
                    (count, model.dof))
    xy = rng.uniform(-position_window, position_window, (count, 2))
    xy += root_pose[:2]
    half = rotation_base * window_scale
    th = rng.uniform(root_pose[2] - half, root_pose[2] + half, (count, 1))
    return np.concatenate([q, xy, th], axis=1)


def checkpoint(coverage: List[Tuple[int, int, float]], iteration: int,
               tree: ExplorationTree) -> None:
    root = tree.nodes[0].pose[2]
    spread = float(np.abs(tree.rotations() - root).max())
    coverage.append((iteration, len(tree), spread))
