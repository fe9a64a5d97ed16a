"""Reset-state extraction from exploration trees.

The planner trees double as generators of training start states: the paths
reaching the largest object rotations visit exactly the awkward intermediate
grasps a policy must pass through. Extraction takes the union of nodes on
the top-k highest-rotation paths, keeps the states that qualify as usable
grasps, and evens the selection over the rotation range when capped.

Dynamic-tree nodes carry full simulator states and were hold-checked when
added, so they only need the geometric contact filter; kinematic-tree nodes
are completed with zero velocity and must additionally survive the hold
rollout.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import SamplerError
from .geometry import ObjectShape
from .hand import HandModel, detect_contacts
from .planning.tree import ExplorationTree
from .sim import SimConfig, SimState, rollout_stability_check

RESET_CAP = 2000
MIN_CONTACTS = 3


def path_rotation(tree: ExplorationTree, node_id: int) -> float:
    """Rotation travelled from the root to this node (unwrapped angle)."""
    return abs(float(tree.nodes[node_id].pose[2] - tree.nodes[0].pose[2]))


def top_k_paths(tree: ExplorationTree, k: int = 10) -> List[List[int]]:
    """Root-to-endpoint id paths for the k largest-rotation endpoints.

    Endpoints are ranked by rotation travelled, ties broken toward lower
    node ids; the root itself is never an endpoint unless it is the only
    node.
    """
    if len(tree) == 1:
        return [[0]]
    rotations = np.abs(tree.rotations() - tree.nodes[0].pose[2])
    order = np.lexsort((np.arange(len(tree)), -rotations))
    endpoints = [int(i) for i in order if i != 0][:k]
    return [list(reversed(tree.path_to_root(e))) for e in endpoints]


@dataclass
class ResetSet:
    """Extracted reset states plus bookkeeping for diagnostics."""

    states: List[SimState]
    source: str                                  # "dynamic" | "kinematic"
    rotations: np.ndarray = field(default_factory=lambda: np.zeros(0))
    meta: "dict[str, str]" = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.states)

    def save(self, path: str, meta: "Optional[dict[str, str]]" = None) -> None:
        """Write the set; ``meta`` entries (and any already on the object)
        become ``# meta <key> <value>`` provenance lines."""
        dof = len(self.states[0].q) if self.states else 0
        merged = dict(self.meta)
        merged.update(meta or {})
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# fingergait reset set v1\n")
            fh.write(f"# dof {dof}\n")
            fh.write(f"# source {self.source}\n")
            for key, value in merged.items():
                fh.write(f"# meta {key} {value}\n")
            fh.write("# fields: q.. setpoints.. pose.. velocity.. rotation\n")
            for state, rot in zip(self.states, self.rotations):
                vals = np.concatenate([state.q, state.setpoints, state.pose,
                                       state.velocity, [rot]])
                fh.write(" ".join(format(v, ".17g") for v in vals) + "\n")

    @classmethod
    def load(cls, path: str) -> "ResetSet":
        dof, source, rows = None, "unknown", []
        meta: "dict[str, str]" = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    tokens = line[1:].split()
                    if tokens[:1] == ["dof"]:
                        dof = int(tokens[1])
                    elif tokens[:1] == ["source"]:
                        source = tokens[1]
                    elif tokens[:1] == ["meta"] and len(tokens) >= 3:
                        meta[tokens[1]] = " ".join(tokens[2:])
                    continue
                rows.append(np.array([float(x) for x in line.split()]))
        if dof is None:
            raise ValueError(f"{path}: missing '# dof' header")
        states, rotations = [], []
        for row in rows:
            if len(row) != 2 * dof + 7:
                raise ValueError(f"{path}: bad reset row length {len(row)}")
            states.append(SimState(q=row[:dof], setpoints=row[dof:2 * dof],
                                   pose=row[2 * dof:2 * dof + 3],
                                   velocity=row[2 * dof + 3:2 * dof + 6]))
            rotations.append(row[-1])
        return cls(states=states, source=source,
                   rotations=np.array(rotations), meta=meta)


def _cap_evenly(states: List[SimState], rotations: np.ndarray,
                cap: int) -> "tuple[List[SimState], np.ndarray]":
    """Thin to ``cap`` states evenly over the sorted rotation range."""
    if len(states) <= cap:
        return states, rotations
    order = np.lexsort((np.arange(len(states)), rotations))
    keep = order[np.unique(np.round(np.linspace(0, len(states) - 1, cap))
                           .astype(int))]
    keep = np.sort(keep)
    return [states[i] for i in keep], rotations[keep]


def extract_resets(model: HandModel, shape: ObjectShape,
                   sim_config: SimConfig, tree: ExplorationTree,
                   top_k: int = 10, cap: int = RESET_CAP) -> ResetSet:
    """Build the reset set from an exploration tree.

    Trees whose nodes carry simulator states (dynamic planner) pass their
    states through a geometric contact filter; kinematic trees get zero
    velocity completions filtered by the hold rollout. Raises SamplerError
    when nothing usable remains.
    """
    ids: List[int] = []
    seen = set()
    for path in top_k_paths(tree, top_k):
        for node_id in path:
            if node_id not in seen:
                seen.add(node_id)
                ids.append(node_id)
    ids.sort()

    dynamic = tree.nodes[0].state is not None
    candidates: List[SimState] = []
    rotations: List[float] = []
    for node_id in ids:
        node = tree.nodes[node_id]
        state = (node.state.copy() if node.state is not None
                 else SimState.at_rest(node.q, node.pose))
        contacts = detect_contacts(model, shape, state.planner_state(),
                                   sim_config.contact_tol)
        if len(contacts) < MIN_CONTACTS:
            continue
        candidates.append(state)
        rotations.append(path_rotation(tree, node_id))

    if candidates and not dynamic:
        ok = rollout_stability_check(model, shape, sim_config, candidates)
        candidates = [s for s, good in zip(candidates, ok) if good]
        rotations = [r for r, good in zip(rotations, ok) if good]

    if not candidates:
        raise SamplerError("reset extraction produced no usable states")
    states, rots = _cap_evenly(candidates, np.array(rotations), cap)
    return ResetSet(states=states,
                    source="dynamic" if dynamic else "kinematic",
                    rotations=rots)
