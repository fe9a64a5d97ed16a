"""Episode reset distributions for the in-hand rotation trainer.

Four sources of initial states are supported:

* :class:`FixedInit` -- every episode starts from one canonical grasp.
* :class:`PoolResets` -- uniform draws from a fixed pool, used both for
  randomly sampled stable grasps (see :func:`sample_stable_grasps`) and for
  states extracted from an exploration tree.
* :class:`ExplorationReservoir` -- a bounded reservoir continuously refilled
  with grasp states the policy itself visited during training rollouts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import SamplerError
from ..geometry import ObjectShape, boundary_sample, rotate, surface_query
from ..hand import HandModel, State, detect_contacts, finger_ik, fingertips
from ..resets import MIN_CONTACTS, ResetSet
from ..sim import BatchSimulator, SimConfig, SimState
from ..stability import StabilityConfig, is_stable


class ResetDistribution:
    """Source of initial simulator states for training episodes."""

    name = "base"

    def sample(self, rng: np.random.Generator) -> SimState:
        raise NotImplementedError

    def observe(self, states: Sequence[SimState],
                contact_counts: np.ndarray) -> None:
        """Hook fed with states visited during rollouts; default: ignore."""


class FixedInit(ResetDistribution):
    """Always restart from the same state."""

    name = "fixed"

    def __init__(self, state: SimState):
        self._state = state.copy()

    def sample(self, rng: np.random.Generator) -> SimState:
        return self._state.copy()


class PoolResets(ResetDistribution):
    """Uniform draws from a fixed pool of states."""

    def __init__(self, states: Sequence[SimState], name: str = "pool"):
        if len(states) == 0:
            raise SamplerError("reset pool is empty")
        self._states = [s.copy() for s in states]
        self.name = name

    def __len__(self) -> int:
        return len(self._states)

    def sample(self, rng: np.random.Generator) -> SimState:
        return self._states[int(rng.integers(len(self._states)))].copy()

    @staticmethod
    def from_reset_set(resets: ResetSet) -> "PoolResets":
        return PoolResets(resets.states, name="tree")


class ExplorationReservoir(ResetDistribution):
    """Half root restarts, half uniform draws over visited grasp states.

    Classic reservoir sampling keeps a bounded uniform sample of every
    observed state with at least ``min_contacts`` fingertip contacts: once
    the reservoir is full, the i-th candidate replaces a random slot with
    probability cap/i.  Sampling mixes the initial state and the reservoir
    50/50; an empty reservoir falls back to the initial state.
    """

    name = "reservoir"

    def __init__(self, root: SimState, cap: int = 2000, seed: int = 0,
                 min_contacts: int = MIN_CONTACTS, root_fraction: float = 0.5):
        if cap < 1:
            raise ValueError("reservoir cap must be at least 1")
        if not 0.0 <= root_fraction <= 1.0:
            raise ValueError("root_fraction must lie in [0, 1]")
        self._root = root.copy()
        self._cap = cap
        self._min_contacts = min_contacts
        self._root_fraction = root_fraction
        self._rng = np.random.default_rng(seed)
        self._pool: List[SimState] = []
        self._seen = 0

    def __len__(self) -> int:
        return len(self._pool)

    @property
    def seen(self) -> int:
        return self._seen

    def observe(self, states: Sequence[SimState],
                contact_counts: np.ndarray) -> None:
        for state, count in zip(states, contact_counts):
            if count < self._min_contacts:
                continue
            self._seen += 1
            if len(self._pool) < self._cap:
                self._pool.append(state.copy())
            else:
                slot = int(self._rng.integers(self._seen))
                if slot < self._cap:
                    self._pool[slot] = state.copy()

    def sample(self, rng: np.random.Generator) -> SimState:
        if not self._pool or rng.random() < self._root_fraction:
            return self._root.copy()
        return self._pool[int(rng.integers(len(self._pool)))].copy()


# ---------------------------------------------------------------------------
# random stable grasp sampling
# ---------------------------------------------------------------------------

@dataclass
class GraspSamplerStats:
    """Rejection bookkeeping for the random stable-grasp sampler."""

    proposed: int = 0           # candidate grasps drawn
    ik_failures: int = 0        # some fingertip could not reach its target
    contact_failures: int = 0   # reached, but fewer than 3 contacts resulted
    unstable: int = 0           # contacts cannot balance gravity + disturbances
    settle_failures: int = 0    # grasp fell apart under dynamics
    accepted: int = 0

    @property
    def rejection_ratio(self) -> float:
        """Candidates drawn per accepted grasp (inf when nothing passed)."""
        if self.accepted == 0:
            return float("inf")
        return self.proposed / self.accepted


def _grasp_candidate(model: HandModel, shape: ObjectShape,
                     stability: StabilityConfig, rng: np.random.Generator,
                     rotation_range: float, position_radius: float,
                     press_depth: float, stats: GraspSamplerStats
                     ) -> Optional[SimState]:
    """Draw one random grasp; returns the kinematic state or None."""
    m = model.num_fingers
    theta = float(rng.uniform(-rotation_range, rotation_range))
    pos = np.zeros(2)
    if position_radius > 0.0:
        pos = rng.uniform(-position_radius, position_radius, size=2)
    pose = np.array([pos[0], pos[1], theta])

    pts_l, nrm_l = boundary_sample(shape, rng.random(m))
    pts_w = rotate(theta, pts_l) + pos
    nrm_w = rotate(theta, nrm_l)
    targets = pts_w + nrm_w * (model.fingertip_radius - press_depth)

    q = np.empty(model.dof)
    for i in range(m):
        reach = model.link_lengths[i].sum() - 5e-4
        if np.linalg.norm(targets[i] - model.base_positions[i]) > reach:
            stats.ik_failures += 1
            return None
        solved = False
        for seed_q in ((0.0, 1.2), (0.0, -1.2)):
            qf, ok = finger_ik(model, i, np.array(seed_q), targets[i])
            if ok:
                q[2 * i:2 * i + 2] = qf
                solved = True
                break
        if not solved:
            stats.ik_failures += 1
            return None

    state = State(q, pose)
    contacts = detect_contacts(model, shape, state)
    if len(contacts) < MIN_CONTACTS:
        stats.contact_failures += 1
        return None
    if not is_stable(contacts, pose, stability):
        stats.unstable += 1
        return None
    return SimState.at_rest(q, pose)


def _dynamic_filter(model: HandModel, shape: ObjectShape, config: SimConfig,
                    candidates: Sequence[SimState], settle_duration: float,
                    max_speed: float) -> List[SimState]:
    """Keep candidates that settle into a quiescent grasp and keep holding.

    One batched rollout per chunk: hold the candidate setpoints for
    ``settle_duration`` plus the stability-check horizon; a survivor must
    never drop, end essentially at rest, and end with a full set of contacts.
    """
    if not candidates:
        return []
    sim = BatchSimulator(model, shape, config)
    sim.load([s.copy() for s in candidates])
    steps = int(round((settle_duration + config.rollout_duration) / config.dt))
    ok = np.ones(len(candidates), dtype=bool)
    for _ in range(steps):
        info = sim.step()
        ok &= ~info["dropped"]
        if not ok.any():
            return []
    tips = fingertips(model, sim.q)
    sd, _, _ = surface_query(shape, sim.pose, tips)
    touching = (sd - model.fingertip_radius) <= config.contact_tol
    ok &= touching.sum(axis=1) >= MIN_CONTACTS
    ok &= np.abs(sim.velocity).max(axis=1) < max_speed
    return [sim.state(i) for i in np.nonzero(ok)[0]]


def sample_stable_grasps(model: HandModel, shape: ObjectShape,
                         config: SimConfig, stability: StabilityConfig,
                         count: int, seed: int = 0,
                         rotation_range: float = np.pi,
                         position_radius: float = 0.0,
                         press_depth: float = 5e-4,
                         settle_duration: float = 0.3,
                         max_speed: float = 1e-2,
                         batch: int = 64,
                         max_attempts: Optional[int] = None
                         ) -> Tuple[List[SimState], GraspSamplerStats]:
    """Sample random stable grasps of the object by rejection.

    Each attempt places the object at a random rotation, aims every fingertip
    at an independent uniformly random boundary point, solves per-finger IK,
    and keeps the grasp only if all fingers touch, the contact wrenches can
    balance gravity plus disturbance torques, and the grasp survives a
    settling period plus a held rollout in the dynamic simulator.

    Returns up to ``count`` settled states plus rejection statistics.
    """
    if max_attempts is None:
        max_attempts = max(4000 * count, 40_000)
    rng = np.random.default_rng(np.random.Philox(seed))
    stats = GraspSamplerStats()
    pool: List[SimState] = []
    pending: List[SimState] = []

    def flush():
        survivors = _dynamic_filter(model, shape, config, pending,
                                    settle_duration, max_speed)
        stats.settle_failures += len(pending) - len(survivors)
        stats.accepted += len(survivors)
        pool.extend(survivors)
        pending.clear()

    while len(pool) < count and stats.proposed < max_attempts:
        stats.proposed += 1
        cand = _grasp_candidate(model, shape, stability, rng, rotation_range,
                                position_radius, press_depth, stats)
        if cand is not None:
            pending.append(cand)
            if (len(pending) >= batch
                    or len(pool) + len(pending) >= count):
                flush()
    flush()
    return pool[:count], stats


def grasp_pool_reset_set(states: Sequence[SimState]) -> ResetSet:
    """Wrap sampled grasps as a saveable reset set (rotation = object angle)."""
    rotations = np.array([s.pose[2] for s in states])
    return ResetSet(states=[s.copy() for s in states], source="sgs",
                    rotations=rotations)
