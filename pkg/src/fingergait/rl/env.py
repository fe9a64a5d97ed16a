"""Vectorized in-hand rotation environment on top of the batch simulator.

One environment step holds a servo target for ``control_interval`` simulator
substeps.  The agent observes proprioception only (joints, setpoints, binary
contact flags); the critic additionally sees privileged object state.  Reward
pays for object rotation rate while the grasp is maintained and penalizes
linear slip, drift away from the episode-start position, and dropping.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..geometry import ObjectShape, surface_query
from ..hand import HandModel, fingertips
from ..sim import BatchSimulator, SimConfig, SimState
from .distributions import ResetDistribution


@dataclass
class EnvConfig:
    lanes: int = 64               # parallel episodes
    horizon: int = 200            # control steps per episode
    action_limit: float = 0.15   # max |setpoint change| per control step (rad)
    rotation_reward: float = 1.0  # weight on clipped rotation rate
    rate_cap: float = 1.0         # rotation rate saturates at this (rad/s)
    slip_penalty: float = 0.3     # weight on object linear speed
    drift_penalty: float = 1.0    # weight on distance from episode-start point
    min_contacts: int = 3         # grasp gate for the rotation reward
    termination_contacts: int = 2  # episode ends below this many contacts
    contact_force_threshold: float = 0.0  # N; 0 = flag any active contact

    def __post_init__(self):
        if self.lanes < 1 or self.horizon < 1:
            raise ValueError("lanes and horizon must be positive")
        if self.action_limit <= 0.0:
            raise ValueError("action_limit must be positive")
        if min(self.rotation_reward, self.slip_penalty,
               self.drift_penalty) < 0.0:
            raise ValueError("reward weights must be non-negative")
        if self.rate_cap <= 0.0:
            raise ValueError("rate_cap must be positive")


@dataclass
class EpisodeStats:
    """Summary of one finished episode."""

    rotation: float   # signed net object rotation (rad)
    length: int       # control steps
    return_: float    # undiscounted reward sum
    dropped: bool     # object fell below the drop line
    lost_grasp: bool  # contact count fell below the termination threshold


class RotationEnv:
    """B independent rotation episodes advanced in lockstep."""

    def __init__(self, model: HandModel, shape: ObjectShape,
                 sim_config: SimConfig, resets: ResetDistribution,
                 config: EnvConfig, seed: int = 0):
        self.model = model
        self.shape = shape
        self.sim_config = sim_config
        self.resets = resets
        self.config = config
        self._rng = np.random.default_rng(np.random.Philox(seed))
        self._sim = BatchSimulator(model, shape, sim_config)
        b = config.lanes
        self._steps = np.zeros(b, dtype=int)
        self._returns = np.zeros(b)
        self._start_pose = np.zeros((b, 3))
        self._contacts = np.zeros((b, model.num_fingers), dtype=bool)
        self._control_dt = sim_config.dt * sim_config.control_interval
        self._sim.load([resets.sample(self._rng) for _ in range(b)])
        self._start_pose = self._sim.pose.copy()
        self._contacts = self._geometric_contacts()

    # -- observation layout ---------------------------------------------------

    @property
    def actor_obs_dim(self) -> int:
        return 2 * self.model.dof + self.model.num_fingers

    @property
    def critic_obs_dim(self) -> int:
        # actor obs + object pose offset (3) + velocity (3) + fingertips (2m)
        return self.actor_obs_dim + 6 + 2 * self.model.num_fingers

    @property
    def action_dim(self) -> int:
        return self.model.dof

    @property
    def lanes(self) -> int:
        return self.config.lanes

    def _geometric_contacts(self) -> np.ndarray:
        tips = fingertips(self.model, self._sim.q)
        sd, _, _ = surface_query(self.shape, self._sim.pose, tips)
        return (sd - self.model.fingertip_radius) <= self.sim_config.contact_tol

    def observations(self) -> Tuple[np.ndarray, np.ndarray]:
        """Current (actor_obs, critic_obs) arrays, shapes (B, 15) / (B, 27)."""
        actor = np.concatenate(
            [self._sim.q, self._sim.setpoints, self._contacts.astype(float)],
            axis=1)
        critic = np.concatenate([
            actor,
            self._sim.pose - self._start_pose,
            self._sim.velocity,
            fingertips(self.model, self._sim.q).reshape(self.lanes, -1),
        ], axis=1)
        return actor, critic

    # -- stepping -------------------------------------------------------------

    def step(self, actions: np.ndarray):
        """Hold clipped setpoint deltas for one control interval.

        Returns ``(actor_obs, critic_obs, rewards, done, info)`` where the
        observations are post-auto-reset.  ``info`` carries:

        * ``terminated`` -- (B,) bool, episode ended by dropping the object;
        * ``timeout_lanes`` / ``timeout_obs`` -- lanes ended by the horizon
          and their pre-reset critic observations (for value bootstrapping);
        * ``episodes`` -- list of :class:`EpisodeStats` finished this step.
        """
        cfg = self.config
        actions = np.asarray(actions, dtype=float)
        if actions.shape != (self.lanes, self.model.dof):
            raise ValueError("actions must have shape (lanes, dof)")
        delta = np.clip(actions, -cfg.action_limit, cfg.action_limit)
        targets = np.clip(self._sim.setpoints + delta,
                          self.model.joint_lower, self.model.joint_upper)

        theta_before = self._sim.pose[:, 2].copy()
        dropped = np.zeros(self.lanes, dtype=bool)
        info = None
        for i in range(self.sim_config.control_interval):
            info = self._sim.step(targets if i == 0 else None)
            dropped |= info["dropped"]
        if cfg.contact_force_threshold > 0.0:
            self._contacts = (np.linalg.norm(info["finger_forces"], axis=2)
                              > cfg.contact_force_threshold)
        else:
            self._contacts = info["contacts"]

        counts = self._contacts.sum(axis=1)
        grasped = counts >= cfg.min_contacts
        rate = (self._sim.pose[:, 2] - theta_before) / self._control_dt
        rate = np.clip(rate, -cfg.rate_cap, cfg.rate_cap)
        slip = np.linalg.norm(self._sim.velocity[:, :2], axis=1)
        drift = np.linalg.norm(self._sim.pose[:, :2] - self._start_pose[:, :2],
                               axis=1)
        rewards = (cfg.rotation_reward * rate * grasped
                   - cfg.slip_penalty * slip
                   - cfg.drift_penalty * drift)

        self._steps += 1
        self._returns += rewards
        lost = counts < cfg.termination_contacts
        terminated = dropped | lost
        timeout = (self._steps >= cfg.horizon) & ~terminated
        done = terminated | timeout

        # feed visited states to reset distributions that learn from rollouts
        self.resets.observe(self._sim.states(), counts)

        _, critic_now = self.observations()
        timeout_lanes = np.nonzero(timeout)[0]
        timeout_obs = critic_now[timeout_lanes].copy()

        episodes: List[EpisodeStats] = []
        for lane in np.nonzero(done)[0]:
            episodes.append(EpisodeStats(
                rotation=float(self._sim.pose[lane, 2]
                               - self._start_pose[lane, 2]),
                length=int(self._steps[lane]),
                return_=float(self._returns[lane]),
                dropped=bool(dropped[lane]),
                lost_grasp=bool(lost[lane]),
            ))
            fresh = self.resets.sample(self._rng)
            self._sim.set_lane(lane, fresh)
            self._steps[lane] = 0
            self._returns[lane] = 0.0
            self._start_pose[lane] = fresh.pose.copy()
        if done.any():
            self._contacts = self._geometric_contacts()

        actor_obs, critic_obs = self.observations()
        step_info = {
            "terminated": terminated,
            "timeout_lanes": timeout_lanes,
            "timeout_obs": timeout_obs,
            "episodes": episodes,
        }
        return actor_obs, critic_obs, rewards, done, step_info


def rollout_policy(model: HandModel, shape: ObjectShape, sim_config: SimConfig,
                   actor, start: SimState, horizon: int = 200,
                   action_limit: float = 0.15,
                   termination_contacts: int = 2,
                   deterministic: bool = True,
                   rng: Optional[np.random.Generator] = None) -> dict:
    """Run one episode from ``start`` and report the net signed rotation.

    Termination mirrors the training environment: the episode ends when the
    object drops or the contact count falls below ``termination_contacts``.
    With ``deterministic`` the policy mean is used, making the rollout a pure
    function of the start state and the policy parameters.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    sim = BatchSimulator(model, shape, sim_config)
    sim.load(start.copy())
    theta0 = float(start.pose[2])
    control_dt = sim_config.dt * sim_config.control_interval
    trace = [0.0]
    dropped = False
    lost_grasp = False
    steps = 0
    for _ in range(horizon):
        tips = fingertips(model, sim.q)
        sd, _, _ = surface_query(shape, sim.pose, tips)
        flags = ((sd - model.fingertip_radius)
                 <= sim_config.contact_tol).astype(float)
        obs = np.concatenate([sim.q, sim.setpoints, flags], axis=1)
        if deterministic:
            act = actor.mean(obs)
        else:
            act, _ = actor.sample(obs, rng)
        delta = np.clip(act, -action_limit, action_limit)
        targets = np.clip(sim.setpoints + delta,
                          model.joint_lower, model.joint_upper)
        for i in range(sim_config.control_interval):
            info = sim.step(targets if i == 0 else None)
            dropped = dropped or bool(info["dropped"][0])
        steps += 1
        trace.append(float(sim.pose[0, 2]) - theta0)
        lost_grasp = int(info["contacts"][0].sum()) < termination_contacts
        if dropped or lost_grasp:
            break
    rotation = trace[-1]
    return {
        "rotation": rotation,
        "revolutions": rotation / (2.0 * np.pi),
        "mean_speed": rotation / (steps * control_dt) if steps else 0.0,
        "trace": np.array(trace),
        "steps": steps,
        "dropped": dropped,
        "lost_grasp": lost_grasp,
    }
