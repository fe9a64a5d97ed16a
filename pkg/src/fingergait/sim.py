"""Quasi-dynamic planar simulation of the hand-object system.

Model choices, in brief:
  - finger links are massless; a position servo drives each joint's velocity
    toward its setpoint, saturating at the velocity limit (errors larger than
    velocity_limit/servo_gain command full speed)
  - only the object carries inertia; it integrates applied contact forces and
    gravity with an explicit symplectic-Euler step
  - contacts are penalty springs along the surface normal with a damping
    term, plus a velocity-proportional tangential force clamped to the
    Coulomb cone mu * |normal force|
  - gravity acts along -y in the hand plane; the object counts as dropped
    once its center falls more than drop_height below the workspace origin

An action is simply a full vector of joint setpoints; setpoints persist until
replaced, so "no action" means "hold the current targets". All stepping is
implemented over a batch dimension; a batch of size one reproduces single
trajectories bit for bit because every operation is elementwise per lane.
"""

import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import SetupError
from .geometry import ObjectShape, surface_query
from .hand import (CONTACT_TOL, ContactInfo, HandModel, State,
                   detect_contacts, finger_ik, fingertips)
from .stability import StabilityConfig, is_stable

Action = np.ndarray     # (d,) joint setpoint targets


@dataclass
class SimConfig:
    dt: float = 0.002                  # integration step (s)
    servo_gain: float = 20.0           # 1/s; velocity command per rad of error
    velocity_limit: float = 1.0        # rad/s joint speed cap
    stiffness: float = 5000.0          # N/m contact spring
    damping: float = 10.0              # N s/m, normal and tangential
    friction: float = 0.8              # Coulomb coefficient
    gravity: float = 9.81              # m/s^2, along -y
    mass: float = 0.1                  # object mass (kg)
    inertia: Optional[float] = None    # kg m^2; None = uniform-density value
    drop_height: float = 0.10          # dropped when y < -drop_height
    rollout_duration: float = 1.0      # stability-check horizon (s)
    control_interval: int = 50         # sim steps per held control target
    contact_tol: float = CONTACT_TOL   # reporting tolerance (m)

    def rollout_steps(self) -> int:
        return int(round(self.rollout_duration / self.dt))


@dataclass
class SimState:
    """Complete instantaneous simulator state (one lane)."""

    q: np.ndarray            # (d,) joint angles
    setpoints: np.ndarray    # (d,) held servo targets
    pose: np.ndarray         # (3,) object (x, y, theta), theta unwrapped
    velocity: np.ndarray     # (3,) object (vx, vy, omega)

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.setpoints = np.asarray(self.setpoints, dtype=float)
        self.pose = np.asarray(self.pose, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        for name in ("q", "setpoints", "pose", "velocity"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite simulator state field {name}")

    def copy(self) -> "SimState":
        return SimState(self.q.copy(), self.setpoints.copy(),
                        self.pose.copy(), self.velocity.copy())

    def planner_state(self) -> State:
        return State(self.q.copy(), self.pose.copy())

    @staticmethod
    def at_rest(q: np.ndarray, pose: np.ndarray) -> "SimState":
        """Minimal completion of a planner state: zero velocity, targets = q."""
        q = np.asarray(q, dtype=float)
        return SimState(q.copy(), q.copy(), np.asarray(pose, dtype=float).copy(),
                        np.zeros(3))


@dataclass
class StepInfo:
    """Per-step observation data for one lane."""

    contacts: np.ndarray       # (m,) bool, fingertip within contact_tol
    finger_forces: np.ndarray  # (m, 2) net force each finger applies
    depths: np.ndarray         # (m,) penetration depth
    object_force: np.ndarray   # (2,) total force on the object incl. gravity
    object_torque: float
    dropped: bool


class BatchSimulator:
    """Vectorized simulator advancing B independent lanes in lockstep."""

    def __init__(self, model: HandModel, shape: ObjectShape, config: SimConfig):
        self.model = model
        self.shape = shape
        self.config = config
        self.inertia = (config.inertia if config.inertia is not None
                        else shape.inertia(config.mass))
        self.q = np.zeros((0, model.dof))
        self.setpoints = np.zeros((0, model.dof))
        self.pose = np.zeros((0, 3))
        self.velocity = np.zeros((0, 3))
        self._tips = np.zeros((0, model.num_fingers, 2))

    # -- state management ---------------------------------------------------

    @property
    def batch_size(self) -> int:
        return self.q.shape[0]

    def load(self, states: Union[SimState, Sequence[SimState]],
             copies: Optional[int] = None) -> None:
        """Load a batch; a single state with ``copies`` expands to B lanes."""
        if isinstance(states, SimState):
            states = [states] * (copies or 1)
        self.q = np.stack([s.q for s in states]).astype(float)
        self.setpoints = np.stack([s.setpoints for s in states]).astype(float)
        self.pose = np.stack([s.pose for s in states]).astype(float)
        self.velocity = np.stack([s.velocity for s in states]).astype(float)
        if not (np.isfinite(self.q).all() and np.isfinite(self.setpoints).all()
                and np.isfinite(self.pose).all() and np.isfinite(self.velocity).all()):
            raise ValueError("non-finite state loaded into simulator")
        self._tips = fingertips(self.model, self.q)

    def load_arrays(self, q, setpoints, pose, velocity) -> None:
        self.q = np.array(q, dtype=float)
        self.setpoints = np.array(setpoints, dtype=float)
        self.pose = np.array(pose, dtype=float)
        self.velocity = np.array(velocity, dtype=float)
        self._tips = fingertips(self.model, self.q)

    def set_lane(self, lane: int, state: SimState) -> None:
        self.q[lane] = state.q
        self.setpoints[lane] = state.setpoints
        self.pose[lane] = state.pose
        self.velocity[lane] = state.velocity
        self._tips[lane] = fingertips(self.model, state.q)

    def state(self, lane: int) -> SimState:
        return SimState(self.q[lane].copy(), self.setpoints[lane].copy(),
                        self.pose[lane].copy(), self.velocity[lane].copy())

    def states(self) -> List[SimState]:
        return [self.state(i) for i in range(self.batch_size)]

    # -- dynamics -----------------------------------------------------------

    def step(self, targets: Optional[np.ndarray] = None) -> dict:
        """Advance all lanes by one dt; ``targets`` (B, d) replaces setpoints.

        Returns a dict of per-lane arrays: contacts (B, m) bool,
        finger_forces (B, m, 2), depths (B, m), object_force (B, 2),
        object_torque (B,), dropped (B,).
        """
        model, cfg = self.model, self.config
        if targets is not None:
            self.setpoints = np.clip(targets, model.joint_lower, model.joint_upper)

        qdot = np.clip(cfg.servo_gain * (self.setpoints - self.q),
                       -cfg.velocity_limit, cfg.velocity_limit)
        q_new = np.clip(self.q + cfg.dt * qdot, model.joint_lower, model.joint_upper)
        tips_new = fingertips(model, q_new)
        vtip = (tips_new - self._tips) / cfg.dt

        sd, cp, nu = surface_query(self.shape, self.pose, tips_new)
        surf = sd - model.fingertip_radius
        depth = np.maximum(-surf, 0.0)
        pen = depth > 0.0

        r = cp - self.pose[:, None, :2]
        w = self.velocity[:, 2:3]
        vobj = np.stack([self.velocity[:, 0:1] - w * r[..., 1],
                         self.velocity[:, 1:2] + w * r[..., 0]], axis=-1)
        rel = vtip - vobj
        rel_n = (rel * nu).sum(axis=-1)
        closing = -rel_n
        fn = np.where(pen, cfg.stiffness * depth + cfg.damping * closing, 0.0)
        fn = np.maximum(fn, 0.0)

        tang = rel - rel_n[..., None] * nu
        tmag = np.linalg.norm(tang, axis=-1)
        ft_mag = np.minimum(cfg.damping * tmag, cfg.friction * fn)
        scale = np.where(tmag > 1e-12, ft_mag / np.maximum(tmag, 1e-12), 0.0)
        force = fn[..., None] * (-nu) + scale[..., None] * tang

        torque = (r[..., 0] * force[..., 1] - r[..., 1] * force[..., 0]).sum(axis=1)
        total = force.sum(axis=1)
        total[:, 1] -= cfg.mass * cfg.gravity

        self.velocity = self.velocity + cfg.dt * np.concatenate(
            [total / cfg.mass, (torque / self.inertia)[:, None]], axis=1)
        self.pose = self.pose + cfg.dt * self.velocity
        self.q = q_new
        self._tips = tips_new

        return {
            "contacts": surf <= cfg.contact_tol,
            "finger_forces": force,
            "depths": depth,
            "object_force": total,
            "object_torque": torque,
            "dropped": self.pose[:, 1] < -cfg.drop_height,
        }

    def run(self, steps: int, targets: Optional[np.ndarray] = None) -> dict:
        """Advance ``steps`` steps holding one target; returns the last info."""
        info = None
        for i in range(steps):
            info = self.step(targets if i == 0 else None)
        return info

    def rollout_stable(self) -> np.ndarray:
        """Destructive in-place check: which lanes survive the hold rollout.

        Advances this simulator ``rollout_duration`` holding current
        setpoints; a lane passes if its object never goes below the drop
        threshold. Lane states afterwards are the rolled-out states; callers
        wanting to keep their states should load copies first.
        """
        cfg = self.config
        ok = self.pose[:, 1] >= -cfg.drop_height
        for _ in range(cfg.rollout_steps()):
            info = self.step(None)
            ok &= ~info["dropped"]
            if not ok.any():
                break
        return ok


class Simulator:
    """Single-trajectory facade over the batched kernel."""

    def __init__(self, model: HandModel, shape: ObjectShape,
                 config: Optional[SimConfig] = None):
        self.model = model
        self.shape = shape
        self.config = config or SimConfig()
        self._batch = BatchSimulator(model, shape, self.config)

    def clone(self) -> "Simulator":
        """Independent instance for a parallel worker."""
        return Simulator(self.model, self.shape, self.config)

    def step(self, state: SimState, action: Optional[Action] = None
             ) -> Tuple[SimState, StepInfo]:
        """Advance one dt from ``state``; pure with respect to the input."""
        if action is not None:
            action = np.asarray(action, dtype=float)
            if action.shape != (self.model.dof,) or not np.isfinite(action).all():
                raise ValueError("action must be a finite (d,) setpoint vector")
        b = self._batch
        b.load(state)
        info = b.step(None if action is None else action[None, :])
        return b.state(0), StepInfo(
            contacts=info["contacts"][0],
            finger_forces=info["finger_forces"][0],
            depths=info["depths"][0],
            object_force=info["object_force"][0],
            object_torque=float(info["object_torque"][0]),
            dropped=bool(info["dropped"][0]),
        )

    def snapshot(self, state: SimState) -> SimState:
        return state.copy()

    def restore(self, token: SimState) -> SimState:
        return token.copy()

    def rollout_stability_check(self, state: SimState) -> bool:
        """1 s hold test: does the object stay above the drop threshold?"""
        return bool(rollout_stability_check(self.model, self.shape,
                                            self.config, [state])[0])


def rollout_stability_check(model: HandModel, shape: ObjectShape,
                            config: SimConfig, states: Sequence[SimState]
                            ) -> np.ndarray:
    """Batched hold-rollout stability check; pure in the input states."""
    sim = BatchSimulator(model, shape, config)
    sim.load([s.copy() for s in states])
    return sim.rollout_stable()


# ---------------------------------------------------------------------------
# canonical grasp construction
# ---------------------------------------------------------------------------

def settle(model: HandModel, shape: ObjectShape, config: SimConfig,
           state: SimState, duration: float) -> SimState:
    sim = BatchSimulator(model, shape, config)
    sim.load(state.copy())
    sim.run(int(round(duration / config.dt)))
    return sim.state(0)


def _select_contact_points(model: HandModel, shape: ObjectShape,
                           stability: StabilityConfig,
                           vertex_margin: float = 0.012,
                           max_align: float = np.deg2rad(60.0),
                           top_k: int = 6
                           ) -> Tuple[np.ndarray, np.ndarray]:
    """Choose one boundary contact point per finger, in the object frame.

    Candidates are edge-interior surface points (any boundary point for a
    disc). Each finger keeps the reachable candidates whose outward normal
    roughly faces its base, limiting sideways dragging while it approaches,
    and the best-aligned combination that the internal-force test accepts
    as a stable grasp wins. Returns (points, outward normals), each
    (num_fingers, 2), for the object at the origin with zero rotation.
    """
    base_dist = np.linalg.norm(model.base_positions, axis=1, keepdims=True)
    reach = model.link_lengths.sum(axis=1)
    if shape.kind == "disc":
        dirs = model.base_positions / base_dist
        return shape.radius * dirs, dirs.copy()

    cand_p, cand_n = [], []
    verts = shape.vertices
    for j in range(len(verts)):
        a, b = verts[j], verts[(j + 1) % len(verts)]
        length = float(np.linalg.norm(b - a))
        lo = vertex_margin / length
        if lo >= 0.5 - 1e-9:
            continue                      # edge too short to stay off corners
        t = np.linspace(lo, 1.0 - lo, 9)[:, None]
        cand_p.append(a + t * (b - a))
        cand_n.append(np.repeat(shape._edge_normal[j][None, :], len(t), axis=0))
    cand_p = np.concatenate(cand_p)
    cand_n = np.concatenate(cand_n)

    per_finger: List[List[int]] = []
    scores = np.zeros(len(cand_p))
    all_scores = []
    for i in range(model.num_fingers):
        base = model.base_positions[i]
        need = np.linalg.norm(cand_p + cand_n * model.fingertip_radius - base,
                              axis=1)
        to_base = base - cand_p
        to_base /= np.linalg.norm(to_base, axis=1, keepdims=True)
        align = np.arccos(np.clip((cand_n * to_base).sum(axis=1), -1.0, 1.0))
        feasible = (need <= reach[i] - 5e-4) & (align <= max_align)
        if not feasible.any():
            raise SetupError(f"finger {i} has no reachable, aligned "
                             f"contact point on {shape.name!r}")
        scores = align + 50.0 * np.maximum(0.0, need - (reach[i] - 0.010))
        idx = np.flatnonzero(feasible)
        per_finger.append(list(idx[np.argsort(scores[idx])][:top_k]))
        all_scores.append(scores)

    best_total, best_triple = np.inf, None
    origin = np.zeros(3)
    for combo in itertools.product(*per_finger):
        total = sum(all_scores[i][j] for i, j in enumerate(combo))
        if total >= best_total:
            continue
        contacts = [ContactInfo(finger=i, point=cand_p[j].copy(),
                                normal=-cand_n[j], depth=0.0, surface_dist=0.0)
                    for i, j in enumerate(combo)]
        if is_stable(contacts, origin, stability):
            best_total, best_triple = total, combo
    if best_triple is None:
        raise SetupError(f"no stable contact combination found on {shape.name!r}")
    sel = list(best_triple)
    return cand_p[sel].copy(), cand_n[sel].copy()


def _grasp_targets(model: HandModel, pose: np.ndarray, points: np.ndarray,
                   normals: np.ndarray, depth: float) -> np.ndarray:
    """Tip-center targets pressing ``depth`` into the given object-frame
    contact points, for an object at ``pose``. Targets beyond a finger's
    reach are pulled back to its reachable disc, so a fully stretched
    finger simply presses as deep as it can."""
    c, s = np.cos(pose[2]), np.sin(pose[2])
    rot = np.array([[c, -s], [s, c]])
    targets = (points @ rot.T + pose[:2]
               + (normals @ rot.T) * (model.fingertip_radius - depth))
    offsets = targets - model.base_positions
    dist = np.linalg.norm(offsets, axis=1)
    reach = model.link_lengths.sum(axis=1) - 1e-4
    scale = np.minimum(1.0, reach / np.maximum(dist, 1e-12))
    return model.base_positions + offsets * scale[:, None]


def _ik_all(model: HandModel, targets: np.ndarray, seed_q: np.ndarray
            ) -> np.ndarray:
    q = np.zeros(model.dof)
    for i in range(model.num_fingers):
        qf, ok = finger_ik(model, i, seed_q[2 * i:2 * i + 2], targets[i])
        if not ok:
            for alt in (np.array([0.0, 1.2]), np.array([0.0, -1.2])):
                qf, ok = finger_ik(model, i, alt, targets[i])
                if ok:
                    break
        if not ok:
            raise SetupError(f"finger {i} cannot reach the object surface")
        q[2 * i:2 * i + 2] = qf
    return q


def canonical_grasp_state(model: HandModel, shape: ObjectShape,
                          config: Optional[SimConfig] = None,
                          stability: Optional[StabilityConfig] = None,
                          press: float = 1e-3,
                          settle_time: float = 0.4,
                          refinements: int = 2) -> SimState:
    """Build the canonical three-finger root grasp of a centered object.

    Contact points are chosen once in the object frame, each fingertip is
    placed on its point by IK, servo targets press a further ``press``
    meters in along the local surface normal, and the coupled system
    settles under gravity until quiescent; the placement is re-solved
    against the settled pose a couple of times so the same material points
    stay pressed even if the object drifts. Raises SetupError if the result
    is not a stable three-contact grasp.
    """
    config = config or SimConfig()
    if stability is None:
        stability = StabilityConfig(torque_scale=shape.bounding_radius())
    points, normals = _select_contact_points(model, shape, stability)
    pose = np.zeros(3)
    seed = np.tile([0.0, 1.2], model.num_fingers)
    q_touch = _ik_all(model, _grasp_targets(model, pose, points, normals, 0.0),
                      seed)
    settled = SimState(q=q_touch, setpoints=q_touch, pose=pose,
                       velocity=np.zeros(3))
    for _ in range(refinements + 1):
        q_press = _ik_all(model, _grasp_targets(model, settled.pose, points,
                                                normals, press), settled.q)
        start = SimState(q=settled.q, setpoints=q_press, pose=settled.pose,
                         velocity=settled.velocity)
        settled = settle(model, shape, config, start, settle_time)
        for _ in range(12):
            if np.abs(settled.velocity).max() < 1e-4:
                break
            settled = settle(model, shape, config, settled, settle_time)

    contacts = detect_contacts(model, shape, settled.planner_state(),
                               config.contact_tol)
    if len(contacts) < 3:
        raise SetupError(f"canonical grasp has only {len(contacts)} contacts")
    if not is_stable(contacts, settled.pose, stability):
        raise SetupError("canonical grasp failed the stability test")
    if not rollout_stability_check(model, shape, config, [settled])[0]:
        raise SetupError("canonical grasp failed the hold rollout")
    return settled
