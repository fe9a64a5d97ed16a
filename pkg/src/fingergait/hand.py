"""Planar multi-finger hand: kinematics, contacts, and grasp matrices.

Model conventions:
  - each finger is a 2-revolute-joint chain anchored at a fixed base
  - joint angle 0 aligns a link with the previous link (proximal: with the
    base orientation), positive angles rotate counter-clockwise
  - the fingertip is a disc of fixed radius centered on the distal link tip
  - configuration vector q stacks finger joints in order:
    [f0_prox, f0_dist, f1_prox, f1_dist, ...], d = 2 * num_fingers
  - a full planner state is x = (q, object pose), pose = (x, y, theta) with
    theta unwrapped (cumulative, never reduced modulo 2*pi)

Contact normals stored in ContactInfo point INTO the object: they are the
direction along which the finger can push. The grasp matrix G maps an object
twist (vx, vy, omega) to stacked contact-point velocities; its transpose maps
stacked contact forces to the object wrench (fx, fy, tau).
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .geometry import ObjectShape, surface_query

CONTACT_TOL = 1e-3   # meters: fingertip counts as contacting within this gap


@dataclass
class HandModel:
    """Fixed kinematic description of the planar hand."""

    base_positions: np.ndarray    # (m, 2) finger anchor points
    base_angles: np.ndarray       # (m,) orientation of each finger's zero pose
    link_lengths: np.ndarray      # (m, 2) proximal/distal link lengths
    joint_lower: np.ndarray       # (d,)
    joint_upper: np.ndarray       # (d,)
    fingertip_radius: float

    def __post_init__(self):
        self.base_positions = np.asarray(self.base_positions, dtype=float)
        self.base_angles = np.asarray(self.base_angles, dtype=float)
        self.link_lengths = np.asarray(self.link_lengths, dtype=float)
        self.joint_lower = np.asarray(self.joint_lower, dtype=float)
        self.joint_upper = np.asarray(self.joint_upper, dtype=float)
        m = self.base_positions.shape[0]
        if self.link_lengths.shape != (m, 2):
            raise ValueError("link_lengths must be (num_fingers, 2)")
        if np.any(self.link_lengths <= 0.0):
            raise ValueError("link lengths must be positive")
        if self.fingertip_radius <= 0.0:
            raise ValueError("fingertip radius must be positive")
        d = 2 * m
        if self.joint_lower.shape != (d,) or self.joint_upper.shape != (d,):
            raise ValueError("joint limit arrays must have length 2*num_fingers")
        if np.any(self.joint_lower >= self.joint_upper):
            raise ValueError("joint_lower must be strictly below joint_upper")

    @property
    def num_fingers(self) -> int:
        return self.base_positions.shape[0]

    @property
    def dof(self) -> int:
        return 2 * self.num_fingers

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.joint_lower, self.joint_upper)


def default_hand() -> HandModel:
    """Three fingers on a 120-degree arc, one from below, pointing inward."""
    ring = np.deg2rad([270.0, 30.0, 150.0])
    base_radius = 0.12
    bases = base_radius * np.stack([np.cos(ring), np.sin(ring)], axis=1)
    angles = ring + np.pi        # each finger points at the workspace origin
    links = np.tile([0.05, 0.04], (3, 1))
    lo = np.tile([-1.4, -2.2], 3)
    hi = np.tile([1.4, 2.2], 3)
    return HandModel(base_positions=bases, base_angles=angles,
                     link_lengths=links, joint_lower=lo, joint_upper=hi,
                     fingertip_radius=0.008)


@dataclass
class State:
    """Planner-level state: joint configuration plus object pose."""

    q: np.ndarray          # (d,)
    pose: np.ndarray       # (3,) = (x, y, theta), theta unwrapped

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.pose = np.asarray(self.pose, dtype=float)

    def copy(self) -> "State":
        return State(self.q.copy(), self.pose.copy())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.pose])

    @staticmethod
    def from_vector(vec: np.ndarray, dof: int) -> "State":
        vec = np.asarray(vec, dtype=float)
        return State(vec[:dof].copy(), vec[dof:dof + 3].copy())


# ---------------------------------------------------------------------------
# forward kinematics
# ---------------------------------------------------------------------------

def finger_frames(model: HandModel, q: np.ndarray
                  ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Joint positions and link angles for all fingers.

    Args:
        q: (..., d) joint angles.

    Returns:
        (elbow (..., m, 2), tip (..., m, 2), phi1 (..., m), phi2 (..., m))
        where phi1/phi2 are absolute link angles and elbow is the distal
        joint position.
    """
    q = np.asarray(q, dtype=float)
    m = model.num_fingers
    qf = q.reshape(q.shape[:-1] + (m, 2))
    phi1 = model.base_angles + qf[..., 0]
    phi2 = phi1 + qf[..., 1]
    l1 = model.link_lengths[:, 0]
    l2 = model.link_lengths[:, 1]
    elbow = model.base_positions + np.stack(
        [l1 * np.cos(phi1), l1 * np.sin(phi1)], axis=-1)
    tip = elbow + np.stack([l2 * np.cos(phi2), l2 * np.sin(phi2)], axis=-1)
    return elbow, tip, phi1, phi2


def fingertips(model: HandModel, q: np.ndarray) -> np.ndarray:
    """Fingertip centers, (..., m, 2)."""
    return finger_frames(model, q)[1]


# ---------------------------------------------------------------------------
# contacts
# ---------------------------------------------------------------------------

@dataclass
class ContactInfo:
    """A single fingertip-object contact."""

    finger: int
    point: np.ndarray        # world contact point on the object surface
    normal: np.ndarray       # unit push direction (into the object)
    depth: float             # fingertip penetration, >= 0
    surface_dist: float      # signed gap between fingertip disc and surface


@dataclass
class ContactSet:
    """All active contacts of a state, at most one per finger."""

    contacts: List[ContactInfo] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.contacts)

    def __iter__(self):
        return iter(self.contacts)

    def fingers(self) -> List[int]:
        return [c.finger for c in self.contacts]

    def for_fingers(self, fingers: Sequence[int]) -> "ContactSet":
        want = set(fingers)
        return ContactSet([c for c in self.contacts if c.finger in want])


def detect_contacts(model: HandModel, shape: ObjectShape, state: State,
                    tol: float = CONTACT_TOL) -> ContactSet:
    """Detect fingertip-object contacts at a planner state.

    A contact is active when the gap between the fingertip disc and the
    object surface is at most ``tol`` (negative gap = penetration).
    """
    tips = fingertips(model, state.q)
    sd, cp, nu = surface_query(shape, state.pose, tips)
    surf = sd - model.fingertip_radius
    out = []
    for i in range(model.num_fingers):
        if surf[i] <= tol:
            out.append(ContactInfo(
                finger=i,
                point=cp[i].copy(),
                normal=-nu[i],
                depth=float(max(0.0, -surf[i])),
                surface_dist=float(surf[i]),
            ))
    return ContactSet(out)


# ---------------------------------------------------------------------------
# grasp matrices
# ---------------------------------------------------------------------------

def contact_jacobian(model: HandModel, q: np.ndarray, contacts: ContactSet
                     ) -> np.ndarray:
    """Stacked Jacobian mapping joint velocities to contact-point velocities.

    Row pairs follow the order of ``contacts``; shape (2k, d). The contact
    point is treated as a material point of the distal link, so each column
    of an involved joint is z_hat x (p - joint_position).
    """
    q = np.asarray(q, dtype=float)
    elbow, _, _, _ = finger_frames(model, q)
    k = len(contacts)
    jac = np.zeros((2 * k, model.dof))
    for row, c in enumerate(contacts):
        i = c.finger
        for col, origin in ((2 * i, model.base_positions[i]), (2 * i + 1, elbow[i])):
            r = c.point - origin
            jac[2 * row, col] = -r[1]
            jac[2 * row + 1, col] = r[0]
    return jac


def grasp_map(contacts: ContactSet, pose: np.ndarray) -> np.ndarray:
    """Grasp map G, (2k, 3): object twist -> stacked contact velocities."""
    pose = np.asarray(pose, dtype=float)
    k = len(contacts)
    g = np.zeros((2 * k, 3))
    for row, c in enumerate(contacts):
        r = c.point - pose[:2]
        g[2 * row, 0] = 1.0
        g[2 * row, 2] = -r[1]
        g[2 * row + 1, 1] = 1.0
        g[2 * row + 1, 2] = r[0]
    return g


def constraint_matrix(model: HandModel, state: State, contacts: ContactSet
                      ) -> np.ndarray:
    """Contact-maintenance constraint N = [J, -G], (2k, d+3).

    A combined state delta (dq, dpose) keeps all contacts to first order
    exactly when N @ delta = 0: finger-side and object-side contact-point
    motion agree.
    """
    jac = contact_jacobian(model, state.q, contacts)
    g = grasp_map(contacts, state.pose)
    return np.concatenate([jac, -g], axis=1)


# ---------------------------------------------------------------------------
# inverse kinematics (single finger)
# ---------------------------------------------------------------------------

def finger_ik(model: HandModel, finger: int, q_finger: np.ndarray,
              target: np.ndarray, max_iters: int = 50, damping: float = 1e-3,
              tol: float = 1e-6) -> Tuple[np.ndarray, bool]:
    """Damped least-squares IK moving one fingertip center to ``target``.

    Returns the joint pair (clamped to limits) and a success flag; on failure
    the best iterate found is returned.
    """
    qf = np.asarray(q_finger, dtype=float).copy()
    lo = model.joint_lower[2 * finger:2 * finger + 2]
    hi = model.joint_upper[2 * finger:2 * finger + 2]
    l1, l2 = model.link_lengths[finger]
    base = model.base_positions[finger]
    base_angle = model.base_angles[finger]
    best_q, best_err = qf.copy(), np.inf
    for _ in range(max_iters):
        phi1 = base_angle + qf[0]
        phi2 = phi1 + qf[1]
        elbow = base + l1 * np.array([np.cos(phi1), np.sin(phi1)])
        tip = elbow + l2 * np.array([np.cos(phi2), np.sin(phi2)])
        err = target - tip
        err_norm = float(np.linalg.norm(err))
        if err_norm < best_err:
            best_err, best_q = err_norm, qf.copy()
        if err_norm < tol:
            return qf, True
        j = np.empty((2, 2))
        for col, origin in enumerate((base, elbow)):
            r = tip - origin
            j[0, col] = -r[1]
            j[1, col] = r[0]
        jjt = j @ j.T + damping**2 * np.eye(2)
        dq = j.T @ np.linalg.solve(jjt, err)
        qf = np.clip(qf + dq, lo, hi)
    return best_q, best_err < tol
