"""Contact-maintaining extension steps for the kinematic planner.

A combined state delta (dq, dpose) keeps every contact to first order when
it lies in the null space of the contact-maintenance constraint. Extensions
project the sampled direction onto that null space, take a short normalized
step, then re-snap fingertips onto the surface to cancel the second-order
drift; the result must keep all original contacts and pass the
internal-force stability test to be accepted.
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from ..geometry import ObjectShape, surface_query
from ..hand import (HandModel, State, constraint_matrix, detect_contacts,
                    finger_ik, fingertips)
from ..stability import StabilityConfig, is_stable
from .tree import embed, metric_weights

NULLSPACE_CUTOFF = 1e-8      # singular values at/below this count as zero
RESNAP_MAX_CORRECTION = 5e-3  # m; a larger gap means the contact is lost


def nullspace_projector(model: HandModel, state: State,
                        contacts) -> np.ndarray:
    """Orthogonal projector onto the contact-maintenance null space.

    (d+3, d+3); built from the pseudoinverse of N = [J, -G] with singular
    values below NULLSPACE_CUTOFF treated as zero.
    """
    n = constraint_matrix(model, state, contacts)
    pinv = np.linalg.pinv(n, rcond=NULLSPACE_CUTOFF)
    return np.eye(model.dof + 3) - pinv @ n


def resnap_contacts(model: HandModel, shape: ObjectShape, q: np.ndarray,
                    pose: np.ndarray, fingers: Sequence[int],
                    max_correction: float = RESNAP_MAX_CORRECTION
                    ) -> Tuple[np.ndarray, bool]:
    """Pull the listed fingertips back onto the object surface.

    Each fingertip is moved (damped least-squares, seeded at its current
    joints) to the closest surface point offset by the tip radius. Fails if
    any tip sits farther than ``max_correction`` from its snapped target or
    IK cannot reach it.
    """
    q = np.asarray(q, float).copy()
    tips = fingertips(model, q)
    sd, cp, nu = surface_query(shape, pose, tips)
    for i in fingers:
        target = cp[i] + nu[i] * model.fingertip_radius
        if np.linalg.norm(tips[i] - target) > max_correction:
            return q, False
        qf, ok = finger_ik(model, i, q[2 * i:2 * i + 2], target)
        if not ok:
            return q, False
        q[2 * i:2 * i + 2] = qf
    return q, True


def project_extension(model: HandModel, shape: ObjectShape, state: State,
                      target: np.ndarray, alpha: float,
                      stability: StabilityConfig,
                      contact_tol: float) -> Optional[State]:
    """One contact-maintaining step from ``state`` toward a raw target.

    Returns the new state, or None when the direction is blocked (empty
    projected direction, failed re-snap, lost contact, or unstable result).
    """
    contacts = detect_contacts(model, shape, state, contact_tol)
    if len(contacts) < 3:
        return None
    proj = nullspace_projector(model, state, contacts)
    delta = proj @ (np.asarray(target, float) - embed(state.q, state.pose))
    weights = metric_weights(model.dof)
    norm = float(np.linalg.norm(delta * weights))
    if norm < 1e-9:
        return None
    delta *= alpha / norm

    q_new = np.clip(state.q + delta[:model.dof],
                    model.joint_lower, model.joint_upper)
    pose_new = state.pose + delta[model.dof:]
    q_new, ok = resnap_contacts(model, shape, q_new, pose_new,
                                [c.finger for c in contacts])
    if not ok:
        return None
    new_state = State(q_new, pose_new)
    after = detect_contacts(model, shape, new_state, contact_tol)
    kept = {c.finger for c in after}
    if not {c.finger for c in contacts} <= kept:
        return None
    if not is_stable(after, pose_new, stability):
        return None
    return new_state
