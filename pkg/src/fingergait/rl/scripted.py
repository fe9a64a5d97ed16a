"""Hand-authored finger-gait controller for round objects.

The controller rotates a grasped object with a carry-and-regrip finger
gait played out in polar coordinates about the grasp center.  Each gait
cycle has a carry phase and three recovery phases.  During the carry all
three fingertips press the surface and sweep together at a constant
rate, rotating the object one stroke.  The fingers then take turns
returning to the start of the stroke, one per recovery phase, while the
other two hold their presses frozen so the object stays parked in a firm
two-point cage.  Overlapping a recovery with a moving carry was measured
to be much faster but unreliable: releasing one press while the others
sweep pops the object millimetres off center and the moving fingers
amplify the error until the grasp fails; parking the object during every
recovery is what makes the gait robust.

The two upper fingers recover in free air — lift clear, swing back, land
pressed.  The bottom finger holds the object against gravity, so it
never leaves the surface: it slides back pressed at a skim depth, light
enough that its backward drag cannot move the parked object.

Every waypoint (angle, radius) is converted to joint setpoints with the
hand's two-joint inverse kinematics, seeded from the current setpoints
for branch continuity.  The controller reads only what the learned
policies observe — joint angles and setpoints — and never the
simulator's object pose.  It exposes the same ``mean(obs) -> actions``
interface as the learned Gaussian actor, so the evaluation pipeline can
drive it unchanged.  The controller is deterministic but stateful (an
internal step counter tracks the gait phase), so use a fresh instance
per episode.
"""

from __future__ import annotations

import numpy as np

from ..hand import HandModel, finger_ik, fingertips
from ..sim import SimState


class ScriptedRotationGait:
    """Carry-and-regrip finger gait; drop-in replacement for an actor."""

    name = "scripted"

    def __init__(self, model: HandModel, start: SimState,
                 carry_steps: int = 7, recover_steps: int = 6,
                 carry_rate: float = 0.05, press_depth: float = 3e-4,
                 skim_depth: float = 5e-5, clearance: float = 10e-3,
                 action_limit: float = 0.15, direction: float = 1.0):
        if model.num_fingers != 3:
            raise ValueError("the scripted gait needs exactly three fingers")
        if carry_steps < 1 or recover_steps < 3:
            raise ValueError("need at least 1 carry and 3 recovery steps")
        span = abs(carry_rate) * carry_steps
        if span > 0.65:
            raise ValueError("stroke span %.2f rad exceeds finger reach"
                             % span)
        self._model = model
        self._carry = int(carry_steps)
        self._recover = int(recover_steps)
        self._rate = float(carry_rate) * float(np.sign(direction) or 1.0)
        self._span = self._rate * self._carry
        self._press = float(press_depth)
        self._skim = float(skim_depth)
        self._clear = float(clearance)
        self._limit = float(action_limit)
        self._t = 0

        # grasp geometry at the start state
        self._center = np.asarray(start.pose[:2], dtype=float).copy()
        tips = fingertips(model, start.q)
        offsets = tips - self._center
        self._radius = np.linalg.norm(offsets, axis=1)     # pressed orbits
        self._alpha0 = np.arctan2(offsets[:, 1], offsets[:, 0])
        support = int(np.argmin(tips[:, 1]))               # holds the weight
        uppers = [k for k in range(3) if k != support]
        self._order = uppers + [support]                   # recovery order

    def reset(self) -> None:
        self._t = 0

    # -- schedule ----------------------------------------------------------

    def _waypoint(self, k: int, t: int) -> "tuple[float, float]":
        """Polar waypoint (angle, radius) for finger ``k`` at step ``t``.

        A cycle is one all-press carry phase followed by one recovery
        phase per finger.  Outside its own recovery a finger is pressed:
        sweeping during the carry, then frozen at the stroke end until it
        has recovered and at the stroke start afterwards.
        """
        Tc, Tr = self._carry, self._recover
        tau = t % (Tc + 3 * Tr)
        pressed = self._radius[k] - self._press
        if tau < Tc:                                     # all-press carry
            return self._alpha0[k] + self._rate * (tau + 1), pressed
        j = self._order.index(k)
        own = Tc + j * Tr
        if tau < own:                                    # awaiting recovery
            return self._alpha0[k] + self._span, pressed
        if tau >= own + Tr:                              # already recovered
            return self._alpha0[k], pressed
        w = tau - own                                    # recovery step
        if w == Tr - 1:                                  # land pressed
            return self._alpha0[k], pressed
        if k == self._order[-1]:                         # support: slide back
            frac = (w + 1) / Tr                          # at skim depth,
            return (self._alpha0[k] + (1.0 - frac) * self._span,
                    self._radius[k] - self._skim)        # never unloading
        lifted = self._radius[k] + self._clear
        if w == 0:                                       # lift in place
            return self._alpha0[k] + self._span, lifted
        frac = min(1.0, w / max(Tr - 3, 1))              # swing, then settle
        return self._alpha0[k] + (1.0 - frac) * self._span, lifted

    def _targets(self, setpoints: np.ndarray, t: int) -> np.ndarray:
        """Joint setpoint targets one step after ``t``."""
        targets = np.empty(self._model.dof)
        for k in range(3):
            alpha, rho = self._waypoint(k, t)
            point = self._center + rho * np.array([np.cos(alpha),
                                                   np.sin(alpha)])
            seed = setpoints[2 * k:2 * k + 2]
            q_pair, _ = finger_ik(self._model, k, seed, point)
            targets[2 * k:2 * k + 2] = q_pair
        return targets

    # -- policy interface ---------------------------------------------------

    def mean(self, obs: np.ndarray) -> np.ndarray:
        """Setpoint deltas toward the scheduled gait waypoints."""
        obs = np.asarray(obs, dtype=float)
        if obs.ndim != 2:
            raise ValueError("observations must be batched, (B, obs_dim)")
        dof = self._model.dof
        setpoints = obs[:, dof:2 * dof]
        t = self._t
        self._t += 1
        deltas = np.stack([self._targets(row, t) - row
                           for row in setpoints])
        return np.clip(deltas, -self._limit, self._limit)


class ScriptedHold:
    """Zero-action policy: keep the current grasp still."""

    name = "hold"

    def __init__(self, model: HandModel):
        self._dof = model.dof

    def mean(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        return np.zeros((obs.shape[0], self._dof))
