"""Grasp stability via a minimal internal-force quadratic program.

A grasp is judged by the smallest wrench it necessarily exerts: choose
non-negative normal-force coefficients c (one per contact, at least one
forced to 1 so the trivial all-zero answer is excluded) and measure the net
object wrench w produced by pushing with c_i along each contact normal. If
some admissible c makes ||w|| small the contacts can squeeze the object
without disturbing it; the grasp counts as stable when the minimum falls at
or below a threshold.

The norm mixes force and torque: ||w||^2 = fx^2 + fy^2 + (tau / rho)^2 where
rho is a characteristic object radius, making the measure unit-consistent
and (for unit normals) dimensionless.

The minimization is solved once per pinned index with projected gradient
descent: box projection (c >= 0, the pinned coordinate reset to 1), fixed
step 1/L from the Lipschitz bound of the gradient, a hard iteration cap, and
a displacement-based stationarity test. All pins iterate together as rows of
one matrix. A dense grid search over coefficient space serves as the test
oracle.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .hand import ContactSet, grasp_map


@dataclass
class StabilityConfig:
    epsilon: float = 0.2          # stability threshold on the minimal ||w||
    torque_scale: float = 0.05    # rho: meters; object bounding radius
    max_iters: int = 10_000
    tol: float = 1e-10            # stationarity: max projected-step displacement


@dataclass
class StabilityResult:
    objective: float              # minimal weighted ||w|| over all pins
    coefficients: np.ndarray      # (k,) minimizing coefficients
    pinned: int                   # pin attaining the minimum
    stable: bool
    per_pin: np.ndarray           # (k,) minimal ||w|| for each pinned index
    iterations: int               # projected-gradient iterations used


def wrench_columns(contacts: ContactSet, pose: np.ndarray,
                   torque_scale: float) -> np.ndarray:
    """Weighted unit-force wrench of each contact, stacked as columns (3, k)."""
    pose = np.asarray(pose, dtype=float)
    k = len(contacts)
    u = np.zeros((3, k))
    for i, c in enumerate(contacts):
        r = c.point - pose[:2]
        u[0, i] = c.normal[0]
        u[1, i] = c.normal[1]
        u[2, i] = (r[0] * c.normal[1] - r[1] * c.normal[0]) / torque_scale
    return u


def internal_force_qp(contacts: ContactSet, pose: np.ndarray,
                      config: Optional[StabilityConfig] = None) -> StabilityResult:
    """Minimize the weighted net wrench over admissible squeeze coefficients.

    Raises:
        ValueError: if the contact set is empty.
    """
    config = config or StabilityConfig()
    k = len(contacts)
    if k == 0:
        raise ValueError("internal_force_qp needs at least one contact")
    u = wrench_columns(contacts, pose, config.torque_scale)
    h = u.T @ u                                       # (k, k), PSD
    lam_max = float(np.linalg.eigvalsh(h)[-1]) if k > 1 else float(h[0, 0])
    if lam_max <= 0.0:
        # all contact wrenches vanish; any admissible c gives w = 0
        c = np.ones(k)
        per_pin = np.zeros(k)
        return StabilityResult(0.0, c, 0, True, per_pin, 0)

    step = 1.0 / (2.0 * lam_max)
    diag = np.arange(k)
    coeff = np.ones((k, k))                           # row j: candidate for pin j
    iters = 0
    for iters in range(1, config.max_iters + 1):
        grad = 2.0 * coeff @ h
        new = np.maximum(coeff - step * grad, 0.0)
        new[diag, diag] = 1.0
        moved = np.abs(new - coeff).max()
        coeff = new
        if moved <= config.tol:
            break

    # evaluate ||w|| from the wrench itself (the quadratic form c'Hc loses
    # precision to cancellation near w = 0)
    per_pin = np.linalg.norm(u @ coeff.T, axis=0)
    best = int(np.argmin(per_pin))
    objective = float(per_pin[best])
    return StabilityResult(
        objective=objective,
        coefficients=coeff[best].copy(),
        pinned=best,
        stable=objective <= config.epsilon,
        per_pin=per_pin,
        iterations=iters,
    )


def qp_bruteforce_oracle(contacts: ContactSet, pose: np.ndarray,
                         config: Optional[StabilityConfig] = None,
                         pinned: Optional[int] = None,
                         step: float = 0.05, cap: float = 10.0) -> float:
    """Dense grid search over coefficients; test oracle for the QP.

    Evaluates every combination of c_i in {0, step, ..., cap} for the free
    coordinates (pinned one fixed at 1) and returns the smallest weighted
    ||w||. With ``pinned=None`` the minimum over all pins is returned.
    """
    config = config or StabilityConfig()
    k = len(contacts)
    if k == 0:
        raise ValueError("oracle needs at least one contact")
    u = wrench_columns(contacts, pose, config.torque_scale)
    axis = np.arange(0.0, cap + 0.5 * step, step)
    pins = range(k) if pinned is None else [pinned]
    best = np.inf
    for j in pins:
        free = [i for i in range(k) if i != j]
        if not free:
            best = min(best, float(np.linalg.norm(u[:, j])))
            continue
        grids = np.meshgrid(*([axis] * len(free)), indexing="ij")
        cfree = np.stack([g.reshape(-1) for g in grids], axis=0)   # (k-1, n)
        chunk = 1_000_000
        for lo in range(0, cfree.shape[1], chunk):
            block = cfree[:, lo:lo + chunk]
            w = u[:, free] @ block + u[:, j:j + 1]
            best = min(best, float(np.sqrt((w * w).sum(axis=0).min())))
    return best


def is_stable(contacts: ContactSet, pose: np.ndarray,
              config: Optional[StabilityConfig] = None) -> bool:
    """Stability predicate; an empty contact set is simply unstable."""
    config = config or StabilityConfig()
    if len(contacts) == 0:
        return False
    return internal_force_qp(contacts, pose, config).stable


def grasp_matrix(contacts: ContactSet, pose: np.ndarray) -> np.ndarray:
    """Convenience re-export of the grasp map used by the QP's wrench."""
    return grasp_map(contacts, pose)
