"""Stability QP: analytic cases, grid oracle agreement, and invariances."""

import numpy as np
import pytest

from fingergait.hand import ContactInfo, ContactSet
from fingergait.stability import (
    StabilityConfig, internal_force_qp, is_stable, qp_bruteforce_oracle,
    wrench_columns,
)

RNG = np.random.default_rng(4242)
RHO = 0.05


def contacts_at(points, normals):
    normals = [np.asarray(n, float) / np.linalg.norm(n) for n in normals]
    return ContactSet([
        ContactInfo(finger=i, point=np.asarray(p, float), normal=n,
                    depth=0.0, surface_dist=0.0)
        for i, (p, n) in enumerate(zip(points, normals))])


def config(eps=0.2):
    return StabilityConfig(epsilon=eps, torque_scale=RHO)


def random_instance(k):
    pts = RNG.uniform(-RHO, RHO, size=(k, 2))
    normals = RNG.normal(size=(k, 2))
    return contacts_at(pts, normals)


# ---------------------------------------------------------------------------
# analytic cases (hand-derived minima)
# ---------------------------------------------------------------------------

def test_antipodal_contacts_cancel():
    cs = contacts_at([[RHO, 0.0], [-RHO, 0.0]], [[-1, 0], [1, 0]])
    res = internal_force_qp(cs, np.zeros(3), config())
    assert res.objective == pytest.approx(0.0, abs=1e-8)
    assert res.stable


def test_single_contact_cannot_cancel():
    cs = contacts_at([[RHO, 0.0]], [[-1, 0]])
    res = internal_force_qp(cs, np.zeros(3), config())
    assert res.objective == pytest.approx(1.0, abs=1e-10)
    assert not res.stable


def test_three_symmetric_contacts_cancel():
    ang = np.deg2rad([90.0, 210.0, 330.0])
    pts = [[RHO * np.cos(a), RHO * np.sin(a)] for a in ang]
    normals = [[-np.cos(a), -np.sin(a)] for a in ang]
    res = internal_force_qp(contacts_at(pts, normals), np.zeros(3), config())
    assert res.objective == pytest.approx(0.0, abs=1e-8)
    assert res.stable


def test_orthogonal_pair_unstable():
    cs = contacts_at([[RHO, 0.0], [0.0, RHO]], [[-1, 0], [0, -1]])
    res = internal_force_qp(cs, np.zeros(3), config())
    # pinned force of 1 along -x; the other contact only adds -y force, so
    # the best it can do is c2 = 0 leaving ||w|| = 1
    assert res.objective == pytest.approx(1.0, abs=1e-10)
    assert not res.stable


def test_empty_contacts_error_and_unstable():
    with pytest.raises(ValueError):
        internal_force_qp(ContactSet([]), np.zeros(3), config())
    assert is_stable(ContactSet([]), np.zeros(3), config()) is False


# ---------------------------------------------------------------------------
# oracle agreement
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("k", [1, 2, 3])
def test_qp_matches_grid_oracle(k):
    for _ in range(40):
        cs = random_instance(k)
        res = internal_force_qp(cs, np.zeros(3), config())
        oracle = qp_bruteforce_oracle(cs, np.zeros(3), config())
        # the solver explores a superset of the grid, so it can only be
        # better (up to solver tolerance); the grid is 0.05-coarse
        assert res.objective <= oracle + 1e-8
        assert abs(res.objective - oracle) <= 0.05


def test_qp_beats_every_grid_point_per_pin():
    cs = random_instance(3)
    res = internal_force_qp(cs, np.zeros(3), config())
    for j in range(3):
        oracle_j = qp_bruteforce_oracle(cs, np.zeros(3), config(), pinned=j)
        assert res.per_pin[j] <= oracle_j + 1e-8


# ---------------------------------------------------------------------------
# invariances
# ---------------------------------------------------------------------------

def test_reorder_invariance():
    for _ in range(20):
        cs = random_instance(3)
        perm = RNG.permutation(3)
        cs_perm = ContactSet([cs.contacts[i] for i in perm])
        a = internal_force_qp(cs, np.zeros(3), config()).objective
        b = internal_force_qp(cs_perm, np.zeros(3), config()).objective
        assert abs(a - b) < 1e-12


def test_rotation_invariance():
    for _ in range(20):
        cs = random_instance(3)
        ang = RNG.uniform(0, 2 * np.pi)
        c, s = np.cos(ang), np.sin(ang)
        rot = np.array([[c, -s], [s, c]])
        cs_rot = ContactSet([
            ContactInfo(finger=ci.finger, point=rot @ ci.point,
                        normal=rot @ ci.normal, depth=0.0, surface_dist=0.0)
            for ci in cs])
        a = internal_force_qp(cs, np.zeros(3), config())
        b = internal_force_qp(cs_rot, np.zeros(3), config())
        assert abs(a.objective - b.objective) < 1e-10
        # force block of the optimal wrench has the same norm
        ua = wrench_columns(cs, np.zeros(3), RHO) @ a.coefficients
        ub = wrench_columns(cs_rot, np.zeros(3), RHO) @ b.coefficients
        assert np.linalg.norm(ua[:2]) == pytest.approx(np.linalg.norm(ub[:2]),
                                                       abs=1e-9)


def test_adding_contact_never_hurts_original_pins():
    for _ in range(20):
        cs = random_instance(3)
        extra = random_instance(1).contacts[0]
        extra.finger = 3
        bigger = ContactSet(cs.contacts + [extra])
        small = internal_force_qp(cs, np.zeros(3), config())
        big = internal_force_qp(bigger, np.zeros(3), config())
        for j in range(3):
            assert big.per_pin[j] <= small.per_pin[j] + 1e-7


def test_epsilon_monotonicity():
    cs = random_instance(3)
    res = internal_force_qp(cs, np.zeros(3), config())
    eps_values = np.linspace(0.01, 2.0, 30)
    flags = [res.objective <= e for e in eps_values]
    assert flags == sorted(flags)     # once stable, stays stable as eps grows


def test_pinned_coefficient_is_one_and_rest_nonnegative():
    for k in (1, 2, 4):
        cs = random_instance(k)
        res = internal_force_qp(cs, np.zeros(3), config())
        assert res.coefficients[res.pinned] == 1.0
        assert np.all(res.coefficients >= 0.0)


def test_iteration_cap_respected():
    cs = random_instance(4)
    tight = StabilityConfig(epsilon=0.2, torque_scale=RHO, max_iters=3)
    res = internal_force_qp(cs, np.zeros(3), tight)
    assert res.iterations <= 3
