import numpy as np
import numpy.random as npr
import pytest
from numpy.testing import assert_allclose

from ibkernel.errors import NotSPD, NotSPDOnNullSpace, RankDeficientConstraints
from ibkernel.linalg import (
    DEFAULT_TOLERANCES,
    KKTSystem,
    ToleranceSet,
    solve_kkt,
    solve_spd,
)


def test_solve_spd_identity():
    x = solve_spd(np.eye(3), [1.0, 2.0, 3.0])
    assert_allclose(x, [1.0, 2.0, 3.0])


def test_solve_spd_diagonal():
    x = solve_spd([[4.0, 0.0], [0.0, 9.0]], [8.0, 27.0])
    assert_allclose(x, [2.0, 3.0])


def test_solve_spd_dense_2x2():
    # [[2,1],[1,2]] x = (3,3) has the hand solution x = (1,1)
    x = solve_spd([[2.0, 1.0], [1.0, 2.0]], [3.0, 3.0])
    assert_allclose(x, [1.0, 1.0], atol=1e-14)


def test_solve_spd_rejects_asymmetric():
    with pytest.raises(ValueError):
        solve_spd([[1.0, 2.0], [0.0, 1.0]], [1.0, 1.0])


def test_solve_spd_rejects_indefinite():
    with pytest.raises(NotSPD):
        solve_spd([[1.0, 0.0], [0.0, -1.0]], [1.0, 1.0])


def test_solve_spd_rejects_tiny_pivot():
    a = np.diag([1.0, 1e-16])
    with pytest.raises(NotSPD):
        solve_spd(a, [1.0, 1.0])


def test_solve_spd_random_residuals():
    npr.seed(3)
    for _ in range(25):
        n = npr.randint(1, 21)
        m = npr.randn(n, n)
        a = m.T @ m + n * np.eye(n)
        b = npr.randn(n)
        x = solve_spd(a, b)
        assert np.max(np.abs(a @ x - b)) <= 1e-10 * (1.0 + np.max(np.abs(b)))


def test_solve_kkt_symmetric_split():
    system = KKTSystem(np.eye(2), [[1.0, 1.0]], np.zeros(2), [1.0])
    x, lam = solve_kkt(system)
    assert_allclose(x, [0.5, 0.5], atol=1e-14)
    assert_allclose(lam, [0.5], atol=1e-14)


def test_solve_kkt_inactive_constraint():
    system = KKTSystem(np.eye(2), [[1.0, 0.0]], np.zeros(2), [0.0])
    x, lam = solve_kkt(system)
    assert_allclose(x, [0.0, 0.0], atol=1e-15)
    assert_allclose(lam, [0.0], atol=1e-15)


def test_solve_kkt_weighted_diagonal():
    # minimize x1^2/2 + 2 x2^2 with x1 + x2 = 5: x1 = lam, 4 x2 = lam
    system = KKTSystem(np.diag([1.0, 4.0]), [[1.0, 1.0]], np.zeros(2), [5.0])
    x, lam = solve_kkt(system)
    assert_allclose(x, [4.0, 1.0], atol=1e-13)
    assert_allclose(lam, [4.0], atol=1e-13)


def test_solve_kkt_no_constraints_matches_spd():
    npr.seed(11)
    m = npr.randn(4, 4)
    h = m.T @ m + 4.0 * np.eye(4)
    g = npr.randn(4)
    system = KKTSystem(h, np.zeros((0, 4)), g, np.zeros(0))
    x, lam = solve_kkt(system)
    assert lam.shape == (0,)
    assert_allclose(x, solve_spd(h, -g), atol=1e-13)


def test_solve_kkt_random_residuals():
    npr.seed(7)
    for _ in range(100):
        n = npr.randint(2, 12)
        m = npr.randint(1, n + 1)
        q = npr.randn(n, n)
        h = q.T @ q + n * np.eye(n)
        c = npr.randn(m, n)
        g = npr.randn(n)
        b = npr.randn(m)
        x, lam = solve_kkt(KKTSystem(h, c, g, b))
        stat = np.max(np.abs(h @ x - c.T @ lam + g))
        feas = np.max(np.abs(c @ x - b))
        assert stat <= 1e-10 * (1.0 + np.max(np.abs(g)))
        assert feas <= 1e-10 * (1.0 + np.max(np.abs(b)))


def test_solve_kkt_rank_deficient_rows():
    c = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0]])
    system = KKTSystem(np.eye(3), c, np.zeros(3), [1.0, 2.0])
    with pytest.raises(RankDeficientConstraints):
        solve_kkt(system)


def test_solve_kkt_indefinite_on_null_space():
    # null space of [1, 0] is e2; H restricted there is -1
    system = KKTSystem(np.diag([1.0, -1.0]), [[1.0, 0.0]], np.zeros(2), [1.0])
    with pytest.raises(NotSPDOnNullSpace):
        solve_kkt(system)


def test_kkt_system_validation():
    with pytest.raises(ValueError):
        KKTSystem(np.eye(2), np.ones((3, 2)), np.zeros(2), np.zeros(3))
    with pytest.raises(ValueError):
        KKTSystem([[1.0, 0.5], [0.0, 1.0]], np.ones((1, 2)), np.zeros(2), [1.0])
    with pytest.raises(ValueError):
        KKTSystem(np.eye(2), np.ones((1, 3)), np.zeros(2), [1.0])


def test_tolerance_set_defaults():
    tol = ToleranceSet()
    assert tol.spd_pivot == 1e-14
    assert tol.rank_pivot == 1e-12
    assert tol.zero_weight == 1e-14
    assert tol.feasibility == 1e-9
    assert tol == DEFAULT_TOLERANCES
