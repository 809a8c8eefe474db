"""Dense SPD and saddle-point (KKT) solvers.

All systems in this package are small (a few dozen unknowns, at most a
handful of constraints), so dense factorizations from LAPACK are both the
simplest and the most accurate choice. What this module adds on top is the
checking: explicit SPD verification with a relative pivot floor, constraint
rank verification, and reduced-Hessian definiteness on the constraint null
space, each with its own exception type.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NotSPD, NotSPDOnNullSpace, RankDeficientConstraints

__all__ = [
    "ToleranceSet",
    "DEFAULT_TOLERANCES",
    "KKTSystem",
    "solve_spd",
    "solve_kkt",
]


@dataclass(frozen=True)
class ToleranceSet:
    """Numerical thresholds used across the solvers.

    Attributes
    ----------
    spd_pivot : float
        A Cholesky pivot below ``spd_pivot * max(diag)`` means not SPD.
    rank_pivot : float
        A QR pivot below ``rank_pivot * max |R|`` means rank deficient.
    zero_weight : float
        Sites whose weight-function value is at or below this are treated
        as having no support and are eliminated from solves.
    feasibility : float
        Phase-1 max constraint violation at or below this counts as feasible.
    residual : float
        Generic acceptance level for equality/KKT residual checks.
    complementarity : float
        Active-set multiplier sign tolerance.
    """

    spd_pivot: float = 1e-14
    rank_pivot: float = 1e-12
    zero_weight: float = 1e-14
    feasibility: float = 1e-9
    residual: float = 1e-10
    complementarity: float = 1e-10


DEFAULT_TOLERANCES = ToleranceSet()

# Relative symmetry slack accepted on Hessian inputs.
_SYMMETRY_RTOL = 1e-12


def _as_matrix(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _as_vector(v, n, name):
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != n:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def _check_symmetric(a, name):
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    if a.size and float(np.max(np.abs(a - a.T))) > _SYMMETRY_RTOL * scale:
        raise ValueError(f"{name} is not symmetric")


def _cholesky_checked(a, tol, exc):
    """Cholesky factor of ``a`` or raise ``exc`` with a pivot diagnostic."""
    diag_max = float(np.max(np.diag(a))) if a.size else 0.0
    if a.size and diag_max <= 0.0:
        raise exc("matrix has a non-positive diagonal")
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as err:
        raise exc(f"Cholesky factorization failed: {err}") from err
    if a.size:
        pivots = np.diag(chol) ** 2
        floor = tol.spd_pivot * diag_max
        if float(np.min(pivots)) < floor:
            raise exc(
                f"smallest Cholesky pivot {float(np.min(pivots)):.3e} below "
                f"relative floor {floor:.3e}"
            )
    return chol


@dataclass
class KKTSystem:
    """Equality-constrained quadratic saddle system.

    Represents  min ½ xᵀHx + gᵀx  s.t.  Cx = b,  solved via the first-order
    conditions  [[H, −Cᵀ], [C, 0]] [x; λ] = [−g; b].

    ``constraints`` may have zero rows, in which case the system is a plain
    SPD solve.
    """

    hessian: np.ndarray
    constraints: np.ndarray
    objective_gradient: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        self.hessian = _as_matrix(self.hessian, "hessian")
        n = self.hessian.shape[0]
        if self.hessian.shape[1] != n:
            raise ValueError("hessian must be square")
        _check_symmetric(self.hessian, "hessian")
        self.constraints = np.asarray(self.constraints, dtype=float)
        if self.constraints.size == 0:
            self.constraints = self.constraints.reshape(0, n)
        self.constraints = _as_matrix(self.constraints, "constraints")
        if self.constraints.shape[1] != n:
            raise ValueError(
                f"constraints have {self.constraints.shape[1]} columns, "
                f"expected {n}"
            )
        if self.constraints.shape[0] > n:
            raise ValueError("more constraints than unknowns")
        self.objective_gradient = _as_vector(
            self.objective_gradient, n, "objective_gradient"
        )
        self.rhs = _as_vector(self.rhs, self.constraints.shape[0], "rhs")

    @property
    def n(self):
        return self.hessian.shape[0]

    @property
    def m(self):
        return self.constraints.shape[0]


def solve_spd(matrix, rhs, tol=DEFAULT_TOLERANCES):
    """Solve ``matrix @ x = rhs`` for a symmetric positive definite matrix.

    Parameters
    ----------
    matrix : (n, n) array_like
        Symmetric positive definite.
    rhs : (n,) array_like
    tol : ToleranceSet

    Returns
    -------
    (n,) ndarray

    Raises
    ------
    NotSPD
        If the Cholesky factorization fails or produces a pivot below
        ``tol.spd_pivot`` times the largest diagonal entry.
    ValueError
        On shape mismatch or an asymmetric matrix.
    """
    a = _as_matrix(matrix, "matrix")
    if a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    _check_symmetric(a, "matrix")
    b = _as_vector(rhs, a.shape[0], "rhs")
    if a.shape[0] == 0:
        return np.zeros(0)
    chol = _cholesky_checked(a, tol, NotSPD)
    return scipy.linalg.cho_solve((chol, True), b)


def _constraint_null_basis(constraints, tol):
    """QR-based rank check; returns an orthonormal null-space basis.

    Raises RankDeficientConstraints when any R pivot falls below
    ``tol.rank_pivot`` times the largest entry of R.
    """
    m, n = constraints.shape
    q, r = scipy.linalg.qr(constraints.T)  # (n, n), (n, m)
    r_scale = float(np.max(np.abs(r))) if r.size else 0.0
    pivots = np.abs(np.diag(r[:m, :m])) if m else np.zeros(0)
    if m and (r_scale == 0.0 or float(np.min(pivots)) < tol.rank_pivot * r_scale):
        raise RankDeficientConstraints(
            f"constraint rows dependent: smallest QR pivot "
            f"{float(np.min(pivots)) if m else 0.0:.3e} vs scale {r_scale:.3e}"
        )
    return q[:, m:]


def solve_kkt(system, tol=DEFAULT_TOLERANCES):
    """Solve an equality-constrained QP via its KKT saddle system.

    Checks, in order: constraint row rank (QR with a relative pivot
    threshold), then positive definiteness of the Hessian projected onto
    the constraint null space (Cholesky of ZᵀHZ). Only then is the full
    saddle matrix factored.

    Parameters
    ----------
    system : KKTSystem
    tol : ToleranceSet

    Returns
    -------
    x : (n,) ndarray
        Primal minimizer.
    lam : (m,) ndarray
        Constraint multipliers, with the sign convention
        Hx + g = Cᵀλ at the solution.

    Raises
    ------
    RankDeficientConstraints
        Dependent constraint rows.
    NotSPDOnNullSpace
        Reduced Hessian not positive definite (no unique minimizer).
    NotSPD
        When m == 0 and the Hessian itself is not SPD.
    """
    h, c = system.hessian, system.constraints
    g, b = system.objective_gradient, system.rhs
    n, m = system.n, system.m

    if m == 0:
        return solve_spd(h, -g, tol), np.zeros(0)

    null_basis = _constraint_null_basis(c, tol)
    if null_basis.shape[1] > 0:
        reduced = null_basis.T @ h @ null_basis
        reduced = 0.5 * (reduced + reduced.T)
        _cholesky_checked(reduced, tol, NotSPDOnNullSpace)

    saddle = np.block([[h, -c.T], [c, np.zeros((m, m))]])
    sol = np.linalg.solve(saddle, np.concatenate([-g, b]))
    return sol[:n], sol[n:]
