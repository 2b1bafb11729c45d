"""
Projection QP Solver

Dual active-set method for

    minimize ||u - u_nom||^2  subject to  A u >= b,  -u_max <= u <= u_max

The Hessian is the identity, so the unconstrained minimizer is u_nom itself and
every step reduces to small dense projections onto the active normals.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ContractViolation

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9
# Constraint rows are solved against b + ROW_MARGIN; accepted solutions satisfy A u >= b exactly.
ROW_MARGIN = 2 * FEASIBILITY_TOL
# Squared primal-step norm below which the new normal is considered dependent.
DEPENDENCE_TOL = 1e-14


@dataclass(frozen=True)
class LinearConstraint:
    """Half-space a . u >= b."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        if a.ndim != 1 or not np.all(np.isfinite(a)) or not np.isfinite(self.b):
            raise ContractViolation("constraint rows must be finite")
        if not np.any(a) and self.b > 0:
            raise ContractViolation("zero constraint row with positive bound is unsatisfiable")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))


@dataclass(frozen=True)
class QPResult:
    """
    Outcome of one projection solve.

    Attributes:
        u: Solution (unspecified when infeasible)
        feasible: False when no control satisfying every row exactly was found
        iterations: Constraint additions and drops performed
        active: Indices of active rows at exit (box rows follow the constraint rows)
    """

    u: np.ndarray
    feasible: bool
    iterations: int
    active: Tuple[int, ...] = ()


class ActiveSetSolver:
    """
    Goldfarb-Idnani style dual active-set solver for identity-Hessian projections.

    Starts from the unconstrained minimizer and repeatedly adds the most
    violated row, dropping active rows whose multipliers would turn negative.
    A violated row that is a non-negative combination of the active normals
    certifies infeasibility.

    Attributes:
        tol: Feasibility tolerance on every row
        max_iter: Cap on add/drop iterations; None derives it from the problem size
    """

    def __init__(self, tol: float = FEASIBILITY_TOL, max_iter: Optional[int] = None):
        self.tol = tol
        self.max_iter = max_iter

    def solve(self, u_nom: np.ndarray, A: np.ndarray, b: np.ndarray, u_max: float) -> QPResult:
        """
        Project u_nom onto {A u >= b} intersected with the box.

        Args:
            u_nom: Unconstrained target, length dof
            A: (m, dof) constraint normals
            b: (m,) bounds
            u_max: Symmetric per-component box bound

        Returns:
            QPResult
        """
        u0 = np.asarray(u_nom, dtype=np.float64)
        dof = u0.size
        A = np.asarray(A, dtype=np.float64).reshape(-1, dof)
        b = np.asarray(b, dtype=np.float64).reshape(-1)
        eye = np.eye(dof)
        G = np.vstack([A, eye, -eye])
        h = np.concatenate([b, np.full(2 * dof, -float(u_max))])

        if np.all(G @ u0 >= h):
            return QPResult(u0.copy(), True, 0)
        h[: b.size] += ROW_MARGIN

        max_iter = self.max_iter or 10 * (G.shape[0] + dof) + 50
        u = u0.copy()
        active: List[int] = []
        lam = np.zeros(0)
        iterations = 0

        while iterations < max_iter:
            slack = G @ u - h
            p = int(np.argmin(slack))
            if slack[p] >= -self.tol:
                return _certified(u, A, b, u_max, iterations, active)

            n_p = G[p]
            lam_p = 0.0
            while True:
                iterations += 1
                if iterations > max_iter:
                    logger.debug("active-set iteration cap %d reached", max_iter)
                    return QPResult(u, False, iterations, tuple(active))

                z, r = _step_directions(G, active, n_p)

                drop: Optional[int] = None
                t_dual = np.inf
                for j, rj in enumerate(r):
                    if rj > DEPENDENCE_TOL:
                        ratio = lam[j] / rj
                        if ratio < t_dual:
                            t_dual, drop = ratio, j

                zz = float(z @ z)
                if zz <= DEPENDENCE_TOL * max(1.0, float(n_p @ n_p)):
                    if drop is None:
                        logger.debug("row %d incompatible with active set %s", p, active)
                        return QPResult(u, False, iterations, tuple(active))
                    lam = lam - t_dual * r
                    lam_p += t_dual
                    del active[drop]
                    lam = np.delete(lam, drop)
                    continue

                t_primal = -(float(n_p @ u) - h[p]) / zz
                t = min(t_dual, t_primal)
                u = u + t * z
                lam = lam - t * r
                lam_p += t
                if t_primal <= t_dual:
                    active.append(p)
                    lam = np.append(lam, lam_p)
                    break
                del active[drop]
                lam = np.delete(lam, drop)

        logger.debug("active-set iteration cap %d reached", max_iter)
        return QPResult(u, False, iterations, tuple(active))


def _certified(
    u: np.ndarray, A: np.ndarray, b: np.ndarray, u_max: float, iterations: int, active: List[int]
) -> QPResult:
    """Clip to the box and accept only if every row holds without tolerance."""
    u = np.clip(u, -u_max, u_max)
    if np.all(A @ u >= b):
        return QPResult(u, True, iterations, tuple(active))
    logger.debug("clipped solution violates a constraint row; reporting infeasible")
    return QPResult(u, False, iterations, tuple(active))


def _step_directions(G: np.ndarray, active: List[int], n_p: np.ndarray):
    """Primal direction (n_p projected off the active normals) and dual direction."""
    if not active:
        return n_p.copy(), np.zeros(0)
    N = G[active].T
    r = np.linalg.solve(N.T @ N, N.T @ n_p)
    return n_p - N @ r, r


_DEFAULT_SOLVER = ActiveSetSolver()


def solve_projection_qp(
    u_nom: np.ndarray, constraints: Sequence[LinearConstraint], u_max: float
) -> Tuple[np.ndarray, bool]:
    """
    Closest control to u_nom inside the constraint half-spaces and the box.

    Args:
        u_nom: Nominal control
        constraints: Rows a . u >= b
        u_max: Box bound

    Returns:
        (u, feasible); u is unspecified when feasible is False
    """
    u_nom = np.asarray(u_nom, dtype=np.float64)
    if constraints:
        A = np.vstack([c.a for c in constraints])
        b = np.array([c.b for c in constraints])
    else:
        A = np.zeros((0, u_nom.size))
        b = np.zeros(0)
    result = _DEFAULT_SOLVER.solve(u_nom, A, b, u_max)
    return result.u, result.feasible
