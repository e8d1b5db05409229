"""Shooting solver for one boundary-value problem.

The solution is assembled from one fundamental matrix ``X`` of
``x' + Atilde x = 0`` (``X(a) = I``), a particular solution by variation of
parameters, and the characteristic matrix ``M = [Btilde X]`` whose
invertibility decides unique solvability.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import NoUniqueSolutionError, SingularFundamentalMatrixError, StructuralError
from .funcspace import (Grid, GridFunction, cumulative_integral, interpolate_samples,
                        sobolev_norm)
from .system import (LiftedBoundary, ProblemInstance, apply_boundary_operator,
                     apply_differential_operator, companion_reduce, extend_stack, y_from_x)

logger = logging.getLogger(__name__)

DEFAULT_TOL_SING = 1e-8
DEFAULT_TOL_SOLVE = 1e-6
FUNDAMENTAL_RANK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FundamentalMatrix:
    """``X`` with ``X' + Atilde X = 0``, ``X(a) = I``, and its nodewise inverse."""

    X: GridFunction
    inverse: np.ndarray

    @property
    def size(self) -> int:
        return self.X.shape[0]


@dataclass(frozen=True, eq=False)
class CharacteristicMatrix:
    M: np.ndarray
    sigma_min: float
    sigma_max: float

    @property
    def sigma_ratio(self) -> float:
        return self.sigma_min / self.sigma_max if self.sigma_max > 0 else 0.0


@dataclass(frozen=True)
class Condition0:
    """Outcome of the unique-solvability test of the homogeneous problem."""

    status: str
    sigma_ratio: float
    tol_sing: float

    @property
    def nonsingular(self) -> bool:
        return self.status == "nonsingular"

    def __bool__(self):
        return self.nonsingular


@dataclass(frozen=True, eq=False)
class SolveReport:
    y: GridFunction
    x: GridFunction
    residual_L: float
    residual_B: float
    condition0: Condition0
    characteristic: CharacteristicMatrix
    fundamental: FundamentalMatrix
    tol_solve: float = DEFAULT_TOL_SOLVE

    @property
    def within_tolerance(self) -> bool:
        return self.residual_L + self.residual_B <= self.tol_solve


def _rk4(A0: np.ndarray, Amid: np.ndarray, h: float, X0: np.ndarray) -> np.ndarray:
    """Classical RK4 for ``X' = -A X`` with ``A`` known at nodes and midpoints."""
    N = Amid.shape[0]
    out = np.empty((N + 1,) + X0.shape, dtype=complex)
    out[0] = X0
    X = X0
    for i in range(N):
        k1 = -A0[i] @ X
        k2 = -Amid[i] @ (X + 0.5 * h * k1)
        k3 = -Amid[i] @ (X + 0.5 * h * k2)
        k4 = -A0[i + 1] @ (X + h * k3)
        X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = X
    return out


def fundamental_matrix(Atilde: GridFunction, grid: Grid | None = None,
                       order: int = 1) -> FundamentalMatrix:
    """Integrate ``X' = -Atilde X`` from ``X(a) = I`` with fixed-step RK4.

    ``Atilde`` at half steps comes from cubic interpolation of its node
    values; derivative layers ``1 .. order`` follow from the ODE identity
    and need ``Atilde`` up to layer ``order - 1``.

    Raises
    ------
    SingularFundamentalMatrixError
        If ``X(t)`` loses rank at some node, which signals a step that is too
        large for the coefficient.
    """
    grid = grid or Atilde.grid
    if Atilde.grid != grid:
        raise StructuralError("Atilde lives on a different grid")
    d = Atilde.shape[0]
    A0 = Atilde.values[0]
    mids = grid.nodes[:-1] + 0.5 * grid.h
    Amid = interpolate_samples(grid, A0, mids)
    X0 = _rk4(A0, Amid, grid.h, np.eye(d, dtype=complex))
    X0[0] = np.eye(d)
    sv = np.linalg.svd(X0, compute_uv=False)
    ratio = sv[:, -1] / sv[:, 0]
    if not np.all(ratio > FUNDAMENTAL_RANK_TOL) or not np.all(np.isfinite(sv)):
        bad = int(np.argmin(np.where(np.isfinite(ratio), ratio, -1.0)))
        raise SingularFundamentalMatrixError(
            f"fundamental matrix lost rank at t = {grid.nodes[bad]:.6g} "
            f"(sigma ratio {ratio[bad]:.3e}); refine the grid"
        )
    stack = extend_stack(Atilde.values, None, X0, order)
    return FundamentalMatrix(GridFunction(grid, stack), np.linalg.inv(X0))


def characteristic_matrix(F: FundamentalMatrix, btilde: LiftedBoundary) -> CharacteristicMatrix:
    """Apply the lifted boundary operator to every column of ``X``."""
    M = np.asarray(btilde.apply(F.X), dtype=complex)
    if M.shape != (F.size, F.size):
        raise StructuralError(f"characteristic matrix has shape {M.shape}, expected {(F.size, F.size)}")
    sv = np.linalg.svd(M, compute_uv=False)
    return CharacteristicMatrix(M, float(sv[-1]), float(sv[0]))


def condition0_check(M: CharacteristicMatrix, tol_sing: float = DEFAULT_TOL_SING) -> Condition0:
    """Nonsingular iff ``sigma_min > tol_sing * sigma_max``."""
    ok = M.sigma_max > 0 and M.sigma_min > tol_sing * M.sigma_max
    return Condition0("nonsingular" if ok else "singular", M.sigma_ratio, tol_sing)


def analyse(prob: ProblemInstance, tol_sing: float = DEFAULT_TOL_SING):
    """Reduced problem, fundamental matrix, characteristic matrix and the
    Condition (0) verdict, without solving."""
    fop = companion_reduce(prob)
    F = fundamental_matrix(fop.Atilde, order=prob.params.n + 1)
    M = characteristic_matrix(F, fop.btilde)
    return fop, F, M, condition0_check(M, tol_sing)


def solve_bvp(prob: ProblemInstance, tol_sing: float = DEFAULT_TOL_SING,
              tol_solve: float = DEFAULT_TOL_SOLVE) -> SolveReport:
    """Solve ``L y = f``, ``B y = c`` and report residuals.

    The particular solution is ``X(t) int_a^t X(s)^{-1} ftilde(s) ds``; the
    boundary data are matched through the characteristic matrix.  The
    returned ``y`` carries derivatives up to order ``n + r``.

    Raises
    ------
    NoUniqueSolutionError
        The characteristic matrix is singular at ``tol_sing``.
    """
    P = prob.params
    fop, F, M, cond0 = analyse(prob, tol_sing)
    if not cond0:
        raise NoUniqueSolutionError(
            f"homogeneous problem has a nontrivial solution "
            f"(sigma ratio {cond0.sigma_ratio:.3e} <= {tol_sing:.1e})", M)
    grid = prob.grid
    X = F.X.values
    g = np.einsum("nij,nj->ni", F.inverse, fop.ftilde.values[0])
    xp0 = np.einsum("nij,nj->ni", X[0], cumulative_integral(grid, g))
    xp = GridFunction(grid, extend_stack(fop.Atilde.values, fop.ftilde.values, xp0, P.n + 1))
    coef = np.linalg.solve(M.M, prob.c - fop.btilde.apply(xp))
    x = GridFunction(grid, xp.values + np.einsum("knij,j->kni", X, coef))
    y = y_from_x(x, P.r, P.m)
    res_L = sobolev_norm(apply_differential_operator(prob.system, y) - prob.system.rhs, P.n, P.p)
    res_B = float(np.linalg.norm(apply_boundary_operator(prob.boundary, y) - prob.c))
    if res_L + res_B > tol_solve:
        logger.warning("solve residuals %.3e + %.3e exceed %.1e", res_L, res_B, tol_solve)
    return SolveReport(y, x, res_L, res_B, cond0, M, F, tol_solve)


def discrepancy_parts(prob_eps: ProblemInstance, y0: GridFunction) -> tuple:
    """``(||L(eps) y0 - f(eps)||_{n,p}, ||B(eps) y0 - c(eps)||)``."""
    P = prob_eps.params
    interior = sobolev_norm(apply_differential_operator(prob_eps.system, y0)
                            - prob_eps.system.rhs, P.n, P.p)
    boundary = float(np.linalg.norm(apply_boundary_operator(prob_eps.boundary, y0) - prob_eps.c))
    return interior, boundary


def discrepancy(prob_eps: ProblemInstance, y0: GridFunction) -> float:
    """Defect of ``y0`` in the perturbed problem: interior plus boundary part."""
    return float(sum(discrepancy_parts(prob_eps, y0)))
