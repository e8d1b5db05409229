"""Problem data: differential systems of order r, boundary operators, and the
reduction to a first-order system for ``x = col(y, y', ..., y^(r-1))``."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Union

import numpy as np

from .errors import OrderError, StructuralError, UnsupportedFormError
from .funcspace import Grid, GridFunction, SobolevParams, simpson
from .multipoint import MultipointBoundaryForm


@dataclass(frozen=True, eq=False)
class DifferentialSystem:
    """``y^(r) + sum_{j=1}^r A_{r-j} y^(r-j) = f`` on the grid interval.

    ``coeffs[k]`` is ``A_k`` (an ``m x m`` matrix grid function) for
    ``k = 0 .. r-1``; ``rhs`` is the vector ``f``.  All stacks must reach
    order ``n``.
    """

    params: SobolevParams
    coeffs: tuple
    rhs: GridFunction

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(self.coeffs))
        P = self.params
        if len(self.coeffs) != P.r:
            raise StructuralError(f"expected {P.r} coefficient matrices, got {len(self.coeffs)}")
        for k, A in enumerate(self.coeffs):
            if A.shape != (P.m, P.m):
                raise StructuralError(f"A_{k} must have shape ({P.m}, {P.m}), got {A.shape}")
            if A.grid != self.grid:
                raise StructuralError(f"A_{k} lives on a different grid")
            if A.order < P.n:
                raise OrderError(f"A_{k} must carry {P.n} derivatives, has {A.order}")
        if self.rhs.shape != (P.m,):
            raise StructuralError(f"f must have shape ({P.m},), got {self.rhs.shape}")
        if self.rhs.order < P.n:
            raise OrderError(f"f must carry {P.n} derivatives, has {self.rhs.order}")

    @property
    def grid(self) -> Grid:
        return self.rhs.grid


@dataclass(frozen=True, eq=False)
class CanonicalBoundaryForm:
    """``B y = sum_{k=1}^{n+r} alpha_k y^(k-1)(a) + int_a^b Phi(t) y^(n+r)(t) dt``.

    ``alphas`` has shape ``(n + r, rm, m)``; ``phi`` is an ``rm x m`` grid
    function (only layer 0 is used).
    """

    alphas: np.ndarray
    phi: GridFunction

    def __post_init__(self):
        alphas = np.array(self.alphas, dtype=complex)
        if alphas.ndim != 3:
            raise StructuralError(f"alphas must have shape (n+r, rm, m), got {alphas.shape}")
        if self.phi.shape != alphas.shape[1:]:
            raise StructuralError(f"Phi must have shape {alphas.shape[1:]}, got {self.phi.shape}")
        alphas.flags.writeable = False
        object.__setattr__(self, "alphas", alphas)

    @property
    def rm(self) -> int:
        return self.alphas.shape[1]

    @property
    def m(self) -> int:
        return self.alphas.shape[2]

    @property
    def num_orders(self) -> int:
        return self.alphas.shape[0]

    def apply(self, y: GridFunction) -> np.ndarray:
        top = self.num_orders
        if y.order < top:
            raise OrderError(f"canonical operator needs derivatives up to {top}, "
                             f"stack has order {y.order}")
        if y.grid != self.phi.grid:
            raise StructuralError("Phi and the argument live on different grids")
        point = np.einsum("krc,kc...->r...", self.alphas, y.values[:top, 0])
        integrand = np.einsum("nrc,nc...->nr...", self.phi.values[0], y.values[top])
        return point + simpson(y.grid, integrand)


BoundaryOperator = Union[CanonicalBoundaryForm, MultipointBoundaryForm]


def _check_boundary(B, params: SobolevParams):
    if isinstance(B, CanonicalBoundaryForm):
        expected = (params.n + params.r, params.rm, params.m)
        if B.alphas.shape != expected:
            raise StructuralError(f"canonical alphas must have shape {expected}, got {B.alphas.shape}")
    elif isinstance(B, MultipointBoundaryForm):
        expected = (params.n + params.r, params.rm, params.m)
        if B.alphas[0].shape[1:] != expected:
            raise StructuralError(f"multipoint coefficients must have trailing shape {expected}, "
                                  f"got {B.alphas[0].shape[1:]}")
    else:
        raise UnsupportedFormError(f"unknown boundary operator {type(B).__name__}")


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """``L y = f`` together with ``B y = c``."""

    system: DifferentialSystem
    boundary: BoundaryOperator
    c: np.ndarray

    def __post_init__(self):
        P = self.params
        _check_boundary(self.boundary, P)
        c = np.array(self.c, dtype=complex).reshape(-1)
        if c.shape != (P.rm,):
            raise StructuralError(f"c must have length {P.rm}, got {c.shape[0]}")
        c.flags.writeable = False
        object.__setattr__(self, "c", c)

    @property
    def params(self) -> SobolevParams:
        return self.system.params

    @property
    def grid(self) -> Grid:
        return self.system.grid

    def replace(self, **changes) -> "ProblemInstance":
        fields = {"system": self.system, "boundary": self.boundary, "c": self.c}
        fields.update(changes)
        return ProblemInstance(**fields)


# -- stacks ------------------------------------------------------------------------


def leibniz_product(A: np.ndarray, x: np.ndarray, k: int) -> np.ndarray:
    """``k``-th derivative of the nodewise product ``A @ x`` from both stacks.

    ``A`` has shape ``(>=k+1, N+1, p, q)``, ``x`` has ``(>=k+1, N+1, q, ...)``.
    """
    out = 0
    for i in range(k + 1):
        out = out + comb(k, i) * np.einsum("nij,nj...->ni...", A[i], x[k - i])
    return out


def extend_stack(A: np.ndarray, f: np.ndarray | None, x0: np.ndarray, order: int) -> np.ndarray:
    """Derivative stack of a solution of ``x' + A x = f`` from its values.

    ``x^(k+1) = f^(k) - sum_i C(k, i) A^(i) x^(k-i)``; needs ``A`` (and
    ``f``) up to layer ``order - 1``.
    """
    if A.shape[0] < order:
        raise OrderError(f"coefficient stack of order {A.shape[0] - 1} cannot produce "
                         f"{order} solution derivatives")
    out = np.empty((order + 1,) + x0.shape, dtype=complex)
    out[0] = x0
    for k in range(order):
        nxt = -leibniz_product(A, out, k)
        if f is not None:
            nxt = nxt + _expand_rhs(f[k], nxt)
        out[k + 1] = nxt
    return out


def _expand_rhs(fk: np.ndarray, like: np.ndarray) -> np.ndarray:
    if fk.shape == like.shape:
        return fk
    return fk.reshape(fk.shape + (1,) * (like.ndim - fk.ndim))


def y_from_x(x: GridFunction, r: int, m: int) -> GridFunction:
    """Derivative stack of ``y`` from ``x = col(y, ..., y^(r-1))``.

    Layers ``0 .. r-2`` are the leading blocks of ``x``; layers ``r-1`` and
    above come from the stack of the last block.  Works for vector ``x`` and
    for matrices whose columns are such vectors.
    """
    if x.shape[0] != r * m:
        raise StructuralError(f"x must have {r * m} rows, got {x.shape[0]}")
    v = x.values
    blocks = [v[0, :, l * m:(l + 1) * m] for l in range(r - 1)]
    tail = [v[s, :, (r - 1) * m:] for s in range(x.order + 1)]
    return GridFunction(x.grid, np.stack(blocks + tail))


def x_from_y(y: GridFunction, r: int, order: int | None = None) -> GridFunction:
    """``x = col(y, ..., y^(r-1))`` with derivative layers taken from ``y``."""
    top = y.order - (r - 1)
    if top < 0:
        raise OrderError(f"y needs {r - 1} derivatives to build x")
    order = top if order is None else order
    if order > top:
        raise OrderError(f"x of order {order} needs y of order {order + r - 1}")
    layers = [np.concatenate([y.values[s + l] for l in range(r)], axis=1) for s in range(order + 1)]
    return GridFunction(y.grid, np.stack(layers))


# -- reduction ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LiftedBoundary:
    """Boundary operator acting on ``x = col(y, ..., y^(r-1))``.

    Applying it means reading the derivatives of ``y`` off ``x`` and applying
    the original operator, which realises the lifted operator term by term.
    """

    boundary: BoundaryOperator
    params: SobolevParams

    @property
    def required_order(self) -> int:
        """Derivative order of ``x`` the operator reads."""
        P = self.params
        if isinstance(self.boundary, CanonicalBoundaryForm):
            return P.n + 1
        return P.n

    def apply(self, x: GridFunction) -> np.ndarray:
        y = y_from_x(x, self.params.r, self.params.m)
        return self.boundary.apply(y)


@dataclass(frozen=True, eq=False)
class FirstOrderProblem:
    """``x' + Atilde x = ftilde`` with ``Btilde x = c``."""

    params: SobolevParams
    Atilde: GridFunction
    ftilde: GridFunction
    btilde: LiftedBoundary
    c: np.ndarray

    @property
    def grid(self) -> Grid:
        return self.ftilde.grid


def lift_boundary_form(bf: BoundaryOperator, params: SobolevParams) -> LiftedBoundary:
    """Lift ``B`` to act on ``col(y, ..., y^(r-1))``; the identity for ``r = 1``."""
    _check_boundary(bf, params)
    return LiftedBoundary(bf, params)


def companion_matrix(coeffs, params: SobolevParams) -> GridFunction:
    """Block companion matrix of the order-``r`` system.

    Superdiagonal blocks are ``-I`` so that ``x' + Atilde x = ftilde`` encodes
    ``x_k' = x_{k+1}``; the last block row holds ``A_0 .. A_{r-1}``.
    """
    P = params
    m, r, n = P.m, P.r, P.n
    grid = coeffs[0].grid
    vals = np.zeros((n + 1, grid.size, r * m, r * m), dtype=complex)
    eye = np.eye(m)
    for k in range(r - 1):
        vals[0, :, k * m:(k + 1) * m, (k + 1) * m:(k + 2) * m] = -eye
    for k, A in enumerate(coeffs):
        vals[:, :, (r - 1) * m:, k * m:(k + 1) * m] = A.values[: n + 1]
    return GridFunction(grid, vals)


def companion_reduce(prob: ProblemInstance) -> FirstOrderProblem:
    """First-order form of ``prob``; ``y`` solves it iff ``col(y, .., y^(r-1))``
    solves the reduced problem."""
    P = prob.params
    sys = prob.system
    n, m, r = P.n, P.m, P.r
    Atilde = companion_matrix(sys.coeffs, P)
    fvals = np.zeros((n + 1, sys.grid.size, r * m), dtype=complex)
    fvals[:, :, (r - 1) * m:] = sys.rhs.values[: n + 1]
    ftilde = GridFunction(sys.grid, fvals)
    return FirstOrderProblem(P, Atilde, ftilde, lift_boundary_form(prob.boundary, P), prob.c)


def first_order_residual(fop: FirstOrderProblem, x: GridFunction) -> GridFunction:
    """``x' + Atilde x - ftilde`` as an order-``n`` stack (needs ``x`` of order n+1)."""
    n = fop.params.n
    if x.order < n + 1:
        raise OrderError(f"x needs order {n + 1}, has {x.order}")
    A = fop.Atilde.values
    out = np.empty((n + 1,) + x.values.shape[1:], dtype=complex)
    for k in range(n + 1):
        out[k] = x.values[k + 1] + leibniz_product(A, x.values, k) - fop.ftilde.values[k]
    return GridFunction(x.grid, out)


# -- operators -----------------------------------------------------------------------


def apply_differential_operator(sys: DifferentialSystem, y: GridFunction) -> GridFunction:
    """``L y = y^(r) + sum_j A_{r-j} y^(r-j)`` as an order-``n`` stack."""
    P = sys.params
    n, r = P.n, P.r
    if y.order < n + r:
        raise OrderError(f"L needs y of order {n + r}, stack has order {y.order}")
    if y.shape[0] != P.m:
        raise StructuralError(f"y must have {P.m} components, got {y.shape}")
    out = np.empty((n + 1,) + y.values.shape[1:], dtype=complex)
    for k in range(n + 1):
        acc = y.values[r + k].copy()
        for j in range(1, r + 1):
            A = sys.coeffs[r - j].values
            acc += leibniz_product(A, y.values[r - j:], k)
        out[k] = acc
    return GridFunction(y.grid, out)


def apply_boundary_operator(B: BoundaryOperator, y: GridFunction) -> np.ndarray:
    """``B y`` in ``C^{rm}`` for canonical or multipoint operators."""
    if isinstance(B, (CanonicalBoundaryForm, MultipointBoundaryForm)):
        return B.apply(y)
    raise UnsupportedFormError(f"unknown boundary operator {type(B).__name__}")
