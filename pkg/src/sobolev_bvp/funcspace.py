"""Grid functions with derivative stacks, quadrature, interpolation and
Sobolev norms on a compact interval.

A :class:`GridFunction` stores the samples of a function *and* of its
derivatives up to some order on a uniform grid.  Derivatives are never
obtained by finite differences; they are supplied by the producer (a closed
form, or the ODE identity inside the solver).  The layers are tied together
by an integral consistency test based on composite Simpson quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, OrderError, StackConsistencyError, StructuralError

DEFAULT_CONSISTENCY_TOL = 1e-6


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``t_i = a + i*(b - a)/N`` with an even number of intervals."""

    a: float
    b: float
    num_intervals: int

    def __post_init__(self):
        if not self.b > self.a:
            raise StructuralError(f"interval must satisfy b > a, got [{self.a}, {self.b}]")
        N = self.num_intervals
        if int(N) != N or N < 2 or N % 2:
            raise StructuralError(f"grid size must be even and >= 2, got {N}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "num_intervals", int(N))

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.num_intervals

    @cached_property
    def nodes(self) -> np.ndarray:
        t = self.a + self.h * np.arange(self.num_intervals + 1)
        t[-1] = self.b
        t.flags.writeable = False
        return t

    @property
    def size(self) -> int:
        return self.num_intervals + 1

    @cached_property
    def simpson_weights(self) -> np.ndarray:
        w = np.ones(self.size)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w *= self.h / 3.0
        w.flags.writeable = False
        return w


@dataclass(frozen=True)
class SobolevParams:
    """Smoothness ``n``, integrability ``p``, system size ``m``, order ``r``."""

    n: int
    p: float
    m: int
    r: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise StructuralError(f"n must be a nonnegative integer, got {self.n}")
        if int(self.m) != self.m or self.m < 1:
            raise StructuralError(f"m must be a positive integer, got {self.m}")
        if int(self.r) != self.r or self.r < 1:
            raise StructuralError(f"r must be a positive integer, got {self.r}")
        if not (1.0 <= self.p < math.inf):
            raise StructuralError(f"p must lie in [1, inf), got {self.p}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "r", int(self.r))
        object.__setattr__(self, "p", float(self.p))

    @property
    def q_is_infinite(self) -> bool:
        return self.p == 1.0

    @property
    def inv_q(self) -> float:
        """``1/q`` with ``1/p + 1/q = 1``; zero when ``p = 1``."""
        return 0.0 if self.q_is_infinite else 1.0 - 1.0 / self.p

    @property
    def q(self) -> float:
        return math.inf if self.q_is_infinite else self.p / (self.p - 1.0)

    @property
    def rm(self) -> int:
        return self.r * self.m


class GridFunction:
    """Complex scalar, vector or matrix function sampled with derivatives.

    ``values`` has shape ``(order + 1, N + 1, *shape)``: layer ``j`` holds the
    ``j``-th derivative at every node.  Instances are immutable.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        values = np.array(values, dtype=complex)
        if values.ndim < 2 or values.shape[1] != grid.size:
            raise StructuralError(
                f"values must have shape (order+1, {grid.size}, ...), got {values.shape}"
            )
        if values.ndim > 4:
            raise StructuralError("only scalar, vector and matrix shapes are supported")
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    @property
    def order(self) -> int:
        return self.values.shape[0] - 1

    @property
    def shape(self) -> tuple:
        return self.values.shape[2:]

    def layer(self, j: int) -> np.ndarray:
        if not 0 <= j <= self.order:
            raise OrderError(f"layer {j} requested from a stack of order {self.order}")
        return self.values[j]

    def truncated(self, order: int) -> "GridFunction":
        if order > self.order:
            raise OrderError(f"cannot extend a stack of order {self.order} to {order}")
        return GridFunction(self.grid, self.values[: order + 1])

    def _check_compatible(self, other: "GridFunction"):
        if other.grid != self.grid or other.shape != self.shape:
            raise StructuralError("grid functions live on different grids or shapes")

    def __add__(self, other):
        if not isinstance(other, GridFunction):
            return NotImplemented
        self._check_compatible(other)
        k = min(self.order, other.order)
        return GridFunction(self.grid, self.values[: k + 1] + other.values[: k + 1])

    def __sub__(self, other):
        if not isinstance(other, GridFunction):
            return NotImplemented
        self._check_compatible(other)
        k = min(self.order, other.order)
        return GridFunction(self.grid, self.values[: k + 1] - other.values[: k + 1])

    def __mul__(self, scalar):
        if isinstance(scalar, GridFunction):
            return NotImplemented
        return GridFunction(self.grid, complex(scalar) * self.values)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __repr__(self):
        return (
            f"GridFunction(shape={self.shape}, order={self.order}, "
            f"grid=[{self.grid.a}, {self.grid.b}]/{self.grid.num_intervals})"
        )


# -- quadrature ---------------------------------------------------------------


def simpson(grid: Grid, samples) -> np.ndarray:
    """Composite Simpson integral along the node axis (axis 0)."""
    samples = np.asarray(samples)
    return np.tensordot(grid.simpson_weights, samples, axes=(0, 0))


def cumulative_integral(grid: Grid, samples) -> np.ndarray:
    """Running integral ``int_a^{t_i}`` at every node, fourth-order accurate.

    Each cell ``[t_i, t_{i+1}]`` is integrated exactly for the cubic through
    the four nearest nodes (one-sided in the first and last cell), so every
    prefix, even or odd, carries an O(h^4) error.
    """
    s = np.asarray(samples)
    N = grid.num_intervals
    h = grid.h
    cells = np.empty((N,) + s.shape[1:], dtype=np.result_type(s, float))
    if N == 2:
        # quadratic through three nodes
        cells[0] = h * (5 * s[0] + 8 * s[1] - s[2]) / 12
        cells[1] = h * (-s[0] + 8 * s[1] + 5 * s[2]) / 12
    else:
        cells[0] = h * (9 * s[0] + 19 * s[1] - 5 * s[2] + s[3]) / 24
        cells[1:-1] = h * (-s[:-3] + 13 * s[1:-2] + 13 * s[2:-1] - s[3:]) / 24
        cells[-1] = h * (s[-4] - 5 * s[-3] + 19 * s[-2] + 9 * s[-1]) / 24
    out = np.zeros(s.shape, dtype=cells.dtype)
    np.cumsum(cells, axis=0, out=out[1:])
    return out


# -- interpolation ------------------------------------------------------------


def _cubic_stencil(grid: Grid, t):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    tol = 1e-12 * (grid.b - grid.a)
    if np.any(t < grid.a - tol) or np.any(t > grid.b + tol):
        bad = t[(t < grid.a - tol) | (t > grid.b + tol)][0]
        raise DomainError(f"point {bad} lies outside [{grid.a}, {grid.b}]")
    s = (np.clip(t, grid.a, grid.b) - grid.a) / grid.h
    N = grid.num_intervals
    if N < 3:
        start = np.zeros(s.shape, dtype=int)
        npts = N + 1
    else:
        start = np.clip(np.floor(s).astype(int) - 1, 0, N - 3)
        npts = 4
    idx = start[:, None] + np.arange(npts)
    x = s[:, None] - idx
    w = np.ones_like(x)
    for k in range(npts):
        for other in range(npts):
            if other != k:
                w[:, k] *= x[:, other] / (k - other)
    return idx, w


def interpolation_weights(grid: Grid, t):
    """Node indices and Lagrange weights of the 4-point cubic through the
    nearest nodes; the stencil turns one-sided at the interval ends."""
    return _cubic_stencil(grid, t)


def interpolate_samples(grid: Grid, samples, t) -> np.ndarray:
    """Cubic interpolation of node samples (node axis first) at points ``t``."""
    idx, w = _cubic_stencil(grid, t)
    s = np.asarray(samples)
    return np.einsum("kj,kj...->k...", w, s[idx])


def eval_at(g: GridFunction, j: int, t):
    """Value of the ``j``-th derivative layer at ``t`` (scalar or array).

    Uses the cubic through the four nearest nodes, exact at nodes and for
    cubic polynomials.
    """
    if j > g.order or j < 0:
        raise OrderError(f"derivative {j} requested from a stack of order {g.order}")
    scalar = np.ndim(t) == 0
    out = interpolate_samples(g.grid, g.values[j], t)
    return out[0] if scalar else out


# -- construction ---------------------------------------------------------------


def consistency_residuals(g: GridFunction) -> np.ndarray:
    """``max |x^(j)(b) - x^(j)(a) - Simpson(x^(j+1))|`` for each ``j < order``."""
    res = []
    for j in range(g.order):
        lo, hi = g.values[j], g.values[j + 1]
        r = lo[-1] - lo[0] - simpson(g.grid, hi)
        res.append(float(np.max(np.abs(r))) if r.size else 0.0)
    return np.array(res)


def check_consistency(g: GridFunction, tol: float = DEFAULT_CONSISTENCY_TOL) -> None:
    """Raise :class:`StackConsistencyError` on the first inconsistent layer."""
    for j, r in enumerate(consistency_residuals(g)):
        scale = max(np.max(np.abs(g.values[j]), initial=0.0),
                    np.max(np.abs(g.values[j + 1]), initial=0.0))
        bound = tol * (1.0 + scale)
        if not r <= bound:
            raise StackConsistencyError(j, r, bound)


def make_grid_function(grid: Grid, order: int, sampler, shape=None,
                       tol: float = DEFAULT_CONSISTENCY_TOL, check: bool = True) -> GridFunction:
    """Sample a derivative stack ``0..order`` from a closed-form producer.

    Parameters
    ----------
    grid : Grid
    order : int
        Highest derivative to store.
    sampler : callable
        ``sampler(t)`` returns a sequence of ``order + 1`` arrays (or
        constants) with the derivatives at the node array ``t``.
    shape : tuple, optional
        Value shape; inferred from the first layer when omitted.
    tol : float
        Relative tolerance of the integral consistency test.
    check : bool
        Skip the consistency test when False (for deliberately rough data
        such as oscillatory coefficients that the grid cannot resolve).
    """
    t = grid.nodes
    layers = list(sampler(t))
    if len(layers) < order + 1:
        raise OrderError(f"sampler returned {len(layers)} layers, need {order + 1}")
    layers = [np.asarray(v, dtype=complex) for v in layers[: order + 1]]
    if shape is None:
        first = layers[0]
        shape = first.shape[1:] if first.ndim >= 1 and first.shape[0] == t.size else first.shape
    shape = tuple(shape)
    stack = np.empty((order + 1, t.size) + shape, dtype=complex)
    for j, v in enumerate(layers):
        if v.ndim >= 1 and v.shape[0] == t.size and v.shape[1:] == shape:
            stack[j] = v
        else:
            stack[j] = np.broadcast_to(v, shape)
    g = GridFunction(grid, stack)
    if check:
        check_consistency(g, tol)
    return g


def constant(grid: Grid, value, order: int = 0) -> GridFunction:
    """Constant function with vanishing higher layers."""
    value = np.asarray(value, dtype=complex)
    stack = np.zeros((order + 1, grid.size) + value.shape, dtype=complex)
    stack[0] = value
    return GridFunction(grid, stack)


def zeros(grid: Grid, shape=(), order: int = 0) -> GridFunction:
    return GridFunction(grid, np.zeros((order + 1, grid.size) + tuple(shape), dtype=complex))


# -- norms ------------------------------------------------------------------------


def _component_norms(g: GridFunction, layers, p: float) -> np.ndarray:
    """``(sum_j int |x^(j)|^p)^(1/p)`` per component (shape ``g.shape``).

    Each component is scaled by its largest modulus first so that ``|x|^p``
    neither underflows nor overflows.
    """
    layers = list(layers)
    mods = np.abs(g.values[layers])
    scale = mods.max(axis=(0, 1)) if mods.size else np.zeros(g.shape)
    safe = np.where(scale > 0, scale, 1.0)
    total = 0.0
    for k in range(len(layers)):
        total = total + simpson(g.grid, (mods[k] / safe) ** p)
    return np.where(scale > 0, safe * np.maximum(total, 0.0) ** (1.0 / p), 0.0)


def lp_norm(g: GridFunction, j: int = 0, p: float = 2.0) -> float:
    """L_p norm of layer ``j``; vector and matrix shapes sum component norms."""
    if not 1.0 <= p < math.inf:
        raise StructuralError(f"p must lie in [1, inf), got {p}")
    g.layer(j)
    return float(np.sum(_component_norms(g, [j], p)))


def sup_norm(g: GridFunction, j: int = 0) -> float:
    """Nodewise maximum modulus of layer ``j`` (component sum)."""
    per = np.max(np.abs(g.layer(j)), axis=0)
    return float(np.sum(per))


def lq_norm(g: GridFunction, j: int, params: SobolevParams) -> float:
    """Norm in the dual Lebesgue space, ``q = inf`` handled by the node sup."""
    return sup_norm(g, j) if params.q_is_infinite else lp_norm(g, j, params.q)


def sobolev_norm(g: GridFunction, n: int, p: float = 2.0) -> float:
    """W^n_p norm ``(sum_{j<=n} int |x^(j)|^p)^(1/p)``, summed over components."""
    if g.order < n:
        raise OrderError(f"W^{n}_p norm needs {n} derivatives, stack has order {g.order}")
    if not 1.0 <= p < math.inf:
        raise StructuralError(f"p must lie in [1, inf), got {p}")
    return float(np.sum(_component_norms(g, range(n + 1), p)))


def holder_seminorm(g: GridFunction, j: int, exponent: float, chunk: int = 256) -> float:
    """Hoelder seminorm of layer ``j`` with the given exponent in ``[0, 1]``.

    Maximum of ``|x(t) - x(s)| / |t - s|**exponent`` over node pairs, summed
    over components.  For exponent 1 with the next layer available the
    supremum of ``|x^(j+1)|`` is folded in, which recovers the Lipschitz
    constant that node pairs only approach.  Exponent 0 returns twice the
    sup norm (a diameter bound); this is a diagnostic convention.
    """
    if not 0.0 <= exponent <= 1.0:
        raise StructuralError(f"exponent must lie in [0, 1], got {exponent}")
    x = g.layer(j)
    if exponent == 0.0:
        return 2.0 * sup_norm(g, j)
    t = g.grid.nodes
    flat = x.reshape(x.shape[0], -1)
    best = np.zeros(flat.shape[1])
    for s in range(0, t.size, chunk):
        ts = t[s:s + chunk]
        dt = np.abs(ts[:, None] - t[None, :])
        denom = np.where(dt > 0, dt, np.inf) ** exponent
        diff = np.abs(flat[s:s + chunk, None, :] - flat[None, :, :])
        ratio = diff / denom[:, :, None]
        best = np.maximum(best, ratio.max(axis=(0, 1)))
    if exponent == 1.0 and g.order > j:
        deriv = np.max(np.abs(g.values[j + 1].reshape(t.size, -1)), axis=0)
        best = np.maximum(best, deriv)
    return float(np.sum(best))
