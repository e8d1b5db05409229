"""Multipoint boundary operators and the point/coefficient conditions that
guarantee their strong convergence as the parameter vanishes.

A multipoint operator evaluates

    B y = sum_{l} sum_{i=0}^{kappa} sum_{j=1}^{k_i} alpha[i][j, l] @ y^(l)(t[i][j])

for derivative orders ``l = 0 .. n+r-1``.  Points of group ``i >= 1`` are
meant to approach the limit point ``limit_points[i-1]``; the points of group
0 are unconstrained and their coefficients must vanish instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, OrderError, StructuralError
from .funcspace import Grid, GridFunction, SobolevParams, interpolation_weights
from .trend import FAIL, INCONCLUSIVE, PASS, TrendTest, conjunction


@dataclass(frozen=True, eq=False)
class MultipointBoundaryForm:
    """Point evaluations grouped by limit point.

    Parameters
    ----------
    limit_points : tuple of float
        ``t_1 .. t_kappa``; pairwise distinct.
    points : tuple of ndarray
        ``points[i]`` holds the ``k_i`` evaluation points of group ``i``,
        with group 0 first.
    alphas : tuple of ndarray
        ``alphas[i]`` has shape ``(k_i, n + r, rm, m)``; entry ``[j, l]`` is
        the coefficient of ``y^(l)(points[i][j])``.
    """

    limit_points: tuple
    points: tuple
    alphas: tuple

    def __post_init__(self):
        lp = tuple(float(t) for t in self.limit_points)
        pts = tuple(np.array(np.atleast_1d(p), dtype=float) for p in self.points)
        als = tuple(np.array(a, dtype=complex) for a in self.alphas)
        for arr in pts + als:
            arr.flags.writeable = False
        object.__setattr__(self, "limit_points", lp)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "alphas", als)
        errors = _structure_errors(self)
        if errors:
            raise StructuralError("; ".join(errors))

    @property
    def kappa(self) -> int:
        return len(self.limit_points)

    @property
    def group_sizes(self) -> tuple:
        return tuple(len(p) for p in self.points)

    @property
    def num_orders(self) -> int:
        return self.alphas[0].shape[1]

    @property
    def rm(self) -> int:
        return self.alphas[0].shape[2]

    @property
    def m(self) -> int:
        return self.alphas[0].shape[3]

    def structure(self) -> tuple:
        return (self.group_sizes, self.alphas[0].shape[1:])

    def flat_terms(self):
        """All points and their ``(n+r, rm, m)`` coefficient stacks, concatenated."""
        pts = np.concatenate(self.points)
        als = np.concatenate(self.alphas, axis=0)
        return pts, als

    @classmethod
    def from_terms(cls, terms, rm: int, m: int, num_orders: int, limit_points=()):
        """Assemble a form from ``(group, point, order, coefficient)`` tuples.

        Terms sharing group and point are merged into one point; their
        coefficients are added when the order also coincides.
        """
        kappa = len(limit_points)
        pts = [[] for _ in range(kappa + 1)]
        coeffs = [[] for _ in range(kappa + 1)]
        for group, point, order, coeff in terms:
            if not 0 <= group <= kappa:
                raise StructuralError(f"group {group} outside 0..{kappa}")
            if not 0 <= order < num_orders:
                raise StructuralError(f"derivative order {order} outside 0..{num_orders - 1}")
            coeff = np.asarray(coeff, dtype=complex).reshape(rm, m)
            point = float(point)
            try:
                j = pts[group].index(point)
            except ValueError:
                pts[group].append(point)
                coeffs[group].append(np.zeros((num_orders, rm, m), dtype=complex))
                j = len(pts[group]) - 1
            coeffs[group][j][order] += coeff
        alphas = [np.array(c, dtype=complex).reshape(len(c), num_orders, rm, m) for c in coeffs]
        return cls(tuple(limit_points), tuple(np.array(p) for p in pts), tuple(alphas))

    @classmethod
    def limit_form(cls, limit_points, coefficients):
        """The unperturbed operator ``sum_l sum_i alpha_i^(l) y^(l)(t_i)``.

        ``coefficients[i]`` has shape ``(n + r, rm, m)`` for limit point ``i``.
        """
        coefficients = [np.asarray(c, dtype=complex) for c in coefficients]
        L, rm, m = coefficients[0].shape
        points = (np.zeros(0),) + tuple(np.array([t]) for t in limit_points)
        alphas = (np.zeros((0, L, rm, m), dtype=complex),) + tuple(c[None] for c in coefficients)
        return cls(tuple(limit_points), points, alphas)

    def apply(self, y: GridFunction) -> np.ndarray:
        """Evaluate the operator on a vector grid function."""
        pts, als = self.flat_terms()
        if pts.size == 0:
            return np.zeros(self.rm, dtype=complex)
        needed = self.num_orders - 1
        if y.order < needed:
            raise OrderError(f"multipoint operator needs derivatives up to {needed}, "
                             f"stack has order {y.order}")
        idx, w = interpolation_weights(y.grid, pts)
        # vals[l, k, :] = y^(l)(pts[k])
        vals = np.einsum("kj,lkj...->lk...", w, y.values[: self.num_orders][:, idx])
        return np.einsum("klrc,lkc...->r...", als, vals)


def _structure_errors(form: MultipointBoundaryForm):
    errors = []
    kappa = len(form.limit_points)
    if len(set(form.limit_points)) != kappa:
        errors.append("limit points must be pairwise distinct")
    if len(form.points) != kappa + 1 or len(form.alphas) != kappa + 1:
        errors.append(f"expected {kappa + 1} point groups (group 0 first), "
                      f"got {len(form.points)} points / {len(form.alphas)} coefficient groups")
        return errors
    shapes = set()
    for i, (p, a) in enumerate(zip(form.points, form.alphas)):
        if p.ndim != 1:
            errors.append(f"group {i}: points must be one-dimensional")
        if a.ndim != 4 or a.shape[0] != p.shape[0]:
            errors.append(f"group {i}: coefficients must have shape (k_i, n+r, rm, m) "
                          f"with k_i = {p.shape[0]}, got {a.shape}")
            continue
        shapes.add(a.shape[1:])
    if len(shapes) > 1:
        errors.append(f"coefficient shapes differ between groups: {sorted(shapes)}")
    return errors


def build_multipoint(form: MultipointBoundaryForm, grid: Grid | None = None,
                     params: SobolevParams | None = None) -> MultipointBoundaryForm:
    """Validate a multipoint form against an interval and problem sizes.

    Raises
    ------
    StructuralError
        Duplicate limit points or coefficient shapes inconsistent with
        ``params`` (``n + r`` orders of ``rm x m`` matrices).
    DomainError
        A limit point or evaluation point outside ``[a, b]``.
    """
    if params is not None:
        expected = (params.n + params.r, params.rm, params.m)
        if form.alphas[0].shape[1:] != expected:
            raise StructuralError(f"multipoint coefficients must have shape (k_i,) + {expected}, "
                                  f"got {form.alphas[0].shape}")
    if grid is not None:
        pts = np.concatenate((np.asarray(form.limit_points, dtype=float),) + form.points)
        outside = pts[(pts < grid.a) | (pts > grid.b)]
        if outside.size:
            raise DomainError(f"point {outside[0]} lies outside [{grid.a}, {grid.b}]")
    return form


def matrix_entry_norm(A) -> float:
    """Sum of the moduli of all entries."""
    return float(np.sum(np.abs(np.asarray(A, dtype=complex))))


@dataclass
class ConditionResult:
    verdict: str
    sequences: dict = field(default_factory=dict)
    kind: str = "limit"
    sequence_verdicts: dict = field(default_factory=dict)


@dataclass
class DConditionReport:
    """Outcome of the five point/coefficient conditions along a schedule."""

    eps: np.ndarray
    conditions: dict
    overall: str
    warnings: list = field(default_factory=list)
    limit_ii: object = None

    def rows(self):
        """Flat ``(condition, label, eps, value, verdict)`` records."""
        for name, res in self.conditions.items():
            for label, seq in res.sequences.items():
                for e, v in zip(self.eps, seq):
                    yield name, label, float(e), float(v), res.sequence_verdicts[label]


def _norms(arr):
    return np.sum(np.abs(arr), axis=(-2, -1))


def check_d_conditions(forms, eps, base: MultipointBoundaryForm, inv_q: float,
                       trend: TrendTest | None = None, grid: Grid | None = None,
                       params: SobolevParams | None = None, probes=None,
                       probe_trend: TrendTest | None = None) -> DConditionReport:
    """Evaluate conditions (d1)-(d5) for ``eps_k -> 0+``.

    Parameters
    ----------
    forms : sequence of MultipointBoundaryForm
        Operator at each ``eps_k``, all with the same group structure.
    eps : array_like
        Strictly decreasing schedule matching ``forms``.
    base : MultipointBoundaryForm
        Limit operator, one point per limit group and an empty group 0.
    inv_q : float
        ``1/q`` for the conjugate exponent; 0 when ``p = 1``.
    trend : TrendTest, optional
        Thresholds for limits and boundedness.
    grid, params, probes : optional
        When ``grid`` and ``params`` are given and (d1)-(d5) all pass, Limit
        Condition (II) is corroborated on the probe functions.

    Returns
    -------
    DConditionReport
    """
    trend = trend or TrendTest()
    eps = np.asarray(eps, dtype=float)
    forms = list(forms)
    if len(forms) != eps.size:
        raise StructuralError("one form per schedule entry is required")
    if not forms:
        raise StructuralError("empty family")
    structure = forms[0].structure()
    for f in forms:
        if f.structure() != structure or f.limit_points != forms[0].limit_points:
            raise StructuralError("group structure changes along the schedule")
    kappa = forms[0].kappa
    if base.kappa != kappa or base.limit_points != forms[0].limit_points:
        raise StructuralError("base form must share the limit points of the family")
    if base.group_sizes != (0,) + (1,) * kappa:
        raise StructuralError("base form must carry one point per limit group and no group 0")
    L = forms[0].num_orders

    # arrays indexed [k, ...] along the schedule
    pts = [np.stack([f.points[i] for f in forms]) for i in range(kappa + 1)]
    als = [np.stack([f.alphas[i] for f in forms]) for i in range(kappa + 1)]

    seqs = {name: {} for name in ("d1", "d2", "d3", "d4", "d5")}
    for i in range(1, kappa + 1):
        ti = forms[0].limit_points[i - 1]
        dist = np.abs(pts[i] - ti)                   # (K, k_i)
        norms = _norms(als[i])                       # (K, k_i, L)
        for j in range(dist.shape[1]):
            seqs["d1"][f"i={i},j={j + 1}"] = dist[:, j]
            lead = norms[:, j, L - 1]
            weight = dist[:, j] ** inv_q if inv_q > 0 else np.ones_like(dist[:, j])
            seqs["d3"][f"i={i},j={j + 1}"] = lead * weight
            for l in range(L - 1):
                seqs["d4"][f"i={i},j={j + 1},l={l}"] = norms[:, j, l] * dist[:, j]
        sums = als[i].sum(axis=1)                    # (K, L, rm, m)
        target = base.alphas[i][0]                   # (L, rm, m)
        for l in range(L):
            seqs["d2"][f"i={i},l={l}"] = _norms(sums[:, l] - target[l])
    norms0 = _norms(als[0])
    for j in range(norms0.shape[1]):
        for l in range(L):
            seqs["d5"][f"j={j + 1},l={l}"] = norms0[:, j, l]

    conditions = {}
    for name, s in seqs.items():
        kind = "bounded" if name == "d3" else "limit"
        test = trend.bounded if kind == "bounded" else trend.limit
        verdicts = {label: test(v) for label, v in s.items()}
        conditions[name] = ConditionResult(conjunction(verdicts.values()), s, kind, verdicts)
    overall = conjunction(r.verdict for r in conditions.values())

    warnings = []
    last = forms[-1]
    for i in range(1, kappa + 1):
        for j, t in enumerate(last.points[i]):
            own = abs(t - last.limit_points[i - 1])
            for i2, other in enumerate(last.limit_points, start=1):
                if i2 != i and abs(t - other) < own:
                    warnings.append(f"point (i={i}, j={j + 1}) is closer to limit point "
                                    f"t_{i2}={other} than to its own t_{i}")

    report = DConditionReport(eps, conditions, overall, warnings)
    if overall == PASS and grid is not None and params is not None:
        from .continuity import check_limit_II_operators
        report.limit_ii = check_limit_II_operators(base, forms, params, grid, probes=probes,
                                                   trend=probe_trend or trend)
    return report


__all__ = [
    "MultipointBoundaryForm", "build_multipoint", "matrix_entry_norm", "check_d_conditions",
    "DConditionReport", "ConditionResult", "PASS", "FAIL", "INCONCLUSIVE",
]
