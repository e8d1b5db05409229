"""Parameter families ``eps -> problem`` and the empirical continuity criterion.

The criterion combines three checks on a family sampled along a decreasing
``eps`` schedule: unique solvability of the limit problem, convergence of the
coefficient matrices in ``W^n_p``, and strong convergence of the boundary
operators witnessed on a fixed set of probe functions.  A convergence
experiment then compares the solution error with the discrepancy of the
limit solution in each perturbed problem.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (NoUniqueSolutionError, SingularFundamentalMatrixError, StructuralError,
                     UnsupportedFormError)
from .funcspace import (Grid, GridFunction, SobolevParams, cumulative_integral,
                        interpolate_samples, lq_norm, sobolev_norm)
from .multipoint import matrix_entry_norm
from .solver import DEFAULT_TOL_SING, analyse, discrepancy, solve_bvp
from .system import CanonicalBoundaryForm, ProblemInstance, apply_boundary_operator
from .trend import FAIL, INCONCLUSIVE, PASS, TrendTest, conjunction, fit_rate

logger = logging.getLogger(__name__)

PROBE_NOTE = ("probe deviations witness strong convergence on a finite basis; "
              "they do not prove it")


def geometric_schedule(eps_start: float = 0.1, ratio: float = 0.5, count: int = 10) -> np.ndarray:
    """``eps_k = eps_start * ratio**k`` for ``k = 0 .. count``."""
    if not eps_start > 0:
        raise StructuralError("eps_start must be positive")
    if not 0 < ratio < 1:
        raise StructuralError("ratio must lie in (0, 1)")
    return eps_start * ratio ** np.arange(count + 1)


@dataclass(frozen=True, eq=False)
class ParamFamily:
    """Base problem at ``eps = 0`` and instances along a decreasing schedule."""

    base: ProblemInstance
    eps: np.ndarray
    instances: tuple
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        eps = np.array(self.eps, dtype=float)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "instances", tuple(self.instances))
        if eps.ndim != 1 or eps.size != len(self.instances):
            raise StructuralError("one instance per schedule entry is required")
        if eps.size and (np.any(eps <= 0) or np.any(np.diff(eps) >= 0)):
            raise StructuralError("epsilon schedule must be positive and strictly decrease")
        for inst in self.instances:
            if inst.params != self.base.params:
                raise StructuralError("all instances must share the Sobolev parameters")
            if inst.grid != self.base.grid:
                raise StructuralError("all instances must share the grid")

    @classmethod
    def from_builder(cls, builder, eps=None, base=None, labels=None, **schedule):
        """Build a family by calling ``builder(eps)`` along the schedule.

        ``base`` defaults to ``builder(0.0)``; pass it explicitly when the
        closed forms are singular at ``eps = 0``.
        """
        eps = geometric_schedule(**schedule) if eps is None else np.asarray(eps, dtype=float)
        base = builder(0.0) if base is None else base
        return cls(base, eps, tuple(builder(float(e)) for e in eps), dict(labels or {}))

    @property
    def params(self) -> SobolevParams:
        return self.base.params

    @property
    def grid(self) -> Grid:
        return self.base.grid


@dataclass
class SequenceCheck:
    label: str
    values: np.ndarray
    verdict: str
    kind: str = "limit"


@dataclass
class CheckSection:
    verdict: str
    checks: list
    note: str = ""


@dataclass
class EstimateRow:
    eps: float
    error: float
    discrepancy: float
    ratio: float
    solved: bool = True
    flag: str = ""


@dataclass
class TwoSidedReport:
    """Error ``||y(0) - y(eps)||_{n+r,p}`` against the discrepancy ``d(eps)``."""

    rows: list
    gamma_lo: float
    gamma_hi: float
    fitted_rate: float
    discrepancy_rate: float
    eps_cut: float = math.inf

    @property
    def band(self) -> float:
        if not (self.gamma_lo > 0 and math.isfinite(self.gamma_hi)):
            return math.nan
        return self.gamma_hi / self.gamma_lo

    @property
    def failed_eps(self) -> list:
        return [row.eps for row in self.rows if not row.solved]


@dataclass
class ContinuityReport:
    cond0: object
    limitI: CheckSection
    limitII: CheckSection
    remark24: dict | None
    overall: str
    experiment: TwoSidedReport | None = None
    instance_norms: np.ndarray | None = None


# -- Limit Condition (I) -------------------------------------------------------------


def check_limit_I(fam: ParamFamily, trend: TrendTest | None = None,
                  min_samples: int = 4) -> CheckSection:
    """Deviations ``||A_k(eps) - A_k(0)||_{n,p}`` for every coefficient."""
    trend = trend or TrendTest()
    if fam.eps.size < min_samples:
        raise StructuralError(f"need at least {min_samples} schedule entries, got {fam.eps.size}")
    P = fam.params
    checks = []
    for k in range(P.r):
        base = fam.base.system.coeffs[k]
        vals = np.array([sobolev_norm(inst.system.coeffs[k] - base, P.n, P.p)
                         for inst in fam.instances])
        checks.append(SequenceCheck(f"A_{k}", vals, trend.limit(vals)))
    return CheckSection(conjunction(c.verdict for c in checks), checks)


# -- Limit Condition (II) ------------------------------------------------------------


def _monomial(grid: Grid, degree: int, order: int) -> np.ndarray:
    t = grid.nodes
    out = np.zeros((order + 1, t.size))
    for j in range(min(order, degree) + 1):
        out[j] = math.perm(degree, j) * t ** (degree - j)
    return out


def _trig(grid: Grid, shift: int, order: int) -> np.ndarray:
    # sin^{(j)}(t) = sin(t + j*pi/2); cos is the shift by one quarter turn
    t = grid.nodes
    return np.array([np.sin(t + (j + shift) * np.pi / 2) for j in range(order + 1)])


def default_probes(grid: Grid, params: SobolevParams, extra_degree: int = 2):
    """Monomials ``t^d`` (``d <= n+r+extra_degree``), ``sin t`` and ``cos t``
    in every component, as ``(label, GridFunction)`` pairs of order ``n+r``."""
    order = params.n + params.r
    scalars = [(f"t^{d}", _monomial(grid, d, order)) for d in range(order + extra_degree + 1)]
    scalars += [("sin t", _trig(grid, 0, order)), ("cos t", _trig(grid, 1, order))]
    probes = []
    for c in range(params.m):
        for label, s in scalars:
            v = np.zeros((order + 1, grid.size, params.m), dtype=complex)
            v[:, :, c] = s
            name = label if params.m == 1 else f"{label} e_{c + 1}"
            probes.append((name, GridFunction(grid, v)))
    return probes


def check_limit_II_operators(base_op, ops, params: SobolevParams, grid: Grid, probes=None,
                             trend: TrendTest | None = None) -> CheckSection:
    """Deviations ``||B(eps) y - B(0) y||`` on each probe ``y``."""
    trend = trend or TrendTest()
    probes = default_probes(grid, params) if probes is None else list(probes)
    checks = []
    for label, y in probes:
        ref = apply_boundary_operator(base_op, y)
        vals = np.array([np.linalg.norm(apply_boundary_operator(op, y) - ref) for op in ops])
        checks.append(SequenceCheck(label, vals, trend.limit(vals)))
    return CheckSection(conjunction(c.verdict for c in checks), checks, PROBE_NOTE)


def check_limit_II_probes(fam: ParamFamily, probes=None,
                          trend: TrendTest | None = None) -> CheckSection:
    """Limit Condition (II) on the probe basis for a problem family."""
    return check_limit_II_operators(fam.base.boundary, [inst.boundary for inst in fam.instances],
                                    fam.params, fam.grid, probes, trend)


# -- canonical forms -----------------------------------------------------------------


def check_remark24(fam: ParamFamily, trend: TrendTest | None = None,
                   num_checkpoints: int = 9) -> dict:
    """The three conditions on canonical forms equivalent to Limit Condition (II).

    ``"2a"``: every ``alpha_k(eps) -> alpha_k(0)``.  ``"2b"``: the ``L_q``
    norms of ``Phi(eps)`` stay bounded (harness heuristic, raw values kept).
    ``"2c"``: primitives ``int_a^t Phi(eps)`` converge at interior checkpoints.
    """
    trend = trend or TrendTest()
    forms = [inst.boundary for inst in fam.instances]
    base = fam.base.boundary
    if not all(isinstance(b, CanonicalBoundaryForm) for b in forms + [base]):
        raise UnsupportedFormError("canonical-form conditions need canonical boundary operators")
    P, grid = fam.params, fam.grid

    a_checks = []
    for k in range(base.num_orders):
        vals = np.array([matrix_entry_norm(f.alphas[k] - base.alphas[k]) for f in forms])
        a_checks.append(SequenceCheck(f"alpha_{k + 1}", vals, trend.limit(vals)))

    norms = np.array([lq_norm(f.phi, 0, P) for f in forms])
    b_checks = [SequenceCheck("||Phi||_q", norms, trend.bounded(norms), "bounded")]

    checkpoints = grid.a + (grid.b - grid.a) * np.arange(1, num_checkpoints + 1) / (num_checkpoints + 1)
    def primitives(phi):
        return interpolate_samples(grid, cumulative_integral(grid, phi.values[0]), checkpoints)
    ref = primitives(base.phi)
    dev = np.array([[matrix_entry_norm(d) for d in primitives(f.phi) - ref] for f in forms])
    c_checks = [SequenceCheck(f"t={t:.6g}", dev[:, i], trend.limit(dev[:, i]))
                for i, t in enumerate(checkpoints)]

    out = {}
    for name, checks in (("2a", a_checks), ("2b", b_checks), ("2c", c_checks)):
        out[name] = CheckSection(conjunction(c.verdict for c in checks), checks)
    out["2b"].note = "boundedness: max of trailing half <= 2 * median (harness convention)"
    return out


# -- experiments ---------------------------------------------------------------------


def _map(func, items, max_workers):
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]


def _try_solve(inst, tol_sing):
    try:
        return solve_bvp(inst, tol_sing=tol_sing)
    except (NoUniqueSolutionError, SingularFundamentalMatrixError) as exc:
        return exc


def convergence_experiment(fam: ParamFamily, eps_cut: float = math.inf,
                           tol_sing: float = DEFAULT_TOL_SING, min_points: int = 4,
                           max_workers: int | None = None) -> TwoSidedReport:
    """Solve every instance and tabulate error, discrepancy and their ratio.

    ``gamma_lo``/``gamma_hi`` are the extreme ratios over ``eps <= eps_cut``;
    ratios whose discrepancy is at rounding level are left undefined.  Rates
    are log-log slopes over the trailing samples.

    Raises
    ------
    NoUniqueSolutionError
        When the base problem itself is not uniquely solvable.
    """
    P = fam.params
    y0 = solve_bvp(fam.base, tol_sing=tol_sing).y
    scale = 1.0 + sobolev_norm(y0, P.n + P.r, P.p)
    floor = 1e2 * np.finfo(float).eps * scale
    results = _map(lambda inst: _try_solve(inst, tol_sing), fam.instances, max_workers)
    rows = []
    for e, inst, res in zip(fam.eps, fam.instances, results):
        if isinstance(res, Exception):
            rows.append(EstimateRow(float(e), math.nan, math.nan, math.nan, False, "singular"))
            continue
        err = sobolev_norm(y0 - res.y, P.n + P.r, P.p)
        d = discrepancy(inst, y0)
        if d <= floor:
            rows.append(EstimateRow(float(e), err, d, math.nan, True, "undefined ratio"))
        else:
            rows.append(EstimateRow(float(e), err, d, err / d))
    ratios = [r.ratio for r in rows if r.eps <= eps_cut and math.isfinite(r.ratio)]
    gamma_lo = min(ratios) if ratios else math.nan
    gamma_hi = max(ratios) if ratios else math.nan
    ok = [r for r in rows if r.solved]
    eps_ok = [r.eps for r in ok]
    rate_e = fit_rate(eps_ok, [r.error for r in ok], min_points)
    rate_d = fit_rate(eps_ok, [r.discrepancy for r in ok], min_points)
    return TwoSidedReport(rows, gamma_lo, gamma_hi, rate_e, rate_d, eps_cut)


def full_criterion(fam: ParamFamily, probes=None, trend: TrendTest | None = None,
                   tol_sing: float = DEFAULT_TOL_SING, eps_cut: float = math.inf,
                   run_experiment: bool = True, max_workers: int | None = None) -> ContinuityReport:
    """Condition (0), Limit Conditions (I) and (II), and (for canonical forms)
    the equivalent conditions on ``alpha`` and ``Phi``.

    The overall verdict passes only if every part passes.  A passing family
    gets a convergence experiment attached; a family whose limit problem is
    singular gets the norms of the perturbed solutions instead.
    """
    trend = trend or TrendTest()
    P = fam.params
    try:
        cond0 = analyse(fam.base, tol_sing)[3]
    except SingularFundamentalMatrixError as exc:
        logger.warning("base fundamental matrix failed: %s", exc)
        cond0 = None
    limitI = check_limit_I(fam, trend)
    limitII = check_limit_II_probes(fam, probes, trend)
    remark = None
    if all(isinstance(i.boundary, CanonicalBoundaryForm) for i in fam.instances + (fam.base,)):
        remark = check_remark24(fam, trend)
    parts = [PASS if cond0 else FAIL, limitI.verdict, limitII.verdict]
    if remark is not None:
        parts += [s.verdict for s in remark.values()]
    overall = conjunction(parts)
    report = ContinuityReport(cond0, limitI, limitII, remark, overall)
    if overall == PASS and run_experiment:
        report.experiment = convergence_experiment(fam, eps_cut, tol_sing, max_workers=max_workers)
    elif not cond0:
        results = _map(lambda inst: _try_solve(inst, tol_sing), fam.instances, max_workers)
        report.instance_norms = np.array([
            math.nan if isinstance(res, Exception) else sobolev_norm(res.y, P.n + P.r, P.p)
            for res in results])
    return report
