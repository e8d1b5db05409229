"""Experiment configuration files and construction of problems from them.

Configurations are JSON objects.  Coefficients, right-hand sides, boundary
coefficients, points and ``c`` are closed-form expressions in ``t`` and
``eps`` (see :mod:`sobolev_bvp.expr`); numbers are accepted wherever an
expression is.  See the README for the full key reference.
"""

from __future__ import annotations

import ast
import json
import math
import re
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import expr as ex
from .continuity import ParamFamily, geometric_schedule
from .errors import ConfigError
from .funcspace import Grid, GridFunction, SobolevParams, make_grid_function
from .multipoint import MultipointBoundaryForm
from .system import CanonicalBoundaryForm, DifferentialSystem, ProblemInstance

COMMANDS = ("solve", "condition0", "continuity", "estimate", "multipoint-check")
TOP_KEYS = {"command", "interval", "grid", "n", "p", "m", "r", "coefficients", "rhs",
            "boundary", "c", "base", "epsilon", "tolerances", "eps_cut", "output"}
PROBLEM_KEYS = {"coefficients", "rhs", "boundary", "c"}
EPS_KEYS = {"start", "ratio", "count", "schedule"}
TOL_KEYS = {"sing", "solve", "trend", "consistency"}


@dataclass(frozen=True)
class Term:
    group: int
    point: str
    order: int
    coeff: tuple  # rm x m expressions


@dataclass(frozen=True)
class RowsBoundary:
    """One linear functional per row, e.g. ``"y(0) - 2*y'(b)"``."""

    rows: tuple


@dataclass(frozen=True)
class CanonicalBoundary:
    alphas: tuple  # (n+r) x rm x m
    phi: tuple     # rm x m


@dataclass(frozen=True)
class MultipointBoundary:
    limit_points: tuple
    terms: tuple


@dataclass(frozen=True)
class ProblemSpec:
    coefficients: tuple  # r x m x m
    rhs: tuple           # m
    boundary: object
    c: tuple             # rm


@dataclass(frozen=True)
class Tolerances:
    sing: float = 1e-8
    solve: float = 1e-6
    trend: float = 1e-3
    consistency: float = 1e-6


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    interval: tuple
    grid: int
    n: int
    p: float
    m: int
    r: int
    problem: ProblemSpec
    base: ProblemSpec | None = None
    eps_start: float = 0.1
    eps_ratio: float = 0.5
    eps_count: int = 10
    eps_schedule: tuple | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    eps_cut: float = math.inf
    output: str | None = None

    @property
    def params(self) -> SobolevParams:
        return SobolevParams(self.n, self.p, self.m, self.r)

    @property
    def grid_obj(self) -> Grid:
        return Grid(self.interval[0], self.interval[1], self.grid)

    @property
    def schedule(self) -> np.ndarray:
        if self.eps_schedule is not None:
            return np.array(self.eps_schedule, dtype=float)
        return geometric_schedule(self.eps_start, self.eps_ratio, self.eps_count)


# -- parsing ---------------------------------------------------------------------------


def _expr_text(v, where, errors):
    if isinstance(v, bool) or not isinstance(v, (str, int, float)):
        errors.append(f"{where}: expected an expression, got {json.dumps(v)}")
        return "0"
    text = v if isinstance(v, str) else repr(v)
    try:
        ex.parse(text)
    except ConfigError as exc:
        errors.extend(f"{where}: {e}" for e in exc.errors)
    return text


def _matrix(v, rows, cols, where, errors):
    """Normalise a scalar / flat list / nested list into a rows x cols tuple."""
    if not isinstance(v, list):
        v = [v]
    if rows * cols == 1 and len(v) == 1 and not isinstance(v[0], list):
        v = [[v[0]]]
    elif cols == 1 and all(not isinstance(e, list) for e in v):
        v = [[e] for e in v]
    elif rows == 1 and all(not isinstance(e, list) for e in v):
        v = [v]
    if len(v) != rows or any(not isinstance(row, list) or len(row) != cols for row in v):
        errors.append(f"{where}: expected a {rows}x{cols} matrix")
        return tuple(tuple("0" for _ in range(cols)) for _ in range(rows))
    return tuple(tuple(_expr_text(e, f"{where}[{i}][{j}]", errors) for j, e in enumerate(row))
                 for i, row in enumerate(v))


def _vector(v, size, where, errors):
    if not isinstance(v, list):
        v = [v]
    if len(v) != size or any(isinstance(e, list) for e in v):
        errors.append(f"{where}: expected a list of {size} expressions")
        return tuple("0" for _ in range(size))
    return tuple(_expr_text(e, f"{where}[{i}]", errors) for i, e in enumerate(v))


_PROBE_EPS = 0.0625


def _boundary(v, n, m, r, where, errors):
    rm = r * m
    if isinstance(v, str):
        v = [v]
    if isinstance(v, list):
        if len(v) != rm or not all(isinstance(s, str) for s in v):
            errors.append(f"{where}: expected {rm} boundary row strings")
            return RowsBoundary(tuple("0" for _ in range(rm)))
        for i, s in enumerate(v):
            try:
                # structure only; a generic eps avoids spurious poles at eps = 0
                parse_row(s, m, n + r, 0.0, 1.0, _PROBE_EPS)
            except ConfigError as exc:
                errors.extend(f"{where}[{i}]: {e}" for e in exc.errors)
        return RowsBoundary(tuple(v))
    if not isinstance(v, dict) or len(v) != 1:
        errors.append(f"{where}: expected row strings, {{'canonical': ...}} or {{'multipoint': ...}}")
        return RowsBoundary(tuple("0" for _ in range(rm)))
    kind, body = next(iter(v.items()))
    if kind == "canonical":
        if not isinstance(body, dict) or set(body) - {"alphas", "phi"}:
            errors.append(f"{where}.canonical: keys are 'alphas' and 'phi'")
            body = {} if not isinstance(body, dict) else body
        alphas = body.get("alphas", [])
        if not isinstance(alphas, list) or len(alphas) != n + r:
            errors.append(f"{where}.canonical.alphas: expected {n + r} matrices of shape {rm}x{m}")
            alphas = [0] * (n + r)
        al = tuple(_matrix(a, rm, m, f"{where}.canonical.alphas[{k}]", errors)
                   for k, a in enumerate(alphas))
        phi = _matrix(body.get("phi", 0 if rm * m == 1 else [[0] * m] * rm), rm, m,
                      f"{where}.canonical.phi", errors)
        return CanonicalBoundary(al, phi)
    if kind == "multipoint":
        if not isinstance(body, dict) or set(body) - {"limit_points", "terms"}:
            errors.append(f"{where}.multipoint: keys are 'limit_points' and 'terms'")
            body = {} if not isinstance(body, dict) else body
        lps = body.get("limit_points", [])
        if not isinstance(lps, list):
            errors.append(f"{where}.multipoint.limit_points: expected a list")
            lps = []
        lp = tuple(_expr_text(t, f"{where}.multipoint.limit_points[{i}]", errors)
                   for i, t in enumerate(lps))
        terms = []
        for i, term in enumerate(body.get("terms", [])):
            w = f"{where}.multipoint.terms[{i}]"
            if not isinstance(term, dict) or set(term) - {"group", "point", "order", "coeff"}:
                errors.append(f"{w}: keys are group, point, order, coeff")
                continue
            group, order = term.get("group", 0), term.get("order", 0)
            if not isinstance(group, int) or not 0 <= group <= len(lp):
                errors.append(f"{w}.group: expected an integer in 0..{len(lp)}")
                group = 0
            if not isinstance(order, int) or not 0 <= order < n + r:
                errors.append(f"{w}.order: expected an integer in 0..{n + r - 1}")
                order = 0
            terms.append(Term(group, _expr_text(term.get("point", 0), f"{w}.point", errors),
                              order, _matrix(term.get("coeff", 1), rm, m, f"{w}.coeff", errors)))
        return MultipointBoundary(lp, tuple(terms))
    errors.append(f"{where}: unknown boundary kind '{kind}'")
    return RowsBoundary(tuple("0" for _ in range(rm)))


def _problem(d, n, m, r, where, errors, fallback=None):
    def get(key):
        if key in d:
            return d[key], True
        if fallback is not None:
            return None, False
        errors.append(f"missing key '{where}{key}'")
        return None, False

    out = {}
    v, ok = get("coefficients")
    if ok:
        if not isinstance(v, list) or len(v) != r:
            errors.append(f"{where}coefficients: expected {r} matrices A_0..A_{r - 1}")
            v = [0] * r
        out["coefficients"] = tuple(_matrix(a, m, m, f"{where}coefficients[{k}]", errors)
                                    for k, a in enumerate(v))
    v, ok = get("rhs")
    if ok:
        out["rhs"] = _vector(v, m, f"{where}rhs", errors)
    v, ok = get("boundary")
    if ok:
        out["boundary"] = _boundary(v, n, m, r, f"{where}boundary", errors)
    v, ok = get("c")
    if ok:
        out["c"] = _vector(v, r * m, f"{where}c", errors)
    if fallback is not None:
        return replace(fallback, **out)
    if len(out) < 4:
        return None
    return ProblemSpec(**out)


def _int(d, key, default, errors, minimum=None):
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int) or (minimum is not None and v < minimum):
        errors.append(f"{key}: expected an integer" + (f" >= {minimum}" if minimum is not None else ""))
        return default
    return v


def _float(v, where, errors, default):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errors.append(f"{where}: expected a number")
        return default
    return float(v)


def config_from_dict(d: dict, command: str | None = None) -> ExperimentConfig:
    """Validate a decoded configuration; collects every error before raising."""
    errors = []
    if not isinstance(d, dict):
        raise ConfigError(["configuration must be a JSON object"])
    for key in sorted(set(d) - TOP_KEYS):
        errors.append(f"unknown key '{key}'")
    cmd = command or d.get("command")
    if cmd not in COMMANDS:
        errors.append(f"command must be one of {', '.join(COMMANDS)}, got {cmd!r}")
    interval = d.get("interval", [0, 1])
    if (not isinstance(interval, list) or len(interval) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in interval)):
        errors.append("interval: expected [a, b]")
        interval = [0, 1]
    elif not interval[1] > interval[0]:
        errors.append("interval: b must exceed a")
    N = d.get("grid", 2000)
    if isinstance(N, bool) or not isinstance(N, int) or N < 2:
        errors.append("grid: expected an integer >= 2")
        N = 2000
    elif N % 2:
        errors.append("grid size must be even")
    n = _int(d, "n", 0, errors, 0)
    m = _int(d, "m", 1, errors, 1)
    r = _int(d, "r", 1, errors, 1)
    p = _float(d.get("p", 2), "p", errors, 2.0)
    if not 1 <= p < math.inf:
        errors.append("p: expected a number in [1, inf)")
        p = 2.0
    problem = _problem(d, n, m, r, "", errors)
    base = None
    if "base" in d:
        b = d["base"]
        if not isinstance(b, dict):
            errors.append("base: expected an object")
        else:
            for key in sorted(set(b) - PROBLEM_KEYS):
                errors.append(f"unknown key 'base.{key}'")
            if problem is not None:
                base = _problem(b, n, m, r, "base.", errors, fallback=problem)

    eps = d.get("epsilon", {})
    start, ratio, count, sched = 0.1, 0.5, 10, None
    if not isinstance(eps, dict):
        errors.append("epsilon: expected an object")
    else:
        for key in sorted(set(eps) - EPS_KEYS):
            errors.append(f"unknown key 'epsilon.{key}'")
        start = _float(eps.get("start", start), "epsilon.start", errors, start)
        ratio = _float(eps.get("ratio", ratio), "epsilon.ratio", errors, ratio)
        count = eps.get("count", count)
        if isinstance(count, bool) or not isinstance(count, int) or count < 0:
            errors.append("epsilon.count: expected an integer >= 0")
            count = 10
        if start <= 0:
            errors.append("epsilon.start must be positive")
        if not 0 < ratio < 1:
            errors.append("epsilon schedule must strictly decrease (ratio in (0, 1))")
        if "schedule" in eps:
            s = eps["schedule"]
            if not isinstance(s, list) or not s or not all(
                    isinstance(x, (int, float)) and not isinstance(x, bool) for x in s):
                errors.append("epsilon.schedule: expected a list of numbers")
            else:
                sched = tuple(float(x) for x in s)
                if any(x <= 0 for x in sched):
                    errors.append("epsilon schedule must be positive")
                if any(b >= a for a, b in zip(sched, sched[1:])):
                    errors.append("epsilon schedule must strictly decrease")
    tol = d.get("tolerances", {})
    tols = Tolerances()
    if not isinstance(tol, dict):
        errors.append("tolerances: expected an object")
    else:
        for key in sorted(set(tol) - TOL_KEYS):
            errors.append(f"unknown key 'tolerances.{key}'")
        vals = {k: _float(tol[k], f"tolerances.{k}", errors, getattr(tols, k))
                for k in TOL_KEYS & set(tol)}
        for k, v in vals.items():
            if not v > 0:
                errors.append(f"tolerances.{k} must be positive")
        tols = replace(tols, **vals)
    eps_cut = d.get("eps_cut", math.inf)
    eps_cut = math.inf if eps_cut is None else _float(eps_cut, "eps_cut", errors, math.inf)
    output = d.get("output")
    if output is not None and not isinstance(output, str):
        errors.append("output: expected a path string")
        output = None
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(cmd, (float(interval[0]), float(interval[1])), N, n, float(p), m, r,
                            problem, base, start, ratio, count, sched, tols, eps_cut, output)


def parse_config(text: str, command: str | None = None) -> ExperimentConfig:
    """Parse JSON configuration text.

    Raises
    ------
    ConfigError
        Listing every validation problem; JSON syntax errors carry line and
        column.
    """
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None
    return config_from_dict(d, command)


def _unparse_problem(spec: ProblemSpec) -> dict:
    b = spec.boundary
    if isinstance(b, RowsBoundary):
        boundary = list(b.rows)
    elif isinstance(b, CanonicalBoundary):
        boundary = {"canonical": {"alphas": [_lists(a) for a in b.alphas], "phi": _lists(b.phi)}}
    else:
        boundary = {"multipoint": {
            "limit_points": list(b.limit_points),
            "terms": [{"group": t.group, "point": t.point, "order": t.order,
                       "coeff": _lists(t.coeff)} for t in b.terms]}}
    return {"coefficients": [_lists(a) for a in spec.coefficients], "rhs": list(spec.rhs),
            "boundary": boundary, "c": list(spec.c)}


def _lists(t):
    return [_lists(e) for e in t] if isinstance(t, tuple) else t


def config_to_dict(cfg: ExperimentConfig) -> dict:
    d = {"command": cfg.command, "interval": list(cfg.interval), "grid": cfg.grid,
         "n": cfg.n, "p": cfg.p, "m": cfg.m, "r": cfg.r}
    d.update(_unparse_problem(cfg.problem))
    if cfg.base is not None:
        d["base"] = _unparse_problem(cfg.base)
    eps = {"start": cfg.eps_start, "ratio": cfg.eps_ratio, "count": cfg.eps_count}
    if cfg.eps_schedule is not None:
        eps["schedule"] = list(cfg.eps_schedule)
    d["epsilon"] = eps
    d["tolerances"] = asdict(cfg.tolerances)
    d["eps_cut"] = None if math.isinf(cfg.eps_cut) else cfg.eps_cut
    if cfg.output is not None:
        d["output"] = cfg.output
    return d


def serialize_config(cfg: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"


# -- boundary rows -----------------------------------------------------------------------

_Y_CALL = re.compile(r"\by(\d*)('*)\(")


def parse_row(text: str, m: int, num_orders: int, a: float, b: float, eps: float = 0.0):
    """Decompose ``"2*y'(0) - y2(b + eps)"`` into ``(component, order, point, coeff)``.

    Components are 1-based and may be omitted when ``m = 1``; ``a`` and ``b``
    name the interval ends.  Only derivative orders below ``num_orders``
    (``n + r``) are allowed.
    """
    def repl(mt):
        comp = mt.group(1) or ("1" if m == 1 else "0")
        return f"__Y({comp}, {len(mt.group(2))}, "

    src = _Y_CALL.sub(repl, text.replace("^", "**"))
    try:
        tree = ast.parse(src, mode="eval").body
    except SyntaxError as exc:
        raise ConfigError([f"syntax error in boundary row '{text}' at column {exc.offset}"]) from None
    terms = []

    def scalar(node):
        for sub in ast.walk(node):
            if isinstance(sub, ast.Call) and isinstance(sub.func, ast.Name) and sub.func.id == "__Y":
                raise ConfigError([f"boundary row '{text}' is not linear in y"])
        return ex.value(ast.unparse(node), eps)

    def walk(node, factor):
        if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub)):
            walk(node.left, factor)
            walk(node.right, factor if isinstance(node.op, ast.Add) else -factor)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            walk(node.operand, -factor if isinstance(node.op, ast.USub) else factor)
        elif isinstance(node, ast.BinOp) and isinstance(node.op, ast.Mult):
            if _has_y(node.left) and not _has_y(node.right):
                walk(node.left, factor * scalar(node.right))
            elif _has_y(node.right) and not _has_y(node.left):
                walk(node.right, factor * scalar(node.left))
            else:
                raise ConfigError([f"boundary row '{text}' is not linear in y"])
        elif isinstance(node, ast.BinOp) and isinstance(node.op, ast.Div) and not _has_y(node.right):
            walk(node.left, factor / scalar(node.right))
        elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "__Y":
            comp, order, point = node.args
            comp, order = comp.value, order.value
            if not 1 <= comp <= m:
                raise ConfigError([f"boundary row '{text}': component must be 1..{m}"
                                   + (" (write y1, y2, ...)" if m > 1 else "")])
            if order >= num_orders:
                raise ConfigError([f"boundary row '{text}': derivative order {order} exceeds "
                                   f"{num_orders - 1}"])
            ptext = re.sub(r"\ba\b", repr(a), re.sub(r"\bb\b", repr(b), ast.unparse(point)))
            terms.append((comp - 1, order, ex.value(ptext, eps).real, factor))
        else:
            raise ConfigError([f"boundary row '{text}': unsupported term '{ast.unparse(node)}'"])

    try:
        walk(tree, 1.0)
    except ConfigError:
        raise
    except Exception as exc:  # malformed calls such as y() or y(1, 2)
        raise ConfigError([f"boundary row '{text}': {exc}"]) from None
    return terms


def _has_y(node) -> bool:
    return any(isinstance(s, ast.Call) and isinstance(s.func, ast.Name) and s.func.id == "__Y"
               for s in ast.walk(node))


# -- building problems -----------------------------------------------------------------


def _stack(entries, grid: Grid, order: int, eps: float, tol: float, shape):
    t = grid.nodes
    vals = ex.array_stack(entries, t, order, eps)
    if not np.all(np.isfinite(vals)):
        raise ConfigError([f"expression evaluates to a non-finite value at eps={eps}"])
    return make_grid_function(grid, order, lambda _t: list(vals), shape=shape, tol=tol)


def build_boundary(spec, cfg: ExperimentConfig, eps: float):
    P, grid = cfg.params, cfg.grid_obj
    rm, m, L = P.rm, P.m, P.n + P.r
    b = spec
    if isinstance(b, RowsBoundary):
        terms = []
        for row, text in enumerate(b.rows):
            for comp, order, point, coef in parse_row(text, m, L, grid.a, grid.b, eps):
                mat = np.zeros((rm, m), dtype=complex)
                mat[row, comp] = coef
                terms.append((0, point, order, mat))
        return MultipointBoundaryForm.from_terms(terms, rm, m, L)
    if isinstance(b, CanonicalBoundary):
        alphas = np.array([ex.array_value(a, eps) for a in b.alphas])
        phi = _stack(b.phi, grid, 0, eps, cfg.tolerances.consistency, (rm, m))
        return CanonicalBoundaryForm(alphas, phi)
    lps = tuple(ex.value(t, eps).real for t in b.limit_points)
    terms = [(t.group, ex.value(t.point, eps).real, t.order, ex.array_value(t.coeff, eps))
             for t in b.terms]
    return MultipointBoundaryForm.from_terms(terms, rm, m, L, lps)


def build_instance(cfg: ExperimentConfig, eps: float = 0.0, base: bool = False) -> ProblemInstance:
    """Problem at ``eps``; ``base=True`` uses the ``base`` overrides if any."""
    spec = cfg.base if base and cfg.base is not None else cfg.problem
    P, grid = cfg.params, cfg.grid_obj
    tol = cfg.tolerances.consistency
    coeffs = [_stack(a, grid, P.n, eps, tol, (P.m, P.m)) for a in spec.coefficients]
    rhs = _stack(spec.rhs, grid, P.n, eps, tol, (P.m,))
    c = np.array([ex.value(v, eps) for v in spec.c], dtype=complex)
    boundary = build_boundary(spec.boundary, cfg, eps)
    return ProblemInstance(DifferentialSystem(P, coeffs, rhs), boundary, c)


def build_family(cfg: ExperimentConfig) -> ParamFamily:
    eps = cfg.schedule
    base = build_instance(cfg, 0.0, base=True)
    return ParamFamily(base, eps, tuple(build_instance(cfg, float(e)) for e in eps))


def build_multipoint_family(cfg: ExperimentConfig):
    """Forms along the schedule and the limit form for the (d1)-(d5) checks."""
    if not isinstance(cfg.problem.boundary, MultipointBoundary):
        raise ConfigError(["multipoint-check needs a structured 'multipoint' boundary"])
    eps = cfg.schedule
    forms = [build_boundary(cfg.problem.boundary, cfg, float(e)) for e in eps]
    base_spec = cfg.base.boundary if cfg.base is not None else cfg.problem.boundary
    if not isinstance(base_spec, MultipointBoundary):
        raise ConfigError(["base.boundary must be a structured 'multipoint' boundary"])
    raw = build_boundary(base_spec, cfg, 0.0)
    if raw.group_sizes == (0,) + (1,) * raw.kappa and all(
            p[0] == t for p, t in zip(raw.points[1:], raw.limit_points)):
        base = raw
    else:
        # limit coefficients: group sums at eps = 0, group 0 dropped
        base = MultipointBoundaryForm.limit_form(raw.limit_points,
                                                 [a.sum(axis=0) for a in raw.alphas[1:]])
    return eps, forms, base
