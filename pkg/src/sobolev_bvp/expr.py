"""Closed-form coefficient expressions in ``t`` and ``eps``.

The grammar is deliberately small: numbers (including complex literals such
as ``2j`` or ``3i``), the names ``t``, ``eps``, ``pi``, ``e`` and ``i``, the
operators ``+ - * / ^`` (``**`` is accepted too) and the functions
``sin cos tan exp log sqrt``.  Text is parsed with :mod:`ast` under a node
whitelist, then handed to sympy for exact differentiation, so derivative
stacks never involve finite differences.
"""

from __future__ import annotations

import ast
import re
from functools import lru_cache

import numpy as np
import sympy as sp

from .errors import ConfigError

T, EPS = sp.symbols("t eps", real=True)
FUNCTIONS = {
    "sin": sp.sin, "cos": sp.cos, "tan": sp.tan,
    "exp": sp.exp, "log": sp.log, "sqrt": sp.sqrt,
}
NAMES = {"t": T, "eps": EPS, "pi": sp.pi, "e": sp.E, "i": sp.I}
_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a ** b,
}
_IMAG_SUFFIX = re.compile(r"(?<![\w.])(\d+\.?\d*(?:[eE][+-]?\d+)?)i\b")


def _prepare(text: str) -> str:
    text = text.replace("^", "**")
    return _IMAG_SUFFIX.sub(r"\1j", text)


def _to_sympy(node):
    if isinstance(node, ast.Expression):
        return _to_sympy(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)) \
            and not isinstance(node.value, bool):
        v = node.value
        if isinstance(v, complex):
            return sp.nsimplify(v.real) + sp.nsimplify(v.imag) * sp.I
        return sp.nsimplify(v) if isinstance(v, float) else sp.Integer(v)
    if isinstance(node, ast.Name):
        if node.id in NAMES:
            return NAMES[node.id]
        raise ValueError(f"unknown name '{node.id}'")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_to_sympy(node.left), _to_sympy(node.right))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _to_sympy(node.operand)
        return -inner if isinstance(node.op, ast.USub) else inner
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in FUNCTIONS and len(node.args) == 1 and not node.keywords:
        return FUNCTIONS[node.func.id](_to_sympy(node.args[0]))
    raise ValueError(f"unsupported syntax '{ast.unparse(node)}'")


@lru_cache(maxsize=4096)
def parse(text) -> sp.Expr:
    """Parse expression text into a sympy expression.

    Raises
    ------
    ConfigError
        With the column of a syntax error or the offending construct.
    """
    if isinstance(text, (int, float)):
        text = repr(text)
    if not isinstance(text, str):
        raise ConfigError([f"expression must be a string or number, got {type(text).__name__}"])
    try:
        tree = ast.parse(_prepare(text.strip()), mode="eval")
    except SyntaxError as exc:
        raise ConfigError([f"syntax error in expression '{text}' at column {exc.offset}"]) from None
    try:
        return sp.sympify(_to_sympy(tree))
    except ValueError as exc:
        raise ConfigError([f"in expression '{text}': {exc}"]) from None


@lru_cache(maxsize=4096)
def _derivative_funcs(text: str, order: int):
    expr = parse(text)
    funcs = []
    for _ in range(order + 1):
        funcs.append(sp.lambdify((T, EPS), expr, modules="numpy"))
        expr = sp.diff(expr, T)
    return tuple(funcs)


def derivative_stack(text, t, order: int, eps: float = 0.0) -> np.ndarray:
    """Samples of the expression and its ``t``-derivatives up to ``order``.

    Returns an array of shape ``(order + 1, len(t))``.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty((order + 1, t.size), dtype=complex)
    with np.errstate(all="ignore"):
        for k, f in enumerate(_derivative_funcs(_key(text), order)):
            out[k] = np.broadcast_to(np.asarray(f(t, eps), dtype=complex), t.shape)
    return out


def value(text, eps: float = 0.0, t: float | None = None) -> complex:
    """Scalar value; expressions depending on ``t`` need ``t``."""
    expr = parse(_key(text))
    if T in expr.free_symbols and t is None:
        raise ConfigError([f"expression '{text}' depends on t where a constant is required"])
    with np.errstate(all="ignore"):
        return complex(sp.lambdify((T, EPS), expr, modules="numpy")(0.0 if t is None else t, eps))


def depends_on(text, name: str) -> bool:
    return NAMES[name] in parse(_key(text)).free_symbols


def _key(text):
    return repr(text) if isinstance(text, (int, float)) else text


def array_stack(entries, t, order: int, eps: float = 0.0) -> np.ndarray:
    """Stack for a nested list of expressions (scalar, vector or matrix).

    Returns shape ``(order + 1, len(t), *shape)``.
    """
    arr = np.asarray(entries, dtype=object)
    shape = arr.shape
    flat = [derivative_stack(e, t, order, eps) for e in arr.reshape(-1)]
    if not flat:
        return np.zeros((order + 1, np.size(t)) + shape, dtype=complex)
    stacked = np.stack(flat, axis=-1)
    return stacked.reshape(stacked.shape[:2] + shape)


def array_value(entries, eps: float = 0.0) -> np.ndarray:
    arr = np.asarray(entries, dtype=object)
    return np.array([value(e, eps) for e in arr.reshape(-1)], dtype=complex).reshape(arr.shape)
