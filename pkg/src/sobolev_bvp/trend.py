"""Finite-sample stand-ins for limits, boundedness and convergence rates.

A limit ``v(eps) -> 0`` as ``eps -> 0+`` cannot be observed from finitely
many samples.  The helpers below classify a sequence sampled along a
decreasing ``eps`` schedule as ``"pass"``, ``"fail"`` or ``"inconclusive"``
with explicit, configurable thresholds.  They are evidence, not proof.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class TrendTest:
    """Thresholds for the limit and boundedness heuristics.

    Attributes
    ----------
    tol : float
        The last sample must fall below ``tol`` for a limit to pass, and a
        tail whose median stays at or above ``tol`` counts as stagnation.
    decrease_factor : float
        Required overall decrease ``v[0] / v[-1]`` for a passing limit.
    growth_factor : float
        ``v[-1] > growth_factor * max(v[0], tol)`` is reported as divergence.
    bound_factor : float
        A sequence is treated as bounded when the maximum of its trailing
        half does not exceed ``bound_factor`` times the overall median.
    zero_tol : float
        Sequences entirely below this level are identically zero.
    """

    tol: float = 1e-3
    decrease_factor: float = 2.0
    growth_factor: float = 10.0
    bound_factor: float = 2.0
    zero_tol: float = 1e-12

    def limit(self, values) -> str:
        """Classify ``values -> 0`` along the schedule."""
        v = np.abs(np.asarray(values, dtype=float))
        if v.size == 0:
            return PASS
        if not np.all(np.isfinite(v)):
            return FAIL
        first, last = v[0], v[-1]
        if np.max(v) <= self.zero_tol:
            return PASS
        if last < self.tol and first >= self.decrease_factor * last:
            return PASS
        if last > self.growth_factor * max(first, self.tol):
            return FAIL
        tail = v[v.size // 2:]
        if np.median(tail) >= self.tol:
            return FAIL
        return INCONCLUSIVE

    def bounded(self, values) -> str:
        """Classify ``values = O(1)`` along the schedule."""
        v = np.abs(np.asarray(values, dtype=float))
        if v.size == 0:
            return PASS
        if not np.all(np.isfinite(v)):
            return FAIL
        if np.max(v) <= self.zero_tol:
            return PASS
        tail = v[v.size // 2:]
        return PASS if np.max(tail) <= self.bound_factor * np.median(v) else FAIL


def conjunction(verdicts) -> str:
    """``fail`` dominates ``inconclusive`` dominates ``pass``."""
    verdicts = list(verdicts)
    if FAIL in verdicts:
        return FAIL
    if INCONCLUSIVE in verdicts:
        return INCONCLUSIVE
    return PASS


def fit_rate(eps, values, min_points: int = 4) -> float:
    """Least-squares slope of ``log(values)`` against ``log(eps)``.

    Uses the trailing half of the samples (at least ``min_points``); zero or
    non-finite samples are dropped.  Returns NaN when fewer than two usable
    points remain.
    """
    eps = np.asarray(eps, dtype=float)
    values = np.abs(np.asarray(values, dtype=float))
    k = max(min_points, eps.size // 2 + 1)
    eps, values = eps[-k:], values[-k:]
    keep = (values > 0) & np.isfinite(values) & (eps > 0)
    if np.count_nonzero(keep) < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(eps[keep]), np.log(values[keep]), 1)
    return float(slope)
