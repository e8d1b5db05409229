"""Constructed families with known verdicts, shared by several test modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sobolev_bvp.config import build_family, config_from_dict
from sobolev_bvp.continuity import geometric_schedule
from sobolev_bvp.funcspace import Grid, SobolevParams
from sobolev_bvp.multipoint import MultipointBoundaryForm

# twelve halvings from 0.1 reach 2.4e-5, enough for e_K <= 1e-3 e_0 at rate one
CORPUS_SCHEDULE = {"start": 0.1, "ratio": 0.5, "count": 12}


def family_config(**kw):
    d = {"command": "continuity", "interval": [0, 1], "grid": 2000, "n": 0, "p": 2,
         "m": 1, "r": 1, "epsilon": dict(CORPUS_SCHEDULE)}
    d.update(kw)
    return config_from_dict(d)


# name -> (config kwargs, expected overall, the violated condition or None)
CONTINUITY_CORPUS = {
    "decay-rate": (dict(coefficients=["1+eps"], rhs="0", boundary="y(a)", c=[1]),
                   "pass", None),
    "second-order-moving-derivative": (
        dict(r=2, coefficients=["1+eps", "eps*t"], rhs="sin(t)",
             boundary=["y(0)", "y(1) + eps*y'(0.5)"], c=[1, 0]),
        "pass", None),
    "system-moving-point": (
        dict(m=2, n=1, coefficients=[[["eps", "-1"], ["1", "eps*t"]]], rhs=["0", "eps*cos(t)"],
             boundary=["y1(eps)", "y2(eps)"], c=[1, 0]),
        "pass", None),
    "canonical-integral-term": (
        dict(coefficients=["2"], rhs="1",
             boundary={"canonical": {"alphas": [1], "phi": "eps*(1+t)"}}, c=["1+eps"]),
        "pass", None),
    "resonant-base": (
        dict(r=2, coefficients=["pi^2+eps", "0"], rhs="0", boundary=["y(0)", "y(1)"], c=[0, 1]),
        "fail", "condition0"),
    "oscillating-coefficient": (
        dict(coefficients=["1+sin(t/eps)"], rhs="0", boundary="y(a)", c=[1],
             base={"coefficients": ["1"]}),
        "fail", "limitI"),
    "wandering-point": (
        dict(coefficients=["1"], rhs="0", boundary="y(0.5+0.25*sin(1/eps))", c=[1],
             base={"boundary": "y(0.5)"}),
        "fail", "limitII"),
}


def continuity_family(name):
    kw = CONTINUITY_CORPUS[name][0]
    return build_family(family_config(**kw))


# -- multipoint -------------------------------------------------------------------


@dataclass
class MultipointCase:
    name: str
    params: SobolevParams
    limit_points: tuple
    terms: object          # eps -> list of (group, point, order, coeff)
    base: list             # per limit point, (n+r, rm, m) coefficients
    expected: dict         # condition -> verdict

    def forms(self, eps):
        P = self.params
        return [MultipointBoundaryForm.from_terms(self.terms(float(e)), P.rm, P.m, P.n + P.r,
                                                  self.limit_points) for e in eps]

    def base_form(self):
        return MultipointBoundaryForm.limit_form(self.limit_points, self.base)


def _col(*entries):
    return np.array(entries, dtype=complex).reshape(-1, 1)


def _stack(L, **orders):
    """(L, rm, m) coefficient stack from ``l<k>=matrix`` keywords."""
    first = next(iter(orders.values()))
    out = np.zeros((L,) + np.shape(first), dtype=complex)
    for key, v in orders.items():
        out[int(key[1:])] = v
    return out


ALL_PASS = {f"d{k}": "pass" for k in range(1, 6)}


def _expect(**fails):
    out = dict(ALL_PASS)
    out.update(fails)
    return out


P10 = SobolevParams(0, 2.0, 1, 1)
MULTIPOINT_CORPUS = [
    MultipointCase("static", P10, (0.3,),
                   lambda e: [(1, 0.3, 0, 1.0)], [np.ones((1, 1, 1))], _expect()),
    MultipointCase("d3-growth-compensated", P10, (0.5,),
                   lambda e: [(1, 0.5 + e, 0, e ** -0.25), (1, 0.5, 0, 1 - e ** -0.25)],
                   [np.ones((1, 1, 1))], _expect()),
    MultipointCase("d4-violation", SobolevParams(0, 2.0, 1, 2), (0.0, 1.0),
                   lambda e: [(1, 0.0, 0, _col(1, 0)),
                              (2, 1.0 - e, 0, _col(0, 1 / e)),
                              (2, 1.0, 0, _col(0, 1 - 1 / e))],
                   [_stack(2, l0=_col(1, 0)), _stack(2, l0=_col(0, 1))],
                   _expect(d4="fail")),
    MultipointCase("d5-violation", P10, (0.5,),
                   lambda e: [(1, 0.5, 0, 1.0), (0, 0.5 + 0.25 * np.sin(1 / e), 0, 1.0)],
                   [np.ones((1, 1, 1))], _expect(d5="fail")),
    MultipointCase("p1-degenerate-d3", SobolevParams(0, 1.0, 1, 1), (0.5,),
                   lambda e: [(1, 0.5 + e, 0, e ** -0.5), (1, 0.5, 0, 1 - e ** -0.5)],
                   [np.ones((1, 1, 1))], _expect(d3="fail")),
    MultipointCase("bounded-d3-product", SobolevParams(0, 1.25, 1, 1), (0.5,),
                   lambda e: [(1, 0.5 + e, 0, e ** -0.2), (1, 0.5, 0, 1 - e ** -0.2)],
                   [np.ones((1, 1, 1))], _expect()),
    MultipointCase("d1-violation", P10, (0.5,),
                   lambda e: [(1, 0.6, 0, 1.0)], [np.ones((1, 1, 1))], _expect(d1="fail")),
    MultipointCase("d2-violation", P10, (0.5,),
                   lambda e: [(1, 0.5 + e, 0, 2.0)], [np.ones((1, 1, 1))], _expect(d2="fail")),
    MultipointCase("vanishing-free-group", P10, (0.5,),
                   lambda e: [(1, 0.5, 0, 1.0), (0, 0.5 + 0.25 * np.sin(1 / e), 0, e)],
                   [np.ones((1, 1, 1))], _expect()),
    MultipointCase("derivative-orders", SobolevParams(1, 2.0, 1, 2), (0.0, 0.25),
                   lambda e: [(1, e, 0, _col(1, 0)), (1, e, 1, _col(0.5, 0)),
                              (2, 0.25 - e, 0, _col(0, 1)),
                              (2, 0.25 - e, 2, _col(0, e ** -0.125)),
                              (2, 0.25, 2, _col(0, -e ** -0.125))],
                   [_stack(3, l0=_col(1, 0), l1=_col(0.5, 0)), _stack(3, l0=_col(0, 1))],
                   _expect()),
    MultipointCase("system-two-limits", SobolevParams(0, 2.0, 2, 1), (0.2, 0.8),
                   lambda e: [(1, 0.2 + e, 0, [[1, 0], [0, 0]]),
                              (2, 0.8 - e * e, 0, [[0, 0], [0, 1]]),
                              (0, 0.5, 0, e * np.eye(2))],
                   [np.array([[[1, 0], [0, 0]]]), np.array([[[0, 0], [0, 1]]])], _expect()),
    MultipointCase("growing-free-group", P10, (0.5,),
                   lambda e: [(1, 0.5, 0, 1.0), (0, 0.9, 0, 1 / e)],
                   [np.ones((1, 1, 1))], _expect(d5="fail")),
]


def corpus_schedule():
    return geometric_schedule(CORPUS_SCHEDULE["start"], CORPUS_SCHEDULE["ratio"],
                              CORPUS_SCHEDULE["count"])


GRID = Grid(0.0, 1.0, 2000)
