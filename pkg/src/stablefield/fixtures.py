"""Builtin fields: i.i.d. coordinate fields, the Z^3 flip action, the
irrational rotation of R by Z^2, and moving averages."""

from __future__ import annotations

import numpy as np

from .actions import (
    CoordinateProjection,
    CoordinateShiftAction,
    DirectSumField,
    FieldSpec,
    IndicatorBox,
    LatticeShiftAction,
    LatticeTable,
    TranslationAction,
)
from .measures import gaussian_rho, pareto_rho
from .quadnum import SQRT2


def gauss_iid(alpha: float = 1.0, d: int = 1) -> FieldSpec:
    """Coordinates i.i.d. standard normal under a probability control measure."""
    return FieldSpec(alpha, CoordinateShiftAction(gaussian_rho(), d), CoordinateProjection(),
                     name="gauss-iid")


def pareto_iid(alpha: float = 1.5, theta: float = 3.0, d: int = 2) -> FieldSpec:
    """Coordinates i.i.d. Pareto(theta) with theta > alpha."""
    if theta <= alpha:
        raise ValueError("need theta > alpha for a finite alpha-th moment")
    return FieldSpec(alpha, CoordinateShiftAction(pareto_rho(theta), d), CoordinateProjection(),
                     name="pareto-iid")


def z3_flip(alpha: float = 1.2) -> FieldSpec:
    """``phi_(i,j,k)(x, y) = (x + i + 2j, (-1)^k y)`` with ``f = 1_[0,1] x {1}``."""
    action = TranslationAction([[1, 2, 0]], flip_parity=[[0, 0, 1]])
    return FieldSpec(alpha, action, IndicatorBox(0, 1, sheet=(1,)), name="z3-flip")


def z3_flip_lattice(alpha: float = 1.2) -> FieldSpec:
    """The z3-flip field through the identification ``R = [0,1) x Z``.

    Labels ``0, 1`` stand for the sheets ``y = +1, -1``; the unit interval
    is integrated out into the label weight.
    """
    action = LatticeShiftAction((1, 1), [[1, 2, 0]], label_perms=[[0, 1], [0, 1], [1, 0]])
    return FieldSpec(alpha, action, LatticeTable({(0, (0,)): 1}), name="z3-flip-lattice")


def irrational_rot(alpha: float = 1.2) -> FieldSpec:
    """``phi_(i,j)(x) = x + i + j sqrt 2`` on R with ``f = 1_[0,1]``."""
    action = TranslationAction([[1, SQRT2]])
    return FieldSpec(alpha, action, IndicatorBox(0, 1), name="irrational-rot")


def moving_avg(alpha: float = 1.2, d: int = 2, support=None) -> FieldSpec:
    """Mixed moving average on ``{w} x Z^d`` with a finitely supported kernel.

    ``support`` maps sites to kernel values; default ``f = 1_{0}``.
    """
    if support is None:
        support = {(0,) * d: 1.0}
    action = LatticeShiftAction((1,), np.eye(d, dtype=np.int64))
    table = LatticeTable({(0, tuple(site)): v for site, v in support.items()})
    return FieldSpec(alpha, action, table, name="moving-avg")


def two_component(alpha: float = 1.2, mixture=None) -> DirectSumField:
    """Independent sum of the irrational rotation (conservative) and the
    moving average (dissipative) on a disjoint union of state spaces."""
    return DirectSumField([irrational_rot(alpha), moving_avg(alpha, 2)], mixture=mixture,
                          name="two-component")


BUILTIN = {
    "gauss-iid": gauss_iid,
    "pareto-iid": pareto_iid,
    "z3-flip": z3_flip,
    "irrational-rot": irrational_rot,
    "moving-avg": moving_avg,
}

DEFAULT_ALPHA = {
    "gauss-iid": 1.0,
    "pareto-iid": 1.5,
    "z3-flip": 1.2,
    "irrational-rot": 1.2,
    "moving-avg": 1.2,
}


def builtin(name: str, alpha: float | None = None):
    try:
        factory = BUILTIN[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(BUILTIN)}") from None
    return factory(DEFAULT_ALPHA[name] if alpha is None else alpha)
