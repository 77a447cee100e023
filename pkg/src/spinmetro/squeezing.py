"""Covariance/commutator matrices and the optimal metrological squeezing parameter.

Operator labels: ``"x"`` is J_x, ``"x2"`` is J_x**2 and ``"xy2"`` is
J_xy**2 = ((J_x + J_y)/sqrt 2)**2.

Two ways to build (V, C) are provided.  :func:`vc_exact` multiplies operators
directly.  :func:`vc_from_moments` uses only the single-direction moments
<J_d^k> (k <= 4) of the 19 measurement directions, through a catalogue of
operator identities.  Every identity is a named entry of :data:`IDENTITIES`,
so it can be checked on its own or replaced.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import MissingDirection, SingularCovariance
from .measurement import DIRECTION_VECTORS, LINEAR_IDS, MomentTable, exact_moments
from .spin import StateVector, collective_operator

SQRT2 = np.sqrt(2.0)
SQRT3 = np.sqrt(3.0)

_AXES = ("x", "y", "z")
PAIRS = ("xy", "yz", "zx")


# --- families ------------------------------------------------------------------------


def _parse_label(label: str):
    """'x' -> ('x', 1); 'xy2' -> ('xy', 2)."""
    if label.endswith("2"):
        d, k = label[:-1], 2
    else:
        d, k = label, 1
    if d not in DIRECTION_VECTORS:
        raise ValueError(f"bad operator label {label!r}")
    return d, k


@dataclass(frozen=True)
class OperatorFamily:
    """Ordered accessible observables; the first three are always J_x, J_y, J_z."""

    name: str
    members: tuple

    def __post_init__(self):
        if tuple(self.members[:3]) != _AXES:
            raise ValueError("the first three members must be x, y, z")
        for m in self.members:
            _parse_label(m)

    @property
    def dim(self) -> int:
        return len(self.members)

    @property
    def needs_all_directions(self) -> bool:
        return self.dim > 3


FAMILIES = {
    "s1": OperatorFamily("s1", ("x", "y", "z")),
    "sexp": OperatorFamily("sexp", ("x", "y", "z", "x2", "y2", "xy2", "yz2")),
    "sexp-main": OperatorFamily("sexp-main", ("x", "y", "z", "x2", "y2", "xy2", "zx2")),
    "s2": OperatorFamily("s2", ("x", "y", "z", "x2", "y2", "z2", "xy2", "yz2", "zx2")),
}


def get_family(name) -> OperatorFamily:
    if isinstance(name, OperatorFamily):
        return name
    try:
        return FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown operator family {name!r}; choose from {sorted(FAMILIES)}") from None


def family_operators(family: OperatorFamily, representation):
    ops = []
    for label in family.members:
        d, k = _parse_label(label)
        op = collective_operator(DIRECTION_VECTORS[d], representation, label=f"J_{d}")
        ops.append(op.power(k))
    return ops


# --- exact oracle --------------------------------------------------------------------


def vc_exact(state: StateVector, family) -> tuple[np.ndarray, np.ndarray]:
    """V_ij = <{S_i,S_j}>/2 - <S_i><S_j> and C_ij = -i<[S_i,S_j]> by direct products."""
    family = get_family(family)
    ops = family_operators(family, state.representation)
    psi = state.amplitudes
    vecs = [op @ psi for op in ops]
    means = np.array([np.vdot(psi, v).real for v in vecs])
    g = np.array([[np.vdot(a, b) for b in vecs] for a in vecs])  # <S_i S_j>
    v = g.real - np.outer(means, means)
    c = 2 * g.imag  # -i(<S_iS_j> - <S_jS_i>) = 2 Im<S_iS_j>
    return (v + v.T) / 2, (c - c.T) / 2


# --- identity catalogue --------------------------------------------------------------


class _Moments:
    """Memoised evaluation context for the identities."""

    def __init__(self, table: MomentTable, identities):
        self._table = table
        self._ids = identities
        self._cache = {}

    def m(self, d, k):
        return self._table.moment(d, k)

    def _eval(self, name):
        if name not in self._cache:
            self._cache[name] = float(self._ids[name](self))
        return self._cache[name]

    def cov(self, a, b):
        name = f"cov({a},{b})"
        if name in self._ids:
            return self._eval(name)
        alt = f"cov({b},{a})"
        if alt in self._ids:
            return self._eval(alt)
        raise KeyError(f"no covariance identity for ({a}, {b})")

    def comm(self, a, b):
        """-i<[a, b]>."""
        if a == b:
            return 0.0
        name = f"comm({a},{b})"
        if name in self._ids:
            return self._eval(name)
        alt = f"comm({b},{a})"
        if alt in self._ids:
            return -self._eval(alt)
        raise KeyError(f"no commutator identity for ({a}, {b})")


def _build_identities() -> dict:
    ids: dict[str, Callable] = {}

    # direct definitions
    for a in _AXES:
        ids[f"cov({a},{a})"] = lambda c, a=a: c.m(a, 2) - c.m(a, 1) ** 2
        ids[f"cov({a},{a}2)"] = lambda c, a=a: c.m(a, 3) - c.m(a, 1) * c.m(a, 2)
        ids[f"cov({a}2,{a}2)"] = lambda c, a=a: c.m(a, 4) - c.m(a, 2) ** 2
        ids[f"comm({a},{a}2)"] = lambda c: 0.0
    for p in PAIRS:
        ids[f"cov({p}2,{p}2)"] = lambda c, p=p: c.m(p, 4) - c.m(p, 2) ** 2

    # linear-linear covariance from the diagonal direction between two axes
    for a, b, p in (("x", "y", "xy"), ("x", "z", "zx"), ("y", "z", "yz")):
        ids[f"cov({a},{b})"] = lambda c, a=a, b=b, p=p: (
            c.m(p, 2) - (c.m(a, 2) + c.m(b, 2)) / 2 - c.m(a, 1) * c.m(b, 1)
        )

    # quadratic-quadratic on axes
    def cov_x2_y2(c):
        return (
            2 * (c.m("xy", 4) + c.m("xyb", 4)) - c.m("x", 4) - c.m("y", 4)
            - 3 * c.m("z", 2) + 2 * c.m("y", 2) + 2 * c.m("x", 2)
        ) / 6 - c.m("x", 2) * c.m("y", 2)

    def cov_x2_z2(c):
        return (
            2 * (c.m("zx", 4) + c.m("zxb", 4)) - c.m("x", 4) - c.m("z", 4)
            - 3 * c.m("y", 2) + 2 * c.m("x", 2) + 2 * c.m("z", 2)
        ) / 6 - c.m("x", 2) * c.m("z", 2)

    def cov_y2_z2(c):
        return (
            2 * (c.m("yz", 4) + c.m("yzb", 4)) - c.m("y", 4) - c.m("z", 4)
            - 3 * c.m("x", 2) + 2 * c.m("y", 2) + 2 * c.m("z", 2)
        ) / 6 - c.m("y", 2) * c.m("z", 2)

    ids["cov(x2,y2)"] = cov_x2_y2
    ids["cov(x2,z2)"] = cov_x2_z2
    ids["cov(y2,z2)"] = cov_y2_z2

    # linear-quadratic on axes: cov(J_a, J_b^2) from third moments along a+-b
    def lin_quad(a, b, p, pb, sign):
        def f(c):
            return (
                SQRT2 * (c.m(p, 3) + sign * c.m(pb, 3)) - c.m(a, 3) + c.m(a, 1) / 2
            ) / 3 - c.m(a, 1) * c.m(b, 2)
        return f

    ids["cov(x,y2)"] = lin_quad("x", "y", "xy", "xyb", +1)
    ids["cov(y,z2)"] = lin_quad("y", "z", "yz", "yzb", +1)
    ids["cov(z,x2)"] = lin_quad("z", "x", "zx", "zxb", +1)
    ids["cov(x,z2)"] = lin_quad("x", "z", "zx", "zxb", -1)
    ids["cov(y,x2)"] = lin_quad("y", "x", "xy", "xyb", -1)
    ids["cov(z,y2)"] = lin_quad("z", "y", "yz", "yzb", -1)

    # linear with a pair-squared sharing an axis: cov(J_a, J_ab^2)
    def lin_pair_same(a, b, p):
        def f(c):
            return (
                (c.m(a, 3) + c.cov(a, f"{b}2")) / 2 + c.cov(b, f"{a}2") - c.m(b, 1) / 4
                + c.m(a, 1) * c.m(b, 2) / 2 + c.m(b, 1) * c.m(a, 2) - c.m(a, 1) * c.m(p, 2)
            )
        return f

    for a, b, p in (("x", "y", "xy"), ("x", "z", "zx"), ("y", "x", "xy"),
                    ("y", "z", "yz"), ("z", "y", "yz"), ("z", "x", "zx")):
        ids[f"cov({a},{p}2)"] = lin_pair_same(a, b, p)

    # linear with the pair-squared on the other two axes
    def triple3(c):
        return (
            3 ** 1.5 * c.m("xyz", 3)
            - 2 ** 1.5 * (c.m("xy", 3) + c.m("yz", 3) + c.m("zx", 3))
            + c.m("x", 3) + c.m("y", 3) + c.m("z", 3)
        ) / 6

    def lin_pair_cross(a, b, d, p):
        def f(c):
            return (
                (c.cov(a, f"{b}2") + c.cov(a, f"{d}2")) / 2 + triple3(c)
                + c.m(a, 1) * (c.m(b, 2) + c.m(d, 2)) / 2 - c.m(a, 1) * c.m(p, 2)
            )
        return f

    ids["cov(x,yz2)"] = lin_pair_cross("x", "y", "z", "yz")
    ids["cov(z,xy2)"] = lin_pair_cross("z", "x", "y", "xy")
    ids["cov(y,zx2)"] = lin_pair_cross("y", "z", "x", "zx")

    # axis-squared with a pair-squared sharing an axis
    def quad_pair_same(a, b, p, pb, pp, ppb, lead, first):
        """``first`` picks the 3/4, -1/sqrt3 pattern (a is the first letter of p)."""
        def f(c):
            d4 = c.m(p, 4) - c.m(pb, 4)
            d4p = c.m(pp, 4) - c.m(ppb, 4)
            mid = (3 * d4 / 4 - d4p / SQRT3) if first else (-d4 / 4 + d4p / SQRT3)
            return (
                (c.m(a, 4) + c.cov(f"{a}2", f"{b}2")) / 2 + mid
                + c.m(a, 2) * c.m(b, 2) / 2 - c.m(a, 2) * c.m(p, 2)
            )
        return f

    ids["cov(x2,xy2)"] = quad_pair_same("x", "y", "xy", "xyb", "xy'", "xyb'", "x", True)
    ids["cov(y2,yz2)"] = quad_pair_same("y", "z", "yz", "yzb", "yz'", "yzb'", "y", True)
    ids["cov(z2,zx2)"] = quad_pair_same("z", "x", "zx", "zxb", "zx'", "zxb'", "z", True)
    ids["cov(x2,zx2)"] = quad_pair_same("x", "z", "zx", "zxb", "zx'", "zxb'", "x", False)
    ids["cov(y2,xy2)"] = quad_pair_same("y", "x", "xy", "xyb", "xy'", "xyb'", "y", False)
    ids["cov(z2,yz2)"] = quad_pair_same("z", "y", "yz", "yzb", "yz'", "yzb'", "z", False)

    # axis-squared with the pair-squared on the other two axes
    def quart_sum(c):
        return (c.m("x", 4) + c.m("y", 4) + c.m("z", 4)) / 12

    def quad_pair_cross(a, b, d, p, flipped, others):
        def f(c):
            return (
                (c.cov(f"{a}2", f"{b}2") + c.cov(f"{a}2", f"{d}2")) / 2
                + 3 * (c.m(flipped, 4) + c.m("xyz", 4)) / 8
                + quart_sum(c)
                + 5 * (2 * c.m(p, 2) - c.m(b, 2) - c.m(d, 2)) / 12
                - (2 * c.m(p, 4) + sum(c.m(o, 4) for o in others)) / 6
                + c.m(a, 2) * (c.m(b, 2) + c.m(d, 2)) / 2 - c.m(a, 2) * c.m(p, 2)
            )
        return f

    ids["cov(x2,yz2)"] = quad_pair_cross("x", "y", "z", "yz", "xbyz", ("xy", "xyb", "zx", "zxb"))
    ids["cov(y2,zx2)"] = quad_pair_cross("y", "z", "x", "zx", "xybz", ("xy", "xyb", "yz", "yzb"))
    ids["cov(z2,xy2)"] = quad_pair_cross("z", "x", "y", "xy", "xyzb", ("yz", "yzb", "zx", "zxb"))

    # pair-squared with pair-squared
    def pair_pair(p, q, shared_flip, quart, others4, third):
        """cov(J_p^2, J_q^2); ``third`` is the pair not involved."""
        a1, a2 = p[0], p[1]
        b1, b2 = q[0], q[1]

        def f(c):
            axes_sq = {a: c.m(a, 2) for a in _AXES}
            s_cov = c.cov("x2", "y2") + c.cov("y2", "z2") + c.cov("x2", "z2")
            s_prod = axes_sq["x"] * axes_sq["y"] + axes_sq["y"] * axes_sq["z"] + axes_sq["z"] * axes_sq["x"]
            t0, t1 = third[0], third[1]
            return (
                (c.cov(f"{a1}2", f"{q}2") + c.cov(f"{a2}2", f"{q}2")
                 + c.cov(f"{b1}2", f"{p}2") + c.cov(f"{b2}2", f"{p}2")) / 2
                - s_cov / 4
                + 3 * (c.m("xyz", 4) + c.m(shared_flip, 4)) / 8
                + sum(w * c.m(a, 4) for a, w in zip(_AXES, quart)) / 12
                - (2 * c.m(third, 4) + sum(c.m(o, 4) for o in others4)) / 6
                - 5 * (2 * c.m(third, 2) - axes_sq[t0] - axes_sq[t1]) / 24
                + ((axes_sq[a1] + axes_sq[a2]) * c.m(q, 2) + (axes_sq[b1] + axes_sq[b2]) * c.m(p, 2)) / 2
                - s_prod / 4
                - c.m(p, 2) * c.m(q, 2)
            )
        return f

    ids["cov(xy2,yz2)"] = pair_pair("xy", "yz", "xybz", (1, -2, 1), ("yz", "yzb", "xy", "xyb"), "zx")
    ids["cov(xy2,zx2)"] = pair_pair("xy", "zx", "xbyz", (-2, 1, 1), ("zx", "zxb", "xy", "xyb"), "yz")
    ids["cov(yz2,zx2)"] = pair_pair("yz", "zx", "xyzb", (1, 1, -2), ("yz", "yzb", "zx", "zxb"), "xy")

    # --- commutators: comm(a,b) = -i<[a,b]> ---
    ids["comm(x,y)"] = lambda c: c.m("z", 1)
    ids["comm(x,z)"] = lambda c: -c.m("y", 1)
    ids["comm(y,z)"] = lambda c: c.m("x", 1)

    def lin_quad_comm(p, b, d):
        return lambda c: 2 * c.m(p, 2) - c.m(b, 2) - c.m(d, 2)

    ids["comm(x,y2)"] = lin_quad_comm("yz", "y", "z")
    ids["comm(x,z2)"] = lin_quad_comm("yzb", "y", "z")
    ids["comm(y,z2)"] = lin_quad_comm("zx", "z", "x")
    ids["comm(y,x2)"] = lin_quad_comm("zxb", "z", "x")
    ids["comm(z,x2)"] = lin_quad_comm("xy", "x", "y")
    ids["comm(z,y2)"] = lin_quad_comm("xyb", "x", "y")

    def comm_x2_y2(c):
        return (
            2 * SQRT3 * c.m("xyz", 3)
            - 4 * SQRT2 * (c.m("xy", 3) + c.m("yz", 3) + c.m("zx", 3)) / 3
            + 2 * (c.m("x", 3) + c.m("y", 3) + c.m("z", 3)) / 3
        )

    ids["comm(x2,y2)"] = comm_x2_y2
    ids["comm(x2,z2)"] = lambda c: -c.comm("x2", "y2")
    ids["comm(y2,z2)"] = lambda c: c.comm("x2", "y2")

    for a, b, p in (("x", "y", "xy"), ("x", "z", "zx"), ("y", "x", "xy"),
                    ("y", "z", "yz"), ("z", "y", "yz"), ("z", "x", "zx")):
        ids[f"comm({a},{p}2)"] = lambda c, a=a, b=b: (-c.comm(b, f"{a}2") + c.comm(a, f"{b}2")) / 2

    for a, b, d in (("x", "y", "z"), ("y", "z", "x"), ("z", "x", "y")):
        ids[f"comm({a},{b}{d}2)" if f"{b}{d}" in PAIRS else f"comm({a},{d}{b}2)"] = (
            lambda c, a=a, b=b, d=d: (c.comm(a, f"{b}2") + c.comm(a, f"{d}2")) / 2 + c.m(d, 2) - c.m(b, 2)
        )

    def quad_pair_comm(a, p, pb, e, sign, other):
        """comm(J_a^2, J_p^2) with third moments along p and its bar partner."""
        def f(c):
            return (
                sign * (2 * SQRT2 * (c.m(p, 3) + (1 if sign > 0 else -1) * c.m(pb, 3)) / 3
                        - 2 * c.m(e, 3) / 3 - c.m(e, 1) / 6)
                + c.comm(f"{a}2", f"{other}2") / 2
            )
        return f

    ids["comm(x2,xy2)"] = quad_pair_comm("x", "zx", "zxb", "z", +1, "y")
    ids["comm(y2,yz2)"] = quad_pair_comm("y", "xy", "xyb", "x", +1, "z")
    ids["comm(z2,zx2)"] = quad_pair_comm("z", "yz", "yzb", "y", +1, "x")
    ids["comm(x2,zx2)"] = quad_pair_comm("x", "xy", "xyb", "y", -1, "z")
    ids["comm(y2,xy2)"] = quad_pair_comm("y", "yz", "yzb", "z", -1, "x")
    ids["comm(z2,yz2)"] = quad_pair_comm("z", "zx", "zxb", "x", -1, "y")

    def quad_pair_cross_comm(a, p1, p1b, p2, p2b, o1, o2):
        def f(c):
            return (
                2 * SQRT2 * (c.m(p1, 3) - c.m(p1b, 3) - c.m(p2, 3) - c.m(p2b, 3)) / 3
                + c.comm(f"{a}2", f"{o1}2") / 2 + c.comm(f"{a}2", f"{o2}2") / 2
            )
        return f

    ids["comm(x2,yz2)"] = quad_pair_cross_comm("x", "zx", "zxb", "xy", "xyb", "y", "z")
    ids["comm(y2,zx2)"] = quad_pair_cross_comm("y", "xy", "xyb", "yz", "yzb", "x", "z")
    ids["comm(z2,xy2)"] = quad_pair_cross_comm("z", "yz", "yzb", "zx", "zxb", "x", "y")

    def comm_xy_yz(c):
        return (
            (c.comm("x2", "yz2") + c.comm("y2", "yz2") - c.comm("y2", "xy2") - c.comm("z2", "xy2")) / 2
            + (-c.comm("x2", "y2") - c.comm("x2", "z2") - c.comm("y2", "z2")) / 4
            + c.cov("y", "z2") + c.cov("y", "x2") - c.m("y", 3) - c.m("y", 1) / 4
            + c.m("y", 1) * (c.m("z", 2) + c.m("x", 2))
        )

    def comm_xy_zx(c):
        return (
            (c.comm("x2", "zx2") + c.comm("y2", "zx2") - c.comm("z2", "xy2") - c.comm("x2", "xy2")) / 2
            + (-c.comm("x2", "z2") - c.comm("y2", "z2") - c.comm("y2", "x2")) / 4
            - c.cov("x", "y2") - c.cov("x", "z2") + c.m("x", 3) + c.m("x", 1) / 4
            - c.m("x", 1) * (c.m("y", 2) + c.m("z", 2))
        )

    def comm_yz_zx(c):
        return (
            (c.comm("y2", "zx2") + c.comm("z2", "zx2") - c.comm("x2", "yz2") - c.comm("z2", "yz2")) / 2
            + (-c.comm("y2", "z2") - c.comm("y2", "x2") - c.comm("z2", "x2")) / 4
            + c.cov("z", "x2") + c.cov("z", "y2") - c.m("z", 3) - c.m("z", 1) / 4
            + c.m("z", 1) * (c.m("x", 2) + c.m("y", 2))
        )

    ids["comm(xy2,yz2)"] = comm_xy_yz
    ids["comm(xy2,zx2)"] = comm_xy_zx
    ids["comm(yz2,zx2)"] = comm_yz_zx
    for p in PAIRS:
        ids[f"comm({p}2,{p}2)"] = lambda c: 0.0
    return ids


IDENTITIES: Mapping[str, Callable] = _build_identities()


def identity_names() -> list[str]:
    return sorted(IDENTITIES)


def _oracle_value(name: str, v: np.ndarray, c: np.ndarray, index: dict) -> float:
    kind, args = name.split("(", 1)
    a, b = args.rstrip(")").split(",")
    i, j = index[a], index[b]
    return float(v[i, j] if kind == "cov" else c[i, j])


def identity_residuals(state: StateVector, identities: Mapping[str, Callable] | None = None) -> dict:
    """|identity(exact moments) - direct operator value| for every identity."""
    identities = IDENTITIES if identities is None else identities
    fam = FAMILIES["s2"]
    v, c = vc_exact(state, fam)
    index = {m: k for k, m in enumerate(fam.members)}
    ctx = _Moments(exact_moments(state), identities)
    out = {}
    for name in identities:
        try:
            val = ctx._eval(name)
        except Exception:  # a broken injected identity is reported, not raised
            val = np.nan
        out[name] = abs(val - _oracle_value(name, v, c, index))
    return out


def vc_from_moments(table: MomentTable, family, identities: Mapping[str, Callable] | None = None):
    """(V, C) reconstructed from single-direction moments only."""
    family = get_family(family)
    identities = IDENTITIES if identities is None else identities
    needed = LINEAR_IDS if not family.needs_all_directions else tuple(DIRECTION_VECTORS)
    missing = [d for d in needed if d not in table]
    if missing:
        raise MissingDirection(f"moment table lacks directions {missing} needed by family {family.name}")
    ctx = _Moments(table, identities)
    n = family.dim
    v = np.zeros((n, n))
    c = np.zeros((n, n))
    for i, a in enumerate(family.members):
        for j in range(i, n):
            b = family.members[j]
            v[i, j] = v[j, i] = ctx.cov(a, b)
            if j > i:
                c[i, j] = ctx.comm(a, b)
                c[j, i] = -c[i, j]
    return v, c


# --- squeezing parameter -------------------------------------------------------------

COND_LIMIT = 1e12


@dataclass
class SqueezeReport:
    family: str
    n_qubits: int
    V: np.ndarray
    C: np.ndarray
    M: np.ndarray
    Mtilde: np.ndarray
    lambda_max: float
    xi2: float
    m_opt: np.ndarray
    n_opt: np.ndarray
    condition_number: float
    flags: list = field(default_factory=list)

    @property
    def xi2_inv(self) -> float:
        return 0.0 if not np.isfinite(self.xi2) else 1.0 / self.xi2

    def to_dict(self, labels=None) -> dict:
        def mat(a):
            return [[float(x) for x in row] for row in np.asarray(a)]

        return {
            "family": self.family,
            "labels": list(labels) if labels is not None else list(get_family(self.family).members),
            "n_qubits": self.n_qubits,
            "V": mat(self.V),
            "C": mat(self.C),
            "M": mat(self.M),
            "Mtilde": mat(self.Mtilde),
            "lambda_max": float(self.lambda_max),
            "xi2": float(self.xi2) if np.isfinite(self.xi2) else None,
            "m_opt": [float(x) for x in self.m_opt],
            "n_opt": [float(x) for x in self.n_opt],
            "condition_number": float(self.condition_number) if np.isfinite(self.condition_number) else None,
            "flags": list(self.flags),
        }

    def to_json(self, path=None, **kw) -> str:
        text = json.dumps(self.to_dict(), indent=2, **kw)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _canonical_sign(vec):
    nz = np.flatnonzero(np.abs(vec) > 1e-12)
    if nz.size and vec[nz[0]] < 0:
        return -vec
    return vec


def _inverse(v, mode):
    """Regularised inverse of a symmetric PSD matrix.

    ``"pinv"`` drops eigenvalues below the floor; ``"tikhonov"`` adds the floor
    to the diagonal.  The floor is 1e-10 * trace(V) / D.
    """
    d = v.shape[0]
    if not np.all(np.isfinite(v)):
        raise SingularCovariance("covariance matrix has non-finite entries")
    tr = float(np.trace(v))
    if tr <= 0:
        raise SingularCovariance("covariance matrix has non-positive trace")
    eps = 1e-10 * tr / d
    w, u = np.linalg.eigh(v)
    wmax = w.max()
    cond = wmax / w.min() if w.min() > 0 else np.inf
    regularised = cond > COND_LIMIT
    if not regularised:
        inv_w = 1.0 / w
    elif mode == "tikhonov":
        inv_w = 1.0 / (np.maximum(w, 0.0) + eps)
    else:
        inv_w = np.where(w > eps, 1.0 / np.where(w > eps, w, 1.0), 0.0)
    return (u * inv_w) @ u.T, cond, regularised


def squeeze_parameter(V, C, n_qubits: int, family="s1", regularization="pinv") -> SqueezeReport:
    """xi^2 = N / lambda_max(M~) with M = C^T V^-1 C and M~ its leading 3x3 block."""
    V = np.asarray(V, dtype=float)
    C = np.asarray(C, dtype=float)
    fam_name = family.name if isinstance(family, OperatorFamily) else str(family)
    flags = []
    vinv, cond, reg = _inverse((V + V.T) / 2, regularization)
    if reg:
        flags.append("regularized")
    m = C.T @ vinv @ C
    m = (m + m.T) / 2
    mt = m[:3, :3]
    w, u = np.linalg.eigh(mt)
    lam = float(w[-1])
    top = np.flatnonzero(np.abs(w - lam) <= 1e-12 * max(1.0, abs(lam)))
    cands = sorted((tuple(np.round(_canonical_sign(u[:, k]), 15)) for k in top))
    n_opt = np.array(cands[0])
    if lam <= 1e-14 * max(1.0, float(np.abs(m).max(initial=0.0))):
        flags.append("NoSensitivity")
        xi2 = np.inf
        lam = max(lam, 0.0)
    else:
        xi2 = n_qubits / lam
    n_pad = np.zeros(V.shape[0])
    n_pad[:3] = n_opt
    m_opt = vinv @ C @ n_pad
    norm = np.linalg.norm(m_opt)
    m_opt = _canonical_sign(m_opt / norm) if norm > 0 else m_opt
    return SqueezeReport(fam_name, int(n_qubits), V, C, m, mt, lam, float(xi2), m_opt, n_opt, float(cond), flags)


def squeezing(state: StateVector, family="s1", regularization="pinv") -> SqueezeReport:
    """Exact-mode convenience wrapper: vc_exact followed by squeeze_parameter."""
    fam = get_family(family)
    v, c = vc_exact(state, fam)
    return squeeze_parameter(v, c, state.n_qubits, fam, regularization)


def hierarchy_scan(states: Sequence[StateVector], families=("s1", "sexp", "s2"), regularization="pinv") -> dict:
    """xi^-2 per family along a trajectory; returns {family: array}."""
    out = {f: np.empty(len(states)) for f in families}
    for t, st in enumerate(states):
        for f in families:
            out[f][t] = squeezing(st, f, regularization).xi2_inv
    return out


def write_hierarchy_csv(path, times, scan: dict, header_comment=None):
    cols = list(scan)
    with open(path, "w") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write(",".join(["t"] + [f"xi2_{family_column(f)}_inv" for f in cols]) + "\n")
        for k, t in enumerate(times):
            fh.write(",".join([repr(float(t))] + [repr(float(scan[f][k])) for f in cols]) + "\n")


def family_column(name):
    return {"s1": "S1", "sexp": "Sexp", "sexp-main": "Sexpmain", "s2": "S2"}.get(name, name)


def warn_if_regularized(report: SqueezeReport):
    if "regularized" in report.flags:
        warnings.warn(f"covariance matrix regularised (condition number {report.condition_number:.3g})", stacklevel=2)
