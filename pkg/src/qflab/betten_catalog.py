"""Betten's explicit 4-dimensional translation planes as section pairs and spreads.

Every family is exposed twice: as a spread set (the matrices written in the
family's own parameters) and as a section pair (a(r,t), b(r,t)).  For the
families whose section is only known through substitution variables the
pair is evaluated by walking along the ray of direction (cos t, -sin t):
the published formulas give r, a and b as functions of the spread's first
column, and r grows monotonically along the ray.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd
from typing import Callable, Mapping

import numpy as np

from . import linalg_core as lc
from ._roots import monotone_root
from .section_model import SectionPair, _broadcast_ab, complex_section
from .spread_sets import SpreadFamily, SpreadPiece, complex_spread

FAMILY_IDS = ("P11a", "P11b", "P11c", "P12a", "P12b", "P13a", "P13b", "P13c",
              "P14", "P16a", "P16b", "RemarkF", "P17a", "P17b")


class UnknownFamilyError(KeyError):
    pass


class ParameterError(ValueError):
    def __init__(self, family_id, violations):
        super().__init__(f"{family_id}: " + "; ".join(violations))
        self.violations = list(violations)


@dataclass(frozen=True)
class Constraint:
    text: str
    check: Callable


@dataclass(frozen=True)
class FamilySpec:
    family_id: str
    params: Mapping = field(default_factory=dict)
    f: Callable | None = None


@dataclass(frozen=True)
class FamilyInstance:
    spec: FamilySpec
    section: SectionPair
    spread: SpreadFamily
    expected: dict


@dataclass(frozen=True)
class FamilyDef:
    family_id: str
    summary: str
    defaults: dict
    constraints: tuple
    build: Callable        # params -> (SectionPair, SpreadFamily)
    expected: Callable     # params -> verdict dict


# --- helpers ----------------------------------------------------------------

def _grid(xs, ys):
    return np.stack(np.meshgrid(xs, ys, indexing="ij"), -1).reshape(-1, 2)


def _split(th):
    th = np.asarray(th, dtype=float)
    return th[..., 0], th[..., 1]


def _rot_std(phi):
    """[[cos, -sin], [sin, cos]] as used by the rotation-type spreads."""
    c, s = np.cos(phi), np.sin(phi)
    return lc.mat(c, -s, s, c)


def _implicit_section(name, params, col_data):
    """Section pair from col_data(x, y) -> (r, a, b), given on first columns."""

    def ab(u, t):
        u, t = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(t, dtype=float))
        c, s = np.cos(t), np.sin(t)
        # t = k pi should land exactly on the horizontal axis
        s = np.where(np.abs(s) < 1e-15, 0.0, s)

        def logr(ll, c, s):
            lam = np.exp(ll)
            return np.log(col_data(lam * c, -lam * s)[0])

        lu = np.log(u)
        ll = monotone_root(logr, lu, guess=lu, args=(c, s))
        lam = np.exp(ll)
        _, a, b = col_data(lam * c, -lam * s)
        return a, b

    def hint(x, y):
        return col_data(x, y)[0], np.arctan2(-y, x)

    return SectionPair(ab=ab, name=name, params=dict(params), polar_hint=hint)


def _lift_angle(tau, c, d):
    """Continuous angle of (cos tau + c sin tau, d sin tau), zero at tau = 0.

    The vector changes sign under tau -> tau + pi, so the lift gains
    pi*sign(d) per half turn.
    """
    tau = np.asarray(tau, dtype=float)
    k = np.floor(tau / np.pi)
    t0 = tau - k * np.pi
    return np.arctan2(d * np.sin(t0), np.cos(t0) + c * np.sin(t0)) + k * np.pi * np.sign(d)


# --- complex field ----------------------------------------------------------

def _build_complex(P):
    return complex_section(), complex_spread()


# --- P11a -------------------------------------------------------------------

def _build_p11a(P):
    w = P["w"]

    def ab(u, t):
        s, c = np.sin(t), np.cos(t)
        inner = s > 0  # spread branch v < 0
        a = np.where(inner, 1.0 / np.sqrt(c * c + s * s / w), 1.0)
        b = np.where(inner, a * (1 - w) / w * s * c, 0.0)
        return a, b


    sec = SectionPair(ab=_broadcast_ab(ab), name="P11a", params=dict(P))

    def matrix(th):
        s, v = _split(th)
        return lc.mat(s, np.where(v >= 0, -v, -v / w), v, s)

    g = np.linspace(-4, 4, 17)
    spread = SpreadFamily("P11a", (SpreadPiece(matrix, _grid(g, g)),), dict(P),
                          sample_params=lambda: {"main": _grid(np.linspace(-3, 3, 10), np.linspace(-3.1, 2.9, 20))})
    return sec, spread


# --- P11b -------------------------------------------------------------------

def _p11b_col(x, y):
    al, be = x, y
    n = np.hypot(al, be)
    br1 = al >= -0.75 * be * be
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = al + be * be
        a1 = n / r1
        b1 = be * (1 - al) / n
        aa = np.abs(al)
        r2 = aa / 3
        a2 = 3 * n / aa
        b2 = be * n / aa + be * al / (3 * aa * n)
    return np.where(br1, r1, r2), np.where(br1, a1, a2), np.where(br1, b1, b2)


def _p11b_matrix(th):
    al, be = _split(th)
    br1 = al >= -0.75 * be * be
    return lc.mat(al, np.where(br1, -al * be - be ** 3, al * be / 3), be,
                  np.where(br1, al + be * be, al / 9 + be * be / 3))


def _column_family(name, P, matrix, lim=4.0):
    g = np.linspace(-lim, lim, 17)
    return SpreadFamily(name, (SpreadPiece(matrix, _grid(g, g)),), dict(P),
                        sample_params=lambda: {"main": _grid(np.linspace(-3, 3, 10), np.linspace(-3.1, 2.9, 20))})


def _build_p11b(P):
    return _implicit_section("P11b", P, _p11b_col), _column_family("P11b", P, _p11b_matrix)


# --- P11c, P12a -------------------------------------------------------------

def _p11c_col(x, y):
    v, s = x, y
    D = s ** 4 / 3 + s * s * v + v * v
    n2 = s * s + v * v
    return np.sqrt(D), np.sqrt(n2 / D), (-s ** 3 * v / 3 + s ** 3 + s * v) / np.sqrt(D * n2)


def _p11c_matrix(th):
    s, v = _split(th)
    return lc.mat(v, -s ** 3 / 3, s, s * s + v)


def _p12a_col(x, y):
    v, s = x, y
    D = s * s * v + v * v + s ** 4 / 3 + s * s
    n2 = s * s + v * v
    return np.sqrt(D), np.sqrt(n2 / D), (s ** 3 - s ** 3 * v / 3) / np.sqrt(D * n2)


def _p12a_matrix(th):
    s, v = _split(th)
    return lc.mat(v, -s ** 3 / 3 - s, s, s * s + v)


def _build_p11c(P):
    return _implicit_section("P11c", P, _p11c_col), _column_family("P11c", P, _p11c_matrix)


def _build_p12a(P):
    return _implicit_section("P12a", P, _p12a_col), _column_family("P12a", P, _p12a_matrix)


# --- P12b -------------------------------------------------------------------

def _build_p12b(P):
    g = P["gamma"]

    def col(x, y):
        # y = g(cos u - 1) - u is decreasing in u
        u = monotone_root(lambda u: u - g * (np.cos(u) - 1), -np.asarray(y, dtype=float), guess=-np.asarray(y, dtype=float))
        v = x + g * np.sin(u)
        N = v * v + u * u + 2 * g * g * (1 - np.cos(u)) - 2 * v * g * np.sin(u) - 2 * g * u * np.cos(u) + 2 * g * u
        D = v * v + u * u - 2 * g * g + 2 * g * g * np.cos(u)
        b = (-2 * u * g * np.sin(u) + 2 * v * g * np.cos(u) - 2 * v * g) / (np.sqrt(N) * np.sqrt(D))
        return np.sqrt(D), np.sqrt(N / D), b

    def matrix(th):
        u, v = _split(th)
        return lc.mat(v - g * np.sin(u), u + g * (np.cos(u) - 1), g * (np.cos(u) - 1) - u, v + g * np.sin(u))

    gr = np.linspace(-6, 6, 25)
    spread = SpreadFamily("P12b", (SpreadPiece(matrix, _grid(gr, gr)),), dict(P),
                          sample_params=lambda: {"main": _grid(np.linspace(-3, 3, 10), np.linspace(-3.1, 2.9, 20))})
    return _implicit_section("P12b", P, col), spread


# --- P13a -------------------------------------------------------------------

def _build_p13a(P):
    s_, w, z, p, q = P["s"], P["w"], P["z"], P["p"], P["q"]
    e1, e2, e3 = (1 - s_) / (1 + s_), 1 / (1 + s_), (2 + s_) / (1 + s_)

    def col(x, y):
        al, be = x, y
        n2 = al * al + be * be
        mb = np.abs(be)
        pos = be >= 0
        D = np.where(pos, al * al + z * al * mb ** e2 - w * mb ** (2 * e2),
                     al * al + q * al * mb ** e2 + p * mb ** (2 * e2))
        num = np.where(pos, w * al * mb ** e1 + al * be + z * mb ** e3,
                       p * al * mb ** e1 + al * be - q * mb ** e3)
        return np.sqrt(D), np.sqrt(n2 / D), num / np.sqrt(n2 * D)

    def matrix(th):
        al, be = _split(th)
        mb = np.abs(be)
        pos = be >= 0
        return lc.mat(al, np.where(pos, w, p) * mb ** e1, be, np.where(pos, z, q) * mb ** e2 + al)

    return _implicit_section("P13a", P, col), _column_family("P13a", P, matrix)


# --- P13b -------------------------------------------------------------------

def _build_p13b(P):
    w, z, p, q = P["w"], P["z"], P["p"], P["q"]

    def _log_abs(be):
        return np.log(np.where(be == 0, 1.0, np.abs(be)))

    def col(x, y):
        al, be = x, y
        n2 = al * al + be * be
        L = _log_abs(be)
        pos = be >= 0
        D = np.where(pos,
                     al * al + z * al * be - w * be * be + 2 * al * be * L + z * be * be * L + be * be * L * L,
                     al * al - q * al * be + p * be * be + (2 * al * be - q * be * be) * L + be * be * L * L)
        num = np.where(pos,
                       (w + 1) * al * be + z * be * be - z * al * be * L - al * be * L * L + 2 * be * be * L,
                       (1 - p) * al * be - q * be * be + (2 * be * be + q * al * be) * L - al * be * L * L)
        return np.sqrt(D), np.sqrt(n2 / D), num / np.sqrt(n2 * D)

    def matrix(th):
        al, be = _split(th)
        L = _log_abs(be)
        pos = be >= 0
        m12 = np.where(pos, w * be - z * be * L - be * L * L, -p * be - be * L * L + q * be * L)
        m22 = np.where(pos, al + z * be + 2 * be * L, -q * be + al + 2 * be * L)
        return lc.mat(al, m12, be, m22)

    return _implicit_section("P13b", P, col), _column_family("P13b", P, matrix)


# --- P13c -------------------------------------------------------------------

def _build_p13c(P):
    k, w, z, p, q = P["k"], P["w"], P["z"], P["p"], P["q"]

    def qpos(l):
        c, s = np.cos(l), np.sin(l)
        return c * c - z * s * c - w * s * s

    def qneg(l):
        c, s = np.cos(l), np.sin(l)
        return c * c + q * s * c + p * s * s

    def col(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        ay = np.where(y == 0, 1.0, np.abs(y))
        pos = y > 0
        # |beta| Q(ln|beta|/k) = |y|, increasing in ln|beta| under the constraints
        lb = monotone_root(lambda lb, sg: lb + np.log(np.where(sg > 0, qpos(lb / k), qneg(lb / k))),
                           np.log(ay), guess=np.log(ay), args=(np.where(pos, 1.0, -1.0),))
        be = np.where(pos, np.exp(lb), -np.exp(lb))
        l = lb / k
        c, s = np.cos(l), np.sin(l)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            u = np.where(pos, x / be + (w + 1) * s * c - z * s * s, (p - 1) * s * c - q * s * s - x / be)
            Np = u * u + s * s * (w * w + 2 * z * u + z * z) + c * c - (2 * u * w + 2 * u + 2 * z) * s * c
            Dp = u * u + u * z - w
            bp = (c * c * (2 * u * w + 2 * u + 2 * z) + s * c * (1 - w * w - z * z - 2 * u * z) - (u + z + u * w)) / np.sqrt(Np * Dp)
            Nn = u * u + s * s * (q * q + 2 * q * u + p * p) + c * c + (2 * u + 2 * q - 2 * u * p) * s * c
            Dn = u * u + u * q + p
            bn = (s * c * (1 - 2 * u * q - p * p - q * q) + s * s * (2 * q + 2 * u - 2 * u * p) + (u * p - q - u)) / np.sqrt(Nn * Dn)
            r = np.abs(be) * np.sqrt(np.where(pos, Dp, Dn))
            a = np.sqrt(np.where(pos, Np / Dp, Nn / Dn))
            b = np.where(pos, bp, bn)
        axis = y == 0  # the scalar component beta*I
        return (np.where(axis, np.abs(x), r), np.where(axis, 1.0, a), np.where(axis, 0.0, b))

    def matrix(th):
        # solver coordinates (v, beta) with v = beta*u keep columns near the
        # horizontal axis (beta -> 0, |u| -> inf) well conditioned
        v, be = _split(th)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(be == 0, 0.0, v / np.where(be == 0, 1.0, be))
        pos = be > 0
        with np.errstate(divide="ignore"):
            l = np.log(np.where(be == 0, 1.0, np.abs(be))) / k
        c, s = np.cos(l), np.sin(l)
        mp = lc.mat(u - (w + 1) * s * c + z * s * s, w * c * c - z * s * c - s * s,
                    c * c - z * s * c - w * s * s, z * c * c + (w + 1) * s * c + u)
        mn = lc.mat((p - 1) * s * c - q * s * s - u, q * s * c - p * c * c - s * s,
                    c * c + q * s * c + p * s * s, (1 - p) * s * c - q * c * c - u)
        return be[..., None, None] * np.where(pos[..., None, None], mp, mn)

    def scalar(th):
        be = np.asarray(th, dtype=float)[..., 0]
        z0 = np.zeros_like(be)
        return lc.mat(be, z0, z0, be)

    bes = np.concatenate([-np.geomspace(8, 1e-4, 15), np.geomspace(1e-4, 8, 15)])
    seeds = _grid(np.linspace(-8, 8, 17), bes)
    pieces = (SpreadPiece(matrix, seeds),
              SpreadPiece(scalar, np.linspace(-4, 4, 17)[:, None], label="scalar"))

    def sample():
        b = np.concatenate([-np.geomspace(3, 0.1, 9), np.geomspace(0.1, 3, 9)])
        return {"main": _grid(np.linspace(-3, 3, 10), b),
                "scalar": np.linspace(-2.05, 1.95, 20)[:, None]}

    return _implicit_section("P13c", P, col), SpreadFamily("P13c", pieces, dict(P), sample_params=sample)


# --- P14 --------------------------------------------------------------------

def _build_p14(P):
    w, z, p, q = P["w"], P["z"], P["p"], P["q"]

    def col(x, y):
        al, be = x, y
        n2 = al * al + be * be
        h = al + be * be / 2
        pos = h >= 0
        hp = np.where(pos, h, 0.0) ** 1.5
        hn = np.where(pos, 0.0, -h) ** 1.5
        Dp = al * be * be / (2 * q) + be ** 4 / (3 * q) + h * (al + (q - 1) / q * be * be) - p * be / q * hp
        Np = (p / q * al * hp - p / q * n2 + (1 - q) / q * be * al * al + al * be ** 3 / (6 * q)
              - be ** 3 * al / 2 + be ** 3 / (2 * q) + be ** 3 / 2 + al * be)
        Dn = al * be * be / (2 * q) + be ** 4 / (3 * q) - h * (al * z / q + (z + 1) * be * be / q) - w * be / q * hn
        Nn = (w / q * al * hn + p / q * (-al * al - be * be) + ((z + 1) / q * al * be - z * be / q) * h
              - al * be ** 3 / (3 * q) + be ** 3 / (2 * q))
        D = np.where(pos, Dp, Dn)
        N = np.where(pos, Np, Nn)
        return np.sqrt(D), np.sqrt(n2 / D), N / np.sqrt(n2 * D)

    def matrix(th):
        al, be = _split(th)
        h = al + be * be / 2
        pos = h >= 0
        hp = np.where(pos, h, 0.0) ** 1.5
        hn = np.where(pos, 0.0, -h) ** 1.5
        m12 = np.where(pos, -p / q * al + p / q * hp + (1 - q) / q * be * h - be ** 3 / (3 * q),
                       -p / q * al + w / q * hn + (z + 1) / q * be * h - be ** 3 / (3 * q))
        m22 = np.where(pos, -p / q * be + be * be / (2 * q) + h, -p / q * be + be * be / (2 * q) - z / q * h)
        return lc.mat(al, m12, be, m22)

    return _implicit_section("P14", P, col), _column_family("P14", P, matrix)


# --- P16a, P16b, f-planes ---------------------------------------------------

def _rotation_family(name, P, inner, first_range):
    """Spreads R(phi) * inner(s) with parameters (s, phi)."""

    def matrix(th):
        s, phi = _split(th)
        return _rot_std(phi) @ inner(s)

    seeds = _grid(np.linspace(*first_range, 17), lc.TWO_PI * np.arange(16) / 16)
    lo, hi = first_range
    return SpreadFamily(name, (SpreadPiece(matrix, seeds),), dict(P),
                        sample_params=lambda: {"main": _grid(np.linspace(0.5 * lo, 0.5 * hi, 10),
                                                             lc.TWO_PI * np.arange(20) / 20)})


def _build_p16a(P):
    w, c = P["w"], P["c"]
    ex = (1 - w) / (1 + w)

    def ab(u, t):
        return u ** ex, c * (u ** (-ex) - u ** ex)

    def inner(ls):
        s = np.exp(ls)
        z0 = np.zeros_like(s)
        return lc.mat(s, c * (s ** w - s), z0, s ** w)


    return (SectionPair(ab=_broadcast_ab(ab), name="P16a", params=dict(P)),
            _rotation_family("P16a", P, inner, (-4.0, 4.0)))


def _build_p16b(P):
    d = P["d"]

    def ab(u, t):
        return np.ones_like(u), np.log(u) / d

    def inner(s):
        e = np.exp(s)
        return lc.mat(e, e * s / d, np.zeros_like(s), e)


    return (SectionPair(ab=_broadcast_ab(ab), name="P16b", params=dict(P)),
            _rotation_family("P16b", P, inner, (-4.0, 4.0)))


def _poly(coeffs):
    coeffs = tuple(float(c) for c in coeffs)

    def f(u):
        u = np.asarray(u, dtype=float)
        return sum(c * u ** (i + 1) for i, c in enumerate(coeffs))
    return f


def _remark_f(P, f):
    return f if f is not None else _poly(P["coeffs"])


def _build_remarkf(P, f=None):
    f = _remark_f(P, f)
    f1 = float(f(1.0))

    def ab(r, t):
        # r^2 = u f(u) / f(1) with u f(u) increasing
        lr = np.log(r)
        lu = monotone_root(lambda lu: lu + np.log(f(np.exp(lu)) / f1), 2 * lr, guess=lr)
        u = np.exp(lu)
        return np.sqrt(u * f1 / f(u)), np.zeros_like(u)

    def inner(lu):
        u = np.exp(lu)
        z0 = np.zeros_like(u)
        return lc.mat(u, z0, z0, f(u) / f1)


    return (SectionPair(ab=_broadcast_ab(ab), name="RemarkF", params=dict(P)),
            _rotation_family("RemarkF", P, inner, (-4.0, 4.0)))


# --- P17a -------------------------------------------------------------------

def _build_p17a(P):
    p, q, c, d = P["p"], P["q"], P["c"], P["d"]
    E = np.exp(q * np.pi)

    def parts(s, t):
        e = np.exp(q * t - p * s)
        cs, ss, ct, st = np.cos(s), np.sin(s), np.cos(t), np.sin(t)
        al = e * (cs * ct + c * st * cs + d * st * ss)
        be = e * (d * cs * st - ss * ct - c * ss * st)
        ga = e * (d * ct * ss - st * cs + c * ct * cs)
        de = e * (d * ct * cs + st * ss - c * ct * ss)
        return e, al, be, ga, de

    def st_matrix(s, t):
        _, al, be, ga, de = parts(s, t)
        return lc.mat(al + E, (ga - c * al) / d, be, (de - c * be + d * E) / d) / (1 + E)

    def st_of_col(x, y):
        """Invert (alpha, beta) = e^(qt-ps) R(s) (cos t + c sin t, d sin t)."""
        al = (1 + E) * np.asarray(x, dtype=float) - E
        be = (1 + E) * np.asarray(y, dtype=float)
        al, be = np.broadcast_arrays(al, be)
        rho = np.hypot(al, be)
        psi = np.arctan2(be, al)

        def H(t, psi, lrho):
            th = _lift_angle(t, c, d)
            vn = np.hypot(np.cos(t) + c * np.sin(t), d * np.sin(t))
            return q * t - p * (th - psi) + np.log(vn) - lrho

        lrho = np.log(np.where(rho == 0, 1.0, rho))
        t = monotone_root(H, 0.0, guess=np.zeros_like(rho), args=(psi, lrho))
        s = _lift_angle(t, c, d) - psi
        return s, t, rho == 0

    def col(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        s, t, w_pt = st_of_col(x, y)
        e = np.exp(q * t - p * s)
        cs, ss, ct, st = np.cos(s), np.sin(s), np.cos(t), np.sin(t)
        D = (e * e * ((ct + c * st) ** 2 + d * d * st * st) + E * E
             + 2 * e * E * (cs * ct + c * cs * st + d * ss * st))
        den = d * e * e + d * E * E + e * E * (2 * d * cs * ct + (c * c + 1 + d * d) * ss * st)
        a = np.sqrt(d * D / den)
        r = np.hypot(x, y) / a
        # the published b(r,u) does not reproduce this spread; read b off the matrix
        _, _, _, b = lc.decompose_arrays(st_matrix(s, t))
        return (np.where(w_pt, E / (1 + E), r), np.where(w_pt, 1.0, a), np.where(w_pt, 0.0, b))

    def matrix(th):
        s, t = _split(th)
        return st_matrix(s, t)

    def point(th):
        n = np.asarray(th).shape[:-1]
        return np.broadcast_to(E / (1 + E) * np.eye(2), n + (2, 2)).copy()

    g = np.linspace(-lc.TWO_PI, lc.TWO_PI, 25)
    pieces = (SpreadPiece(matrix, _grid(g, g)), SpreadPiece(point, np.zeros((1, 0)), label="W"))
    def sample():
        # keep e^(qt-ps) within a factor e^1.5 of E so members do not crowd
        # around the point E/(1+E) I; (s, t) and (s + pi, t + pi) coincide
        # when p = q, so t stays in [0, pi)
        sig = q * np.pi + np.linspace(-1.5, 1.5, 10)
        if p == 0:
            return {"main": _grid(lc.TWO_PI * (np.arange(10) + 0.5) / 10, np.pi + np.linspace(-1.5, 1.5, 20) / q)}
        t = np.pi * (np.arange(20) + 0.5) / 20
        S, Tt = np.meshgrid(sig, t, indexing="ij")
        return {"main": np.stack([(q * Tt - S) / p, Tt], -1).reshape(-1, 2)}

    spread = SpreadFamily("P17a", pieces, dict(P), sample_params=sample)
    sec = _implicit_section("P17a", P, col)
    return sec, spread


# --- P17b -------------------------------------------------------------------

def _build_p17b(P):
    m, n, c, d = int(P["m"]), int(P["n"]), P["c"], P["d"]
    slope = n * np.sign(d) - m          # total turning per unit parameter
    period = lc.TWO_PI / abs(slope)

    def raw(tau):
        nt, mt = n * tau, m * tau
        a11 = np.cos(nt) * np.cos(mt) + c * np.sin(nt) * np.cos(mt) + d * np.sin(nt) * np.sin(mt)
        a12 = d * np.sin(nt) * np.cos(mt) - np.cos(nt) * np.sin(mt) - c * np.sin(nt) * np.sin(mt)
        a21 = d * np.cos(nt) * np.sin(mt) - np.sin(nt) * np.cos(mt) + c * np.cos(nt) * np.sin(mt)
        a22 = d * np.cos(nt) * np.cos(mt) + np.sin(nt) * np.sin(mt) - c * np.cos(nt) * np.sin(mt)
        return lc.mat(a11, -c / d * a11 + a21 / d, a12, -c / d * a12 + a22 / d)

    # for c != 0 the member at tau = 0 is not the identity; right-multiplying by
    # its inverse keeps the first columns and normalizes the spread
    fix = lc.inv(raw(0.0))

    def unit(tau):
        return raw(tau) @ fix

    def tau_of_dir(x, y):
        psi = np.mod(np.arctan2(y, x), lc.TWO_PI)
        target = psi if slope > 0 else psi - lc.TWO_PI
        F = lambda tau: _lift_angle(n * tau, c, d) - m * tau
        return monotone_root(F, target, guess=target / slope)

    def col(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        tau = tau_of_dir(x, y)
        mu = unit(tau)
        s = np.hypot(x, y) / np.hypot(mu[..., 0, 0], mu[..., 1, 0])
        if c == 0:
            nt = n * tau
            sq = np.sqrt((np.cos(nt) + c * np.sin(nt)) ** 2 + d * d * np.sin(nt) ** 2)
            b = (np.sin(nt) * np.cos(nt) * (d * d - 1 - c * c) - c * np.sin(nt) ** 2 * (d * d + 1 + c * c)) / (d * sq)
            return s, sq, b
        _, _, a, b = lc.decompose_arrays(mu)
        return s * np.sqrt(lc.det(mu)), a, b

    def matrix(th):
        ls, tau = _split(th)
        return np.exp(ls)[..., None, None] * unit(tau)

    seeds = _grid(np.linspace(-4, 4, 17), period * np.arange(24) / 24)
    spread = SpreadFamily("P17b", (SpreadPiece(matrix, seeds),), dict(P), sample_params=lambda: {
        "main": _grid(np.linspace(-2.4, 2.4, 10), period * np.arange(20) / 20)})
    return _implicit_section("P17b", P, col), spread


# --- constraints and verdicts -----------------------------------------------

def _is_int(x):
    return abs(x - round(x)) < 1e-9


def _p17_AB(P):
    c, d = P["c"], P["d"]
    if d == 0:
        return np.nan, np.nan
    return ((d - 1) ** 2 + c * c) / (4 * d), ((d + 1) ** 2 + c * c) / (4 * d)


def _p17a_case(P):
    p, q, d = P["p"], P["q"], P["d"]
    if p == q and q > 0 and -1 <= d < 0:
        return True
    if q > 0 and d > 0 and q != p:
        k = (q + p) / (q - p)
        return _is_int(k) and round(k) >= 1
    return False


def _p17b_case(P):
    m, n, d = P["m"], P["n"], P["d"]
    if not (_is_int(m) and _is_int(n)):
        return False
    m, n = int(round(m)), int(round(n))
    if gcd(m, n) != 1:
        return False
    return ((m == n == 1 and -1 <= d < 0) or (m >= 1 and n == m + 1 and d > 0)
            or (m >= 1 and m % 2 == 1 and n == m + 2 and d > 0))


def _verdict(dec, qs, so2, kern, proper=True):
    return {"decomposable": dec, "quasi_simple": qs, "contains_so2": so2,
            "kernel_is_diagonal": kern, "proper": proper}


def _p17b_expected(P):
    if P["c"] == 0 and abs(P["d"]) == 1:
        # a11 = cos((n-m)t): the spread is {s R((n-m)t)}, the complex field
        return _verdict(True, False, True, True, proper=False)
    # for n - m odd the member at t = pi is -M(0), so the kernel is diagonal;
    # otherwise nothing is stated
    kern = True if (int(P["n"]) - int(P["m"])) % 2 else None
    return _verdict(True, False, False, kern)


_NOT_DEC = lambda P: _verdict(False, True, False, True)

_DEFS = {}


def _register(d: FamilyDef):
    _DEFS[d.family_id] = d


_register(FamilyDef("complex", "field of complex numbers (a = 1, b = 0)", {}, (), _build_complex,
                    lambda P: _verdict(True, False, True, True, proper=False)))
_register(FamilyDef("P11a", "GL2 acting reducibly; one-parameter family Q_w", {"w": 2.0},
                    (Constraint("w > 1", lambda P: P["w"] > 1),), _build_p11a,
                    lambda P: _verdict(True, False, False, True)))
_register(FamilyDef("P11b", "GL2 acting irreducibly; single plane", {}, (), _build_p11b,
                    lambda P: _verdict(False, True, False, False)))
_register(FamilyDef("P11c", "solvable complement; single plane", {}, (), _build_p11c, _NOT_DEC))
_register(FamilyDef("P12a", "single plane with one-dimensional kernel of the action on S", {}, (), _build_p12a, _NOT_DEC))
_register(FamilyDef("P12b", "one-parameter family E_gamma", {"gamma": 1.0},
                    (Constraint("0 < |gamma| <= 1", lambda P: 0 < abs(P["gamma"]) <= 1),), _build_p12b, _NOT_DEC))
_register(FamilyDef("P13a", "two fixed 1-subspaces of S", {"s": 0.5, "w": -1.0, "z": 0.0, "p": 1.0, "q": 0.0},
                    (Constraint("0 < s < 1", lambda P: 0 < P["s"] < 1),
                     Constraint("z^2 + 4w(1-s^2) <= 0", lambda P: P["z"] ** 2 + 4 * P["w"] * (1 - P["s"] ** 2) <= 0),
                     Constraint("q^2 - 4p(1-s^2) <= 0", lambda P: P["q"] ** 2 - 4 * P["p"] * (1 - P["s"] ** 2) <= 0)),
                    _build_p13a, _NOT_DEC))
_register(FamilyDef("P13b", "one fixed 1-subspace of S", {"w": -2.0, "z": 0.0, "p": 2.0, "q": 0.0},
                    (Constraint("(z/2)^2 <= -w-1", lambda P: (P["z"] / 2) ** 2 <= -P["w"] - 1),
                     Constraint("(q/2)^2 <= p-1", lambda P: (P["q"] / 2) ** 2 <= P["p"] - 1)),
                    _build_p13b, _NOT_DEC))
_register(FamilyDef("P13c", "transitive on the 1-subspaces of S",
                    {"k": 2.0, "w": -0.3, "z": 0.1, "p": 0.4, "q": 0.1},
                    (Constraint("k != 0", lambda P: P["k"] != 0),
                     Constraint("(4+k^2)(z^2+(w+1)^2) <= k^2(1-w)^2",
                                lambda P: (4 + P["k"] ** 2) * (P["z"] ** 2 + (P["w"] + 1) ** 2) <= P["k"] ** 2 * (1 - P["w"]) ** 2),
                     Constraint("(4+k^2)(q^2+(p-1)^2) <= k^2(p+1)^2",
                                lambda P: (4 + P["k"] ** 2) * (P["q"] ** 2 + (P["p"] - 1) ** 2) <= P["k"] ** 2 * (P["p"] + 1) ** 2),
                     Constraint("(w,z,p,q) != (-1,0,1,0)",
                                lambda P: (P["w"], P["z"], P["p"], P["q"]) != (-1, 0, 1, 0))),
                    _build_p13c, _NOT_DEC))
_register(FamilyDef("P14", "only S fixed, four-parameter family", {"w": 0.0, "z": -1.0, "p": 0.0, "q": 1.0},
                    (Constraint("(3w)^2 <= -16z(z+1)", lambda P: (3 * P["w"]) ** 2 <= -16 * P["z"] * (P["z"] + 1)),
                     Constraint("(3p)^2 <= 16q(q-1)", lambda P: (3 * P["p"]) ** 2 <= 16 * P["q"] * (P["q"] - 1)),
                     Constraint("q > 0", lambda P: P["q"] > 0),
                     Constraint("z < 0", lambda P: P["z"] < 0),
                     Constraint("(w,z,p,q) != (0,-1/3,0,3)",
                                lambda P: not np.allclose((P["w"], P["z"], P["p"], P["q"]), (0, -1 / 3, 0, 3), atol=1e-12))),
                    _build_p14,
                    lambda P: _verdict(False, True, False,
                                       bool(P["w"] == 0 and P["p"] == 0 and P["q"] == 1 and P["z"] == -1))))
_register(FamilyDef("P16a", "7-dim group containing SO2, two invariant 1-subspaces", {"w": 2.0, "c": 0.0},
                    (Constraint("w > 0", lambda P: P["w"] > 0),
                     Constraint("w != 1", lambda P: P["w"] != 1),
                     Constraint("(w-1)^2 c^2 <= 4w", lambda P: (P["w"] - 1) ** 2 * P["c"] ** 2 <= 4 * P["w"])),
                    _build_p16a, lambda P: _verdict(True, True, True, False)))
_register(FamilyDef("P16b", "7-dim group containing SO2, one invariant 1-subspace", {"d": 1.0},
                    (Constraint("4d^2 >= 1", lambda P: 4 * P["d"] ** 2 >= 1),),
                    _build_p16b, lambda P: _verdict(True, True, True, False)))
_register(FamilyDef("RemarkF", "planes A_f from a monotone function f", {"coeffs": (1.0, 0.0, 1.0)}, (),
                    _build_remarkf, lambda P: _verdict(True, True, True, False)))
_register(FamilyDef("P17a", "complement transitive on P_S x P_W", {"p": 1.0, "q": 1.0, "c": 0.0, "d": -0.5},
                    (Constraint("p=q>0 and -1<=d<0, or q>0, p=(k-1)q/(k+1) with integer k>=1, and d>0", _p17a_case),
                     Constraint("-(q+p)^2 A + (q-p)^2 B - 4AB >= 0",
                                lambda P: (lambda A, B: -(P["q"] + P["p"]) ** 2 * A + (P["q"] - P["p"]) ** 2 * B - 4 * A * B >= 0)(*_p17_AB(P)))),
                    _build_p17a, lambda P: _verdict(False, True, False, None)))
_register(FamilyDef("P17b", "complement not transitive on P_S x P_W", {"m": 1, "n": 2, "c": 0.0, "d": 1.5},
                    (Constraint("m, n coprime integers with m=n=1, -1<=d<0; or n=m+1, d>0; or m odd, n=m+2, d>0", _p17b_case),
                     Constraint("(n-m)^2 B >= (n+m)^2 A",
                                lambda P: (lambda A, B: (P["n"] - P["m"]) ** 2 * B >= (P["n"] + P["m"]) ** 2 * A)(*_p17_AB(P)))),
                    _build_p17b, lambda P: _p17b_expected(P)))


# --- public API --------------------------------------------------------------

def family_def(family_id) -> FamilyDef:
    try:
        return _DEFS[family_id]
    except KeyError:
        raise UnknownFamilyError(family_id) from None


def merged_params(spec: FamilySpec) -> dict:
    d = family_def(spec.family_id)
    unknown = set(spec.params) - set(d.defaults)
    if unknown:
        raise ParameterError(spec.family_id, [f"unknown parameter {u}" for u in sorted(unknown)])
    P = dict(d.defaults)
    P.update(spec.params)
    return P


def validate(spec: FamilySpec) -> list:
    """Names of every violated constraint (empty list when admissible)."""
    d = family_def(spec.family_id)
    P = merged_params(spec)
    bad = []
    for c in d.constraints:
        try:
            ok = bool(c.check(P))
        except (ZeroDivisionError, ValueError, TypeError):
            ok = False
        if not ok:
            bad.append(c.text)
    if spec.family_id == "RemarkF":
        bad += _check_f(_remark_f(P, spec.f))
    return bad


def _check_f(f):
    u = np.geomspace(1e-3, 1e3, 200)
    try:
        v = np.asarray(f(u), dtype=float)
        f0 = float(f(0.0))
    except Exception as e:  # user supplied callable
        return [f"f not evaluable: {e}"]
    out = []
    if not np.all(np.isfinite(v)) or np.any(v <= 0) or np.any(np.diff(v) <= 0):
        out.append("f strictly increasing and positive on (0, inf)")
    if abs(f0) > 1e-12:
        out.append("f(0) = 0")
    f1 = float(f(1.0))
    if np.allclose(v, f1 * u, rtol=1e-9):
        out.append("f non-linear")
    return out


def instantiate(spec: FamilySpec) -> FamilyInstance:
    bad = validate(spec)
    if bad:
        raise ParameterError(spec.family_id, bad)
    d = family_def(spec.family_id)
    P = merged_params(spec)
    if spec.family_id == "RemarkF":
        sec, spread = _build_remarkf(P, spec.f)
    else:
        sec, spread = d.build(P)
    return FamilyInstance(spec, sec, spread, d.expected(P))


def expected_verdicts(family_id, params=None) -> dict:
    d = family_def(family_id)
    P = dict(d.defaults)
    P.update(params or {})
    return d.expected(P)


def default_instance(family_id) -> FamilyInstance:
    return instantiate(FamilySpec(family_id))
