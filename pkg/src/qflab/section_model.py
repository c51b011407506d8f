"""Multiplicative loops given by a section pair (a(u,t), b(u,t)).

The left translation of the element with polar data (u, t) is

    u * rotation(t) * [[a(u,t), b(u,t)], [0, 1/a(u,t)]]

and the element itself is the first column, u*a(u,t)*(cos t, -sin t).
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import linalg_core as lc
from ._roots import ConvergenceError, monotone_root


class InvalidSectionError(ValueError):
    """The pair (a, b) does not describe an admissible section."""


class SharpTransitivityError(RuntimeError):
    """Right division found several distinct solutions."""

    def __init__(self, msg, candidates=()):
        super().__init__(msg)
        self.candidates = list(candidates)


def _default_u_grid():
    # 2**k keeps r = 1 exactly on the grid
    return tuple(2.0 ** np.linspace(-3.0, 3.0, 33))


def _default_t_grid():
    return tuple(lc.TWO_PI * np.arange(256) / 256)


@dataclass(frozen=True)
class NumericPolicy:
    u_grid: tuple = field(default_factory=_default_u_grid)
    t_grid: tuple = field(default_factory=_default_t_grid)
    atol: float = lc.ATOL
    rtol: float = lc.RTOL
    identity_rtol: float = 1e-9
    max_newton_iters: int = 60
    bracket_subdivisions: int = 64
    guard_band: float = 1e-6

    def __post_init__(self):
        u, t = np.asarray(self.u_grid), np.asarray(self.t_grid)
        if u.size == 0 or t.size == 0:
            raise ValueError("grids must be non-empty")
        if np.any(np.diff(u) <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("grids must be strictly increasing")
        if np.any(u <= 0):
            raise ValueError("u grid must be positive")
        if min(self.atol, self.rtol, self.identity_rtol) <= 0:
            raise ValueError("tolerances must be positive")

    @property
    def us(self):
        return np.asarray(self.u_grid, dtype=float)

    @property
    def ts(self):
        return np.asarray(self.t_grid, dtype=float)

    @classmethod
    def from_env(cls, **kw):
        """Default policy; QFLAB_TOL (if set) overrides rtol."""
        tol = os.environ.get("QFLAB_TOL")
        if tol:
            kw.setdefault("rtol", float(tol))
        return cls(**kw)


@dataclass(frozen=True)
class PolarParam:
    r: float
    t: float

    def __post_init__(self):
        if not self.r > 0 or not np.isfinite(self.r):
            raise lc.DomainError(f"polar radius must be positive, got {self.r}")
        object.__setattr__(self, "t", float(lc.norm_angle(self.t)))


def _broadcast_ab(fn):
    def ab(u, t):
        u, t = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(t, dtype=float))
        a, b = fn(u, t)
        return (np.broadcast_to(np.asarray(a, dtype=float), u.shape).copy(),
                np.broadcast_to(np.asarray(b, dtype=float), u.shape).copy())
    return ab


@dataclass(frozen=True)
class SectionPair:
    """The pair (a, b) plus metadata.

    ``ab`` maps broadcastable arrays (u, t) to arrays (a, b).  ``polar_hint``
    optionally maps element coordinates (x, y) straight to (r, t); families
    defined through substitution variables have it for free.
    """

    ab: Callable
    name: str = "section"
    params: Mapping = field(default_factory=dict)
    polar_hint: Callable | None = None

    @classmethod
    def from_functions(cls, a, b, **kw):
        return cls(ab=_broadcast_ab(lambda u, t: (a(u, t), b(u, t))), **kw)

    def a(self, u, t):
        return self.ab(u, t)[0]

    def b(self, u, t):
        return self.ab(u, t)[1]


def complex_section() -> SectionPair:
    """a = 1, b = 0: the multiplicative group of the complex numbers."""
    return SectionPair.from_functions(lambda u, t: 1.0, lambda u, t: 0.0, name="complex")


def _ut(p):
    if isinstance(p, PolarParam):
        return p.r, p.t
    return p


def section_matrices(s: SectionPair, u, t):
    u = np.asarray(u, dtype=float)
    a, b = s.ab(u, t)
    if np.any(~(a > 0)):
        raise InvalidSectionError(f"{s.name}: a(u,t) must be positive")
    return lc.compose(np.broadcast_to(u, a.shape), np.broadcast_to(t, a.shape), a, b)


def section_matrix(s: SectionPair, p) -> np.ndarray:
    u, t = _ut(p)
    return section_matrices(s, u, t)


def elements(s: SectionPair, u, t):
    """Loop elements u*a(u,t)*(cos t, -sin t) with polar data (u, t)."""
    u = np.asarray(u, dtype=float)
    a = s.a(u, t)
    if np.any(~(a > 0)):
        raise InvalidSectionError(f"{s.name}: a(u,t) must be positive")
    ra = u * a
    return np.stack([ra * np.cos(t), -ra * np.sin(t)], axis=-1)


def element_of(s: SectionPair, p) -> np.ndarray:
    u, t = _ut(p)
    return elements(s, u, t)


def polar_arrays(s: SectionPair, v, use_hint=True):
    """Vectorized inverse of ``elements``: v (..., 2) -> (r, t).

    The angle is read off directly since a > 0; the radius solves the
    monotone equation log r + log a(r, t) = log |v|.
    """
    v = np.asarray(v, dtype=float)
    x, y = v[..., 0], v[..., 1]
    n = np.hypot(x, y)
    if np.any(n == 0) or not np.all(np.isfinite(n)):
        raise lc.DomainError("polar_of needs a non-zero finite vector")
    if use_hint and s.polar_hint is not None:
        r, t = s.polar_hint(x, y)
        return np.asarray(r, dtype=float), lc.norm_angle(np.asarray(t, dtype=float))
    t = lc.norm_angle(np.arctan2(-y, x))

    def logra(lr, tt):
        return lr + np.log(s.a(np.exp(lr), tt))

    lr = monotone_root(logra, np.log(n), guess=np.log(n), args=(t,))
    r = np.exp(lr)
    back = elements(s, r, t)
    res = np.linalg.norm(back - v, axis=-1)
    if np.any(res > 1e-8 * n):
        raise ConvergenceError(f"{s.name}: polar inversion inaccurate", np.max(res / n))
    return r, t


def polar_of(s: SectionPair, v, use_hint=True) -> PolarParam:
    r, t = polar_arrays(s, np.asarray(v, dtype=float).reshape(2), use_hint)
    return PolarParam(float(r), float(t))


@dataclass(frozen=True)
class QuasifieldLoop:
    section: SectionPair
    policy: NumericPolicy = field(default_factory=NumericPolicy)

    def __post_init__(self):
        a, b = self.section.ab(1.0, 0.0)
        if not (abs(a - 1) <= self.policy.identity_rtol and abs(b) <= self.policy.identity_rtol):
            raise InvalidSectionError(f"{self.section.name}: needs a(1,0)=1, b(1,0)=0, got {a}, {b}")

    def translations(self, p, use_hint=True):
        """Left translation matrices M_p for p of shape (..., 2)."""
        r, t = polar_arrays(self.section, p, use_hint)
        return section_matrices(self.section, r, t)

    def mul(self, p, q):
        return multiply(self, p, q)

    def ldiv(self, p, w):
        return left_divide(self, p, w)

    def rdiv(self, q, w):
        return right_divide(self, q, w)


def multiply(L: QuasifieldLoop, p, q, use_hint=True):
    """p * q = M_p q; broadcasts over leading axes."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return lc.apply(L.translations(p, use_hint), q)


def left_divide(L: QuasifieldLoop, p, w):
    """z with p * z = w."""
    m = L.translations(np.asarray(p, dtype=float))
    return np.linalg.solve(m, np.asarray(w, dtype=float)[..., None])[..., 0]


# --- right division ---------------------------------------------------------

_RD_NU, _RD_NT, _RD_SPAN = 32, 64, 4.0
_RD_CANDIDATES = 4


def _rd_residual(s, rho, t, q, w, wn):
    m = section_matrices(s, np.exp(rho), t)
    return (lc.apply(m, q) - w) / wn[..., None]


def _rd_newton(s, rho, t, q, w, wn, iters):
    """Damped Newton in (log u, t) with central-difference Jacobian."""
    h = 1e-6
    f = _rd_residual(s, rho, t, q, w, wn)
    nf = np.hypot(f[..., 0], f[..., 1])
    for _ in range(iters):
        active = nf > 1e-15
        if not np.any(active):
            break
        i = np.nonzero(active)[0]
        r_, t_, q_, w_, wn_ = rho[i], t[i], q[i], w[i], wn[i]
        jr = (_rd_residual(s, r_ + h, t_, q_, w_, wn_) - _rd_residual(s, r_ - h, t_, q_, w_, wn_)) / (2 * h)
        jt = (_rd_residual(s, r_, t_ + h, q_, w_, wn_) - _rd_residual(s, r_, t_ - h, q_, w_, wn_)) / (2 * h)
        jac = np.stack([jr, jt], axis=-1)
        dj = lc.det(jac)
        ok = np.abs(dj) > 1e-300
        step = np.zeros((len(i), 2))
        step[ok] = -np.linalg.solve(jac[ok], f[i][ok][..., None])[..., 0]
        # keep steps moderate; t is periodic and log u moves multiplicatively
        step *= np.minimum(1.0, 1.0 / np.maximum(np.abs(step).max(axis=-1), 1e-300))[..., None]
        lam = np.ones(len(i))
        done = np.zeros(len(i), dtype=bool)
        new_r, new_t, new_f, new_n = r_.copy(), t_.copy(), f[i].copy(), nf[i].copy()
        for _k in range(12):
            tr = r_ + lam * step[:, 0]
            tt = t_ + lam * step[:, 1]
            tf = _rd_residual(s, tr, tt, q_, w_, wn_)
            tn = np.hypot(tf[..., 0], tf[..., 1])
            better = (tn < nf[i]) & ~done
            new_r[better], new_t[better], new_f[better], new_n[better] = tr[better], tt[better], tf[better], tn[better]
            done |= better
            if np.all(done):
                break
            lam = np.where(done, lam, lam / 2)
        rho[i], t[i], f[i], nf[i] = new_r, new_t, new_f, new_n
        stalled = ~done
        if np.all(stalled):
            break
    return rho, lc.norm_angle(t), nf


def _grid_candidates(res, k):
    """Indices of the k smallest local minima of res over (u, t) grids, t periodic."""
    n, nu, nt = res.shape
    pad = np.pad(res, ((0, 0), (1, 1), (0, 0)), constant_values=np.inf)
    is_min = np.ones_like(res, dtype=bool)
    for du in (-1, 0, 1):
        for dt in (-1, 0, 1):
            if du == 0 and dt == 0:
                continue
            nb = np.roll(pad, -dt, axis=2)[:, 1 + du:1 + du + nu, :]
            is_min &= res <= nb
    score = np.where(is_min, res, np.inf).reshape(n, -1)
    order = np.argsort(score, axis=1, kind="stable")[:, :k]
    # always include the global minimum
    order[:, 0] = np.argmin(res.reshape(n, -1), axis=1)
    return order


def right_divide_arrays(L: QuasifieldLoop, q, w, tol=1e-10, check_unique=True):
    """Solve p * q = w for p; q, w of shape (N, 2).

    Returns (p, residual).  Seeds come from a coarse (log u, t) scan around
    log(|w|/|q|); every promising local minimum is refined so that a second
    genuine solution is detected rather than silently ignored.
    """
    s = L.section
    q = np.atleast_2d(np.asarray(q, dtype=float))
    w = np.atleast_2d(np.asarray(w, dtype=float))
    q, w = np.broadcast_arrays(q, w)
    n = q.shape[0]
    qn, wn = np.hypot(q[:, 0], q[:, 1]), np.hypot(w[:, 0], w[:, 1])
    if np.any(qn == 0) or np.any(wn == 0):
        raise lc.DomainError("right division needs q != 0 and w != 0")
    rho0 = np.log(wn / qn)
    off = np.linspace(-_RD_SPAN, _RD_SPAN, _RD_NU)
    tg = lc.TWO_PI * np.arange(_RD_NT) / _RD_NT
    rho_g = rho0[:, None, None] + off[None, :, None] + 0 * tg
    t_g = np.broadcast_to(tg, rho_g.shape)
    f = _rd_residual(s, rho_g, t_g, q[:, None, None, :], w[:, None, None, :], wn[:, None, None])
    res = np.hypot(f[..., 0], f[..., 1])
    k = min(_RD_CANDIDATES if check_unique else 1, _RD_NU * _RD_NT)
    idx = _grid_candidates(res, k)
    iu, it = np.unravel_index(idx, (_RD_NU, _RD_NT))
    rho = (rho0[:, None] + off[iu]).ravel()
    tt = tg[it].ravel()
    rep = np.repeat(np.arange(n), k)
    rho, tt, nf = _rd_newton(s, rho, tt, q[rep], w[rep], wn[rep], L.policy.max_newton_iters)
    rho, tt, nf = rho.reshape(n, k), tt.reshape(n, k), nf.reshape(n, k)
    best = np.argmin(nf, axis=1)
    ar = np.arange(n)
    if np.any(nf[ar, best] > tol):
        bad = np.nonzero(nf[ar, best] > tol)[0]
        raise ConvergenceError(f"right division did not converge for {len(bad)} pair(s)", nf[bad, best[bad]].max())
    if check_unique:
        conv = nf <= tol
        drho = np.abs(rho - rho[ar, best][:, None])
        dt = np.abs(lc.angle_diff(tt, tt[ar, best][:, None]))
        distinct = conv & ((drho > 1e-6) | (dt > 1e-6))
        if np.any(distinct):
            j = np.nonzero(distinct.any(axis=1))[0]
            cands = [(float(np.exp(rho[i, c])), float(tt[i, c])) for i in j[:1] for c in np.nonzero(conv[i])[0]]
            raise SharpTransitivityError(
                f"{s.name}: right division has several solutions for {len(j)} pair(s)", cands)
    u, t = np.exp(rho[ar, best]), tt[ar, best]
    return elements(s, u, t), nf[ar, best]


def right_divide(L: QuasifieldLoop, q, w, tol=1e-10):
    """p with p * q = w."""
    q = np.asarray(q, dtype=float)
    w = np.asarray(w, dtype=float)
    single = q.ndim == 1 and w.ndim == 1
    p, _ = right_divide_arrays(L, q.reshape(-1, 2), w.reshape(-1, 2), tol=tol)
    return p[0] if single else p


# --- checks -----------------------------------------------------------------

@dataclass
class LoopSectionReport:
    ok: bool
    witnesses: list


def is_loop_section(s: SectionPair, policy: NumericPolicy | None = None) -> LoopSectionReport:
    """a(1,0)=1, b(1,0)=0 and b(u,0)=0 on the policy's u grid."""
    policy = policy or NumericPolicy()
    tol = policy.identity_rtol
    wit = []
    a1, b1 = s.ab(1.0, 0.0)
    if abs(a1 - 1) > tol:
        wit.append({"test": "a(1,0)=1", "u": 1.0, "t": 0.0, "value": float(a1)})
    if abs(b1) > tol:
        wit.append({"test": "b(1,0)=0", "u": 1.0, "t": 0.0, "value": float(b1)})
    us = policy.us
    a0, b0 = s.ab(us, np.zeros_like(us))
    for u, av, bv in zip(us, a0, b0):
        if abs(bv) > tol * max(1.0, abs(av)):
            wit.append({"test": "b(u,0)=0", "u": float(u), "t": 0.0, "value": float(bv)})
    return LoopSectionReport(not wit, wit)


@dataclass
class SharpTransitivityReport:
    n_samples: int
    failures: list
    max_residual: float

    @property
    def ok(self):
        return not self.failures


def _random_vectors(rng, n):
    # log-uniform radius in [1/8, 8], uniform angle
    r = np.exp(rng.uniform(np.log(0.125), np.log(8.0), n))
    t = rng.uniform(0, lc.TWO_PI, n)
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)


def verify_sharp_transitivity(L: QuasifieldLoop, n_samples=100, seed=0, tol=1e-8) -> SharpTransitivityReport:
    """Random right divisions: each must have exactly one accurate solution."""
    rng = np.random.default_rng(seed)
    q = _random_vectors(rng, n_samples)
    w = _random_vectors(rng, n_samples)
    failures = []
    worst = 0.0
    for i in range(n_samples):
        try:
            p, _ = right_divide_arrays(L, q[i:i + 1], w[i:i + 1])
            back = multiply(L, p[0], q[i])
            res = float(np.hypot(*(back - w[i])) / np.hypot(*w[i]))
            worst = max(worst, res)
            if res > tol:
                failures.append({"q": q[i].tolist(), "w": w[i].tolist(), "kind": "residual", "residual": res})
        except SharpTransitivityError as e:
            failures.append({"q": q[i].tolist(), "w": w[i].tolist(), "kind": "multiple", "candidates": e.candidates})
        except (ConvergenceError, InvalidSectionError) as e:
            failures.append({"q": q[i].tolist(), "w": w[i].tolist(), "kind": "no-convergence", "message": str(e)})
    return SharpTransitivityReport(n_samples, failures, worst)
