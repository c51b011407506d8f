"""C1 compact loops on the circle: differential inequalities, the R-integral
construction of a_u, and the special-case bounds.

A profile is a pair of functions on [0, 2pi] for one fixed u.  Checks work
on a uniform grid with step 2pi/4096 and central differences (second-order
one-sided at the ends).  Strict inequalities use a margin of 1e-9: values
within it are reported as "boundary".
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from . import linalg_core as lc

MARGIN = 1e-9
N_GRID = 4096
PERIODIC_TOL = 1e-8
UNCHECKED_R = "Fourier series of R lies in the admissible class and converges uniformly (not checked)"


class InvalidRError(ValueError):
    """a_u^-1 built from R is not positive on [0, 2pi]."""


class ProfileInvariantError(ValueError):
    pass


class GridTooCoarseError(ArithmeticError):
    pass


@dataclass(frozen=True)
class RFunction:
    R: Callable
    description: str = ""


@dataclass(frozen=True)
class CompactLoopProfile:
    """a_u(t) > 0 and b_u(t) on [0, 2pi] for a fixed u."""

    a_u: Callable
    b_u: Callable
    u_tag: float = 1.0
    origin: str = "given"

    def endpoint_defects(self):
        a0, a1 = (float(self.a_u(np.array(x))) for x in (0.0, lc.TWO_PI))
        b0, b1 = (float(self.b_u(np.array(x))) for x in (0.0, lc.TWO_PI))
        return {"a(0)-1": a0 - 1, "a(2pi)-1": a1 - 1, "b(0)": b0, "b(2pi)": b1}

    @property
    def periodic(self):
        return all(abs(v) <= PERIODIC_TOL for v in self.endpoint_defects().values())


def _zero(t):
    return np.zeros_like(np.asarray(t, dtype=float))


def profile(a_u=None, b_u=None, u_tag=1.0) -> CompactLoopProfile:
    return CompactLoopProfile(a_u or (lambda t: np.ones_like(np.asarray(t, dtype=float))), b_u or _zero, u_tag)


def profile_from_samples(t, a, b) -> CompactLoopProfile:
    """Sampled profile with linear interpolation."""
    t, a, b = (np.asarray(x, dtype=float) for x in (t, a, b))
    if t.ndim != 1 or t.shape != a.shape or t.shape != b.shape or len(t) < 2:
        raise ValueError("t, a, b must be 1-D arrays of equal length >= 2")
    if np.any(np.diff(t) <= 0) or not np.all(np.isfinite(np.concatenate([t, a, b]))):
        raise ValueError("t must be strictly increasing and all samples finite")
    if np.any(a <= 0):
        raise ValueError("a must be positive")
    return CompactLoopProfile(lambda s: np.interp(s, t, a), lambda s: np.interp(s, t, b))


def profile_from_json(obj) -> CompactLoopProfile:
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        return profile_from_samples(obj["t"], obj["a"], obj["b"])
    except (KeyError, TypeError) as e:
        raise ValueError(f"malformed profile JSON: {e}") from e


def profile_from_section(s, u=1.0) -> CompactLoopProfile:
    """a_u(t) = a(u,t)/a(u,0), b_u(t) = b(u,t) for a section pair."""
    a0 = float(np.asarray(s.a(u, 0.0)))
    return CompactLoopProfile(lambda t: np.asarray(s.a(u, t)) / a0, lambda t: np.asarray(s.b(u, t)), float(u))


# --- grid and derivatives -----------------------------------------------------------

def grid(n=N_GRID):
    return np.linspace(0.0, lc.TWO_PI, n + 1)


def derivative(f, h):
    """Central differences, second-order one-sided at both ends."""
    return np.gradient(f, h, edge_order=2)


def _eval(fn, t):
    v = np.broadcast_to(np.asarray(fn(t), dtype=float), t.shape)
    return v


def _status(margins):
    """margins > 0 means the strict inequality holds."""
    if np.any(margins < -MARGIN):
        return "fail"
    if np.any(margins <= MARGIN):
        return "boundary"
    return "pass"


@dataclass
class CheckReport:
    status: str
    min_margin: float
    argmin_t: float
    n_points: int
    violations: list = field(default_factory=list)   # (t, margin) with margin <= MARGIN
    extra: dict = field(default_factory=dict)
    unchecked: list = field(default_factory=list)

    @property
    def ok(self):
        return self.status == "pass"

    def to_dict(self):
        return {"status": self.status, "min_margin": self.min_margin, "argmin_t": self.argmin_t,
                "n_points": self.n_points, "violations": self.violations[:50],
                "n_violations": len(self.violations), "extra": self.extra, "unchecked": self.unchecked}


def _unchecked(p):
    return [UNCHECKED_R] if p.origin == "R" else []


def _report(t, margins, extra=None, unchecked=None, worst=None):
    i = int(np.argmin(margins))
    bad = margins <= MARGIN
    status = _status(margins if worst is None else np.append(margins, worst))
    return CheckReport(status, float(margins[i]), float(t[i]), len(t),
                       [(float(a), float(b)) for a, b in zip(t[bad], margins[bad])],
                       extra or {}, unchecked or [])


# --- checks -------------------------------------------------------------------------

def normalized_pair(p: CompactLoopProfile, n_points=N_GRID):
    """(t, abar, bbar) with abar = a_u(0)/a_u(t), bbar = -b_u(t)."""
    t = grid(n_points)
    a = _eval(p.a_u, t)
    if np.any(~(a > 0)):
        raise ProfileInvariantError("a_u must be positive")
    return t, a[0] / a, -_eval(p.b_u, t)


def c1_inequality_check(p: CompactLoopProfile, n_points=N_GRID) -> CheckReport:
    """abar'^2 + bbar abar' + bbar' abar - abar^2 < 0 and bbar'(0) < 1 - abar'(0)^2."""
    t, A, B = normalized_pair(p, n_points)
    h = t[1] - t[0]
    dA, dB = derivative(A, h), derivative(B, h)
    if not (np.all(np.isfinite(dA)) and np.all(np.isfinite(dB))):
        raise GridTooCoarseError("non-finite derivative estimate")
    lhs = dA ** 2 + B * dA + dB * A - A ** 2
    init = 1 - dA[0] ** 2 - dB[0]
    rep = _report(t, -lhs, extra={"initial_margin": float(init), "max_lhs": float(lhs.max())},
                  unchecked=_unchecked(p), worst=init)
    return rep


def b_bound_check(p: CompactLoopProfile, quadrature_n=N_GRID) -> CheckReport:
    """b_u(t) > -a_u(t) * int_0^t (a_u^2 - a_u'^2)/a_u^4 ds on (0, 2pi)."""
    t = grid(quadrature_n)
    h = t[1] - t[0]
    a = _eval(p.a_u, t) / float(_eval(p.a_u, np.zeros(1))[0])
    b = _eval(p.b_u, t)
    da = derivative(a, h)
    if not np.all(np.isfinite(da)):
        raise GridTooCoarseError("non-finite derivative estimate")
    g = (a * a - da * da) / a ** 4
    integral = cumulative_simpson(g, x=t, initial=0.0)
    margin = b + a * integral
    inner = slice(1, -1)
    return _report(t[inner], margin[inner], unchecked=_unchecked(p))


def exp_band_check(p: CompactLoopProfile, n_points=N_GRID) -> CheckReport:
    """e^-t < a_u(t)/a_u(0) < e^t on (0, 2pi); requires b_u = 0."""
    t = grid(n_points)[1:-1]
    if np.any(np.abs(_eval(p.b_u, t)) > PERIODIC_TOL):
        raise lc.DomainError("exp_band_check needs b_u = 0")
    ratio = _eval(p.a_u, t) / float(_eval(p.a_u, np.zeros(1))[0])
    margin = np.minimum(ratio - np.exp(-t), np.exp(t) - ratio)
    return _report(t, margin, unchecked=_unchecked(p))


# --- construction from R ------------------------------------------------------------

def integral_R(R, t, quadrature_n=4096):
    """int_0^t R(s) e^-s ds by composite Simpson with quadrature_n panels, per t."""
    if quadrature_n < 64:
        raise ValueError("quadrature_n must be >= 64")
    n = quadrature_n + (quadrature_n % 2)
    t = np.asarray(t, dtype=float)
    flat = t.reshape(-1)
    nodes = np.linspace(0.0, 1.0, n + 1)
    integral = np.empty_like(flat)
    step = max(1, 2 ** 22 // (n + 1))
    for i in range(0, len(flat), step):
        s = flat[i:i + step, None] * nodes
        f = np.asarray(R(s), dtype=float) * np.exp(-s)
        integral[i:i + step] = simpson(f, x=s, axis=-1)
    return integral.reshape(t.shape)


def a_inverse_from_R(R, t, quadrature_n=4096):
    """e^t (1 - int_0^t R(s) e^-s ds).

    The factor e^t (up to e^2pi ~ 535) amplifies the quadrature error, hence
    the fine default.
    """
    t = np.asarray(t, dtype=float)
    return np.exp(t) * (1.0 - integral_R(R, t, quadrature_n))


def compact_loop_from_R(R: RFunction | Callable, quadrature_n=4096, require_periodic=True) -> CompactLoopProfile:
    """Profile with a_u = 1/(e^t (1 - int_0^t R e^-s)) and b_u = 0."""
    fn = R.R if isinstance(R, RFunction) else R
    t = grid(512)
    inv_a = a_inverse_from_R(fn, t, quadrature_n)
    if np.any(~(inv_a > 0)):
        i = int(np.argmin(inv_a))
        raise InvalidRError(f"a_u^-1 = {inv_a[i]:.3e} <= 0 at t = {t[i]:.4f}")

    def a_u(tt):
        return 1.0 / a_inverse_from_R(fn, np.asarray(tt, dtype=float), quadrature_n)

    prof = CompactLoopProfile(a_u, _zero, 1.0, origin="R")
    if require_periodic and not prof.periodic:
        raise ProfileInvariantError(f"a_u(2pi) = {1 / inv_a[-1]:.12g}, expected 1")
    return prof


def simpson_order(f, exact, lo, hi, ns=(16, 32, 64, 128)):
    """Observed convergence order log2(err_n / err_2n) of composite Simpson."""
    errs = []
    for n in ns:
        x = np.linspace(lo, hi, n + 1)
        errs.append(abs(simpson(f(x), x=x) - exact))
    errs = np.array(errs)
    return np.log2(errs[:-1] / errs[1:]), errs
