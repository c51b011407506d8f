"""Structural predicates of a loop given by its section pair (a, b).

All predicates sample a and b on the policy grid (u log-spaced, t uniform)
and compare identities with a mixed absolute/relative tolerance.  Every
failed identity leaves a witness at its worst grid point.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg_core as lc
from .section_model import (InvalidSectionError, NumericPolicy, QuasifieldLoop,
                            SectionPair, section_matrices)


@dataclass(frozen=True)
class Witness:
    test: str
    r: float
    t: float
    k: int
    lhs: float
    rhs: float
    residual: float

    def as_list(self):
        return [self.test, [self.r, self.t, self.k], self.lhs, self.rhs, self.residual]


@dataclass
class IdentityResult:
    holds: bool
    max_residual: float
    witnesses: list = field(default_factory=list)


def _tol(policy):
    return policy.identity_rtol


def _compare(name, lhs, rhs, R, T, K, tol):
    """Scaled residual |lhs-rhs|/max(1,|lhs|,|rhs|); witness at the worst point."""
    lhs, rhs = np.broadcast_arrays(np.asarray(lhs, float), np.asarray(rhs, float))
    diff = np.abs(lhs - rhs)
    res = diff / np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
    res = np.where(np.isfinite(res), res, np.inf)
    i = np.unravel_index(np.argmax(res), res.shape)
    worst = float(res[i])
    R, T, K = (np.broadcast_to(x, res.shape) for x in (R, T, K))
    wit = Witness(name, float(R[i]), float(T[i]), int(K[i]), float(lhs[i]), float(rhs[i]), float(diff[i]))
    ok = worst <= tol
    return IdentityResult(ok, worst, [] if ok else [wit]), wit


def _eval(s: SectionPair, u, t):
    a, b = s.ab(u, t)
    return np.asarray(a, float), np.asarray(b, float)


# --- kernel -------------------------------------------------------------------

@dataclass
class KernelSample:
    entries: list          # (signed real, 2x2 matrix as nested list)
    kernel_is_diagonal: bool
    f1_monotone: bool
    f2_monotone: bool
    max_deviation: float
    witnesses: list = field(default_factory=list)

    @property
    def monotone(self):
        return self.f1_monotone and self.f2_monotone


def _strictly_monotone(v):
    d = np.diff(v)
    return bool(np.all(d > 0) or np.all(d < 0))


def kernel_translations(s: SectionPair, r_grid=None, policy: NumericPolicy | None = None) -> KernelSample:
    """Translations at t = 0 and t = pi: r (+-I) [[a, b], [0, 1/a]]."""
    policy = policy or NumericPolicy()
    r = np.asarray(policy.us if r_grid is None else r_grid, dtype=float)
    if np.any(~(r > 0)):
        raise lc.DomainError("r grid must be positive")
    t = np.array([0.0, np.pi])
    R, T = np.meshgrid(r, t, indexing="ij")
    a, b = _eval(s, R, T)
    mats = section_matrices(s, R, T)
    K = np.broadcast_to(np.array([0, 1]), R.shape)
    tol = _tol(policy)
    ra, _ = _compare("kernel a(r,k pi) = 1", a, 1.0, R, T, K, tol)
    rb, _ = _compare("kernel b(r,k pi) = 0", b, 0.0, R, T, K, tol)
    entries = []
    for k, sign in ((0, 1.0), (1, -1.0)):
        for i in range(len(r)):
            entries.append((float(sign * r[i] * a[i, k]), mats[i, k].tolist()))
    f1 = r * a[:, 0]
    f2 = -r * a[:, 1]
    wits = ra.witnesses + rb.witnesses
    m1, m2 = _strictly_monotone(f1), _strictly_monotone(f2)
    if not m1:
        wits.append(Witness("f1 = r a(r,0) strictly monotone", float(r[0]), 0.0, 0, float(f1[0]), float(f1[-1]), np.nan))
    if not m2:
        wits.append(Witness("f2 = -r a(r,pi) strictly monotone", float(r[0]), np.pi, 1, float(f2[0]), float(f2[-1]), np.nan))
    return KernelSample(entries, ra.holds and rb.holds, m1, m2, max(ra.max_residual, rb.max_residual), wits)


# --- decomposability ------------------------------------------------------------

@dataclass
class DecompositionReport:
    decomposable: bool
    residual_by_k: dict
    witnesses: list


def decomposability_residuals(s: SectionPair, policy: NumericPolicy | None = None, ks=(0, 1)):
    """Residuals of a(r,t+k pi) = a(1,t) a(r,k pi) and
    b(r,t+k pi) = a(1,t) b(r,k pi) + b(1,t)/a(r,k pi) on the (r, t, k) grid.

    Returns {k: (IdentityResult for a, IdentityResult for b)}.
    """
    policy = policy or NumericPolicy()
    r, ts = policy.us, policy.ts
    R, T = np.meshgrid(r, ts, indexing="ij")
    a1, b1 = _eval(s, np.ones_like(ts), ts)
    tol = _tol(policy)
    out = {}
    for k in ks:
        ak, bk = _eval(s, r, np.full_like(r, k * np.pi))
        a, b = _eval(s, R, T + k * np.pi)
        K = np.full(R.shape, k)
        lhs_a, rhs_a = a, a1[None, :] * ak[:, None]
        lhs_b, rhs_b = b, a1[None, :] * bk[:, None] + b1[None, :] / ak[:, None]
        ra, _ = _compare(f"a(r,t+{k}pi) = a(1,t) a(r,{k}pi)", lhs_a, rhs_a, R, T, K, tol)
        rb, _ = _compare(f"b(r,t+{k}pi) = a(1,t) b(r,{k}pi) + b(1,t)/a(r,{k}pi)", lhs_b, rhs_b, R, T, K, tol)
        out[k] = (ra, rb)
    return out


def is_decomposable(s: SectionPair, policy: NumericPolicy | None = None) -> DecompositionReport:
    """Verdict from the k = 0 identities (t ranging over the full circle).

    The k = 1 residuals are reported too; they fail for sections such as
    P11a whose compact factor is not pi-periodic although the translations
    do factor as T K.
    """
    res = decomposability_residuals(s, policy, ks=(0, 1))
    ra, rb = res[0]
    by_k = {k: max(x.max_residual, y.max_residual) for k, (x, y) in res.items()}
    return DecompositionReport(ra.holds and rb.holds, by_k, ra.witnesses + rb.witnesses)


# --- quasi-simplicity ------------------------------------------------------------

@dataclass
class QuasiSimpleReport:
    quasi_simple: bool
    proper: bool
    kernel_is_diagonal: bool
    r_independent: bool
    witnesses: list


def _r_independence(s, policy):
    r, ts = policy.us, policy.ts
    R, T = np.meshgrid(r, ts, indexing="ij")
    a, b = _eval(s, R, T)
    a1, b1 = _eval(s, np.ones_like(ts), ts)
    K = np.zeros(R.shape, dtype=int)
    tol = _tol(policy)
    ra, wa = _compare("a(r,phi) = a(1,phi)", a, a1[None, :], R, T, K, tol)
    rb, wb = _compare("b(r,phi) = b(1,phi)", b, b1[None, :], R, T, K, tol)
    return ra, rb, wa, wb


def is_group_section(s: SectionPair, policy: NumericPolicy | None = None):
    """a = 1 and b = 0 on the whole grid: the loop is the complex multiplicative group."""
    policy = policy or NumericPolicy()
    R, T = np.meshgrid(policy.us, policy.ts, indexing="ij")
    a, b = _eval(s, R, T)
    tol = _tol(policy)
    return bool(np.all(np.abs(a - 1) <= tol) and np.all(np.abs(b) <= tol))


def is_quasi_simple(s: SectionPair, policy: NumericPolicy | None = None) -> QuasiSimpleReport:
    """Not quasi-simple iff {rI : r > 0} is a normal subgroup of the translations.

    That is: a(r,0) = 1, b(r,0) = 0 and a, b do not depend on r.  The
    condition at t = pi (the kernel element -rI) is reported through
    kernel_is_diagonal but does not enter the verdict: for P17b with n - m
    even the kernel is not diagonal while the loop still splits over the
    positive scalars.
    """
    policy = policy or NumericPolicy()
    ks = kernel_translations(s, policy=policy)
    r = policy.us
    a0, b0 = _eval(s, r, np.zeros_like(r))
    K = np.zeros(r.shape, dtype=int)
    tol = _tol(policy)
    ra0, _ = _compare("a(r,0) = 1", a0, 1.0, r, 0.0, K, tol)
    rb0, _ = _compare("b(r,0) = 0", b0, 0.0, r, 0.0, K, tol)
    ra, rb, wa, wb = _r_independence(s, policy)
    rind = ra.holds and rb.holds
    scalar_normal = ra0.holds and rb0.holds and rind
    qs = not scalar_normal
    if qs:
        wits = ra0.witnesses + rb0.witnesses + ra.witnesses + rb.witnesses
    else:
        # the normal-subgroup identities hold; record where they are tightest
        wits = [wa, wb]
    return QuasiSimpleReport(qs, not is_group_section(s, policy), ks.kernel_is_diagonal, rind, wits)


# --- SO2 ----------------------------------------------------------------------------

@dataclass
class SO2Report:
    contains_so2: bool
    t_independent: bool
    ua_monotone: bool
    witnesses: list


def contains_so2(s: SectionPair, policy: NumericPolicy | None = None) -> SO2Report:
    policy = policy or NumericPolicy()
    r, ts = policy.us, policy.ts
    R, T = np.meshgrid(r, ts, indexing="ij")
    a, b = _eval(s, R, T)
    K = np.zeros(R.shape, dtype=int)
    tol = _tol(policy)
    ra, _ = _compare("a(u,t) = a(u,0)", a, a[:, :1], R, T, K, tol)
    rb, _ = _compare("b(u,t) = b(u,0)", b, b[:, :1], R, T, K, tol)
    f = r * a[:, 0]
    mono = _strictly_monotone(f)
    wits = ra.witnesses + rb.witnesses
    if not mono:
        wits.append(Witness("u a(u,0) strictly monotone", float(r[0]), 0.0, 0, float(f[0]), float(f[-1]), np.nan))
    tind = ra.holds and rb.holds
    return SO2Report(tind and mono, tind, mono, wits)


# --- ellipticity and normality ------------------------------------------------------

@dataclass
class EllipticityReport:
    ok: bool
    u: float
    max_abs_trace_outside: float
    max_abs_trace_inside: float
    boundary_points: list      # t values where a side bound holds with equality
    violations: list           # (t, trace)
    cross_check: str           # "compact" for b = 0, "two-sided" otherwise
    cross_check_ok: bool


def ellipticity_profile(a1, b, t):
    """Trace of the translation of (u, t) at u = 1 for the section form."""
    return np.cos(t) * (a1 + 1 / a1) - np.sin(t) * b


def t_ellipticity_check(s: SectionPair, u=1.0, policy: NumericPolicy | None = None, t=None,
                        a1=None, b=None) -> EllipticityReport:
    """|cos t (a(1,t) + 1/a(1,t)) - sin t b(u,t)| <= 2 with equality only at t = k pi.

    ``a1`` and ``b`` may be given directly as arrays on ``t`` (for profiles
    without a section).
    """
    policy = policy or NumericPolicy()
    t = np.asarray(policy.ts if t is None else t, dtype=float)
    if a1 is None:
        a1, _ = _eval(s, np.ones_like(t), t)
    if b is None:
        _, b = _eval(s, np.full_like(t, u), t)
    a1 = np.broadcast_to(np.asarray(a1, float), t.shape)
    b = np.broadcast_to(np.asarray(b, float), t.shape)
    tr = ellipticity_profile(a1, b, t)
    g = policy.guard_band
    dist = np.abs(lc.angle_diff(t, np.pi * np.round(t / np.pi)))
    inside = dist <= g
    eq_tol = 1e-12
    out = ~inside
    viol = [(float(tt), float(v)) for tt, v in zip(t[out], tr[out]) if not abs(v) < 2 - eq_tol]
    viol += [(float(tt), float(v)) for tt, v in zip(t[inside], tr[inside]) if abs(v) > 2 + 1e-9]

    c, sn = np.cos(t), np.sin(t)
    boundary = []
    if np.all(np.abs(b) <= policy.identity_rtol):
        kind = "compact"
        with np.errstate(divide="ignore"):
            lo = (1 - np.abs(sn)) / np.abs(c)
            hi = (1 + np.abs(sn)) / np.abs(c)
        okb = (lo <= a1 * (1 + 1e-12)) & (a1 <= hi * (1 + 1e-12))
        eq = out & (np.isclose(a1, lo, rtol=1e-12, atol=0) | np.isclose(a1, hi, rtol=1e-12, atol=0))
    else:
        kind = "two-sided"
        m = (a1 + 1 / a1) * c
        with np.errstate(divide="ignore", invalid="ignore"):
            lo = np.where(sn > 0, (m - 2) / sn, (m + 2) / sn)
            hi = np.where(sn > 0, (m + 2) / sn, (m - 2) / sn)
        okb = np.where(out, (lo < b) & (b < hi), True)
        eq = out & (np.isclose(b, lo, rtol=1e-12, atol=1e-15) | np.isclose(b, hi, rtol=1e-12, atol=1e-15))
    boundary = [float(x) for x in t[eq]]
    cross = bool(np.all(okb[out]))
    return EllipticityReport(
        ok=not viol,
        u=float(u),
        max_abs_trace_outside=float(np.max(np.abs(tr[out]))) if out.any() else 0.0,
        max_abs_trace_inside=float(np.max(np.abs(tr[inside]))) if inside.any() else 0.0,
        boundary_points=boundary,
        violations=viol,
        cross_check=kind,
        cross_check_ok=cross,
    )


def t_normality_check(s: SectionPair, policy: NumericPolicy | None = None) -> bool:
    """a(1,t) = 1 and b(1,t) = 0 for every grid t, i.e. the compact factor is SO2."""
    policy = policy or NumericPolicy()
    ts = policy.ts
    a1, b1 = _eval(s, np.ones_like(ts), ts)
    tol = _tol(policy)
    return bool(np.all(np.abs(a1 - 1) <= tol) and np.all(np.abs(b1) <= tol))


# --- classification ----------------------------------------------------------------

@dataclass
class ClassificationReport:
    family: str
    params: dict
    kernel_is_diagonal: bool
    decomposable: bool
    quasi_simple: bool
    contains_so2: bool
    t_all_elliptic: bool
    proper: bool
    t_normal: bool
    kernel_monotone: bool
    decomposability_residual_k1: float
    witnesses: list
    internal_errors: list = field(default_factory=list)

    @property
    def consistent(self):
        return not self.internal_errors

    def verdicts(self):
        return {"kernel_is_diagonal": self.kernel_is_diagonal, "decomposable": self.decomposable,
                "quasi_simple": self.quasi_simple, "contains_so2": self.contains_so2,
                "t_all_elliptic": self.t_all_elliptic, "proper": self.proper,
                "t_normal": self.t_normal, "kernel_monotone": self.kernel_monotone}

    def to_dict(self):
        return {"family": self.family, "params": _jsonable(self.params),
                "verdicts": self.verdicts(),
                "diagnostics": {"decomposability_residual_k1": _num(self.decomposability_residual_k1)},
                "witnesses": [_jsonable(w.as_list()) for w in self.witnesses],
                "internal_errors": list(self.internal_errors)}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _num(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (bool, np.bool_)):
        return bool(o)
    if isinstance(o, (int, np.integer)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        return _num(o)
    if callable(o):
        return getattr(o, "__name__", "callable")
    return o


def consistency_errors(rep: ClassificationReport) -> list:
    errs = []
    if not rep.quasi_simple and not rep.decomposable:
        errs.append("not quasi-simple but not decomposable")
    if rep.contains_so2 and not rep.decomposable:
        errs.append("contains SO2 but not decomposable")
    if not rep.proper and not (rep.t_normal and rep.decomposable and rep.contains_so2 and rep.kernel_is_diagonal):
        errs.append("group case without normal compact factor, decomposition or SO2")
    return errs


def classify(L: QuasifieldLoop | SectionPair, policy: NumericPolicy | None = None) -> ClassificationReport:
    if isinstance(L, QuasifieldLoop):
        s, policy = L.section, policy or L.policy
    else:
        s = L
        policy = policy or NumericPolicy()
    try:
        ks = kernel_translations(s, policy=policy)
        dec = is_decomposable(s, policy)
        qs = is_quasi_simple(s, policy)
        so2 = contains_so2(s, policy)
        ell = t_ellipticity_check(s, 1.0, policy)
        tn = t_normality_check(s, policy)
    except (FloatingPointError, InvalidSectionError) as e:
        raise InvalidSectionError(f"classification failed: {e}") from e
    wits = []
    if not ks.kernel_is_diagonal or not ks.monotone:
        wits += ks.witnesses
    if not dec.decomposable:
        wits += dec.witnesses
    wits += [w for w in qs.witnesses if w not in wits]
    if not so2.contains_so2:
        wits += so2.witnesses
    if not ell.ok:
        t0, v0 = max(ell.violations, key=lambda x: abs(x[1]))
        wits.append(Witness("|trace| < 2 off k pi", 1.0, t0, 0, abs(v0), 2.0, abs(v0) - 2.0))
    if not qs.proper:
        wits.append(Witness("a = 1 and b = 0 on the grid (group)", 1.0, 0.0, 0, 1.0, 1.0, 0.0))
    rep = ClassificationReport(
        family=s.name or "", params=dict(s.params or {}),
        kernel_is_diagonal=ks.kernel_is_diagonal, decomposable=dec.decomposable,
        quasi_simple=qs.quasi_simple, contains_so2=so2.contains_so2, t_all_elliptic=ell.ok,
        proper=qs.proper, t_normal=tn, kernel_monotone=ks.monotone,
        decomposability_residual_k1=dec.residual_by_k[1], witnesses=wits)
    rep.internal_errors = consistency_errors(rep)
    return rep
