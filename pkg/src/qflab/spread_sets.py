"""Spread sets of 2x2 matrices: axioms, normalization and the coordinatizing loop.

A spread set M is a family of linear maps of R^2 such that differences of
distinct members are invertible (M1) and w -> omega(x) hits every vector for
each x != 0 (M2).  With e = (1,0) the loop is m o x = omega_m(x), where
omega_m is the unique member with first column m.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import least_squares

from . import linalg_core as lc
from ._roots import ConvergenceError


@dataclass(frozen=True)
class SpreadPiece:
    """One parameterized component of a spread set.

    ``matrix`` maps parameters of shape (..., dim) to matrices (..., 2, 2);
    ``seeds`` is a coarse parameter grid used to start root searches.
    """

    matrix: Callable
    seeds: np.ndarray
    label: str = "main"

    @property
    def dim(self):
        return int(np.asarray(self.seeds).shape[-1])


@dataclass(frozen=True)
class SpreadFamily:
    name: str
    pieces: tuple
    params: Mapping = field(default_factory=dict)
    includes_vertical: bool = True
    # parameters on which a 200-element M1 sample is taken, per piece
    sample_params: Callable | None = None


@dataclass
class SpreadSample:
    name: str
    params: list              # [[key, value], ...] of the family
    tags: list                # per element: (piece label, parameter tuple)
    matrices: np.ndarray      # (n, 2, 2)
    includes_vertical: bool = True

    def __post_init__(self):
        self.matrices = np.asarray(self.matrices, dtype=float).reshape(-1, 2, 2)
        if len(self.tags) != len(self.matrices):
            raise ValueError("one tag per matrix")
        if not np.all(np.isfinite(self.matrices)):
            raise ValueError("spread sample contains non-finite entries")
        keys = [(lab, tuple(np.round(p, 14))) for lab, p in self.tags]
        if len(set(keys)) != len(keys):
            raise ValueError("parameter tags must be unique")

    def __len__(self):
        return len(self.matrices)

    def to_json(self):
        els = []
        for (lab, p), m in zip(self.tags, self.matrices):
            e = {"p": [float(v) for v in p], "m": m.tolist()}
            if lab != "main":
                e["piece"] = lab
            els.append(e)
        return {"name": self.name, "params": self.params, "elements": els,
                "includes_vertical": self.includes_vertical}

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            els = obj["elements"]
            tags = [(e.get("piece", "main"), tuple(float(v) for v in e["p"])) for e in els]
            mats = np.array([e["m"] for e in els], dtype=float)
            return cls(obj["name"], list(obj.get("params", [])), tags, mats, bool(obj.get("includes_vertical", True)))
        except (KeyError, TypeError, ValueError) as e:
            raise ValueError(f"malformed spread JSON: {e}") from e


def sample_family(fam: SpreadFamily, params_by_piece=None) -> SpreadSample:
    if params_by_piece is None:
        if fam.sample_params is None:
            params_by_piece = {p.label: np.asarray(p.seeds) for p in fam.pieces}
        else:
            params_by_piece = fam.sample_params()
    tags, mats = [], []
    for piece in fam.pieces:
        if piece.label not in params_by_piece:
            continue
        th = np.asarray(params_by_piece[piece.label], dtype=float).reshape(-1, piece.dim)
        m = piece.matrix(th)
        tags += [(piece.label, tuple(row)) for row in th]
        mats.append(m.reshape(-1, 2, 2))
    return SpreadSample(fam.name, [[k, v] for k, v in fam.params.items()], tags,
                        np.concatenate(mats), fam.includes_vertical)


# --- axioms -------------------------------------------------------------------

@dataclass
class M1Report:
    ok: bool
    min_abs_det: float
    n_pairs: int
    violations: list


def check_M1(sample: SpreadSample, atol=1e-6) -> M1Report:
    """|det(w1 - w2)| > atol for every unordered pair."""
    m = sample.matrices
    n = len(m)
    if n < 2:
        raise ValueError("M1 needs at least two elements")
    i, j = np.triu_indices(n, k=1)
    d = np.abs(lc.det(m[i] - m[j]))
    bad = np.nonzero(~(d > atol))[0]
    viol = [{"i": int(i[k]), "j": int(j[k]), "tag_i": list(sample.tags[i[k]][1]),
             "tag_j": list(sample.tags[j[k]][1]), "det": float(d[k])} for k in bad[:50]]
    return M1Report(len(bad) == 0, float(d.min()), len(d), viol)


def solve_params(fam: SpreadFamily, x, w, tol=1e-11, n_starts=6):
    """Find a member omega with omega(x) = w; returns (piece label, params, matrix, residual).

    Multistart least squares from the best coarse seeds of every piece.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    scale = 1.0 + np.hypot(*w)
    starts = []
    for k, piece in enumerate(fam.pieces):
        seeds = np.asarray(piece.seeds, dtype=float)
        seeds = seeds.reshape(len(seeds), piece.dim)
        m = piece.matrix(seeds)
        r = np.linalg.norm(lc.apply(m, x) - w, axis=-1)
        for idx in np.argsort(r, kind="stable")[:n_starts]:
            starts.append((r[idx], k, seeds[idx]))
    starts.sort(key=lambda s: s[0])
    best = (np.inf, None, None)
    for r0, k, th0 in starts:
        piece = fam.pieces[k]
        if piece.dim == 0:
            th, res = th0, r0
        else:
            def fun(th, piece=piece):
                return lc.apply(piece.matrix(th), x) - w

            def jac(th, fun=fun):
                # central differences with an absolute step floor; the default
                # relative step degenerates for parameters near zero
                h = 1e-6 * (1.0 + np.abs(th))
                cols = [(fun(th + e) - fun(th - e)) / (2 * e[j]) for j, e in enumerate(np.diag(h))]
                return np.stack(cols, axis=-1)
            try:
                sol = least_squares(fun, th0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=400)
            except ValueError:
                continue
            th, res = sol.x, float(np.linalg.norm(sol.fun))
        if res < best[0]:
            best = (res, k, th)
        if res <= tol * scale:
            break
    res, k, th = best
    if k is None:
        raise ConvergenceError(f"{fam.name}: no parameter found", np.inf)
    piece = fam.pieces[k]
    return piece.label, np.asarray(th), piece.matrix(np.asarray(th)), res / scale


@dataclass
class M2Report:
    coverage: float
    n_targets: int
    uncovered: list


def check_M2(fam: SpreadFamily, x_samples, target_samples, tol=1e-9) -> M2Report:
    """Sampled surjectivity of omega -> omega(x) for each x."""
    unc = []
    total = 0
    for x in np.asarray(x_samples, dtype=float).reshape(-1, 2):
        if np.hypot(*x) == 0:
            raise ValueError("M2 needs non-zero x")
        for w in np.asarray(target_samples, dtype=float).reshape(-1, 2):
            total += 1
            try:
                _, th, _, res = solve_params(fam, x, w)
            except ConvergenceError:
                res = np.inf
            if not res <= tol:
                unc.append({"x": x.tolist(), "target": w.tolist(), "residual": float(res)})
    return M2Report(1.0 - len(unc) / total if total else 0.0, total, unc)


def m2_targets(n_angles=16, radii=(0.5, 1.0, 2.0, 4.0)):
    """Circle targets with angles offset from the coordinate axes."""
    ang = lc.TWO_PI * (np.arange(n_angles) + 0.5) / n_angles
    return np.array([[r * np.cos(a), r * np.sin(a)] for r in radii for a in ang])


# --- normalization ------------------------------------------------------------

def _find_tag(sample, tag):
    if isinstance(tag, (int, np.integer)):
        return int(tag)
    for i, (lab, p) in enumerate(sample.tags):
        if np.allclose(p, tag) and len(p) == len(tag):
            return i
    raise KeyError(f"tag {tag} not in sample")


def normalize_spread(sample: SpreadSample, tag0, tag1) -> SpreadSample:
    """(w - w0)(w1 - w0)^-1; w0 goes to 0 and w1 to the identity."""
    i0, i1 = _find_tag(sample, tag0), _find_tag(sample, tag1)
    if i0 == i1:
        raise ValueError("normalization needs two distinct elements")
    d = sample.matrices[i1] - sample.matrices[i0]
    if abs(lc.det(d)) <= lc.ATOL * max(1.0, np.abs(d).max() ** 2):
        raise lc.DomainError("w1 - w0 is singular")
    mats = (sample.matrices - sample.matrices[i0]) @ lc.inv(d)
    mats[i0] = 0.0
    mats[i1] = np.eye(2)
    return SpreadSample(sample.name, sample.params, list(sample.tags), mats, sample.includes_vertical)


# --- loop from spread ---------------------------------------------------------

class SpreadLoop:
    """m o x = omega_m(x) with omega_m(e) = m."""

    def __init__(self, fam: SpreadFamily, e=(1.0, 0.0), tol=1e-11):
        self.fam = fam
        self.e = np.asarray(e, dtype=float)
        if np.hypot(*self.e) == 0:
            raise lc.DomainError("e must be non-zero")
        self.tol = tol

    def translation(self, m):
        _, _, mat, res = solve_params(self.fam, self.e, m, tol=self.tol)
        if res > 1e-9:
            raise ConvergenceError(f"{self.fam.name}: no member with first column {list(m)}", res)
        return mat

    def __call__(self, m, x):
        m = np.asarray(m, dtype=float)
        x = np.asarray(x, dtype=float)
        if m.ndim == 1:
            return self.translation(m) @ x
        return np.array([self.translation(mi) @ xi for mi, xi in zip(m, np.broadcast_to(x, m.shape))])


def loop_from_spread(fam: SpreadFamily, e=(1.0, 0.0)) -> SpreadLoop:
    return SpreadLoop(fam, e)


# --- Betten's section form ----------------------------------------------------

def sigma_prime_matrix(r, t, a, b):
    """rotation(t) diag(r a, 1/(r a)) [[1, b/a], [0, r^2]]."""
    r, t, a, b = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, t, a, b)))
    z = np.zeros_like(r)
    d = lc.mat(r * a, z, z, 1.0 / (r * a))
    n = lc.mat(np.ones_like(r), b / a, z, r * r)
    return lc.rotation(t) @ d @ n


def sigma_matrix(r, t, a, b):
    """rotation(t) (r I) [[a, b], [0, 1/a]]."""
    return lc.compose(r, t, a, b)


def sigma_prime_to_sigma(r, t, a, b):
    """Read (u, t, a, b) of the section form off Betten's product."""
    if np.any(np.asarray(r) <= 0):
        raise lc.DomainError("r must be positive")
    return lc.decompose_arrays(sigma_prime_matrix(r, t, a, b))


def complex_spread(n=15, span=3.0) -> SpreadFamily:
    """{[[x, -y], [y, x]]}: the spread of the complex field."""
    g = np.linspace(-span, span, n)
    seeds = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)

    def matrix(th):
        th = np.asarray(th, dtype=float)
        x, y = th[..., 0], th[..., 1]
        return lc.mat(x, -y, y, x)

    def sample():
        return {"main": np.stack(np.meshgrid(np.linspace(-3, 3, 10), np.linspace(-3.1, 2.9, 20),
                                             indexing="ij"), -1).reshape(-1, 2)}

    return SpreadFamily("complex", (SpreadPiece(matrix, seeds),), {}, sample_params=sample)


# --- section read off a sampled spread ------------------------------------------

def section_from_sample(sample: SpreadSample):
    """Piecewise-linear section pair interpolated from a sampled spread.

    Each member with positive determinant is the translation of its first
    column; its decomposition gives (u, t, a, b).  Values are interpolated in
    (log u, t) with the t axis replicated once on each side; outside the
    sampled hull the nearest sample is used.  Returns (section, (u_min, u_max)).
    """
    from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator

    from .section_model import SectionPair

    m = sample.matrices
    keep = lc.det(m) > lc.ATOL
    if keep.sum() < 4:
        raise ValueError("sample has too few invertible members to interpolate a section")
    u, t, k, l = lc.decompose_arrays(m[keep])
    lu = np.log(u)
    pts = np.concatenate([np.stack([lu, t + s], -1) for s in (-lc.TWO_PI, 0.0, lc.TWO_PI)])
    vals = np.tile(np.stack([k, l], -1), (3, 1))
    lin = LinearNDInterpolator(pts, vals)
    near = NearestNDInterpolator(pts, vals)

    def ab(uu, tt):
        uu, tt = np.broadcast_arrays(np.asarray(uu, dtype=float), np.asarray(tt, dtype=float))
        x = np.stack([np.log(uu), lc.norm_angle(tt)], -1).reshape(-1, 2)
        v = lin(x)
        bad = ~np.all(np.isfinite(v), axis=-1)
        if bad.any():
            v[bad] = near(x[bad])
        v = v.reshape(uu.shape + (2,))
        return v[..., 0], v[..., 1]

    sec = SectionPair(ab=ab, name=sample.name, params={k_: v_ for k_, v_ in sample.params})
    return sec, (float(u.min()), float(u.max()))
