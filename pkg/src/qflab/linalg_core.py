"""2x2 real linear algebra and the rotation/triangular decomposition of GL2+.

Matrices are plain numpy arrays of shape (..., 2, 2); vectors have shape
(..., 2).  Every function broadcasts over leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi
ATOL = 1e-12
RTOL = 1e-10


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class NotInGroupError(DomainError):
    """Matrix with non-positive determinant handed to a GL2+ routine."""


@dataclass(frozen=True)
class GroupCoords:
    u: float
    t: float
    k: float
    l: float

    def __post_init__(self):
        if not self.u > 0 or not self.k > 0:
            raise DomainError(f"u and k must be positive, got u={self.u}, k={self.k}")


def norm_angle(t):
    """Map angles into [0, 2pi); values that round to 2pi become 0."""
    t = np.mod(t, TWO_PI)
    return np.where(t >= TWO_PI, 0.0, t)


def angle_diff(s, t):
    """Signed difference s - t wrapped into (-pi, pi]."""
    d = np.mod(np.asarray(s) - np.asarray(t) + np.pi, TWO_PI) - np.pi
    return np.where(d == -np.pi, np.pi, d)


def close(a, b, atol=ATOL, rtol=RTOL):
    """Combined test |a-b| <= atol + rtol*max(|a|,|b|), elementwise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.abs(a - b) <= atol + rtol * np.maximum(np.abs(a), np.abs(b))


def det(g):
    g = np.asarray(g, dtype=float)
    return g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]


def mat(m11, m12, m21, m22):
    m11, m12, m21, m22 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (m11, m12, m21, m22)))
    out = np.empty(m11.shape + (2, 2))
    out[..., 0, 0] = m11
    out[..., 0, 1] = m12
    out[..., 1, 0] = m21
    out[..., 1, 1] = m22
    return out


def apply(g, v):
    """Matrix-vector product with broadcasting: g (...,2,2), v (...,2)."""
    return np.einsum("...ij,...j->...i", np.asarray(g, dtype=float), np.asarray(v, dtype=float))


def inv(g):
    g = np.asarray(g, dtype=float)
    d = det(g)
    return mat(g[..., 1, 1], -g[..., 0, 1], -g[..., 1, 0], g[..., 0, 0]) / d[..., None, None]


def rotation(t):
    """[[cos t, sin t], [-sin t, cos t]]."""
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("rotation angle must be finite")
    c, s = np.cos(t), np.sin(t)
    return mat(c, s, -s, c)


def triangular(k, l):
    """[[k, l], [0, 1/k]] for k > 0."""
    k = np.asarray(k, dtype=float)
    if np.any(~(k > 0)):
        raise DomainError("triangular factor needs k > 0")
    return mat(k, l, np.zeros_like(k), 1.0 / k)


def compose(u, t, k, l):
    """u * rotation(t) * triangular(k, l)."""
    u = np.asarray(u, dtype=float)
    return u[..., None, None] * np.matmul(rotation(t), triangular(k, l))


def decompose_arrays(g):
    """Vectorized decomposition; returns arrays (u, t, k, l).

    The first column of g/u is k*(cos t, -sin t), so t comes from its polar
    angle and l from the second row of rotation(t)^-1 g/u.
    """
    g = np.asarray(g, dtype=float)
    d = det(g)
    if np.any(~(d > 0)):
        raise NotInGroupError("decomposition needs det > 0")
    u = np.sqrt(d)
    g11, g21 = g[..., 0, 0], g[..., 1, 0]
    t = norm_angle(np.arctan2(-g21, g11))
    k = np.hypot(g11, g21) / u
    c, s = np.cos(t), np.sin(t)
    l = (c * g[..., 0, 1] - s * g[..., 1, 1]) / u
    return u, t, k, l


def decompose_gl2plus(g) -> GroupCoords:
    g = np.asarray(g, dtype=float)
    if g.shape != (2, 2):
        raise DomainError("decompose_gl2plus takes a single 2x2 matrix; use decompose_arrays for stacks")
    u, t, k, l = decompose_arrays(g)
    return GroupCoords(float(u), float(t), float(k), float(l))
