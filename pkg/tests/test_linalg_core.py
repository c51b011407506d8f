import numpy as np
import pytest
from hypothesis import given, strategies as st

from qflab import linalg_core as lc

pos = st.floats(0.05, 20.0)
ang = st.floats(0.0, 2 * np.pi, exclude_max=True)
real = st.floats(-20.0, 20.0)


@given(pos, ang, pos, real)
def test_compose_decompose_round_trip(u, t, k, l):
    g = lc.compose(u, t, k, l)
    c = lc.decompose_gl2plus(g)
    assert np.isclose(c.u, u, rtol=1e-12)
    assert abs(lc.angle_diff(c.t, t)) < 1e-11
    assert np.isclose(c.k, k, rtol=1e-11)
    assert np.isclose(c.l, l, rtol=1e-10, atol=1e-10)


@given(pos, ang, pos, real)
def test_det_of_compose_is_u_squared(u, t, k, l):
    assert np.isclose(lc.det(lc.compose(u, t, k, l)), u * u, rtol=1e-12)


@given(ang, ang)
def test_rotations_add(s, t):
    assert np.allclose(lc.rotation(s) @ lc.rotation(t), lc.rotation(s + t), atol=1e-14)


def test_rotation_convention_first_column():
    # first column of rotation(t) is (cos t, -sin t)
    assert np.allclose(lc.rotation(np.pi / 2)[:, 0], [0.0, -1.0], atol=1e-15)


def test_decompose_rejects_nonpositive_det():
    with pytest.raises(lc.NotInGroupError):
        lc.decompose_gl2plus(np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(lc.NotInGroupError):
        lc.decompose_arrays(np.zeros((3, 2, 2)))


def test_decompose_single_needs_2x2():
    with pytest.raises(lc.DomainError):
        lc.decompose_gl2plus(np.eye(2)[None])


def test_triangular_needs_positive_k():
    with pytest.raises(lc.DomainError):
        lc.triangular(0.0, 1.0)


def test_rotation_needs_finite_angle():
    with pytest.raises(lc.DomainError):
        lc.rotation(np.inf)


def test_group_coords_validation():
    with pytest.raises(lc.DomainError):
        lc.GroupCoords(0.0, 0.0, 1.0, 0.0)
    with pytest.raises(lc.DomainError):
        lc.GroupCoords(1.0, 0.0, -1.0, 0.0)


@given(st.floats(-100, 100))
def test_norm_angle_range(t):
    v = float(lc.norm_angle(t))
    assert 0.0 <= v < 2 * np.pi


def test_inverse_and_apply_broadcast(rng):
    g = lc.compose(rng.uniform(0.5, 2, 5), rng.uniform(0, 6, 5), rng.uniform(0.5, 2, 5), rng.normal(size=5))
    assert np.allclose(lc.inv(g) @ g, np.eye(2), atol=1e-12)
    v = rng.normal(size=(5, 2))
    assert np.allclose(lc.apply(g, v), np.einsum("nij,nj->ni", g, v))


def test_close_mixed_tolerance():
    assert lc.close(1.0, 1.0 + 1e-11)
    assert not lc.close(1.0, 1.0 + 1e-6)
    assert lc.close(0.0, 1e-13)
