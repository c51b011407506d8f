import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qflab import betten_catalog as bc
from qflab import differentiable_loops as dl
from qflab import linalg_core as lc


def test_R_one_gives_unit_profile():
    p = dl.compact_loop_from_R(lambda s: np.ones_like(s))
    t = dl.grid(256)
    assert np.max(np.abs(p.a_u(t) - 1)) < 1e-10
    assert p.periodic and p.origin == "R"


def test_R_zero_is_not_periodic():
    with pytest.raises(dl.ProfileInvariantError):
        dl.compact_loop_from_R(lambda s: np.zeros_like(s))


def test_R_too_large_is_invalid():
    with pytest.raises(dl.InvalidRError):
        dl.compact_loop_from_R(lambda s: np.full_like(s, 5.0))


def test_integral_R_closed_form():
    # R = e^s cos s: int_0^t cos s ds = sin t
    t = np.linspace(0, lc.TWO_PI, 9)
    got = dl.integral_R(lambda s: np.exp(s) * np.cos(s), t, quadrature_n=512)
    assert np.allclose(got, np.sin(t), atol=1e-8)


def test_simpson_order():
    orders, errs = dl.simpson_order(np.exp, np.exp(1.7) - 1, 0.0, 1.7)
    assert np.all(orders >= 3.9)
    assert np.all(np.diff(errs) < 0)


@settings(max_examples=4)
@given(st.floats(0.0, 0.3), st.integers(1, 3))
def test_R_from_known_profile(eps, j):
    # g = 1 + eps sin(j t) with R = g - g' gives a_u = 1/g
    if eps * (1 + j) >= 1:
        eps = 0.9 / (1 + j)
    g = lambda t: 1 + eps * np.sin(j * t)
    R = lambda s: g(s) - eps * j * np.cos(j * s)
    p = dl.compact_loop_from_R(R)
    t = dl.grid(64)
    assert np.allclose(p.a_u(t), 1 / g(t), rtol=1e-8)


def test_derivative_second_order():
    ratios = []
    for n in (64, 128, 256, 512):
        t = dl.grid(n)
        h = t[1] - t[0]
        ratios.append(np.max(np.abs(dl.derivative(np.sin(t), h) - np.cos(t))) / h ** 2)
    assert max(ratios) / min(ratios) < 2.0


def test_c1_identity_passes():
    rep = dl.c1_inequality_check(dl.profile())
    assert rep.status == "pass"
    assert rep.extra["max_lhs"] == pytest.approx(-1.0)
    assert rep.extra["initial_margin"] == pytest.approx(1.0)


def test_c1_flags_boundary():
    # bbar = t: abar'^2 + bbar abar' + bbar' abar - abar^2 = 0 everywhere
    rep = dl.c1_inequality_check(dl.profile(b_u=lambda t: -np.asarray(t)))
    assert rep.status == "boundary" and rep.violations


def test_c1_exponential_lhs():
    # abar = e^(t/2): lhs = -e^t (1 - 1/4) = -0.75 e^t
    rep = dl.c1_inequality_check(dl.profile(a_u=lambda t: np.exp(-0.5 * np.asarray(t))))
    assert rep.status == "pass" and rep.extra["max_lhs"] == pytest.approx(-0.75, rel=1e-6)


def test_c1_fails_fast_growth():
    rep = dl.c1_inequality_check(dl.profile(a_u=lambda t: np.exp(-2 * np.asarray(t))))
    assert rep.status == "fail" and rep.min_margin < 0


def test_b_bound_check():
    assert dl.b_bound_check(dl.profile()).status == "pass"
    # b = -a int (a^2 - a'^2)/a^4 = -t for a = 1
    assert dl.b_bound_check(dl.profile(b_u=lambda t: -np.asarray(t))).status == "boundary"
    assert dl.b_bound_check(dl.profile(b_u=lambda t: np.sin(t))).status == "pass"


def test_exp_band():
    assert dl.exp_band_check(dl.profile()).status == "pass"
    assert dl.exp_band_check(dl.profile(a_u=lambda t: np.exp(-np.asarray(t)))).status == "boundary"
    p11a = dl.profile_from_section(bc.default_instance("P11a").section)
    with pytest.raises(lc.DomainError):
        dl.exp_band_check(p11a)


def test_exp_band_compact_profile():
    p = dl.profile(a_u=lambda t: 1 / (1 + 0.5 * np.sin(t) ** 2))
    assert dl.exp_band_check(p).status == "pass"


def test_r_profile_lists_unchecked_premise():
    p = dl.compact_loop_from_R(lambda s: np.ones_like(s))
    assert dl.exp_band_check(p).unchecked == [dl.UNCHECKED_R]


def test_profile_json_round_trip():
    t = np.linspace(0, lc.TWO_PI, 101)
    p = dl.profile_from_json(json.dumps({"t": t.tolist(), "a": np.ones(101).tolist(), "b": (0 * t).tolist()}))
    assert dl.c1_inequality_check(p).status == "pass"


@pytest.mark.parametrize("obj", [{"t": [0, 1]}, {"t": [0, 1], "a": [1, -1], "b": [0, 0]},
                                 {"t": [1, 0], "a": [1, 1], "b": [0, 0]}])
def test_profile_json_malformed(obj):
    with pytest.raises(ValueError):
        dl.profile_from_json(obj)


def test_nonfinite_derivative():
    with pytest.raises(dl.GridTooCoarseError):
        dl.c1_inequality_check(dl.profile(b_u=lambda t: np.where(np.asarray(t) > 3, np.nan, 0.0)))


def test_nonpositive_profile():
    with pytest.raises(dl.ProfileInvariantError):
        dl.c1_inequality_check(dl.profile(a_u=lambda t: np.cos(t)))


def test_section_profile_p16b():
    p = dl.profile_from_section(bc.default_instance("P16b").section, u=2.0)
    assert p.endpoint_defects()["b(0)"] == pytest.approx(np.log(2.0))
    assert not p.periodic
