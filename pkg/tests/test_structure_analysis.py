import json

import numpy as np
import pytest

from qflab import betten_catalog as bc
from qflab import structure_analysis as sa
from qflab.section_model import NumericPolicy, SectionPair, complex_section

VERDICT_KEYS = ("decomposable", "quasi_simple", "contains_so2", "kernel_is_diagonal", "proper")


@pytest.fixture(scope="module")
def reports():
    return {fid: sa.classify(bc.default_instance(fid).section) for fid in ("complex",) + bc.FAMILY_IDS}


def test_complex_verdicts(reports):
    v = reports["complex"].verdicts()
    assert v["proper"] is False and v["t_normal"] and v["contains_so2"] and not v["quasi_simple"]


@pytest.mark.parametrize("fid", ("complex",) + bc.FAMILY_IDS)
def test_catalog_verdicts(fid, reports):
    exp = bc.default_instance(fid).expected
    v = reports[fid].verdicts()
    assert {k: v[k] for k in VERDICT_KEYS if exp[k] is not None} == {k: exp[k] for k in VERDICT_KEYS if exp[k] is not None}
    assert reports[fid].internal_errors == []


@pytest.mark.parametrize("fid", ("complex",) + bc.FAMILY_IDS)
def test_implications(fid, reports):
    r = reports[fid]
    if not r.quasi_simple:
        assert r.decomposable
    if r.contains_so2:
        assert r.decomposable


def test_p17a_kernel_is_not_diagonal(reports):
    # nothing is asserted for P17a; numerically a(r, pi) != 1
    assert reports["P17a"].kernel_is_diagonal is False


def test_kernel_entries_p11b():
    ks = sa.kernel_translations(bc.default_instance("P11b").section)
    r = NumericPolicy().us
    pos = [m for lam, m in ks.entries if lam > 0]
    neg = [m for lam, m in ks.entries if lam < 0]
    assert np.allclose([m[0][0] for m in pos], r) and np.allclose([m[1][1] for m in pos], r)
    # -r diag(3, 1/3)
    assert np.allclose([m[0][0] for m in neg], -3 * r) and np.allclose([m[1][1] for m in neg], -r / 3)
    assert not ks.kernel_is_diagonal and ks.monotone


def test_decomposability_witness_for_p11b():
    rep = sa.is_decomposable(bc.default_instance("P11b").section)
    assert not rep.decomposable
    w = rep.witnesses[0]
    assert w.k == 0 and w.residual >= 1e-3


def test_p11a_decomposes_with_k1_residual():
    rep = sa.is_decomposable(bc.default_instance("P11a").section)
    assert rep.decomposable and rep.residual_by_k[0] < 1e-12
    # the compact factor of P11a is not pi-periodic
    assert rep.residual_by_k[1] > 0.1


def test_contains_so2():
    assert sa.contains_so2(bc.default_instance("P16a").section).contains_so2
    r = sa.contains_so2(bc.default_instance("P11a").section)
    assert not r.contains_so2 and not r.t_independent and r.witnesses


def test_quasi_simple_p17b_even_difference():
    # m = n = 1, d < 0: the kernel is not diagonal yet the loop splits over the positive scalars
    s = bc.instantiate(bc.FamilySpec("P17b", dict(m=1, n=1, c=0.3, d=-0.7))).section
    q = sa.is_quasi_simple(s)
    assert not q.quasi_simple and not q.kernel_is_diagonal and q.r_independent


def test_group_section():
    assert sa.is_group_section(complex_section())
    assert not sa.is_group_section(bc.default_instance("P16b").section)


def test_t_normality():
    assert sa.t_normality_check(complex_section())
    assert sa.t_normality_check(bc.default_instance("P16b").section)
    assert not sa.t_normality_check(bc.default_instance("P11a").section)


def test_ellipticity_complex_equality_only_at_k_pi():
    rep = sa.t_ellipticity_check(complex_section())
    assert rep.ok and rep.max_abs_trace_outside < 2 and rep.max_abs_trace_inside == pytest.approx(2.0)
    assert rep.cross_check == "compact" and rep.cross_check_ok


def test_ellipticity_flags_upper_bound():
    # a(1,t) = (1+|sin t|)/|cos t| reaches trace 2 off k pi
    t = np.array([np.pi / 4])
    a = (1 + np.sin(t)) / np.cos(t)
    rep = sa.t_ellipticity_check(None, t=t, a1=a, b=np.zeros(1))
    assert not rep.ok and rep.boundary_points == pytest.approx([np.pi / 4])


def test_ellipticity_two_sided():
    t = NumericPolicy().ts
    rep = sa.t_ellipticity_check(None, t=t, a1=np.ones_like(t), b=0.3 * np.sin(t))
    assert rep.ok and rep.cross_check == "two-sided" and rep.cross_check_ok


def test_report_json_schema_and_determinism():
    s = bc.default_instance("P13b").section
    j1, j2 = sa.classify(s).to_json(), sa.classify(s).to_json()
    assert j1 == j2
    d = json.loads(j1)
    assert set(d) == {"family", "params", "verdicts", "diagnostics", "witnesses", "internal_errors"}
    assert d["family"] == "P13b" and d["verdicts"]["decomposable"] is False
    assert all(len(w) == 5 and len(w[1]) == 3 for w in d["witnesses"])


def test_consistency_errors_detects_contradiction():
    rep = sa.classify(complex_section())
    rep.decomposable = False
    assert sa.consistency_errors(rep)


def test_custom_section():
    s = SectionPair.from_functions(lambda u, t: np.ones_like(u), lambda u, t: 0.2 * np.sin(t) * np.log(u),
                                   name="custom")
    r = sa.classify(s)
    assert r.family == "custom" and r.internal_errors == []
