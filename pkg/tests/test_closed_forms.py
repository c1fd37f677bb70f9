import numpy as np
import pytest
from hypothesis import given, strategies as st

from ipsdual import closed_forms as cf
from ipsdual import exact
from ipsdual.lattice import DcpParams

rate = st.floats(0.05, 3.0)
dcp = st.builds(DcpParams, rate, rate, rate, rate, rate, rate)
dcp_left_only = st.builds(lambda a, g, lam, D: DcpParams(a, 0, g, 0, lam, D), rate, rate, rate, rate)


@given(dcp)
def test_stationary_n1(p):
    m = exact.stationary_for(p, 1)
    for k, v in cf.stationary_n1(p).items():
        assert m.prob(k) == pytest.approx(v, abs=1e-13)


@given(dcp)
def test_stationary_n2(p):
    m = exact.stationary_for(p, 2)
    for k, v in cf.stationary_n2(p).items():
        assert m.prob(k) == pytest.approx(v, abs=1e-12)


@given(dcp)
def test_moments_n2(p):
    m = exact.stationary_for(p, 2)
    r1, r2, r12 = cf.moments_n2(p)
    assert r1 == pytest.approx(exact.correlation_direct(m, (1,)).value, abs=1e-12)
    assert r2 == pytest.approx(exact.correlation_direct(m, (2,)).value, abs=1e-12)
    assert r12 == pytest.approx(exact.correlation_direct(m, (1, 2)).value, abs=1e-12)


def test_decoupled_limit_fixes_labels():
    # D = 0 and tiny lam: site 1 is fed by alpha/gamma only
    p = DcpParams(2.0, 0.0, 1.0, 0.0, 1e-12, 0.0)
    nu = cf.stationary_n2(p)
    assert nu[(1, 0)] == pytest.approx((2 / 4) * 1.0, abs=1e-9)
    assert nu[(0, 1)] == pytest.approx(0.0, abs=1e-9)


@given(dcp)
def test_infinite_stirring_limit(p):
    q = DcpParams(p.alpha, p.beta, p.gamma, p.delta, p.lam, 1e8)
    m = exact.stationary_for(q, 2)
    for k, v in cf.stationary_n2_infinite(p).items():
        assert m.prob(k) == pytest.approx(v, abs=1e-6)
    occ = cf.occupancy_n2_infinite(p)
    assert sum(occ) == pytest.approx(1.0, abs=1e-14)


def test_absorption_n1():
    p = DcpParams(0.7, 0, 0.5, 0, 1, 1)
    assert cf.absorption_n1(p) == pytest.approx((1 / 2.2, 1.2 / 2.2))


def test_spot_value():
    f = cf.AbsorptionClosedFormN2.from_params(DcpParams(1, 0, 1, 0, 1, 1))
    assert f.x(0) == pytest.approx((8 / 23, 5 / 23, 12 / 23), abs=1e-15)


@given(dcp_left_only)
def test_absorption_closed_form_corrected(p):
    f = cf.AbsorptionClosedFormN2.from_params(p)
    laws = [exact.absorption_law(p, c, 6).joint[:, 0] for c in [(1, 0), (1, 1), (0, 1)]]
    for k in range(7):
        x = f.x(k)
        for j in range(3):
            assert x[j] == pytest.approx(laws[j][k], abs=1e-10)


@given(dcp_left_only)
def test_printed_general_term_agrees_up_to_three(p):
    f = cf.AbsorptionClosedFormN2.from_params(p)
    for k in range(4):
        assert f.x(k, "printed") == f.x(k, "corrected")


def test_printed_general_term_is_off_by_constant_factor():
    f = cf.AbsorptionClosedFormN2.from_params(DcpParams(1, 0, 1, 0, 1, 1))
    ratio = np.array(f.x(5, "printed")) / np.array(f.x(5, "corrected"))
    assert np.allclose(ratio, f.phi / (f.lam * f.E), rtol=1e-12)
    assert abs(ratio[0] - 1) > 1e-3


@given(dcp_left_only)
def test_absorption_infinite_limit(p):
    f = cf.AbsorptionClosedFormN2.from_params(p)
    big = cf.AbsorptionClosedFormN2(f.a, f.lam, 1e8)
    for k in range(6):
        assert f.x_infinite(k) == pytest.approx(big.x(k), abs=1e-6)


def test_closed_form_requires_left_only():
    with pytest.raises(ValueError):
        cf.AbsorptionClosedFormN2.from_params(DcpParams(1, 1, 1, 0, 1, 1))
    with pytest.raises(ValueError):
        cf.AbsorptionClosedFormN2(1, 1, 1).x(-1)
