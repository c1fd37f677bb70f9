from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ipsdual import exact
from ipsdual.generators import build_dcp, build_gdcp
from ipsdual.lattice import Configuration, DcpParams, GdcpParams

from conftest import random_dcp, random_gdcp

# stationary laws from an independent rational solve (rule enumeration, sympy LU)
DCP_N2_UNIT = {(0, 0): Fraction(21, 40), (0, 1): Fraction(1, 8), (1, 0): Fraction(1, 5),
               (1, 1): Fraction(3, 20)}
DCP_N2_RATIONAL = {(0, 0): Fraction(23408, 45411), (0, 1): Fraction(3046, 15137),
                   (1, 0): Fraction(5692, 45411), (1, 1): Fraction(2391, 15137)}


@pytest.mark.parametrize("params,oracle", [
    (DcpParams(1, 0, 1, 0, 1, 1), DCP_N2_UNIT),
    (DcpParams(0.5, 1 / 3, 2, 0.75, 1.5, 2.5), DCP_N2_RATIONAL),
])
def test_stationary_frozen_oracles(params, oracle):
    m = exact.stationary_for(params, 2)
    for conf, q in oracle.items():
        assert m.prob(conf) == pytest.approx(float(q), abs=1e-14)


@given(st.integers(1, 6), st.randoms(use_true_random=False))
def test_stationary_invariants(N, r):
    rng = np.random.default_rng(r.randint(0, 2 ** 32))
    p = random_dcp(rng)
    L = build_dcp(p, N)
    m = exact.stationary(L)
    assert m.probs.min() >= -1e-15
    assert abs(m.probs.sum() - 1) < 1e-12
    assert np.abs(m.probs @ L.dense()).max() < 1e-10


def test_closed_boundaries_give_dirac_on_empty():
    m = exact.stationary(build_dcp(DcpParams(0, 0, 0, 0, 2.0, 1.0), 3))
    assert m.reducible
    assert m.prob((0, 0, 0)) == 1.0


def test_transient_basics():
    L = build_dcp(DcpParams(1, 1, 1, 1, 1, 1), 3)
    p0 = np.zeros(8)
    p0[5] = 1
    assert np.array_equal(exact.transient(L, p0, 0.0), p0)
    pt = exact.transient(L, p0, 2.0)
    assert abs(pt.sum() - 1) < 1e-12 and pt.min() > -1e-15
    far = exact.transient(L, p0, 200.0)
    assert np.abs(far - exact.stationary(L).probs).max() < 1e-10
    with pytest.raises(ValueError):
        exact.transient(L, p0, -1.0)


def test_spectral_gap_positive():
    assert exact.spectral_gap(build_dcp(DcpParams(1, 1, 1, 1, 1, 1), 3)) > 0


def test_recursive_order():
    assert exact.recursive_order(2) == [(1, 0), (1, 1), (0, 1)]
    order = exact.recursive_order(4)
    assert len(order) == 15 and len(set(order)) == 15


def test_absorption_spot_values():
    # alpha = gamma = lam = D = 1, beta = delta = 0
    p = DcpParams(1, 0, 1, 0, 1, 1)
    law = exact.absorption_law(p, (1, 0), 6)
    assert law.joint[0, 0] == pytest.approx(8 / 23, abs=1e-14)
    assert exact.absorption_law(p, (1, 1), 6).joint[0, 0] == pytest.approx(5 / 23, abs=1e-14)
    assert exact.absorption_law(p, (0, 1), 6).joint[0, 0] == pytest.approx(12 / 23, abs=1e-14)
    assert np.all(law.joint[:, 1:] == 0)


def test_absorption_single_site():
    p = DcpParams(0.7, 0, 0.5, 0, 1, 1)
    law = exact.absorption_law(p, (1,), 4)
    assert law.joint[0, 0] == pytest.approx(1 / 2.2, abs=1e-15)
    assert law.joint[1, 0] == pytest.approx(1.2 / 2.2, abs=1e-15)
    assert abs(law.total() + law.tail - 1) < 1e-12


@pytest.mark.parametrize("init", [(1, 0, 0), (0, 1, 1), (1, 1, 1)])
def test_absorption_routes_agree(init):
    p = DcpParams(0.4, 0.6, 0.8, 0.3, 1.3, 0.9)
    a = exact.absorption_law(p, init, 5, "linear")
    b = exact.absorption_law(p, init, 5, "transient")
    assert np.abs(a.joint - b.joint).max() < 1e-12
    assert a.joint.min() >= -1e-15
    assert abs(a.joint.sum() + a.tail - 1) < 1e-12


def test_absorption_from_empty_and_bad_route():
    p = DcpParams(1, 1, 1, 1, 1, 1)
    law = exact.absorption_law(p, (0, 0), 3)
    assert law.joint[0, 0] == 1.0
    with pytest.raises(ValueError):
        exact.absorption_law(p, (1, 0), 3, route="other")


def test_annihilating_gdcp_absorbs_at_most_one(rng):
    p = random_gdcp(rng, annihilating=True)
    for x in range(3):
        law = exact.absorption_law(p, tuple(int(y == x) for y in range(3)), 3)
        assert law.joint[1:, 1:].sum() < 1e-14
        assert law.joint[2:, :].sum() + law.joint[:, 2:].sum() < 1e-14
        assert law.joint.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_correlation_routes(rng, N):
    for _ in range(2):
        p = random_dcp(rng)
        m = exact.stationary_for(p, N)
        for sites in [(1,), (N,), (1, N), tuple(range(1, N + 1))]:
            d = exact.correlation_direct(m, sites)
            v = exact.correlation_via_duality(p, N, sites, 1e-10)
            assert abs(d.value - v.value) < 1e-9
            assert v.error_bound < 1e-10


def test_correlation_gdcp(rng):
    p = random_gdcp(rng)
    m = exact.stationary_for(p, 3)
    d = exact.correlation_direct(m, (1, 2))
    v = exact.correlation_via_duality(p, 3, (1, 2))
    assert abs(d.value - v.value) < 1e-9


def test_truncation_error_carries_partial():
    p = DcpParams(0.2, 0.2, 3.0, 3.0, 2.5, 1.0)
    with pytest.raises(exact.TruncationError) as e:
        exact.correlation_via_duality(p, 3, (2,), tol=1e-14, k_start=1, k_cap=1)
    assert e.value.partial is not None


def test_correlation_bad_sites():
    p = DcpParams(1, 1, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        exact.correlation_via_duality(p, 3, (2, 1))
    with pytest.raises(ValueError):
        exact.correlation_via_duality(p, 3, (4,))


@given(st.lists(st.floats(0, 1), min_size=7, max_size=7))
def test_moment_transforms_are_inverse(vals):
    keys = [(1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3)]
    rho = dict(zip(keys, vals))
    phi = exact.complement_moments_from_correlations(rho)
    back = exact.correlations_from_complement_moments(phi)
    for k in keys:
        assert back[k] == pytest.approx(rho[k], abs=1e-12)


def test_lemma_bound(rng):
    for _ in range(3):
        p = random_dcp(rng)
        for y in (1, 2, 3):
            rho, bound = exact.lemma_bound_check(p, 3, y)
            assert rho <= bound + 1e-12


def test_gdcp_stationary_consistent():
    g = GdcpParams(0.5, 1 / 3, 1, 0.25, lam=1, diffusion=0.5, mu1=1.5, mu2=0.5)
    m = exact.stationary(build_gdcp(g, 3))
    rho = [exact.correlation_direct(m, (x,)).value for x in (1, 2, 3)]
    assert np.allclose(rho, [17 / 83, 12 / 83, 15 / 83], atol=1e-14)
