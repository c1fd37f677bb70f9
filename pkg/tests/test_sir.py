import itertools
import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from ipsdual import exact
from ipsdual.generators import OVERFLOW, TRAP, SirDualState, build_sir_dual
from ipsdual.lattice import SirParams
from ipsdual.sir import (ConfigurationData, ProductMeasure, SirConfiguration, cluster_indicator,
                         dual_walk_transient, g_cluster, h_cluster, j_cluster, light_cone_guard,
                         rsi_fixture, single_s_fixture, ti_g, ti_h, ti_j)

CLUSTER = {"G": g_cluster, "J": j_cluster, "H": h_cluster}


def brute_force_clusters(eta: SirConfiguration, p: SirParams, t: float, kind: str):
    """All cluster expectations from the full 3^W chain on a window with R outside."""
    W, lo = len(eta.states), eta.lo
    states = ["".join(w) for w in itertools.product("SIR", repeat=W)]
    idx = {s: k for k, s in enumerate(states)}
    Q = np.zeros((len(states), len(states)))
    for s, k in idx.items():
        for x, c in enumerate(s):
            if c == "I":
                Q[k, idx[s[:x] + "R" + s[x + 1:]]] += p.gamma_rec
            elif c == "S":
                inf = sum(0 <= y < W and s[y] == "I" for y in (x - 1, x + 1))
                if inf:
                    Q[k, idx[s[:x] + "I" + s[x + 1:]]] += p.beta_inf * inf
        Q[k, k] = -Q[k].sum()
    pt = sla.expm(Q * t)[idx[eta.states]]
    out = {}
    for r in range(lo, lo + W):
        for n in range(1, lo + W - r):
            f = [cluster_indicator(SirConfiguration(lo, s, "R"), r, n, kind) for s in states]
            out[(r, n)] = float(pt @ np.array(f, dtype=float))
    return out


def geometric(p: SirParams, law, n, t):
    pS, pI, pR = law
    b, g = p.beta_inf, p.gamma_rec
    kappa, c1 = 2 * (g + b) - 2 * b * pS, g + b - b * pS
    G = pI ** 2 * pS ** n * math.exp(-kappa * t)
    mix = pI ** 2 * pS ** n * math.exp(-kappa * t) * math.expm1(c1 * t) / c1
    J = math.exp(-c1 * t) * pR * pI * pS ** n + g * mix
    H = math.exp(-c1 * t) * pI * pS ** n - b * mix
    return {"G": G, "J": J, "H": H}


@pytest.mark.parametrize("states,r,n,expect", [
    ("ISSI", 0, 2, {"G": 1, "J": 0, "H": 1}),
    ("RSSI", 0, 2, {"G": 0, "J": 1, "H": 1}),
    ("SSSI", 0, 2, {"G": 0, "J": 0, "H": 1}),
    ("ISRI", 0, 2, {"G": 0, "J": 0, "H": 0}),
    ("ISSS", 0, 2, {"G": 0, "J": 0, "H": 0}),
])
def test_indicator_examples(states, r, n, expect):
    eta = SirConfiguration(-1, states, "R")
    for kind, v in expect.items():
        assert cluster_indicator(eta, r, n, kind) == v


@given(st.text("SIR", min_size=3, max_size=9), st.data())
def test_h_is_g_plus_j_plus_longer_h(w, data):
    eta = SirConfiguration(0, w, "R")
    r = data.draw(st.integers(1, len(w) - 1))
    n = data.draw(st.integers(1, len(w) - r))
    H = cluster_indicator(eta, r, n, "H")
    rest = cluster_indicator(eta, r - 1, n + 1, "H") if r >= 1 else 0
    assert H == cluster_indicator(eta, r, n, "G") + cluster_indicator(eta, r, n, "J") + rest


def test_configuration_validation():
    with pytest.raises(ValueError):
        SirConfiguration(0, "SXI")
    with pytest.raises(ValueError):
        SirConfiguration(0, "SI", "I")
    with pytest.raises(ValueError):
        SirConfiguration(0, "SI", None).at(5)
    with pytest.raises(ValueError):
        cluster_indicator(SirConfiguration(0, "SI"), 0, 0, "G")
    assert SirConfiguration(0, "SI").padded(2).states == "RRSIRR"


@pytest.mark.parametrize("t", [0.0, 0.3, 1.0, 2.5])
def test_fixtures_closed_form(t):
    p = SirParams(0.8, 0.6)
    b, g = p.beta_inf, p.gamma_rec
    assert g_cluster(single_s_fixture(), p, 0, 1, t).value == pytest.approx(
        math.exp(-2 * (b + g) * t), abs=1e-14)
    # R S I: J(0,1,t) = P[S survives, I still infected] = e^{-(b+g)t}
    assert j_cluster(rsi_fixture(), p, 0, 1, t).value == pytest.approx(math.exp(-(b + g) * t), abs=1e-12)


@pytest.mark.parametrize("states", ["ISSISI", "RSISSI", "ISSSSI", "SISRIS"])
@pytest.mark.parametrize("kind", ["G", "J", "H"])
def test_clusters_match_full_chain(states, kind):
    p, t = SirParams(0.9, 0.5), 0.7
    eta = SirConfiguration(0, states, "R")
    ref = brute_force_clusters(eta, p, t, kind)
    for (r, n), v in ref.items():
        got = CLUSTER[kind](eta, p, r, n, t)
        assert abs(got.value - v) < 1e-10
        assert got.truncation_error < 1e-10


@pytest.mark.parametrize("law", [(0.5, 0.3, 0.2), (0.8, 0.1, 0.1), (0.2, 0.7, 0.1)])
@pytest.mark.parametrize("t", [0.0, 0.4, 1.5])
def test_product_measure_geometric(law, t):
    p = SirParams(1.2, 0.7)
    mu = ProductMeasure(law)
    for n in (1, 3):
        ref = geometric(p, law, n, t)
        assert g_cluster(mu, p, 0, n, t).value == pytest.approx(ref["G"], abs=1e-12)
        assert j_cluster(mu, p, 0, n, t).value == pytest.approx(ref["J"], abs=1e-12)
        assert h_cluster(mu, p, 0, n, t, tol=1e-13).value == pytest.approx(ref["H"], abs=1e-11)
        G0 = lambda m: mu.G0(0, m)
        assert ti_g(G0, p, n, t) == pytest.approx(ref["G"], abs=1e-13)
        assert ti_j(G0, lambda m: mu.J0(0, m), p, n, t) == pytest.approx(ref["J"], abs=1e-11)
        assert ti_h(G0, lambda m: mu.H0(0, m), p, n, t) == pytest.approx(ref["H"], abs=1e-11)


def test_product_measure_validation():
    with pytest.raises(ValueError):
        ProductMeasure((0.5, 0.5, 0.5))


def test_site_dependent_product_measure():
    law = lambda x: (0.6, 0.3, 0.1) if x % 2 else (0.4, 0.4, 0.2)
    mu = ProductMeasure(law)
    assert not mu.translation_invariant
    v = g_cluster(mu, SirParams(1, 1), 0, 2, 0.0).value
    assert v == pytest.approx(0.3 * 0.4 * 0.6 * 0.4)


def test_no_recovery():
    p = SirParams(1.0, 0.0)
    eta = SirConfiguration(0, "ISSSI", "R")
    ref = brute_force_clusters(eta, p, 0.5, "J")
    for (r, n), v in ref.items():
        assert j_cluster(eta, p, r, n, 0.5).value == pytest.approx(v, abs=1e-10)


def test_time_zero_and_all_removed():
    eta = SirConfiguration(-2, "ISSIRSI", "R")
    p = SirParams(1, 1)
    for r in range(-2, 4):
        for n in range(1, 4):
            assert h_cluster(eta, p, r, n, 0.0).value == cluster_indicator(eta, r, n, "H")
    dead = SirConfiguration(0, "RRSRR", "R")
    assert h_cluster(dead, p, 2, 1, 1.0).value == 0
    assert g_cluster(dead, p, 2, 1, 1.0).value == 0


def test_h_n_max_too_small():
    with pytest.raises(ValueError):
        h_cluster(SirConfiguration(0, "ISSSSI", "R"), SirParams(1, 1), 1, 1, 1.0, n_max=2)
    with pytest.raises(ValueError):
        g_cluster(single_s_fixture(), SirParams(1, 1), 0, 1, -1.0)


def test_truncation_is_monotone():
    mu, p = ProductMeasure((0.7, 0.2, 0.1)), SirParams(2.0, 0.5)
    errs = [g_cluster(mu, p, 0, 1, 2.0, tol).truncation_error for tol in (1e-4, 1e-8, 1e-12)]
    assert errs[0] >= errs[1] >= errs[2] and errs[2] < 1e-12
    vals = [g_cluster(mu, p, 0, 1, 2.0, tol).value for tol in (1e-4, 1e-8, 1e-12)]
    assert vals[0] <= vals[1] <= vals[2]


@pytest.mark.parametrize("layer", ["G", "J"])
@pytest.mark.parametrize("t", [0.0, 0.4, 1.0])
def test_dual_walk_matches_generator(layer, t):
    p = SirParams(0.6, 0.8)
    law = dual_walk_transient(p, 0, 2, layer, t)
    assert law.total() == pytest.approx(1.0, abs=1e-12)
    G = build_sir_dual(p, (-18, 0), 20)
    p0 = np.zeros(G.dim)
    p0[G.row_index[SirDualState(0, 2, layer)]] = 1
    pt = exact.transient(G, p0, t)
    assert pt[G.row_index[OVERFLOW]] < 1e-12
    assert law.trap == pytest.approx(pt[G.row_index[TRAP]], abs=1e-14)
    for s, q in law.probs.items():
        if s in G.row_index:
            assert q == pytest.approx(pt[G.row_index[s]], abs=1e-12)


def test_light_cone_guard():
    assert light_cone_guard(0.0, 1.0) == 1
    g = light_cone_guard(1.0, 2.0)
    assert g >= 10
    assert light_cone_guard(1.0, 2.0, 1e-4) < g


def test_configuration_data_max_len():
    d = ConfigurationData(SirConfiguration(0, "SISSSIS", "R"))
    assert d.max_len == 3 and d.max_s_run() == 3
    assert ConfigurationData(SirConfiguration(0, "SIS", "S")).max_s_run() == math.inf
