import numpy as np
import pytest
import scipy.io
from hypothesis import given, strategies as st

from ipsdual.generators import (OVERFLOW, TRAP, DualConfiguration, SirDualState, build_dcp,
                                build_dual, build_gdcp, build_sir_dual, dual_bulk,
                                fast_stirring_chain)
from ipsdual.lattice import Configuration, DcpParams, GdcpParams, SirParams, index_of

rate = st.floats(0.05, 3.0)
dcp_params = st.builds(DcpParams, rate, rate, rate, rate, rate, rate)


def _assert_generator(G):
    M = G.dense()
    off = M - np.diag(np.diag(M))
    assert (off >= 0).all()
    assert np.abs(M.sum(axis=1)).max() <= 1e-14 * max(1.0, np.abs(M).max())
    pairs = [(r, c) for r, c, _ in G.entries()]
    assert len(pairs) == len(set(pairs))


@given(dcp_params, st.integers(1, 5))
def test_dcp_is_generator(p, N):
    _assert_generator(build_dcp(p, N))


@given(dcp_params, st.integers(1, 6))
def test_dcp_equals_gdcp_under_mapping(p, N):
    a = build_dcp(p, N).dense()
    b = build_gdcp(p.to_gdcp(), N).dense()
    assert np.abs(a - b).max() < 1e-14


def test_dcp_single_site_matrix():
    p = DcpParams(0.3, 0.4, 0.5, 0.6, 1.0, 2.0)
    M = build_dcp(p, 1).dense()
    # creation alpha+delta, removal 1 + gamma + beta
    assert np.allclose(M, [[-0.9, 0.9], [1.9, -1.9]], atol=1e-15)


def test_closed_dcp_empty_is_absorbing():
    p = DcpParams(0, 0, 0, 0, 1.5, 1.0)
    G = build_dcp(p, 4)
    assert np.all(G.dense()[0] == 0)


def test_dcp_bond_entries():
    # N=2: from (1,0): death to (0,0) at 1, hop to (0,1) at D, birth to (1,1) at lam
    p = DcpParams(0, 0, 0, 0, 0.7, 1.3)
    M = build_dcp(p, 2).dense()
    i = index_of((1, 0)) - 1
    assert M[i, index_of((0, 0)) - 1] == pytest.approx(1.0)
    assert M[i, index_of((0, 1)) - 1] == pytest.approx(1.3)
    assert M[i, index_of((1, 1)) - 1] == pytest.approx(0.7)


def test_gdcp_pair_death_rates():
    g = GdcpParams(0, 0, 0, 0, lam=0.5, diffusion=1.0, mu1=0.3, mu2=0.8)
    M = build_gdcp(g, 2).dense()
    i = index_of((1, 1)) - 1
    assert M[i, index_of((0, 1)) - 1] == pytest.approx(0.8)
    assert M[i, index_of((1, 0)) - 1] == pytest.approx(0.8)


@pytest.mark.parametrize("overflow", ["omit", "saturate"])
def test_dual_structure(overflow):
    p = DcpParams(0.5, 0.3, 0.7, 0.2, 1.1, 0.9)
    G = build_dual(p, 3, sink_cap=2, overflow=overflow)
    assert G.dim == 9 * 8
    M = G.dense()
    assert (M - np.diag(np.diag(M)) >= 0).all()
    if overflow == "saturate":
        assert np.abs(M.sum(axis=1)).max() < 1e-14
    # truncated rows: cap reached with a particle at the matching boundary
    for s, t in zip(G.states, G.truncated):
        expect = (s.left == 2 and s.sites[0] == 1) or (s.right == 2 and s.sites[-1] == 1)
        assert t == expect


def test_dual_absorption_rates():
    p = DcpParams(0.5, 0.3, 0.7, 0.2, 1.1, 0.9)
    G = build_dual(p, 2, sink_cap=3)
    idx = G.row_index
    a = idx[DualConfiguration(0, Configuration((1, 0)), 0)]
    b = idx[DualConfiguration(1, Configuration((0, 0)), 0)]
    assert G.dense()[a, b] == pytest.approx(1.2)


def test_dual_truncation_consistency():
    p = DcpParams(0.5, 0.3, 0.7, 0.2, 1.1, 0.9)
    small, big = build_dual(p, 2, 3), build_dual(p, 2, 4)
    Ms, Mb = small.dense(), big.dense()
    ib = big.row_index
    for i, s in enumerate(small.states):
        if s.left < 3 and s.right < 3:
            for j, t in enumerate(small.states):
                assert Ms[i, j] == pytest.approx(Mb[ib[s], ib[t]], abs=1e-15)


def test_gdcp_dual_rejects_negative_rates():
    g = GdcpParams(1, 1, 1, 1, lam=0.5, diffusion=1.0, mu1=2.0, mu2=0.1)
    with pytest.raises(ValueError):
        dual_bulk(g, 3)


def test_sir_dual_rates():
    p = SirParams(0.7, 0.4)
    G = build_sir_dual(p, (-3, 0), 5)
    M = G.dense()
    idx = G.row_index
    g = idx[SirDualState(0, 2, "G")]
    assert -M[g, g] == pytest.approx(2 * (0.7 + 0.4))
    assert M[g, idx[TRAP]] == pytest.approx(0.8)
    assert M[g, idx[SirDualState(-1, 3, "G")]] == pytest.approx(0.7)
    j = idx[SirDualState(0, 2, "J")]
    assert -M[j, j] == pytest.approx(1.1)
    assert M[j, idx[SirDualState(0, 2, "G")]] == pytest.approx(0.4)
    # transitions leaving the box go to the absorbing overflow state
    edge = idx[SirDualState(-3, 5, "G")]
    assert M[edge, idx[OVERFLOW]] == pytest.approx(1.4)
    assert G.truncated[edge]
    assert np.all(M[idx[TRAP]] == 0) and np.all(M[idx[OVERFLOW]] == 0)


def test_fast_stirring_rates_and_example():
    p = DcpParams(1, 0, 0, 1, 1, 1)
    ch = fast_stirring_chain(p, 2, "corrected")
    assert ch.up[0] == 2 and ch.down[0] == 0
    assert np.allclose(ch.stationary(), [0.2, 0.4, 0.4], atol=1e-15)
    closed = fast_stirring_chain(DcpParams(0, 0.3, 0.2, 0, 1, 1), 5, "paper")
    assert np.array_equal(closed.stationary(), [1, 0, 0, 0, 0, 0])
    with pytest.raises(ValueError):
        fast_stirring_chain(p, 2, "other")


@given(dcp_params, st.integers(1, 12), st.sampled_from(["paper", "corrected"]))
def test_birth_death_stationary_is_invariant(p, N, conv):
    ch = fast_stirring_chain(p, N, conv)
    pi = ch.stationary()
    assert abs(pi.sum() - 1) < 1e-12
    assert np.abs(pi @ ch.generator().dense()).max() < 1e-10


def test_export_matrix_market(tmp_path):
    G = build_dcp(DcpParams(1, 1, 1, 1, 1, 1), 2)
    f = tmp_path / "g.mtx"
    G.export(f)
    assert np.allclose(scipy.io.mmread(f).toarray(), G.dense())


def test_bad_sizes():
    p = DcpParams(1, 1, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        build_dcp(p, 0)
    with pytest.raises(ValueError):
        build_dcp(p, 21)
    with pytest.raises(ValueError):
        build_dual(p, 2, 0)
