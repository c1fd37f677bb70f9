"""Exact stationary laws, transients, absorption probabilities and correlations."""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .generators import (SparseGenerator, _finalize, _lattice_states, _check_size,
                         build_dcp, build_dual, build_gdcp, dual_bulk, DualConfiguration)
from .lattice import Configuration, DcpParams, GdcpParams, index_of

DENSE_MAX = 2 ** 12


class TruncationError(RuntimeError):
    """Raised when a series cannot reach its tolerance within the allowed cap."""

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


@dataclass(frozen=True)
class StationaryMeasure:
    probs: np.ndarray
    states: tuple
    model: str
    params: object = None
    reducible: bool = False

    def prob(self, state) -> float:
        return float(self.probs[self.states.index(tuple(state))]) if not isinstance(state, int) \
            else float(self.probs[state - 1])

    def as_dict(self) -> dict:
        return {tuple(s): float(p) for s, p in zip(self.states, self.probs)}


@dataclass(frozen=True)
class AbsorptionLaw:
    """P[xi_0(inf) = m, xi_{N+1}(inf) = n] for 0 <= m, n <= k_max."""

    joint: np.ndarray
    initial: DualConfiguration
    tail: float
    route: str
    elapsed: float = 0.0

    @property
    def k_max(self) -> int:
        return self.joint.shape[0] - 1

    def left(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    def right(self) -> np.ndarray:
        return self.joint.sum(axis=0)

    def total(self) -> float:
        return float(self.joint.sum())


@dataclass(frozen=True)
class CorrelationValue:
    sites: tuple
    value: float
    route: str
    error_bound: float = 0.0
    info: dict = field(default_factory=dict)


def _closed_classes(L: sps.csr_matrix):
    off = L.copy().tocoo()
    keep = (off.row != off.col) & (off.data > 0)
    adj = sps.csr_matrix((np.ones(keep.sum()), (off.row[keep], off.col[keep])), shape=L.shape)
    ncomp, lab = connected_components(adj, directed=True, connection="strong")
    if ncomp == 1:
        return ncomp, lab, [0]
    leaves = np.ones(ncomp, dtype=bool)
    coo = adj.tocoo()
    cross = lab[coo.row] != lab[coo.col]
    leaves[np.unique(lab[coo.row[cross]])] = False
    return ncomp, lab, list(np.flatnonzero(leaves))


def _null_vector(Lsub) -> np.ndarray:
    n = Lsub.shape[0]
    if n == 1:
        return np.ones(1)
    b = np.zeros(n)
    b[-1] = 1.0
    if n <= DENSE_MAX:
        A = np.asarray(Lsub.toarray() if sps.issparse(Lsub) else Lsub).T.copy()
        A[-1, :] = 1.0
        pi = sla.lu_solve(sla.lu_factor(A), b)
    else:
        A = sps.lil_matrix(Lsub.T)
        A[n - 1, :] = np.ones(n)
        pi = spla.splu(A.tocsc()).solve(b)
    pi = np.where(np.abs(pi) < 1e-300, 0.0, pi)
    return pi


def stationary(L: SparseGenerator) -> StationaryMeasure:
    """Unique stationary law of L.

    Irreducible chains are solved directly. A reducible chain with a single
    closed class (e.g. closed boundaries, where only the empty configuration
    is recurrent) returns the law concentrated on that class, flagged.
    """
    ncomp, lab, closed = _closed_classes(L.matrix)
    if ncomp == 1:
        pi = _null_vector(L.matrix)
        return StationaryMeasure(pi, L.states, L.kind)
    if len(closed) != 1:
        raise ValueError(f"{L.kind}: {len(closed)} closed classes, stationary law not unique")
    members = np.flatnonzero(lab == closed[0])
    sub = L.matrix[members][:, members]
    pi = np.zeros(L.dim)
    pi[members] = _null_vector(sub)
    return StationaryMeasure(pi, L.states, L.kind, reducible=True)


def transient(L: SparseGenerator, init, t: float) -> np.ndarray:
    """Distribution at time t started from ``init`` (p_t = p_0 exp(tL))."""
    if t < 0:
        raise ValueError("t must be >= 0")
    p0 = np.asarray(init, dtype=float)
    if t == 0:
        return p0.copy()
    M = L.matrix if isinstance(L, SparseGenerator) else sps.csr_matrix(L)
    if M.shape[0] <= DENSE_MAX:
        return sla.expm(M.T.toarray() * t) @ p0
    return spla.expm_multiply(M.T * t, p0)


def spectral_gap(L: SparseGenerator) -> float:
    """Smallest nonzero |Re eigenvalue| of L (dense, small state spaces)."""
    ev = np.linalg.eigvals(L.dense())
    re = np.sort(-ev.real)
    re = re[re > 1e-10 * max(1.0, re.max())]
    return float(re[0]) if re.size else 0.0


# absorption probabilities of the dual

def recursive_order(N: int) -> list[Configuration]:
    """Non-empty configurations in the recursive order (site-1-occupied block first)."""
    _check_size(N)
    if N == 1:
        return [Configuration((1,))]
    prev = recursive_order(N - 1)
    empty = (0,) * (N - 1)
    return ([Configuration((1,) + empty)] + [Configuration((1,) + tuple(c)) for c in prev]
            + [Configuration((0,) + tuple(c)) for c in prev])


@dataclass(frozen=True)
class JumpChain:
    """First-jump system of the dual on non-empty configurations.

    ``M`` is I - P restricted to non-empty states in ``order``. For each state
    ``die`` is the probability of jumping to the empty word without absorption,
    ``pl``/``pr`` the probability of a left/right absorption and ``tl``/``tr``
    the resulting word (index into ``order``, or len(order) for empty).
    """

    order: list
    M: np.ndarray
    die: np.ndarray
    pl: np.ndarray
    tl: np.ndarray
    pr: np.ndarray
    tr: np.ndarray


def jump_chain(params, N: int) -> JumpChain:
    order = recursive_order(N)
    U = len(order)
    pos = {index_of(c) - 1: j for j, c in enumerate(order)}
    pos[0] = U
    bulk = _finalize(dual_bulk(params, N), _lattice_states(N), "dual-bulk").matrix.tocsr()
    sl, sr = params.left_rate, params.right_rate
    M = np.eye(U)
    die, pl, pr = np.zeros(U), np.zeros(U), np.zeros(U)
    tl, tr = np.full(U, U), np.full(U, U)
    half = 2 ** (N - 1)
    for j, c in enumerate(order):
        k = index_of(c) - 1
        row = bulk.getrow(k)
        rates = {int(col): v for col, v in zip(row.indices, row.data) if col != k and v > 0}
        out = sum(rates.values())
        a_l = sl if c[0] == 1 else 0.0
        a_r = sr if c[-1] == 1 else 0.0
        q = out + a_l + a_r
        if q <= 0:
            raise ValueError(f"dual state {tuple(c)} has no exit; extinction is not certain")
        for col, v in rates.items():
            if col == 0:
                die[j] += v / q
            else:
                M[j, pos[col]] -= v / q
        if a_l:
            pl[j], tl[j] = a_l / q, pos[k - half]
        if a_r:
            pr[j], tr[j] = a_r / q, pos[k - 1]
    return JumpChain(order, M, die, pl, tl, pr, tr)


def absorption_table(params, N: int, k_max: int) -> tuple[list, np.ndarray]:
    """Joint absorption law for every non-empty initial word.

    Returns (order, X) with X[m, n, j] = P_{order[j]}[xi_0 = m, xi_{N+1} = n].
    One LU factorization of M serves all (m, n) right-hand sides.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    jc = jump_chain(params, N)
    U = len(jc.order)
    lu = sla.lu_factor(jc.M)
    X = np.zeros((k_max + 1, k_max + 1, U + 1))
    X[0, 0, U] = 1.0  # empty word: nothing more is absorbed
    for s in range(2 * k_max + 1):
        for m in range(max(0, s - k_max), min(s, k_max) + 1):
            n = s - m
            rhs = np.zeros(U)
            if m == 0 and n == 0:
                rhs += jc.die
            if m > 0:
                rhs += jc.pl * X[m - 1, n, jc.tl]
            if n > 0:
                rhs += jc.pr * X[m, n - 1, jc.tr]
            if np.any(rhs):
                X[m, n, :U] = sla.lu_solve(lu, rhs)
    return jc.order, X[:, :, :U]


def _as_dual_config(initial, N=None) -> DualConfiguration:
    if isinstance(initial, DualConfiguration):
        return initial
    return DualConfiguration(0, Configuration(initial), 0)


def absorption_law(params, initial, k_max: int, route: str = "linear") -> AbsorptionLaw:
    """Law of the absorbed particle counts started from ``initial``.

    ``route='linear'`` solves the first-jump systems; ``route='transient'``
    evolves the saturating truncated dual until the non-absorbed mass is
    below 1e-15 and reads off the sink counters.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    init = _as_dual_config(initial)
    N = init.N
    t0 = time.perf_counter()
    if not any(init.sites):
        joint = np.zeros((k_max + 1, k_max + 1))
        if init.left <= k_max and init.right <= k_max:
            joint[init.left, init.right] = 1.0
        return AbsorptionLaw(joint, init, 1.0 - joint.sum(), route, time.perf_counter() - t0)
    if route == "linear":
        order, X = absorption_table(params, N, k_max)
        j = order.index(init.sites)
        joint = np.zeros((k_max + 1, k_max + 1))
        m0, n0 = init.left, init.right
        if m0 <= k_max and n0 <= k_max:
            joint[m0:, n0:] = X[:k_max + 1 - m0, :k_max + 1 - n0, j]
    elif route == "transient":
        joint = _absorption_by_transient(params, init, k_max)
    else:
        raise ValueError("route must be 'linear' or 'transient'")
    tail = 1.0 - float(joint.sum())
    return AbsorptionLaw(joint, init, tail, route, time.perf_counter() - t0)


def _absorption_by_transient(params, init: DualConfiguration, k_max: int) -> np.ndarray:
    N = init.N
    K = max(k_max + 1, init.left + 1, init.right + 1)
    G = build_dual(params, N, K, overflow="saturate")
    S = 2 ** N
    p = np.zeros(G.dim)
    p[(init.left * (K + 1) + init.right) * S + index_of(init.sites) - 1] = 1.0
    alive = np.array([any(s.sites) for s in G.states])
    if G.dim > DENSE_MAX:
        t = 1.0
        while True:
            q = spla.expm_multiply(G.matrix.T * t, p)
            if q[alive].sum() < 1e-15 or t > 1e8:
                break
            t *= 2
    else:
        E = sla.expm(G.matrix.T.toarray())
        q = E @ p
        steps = 0
        while q[alive].sum() >= 1e-15 and steps < 60:
            E = E @ E
            q = E @ p
            steps += 1
    if q[alive].sum() >= 1e-12:
        raise TruncationError("dual did not reach extinction numerically")
    joint = np.zeros((k_max + 1, k_max + 1))
    for k, s in enumerate(G.states):
        if not any(s.sites) and s.left <= k_max and s.right <= k_max:
            joint[s.left, s.right] += q[k]
    return joint


# correlation functions

def _check_sites(sites: Sequence[int], N: int) -> tuple[int, ...]:
    s = tuple(int(x) for x in sites)
    if len(s) == 0:
        raise ValueError("need at least one site")
    if any(b <= a for a, b in zip(s, s[1:])):
        raise ValueError("sites must be strictly increasing")
    if s[0] < 1 or s[-1] > N:
        raise ValueError(f"sites outside 1..{N}")
    return s


def correlation_direct(measure: StationaryMeasure, sites: Sequence[int]) -> CorrelationValue:
    """E[prod_j eta_{x_j}] under a stationary measure."""
    N = len(measure.states[0])
    s = _check_sites(sites, N)
    bits = np.array(measure.states, dtype=np.int8)
    ind = np.all(bits[:, [x - 1 for x in s]] == 1, axis=1)
    return CorrelationValue(s, float(measure.probs[ind].sum()), "direct")


def complement_moment(params, N: int, subset: Sequence[int], tol: float = 1e-10,
                      k_start: int = 8, k_cap: int = 128, table=None):
    """E[prod_{x in subset} (1 - eta_x)] by duality, with truncation bound."""
    if not subset:
        return 1.0, 0.0, 0
    cm, cp = params.weights()
    k = k_start
    while True:
        order, X = table(k) if table else absorption_table(params, N, k)
        word = Configuration(1 if x in subset else 0 for x in range(1, N + 1))
        P = X[:, :, order.index(word)]
        w = np.outer(cm ** np.arange(k + 1), cp ** np.arange(k + 1))
        val = float((P * w).sum())
        tail = max(0.0, 1.0 - float(P.sum()))
        bound = tail * max(cm ** (k + 1), cp ** (k + 1))
        if bound < tol:
            return val, bound, k
        if k >= k_cap:
            raise TruncationError(f"tail bound {bound:.3e} above tol {tol:.1e} at cap {k}",
                                  partial=(val, bound, k))
        k = min(2 * k, k_cap)


def correlation_via_duality(params, N: int, sites: Sequence[int], tol: float = 1e-10,
                            k_start: int = 8, k_cap: int = 128) -> CorrelationValue:
    """rho(sites) via the absorbing dual and inclusion-exclusion.

    rho(S) = sum_{T subset S} (-1)^|T| E[prod_{x in T} (1 - eta_x)].
    """
    s = _check_sites(sites, N)
    if params.left_rate == 0 and params.right_rate == 0:
        raise ValueError("both boundaries closed: use the Dirac answer")
    t0 = time.perf_counter()
    cache = {}

    def table(k):
        if k not in cache:
            cache[k] = absorption_table(params, N, k)
        return cache[k]

    per_term_tol = tol / 2 ** len(s)
    val, err, kused = 0.0, 0.0, 0
    for r in range(len(s) + 1):
        for T in itertools.combinations(s, r):
            v, b, k = complement_moment(params, N, T, per_term_tol, k_start, k_cap, table)
            val += (-1) ** r * v
            err += b
            kused = max(kused, k)
    return CorrelationValue(s, val, "duality", err,
                            {"k_max": kused, "elapsed": time.perf_counter() - t0})


def complement_moments_from_correlations(rho: dict) -> dict:
    """{S: rho(S)} -> {S: E[prod_{x in S}(1-eta_x)]}, keys are sorted tuples (incl. ())."""
    out = {}
    for S_ in rho:
        out[S_] = sum((-1) ** len(T) * rho.get(T, 1.0)
                      for r in range(len(S_) + 1) for T in itertools.combinations(S_, r))
    return out


def correlations_from_complement_moments(phi: dict) -> dict:
    """Inverse of :func:`complement_moments_from_correlations`."""
    out = {}
    for S_ in phi:
        out[S_] = sum((-1) ** len(T) * phi.get(T, 1.0)
                      for r in range(len(S_) + 1) for T in itertools.combinations(S_, r))
    return out


def lemma_bound_check(params, N: int, y: int, tol: float = 1e-10) -> tuple[float, float]:
    """(rho_1(y), P[some absorbed particle carries a factor < 1]) with rho_1(y) <= bound."""
    if not 1 <= y <= N:
        raise ValueError(f"site {y} outside 1..{N}")
    cm, cp = params.weights()
    if params.left_rate == 0 and params.right_rate == 0:
        return 0.0, 0.0
    rho = correlation_via_duality(params, N, (y,), tol).value
    k = 32
    law = absorption_law(params, Configuration(1 if x == y else 0 for x in range(1, N + 1)), k)
    m = np.arange(k + 1)
    hit = np.outer(cm ** m, cp ** m) < 1.0
    bound = float(law.joint[hit].sum()) + max(law.tail, 0.0)
    if rho > bound + 1e-12:
        raise AssertionError(f"bound violated: rho={rho} > {bound}")
    return rho, bound


def stationary_for(params, N: int) -> StationaryMeasure:
    """Stationary law of the DCP or GDCP with the given parameters."""
    L = build_dcp(params, N) if isinstance(params, DcpParams) else build_gdcp(params, N)
    m = stationary(L)
    return StationaryMeasure(m.probs, m.states, m.model, params, m.reducible)
