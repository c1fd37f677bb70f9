"""Sparse intensity matrices for the DCP, the GDCP, their absorbing duals,
the fast-stirring birth-death chain and the SIR dual bilayer walk.

Lattice generators are assembled from local blocks by Kronecker placement;
site 1 is the leftmost tensor factor, matching the canonical index order of
:mod:`ipsdual.lattice`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import scipy.io
import scipy.sparse as sps

from .lattice import (MAX_EXACT_N, Configuration, DcpParams, GdcpParams, SirParams,
                      config_of)

ROW_SUM_TOL = 1e-14


class DualConfiguration(NamedTuple):
    """Absorbing dual state: left sink count, occupation word, right sink count."""

    left: int
    sites: Configuration
    right: int

    @property
    def N(self) -> int:
        return len(self.sites)

    def particles(self) -> tuple[int, ...]:
        # A(xi), recomputed on demand
        return self.sites.occupied()


class SirDualState(NamedTuple):
    """Bilayer walk state (r, n, layer) with layer 'G' or 'J'; the trap is TRAP."""

    r: int | None
    n: int | None
    layer: str

    @property
    def is_trap(self) -> bool:
        return self.layer == "trap"


TRAP = SirDualState(None, None, "trap")
OVERFLOW = SirDualState(None, None, "overflow")


@dataclass(frozen=True)
class SparseGenerator:
    """Intensity matrix over an indexed finite state space.

    ``matrix`` is CSR with 0-based rows; ``states[k]`` labels row k.
    ``truncated`` marks rows whose outgoing transitions were cut or redirected
    by a finite cap.
    """

    matrix: sps.csr_matrix
    states: tuple
    kind: str
    truncated: np.ndarray = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def row_index(self) -> dict:
        return {s: k for k, s in enumerate(self.states)}

    def entries(self) -> list[tuple[int, int, float]]:
        """(row, col, rate) triples, 1-based, diagonal included."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [(int(coo.row[k]) + 1, int(coo.col[k]) + 1, float(coo.data[k])) for k in order]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def max_row_sum(self) -> float:
        return float(np.abs(np.asarray(self.matrix.sum(axis=1))).max()) if self.dim else 0.0

    def check(self) -> None:
        """Raise if off-diagonals are negative or a row does not sum to zero."""
        coo = self.matrix.tocoo()
        off = coo.row != coo.col
        if np.any(coo.data[off] < 0):
            raise ValueError(f"{self.kind}: negative off-diagonal rate")
        if self.max_row_sum() > ROW_SUM_TOL * max(1.0, abs(self.matrix).max()):
            raise ValueError(f"{self.kind}: row sums deviate from zero")

    def export(self, path) -> None:
        """Write as a matrix-market coordinate file (1-based triples)."""
        scipy.io.mmwrite(str(path), self.matrix.tocoo(), comment=f"{self.kind} intensity matrix")


def _finalize(mat, states, kind, truncated=None, meta=None) -> SparseGenerator:
    """Sum duplicates, drop the diagonal and re-derive it from the off-diagonal rates."""
    coo = sps.coo_matrix(mat)
    coo.sum_duplicates()
    off = coo.row != coo.col
    n = coo.shape[0]
    rows, cols, vals = coo.row[off], coo.col[off], coo.data[off]
    keep = vals != 0
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    # tiny negative rounding from cancelling Kronecker terms
    vals = np.where(np.abs(vals) < 1e-15, 0.0, vals)
    out = np.bincount(rows, weights=vals, minlength=n)
    diag = np.arange(n)
    m = sps.coo_matrix((np.concatenate([vals, -out]), (np.concatenate([rows, diag]),
                                                         np.concatenate([cols, diag]))),
                       shape=(n, n)).tocsr()
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    if truncated is None:
        truncated = np.zeros(n, dtype=bool)
    g = SparseGenerator(m, tuple(states), kind, truncated, dict(meta or {}))
    g.check()
    return g


# local blocks over the 2-site basis (00, 01, 10, 11) or the 1-site basis (0, 1)

def dcp_bond_block(lam: float, diffusion: float) -> np.ndarray:
    """Contact + stirring bond block with half death rate per bond side."""
    h = 0.5
    return np.array([
        [0.0, 0.0, 0.0, 0.0],
        [h, -(h + diffusion + lam), diffusion, lam],
        [h, diffusion, -(h + diffusion + lam), lam],
        [0.0, h, h, -1.0],
    ])


def half_death_block() -> np.ndarray:
    return np.array([[0.0, 0.0], [0.5, -0.5]])


def reservoir_block(create: float, annihilate: float) -> np.ndarray:
    return np.array([[-create, create], [annihilate, -annihilate]])


def gdcp_bond_block(lam: float, diffusion: float, mu1: float, mu2: float) -> np.ndarray:
    return np.array([
        [0.0, 0.0, 0.0, 0.0],
        [mu1, -(mu1 + diffusion + lam), diffusion, lam],
        [mu1, diffusion, -(mu1 + diffusion + lam), lam],
        [0.0, mu2, mu2, -2.0 * mu2],
    ])


def lift(block: np.ndarray, x: int, N: int) -> sps.csr_matrix:
    """Place a 1- or 2-site block acting on sites x (, x+1) into the 2^N space."""
    width = {2: 1, 4: 2}[block.shape[0]]
    left = sps.identity(2 ** (x - 1), format="csr")
    right = sps.identity(2 ** (N - x - width + 1), format="csr")
    return sps.kron(sps.kron(left, sps.csr_matrix(block)), right, format="csr")


def _check_size(N: int) -> None:
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    if N > MAX_EXACT_N:
        raise ValueError(f"N={N} exceeds the exact-route cap {MAX_EXACT_N}")


def _lattice_states(N: int) -> list[Configuration]:
    return [config_of(i, N) for i in range(1, 2 ** N + 1)]


def _dcp_bulk(lam: float, diffusion: float, N: int) -> sps.csr_matrix:
    L = sps.csr_matrix((2 ** N, 2 ** N))
    blk = dcp_bond_block(lam, diffusion)
    for x in range(1, N):
        L = L + lift(blk, x, N)
    L = L + lift(half_death_block(), 1, N) + lift(half_death_block(), N, N)
    return L


def _gdcp_bulk(lam: float, diffusion: float, mu1: float, mu2: float, N: int) -> sps.csr_matrix:
    L = sps.csr_matrix((2 ** N, 2 ** N))
    blk = gdcp_bond_block(lam, diffusion, mu1, mu2)
    for x in range(1, N):
        L = L + lift(blk, x, N)
    return L


def build_dcp(params: DcpParams, N: int) -> SparseGenerator:
    """DCP intensity matrix on {0,1}^N."""
    _check_size(N)
    p = params
    L = _dcp_bulk(p.lam, p.diffusion, N)
    L = L + lift(reservoir_block(p.alpha, p.gamma), 1, N)
    L = L + lift(reservoir_block(p.delta, p.beta), N, N)
    return _finalize(L, _lattice_states(N), "dcp", meta={"N": N})


def build_gdcp(params: GdcpParams, N: int) -> SparseGenerator:
    """GDCP intensity matrix on {0,1}^N."""
    _check_size(N)
    p = params
    L = _gdcp_bulk(p.lam, p.diffusion, p.mu1, p.mu2, N)
    L = L + lift(reservoir_block(p.alpha, p.gamma), 1, N)
    L = L + lift(reservoir_block(p.delta, p.beta), N, N)
    return _finalize(L, _lattice_states(N), "gdcp", meta={"N": N})


def dual_bulk(params, N: int) -> sps.csr_matrix:
    """Dual dynamics on the occupation word, sinks excluded (not finalized)."""
    if isinstance(params, DcpParams):
        return _dcp_bulk(params.lam, params.diffusion, N)
    if isinstance(params, GdcpParams):
        lam_h, dif_h = params.dual_lam, params.dual_diffusion
        if lam_h < -1e-15:
            raise ValueError(f"dual birth rate lam+mu2-mu1 = {lam_h} < 0")
        if dif_h < -1e-15:
            raise ValueError(f"dual diffusion D+mu1-mu2 = {dif_h} < 0")
        return _gdcp_bulk(max(lam_h, 0.0), max(dif_h, 0.0), params.mu2, params.mu1, N)
    raise TypeError(f"unsupported parameter record {type(params).__name__}")


def dual_index(m: int, k: int, n: int, N: int, K: int) -> int:
    """0-based row of (m, config with 0-based index k, n)."""
    return (m * (K + 1) + n) * 2 ** N + k


def build_dual(params, N: int, sink_cap: int = 8, overflow: str = "omit") -> SparseGenerator:
    """Absorbing dual generator over (m, xi, n) with 0 <= m, n <= sink_cap.

    Site 1 empties into the left sink at rate alpha+gamma and site N into the
    right sink at rate beta+delta. With ``overflow='omit'`` absorptions that
    would exceed the cap are dropped; with ``'saturate'`` the counter stays at
    the cap, which then reads as ">= cap". Both cases mark the row truncated.
    """
    _check_size(N)
    K = int(sink_cap)
    if K < 1:
        raise ValueError("sink_cap must be >= 1")
    if overflow not in ("omit", "saturate"):
        raise ValueError("overflow must be 'omit' or 'saturate'")
    S = 2 ** N
    bulk = dual_bulk(params, N)
    nsink = (K + 1) ** 2
    L = sps.kron(sps.identity(nsink, format="csr"), bulk, format="csr")

    sl, sr = params.left_rate, params.right_rate
    k = np.arange(S)
    ms, ns = np.meshgrid(np.arange(K + 1), np.arange(K + 1), indexing="ij")
    ms, ns = ms.ravel(), ns.ravel()
    rows, cols, vals = [], [], []
    truncated = np.zeros(nsink * S, dtype=bool)
    half = S // 2
    left_k = k[k >= half]
    right_k = k[k % 2 == 1]
    for m, n in zip(ms, ns):
        base = (m * (K + 1) + n) * S
        if sl > 0:
            if m < K or overflow == "saturate":
                m2 = min(m + 1, K)
                rows.append(base + left_k)
                cols.append((m2 * (K + 1) + n) * S + left_k - half)
                vals.append(np.full(left_k.size, sl))
            if m == K:
                truncated[base + left_k] = True
        if sr > 0:
            if n < K or overflow == "saturate":
                n2 = min(n + 1, K)
                rows.append(base + right_k)
                cols.append((m * (K + 1) + n2) * S + right_k - 1)
                vals.append(np.full(right_k.size, sr))
            if n == K:
                truncated[base + right_k] = True
    if rows:
        A = sps.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=L.shape)
        L = L + A
    confs = _lattice_states(N)
    states = [DualConfiguration(int(m), confs[kk], int(n)) for m, n in zip(ms, ns) for kk in range(S)]
    model = "dcp" if isinstance(params, DcpParams) else "gdcp"
    return _finalize(L, states, f"{model}-dual", truncated,
                     meta={"N": N, "sink_cap": K, "overflow": overflow})


def build_sir_dual(params: SirParams, r_range: tuple[int, int], n_max: int) -> SparseGenerator:
    """Bilayer dual walk on the box r_lo <= r <= r_hi, 1 <= n <= n_max.

    States are ordered (layer G then J, r, n), followed by the trap and an
    absorbing overflow state that collects every transition leaving the box.
    """
    r_lo, r_hi = int(r_range[0]), int(r_range[1])
    if r_hi < r_lo or n_max < 1:
        raise ValueError("empty (r, n) box")
    b, g = params.beta_inf, params.gamma_rec
    states = [SirDualState(r, n, lay) for lay in ("G", "J")
              for r in range(r_lo, r_hi + 1) for n in range(1, n_max + 1)]
    states += [TRAP, OVERFLOW]
    idx = {s: k for k, s in enumerate(states)}
    ov = idx[OVERFLOW]
    rows, cols, vals = [], [], []

    def add(src, dst, rate):
        if rate == 0:
            return
        rows.append(idx[src])
        cols.append(idx.get(dst, ov))
        vals.append(rate)

    truncated = np.zeros(len(states), dtype=bool)
    for s in states[:-2]:
        r, n, lay = s
        add(s, SirDualState(r, n + 1, lay), b)
        if lay == "G":
            add(s, SirDualState(r - 1, n + 1, "G"), b)
            add(s, TRAP, 2 * g)
        else:
            add(s, SirDualState(r, n, "G"), g)
        truncated[idx[s]] = n == n_max or (lay == "G" and r == r_lo)
    n_st = len(states)
    mat = sps.coo_matrix((vals, (rows, cols)), shape=(n_st, n_st))
    return _finalize(mat, states, "sir-dual", truncated,
                     meta={"r_range": (r_lo, r_hi), "n_max": n_max, "overflow_index": ov})


@dataclass(frozen=True)
class BirthDeathChain:
    """Birth-death chain on {0, ..., N} given by up and down rates."""

    up: np.ndarray
    down: np.ndarray
    convention: str

    @property
    def N(self) -> int:
        return len(self.up) - 1

    def generator(self) -> SparseGenerator:
        n = self.N + 1
        i = np.arange(n)
        mat = sps.coo_matrix((np.concatenate([self.up[:-1], self.down[1:]]),
                              (np.concatenate([i[:-1], i[1:]]), np.concatenate([i[1:], i[:-1]]))),
                             shape=(n, n))
        return _finalize(mat, tuple(range(n)), f"birth-death-{self.convention}")

    def stationary(self) -> np.ndarray:
        """Stationary law by detailed balance; Dirac at 0 when 0 is absorbing."""
        n = self.N + 1
        pi = np.zeros(n)
        if self.up[0] == 0:
            pi[0] = 1.0
            return pi
        logw = np.zeros(n)
        for k in range(1, n):
            if self.up[k - 1] == 0:
                logw[k:] = -np.inf
                break
            logw[k] = logw[k - 1] + np.log(self.up[k - 1]) - np.log(self.down[k])
        w = np.exp(logw - logw.max())
        return w / w.sum()


def fast_stirring_chain(params: DcpParams, N: int, convention: str = "corrected") -> BirthDeathChain:
    """Particle-number chain of the DCP in the infinite stirring limit.

    down(n) = n [1 + (beta+gamma)/N], up(n) = [lam f n + alpha + delta](1 - n/N)
    with f = 1 for ``convention='paper'`` and f = 2 for ``'corrected'``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    factor = {"paper": 1.0, "corrected": 2.0}.get(convention)
    if factor is None:
        raise ValueError("convention must be 'paper' or 'corrected'")
    p = params
    n = np.arange(N + 1, dtype=float)
    down = n * (1.0 + (p.beta + p.gamma) / N)
    up = (p.lam * factor * n + p.alpha + p.delta) * (1.0 - n / N)
    return BirthDeathChain(up, down, convention)
