"""Duality functions and numerical verification of duality relations."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from .generators import SparseGenerator, _finalize, _lattice_states, _check_size
from .lattice import DcpParams, GdcpParams, SirParams

# local bulk duality matrix, rows eta_x, columns xi_x
CP_LOCAL = np.array([[1.0, 1.0], [1.0, 0.0]])

S, I, R = 0, 1, 2


@dataclass(frozen=True)
class DualityMatrix:
    """D(eta, (m, xi, n)) = c_-^m prod_x (1-eta_x)^xi_x c_+^n on a truncated dual space."""

    values: np.ndarray
    c_minus: float
    c_plus: float
    N: int
    sink_cap: int

    def column(self, m: int, k: int, n: int) -> np.ndarray:
        return self.values[:, (m * (self.sink_cap + 1) + n) * 2 ** self.N + k]


@dataclass(frozen=True)
class ParametricDualityMatrix:
    """Product duality function prod_x (a1 + a2 eta_x)^(a3 + a4 xi_x)."""

    a1: float
    a2: float
    a3: float
    a4: float

    @property
    def local(self) -> np.ndarray:
        base = np.array([self.a1, self.a1 + self.a2], dtype=complex)
        expo = np.array([self.a3, self.a3 + self.a4], dtype=complex)
        with np.errstate(all="ignore"):
            g = base[:, None] ** expo[None, :]
        if np.all(np.abs(g.imag) == 0):
            return g.real
        return g

    def matrix(self, N: int) -> np.ndarray:
        return kron_power(self.local, N)


def kron_power(g: np.ndarray, N: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=g.dtype)
    for _ in range(N):
        out = np.kron(out, g)
    return out


def bulk_duality(N: int) -> np.ndarray:
    """H(eta, xi) = prod_x (1-eta_x)^xi_x as a 2^N x 2^N matrix."""
    return kron_power(CP_LOCAL, N)


def duality_matrix(params, N: int, sink_cap: int, strict: bool = True) -> DualityMatrix:
    """Duality matrix between the lattice process and its absorbing dual.

    With ``strict`` a side with vanishing reservoir rates is rejected since
    its factor is undefined; otherwise that factor is set to 1 (the sink on
    that side is never reached).
    """
    _check_size(N)
    if sink_cap < 0:
        raise ValueError("sink_cap must be >= 0")
    if strict:
        cm, cp = params.c_minus, params.c_plus
    else:
        cm, cp = params.weights()
    K = sink_cap
    m = np.arange(K + 1)
    sink = np.outer(cm ** m, cp ** m).ravel()  # order (m, n)
    H = bulk_duality(N)
    vals = np.kron(sink[None, :], H)
    return DualityMatrix(vals, cm, cp, N, K)


def check_matrix_duality(L: SparseGenerator, Ldual: SparseGenerator, D,
                         restriction=None) -> float:
    """max |(L D - D Ldual^T)(eta, zeta)| over restricted dual columns zeta.

    ``restriction`` is a boolean mask or index array over dual states; by
    default rows of Ldual flagged as truncated are excluded.
    """
    Dm = D.values if isinstance(D, DualityMatrix) else np.asarray(D)
    Lm = L.matrix if isinstance(L, SparseGenerator) else sps.csr_matrix(L)
    Ldm = Ldual.matrix if isinstance(Ldual, SparseGenerator) else sps.csr_matrix(Ldual)
    if Lm.shape[0] != Dm.shape[0] or Ldm.shape[0] != Dm.shape[1]:
        raise ValueError(f"dimension mismatch: L {Lm.shape}, D {Dm.shape}, Ldual {Ldm.shape}")
    if restriction is None:
        if isinstance(Ldual, SparseGenerator) and Ldual.truncated is not None:
            restriction = ~Ldual.truncated
        else:
            restriction = np.ones(Dm.shape[1], dtype=bool)
    lhs = Lm @ Dm
    rhs = (Ldm @ Dm.T).T
    diff = np.abs(lhs - rhs)[:, restriction]
    return float(diff.max()) if diff.size else 0.0


def restriction_below_cap(Ldual: SparseGenerator) -> np.ndarray:
    """Dual columns with both sink counters strictly below the cap."""
    K = Ldual.meta["sink_cap"]
    return np.array([s.left < K and s.right < K for s in Ldual.states])


def ssep_generator(N: int, diffusion: float = 1.0, boundary: str = "closed") -> SparseGenerator:
    """Stirring generator on {0,1}^N with closed or periodic boundary."""
    _check_size(N)
    if boundary not in ("closed", "periodic"):
        raise ValueError("boundary must be 'closed' or 'periodic'")
    bonds = [(x, x + 1) for x in range(N - 1)]
    if boundary == "periodic" and N > 2:
        bonds.append((N - 1, 0))
    dim = 2 ** N
    rows, cols = [], []
    for k in range(dim):
        for x, y in bonds:
            bx, by = (k >> (N - 1 - x)) & 1, (k >> (N - 1 - y)) & 1
            if bx != by:
                rows.append(k)
                cols.append(k ^ (1 << (N - 1 - x)) ^ (1 << (N - 1 - y)))
    mat = sps.coo_matrix((np.full(len(rows), float(diffusion)), (rows, cols)), shape=(dim, dim))
    return _finalize(mat, _lattice_states(N), f"ssep-{boundary}")


def check_ssep_parametric_duality(a1: float, a2: float, a3: float, a4: float, N: int,
                                  boundary: str = "closed") -> float:
    """Residual of the SSEP self-duality L H~ = H~ L^T for the product function."""
    L = ssep_generator(N, 1.0, boundary).matrix
    H = ParametricDualityMatrix(a1, a2, a3, a4).matrix(N)
    res = L @ H - (L @ H.T).T
    return float(np.abs(res).max())


def check_bulk_self_duality(lam: float, diffusion: float, N: int) -> float:
    """Residual of the closed contact + stirring self-duality with H."""
    from .generators import _dcp_bulk
    L = _finalize(_dcp_bulk(lam, diffusion, N), _lattice_states(N), "dcp-closed").matrix
    H = bulk_duality(N)
    return float(np.abs(L @ H - (L @ H.T).T).max())


# SIR generator-level duality

def sir_duality_function(conf: np.ndarray, lo: int, r: int, n: int, layer: str) -> np.ndarray:
    """d(eta, (r, n, layer)) for a batch of window configurations (rows of ``conf``).

    ``conf`` holds 0/1/2 for S/I/R at sites lo, lo+1, ...
    """
    W = conf.shape[1]
    a, b = r - 1 - lo, r + n - lo
    if a < 0 or b >= W:
        raise ValueError("cluster not contained in the window")
    left = I if layer == "G" else R
    ok = (conf[:, a] == left) & (conf[:, b] == I)
    if n > 0:
        ok &= np.all(conf[:, a + 1:b] == S, axis=1)
    return ok.astype(float)


def sir_generator_action(conf: np.ndarray, lo: int, r: int, n: int, layer: str,
                         params: SirParams) -> np.ndarray:
    """(L^SIR d(., (r,n,layer)))(eta) for each row; only sites r-1..r+n matter."""
    beta, gamma = params.beta_inf, params.gamma_rec
    d0 = sir_duality_function(conf, lo, r, n, layer)
    out = np.zeros(conf.shape[0])
    for y in range(r - 1, r + n + 1):
        j = y - lo
        st = conf[:, j]
        # recovery I -> R
        rec = st == I
        if np.any(rec):
            c2 = conf.copy()
            c2[rec, j] = R
            out += np.where(rec, gamma * (sir_duality_function(c2, lo, r, n, layer) - d0), 0.0)
        # infection S -> I from each infected neighbour
        sus = st == S
        if np.any(sus):
            nI = (conf[:, j - 1] == I).astype(float) + (conf[:, j + 1] == I).astype(float)
            c2 = conf.copy()
            c2[sus, j] = I
            out += np.where(sus, beta * nI * (sir_duality_function(c2, lo, r, n, layer) - d0), 0.0)
    return out


def sir_dual_action(conf: np.ndarray, lo: int, r: int, n: int, layer: str,
                    params: SirParams) -> np.ndarray:
    """(L^dual d(eta, .))(r, n, layer) for each row."""
    beta, gamma = params.beta_inf, params.gamma_rec
    d0 = sir_duality_function(conf, lo, r, n, layer)
    out = beta * (sir_duality_function(conf, lo, r, n + 1, layer) - d0)
    if layer == "G":
        out += beta * (sir_duality_function(conf, lo, r - 1, n + 1, "G") - d0)
        out += 2 * gamma * (0.0 - d0)
    else:
        out += gamma * (sir_duality_function(conf, lo, r, n, "G") - d0)
    return out


def enumerate_window(width: int) -> np.ndarray:
    """All 3^width S/I/R words as an int8 array."""
    return np.array(list(itertools.product((S, I, R), repeat=width)), dtype=np.int8).reshape(-1, width)


def check_sir_duality(window: tuple[int, int], r: int, n: int, layer: str,
                      params: SirParams) -> float:
    """Max over all 3^|window| configurations of |L^SIR d - L^dual d| at (r, n, layer)."""
    lo, hi = int(window[0]), int(window[1])
    if n < 1:
        raise ValueError("n must be >= 1")
    if layer not in ("G", "J"):
        raise ValueError("layer must be 'G' or 'J'")
    if lo > r - 2 or hi < r + n + 1:
        raise ValueError(f"window [{lo},{hi}] must contain [{r - 2},{r + n + 1}]")
    conf = enumerate_window(hi - lo + 1)
    lhs = sir_generator_action(conf, lo, r, n, layer, params)
    rhs = sir_dual_action(conf, lo, r, n, layer, params)
    return float(np.abs(lhs - rhs).max())
