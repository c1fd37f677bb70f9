"""Cluster functions G, J, H of the lattice SIR model via the bilayer dual walk.

G(r,n): I at r-1, S on r..r+n-1, I at r+n.  J: R at r-1 instead of I.
H: no condition at r-1.  Initial cluster values come from a concrete
configuration on a window of Z or from a product measure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, stats

from .generators import OVERFLOW, TRAP, SirDualState
from .lattice import SirParams

CODES = {"S": 0, "I": 1, "R": 2}


@dataclass(frozen=True)
class SirConfiguration:
    """S/I/R word on the window [lo, lo + len(states) - 1]; ``outside`` fills the rest.

    ``outside`` is 'S', 'R' or None (sites beyond the window undetermined).
    """

    lo: int
    states: str
    outside: str | None = "R"

    def __post_init__(self):
        if not self.states or any(c not in "SIR" for c in self.states):
            raise ValueError("states must be a non-empty word over S, I, R")
        if self.outside not in ("S", "R", None):
            raise ValueError("outside state must be 'S', 'R' or None")

    @property
    def hi(self) -> int:
        return self.lo + len(self.states) - 1

    def at(self, x: int) -> str:
        if self.lo <= x <= self.hi:
            return self.states[x - self.lo]
        if self.outside is None:
            raise ValueError(f"site {x} outside the window [{self.lo},{self.hi}] is undetermined")
        return self.outside

    def codes(self) -> np.ndarray:
        return np.array([CODES[c] for c in self.states], dtype=np.int8)

    def infected(self) -> list[int]:
        return [self.lo + k for k, c in enumerate(self.states) if c == "I"]

    def indicator(self, kind: str) -> np.ndarray:
        """eta^a_x on the window."""
        return np.array([c == kind for c in self.states], dtype=np.int8)

    def padded(self, guard: int) -> "SirConfiguration":
        """Same configuration on a window enlarged by ``guard`` sites per side."""
        fill = self.outside or "R"
        return SirConfiguration(self.lo - guard, fill * guard + self.states + fill * guard, self.outside)


def single_s_fixture() -> SirConfiguration:
    """I S I with the S at 0; G(0,1,t) depends only on these three sites."""
    return SirConfiguration(-1, "ISI", "R")


def rsi_fixture() -> SirConfiguration:
    """R at -1, S at 0, I at 1, R elsewhere."""
    return SirConfiguration(-1, "RSI", "R")


def light_cone_guard(beta: float, T: float, tol: float = 1e-10) -> int:
    """Smallest g with P[Poisson(beta T) >= g] < tol."""
    if beta * T == 0:
        return 1
    k = stats.poisson.isf(tol, beta * T)
    g = (int(k) if np.isfinite(k) else int(beta * T)) + 1
    while stats.poisson.sf(g - 1, beta * T) >= tol:
        g += 1
    return max(g, 1)


def cluster_indicator(eta: SirConfiguration, r: int, n: int, kind: str) -> int:
    """Indicator of the G, J or H cluster at (r, n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if kind not in ("G", "J", "H"):
        raise ValueError("kind must be 'G', 'J' or 'H'")
    if eta.at(r + n) != "I":
        return 0
    for x in range(r, r + n):
        if eta.at(x) != "S":
            return 0
    if kind == "H":
        return 1
    return int(eta.at(r - 1) == ("I" if kind == "G" else "R"))


@dataclass(frozen=True)
class ClusterValues:
    kind: str
    r: int
    n: int
    t: float
    value: float
    truncation_error: float
    route: str = "series"


class ConfigurationData:
    """Initial clusters of a deterministic configuration."""

    translation_invariant = False

    def __init__(self, eta: SirConfiguration):
        if eta.outside is None:
            raise ValueError("initial configuration needs an outside state")
        self.eta = eta
        inf = eta.infected()
        # clusters need I at both ends, so their length is bounded by the I span
        self.max_len = (max(inf) - min(inf) - 1) if len(inf) >= 2 else 0
        self.G0 = lru_cache(maxsize=None)(lambda r, n: float(cluster_indicator(eta, r, n, "G")))
        self.J0 = lru_cache(maxsize=None)(lambda r, n: float(cluster_indicator(eta, r, n, "J")))
        self.H0 = lru_cache(maxsize=None)(lambda r, n: float(cluster_indicator(eta, r, n, "H")))

    def max_s_run(self) -> float:
        """Longest S-run that ends next to an I (inf if unbounded)."""
        if not self.eta.infected():
            return 0
        if self.eta.outside == "S":
            return math.inf
        best = run = 0
        for c in self.eta.states:
            if c == "I":
                best = max(best, run)
            run = run + 1 if c == "S" else 0
        return best

    def s_run_tail(self, m: int) -> float:
        return 0.0 if m > self.max_s_run() else 1.0


class ProductMeasure:
    """Product measure with site law x -> (pS, pI, pR).

    With a constant law the measure is translation invariant and the cluster
    values decay geometrically in n.
    """

    def __init__(self, law: Callable[[int], tuple] | tuple):
        if callable(law):
            self.law = law
            self.translation_invariant = False
        else:
            probs = tuple(float(p) for p in law)
            if len(probs) != 3 or abs(sum(probs) - 1) > 1e-12 or min(probs) < 0:
                raise ValueError("site law must be three probabilities summing to 1")
            self.law = lambda x, _p=probs: _p
            self.translation_invariant = True
        self.max_len = math.inf

    def _run(self, r, n):
        return math.prod(self.law(x)[0] for x in range(r, r + n))

    def G0(self, r, n):
        return self.law(r - 1)[1] * self._run(r, n) * self.law(r + n)[1]

    def J0(self, r, n):
        return self.law(r - 1)[2] * self._run(r, n) * self.law(r + n)[1]

    def H0(self, r, n):
        return self._run(r, n) * self.law(r + n)[1]

    def max_s_run(self) -> float:
        return math.inf

    def s_run_tail(self, m: int, r: int = 0) -> float:
        if self.translation_invariant:
            return self.law(0)[0] ** m
        return max(self._run(x, m) for x in range(r - m - 64, r + 64))


def _as_data(obj):
    if isinstance(obj, SirConfiguration):
        return ConfigurationData(obj)
    return obj


def _poisson_cut(mean: float, tol: float) -> int:
    """Smallest K with P[Poisson(mean) > K] < tol."""
    if mean == 0:
        return 0
    k = stats.poisson.isf(tol, mean)
    # isf returns nan for tolerances near the double-precision floor
    K = int(k) if np.isfinite(k) else int(mean)
    while stats.poisson.sf(K, mean) >= tol:
        K += 1
    return K


def _g_weights(data, r, n, bmax):
    """w[b] = sum_a C(b,a)/2^b G0(r-a, n+b) for b = 0..bmax."""
    w = np.zeros(bmax + 1)
    for b in range(bmax + 1):
        if data.translation_invariant:
            w[b] = data.G0(r, n + b)
        else:
            a = np.arange(b + 1)
            pa = stats.binom.pmf(a, b, 0.5)
            w[b] = sum(pa[i] * data.G0(r - i, n + b) for i in range(b + 1))
    return w


def _bmax(data, n, mean, tol):
    cut = _poisson_cut(mean, tol)
    if math.isfinite(data.max_len):
        exact = max(int(data.max_len) - n, 0)
        if exact <= cut:
            return exact, 0.0
    return cut, float(stats.poisson.sf(cut, mean))


def g_cluster(data, params: SirParams, r: int, n: int, t: float, tol: float = 1e-10) -> ClusterValues:
    """G(r, n, t) from the initial clusters through the G-layer dual walk."""
    if t < 0:
        raise ValueError("t must be >= 0")
    data = _as_data(data)
    b_, g_ = params.beta_inf, params.gamma_rec
    bmax, tail = _bmax(data, n, 2 * b_ * t, tol)
    w = _g_weights(data, r, n, bmax)
    pois = stats.poisson.pmf(np.arange(bmax + 1), 2 * b_ * t) if t > 0 else np.eye(1, bmax + 1)[0]
    val = math.exp(-2 * g_ * t) * float(pois @ w)
    return ClusterValues("G", r, n, t, val, math.exp(-2 * g_ * t) * tail)


def _gauss(f, t, tol, n0=16, n_max=1024):
    """Gauss-Legendre on [0, t], doubling nodes until two levels agree within tol."""
    prev = None
    m = n0
    while m <= n_max:
        x, wq = leggauss(m)
        s = 0.5 * t * (x + 1)
        val = 0.5 * t * float(np.dot(wq, f(s)))
        if prev is not None and abs(val - prev) < tol:
            return val, abs(val - prev)
        prev = val
        m *= 2
    raise RuntimeError(f"quadrature did not reach tol {tol:.1e}")


def j_cluster(data, params: SirParams, r: int, n: int, t: float, tol: float = 1e-10) -> ClusterValues:
    """J(r, n, t): J-layer term plus the gamma-weighted integral over the flip time."""
    if t < 0:
        raise ValueError("t must be >= 0")
    data = _as_data(data)
    b_, g_ = params.beta_inf, params.gamma_rec
    if t == 0:
        return ClusterValues("J", r, n, t, data.J0(r, n), 0.0)
    # J-layer part
    kmax, ktail = _bmax(data, n, b_ * t, tol / 4)
    pk = stats.poisson.pmf(np.arange(kmax + 1), b_ * t)
    first = math.exp(-g_ * t) * float(sum(pk[k] * data.J0(r, n + k) for k in range(kmax + 1)))
    err = math.exp(-g_ * t) * ktail
    if g_ == 0:
        return ClusterValues("J", r, n, t, first, err)
    # mixed part: stay J for s, flip at rate gamma, then G for t - s
    bmax, btail = _bmax(data, n, 2 * b_ * t, tol / 4)
    c = np.zeros((kmax + 1, bmax + 1))
    for k in range(kmax + 1):
        c[k] = _g_weights(data, r, n + k, bmax)
    kk, bb = np.arange(kmax + 1), np.arange(bmax + 1)

    def f(s):
        pk_s = stats.poisson.pmf(kk[None, :], b_ * s[:, None])
        pb_s = stats.poisson.pmf(bb[None, :], 2 * b_ * (t - s)[:, None])
        core = np.einsum("ik,kb,ib->i", pk_s, c, pb_s)
        return g_ * np.exp(-g_ * s - 2 * g_ * (t - s)) * core

    second, qerr = _gauss(f, t, tol / 4)
    err += qerr + g_ * t * (ktail + btail)
    return ClusterValues("J", r, n, t, first + second, err)


def h_cluster(data, params: SirParams, r: int, n: int, t: float, tol: float = 1e-10,
              n_max: int | None = None) -> ClusterValues:
    """H(r, n, t) = sum_{j>=0} [J + G](r - j, n + j, t), cut where no S-run is that long."""
    data = _as_data(data)
    longest = data.max_s_run()
    if n_max is None:
        if math.isfinite(longest):
            n_max = max(int(longest), n)
        else:
            n_max = n
            while data.s_run_tail(n_max + 1) >= tol / 2:
                n_max += 1
    tail = data.s_run_tail(n_max + 1)
    if math.isfinite(longest) and longest > n_max:
        raise ValueError(f"n_max={n_max} too small: initial S-runs of length {longest} exist")
    if not math.isfinite(longest) and tail >= tol:
        raise ValueError(f"n_max={n_max} too small: S-run tail {tail:.2e} >= tol")
    terms = max(n_max - n + 1, 0)
    val, err = 0.0, tail
    each = tol / (4 * max(terms, 1))
    for j in range(terms):
        gj = g_cluster(data, params, r - j, n + j, t, each)
        jj = j_cluster(data, params, r - j, n + j, t, each)
        val += gj.value + jj.value
        err += gj.truncation_error + jj.truncation_error
    return ClusterValues("H", r, n, t, val, err)


# translation-invariant reductions, evaluated literally

def ti_g(G0: Callable[[int], float], params: SirParams, n: int, t: float, tol: float = 1e-13) -> float:
    """e^{-2(g+b)t} sum_l (2bt)^l/l! G0(n+l)."""
    b_, g_ = params.beta_inf, params.gamma_rec
    L = _poisson_cut(2 * b_ * t, tol)
    pl = stats.poisson.pmf(np.arange(L + 1), 2 * b_ * t) if t > 0 else np.eye(1, L + 1)[0]
    return math.exp(-2 * g_ * t) * float(sum(pl[l] * G0(n + l) for l in range(L + 1)))


def _ti_smoothed_integral(G0, params, n, t, tol):
    """int_0^t e^{-(g+b)(t-s)} sum_l (b(t-s))^l/l! G(l+n, s) ds."""
    b_, g_ = params.beta_inf, params.gamma_rec
    L = _poisson_cut(b_ * t, tol)

    def f(s):
        u = t - s
        pl = stats.poisson.pmf(np.arange(L + 1), b_ * u) if u > 0 else np.eye(1, L + 1)[0]
        return math.exp(-g_ * u) * sum(pl[l] * ti_g(G0, params, n + l, s, tol) for l in range(L + 1))

    val, _ = integrate.quad(f, 0.0, t, epsabs=tol, epsrel=1e-12, limit=200)
    return val


def ti_j(G0, J0, params: SirParams, n: int, t: float, tol: float = 1e-13) -> float:
    """Solution of dJ/dt = -(g+b)J(n) + bJ(n+1) + gG(n)."""
    b_, g_ = params.beta_inf, params.gamma_rec
    L = _poisson_cut(b_ * t, tol)
    pl = stats.poisson.pmf(np.arange(L + 1), b_ * t) if t > 0 else np.eye(1, L + 1)[0]
    first = math.exp(-g_ * t) * float(sum(pl[l] * J0(n + l) for l in range(L + 1)))
    return first + g_ * _ti_smoothed_integral(G0, params, n, t, tol)


def ti_h(G0, H0, params: SirParams, n: int, t: float, tol: float = 1e-13) -> float:
    """Solution of dH/dt = -(g+b)H(n) + b(H(n+1) - G(n))."""
    b_, g_ = params.beta_inf, params.gamma_rec
    L = _poisson_cut(b_ * t, tol)
    pl = stats.poisson.pmf(np.arange(L + 1), b_ * t) if t > 0 else np.eye(1, L + 1)[0]
    first = math.exp(-g_ * t) * float(sum(pl[l] * H0(n + l) for l in range(L + 1)))
    return first - b_ * _ti_smoothed_integral(G0, params, n, t, tol)


# closed-form law of the bilayer dual walk

@dataclass(frozen=True)
class DualWalkLaw:
    probs: dict
    trap: float
    truncated: float = 0.0
    info: dict = field(default_factory=dict)

    def total(self) -> float:
        return sum(self.probs.values()) + self.trap + self.truncated


def dual_walk_transient(params: SirParams, r: int, n: int, layer: str, t: float,
                        tol: float = 1e-13) -> DualWalkLaw:
    """Law at time t of the dual walk started at (r, n, layer)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if layer not in ("G", "J"):
        raise ValueError("layer must be 'G' or 'J'")
    b_, g_ = params.beta_inf, params.gamma_rec
    if t == 0:
        return DualWalkLaw({SirDualState(r, n, layer): 1.0}, 0.0)
    probs: dict = {}
    B = _poisson_cut(2 * b_ * t, tol)
    bb = np.arange(B + 1)
    if layer == "G":
        pb = stats.poisson.pmf(bb, 2 * b_ * t)
        for b in range(B + 1):
            pa = stats.binom.pmf(np.arange(b + 1), b, 0.5)
            for a in range(b + 1):
                probs[SirDualState(r - a, n + b, "G")] = math.exp(-2 * g_ * t) * pb[b] * pa[a]
        trap = 1 - math.exp(-2 * g_ * t)
        cut = math.exp(-2 * g_ * t) * float(stats.poisson.sf(B, 2 * b_ * t))
        return DualWalkLaw(probs, trap, cut)
    Kc = _poisson_cut(b_ * t, tol)
    kk = np.arange(Kc + 1)
    pk = stats.poisson.pmf(kk, b_ * t)
    for k in range(Kc + 1):
        probs[SirDualState(r, n + k, "J")] = math.exp(-g_ * t) * pk[k]
    cut = math.exp(-g_ * t) * float(stats.poisson.sf(Kc, b_ * t))
    if g_ > 0:
        # weight of (k, b): flip at time s after k J-steps, then b G-steps
        M = np.zeros((Kc + 1, B + 1))
        prev = None
        for m in (32, 64, 128, 256, 512):
            x, wq = leggauss(m)
            s = 0.5 * t * (x + 1)
            ws = 0.5 * t * wq * g_ * np.exp(-g_ * s - 2 * g_ * (t - s))
            pk_s = stats.poisson.pmf(kk[None, :], b_ * s[:, None])
            pb_s = stats.poisson.pmf(bb[None, :], 2 * b_ * (t - s)[:, None])
            M = np.einsum("i,ik,ib->kb", ws, pk_s, pb_s)
            if prev is not None and np.abs(M - prev).max() < tol:
                break
            prev = M
        for k in range(Kc + 1):
            for b in range(B + 1):
                pa = stats.binom.pmf(np.arange(b + 1), b, 0.5)
                for a in range(b + 1):
                    st = SirDualState(r - a, n + k + b, "G")
                    probs[st] = probs.get(st, 0.0) + M[k, b] * pa[a]
        alive_g = math.exp(-g_ * t) - math.exp(-2 * g_ * t)
        cut += max(alive_g - float(M.sum()), 0.0)
    trap = (1 - math.exp(-g_ * t)) ** 2
    return DualWalkLaw(probs, trap, cut)
