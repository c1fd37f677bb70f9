"""Gillespie simulation of the DCP, GDCP, SIR and their duals.

Lattice kernels group events by category (mixed bonds, full bonds, left and
right boundary) with equal rates inside a category, so each event costs O(1)
bookkeeping. Replica r of a run with seed s draws from Philox keyed by (s, r).
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np

from . import exact
from .generators import (SirDualState, TRAP, DualConfiguration, build_dcp, build_dual,
                         build_gdcp, build_sir_dual)
from .lattice import Configuration, DcpParams, GdcpParams, SirParams
from .sir import SirConfiguration, cluster_indicator, light_cone_guard

log = logging.getLogger(__name__)

MODELS = ("dcp", "gdcp", "dcp-dual", "gdcp-dual", "sir", "sir-dual")
REACHED, EXTINCT, BUDGET, FROZEN = 0, 1, 2, 3


class StepBudgetExceeded(RuntimeError):
    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


def stream(seed: int, replica: int = 0) -> np.random.Generator:
    """Independent counter-based stream for replica ``replica`` of ``seed``."""
    if seed < 0 or replica < 0:
        raise ValueError("seed and replica must be >= 0")
    return np.random.Generator(np.random.Philox(key=[int(seed), int(replica)]))


@dataclass(frozen=True)
class SimOutcome:
    final: object
    events: int
    t: float
    extinct: bool = False
    tau: float | None = None
    absorbed: tuple[int, int] | None = None
    stream: tuple[int, int] = (0, 0)
    edge_touched: bool = False
    occupation: np.ndarray | None = None  # time integral of eta_x after the burn-in


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    replicas: int
    seed: int
    name: str = ""

    def within(self, value: float, k: float = 3.0) -> bool:
        return abs(self.mean - value) <= k * self.stderr

    @classmethod
    def from_values(cls, values, seed: int, name: str = "") -> "Estimate":
        v = np.asarray(values, dtype=float)
        if v.size < 2:
            raise ValueError("need at least 2 replicas")
        return cls(float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)), int(v.size), seed, name)


# kernels

@numba.njit(cache=True, nogil=True)
def _move(lst, pos, cnt, cat, x, new):
    old = cat[x]
    if old == new:
        return
    if old > 0:
        i = pos[old, x]
        last = lst[old, cnt[old] - 1]
        lst[old, i] = last
        pos[old, last] = i
        cnt[old] -= 1
        pos[old, x] = -1
    if new > 0:
        lst[new, cnt[new]] = x
        pos[new, x] = cnt[new]
        cnt[new] += 1
    cat[x] = new


@numba.njit(cache=True, nogil=True)
def _touch(eta, y, lst, pos, cnt, cat):
    N = eta.size
    for b in (y - 1, y):
        if 0 <= b < N - 1:
            _move(lst, pos, cnt, cat, b, eta[b] + eta[b + 1])


@numba.njit(cache=True, nogil=True)
def _pick(lst, c, cnt, u, rate):
    k = int(u / rate)
    if k >= cnt[c]:
        k = cnt[c] - 1
    return lst[c, k]


@numba.njit(cache=True, nogil=True)
def _lattice_kernel(eta, rates, t_end, max_events, stop_empty, rng, avg_from, occ):
    lam, D, mu1, mu2 = rates[0], rates[1], rates[2], rates[3]
    e1, eN, a1, aN, s1, sN = rates[4], rates[5], rates[6], rates[7], rates[8], rates[9]
    N = eta.size
    nb = max(N - 1, 1)
    cat = np.zeros(nb, np.int64)
    lst = np.zeros((3, nb), np.int64)
    pos = np.full((3, nb), -1, np.int64)
    cnt = np.zeros(3, np.int64)
    for b in range(N - 1):
        _move(lst, pos, cnt, cat, b, eta[b] + eta[b + 1])
    rm, rf = mu1 + D + lam, 2.0 * mu2
    npart = 0
    for x in range(N):
        npart += eta[x]
    t, events, m, n = 0.0, 0, 0, 0
    if stop_empty and npart == 0:
        return 0.0, 0, 0, 0, 1
    while True:
        b1 = a1 if eta[0] == 0 else e1 + s1
        bN = aN if eta[N - 1] == 0 else eN + sN
        c1 = cnt[1] * rm
        c2 = c1 + cnt[2] * rf
        c3 = c2 + b1
        total = c3 + bN
        if total <= 0.0:
            if occ.size > 0 and t_end > avg_from and math.isfinite(t_end):
                w = t_end - max(t, avg_from)
                for x in range(N):
                    occ[x] += w * eta[x]
            return (t_end if math.isfinite(t_end) else t), events, m, n, 3
        t_next = t + rng.exponential(1.0 / total)
        t_hi = min(t_next, t_end)
        if occ.size > 0 and t_hi > avg_from:
            w = t_hi - max(t, avg_from)
            for x in range(N):
                occ[x] += w * eta[x]
        if t_next >= t_end:
            return t_end, events, m, n, 0
        if events >= max_events:
            return t, events, m, n, 2
        t = t_next
        events += 1
        u = rng.random() * total
        if u < c1:
            b = _pick(lst, 1, cnt, u, rm)
            full, empty = (b, b + 1) if eta[b] == 1 else (b + 1, b)
            v = rng.random() * rm
            if v < mu1:
                eta[full] = 0
                npart -= 1
                _touch(eta, full, lst, pos, cnt, cat)
            elif v < mu1 + D:
                eta[full] = 0
                eta[empty] = 1
                _touch(eta, full, lst, pos, cnt, cat)
                _touch(eta, empty, lst, pos, cnt, cat)
            else:
                eta[empty] = 1
                npart += 1
                _touch(eta, empty, lst, pos, cnt, cat)
        elif u < c2:
            b = _pick(lst, 2, cnt, u - c1, rf)
            y = b if rng.random() < 0.5 else b + 1
            eta[y] = 0
            npart -= 1
            _touch(eta, y, lst, pos, cnt, cat)
        else:
            left = u < c3
            y = 0 if left else N - 1
            if eta[y] == 0:
                eta[y] = 1
                npart += 1
            else:
                e, s = (e1, s1) if left else (eN, sN)
                if rng.random() * (e + s) < s:
                    if left:
                        m += 1
                    else:
                        n += 1
                eta[y] = 0
                npart -= 1
            _touch(eta, y, lst, pos, cnt, cat)
        if stop_empty and npart == 0:
            return t, events, m, n, 1


@numba.njit(cache=True, nogil=True)
def _sir_active(st, b):
    return (st[b] == 0 and st[b + 1] == 1) or (st[b] == 1 and st[b + 1] == 0)


@numba.njit(cache=True, nogil=True)
def _sir_touch(st, y, lstB, posB, cntB, catB):
    W = st.size
    for b in (y - 1, y):
        if 0 <= b < W - 1:
            _move(lstB, posB, cntB, catB, b, 1 if _sir_active(st, b) else 0)


@numba.njit(cache=True, nogil=True)
def _sir_kernel(st, beta, gamma, t_end, max_events, rng):
    """Windowed SIR with inert exterior; codes S=0, I=1, R=2."""
    W = st.size
    nb = max(W - 1, 1)
    catI = np.zeros(W, np.int64)
    lstI = np.zeros((2, W), np.int64)
    posI = np.full((2, W), -1, np.int64)
    cntI = np.zeros(2, np.int64)
    catB = np.zeros(nb, np.int64)
    lstB = np.zeros((2, nb), np.int64)
    posB = np.full((2, nb), -1, np.int64)
    cntB = np.zeros(2, np.int64)
    for x in range(W):
        if st[x] == 1:
            _move(lstI, posI, cntI, catI, x, 1)
    for b in range(W - 1):
        if _sir_active(st, b):
            _move(lstB, posB, cntB, catB, b, 1)
    t, events, touched = 0.0, 0, False
    while True:
        cI = cntI[1] * gamma
        total = cI + cntB[1] * beta
        if total <= 0.0:
            return t_end, events, touched, 3
        t_next = t + rng.exponential(1.0 / total)
        if t_next >= t_end:
            return t_end, events, touched, 0
        if events >= max_events:
            return t, events, touched, 2
        t = t_next
        events += 1
        u = rng.random() * total
        if u < cI:
            x = _pick(lstI, 1, cntI, u, gamma)
            st[x] = 2
            _move(lstI, posI, cntI, catI, x, 0)
        else:
            b = _pick(lstB, 1, cntB, u - cI, beta)
            x = b if st[b] == 0 else b + 1
            st[x] = 1
            _move(lstI, posI, cntI, catI, x, 1)
            if x == 0 or x == W - 1:
                touched = True
        _sir_touch(st, x, lstB, posB, cntB, catB)


@numba.njit(cache=True, nogil=True)
def _sir_dual_kernel(r, n, layer, beta, gamma, t_end, max_events, rng):
    """Bilayer walk; layer 0 = G, 1 = J, 2 = trap."""
    t, events = 0.0, 0
    while layer != 2:
        total = 2.0 * (beta + gamma) if layer == 0 else beta + gamma
        if total <= 0.0:
            break
        t += rng.exponential(1.0 / total)
        if t >= t_end or events >= max_events:
            break
        events += 1
        u = rng.random() * total
        if u < beta:
            n += 1
        elif layer == 0 and u < 2.0 * beta:
            r -= 1
            n += 1
        elif layer == 0:
            layer = 2
        else:
            layer = 0
    return r, n, layer, events


# model plumbing

def lattice_rates(model: str, params) -> np.ndarray:
    """(lam, D, mu1, mu2, e1, eN, a1, aN, s1, sN) for the generic lattice kernel."""
    p = params
    if model == "dcp":
        _need(p, DcpParams, model)
        r = (p.lam, p.diffusion, 0.5, 0.5, p.gamma + 0.5, p.beta + 0.5, p.alpha, p.delta, 0, 0)
    elif model == "gdcp":
        _need(p, GdcpParams, model)
        r = (p.lam, p.diffusion, p.mu1, p.mu2, p.gamma, p.beta, p.alpha, p.delta, 0, 0)
    elif model == "dcp-dual":
        _need(p, DcpParams, model)
        r = (p.lam, p.diffusion, 0.5, 0.5, 0.5, 0.5, 0, 0, p.left_rate, p.right_rate)
    elif model == "gdcp-dual":
        _need(p, GdcpParams, model)
        lam_h, dif_h = p.dual_lam, p.dual_diffusion
        if lam_h < -1e-15 or dif_h < -1e-15:
            raise ValueError("dual rates lam+mu2-mu1 and D+mu1-mu2 must be >= 0")
        r = (max(lam_h, 0.0), max(dif_h, 0.0), p.mu2, p.mu1, 0, 0, 0, 0, p.left_rate, p.right_rate)
    else:
        raise ValueError(f"not a lattice model: {model}")
    return np.array(r, dtype=float)


def _need(p, cls, model):
    if not isinstance(p, cls):
        raise TypeError(f"model {model!r} needs {cls.__name__}, got {type(p).__name__}")


def _sir_params(p) -> SirParams:
    _need(p, SirParams, "sir")
    return p


def _lattice_init(model, init):
    if model.endswith("dual"):
        if isinstance(init, DualConfiguration):
            if init.left or init.right:
                raise ValueError("dual runs start with empty sinks")
            init = init.sites
    eta = np.array([int(v) for v in init], dtype=np.int64)
    if eta.size < 1 or np.any((eta != 0) & (eta != 1)):
        raise ValueError("initial configuration must be a non-empty 0/1 word")
    return eta


def _guarded(init: SirConfiguration, beta: float, t_end: float) -> SirConfiguration:
    """Pad the window so infections cannot reach its edge before t_end (tail < 1e-10)."""
    g = light_cone_guard(beta, t_end)
    return init.padded(g)


def _sir_run(conf, codes, p, t_end, rng, sid, max_events):
    st = codes.copy()
    t, ev, touched, status = _sir_kernel(st, p.beta_inf, p.gamma_rec, float(t_end), max_events, rng)
    if status == BUDGET:
        raise StepBudgetExceeded(f"event budget {max_events} exhausted at t={t}")
    word = "".join("SIR"[c] for c in st)
    final = SirConfiguration(conf.lo, word, None if touched and conf.outside == "S" else conf.outside)
    return SimOutcome(final, int(ev), float(t), stream=sid, edge_touched=bool(touched))


def simulate(model: str, params, init, t_end: float, seed: int, replica: int = 0,
             max_events: int = 10 ** 8, avg_from: float | None = None, guard: int | None = None) -> SimOutcome:
    """One Gillespie trajectory on [0, t_end]."""
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    if not t_end >= 0:
        raise ValueError("t_end must be >= 0")
    rng = stream(seed, replica)
    sid = (int(seed), int(replica))
    if model == "sir":
        p = _sir_params(params)
        if not isinstance(init, SirConfiguration):
            raise TypeError("sir runs start from a SirConfiguration")
        if init.outside is None:
            raise ValueError("sir runs need an outside state")
        conf = init.padded(guard) if guard is not None else _guarded(init, p.beta_inf, t_end)
        return _sir_run(conf, conf.codes().astype(np.int64), p, t_end, rng, sid, max_events)
    if model == "sir-dual":
        p = _sir_params(params)
        if not isinstance(init, SirDualState) or init.is_trap:
            raise TypeError("sir-dual runs start from a non-trap SirDualState")
        lay = {"G": 0, "J": 1}[init.layer]
        r, n, lay, ev = _sir_dual_kernel(init.r, init.n, lay, p.beta_inf, p.gamma_rec,
                                         float(t_end), max_events, rng)
        final = TRAP if lay == 2 else SirDualState(int(r), int(n), "GJ"[lay])
        return SimOutcome(final, int(ev), float(t_end), stream=sid)
    rates = lattice_rates(model, params)
    eta = _lattice_init(model, init)
    occ = np.zeros(eta.size if avg_from is not None else 0)
    t, ev, m, n, status = _lattice_kernel(eta, rates, float(t_end), max_events, False, rng,
                                          float(avg_from or 0.0), occ)
    if status == BUDGET:
        raise StepBudgetExceeded(f"event budget {max_events} exhausted at t={t}")
    conf = Configuration(eta.tolist())
    if model.endswith("dual"):
        final = DualConfiguration(int(m), conf, int(n))
        extinct = not any(conf)
        return SimOutcome(final, int(ev), float(t), extinct, None, (int(m), int(n)), sid,
                          occupation=occ if avg_from is not None else None)
    return SimOutcome(conf, int(ev), float(t), stream=sid,
                      occupation=occ if avg_from is not None else None)


def simulate_dual_until_extinct(params, init, seed: int, replica: int = 0,
                                max_events: int = 10 ** 7) -> SimOutcome:
    """Run the lattice dual until no particle is left; records tau_N and both sinks."""
    model = "dcp-dual" if isinstance(params, DcpParams) else "gdcp-dual"
    rates = lattice_rates(model, params)
    eta = _lattice_init(model, init)
    rng = stream(seed, replica)
    t, ev, m, n, status = _lattice_kernel(eta, rates, math.inf, max_events, True, rng, 0.0, np.zeros(0))
    final = DualConfiguration(int(m), Configuration(eta.tolist()), int(n))
    out = SimOutcome(final, int(ev), float(t), status == EXTINCT, float(t) if status == EXTINCT else None,
                     (int(m), int(n)), (int(seed), int(replica)))
    if status != EXTINCT:
        raise StepBudgetExceeded(f"not extinct after {ev} events", out)
    return out


# replica estimators

def _run_replicas(fn: Callable[[int], object], replicas: int, workers: int | None) -> list:
    """fn(r) for r in range(replicas); results are stored by replica index."""
    workers = workers or 1
    out = [None] * replicas
    if workers == 1:
        for r in range(replicas):
            out[r] = fn(r)
        return out
    chunks = [range(k, replicas, workers) for k in range(workers)]

    def work(ch):
        for r in ch:
            out[r] = fn(r)

    with ThreadPoolExecutor(max_workers=workers) as ex:
        list(ex.map(work, chunks))
    return out


def estimate(observable: Callable[[SimOutcome], float], model: str, params, init, t: float,
             replicas: int, seed: int, workers: int | None = None, name: str = "", **kw) -> Estimate:
    """Replica mean and standard error of observable(final outcome at time t)."""
    if replicas < 2:
        raise ValueError("replicas must be >= 2")
    if model == "sir" and "guard" not in kw:
        kw["guard"] = light_cone_guard(params.beta_inf, t)
    while True:
        if model == "sir":
            conf = init.padded(kw["guard"])
            codes = conf.codes().astype(np.int64)
            me = kw.get("max_events", 10 ** 8)
            run = lambda r: _sir_run(conf, codes, params, t, stream(seed, r), (seed, r), me)  # noqa: E731
        else:
            run = lambda r: simulate(model, params, init, t, seed, r, **kw)  # noqa: E731
        outs = _run_replicas(run, replicas, workers)
        if model != "sir" or not any(o.edge_touched for o in outs):
            break
        kw["guard"] *= 2
        log.warning("SIR trajectory reached the window edge; rerunning with guard %d", kw["guard"])
    vals = np.array([observable(o) for o in outs], dtype=float)
    return Estimate.from_values(vals, seed, name)


def estimate_vector(observable: Callable[[SimOutcome], np.ndarray], model: str, params, init, t: float,
                    replicas: int, seed: int, workers: int | None = None, **kw) -> list[Estimate]:
    """Componentwise estimates of a vector observable (one trajectory set for all components)."""
    if replicas < 2:
        raise ValueError("replicas must be >= 2")
    outs = _run_replicas(lambda r: simulate(model, params, init, t, seed, r, **kw), replicas, workers)
    vals = np.array([observable(o) for o in outs], dtype=float)
    return [Estimate.from_values(vals[:, j], seed, f"[{j}]") for j in range(vals.shape[1])]


def estimate_extinction(observable: Callable[[SimOutcome], float], params, init, replicas: int,
                        seed: int, workers: int | None = None, name: str = "", **kw) -> Estimate:
    if replicas < 2:
        raise ValueError("replicas must be >= 2")
    outs = _run_replicas(lambda r: simulate_dual_until_extinct(params, init, seed, r, **kw), replicas, workers)
    return Estimate.from_values([observable(o) for o in outs], seed, name)


def absorption_frequencies(params, init, k_max: int, replicas: int, seed: int,
                           workers: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Empirical joint law of the sink counts, with per-cell standard errors."""
    outs = _run_replicas(lambda r: simulate_dual_until_extinct(params, init, seed, r), replicas, workers)
    H = np.zeros((k_max + 1, k_max + 1))
    for o in outs:
        m, n = o.absorbed
        if m <= k_max and n <= k_max:
            H[m, n] += 1
    p = H / replicas
    return p, np.sqrt(p * (1 - p) / replicas)


def default_burn_in(model: str, params, N: int) -> float:
    """10 / spectral gap of the exact generator (N <= 10)."""
    if N > 10:
        raise ValueError("set burn_in explicitly for N > 10")
    L = build_dcp(params, N) if model == "dcp" else build_gdcp(params, N)
    gap = exact.spectral_gap(L)
    if gap <= 0:
        raise ValueError("generator has no spectral gap")
    return 10.0 / gap


def long_run_density(model: str, params, init, t_avg: float, replicas: int, seed: int,
                     burn_in: float | None = None, workers: int | None = None) -> list[Estimate]:
    """Per-site time-averaged occupation over [burn_in, burn_in + t_avg]."""
    if model not in ("dcp", "gdcp"):
        raise ValueError("long-run densities are defined for dcp and gdcp")
    if t_avg <= 0:
        raise ValueError("t_avg must be > 0")
    N = len(init)
    tb = default_burn_in(model, params, N) if burn_in is None else burn_in
    outs = _run_replicas(lambda r: simulate(model, params, init, tb + t_avg, seed, r, avg_from=tb),
                         replicas, workers)
    occ = np.array([o.occupation for o in outs]) / t_avg
    return [Estimate.from_values(occ[:, x], seed, f"rho({x + 1})") for x in range(N)]


# single-step transition frequencies

@dataclass(frozen=True)
class ChiSquareGate:
    statistic: float
    df: int
    z: float
    passed: bool
    observed: dict
    expected: dict


def _chi_square(observed: dict, expected: dict, samples: int) -> ChiSquareGate:
    stray = [k for k in observed if expected.get(k, 0.0) <= 0]
    keys = [k for k, p in expected.items() if p > 0]
    X2 = sum((observed.get(k, 0) - samples * expected[k]) ** 2 / (samples * expected[k]) for k in keys)
    df = max(len(keys) - 1, 0)
    z = (X2 - df) / math.sqrt(2 * df) if df > 0 else 0.0
    return ChiSquareGate(float(X2), df, float(z), not stray and z < 4.0, observed, expected)


def _row_law(L, state) -> dict:
    i = L.row_index[state]
    row = L.matrix.getrow(i).tocoo()
    out = {L.states[j]: v for j, v in zip(row.col, row.data) if j != i and v > 0}
    tot = sum(out.values())
    return {k: v / tot for k, v in out.items()}


def _sir_row_law(conf: SirConfiguration, p: SirParams) -> dict:
    rates = {}
    for k, c in enumerate(conf.states):
        x = conf.lo + k
        if c == "I" and p.gamma_rec > 0:
            rates[conf.states[:k] + "R" + conf.states[k + 1:]] = p.gamma_rec
        elif c == "S":
            k_inf = sum(1 for y in (x - 1, x + 1) if conf.lo <= y <= conf.hi and conf.at(y) == "I")
            if k_inf and p.beta_inf > 0:
                rates[conf.states[:k] + "I" + conf.states[k + 1:]] = k_inf * p.beta_inf
    tot = sum(rates.values())
    return {k: v / tot for k, v in rates.items()}


@numba.njit(cache=True, nogil=True)
def _lattice_steps(eta0, rates, samples, rng):
    """Codes 4*index + 2*m + n of the state after one jump, per sample."""
    N = eta0.size
    out = np.empty(samples, np.int64)
    eta = eta0.copy()
    for k in range(samples):
        eta[:] = eta0
        _, _, m, n, _ = _lattice_kernel(eta, rates, np.inf, 1, False, rng, 0.0, np.zeros(0))
        idx = 0
        for x in range(N):
            idx = 2 * idx + eta[x]
        out[k] = 4 * idx + 2 * m + n
    return out


@numba.njit(cache=True, nogil=True)
def _sir_steps(st0, beta, gamma, samples, rng):
    """Base-3 codes of the window after one jump."""
    out = np.empty(samples, np.int64)
    st = st0.copy()
    for k in range(samples):
        st[:] = st0
        _sir_kernel(st, beta, gamma, np.inf, 1, rng)
        c = 0
        for x in range(st.size):
            c = 3 * c + st[x]
        out[k] = c
    return out


@numba.njit(cache=True, nogil=True)
def _sir_dual_steps(r0, n0, lay0, beta, gamma, samples, rng):
    out = np.empty((samples, 3), np.int64)
    for k in range(samples):
        r, n, lay, _ = _sir_dual_kernel(r0, n0, lay0, beta, gamma, np.inf, 1, rng)
        out[k, 0], out[k, 1], out[k, 2] = r, n, lay
    return out


def single_step_gate(model: str, params, init, samples: int, seed: int) -> ChiSquareGate:
    """Chi-square test of the first jump out of ``init`` against the generator row."""
    rng = stream(seed, 0)
    obs: dict = {}
    if model in ("dcp", "gdcp", "dcp-dual", "gdcp-dual"):
        rates = lattice_rates(model, params)
        eta0 = _lattice_init(model, init)
        N = eta0.size
        dual = model.endswith("dual")
        if dual:
            L = build_dual(params, N, sink_cap=1)
            start = DualConfiguration(0, Configuration(eta0.tolist()), 0)
        else:
            L = build_dcp(params, N) if model == "dcp" else build_gdcp(params, N)
            start = Configuration(eta0.tolist())
        expected = _row_law(L, start)
        codes, counts = np.unique(_lattice_steps(eta0, rates, samples, rng), return_counts=True)
        for code, c in zip(codes, counts):
            idx, m, n = int(code) // 4, (int(code) >> 1) & 1, int(code) & 1
            conf = Configuration([(idx >> (N - 1 - x)) & 1 for x in range(N)])
            obs[DualConfiguration(m, conf, n) if dual else conf] = int(c)
    elif model == "sir":
        p = _sir_params(params)
        if init.outside != "R":
            raise ValueError("single-step gate for sir uses an inert (R) exterior")
        expected = _sir_row_law(init, p)
        W = len(init.states)
        codes, counts = np.unique(_sir_steps(init.codes().astype(np.int64), p.beta_inf, p.gamma_rec,
                                             samples, rng), return_counts=True)
        for code, c in zip(codes, counts):
            digits = [(int(code) // 3 ** (W - 1 - x)) % 3 for x in range(W)]
            obs["".join("SIR"[d] for d in digits)] = int(c)
    elif model == "sir-dual":
        p = _sir_params(params)
        L = build_sir_dual(p, (init.r - 2, init.r), init.n + 2)
        expected = _row_law(L, init)
        res = _sir_dual_steps(init.r, init.n, {"G": 0, "J": 1}[init.layer], p.beta_inf, p.gamma_rec,
                              samples, rng)
        rows, counts = np.unique(res, axis=0, return_counts=True)
        for (r, n, lay), c in zip(rows, counts):
            key = TRAP if lay == 2 else SirDualState(int(r), int(n), "GJ"[lay])
            obs[key] = int(c)
    else:
        raise ValueError(f"unknown model {model!r}")
    return _chi_square(obs, expected, samples)


def cluster_observable(kind: str, r: int, n: int) -> Callable[[SimOutcome], float]:
    """Indicator of a G/J/H cluster in the final SIR configuration."""
    return lambda o: float(cluster_indicator(o.final, r, n, kind))


def dual_cluster_observable(initial) -> Callable[[SimOutcome], float]:
    """G0/J0 of the initial data evaluated at the final dual-walk state."""
    from .sir import _as_data
    data = _as_data(initial)

    def f(o):
        s = o.final
        if s.is_trap:
            return 0.0
        return data.G0(s.r, s.n) if s.layer == "G" else data.J0(s.r, s.n)
    return f
