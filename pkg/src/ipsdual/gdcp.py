"""One-point function of the GDCP with annihilating dual (mu1 = lam + mu2).

Closed-form stationary profile from the boundary recurrence of the dual
single-particle absorption problem, bulk density limits, and the exact time
evolution of the one-point function.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .lattice import GdcpParams

log = logging.getLogger(__name__)

DEGENERATE_GAP = 1e-12


@dataclass(frozen=True)
class GdcpClosedForm:
    a_t: float
    b_t: float
    c_t: float
    d_t: float
    A: float
    r_minus: float
    r_plus: float
    B_N: float
    B2_N: float
    u: np.ndarray
    v: np.ndarray
    rho: np.ndarray
    branch: str  # 'exponential', 'linear' or 'single-site'
    case: str = ""


@dataclass(frozen=True)
class SsepMapping:
    """Open SSEP seen by the centered one-point function."""

    D_hat: float
    left_sum: float
    right_sum: float

    @property
    def negative(self) -> bool:
        return self.left_sum < 0 or self.right_sum < 0

    @property
    def special_case(self) -> bool:
        """Boundary sums in {0, D_hat} on both sides."""
        def hit(s):
            return math.isclose(s, 0.0, abs_tol=1e-14) or math.isclose(s, self.D_hat, rel_tol=1e-14)
        return hit(self.left_sum) and hit(self.right_sum)


def _require_annihilating(p: GdcpParams) -> None:
    if not p.annihilating:
        raise ValueError(f"requires mu1 = lam + mu2, got mu1={p.mu1}, lam+mu2={p.lam + p.mu2}")


def constants(p: GdcpParams) -> dict:
    """a~, b~, c~, d~, A and r_+- of the boundary recurrence."""
    Dl = p.diffusion + p.lam
    L, R = p.left_rate, p.right_rate
    den_l = L + Dl + p.mu2
    den_r = R + Dl + p.mu2
    a_t = L / den_l if den_l > 0 else 0.0
    b_t = Dl / den_l if den_l > 0 else 0.0
    c_t = R / den_r if den_r > 0 else 0.0
    d_t = Dl / den_r if den_r > 0 else 0.0
    A = Dl / (Dl + p.mu2) if Dl + p.mu2 > 0 else 0.0
    if 0 < A < 1:
        s = math.sqrt((1 - A) * (1 + A))
        r_m, r_p = A / (1 + s), (1 + s) / A  # r_- in cancellation-free form
    else:
        r_m = r_p = 1.0
    return dict(a_t=a_t, b_t=b_t, c_t=c_t, d_t=d_t, A=A, r_minus=r_m, r_plus=r_p)


def _linear_det(b, d, N):
    return (1 - b) * ((1 - d) * N + d) + (2 * b - 1) * (1 - d)


def solve_boundary_recurrence(a: float, c: float, params: GdcpParams, N: int,
                              return_coeffs: bool = False):
    """Solve w_1 = a + b~ w_2, w_x = A/2 (w_{x-1} + w_{x+1}), w_N = c + d~ w_{N-1}.

    Exponential branch w_x = p r_-^x + q r_+^x for mu2 > 0 and linear branch
    w_x = p' + q' x when mu2 = 0 (or 1 - A below 1e-12).
    """
    if N < 2:
        raise ValueError("the recurrence needs N >= 2")
    k = constants(params)
    b, d, A = k["b_t"], k["d_t"], k["A"]
    x = np.arange(1, N + 1, dtype=float)
    if A == 0:
        # no motion in the dual: interior particles only die
        w = np.zeros(N)
        w[0], w[-1] = a, c
        coeffs = {"p": float("nan"), "q": float("nan"), "branch": "decoupled"}
    elif params.mu2 > 0 and 1 - A >= DEGENERATE_GAP:
        rm, rp = k["r_minus"], k["r_plus"]
        BN = rm * (1 - b * rm) * (1 - d / rp) + rm ** N * rp ** (1 - N) * (b * rp - 1) * (1 - d / rm)
        if BN == 0:
            raise ZeroDivisionError("B_N = 0")
        p = (a * (1 - d / rp) + c * rp ** (1 - N) * (b * rp - 1)) / BN
        q_scaled = (c * rm * (1 - b * rm) + a * rm ** N * (d / rm - 1)) / BN  # q r_+^N
        w = p * rm ** x + q_scaled * rp ** (x - N)
        coeffs = {"p": p, "q": q_scaled * rp ** (-N), "B_N": BN, "branch": "exponential"}
    else:
        if b == 1 and d == 1:
            if a != 0 or c != 0:
                raise ZeroDivisionError("closed boundaries with nonzero source")
            w, pp, qq, case = np.zeros(N), 0.0, 0.0, "i"
        elif b == 1:
            pp, qq, case = c / (1 - d), 0.0, "ii"
            w = np.full(N, pp)
        elif d == 1:
            pp, qq, case = a / (1 - b), 0.0, "iii"
            w = np.full(N, pp)
        else:
            det = _linear_det(b, d, N)
            if det == 0:
                raise ZeroDivisionError("B'_N = 0")
            qq = (c * (1 - b) - a * (1 - d)) / det
            pp = (a * ((1 - d) * N + d) + c * (2 * b - 1)) / det
            w, case = pp + qq * x, "iv"
        coeffs = {"p": pp, "q": qq, "B2_N": _linear_det(b, d, N), "branch": "linear", "case": case}
    return (w, coeffs) if return_coeffs else w


def recurrence_residual(w: np.ndarray, a: float, c: float, params: GdcpParams) -> float:
    k = constants(params)
    b, d, A = k["b_t"], k["d_t"], k["A"]
    r = [abs(w[0] - a - b * w[1]), abs(w[-1] - c - d * w[-2])]
    if len(w) > 2:
        r.append(np.abs(w[1:-1] - A / 2 * (w[:-2] + w[2:])).max())
    return float(max(r))


def one_point_closed_form(params: GdcpParams, N: int) -> GdcpClosedForm:
    """Stationary rho_1(x) = u_x (1 - c~_-) + v_x (1 - c~_+)."""
    _require_annihilating(params)
    if N < 1:
        raise ValueError("N must be >= 1")
    k = constants(params)
    wl, wr = params.weights()
    L, R = params.left_rate, params.right_rate
    if N == 1:
        # no bond: the dual particle cannot die, only leave through a sink
        if L + R == 0:
            raise ValueError("N = 1 with both boundaries closed has no unique stationary law")
        u, v = np.array([L / (L + R)]), np.array([R / (L + R)])
        return GdcpClosedForm(**k, B_N=float("nan"), B2_N=float("nan"), u=u, v=v,
                              rho=u * (1 - wl) + v * (1 - wr), branch="single-site")
    u, cu = solve_boundary_recurrence(k["a_t"], 0.0, params, N, return_coeffs=True)
    v, _ = solve_boundary_recurrence(0.0, k["c_t"], params, N, return_coeffs=True)
    rho = u * (1 - wl) + v * (1 - wr)
    if cu["branch"] == "exponential":
        BN, B2 = cu["B_N"], float("nan")
    else:
        BN, B2 = float("nan"), cu["B2_N"]
    return GdcpClosedForm(**k, B_N=BN, B2_N=B2, u=u, v=v, rho=rho,
                          branch=cu["branch"], case=cu.get("case", ""))


def bulk_density(params: GdcpParams, s: float) -> float:
    """Limit of rho_1([sN]) as N -> infinity."""
    _require_annihilating(params)
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    if params.mu2 > 0:
        return 0.0
    wl, wr = params.weights()
    return (1 - wl) * (1 - s) + (1 - wr) * s


def ssep_mapping(params: GdcpParams) -> SsepMapping:
    m = SsepMapping(params.diffusion + params.lam, params.left_rate - params.mu2,
                    params.right_rate - params.mu2)
    if m.negative:
        log.warning("effective SSEP boundary sum is negative: %s", m)
    if m.special_case:
        log.info("boundary sums in {0, D+lam}: Fourier-solvable case, solved numerically")
    return m


def centered_operator(params: GdcpParams, N: int) -> np.ndarray:
    """Generator of g(x, t) = exp(2 mu2 t)(<eta_x> - rho_1(x))."""
    m = ssep_mapping(params)
    K = np.zeros((N, N))
    for x in range(N - 1):
        K[x, x + 1] += m.D_hat
        K[x + 1, x] += m.D_hat
        K[x, x] -= m.D_hat
        K[x + 1, x + 1] -= m.D_hat
    K[0, 0] -= m.left_sum
    K[N - 1, N - 1] -= m.right_sum
    return K


@dataclass(frozen=True)
class OnePointEvolution:
    times: np.ndarray
    profiles: np.ndarray  # (len(times), N)
    g: np.ndarray  # centered, rescaled profiles
    stationary: np.ndarray
    mapping: SsepMapping

    @property
    def final(self) -> np.ndarray:
        return self.profiles[-1]


def evolve_one_point(params: GdcpParams, init_profile, t: float, dt: float | None = None) -> OnePointEvolution:
    """<eta_x(t)> from <eta_x(0)> through the centered linear system.

    The matrix exponential is exact; ``dt`` only sets the sampling grid of
    the returned trajectory (default: the two points 0 and t).
    """
    _require_annihilating(params)
    init = np.asarray(init_profile, dtype=float)
    N = init.size
    if t < 0:
        raise ValueError("t must be >= 0")
    if dt is None:
        times = np.array([0.0, t]) if t > 0 else np.array([0.0])
    else:
        if dt <= 0:
            raise ValueError("dt must be > 0")
        times = np.arange(0.0, t, dt)
        times = np.append(times, t) if t > 0 else np.array([0.0])
    rho = one_point_closed_form(params, N).rho
    K = centered_operator(params, N)
    g0 = init - rho
    g = np.array([sla.expm(K * s) @ g0 for s in times])
    prof = rho[None, :] + np.exp(-2 * params.mu2 * times)[:, None] * g
    return OnePointEvolution(times, prof, g, rho, ssep_mapping(params))
