"""Closed-form reference values for the DCP on one and two sites.

Stationary laws, moments, absorption probabilities of the dual with
beta = delta = 0, and their infinite-stirring limits. These are used as
independent oracles for the numerical solvers.
"""
from __future__ import annotations

from dataclasses import dataclass

from .lattice import DcpParams


def stationary_n1(p: DcpParams) -> dict:
    z = 1 + p.alpha + p.beta + p.gamma + p.delta
    return {(0,): (p.gamma + p.beta + 1) / z, (1,): (p.alpha + p.delta) / z}


def normalization_n2(p: DcpParams) -> float:
    """c(D) for N = 2."""
    a, b, g, d, lam, D = p.alpha, p.beta, p.gamma, p.delta, p.lam, p.diffusion
    s = a + b + g + d
    return (D * ((s + 2) ** 2 + 2 * lam * (a + d))
            + (s + 1 + (a + g) * (b + d)) * (s + 2)
            + lam * (a + d) * (a + d + lam)
            + lam * ((a + d + 1) * (b + g + 2) + (a + g) * (b + 1) + (b + d) * (g + 1)))


def stationary_n2_weights(p: DcpParams) -> dict:
    """Unnormalized stationary weights c(D) nu(eta) for N = 2.

    The two one-particle expressions are attached to the configurations
    they solve for; the decoupled case D = lam = 0 (independent sites, site 1
    fed by alpha/gamma) fixes which is which.
    """
    a, b, g, d, lam, D = p.alpha, p.beta, p.gamma, p.delta, p.lam, p.diffusion
    s = a + b + g + d
    w00 = D * (b + g + 2) ** 2 + (s + 2 + 2 * lam) * (1 + b + g + b * g)
    # particle at site 2 only
    w01 = D * (2 + b + g) * (a + d) + (g + 1) * (lam * (a + d) + d * (s + 2))
    # particle at site 1 only
    w10 = D * (2 + b + g) * (a + d) + (b + 1) * (lam * (a + d) + a * (s + 2))
    w11 = (D * (a + d) * (a + d + 2 * lam) + a * d * (2 + s)
           + lam * (a + d) * (a + d + lam + 1) + lam * (a * b + g * d))
    return {(0, 0): w00, (0, 1): w01, (1, 0): w10, (1, 1): w11}


def stationary_n2(p: DcpParams) -> dict:
    c = normalization_n2(p)
    return {k: v / c for k, v in stationary_n2_weights(p).items()}


def moments_n2(p: DcpParams) -> tuple[float, float, float]:
    """(rho(1), rho(2), rho(1,2)) for N = 2 from the expanded polynomials."""
    a, b, g, d, lam, D = p.alpha, p.beta, p.gamma, p.delta, p.lam, p.diffusion
    s = a + b + g + d
    c = normalization_n2(p)
    common = D * (a + d) * (2 + b + g + a + d + 2 * lam) + (a * b + d * g) * lam
    rho1 = common + (a + d) * (lam + 2 + a + d + b) * lam + (b + 1 + d) * a * (2 + s)
    rho2 = common + (a + d) * (lam + 2 + a + d + g) * lam + (s + 2) * d * (g + a + 1)
    z = stationary_n2_weights(p)[(1, 1)]
    return rho1 / c, rho2 / c, z / c


def normalization_n2_infinite(p: DcpParams) -> float:
    s = p.alpha + p.beta + p.gamma + p.delta
    return (s + 2) ** 2 + 2 * p.lam * (p.alpha + p.delta)


def stationary_n2_infinite(p: DcpParams) -> dict:
    c = normalization_n2_infinite(p)
    ad, bg = p.alpha + p.delta, p.beta + p.gamma
    one = (2 + bg) * ad / c
    return {(0, 0): (bg + 2) ** 2 / c, (0, 1): one, (1, 0): one,
            (1, 1): ad * (ad + 2 * p.lam) / c}


def occupancy_n2_infinite(p: DcpParams) -> tuple[float, float, float]:
    """Law of the particle number (0, 1, 2) in the infinite stirring limit."""
    nu = stationary_n2_infinite(p)
    return nu[(0, 0)], nu[(0, 1)] + nu[(1, 0)], nu[(1, 1)]


def moments_n2_infinite(p: DcpParams) -> tuple[float, float, float]:
    c = normalization_n2_infinite(p)
    ad = p.alpha + p.delta
    x = ad * (2 + p.beta + p.gamma + ad + 2 * p.lam) / c
    return x, x, ad * (ad + 2 * p.lam) / c


def absorption_n1(p: DcpParams) -> tuple[float, float]:
    """(P[xi_0 = 0], P[xi_0 = 1]) from delta_1 for N = 1, beta = delta = 0."""
    a = p.alpha + p.gamma
    return 1.0 / (a + 1), a / (a + 1)


@dataclass(frozen=True)
class AbsorptionClosedFormN2:
    """Left-absorption probabilities for N = 2 with beta = delta = 0.

    x(k) returns (x1, x2, x3) = P[xi_0(inf) = k] from delta_1, delta_{1,2},
    delta_2. For k >= 4, ``variant='printed'`` evaluates the form with the
    constant phi/(lam E) misplaced and ``'corrected'`` the form that solves
    the recursion.
    """

    a: float  # alpha + gamma
    lam: float
    D: float

    @classmethod
    def from_params(cls, p: DcpParams) -> "AbsorptionClosedFormN2":
        if p.beta != 0 or p.delta != 0:
            raise ValueError("closed form requires beta = delta = 0")
        return cls(p.alpha + p.gamma, p.lam, p.diffusion)

    @property
    def A(self) -> float:
        return (self.a + 2) ** 2 + 2 * self.lam * self.a

    @property
    def B(self) -> float:
        return self.a + 2 * self.lam + 2

    @property
    def d_tilde(self) -> float:
        a, lam = self.a, self.lam
        return self.D * self.A + a * ((a + lam + 2) * (lam + 1) + 1) + 2 * (lam + 1)

    @property
    def E(self) -> float:
        return 2 * self.D + self.a + self.lam + 1

    @property
    def F(self) -> float:
        return 2 * self.D + self.lam + 1

    @property
    def phi(self) -> float:
        a, lam = self.a, self.lam
        return self.D * self.B + lam ** 2 + lam * (a + 2) + a + 1

    @property
    def psi(self) -> float:
        a, lam = self.a, self.lam
        return self.D * (a + 2) + lam + lam * (a + 2) * self.E ** 2 / self.d_tilde

    def x(self, k: int, variant: str = "corrected") -> tuple[float, float, float]:
        a, lam, D = self.a, self.lam, self.D
        dt, E, F, phi, psi = self.d_tilde, self.E, self.F, self.phi, self.psi
        if k < 0:
            raise ValueError("k must be >= 0")
        if k == 0:
            return F * (a + 2) / dt, (4 * D + a + 2 * lam + 2) / dt, E * (a + 2) / dt
        if k == 1:
            pre = a * (a + 2) / dt
            return (pre * (D + 1 + lam * (a + 1) / (a + 2) + lam * F * E / dt),
                    pre * (F / (a + 2) + phi * E / dt),
                    pre * (D + lam / (a + 2) + lam * E ** 2 / dt))
        if k >= 4 and variant == "printed":
            s = a ** k / dt ** k
            return (s * lam ** (k - 2) * F * E ** (k - 3) * phi * psi,
                    s * lam ** (k - 3) * E ** (k - 3) * phi ** 2 * psi,
                    s * lam ** (k - 2) * E ** (k - 2) * phi * psi)
        if variant not in ("printed", "corrected"):
            raise ValueError("variant must be 'printed' or 'corrected'")
        s = a ** k / dt ** k
        return (s * lam ** (k - 1) * F * E ** (k - 2) * psi,
                s * lam ** (k - 2) * E ** (k - 2) * phi * psi,
                s * lam ** (k - 1) * E ** (k - 1) * psi)

    def x_infinite(self, k: int, variant: str = "corrected") -> tuple[float, float, float]:
        """Limit of x(k) as D -> infinity."""
        a, lam, A, B = self.a, self.lam, self.A, self.B
        g = 1 + 4 * lam / A
        if k == 0:
            v = 2 * (a + 2) / A
            return v, 4 / A, v
        if k == 1:
            v = a * (a + 2) * g / A
            return v, 2 * a * (1 + B * (a + 2) / A) / A, v
        if k >= 4 and variant == "printed":
            x1 = (2 * lam) ** (k - 2) * B * a ** k * (a + 2) * g / A ** k
        else:
            x1 = (2 * lam) ** (k - 1) * a ** k * (a + 2) * g / A ** k
        return x1, B / (2 * lam) * x1, x1
