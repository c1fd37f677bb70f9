"""Configurations, parameter records and canonical state indexing.

Configurations of the lattice {1, ..., N} are stored as tuples of 0/1.
All public site and state indices are 1-based; site 1 is the most
significant bit of the (0-based) internal index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, asdict
from typing import Iterable, Iterator, Sequence

import numpy as np

# exact routes enumerate 2^N states
MAX_EXACT_N = 20


class Configuration(tuple):
    """Occupation word eta = (eta_1, ..., eta_N) with entries in {0, 1}."""

    def __new__(cls, sites: Iterable[int]):
        vals = tuple(int(s) for s in sites)
        if len(vals) < 1:
            raise ValueError("a configuration needs at least one site")
        for s in vals:
            if s not in (0, 1):
                raise ValueError(f"occupation values must be 0 or 1, got {s}")
        return super().__new__(cls, vals)

    @property
    def N(self) -> int:
        return len(self)

    def occupied(self) -> tuple[int, ...]:
        """1-based positions of the particles."""
        return tuple(x + 1 for x, s in enumerate(self) if s)

    def __repr__(self) -> str:
        return f"Configuration({tuple(self)!r})"


def _check_N(N: int) -> None:
    if int(N) != N or N < 1:
        raise ValueError(f"lattice size must be a positive integer, got {N}")


def index_of(config: Sequence[int]) -> int:
    """1-based canonical index i = 1 + sum_k 2^(N-k) eta_k."""
    c = config if isinstance(config, Configuration) else Configuration(config)
    i = 0
    for s in c:
        i = 2 * i + s
    return i + 1


def config_of(index: int, N: int) -> Configuration:
    """Inverse of :func:`index_of`."""
    _check_N(N)
    if not 1 <= index <= 2 ** N:
        raise ValueError(f"index {index} outside 1..{2 ** N}")
    k = index - 1
    return Configuration((k >> (N - 1 - j)) & 1 for j in range(N))


def all_configurations(N: int) -> Iterator[Configuration]:
    """All 2^N configurations in canonical order."""
    _check_N(N)
    for i in range(1, 2 ** N + 1):
        yield config_of(i, N)


def bits_table(N: int) -> np.ndarray:
    """(2^N, N) array of occupation bits, row k = configuration with index k+1."""
    _check_N(N)
    idx = np.arange(2 ** N)
    shifts = np.arange(N - 1, -1, -1)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def _check_site(config: Sequence[int], x: int) -> None:
    if not 1 <= x <= len(config):
        raise ValueError(f"site {x} outside 1..{len(config)}")


def flip(config: Sequence[int], x: int) -> Configuration:
    """Toggle the occupation of site x."""
    _check_site(config, x)
    c = list(config)
    c[x - 1] = 1 - c[x - 1]
    return Configuration(c)


def jump(config: Sequence[int], x: int, y: int) -> Configuration:
    """Move a particle from x to y if x is occupied and y empty, else no-op."""
    _check_site(config, x)
    _check_site(config, y)
    c = list(config)
    if c[x - 1] == 1 and c[y - 1] == 0:
        c[x - 1], c[y - 1] = 0, 1
    return Configuration(c)


def _check_rates(obj, names: Iterable[str]) -> None:
    for name in names:
        v = getattr(obj, name)
        if not (isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v)):
            raise ValueError(f"{name} must be a finite number, got {v!r}")
        if v < 0:
            raise ValueError(f"{name} must be >= 0, got {v}")


def _ratio(on: float, off: float) -> float:
    # off/(on+off); when both rates vanish the factor never enters a formula
    tot = on + off
    return off / tot if tot > 0 else 1.0


@dataclass(frozen=True)
class DcpParams:
    """Rates of the open diffusive contact process.

    alpha/gamma: creation/annihilation at site 1, delta/beta: creation/
    annihilation at site N, lam: infection rate, diffusion: stirring rate.
    The death rate is fixed to 1.
    """

    alpha: float
    beta: float
    gamma: float
    delta: float
    lam: float
    diffusion: float

    def __post_init__(self):
        _check_rates(self, [f.name for f in fields(self)])
        if self.lam <= 0:
            raise ValueError("lam must be > 0")

    @property
    def c_minus(self) -> float:
        """Left reservoir factor gamma/(alpha+gamma)."""
        if self.alpha + self.gamma == 0:
            raise ValueError("c_minus undefined: alpha + gamma = 0")
        return self.gamma / (self.alpha + self.gamma)

    @property
    def c_plus(self) -> float:
        """Right reservoir factor beta/(beta+delta)."""
        if self.beta + self.delta == 0:
            raise ValueError("c_plus undefined: beta + delta = 0")
        return self.beta / (self.beta + self.delta)

    @property
    def left_rate(self) -> float:
        return self.alpha + self.gamma

    @property
    def right_rate(self) -> float:
        return self.beta + self.delta

    def weights(self) -> tuple[float, float]:
        """(c_-, c_+) with the convention 1 for a side whose rates vanish."""
        return _ratio(self.alpha, self.gamma), _ratio(self.delta, self.beta)

    def as_dict(self) -> dict:
        return asdict(self)

    def to_gdcp(self) -> "GdcpParams":
        """GDCP rates with the same generator (mu1 = mu2 = 1/2, shifted boundary)."""
        return GdcpParams(alpha=self.alpha, beta=self.beta + 0.5, gamma=self.gamma + 0.5,
                          delta=self.delta, lam=self.lam, diffusion=self.diffusion,
                          mu1=0.5, mu2=0.5)


@dataclass(frozen=True)
class GdcpParams:
    """Rates of the generalized diffusive contact process.

    Boundary rates play the role of the tilded rates. mu1 is the death rate
    per bond with an empty neighbour, mu2 per bond with an occupied one.
    """

    alpha: float
    beta: float
    gamma: float
    delta: float
    lam: float
    diffusion: float
    mu1: float
    mu2: float

    def __post_init__(self):
        _check_rates(self, [f.name for f in fields(self)])

    @classmethod
    def annihilating_from(cls, *, alpha, beta, gamma, delta, lam, diffusion, mu2) -> "GdcpParams":
        """Parameters with mu1 = lam + mu2 (dual birth rate zero)."""
        return cls(alpha=alpha, beta=beta, gamma=gamma, delta=delta, lam=lam,
                   diffusion=diffusion, mu1=lam + mu2, mu2=mu2)

    @property
    def annihilating(self) -> bool:
        return math.isclose(self.mu1, self.lam + self.mu2, rel_tol=1e-13, abs_tol=1e-15)

    @property
    def c_minus(self) -> float:
        if self.alpha + self.gamma == 0:
            raise ValueError("c_minus undefined: alpha + gamma = 0")
        return self.gamma / (self.alpha + self.gamma)

    @property
    def c_plus(self) -> float:
        if self.beta + self.delta == 0:
            raise ValueError("c_plus undefined: beta + delta = 0")
        return self.beta / (self.beta + self.delta)

    @property
    def left_rate(self) -> float:
        return self.alpha + self.gamma

    @property
    def right_rate(self) -> float:
        return self.beta + self.delta

    @property
    def dual_lam(self) -> float:
        return self.lam + self.mu2 - self.mu1

    @property
    def dual_diffusion(self) -> float:
        return self.diffusion + self.mu1 - self.mu2

    def weights(self) -> tuple[float, float]:
        return _ratio(self.alpha, self.gamma), _ratio(self.delta, self.beta)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SirParams:
    """Infection rate beta_inf and recovery rate gamma_rec of the lattice SIR model."""

    beta_inf: float
    gamma_rec: float

    def __post_init__(self):
        _check_rates(self, ["beta_inf", "gamma_rec"])

    def as_dict(self) -> dict:
        return asdict(self)
