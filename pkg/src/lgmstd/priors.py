"""Variance-partitioning parameters, prior densities and implied priors on phi.

``phi`` is the share of the response variance explained by the effect.
Given an effect with expected conditional variance ``C_eff * sigma2``
(``C_eff`` is one under expectation scaling), ``phi`` relates to
``omega = sigma2 / (sigma2 + sigma2_eps)`` by
``omega = phi / (phi + C_eff - phi * C_eff)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .errors import AllZeroVariances, SpecError, UnsupportedPrior
from .rng import make_rng


# ------------------------------------------------------------- VP parameters

@dataclass(frozen=True)
class VPState:
    V: float
    omega: np.ndarray


def vp_from_sigmas(sigma2) -> VPState:
    s = np.asarray(sigma2, dtype=float)
    if np.any(s < 0) or np.any(~np.isfinite(s)):
        raise SpecError("variances must be finite and non-negative")
    V = float(s.sum())
    if V <= 0:
        raise AllZeroVariances("at least one variance must be positive")
    return VPState(V, s / V)


def sigmas_from_vp(v: VPState) -> np.ndarray:
    return v.V * np.asarray(v.omega, dtype=float)


# -------------------------------------------------------------------- priors

@dataclass(frozen=True)
class InvGamma:
    """Inverse-gamma on a variance with shape ``a`` and scale ``b``."""
    a: float = 1.0
    b: float = 5e-5

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise SpecError("inverse-gamma parameters must be positive")

    def logpdf(self, s2):
        return stats.invgamma.logpdf(s2, self.a, scale=self.b)

    def sample(self, n, rng):
        return stats.invgamma.rvs(self.a, scale=self.b, size=n, random_state=rng)


@dataclass(frozen=True)
class PC0:
    """Penalised-complexity prior with base model zero: exponential on the
    standard deviation with ``P(sigma > U) = alpha``."""
    U: float = 3.0
    alpha: float = 0.05

    def __post_init__(self):
        if not (self.U > 0 and 0 < self.alpha < 1):
            raise SpecError("PC prior needs U > 0 and alpha in (0, 1)")

    @property
    def rate(self) -> float:
        return -np.log(self.alpha) / self.U

    def logpdf(self, s2):
        s2 = np.asarray(s2, dtype=float)
        return np.log(self.rate / 2) - 0.5 * np.log(s2) - self.rate * np.sqrt(s2)

    def sample(self, n, rng):
        return rng.exponential(1.0 / self.rate, size=n) ** 2


@dataclass(frozen=True)
class Jeffreys:
    """Improper ``1 / V`` density on a total variance; grid use only."""

    def logpdf(self, V):
        return -np.log(np.asarray(V, dtype=float))

    def sample(self, n, rng):
        raise UnsupportedPrior("the Jeffreys prior is improper and cannot be sampled")


@dataclass(frozen=True)
class BetaOnOmega:
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise SpecError("beta parameters must be positive")

    def logpdf(self, w):
        return stats.beta.logpdf(w, self.a, self.b)

    def cdf(self, w):
        return stats.beta.cdf(w, self.a, self.b)

    def sample(self, n, rng):
        return rng.beta(self.a, self.b, size=n)


@dataclass(frozen=True)
class DirichletOnOmega:
    alpha: tuple

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.ndim != 1 or a.size < 2 or np.any(a <= 0):
            raise SpecError("Dirichlet concentration needs at least two positive entries")
        object.__setattr__(self, "alpha", tuple(a))

    def logpdf(self, omega):
        """Density on the simplex, omega of shape (..., J)."""
        a = np.asarray(self.alpha)
        w = np.asarray(omega, dtype=float)
        norm = gammaln(a.sum()) - gammaln(a).sum()
        return norm + np.sum((a - 1) * np.log(w), axis=-1)

    def sample(self, n, rng):
        return rng.dirichlet(self.alpha, size=n)


def pc0_density(s2, U: float = 3.0, alpha: float = 0.05):
    """Density of a variance whose standard deviation is exponential with ``P(sigma > U) = alpha``."""
    return np.exp(PC0(U, alpha).logpdf(s2))


@dataclass(frozen=True)
class VPPrior:
    """Jeffreys on the total of ``members`` and a Beta/Dirichlet on their shares.

    The induced density on the member variances is
    ``pi(V) pi(omega) / V^(J-1)``.
    """
    members: tuple
    weights: object = BetaOnOmega(1.0, 1.0)
    total: object = Jeffreys()

    def log_density(self, sigma2: dict):
        s = np.stack(np.broadcast_arrays(*[np.asarray(sigma2[m], float) for m in self.members]), -1)
        V = s.sum(-1)
        w = s / V[..., None]
        J = len(self.members)
        if isinstance(self.weights, BetaOnOmega):
            if J != 2:
                raise UnsupportedPrior("a Beta prior on shares needs exactly two members")
            lw = self.weights.logpdf(w[..., 0])
        else:
            lw = self.weights.logpdf(w)
        return self.total.logpdf(V) + lw - (J - 1) * np.log(V)


@dataclass(frozen=True)
class PriorSet:
    """Independent priors per variance plus an optional VP block."""
    independent: dict
    vp: VPPrior | None = None
    name: str = ""

    def log_density(self, sigma2: dict):
        out = 0.0
        for k, p in self.independent.items():
            out = out + p.logpdf(sigma2[k])
        if self.vp is not None:
            out = out + self.vp.log_density(sigma2)
        return out


# ---------------------------------------------------------- implied priors

def omega_from_phi(phi, C):
    phi = np.asarray(phi, dtype=float)
    return phi / (phi + C - phi * C)


def phi_from_omega(omega, C):
    omega = np.asarray(omega, dtype=float)
    return omega * C / (omega * C + 1 - omega)


def _omega_logpdf(prior, w):
    if isinstance(prior, InvGamma):
        if prior.a != 1.0:
            return stats.beta.logpdf(w, prior.a, prior.a)
        return np.zeros_like(w)
    if isinstance(prior, PC0):
        return -np.log(2 * np.sqrt(w * (1 - w)) * (np.sqrt(w) + np.sqrt(1 - w)) ** 2)
    if isinstance(prior, BetaOnOmega):
        return prior.logpdf(w)
    if isinstance(prior, DirichletOnOmega) and len(prior.alpha) == 2:
        return stats.beta.logpdf(w, *prior.alpha)
    raise UnsupportedPrior(f"no closed-form implied prior for {prior!r}")


def _omega_cdf(prior, w):
    if isinstance(prior, InvGamma):
        return stats.beta.cdf(w, prior.a, prior.a)
    if isinstance(prior, PC0):
        r = np.sqrt(w)
        return r / (r + np.sqrt(1 - w))
    if isinstance(prior, BetaOnOmega):
        return prior.cdf(w)
    if isinstance(prior, DirichletOnOmega) and len(prior.alpha) == 2:
        return stats.beta.cdf(w, *prior.alpha)
    raise UnsupportedPrior(f"no closed-form implied prior for {prior!r}")


def implied_phi_density(prior, C: float, phi):
    """Implied density of phi when both variances get ``prior`` (iid) or the
    shares get a Beta prior, for an effective constant ``C``.

    ``C`` is one under expectation scaling, the raw constant without scaling
    and ``C / sigma2_ref`` under geometric-mean scaling. An iid
    inverse-gamma pair with shape ``a`` gives a symmetric Beta(a, a) on
    omega whatever the scale, so shape one reproduces the uniform VP prior.
    """
    if not C > 0:
        raise SpecError("C must be positive")
    phi = np.asarray(phi, dtype=float)
    denom = phi + C - phi * C
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.exp(_omega_logpdf(prior, phi / denom)) * C / denom ** 2


def implied_phi_cdf(prior, C: float, phi):
    return _omega_cdf(prior, omega_from_phi(phi, C))


@dataclass
class PhiSample:
    """Monte Carlo draws of phi with a histogram summary."""
    samples: np.ndarray
    edges: np.ndarray
    density: np.ndarray

    def ks_distance(self, cdf) -> float:
        return float(stats.kstest(self.samples, cdf).statistic)


def implied_phi_mc(prior, C: float, n: int, seed=None, bins: int = 100) -> PhiSample:
    """Sample the variances (or the share) from the prior and map to phi."""
    rng = make_rng(seed)
    if isinstance(prior, (BetaOnOmega, DirichletOnOmega)):
        w = prior.sample(n, rng)
        w = w[:, 0] if w.ndim == 2 else w
        phi = phi_from_omega(w, C)
    else:
        s2 = prior.sample(n, rng)
        e2 = prior.sample(n, rng)
        phi = s2 * C / (s2 * C + e2)
    density, edges = np.histogram(phi, bins=bins, range=(0.0, 1.0), density=True)
    return PhiSample(phi, edges, density)


def effective_constant(scaling: str, C: float, sigma2_ref: float | None = None) -> float:
    """Variance contribution per unit variance parameter for a scaling strategy."""
    if scaling == "expectation":
        return 1.0
    if scaling == "none":
        return C
    if scaling == "geometric_mean":
        if sigma2_ref is None:
            raise SpecError("geometric-mean scaling needs sigma2_ref")
        return C / sigma2_ref
    raise SpecError(f"unknown scaling {scaling!r}")


PRIOR_PRESETS = {
    "ig": lambda: InvGamma(1.0, 5e-5),
    "pc": lambda: PC0(3.0, 0.05),
    "vp": lambda: BetaOnOmega(1.0, 1.0),
}
