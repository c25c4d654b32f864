"""Scaling constants and standardized effects.

A standardized effect has ``E_X[Var(f(X) | X)] = sigma2`` so that its
variance parameter is on the scale of the response, whatever the basis,
structure or covariate distribution.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .effects import EffectSpec, CompositeEffect, decompose
from .errors import DegenerateConstant, UnsupportedFamily, ZeroConditionalVariance
from .gmrf import condition_on_constraints, generalized_inverse
from .rng import make_rng

METHODS = ("expectation", "geometric_mean", "none")


def zero_mean_row(e: EffectSpec) -> np.ndarray:
    """``E_X[D(X)]``: the constraint row that makes the effect average to zero."""
    x, w = e.dist.nodes(e.breakpoints())
    return w @ e.design(x)


def _in_row_space(a: np.ndarray, A: np.ndarray) -> bool:
    if A.size == 0:
        return False
    coef, *_ = np.linalg.lstsq(A.T, a, rcond=None)
    return np.linalg.norm(A.T @ coef - a) <= 1e-10 * max(np.linalg.norm(a), 1e-300)


def effect_constraints(e: EffectSpec, extra=None) -> np.ndarray:
    """Null-space constraints, caller constraints and (fixed effects) the zero-mean row.

    Rows already implied by earlier ones are skipped.
    """
    A = e.structure.null_space.T
    candidates = [] if extra is None else list(np.atleast_2d(extra))
    if e.kind == "fixed" and e.K > 1:
        candidates.append(zero_mean_row(e))
    for a in candidates:
        if not _in_row_space(a, A):
            A = np.vstack([A, a])
    return A


def _offset(e: EffectSpec) -> np.ndarray:
    # single-basis fixed effects are centred instead of constrained
    if e.kind == "fixed" and e.K == 1:
        return zero_mean_row(e)
    return np.zeros(e.K)


def constrained_covariance(e: EffectSpec, A: np.ndarray) -> np.ndarray:
    return condition_on_constraints(generalized_inverse(e.structure), A)


def conditional_variance(e: EffectSpec, cov: np.ndarray, x, offset=None) -> np.ndarray:
    """``Var(f(x) | x)`` at unit variance parameter."""
    D = e.design(x) - (0.0 if offset is None else offset)
    return np.einsum("ij,jk,ik->i", D, cov, D)


def scaling_constant(e: EffectSpec, A: np.ndarray | None = None, cov=None) -> float:
    """``C = E_X[D(X)^T Sigma_c D(X)]`` computed exactly over the covariate law."""
    A = effect_constraints(e) if A is None else A
    cov = constrained_covariance(e, A) if cov is None else cov
    x, w = e.dist.nodes(e.breakpoints())
    C = float(w @ conditional_variance(e, cov, x, _offset(e)))
    if not np.isfinite(C) or C < 1e-12:
        raise DegenerateConstant(f"scaling constant {C:.3e} is zero or invalid")
    return C


def mc_scaling_constant(e: EffectSpec, A=None, n: int = 100_000, seed=None) -> float:
    """Monte Carlo estimate of the scaling constant from covariate draws."""
    A = effect_constraints(e) if A is None else A
    cov = constrained_covariance(e, A)
    x = e.dist.sample(n, make_rng(seed))
    return float(conditional_variance(e, cov, x, _offset(e)).mean())


def _interior_minimum(e: EffectSpec, cov, offset) -> float:
    """Smallest conditional variance over the open support of a continuous covariate."""
    lo, hi = e.dist.lo, e.dist.hi
    grid = np.linspace(lo, hi, 4097)[1:-1]
    v = conditional_variance(e, cov, grid, offset)
    i = int(np.argmin(v))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(lambda t: conditional_variance(e, cov, [t], offset)[0],
                          bounds=(a, b), method="bounded", options={"xatol": 1e-12})
    return min(float(v[i]), float(res.fun))


def geometric_mean_constant(e: EffectSpec, A: np.ndarray | None = None, cov=None) -> float:
    """``exp(E_X[log Var(f(X) | X)])``, the generalized-variance reference.

    Raises ``ZeroConditionalVariance`` when the conditional variance vanishes
    at a support point with positive mass, or at an interior point of a
    continuous support.
    """
    A = effect_constraints(e) if A is None else A
    cov = constrained_covariance(e, A) if cov is None else cov
    offset = _offset(e)
    x, w = e.dist.nodes(e.breakpoints())
    v = conditional_variance(e, cov, x, offset)
    scale = max(float(w @ np.abs(v)), 1e-300)
    vmin = float(v.min())
    if hasattr(e.dist, "lo"):
        vmin = min(vmin, _interior_minimum(e, cov, offset))
    if vmin <= 1e-10 * scale:
        raise ZeroConditionalVariance("conditional variance is zero on the covariate support")
    return float(np.exp(w @ np.log(v)))


@dataclass(eq=False)
class StandardizedEffect:
    """An effect together with its constraints and scaling constant.

    ``design(x)`` returns the basis divided by the square root of the
    scale used by ``method`` (``C`` for expectation, the geometric mean for
    geometric_mean, one for none). ``C`` always holds the expectation
    constant.
    """
    base: EffectSpec
    constraints: np.ndarray
    covariance: np.ndarray
    C: float
    method: str
    scale: float
    offset: np.ndarray
    sigma2_ref: float | None = None

    def design(self, x) -> np.ndarray:
        return (self.base.design(x) - self.offset) / np.sqrt(self.scale)

    @property
    def effective_gain(self) -> float:
        """``E_X[Var(f(X)|X)]`` per unit of the variance parameter."""
        return self.C / self.scale

    def conditional_variance(self, x) -> np.ndarray:
        return conditional_variance(self.base, self.covariance, x, self.offset) / self.scale

    def to_dict(self) -> dict:
        return {"effect": self.base.to_dict(), "method": self.method, "C": self.C,
                "scale": self.scale, "sigma2_ref": self.sigma2_ref,
                "constraints": self.constraints.tolist(), "offset": self.offset.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def standardize(e: EffectSpec, method: str = "expectation", extra_constraints=None,
                with_reference: bool = False) -> StandardizedEffect:
    """Attach constraints and scale an effect.

    Parameters
    ----------
    e : EffectSpec
    method : ``"expectation"``, ``"geometric_mean"`` or ``"none"``
    extra_constraints : optional rows added to the null-space constraints
    with_reference : also compute the geometric-mean reference when another
        method is selected
    """
    if method not in METHODS:
        raise UnsupportedFamily(f"unknown scaling method {method!r}")
    A = effect_constraints(e, extra_constraints)
    cov = constrained_covariance(e, A)
    C = scaling_constant(e, A, cov)
    ref = None
    if method == "geometric_mean" or with_reference:
        ref = geometric_mean_constant(e, A, cov)
    scale = {"expectation": C, "geometric_mean": ref, "none": 1.0}[method]
    return StandardizedEffect(e, A, cov, C, method, scale, _offset(e), ref)


def standardize_composite(c: CompositeEffect, method: str = "expectation") -> list:
    """Standardize each trend and the residual of a decomposed effect separately."""
    return [standardize(part, method) for part in c.components]


def standardize_intrinsic(e: EffectSpec, method: str = "expectation", modify: bool = True) -> list:
    return standardize_composite(decompose(e, modify=modify), method)
