"""Modification of a P-spline penalty so its null space matches the covariate.

The random-walk penalty on spline weights has a polynomial null space in the
weight index, which is not the null space of the function the spline
represents once the covariate distribution is taken into account. The target
null space holds the moment vectors ``E[X^m B(X)]``. The modified structure
keeps the sparsity pattern of the original penalty and has one free scale per
weight; the scales are chosen to minimise the Kullback-Leibler divergence
to the original prior on the range of the original penalty.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.optimize import minimize

from .bspline import BSplineBasis, exact_moments
from .errors import (DegenerateMomentPair, NoConvergence,
                     ProjectionRankMismatch, UnsupportedOrder)
from .gmrf import StructureMatrix, rank_tolerance


def target_null_space(b: BSplineBasis, dist=None, d: int = 2) -> np.ndarray:
    """Columns ``E[X^m B(X)]`` for m = 0..d-1.

    Closed forms are used for a uniform covariate on the basis interval,
    otherwise exact quadrature (or sums) over the covariate's nodes.
    """
    if d not in (1, 2):
        raise UnsupportedOrder(f"only penalty orders 1 and 2 are supported, got {d}")
    lo, hi = b.interval
    is_uniform = dist is None or (type(dist).__name__ == "ContinuousUniform"
                                  and (dist.lo, dist.hi) == (lo, hi))
    if is_uniform:
        s0, s1 = exact_moments(b)
    else:
        breaks = b.breakpoints()
        x, w = dist.nodes(breaks) if type(dist).__name__ == "ContinuousUniform" else dist.nodes()
        B = b(x)
        s0, s1 = w @ B, (w * x) @ B
    return np.column_stack([s0, s1][:d])


def _unit_r_tilde(Q: np.ndarray, S: np.ndarray, order: int) -> np.ndarray:
    """Modified structure at unit scales; the general case is ``L^-1 R0 L^-1``."""
    K = len(Q)
    W = np.diag(np.diag(Q)) - Q
    if order == 1:
        s = S[:, 0]
        R0 = (np.diag(np.diag(Q)) - W) / np.outer(s, s)
        return R0
    if order != 2:
        raise UnsupportedOrder(f"order {order}")
    k, l = np.nonzero(np.triu(W, 1))
    det = S[k, 0] * S[l, 1] - S[k, 1] * S[l, 0]
    scale = np.abs(S[k, 0] * S[l, 1]) + np.abs(S[k, 1] * S[l, 0])
    if np.any(np.abs(det) <= 1e-13 * scale):
        raise DegenerateMomentPair("moment vectors of neighbouring weights are collinear")
    Wt = np.zeros((K, K))
    Wt[k, l] = (l - k) * W[k, l] / det
    Wt[l, k] = Wt[k, l]
    # the diagonal makes S[:, 0] a null vector; S[:, 1] follows from the weights above
    diag = (Wt @ S[:, 0]) / S[:, 0]
    return np.diag(diag) - Wt


def build_r_tilde(Q, S_tilde: np.ndarray, lam: np.ndarray, order: int) -> sp.csr_array:
    """Sparse modified structure for per-weight scales ``lam``.

    ``R(lam) S_tilde-scaled`` vanishes and the non-zero pattern equals that
    of ``Q``.
    """
    Q = Q.entries if isinstance(Q, StructureMatrix) else np.asarray(Q, dtype=float)
    lam = np.asarray(lam, dtype=float)
    R0 = _unit_r_tilde(Q, S_tilde, order)
    R = R0 / np.outer(lam, lam)
    R[Q == 0] = 0.0
    return sp.csr_array(R)


@dataclass
class _KLProblem:
    """Precomputed pieces of the divergence as a function of log scales."""
    Q: np.ndarray
    S_tilde: np.ndarray
    order: int

    def __post_init__(self):
        self.R0 = _unit_r_tilde(self.Q, self.S_tilde, self.order)
        self.P = scipy.linalg.null_space(self.S_tilde.T)          # basis of S_tilde^perp
        w, V = np.linalg.eigh(self.Q)
        keep = w > rank_tolerance(w)
        self.P_ref = V[:, keep]                                    # range of Q
        self.rank = int(keep.sum())
        if self.P.shape[1] != self.rank:
            raise ProjectionRankMismatch(
                f"modified rank {self.P.shape[1]} differs from original rank {self.rank}")
        self.logdet_ref = float(np.sum(np.log(w[keep])))
        self.Qbar = self.P.T @ self.Q @ self.P
        cross = self.P.T @ self.P_ref
        sign, self.logdet_cross = np.linalg.slogdet(cross)
        if sign == 0:
            raise ProjectionRankMismatch("modified and original supports do not overlap")

    def precision_core(self, theta):
        l2 = np.exp(-2.0 * theta)
        A = l2[:, None] * self.R0 * l2[None, :]
        return A, self.P.T @ A @ self.P

    def value_and_grad(self, theta):
        """KL(modified || original) on the range of Q, and its gradient."""
        A, M = self.precision_core(theta)
        try:
            L = np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            return np.inf, np.zeros_like(theta)
        Minv = scipy.linalg.cho_solve((L, True), np.eye(len(M)))
        logdet_M = 2.0 * np.sum(np.log(np.diag(L)))
        # covariance of the modified prior restricted to range(Q) has
        # log-determinant -logdet_M + 2 logdet_cross
        f = 0.5 * (np.trace(self.Qbar @ Minv) - self.rank
                   - self.logdet_ref + logdet_M - 2.0 * self.logdet_cross)
        G = self.P @ (Minv - Minv @ self.Qbar @ Minv) @ self.P.T
        grad = -2.0 * np.einsum("ij,ji->i", G, A)
        return float(f), grad

    def covariance(self, theta):
        _, M = self.precision_core(theta)
        return self.P @ np.linalg.solve(M, self.P.T)

    def precision(self, theta):
        _, M = self.precision_core(theta)
        return self.P @ M @ self.P.T


def kl_objective(lam, Q, S_tilde, order: int) -> float:
    """Divergence between the modified prior at scales ``lam`` and the original.

    Both zero-mean Gaussians are compared on the range of ``Q``: the
    original has covariance ``Q^+`` there and the modified one is the
    projection of ``(L^-1 R(lam) L^-1)^+`` onto the same subspace.
    """
    Q = Q.entries if isinstance(Q, StructureMatrix) else np.asarray(Q, dtype=float)
    return _KLProblem(Q, np.asarray(S_tilde, float), order).value_and_grad(
        np.log(np.asarray(lam, dtype=float)))[0]


@dataclass
class QModOptions:
    max_iter: int = 5000
    gtol: float = 1e-10
    method: str = "BFGS"


@dataclass
class QModResult:
    K: int
    order: int
    lambda_hat: np.ndarray
    Q_tilde: StructureMatrix
    R_tilde: sp.csr_array
    S_tilde: np.ndarray
    covariance: np.ndarray
    kl_value: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"K": self.K, "order": self.order, "lambda_hat": self.lambda_hat.tolist(),
                "kl_value": self.kl_value, "iterations": self.iterations,
                "converged": self.converged, "Q_tilde": self.Q_tilde.entries.tolist(),
                "S_tilde": self.S_tilde.tolist()}


def fit_lambda(Q, S_tilde: np.ndarray, order: int, opts: QModOptions | None = None) -> QModResult:
    """Minimise the divergence over log scales starting from unit scales.

    Uses BFGS with the analytic gradient. ``trace`` holds the best objective
    seen after each iteration (non-increasing). Hitting ``max_iter`` emits
    a ``NoConvergence`` warning and still returns the best point.
    """
    opts = opts or QModOptions()
    Qm = Q.entries if isinstance(Q, StructureMatrix) else np.asarray(Q, dtype=float)
    S_tilde = np.asarray(S_tilde, dtype=float)
    prob = _KLProblem(Qm, S_tilde, order)
    K = len(Qm)
    trace = [prob.value_and_grad(np.zeros(K))[0]]

    def record(xk):
        trace.append(min(trace[-1], prob.value_and_grad(xk)[0]))

    jac = opts.method.upper() not in ("NELDER-MEAD", "POWELL")
    fun = prob.value_and_grad if jac else (lambda t: prob.value_and_grad(t)[0])
    options = {"maxiter": opts.max_iter}
    if jac:
        options["gtol"] = opts.gtol
    else:
        options.update(xatol=1e-10, fatol=1e-12)
    res = minimize(fun, np.zeros(K), jac=jac, method=opts.method, callback=record,
                   options=options)
    converged = int(res.nit) < opts.max_iter
    if not converged:
        warnings.warn(f"scale optimisation stopped after {res.nit} iterations", NoConvergence)
    theta = res.x
    lam = np.exp(theta)
    Q_tilde = prob.precision(theta)
    Q_tilde = 0.5 * (Q_tilde + Q_tilde.T)
    return QModResult(
        K=K, order=order, lambda_hat=lam,
        Q_tilde=StructureMatrix(Q_tilde, S_tilde),
        R_tilde=build_r_tilde(Qm, S_tilde, lam, order),
        S_tilde=S_tilde, covariance=prob.covariance(theta),
        kl_value=float(prob.value_and_grad(theta)[0]),
        iterations=int(res.nit), converged=converged, trace=trace)


@lru_cache(maxsize=64)
def _cached_fit(K: int, order: int, interval: tuple, dist_key) -> QModResult:
    from .effects import dist_from_dict, rw_structure
    dist = dist_from_dict(json.loads(dist_key)) if dist_key is not None else None
    b = BSplineBasis(K, interval)
    S_tilde = target_null_space(b, dist, order)
    return fit_lambda(rw_structure(K, order), S_tilde, order)


def modified_structure(e) -> QModResult:
    """Fit (cached) the modified structure for a P-spline effect."""
    dist = e.dist
    uniform = type(dist).__name__ == "ContinuousUniform" and (dist.lo, dist.hi) == tuple(e.interval)
    key = None if uniform else json.dumps(dist.to_dict(), sort_keys=True)
    return _cached_fit(e.K, e.order, tuple(e.interval), key)
