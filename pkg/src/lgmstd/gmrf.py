"""Dense linear algebra for intrinsic Gaussian Markov random fields.

Structure matrices are small (K <= a few hundred), so everything here is
dense and eigendecomposition based.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (NegativeEigenvalue, NonSymmetric, OrderTooLarge,
                     SingularConstraintGram)
from .rng import make_rng

EPS = np.finfo(float).eps


def rank_tolerance(eigvals: np.ndarray) -> float:
    """Cut-off below which an eigenvalue is treated as zero (K * eps * max)."""
    top = float(np.max(np.abs(eigvals))) if eigvals.size else 0.0
    return len(eigvals) * EPS * max(top, 1.0)


def _check_symmetric(Q: np.ndarray) -> None:
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise NonSymmetric(f"expected a square matrix, got shape {Q.shape}")
    scale = max(float(np.max(np.abs(Q))), 1.0) if Q.size else 1.0
    if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12 * scale:
        raise NonSymmetric("matrix is not symmetric")


def _eigh_psd(Q: np.ndarray):
    """Eigendecomposition of a symmetric PSD matrix with zeroed null eigenvalues."""
    _check_symmetric(Q)
    w, V = np.linalg.eigh(0.5 * (Q + Q.T))
    tol = rank_tolerance(w)
    if w.size and w[0] < -tol * 1e3:
        raise NegativeEigenvalue(f"smallest eigenvalue {w[0]:.3e} is negative")
    w = np.where(w > tol, w, 0.0)
    return w, V


@dataclass(frozen=True)
class StructureMatrix:
    """Symmetric PSD precision structure with an explicit null-space basis.

    Parameters
    ----------
    entries : (K, K) array
    null_space : (K, d) array or None
        Columns spanning the kernel. Computed from the spectrum if omitted.
    """
    entries: np.ndarray
    null_space: np.ndarray | None = None

    def __post_init__(self):
        Q = np.asarray(self.entries, dtype=float)
        _check_symmetric(Q)
        object.__setattr__(self, "entries", Q)
        if self.null_space is None:
            w, V = _eigh_psd(Q)
            object.__setattr__(self, "null_space", V[:, w == 0.0])
        else:
            S = np.asarray(self.null_space, dtype=float).reshape(len(Q), -1)
            object.__setattr__(self, "null_space", S)

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    @property
    def rank_deficiency(self) -> int:
        return self.null_space.shape[1]

    def null_residual(self) -> float:
        """max |Q S| relative to max |Q|; zero for an exact null space."""
        if self.rank_deficiency == 0:
            return 0.0
        scale = max(float(np.max(np.abs(self.entries))), 1.0)
        return float(np.max(np.abs(self.entries @ self.null_space))) / scale


def _as_array(Q) -> np.ndarray:
    return Q.entries if isinstance(Q, StructureMatrix) else np.asarray(Q, dtype=float)


def generalized_inverse(Q) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric PSD matrix via its spectrum."""
    w, V = _eigh_psd(_as_array(Q))
    inv = np.zeros_like(w)
    inv[w > 0] = 1.0 / w[w > 0]
    G = (V * inv) @ V.T
    return 0.5 * (G + G.T)


def pseudo_log_det(Q) -> float:
    """Sum of log eigenvalues above the rank tolerance."""
    w, _ = _eigh_psd(_as_array(Q))
    return float(np.sum(np.log(w[w > 0])))


def condition_on_constraints(cov: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Covariance of ``u ~ N(0, cov)`` conditioned on ``A u = 0``.

    Constraint directions along which ``cov`` already has zero variance are
    satisfied almost surely and leave the covariance untouched, so the Gram
    matrix ``A cov A^T`` is inverted in the pseudo-inverse sense. Only
    linearly dependent constraint rows are rejected.
    """
    cov = np.asarray(cov, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return cov.copy()
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= max(A.shape) * EPS * sv[0] * 1e3 or A.shape[0] > A.shape[1]:
        raise SingularConstraintGram("constraint rows are linearly dependent")
    CA = cov @ A.T
    gram = A @ CA
    w, V = np.linalg.eigh(0.5 * (gram + gram.T))
    scale = max(float(np.max(np.abs(cov))), 1.0) * max(sv[0] ** 2, 1.0)
    keep = w > len(w) * EPS * scale * 1e3
    gram_pinv = (V[:, keep] / w[keep]) @ V[:, keep].T
    out = cov - CA @ gram_pinv @ CA.T
    return 0.5 * (out + out.T)


def polynomial_null_space(K: int, d: int) -> np.ndarray:
    """Columns k^m for m = 0..d-1 over k = 1..K."""
    if d < 1 or d >= K:
        raise OrderTooLarge(f"need 1 <= d < K, got d={d}, K={K}")
    k = np.arange(1, K + 1, dtype=float)
    return np.column_stack([k ** m for m in range(d)])


@dataclass
class ConstrainedGaussian:
    """``N(0, sigma2 * Q^+)`` restricted to ``constraints @ u = 0``."""
    structure: StructureMatrix
    constraints: np.ndarray
    sigma2: float = 1.0
    _cov: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.constraints = np.atleast_2d(np.asarray(self.constraints, dtype=float)).reshape(-1, self.structure.K)

    @property
    def unit_covariance(self) -> np.ndarray:
        if self._cov is None:
            self._cov = condition_on_constraints(
                generalized_inverse(self.structure), self.constraints)
        return self._cov

    @property
    def covariance(self) -> np.ndarray:
        return self.sigma2 * self.unit_covariance


def covariance_factor(cov: np.ndarray) -> np.ndarray:
    """Thin square root L (K x r) with L L^T = cov, dropping null directions."""
    w, V = _eigh_psd(cov)
    keep = w > 0
    return V[:, keep] * np.sqrt(w[keep])


def sample_constrained(g: ConstrainedGaussian, n: int, seed: int | None = None) -> np.ndarray:
    """Draw ``n`` samples (rows) from a constrained Gaussian."""
    L = covariance_factor(g.covariance)
    z = make_rng(seed).standard_normal((n, L.shape[1]))
    return z @ L.T
