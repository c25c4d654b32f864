"""Cubic B-splines on equidistant knots and their moments under a covariate law."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction as Fr

import numpy as np

from .errors import KTooSmall, OutOfInterval
from .rng import make_rng

DEGREE = 3


@dataclass(frozen=True)
class BSplineBasis:
    """K cubic B-splines with K - 3 equal cells covering ``interval``."""
    K: int
    interval: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.K < DEGREE + 1:
            raise KTooSmall(f"cubic basis needs K >= 4, got {self.K}")
        lo, hi = map(float, self.interval)
        if not hi > lo:
            raise OutOfInterval(f"empty interval {self.interval}")
        object.__setattr__(self, "interval", (lo, hi))

    @property
    def n_cells(self) -> int:
        return self.K - DEGREE

    def breakpoints(self) -> np.ndarray:
        lo, hi = self.interval
        return np.linspace(lo, hi, self.n_cells + 1)

    def scaled(self, x) -> np.ndarray:
        """Map x to cell coordinates t in [0, K - 3], validating the range."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.interval
        if np.any(~np.isfinite(x)) or np.any(x < lo) or np.any(x > hi):
            raise OutOfInterval(f"covariate values outside [{lo}, {hi}]")
        return (x - lo) / (hi - lo) * self.n_cells

    def __call__(self, x) -> np.ndarray:
        return eval_basis(self, x)


def eval_basis(b: BSplineBasis, x) -> np.ndarray:
    """Evaluate all basis functions at ``x``; returns shape ``x.shape + (K,)``.

    Uses the degree-raising recursion on the scaled coordinate. Cells are
    half open ``[k-1, k)`` except the last one, which is closed, so every x in
    the interval has exactly four non-zero functions summing to one.
    """
    x = np.asarray(x, dtype=float)
    t = b.scaled(x).ravel()
    n = b.n_cells
    cell = np.minimum(np.floor(t), n - 1).astype(int)
    # degree 0: indicator of the cell, indices 1..n stored at 0..n-1
    B = np.zeros((t.size, n))
    B[np.arange(t.size), cell] = 1.0
    for d in range(1, DEGREE + 1):
        prev = np.pad(B, ((0, 0), (1, 1)))       # B_{k-1} at column k-1, zero padded
        k = np.arange(1, n + d + 1)
        left = prev[:, :-1]                        # B_{k-1}^{(d-1)}
        right = prev[:, 1:]                        # B_k^{(d-1)}
        B = ((d + t[:, None] - k + 1) * left + (k - t[:, None]) * right) / d
    return B.reshape(x.shape + (b.K,))


# closed-form cubic pieces on a unit cell, y in [0, 1]
def _g1(y):
    return 0.5 * (-y ** 3 / 3 + y ** 2 - y + 1 / 3)


def _g2(y):
    return y ** 3 / 2 - y ** 2 + 2 / 3


def _g3(y):
    return 0.5 * (-y ** 3 + y ** 2 + y + 1 / 3)


def _g4(y):
    return y ** 3 / 6


def eval_basis_closed_form(b: BSplineBasis, x) -> np.ndarray:
    """Piecewise-cubic formula for the same basis (independent of the recursion)."""
    t = b.scaled(x).ravel()
    n = b.n_cells
    out = np.zeros((t.size, b.K))
    for k in range(1, b.K + 1):
        for lag, g in enumerate((_g1, _g2, _g3, _g4)):
            lo = k - 1 - lag
            hi = lo + 1
            if lo < 0 or lo >= n:
                continue
            inside = (t >= lo) & ((t < hi) | ((hi == n) & (t <= hi)))
            out[inside, k - 1] += g(t[inside] - lo)
    return out.reshape(np.shape(x) + (b.K,))


def _uniform_unit_moments(K: int):
    """E[B(U)] and E[U B(U)] for U ~ Unif(0, 1), as exact fractions."""
    if K < 4:
        raise KTooSmall(f"moment formulas need K >= 4, got {K}")
    if K == 4:
        s0 = [Fr(1, 24), Fr(11, 24), Fr(11, 24), Fr(1, 24)]
        v = [Fr(1, 120), Fr(11, 60), Fr(11, 40), Fr(1, 30)]
    elif K == 5:
        s0 = [Fr(1, 48), Fr(1, 4), Fr(11, 24), Fr(1, 4), Fr(1, 48)]
        v = [Fr(1, 480), Fr(7, 120), Fr(11, 48), Fr(23, 120), Fr(3, 160)]
    elif K == 6:
        s0 = [Fr(1, 72), Fr(1, 6), Fr(23, 72), Fr(23, 72), Fr(1, 6), Fr(1, 72)]
        v = [Fr(1, 1080), Fr(7, 270), Fr(121, 1080), Fr(28, 135), Fr(19, 135), Fr(7, 540)]
    else:
        n = K - 3
        edge = [Fr(1, 24), Fr(1, 2), Fr(23, 24)]
        s0 = [e / n for e in edge + [Fr(1)] * (K - 6) + edge[::-1]]
        nn = n * n
        v = [Fr(1, 120) / nn, Fr(7, 30) / nn, Fr(121, 120) / nn]
        v += [Fr(k - 2) / nn for k in range(4, K - 2)]
        v += [(Fr(23 * n, 24) - Fr(121, 120)) / nn, (Fr(n, 2) - Fr(7, 30)) / nn,
              (Fr(n, 24) - Fr(1, 120)) / nn]
    return s0, v


def exact_moments(b: BSplineBasis):
    """Closed-form first two moment vectors under ``Unif(interval)``.

    Returns
    -------
    s0 : (K,) array, E[B(X)]
    s1 : (K,) array, E[X B(X)]
    """
    s0, v = _uniform_unit_moments(b.K)
    lo, hi = b.interval
    s0 = np.array([float(f) for f in s0])
    v = np.array([float(f) for f in v])
    return s0, lo * s0 + (hi - lo) * v


def mc_moments(b: BSplineBasis, sampler, n: int, seed: int | None = None):
    """Monte Carlo estimate of E[B(X)] and E[X B(X)].

    ``sampler(n, rng)`` draws covariate values; pass ``dist.sample`` of any
    covariate distribution.
    """
    x = sampler(n, make_rng(seed))
    B = eval_basis(b, x)
    return B.mean(axis=0), (x[:, None] * B).mean(axis=0)
