"""Covariate distributions, effect specifications and their decomposition.

An effect is ``f(x) = D(x)^T u`` with basis ``D`` and coefficients
``u ~ N(0, sigma2 * Q^+)`` for a structure matrix ``Q``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

from .bspline import BSplineBasis, eval_basis
from .errors import (DisconnectedGraph, InvalidDistribution,
                     InvalidProbabilityVector, OrderTooLarge, TooFewLevels,
                     UnsupportedFamily, ZeroVarianceCovariate)
from .gmrf import StructureMatrix, polynomial_null_space

QUAD_NODES_PER_CELL = 256


# ---------------------------------------------------------------- covariates

@dataclass(frozen=True)
class DiscreteUniform:
    """Uniform on the integers 1..K."""
    K: int

    def __post_init__(self):
        if self.K < 1:
            raise InvalidDistribution("K must be positive")

    def nodes(self, breaks=None):
        x = np.arange(1, self.K + 1, dtype=float)
        return x, np.full(self.K, 1.0 / self.K)

    def sample(self, n, rng):
        return rng.integers(1, self.K + 1, size=n).astype(float)

    def to_dict(self):
        return {"type": "discrete_uniform", "params": {"K": self.K}}


@dataclass(frozen=True)
class Categorical:
    """Probabilities ``p`` on the integers 1..K."""
    p: tuple

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or p.size < 1 or np.any(~np.isfinite(p)) or np.any(p <= 0) \
                or abs(p.sum() - 1.0) > 1e-9:
            raise InvalidProbabilityVector("probabilities must be positive and sum to one")
        object.__setattr__(self, "p", tuple(p / p.sum()))

    @property
    def K(self):
        return len(self.p)

    def nodes(self, breaks=None):
        return np.arange(1, self.K + 1, dtype=float), np.array(self.p)

    def sample(self, n, rng):
        return rng.choice(np.arange(1, self.K + 1), size=n, p=np.array(self.p)).astype(float)

    def to_dict(self):
        return {"type": "categorical", "params": {"p": list(self.p)}}


@dataclass(frozen=True)
class ContinuousUniform:
    """Uniform on ``[lo, hi]``."""
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.hi > self.lo):
            raise InvalidDistribution(f"bad interval [{self.lo}, {self.hi}]")

    def nodes(self, breaks=None, per_cell=QUAD_NODES_PER_CELL):
        """Gauss-Legendre nodes on each cell between ``breaks``."""
        inner = [] if breaks is None else [b for b in breaks if self.lo < b < self.hi]
        breaks = np.unique([self.lo, *inner, self.hi])
        g, w = np.polynomial.legendre.leggauss(per_cell)
        a, b = breaks[:-1, None], breaks[1:, None]
        x = (a + b) / 2 + (b - a) / 2 * g
        wt = (b - a) / 2 * w / (self.hi - self.lo)
        return x.ravel(), wt.ravel()

    def sample(self, n, rng):
        return rng.uniform(self.lo, self.hi, size=n)

    def to_dict(self):
        return {"type": "continuous_uniform", "params": {"lo": self.lo, "hi": self.hi}}


@dataclass(frozen=True)
class Empirical:
    """Equal mass on observed covariate values."""
    values: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0 or np.any(~np.isfinite(v)):
            raise InvalidDistribution("empirical distribution needs finite values")
        object.__setattr__(self, "values", tuple(v))

    def nodes(self, breaks=None):
        v = np.asarray(self.values)
        return v, np.full(v.size, 1.0 / v.size)

    def sample(self, n, rng):
        return rng.choice(np.asarray(self.values), size=n)

    def to_dict(self):
        return {"type": "empirical", "params": {"values": list(self.values)}}


CovariateDist = DiscreteUniform | Categorical | ContinuousUniform | Empirical

_DIST_TYPES = {"discrete_uniform": DiscreteUniform, "categorical": Categorical,
               "continuous_uniform": ContinuousUniform, "empirical": Empirical}


def dist_from_dict(d: dict) -> CovariateDist:
    try:
        cls = _DIST_TYPES[d["type"]]
    except KeyError as exc:
        raise InvalidDistribution(f"unknown distribution {d!r}") from exc
    params = dict(d.get("params", {}))
    for key in ("p", "values"):
        if key in params:
            params[key] = tuple(params[key])
    return cls(**params)


def expectation(dist, fn, breaks=None):
    """E[fn(X)] summed over the distribution's exact nodes or quadrature."""
    x, w = dist.nodes(breaks)
    return np.tensordot(w, fn(x), axes=(0, 0))


def moment(dist, power: int) -> float:
    return float(expectation(dist, lambda x: x ** power))


# ------------------------------------------------------------------- effects

FAMILIES = ("linear", "polynomial", "categorical", "rw", "icar", "pspline")


@dataclass(frozen=True, eq=False)
class EffectSpec:
    """A single latent effect.

    Parameters
    ----------
    family : one of ``FAMILIES``
    structure : StructureMatrix
    dist : covariate distribution
    kind : ``"fixed"`` (zero mean over the covariate) or ``"random"``
    order : random-walk or penalty order, 0 when not applicable
    adjacency : (K, K) array for ICAR effects
    interval : support of a P-spline basis
    poly_coef : coefficients (lowest power first) for polynomial trend bases
    """
    family: str
    structure: StructureMatrix
    dist: object
    kind: str = "fixed"
    order: int = 0
    adjacency: np.ndarray | None = None
    interval: tuple[float, float] | None = None
    poly_coef: tuple | None = None
    label: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UnsupportedFamily(self.family)
        if self.kind not in ("fixed", "random"):
            raise UnsupportedFamily(f"kind must be fixed or random, got {self.kind}")

    @property
    def K(self) -> int:
        return self.structure.K

    @property
    def spline(self) -> BSplineBasis:
        return BSplineBasis(self.K, self.interval)

    def breakpoints(self):
        """Cell boundaries for exact piecewise-polynomial quadrature."""
        if self.family == "pspline":
            return self.spline.breakpoints()
        return None

    def design(self, x) -> np.ndarray:
        """Basis matrix, shape ``(n, K)``."""
        x = np.asarray(x, dtype=float).ravel()
        if self.family == "linear":
            return x[:, None]
        if self.family == "polynomial":
            return np.polynomial.polynomial.polyval(x, self.poly_coef)[:, None]
        if self.family == "pspline":
            return eval_basis(self.spline, x)
        idx = np.rint(x).astype(int)
        if np.any(np.abs(x - idx) > 1e-9) or np.any(idx < 1) or np.any(idx > self.K):
            raise InvalidDistribution(f"levels must be integers in 1..{self.K}")
        D = np.zeros((x.size, self.K))
        D[np.arange(x.size), idx - 1] = 1.0
        return D

    def to_dict(self) -> dict:
        d = {"family": self.family, "K": self.K, "dist": self.dist.to_dict(), "kind": self.kind}
        if self.order:
            d["order"] = self.order
        if self.adjacency is not None:
            d["adjacency"] = np.asarray(self.adjacency).tolist()
        if self.interval is not None:
            d["interval"] = list(self.interval)
        return d


def make_linear(dist, kind: str = "fixed") -> EffectSpec:
    var = moment(dist, 2) - moment(dist, 1) ** 2
    if not var > 1e-14 * max(1.0, moment(dist, 2)):
        raise ZeroVarianceCovariate("covariate has zero variance")
    return EffectSpec("linear", StructureMatrix(np.ones((1, 1)), np.zeros((1, 0))), dist, kind)


def make_categorical(p, kind: str = "fixed") -> EffectSpec:
    dist = Categorical(tuple(np.ravel(p)))
    K = dist.K
    return EffectSpec("categorical", StructureMatrix(np.eye(K), np.zeros((K, 0))), dist, kind)


def rw_structure(K: int, order: int) -> StructureMatrix:
    """Integer difference-penalty matrix ``D^T D`` with polynomial null space."""
    if order < 1:
        raise OrderTooLarge(f"order must be positive, got {order}")
    if K < order + 2:
        raise TooFewLevels(f"order {order} needs K >= {order + 2}, got {K}")
    Dm = np.diff(np.eye(K, dtype=np.int64), n=order, axis=0)
    return StructureMatrix((Dm.T @ Dm).astype(float), polynomial_null_space(K, order))


def make_rw(K: int, order: int, dist=None, kind: str = "fixed") -> EffectSpec:
    S = rw_structure(K, order)
    return EffectSpec("rw", S, dist if dist is not None else DiscreteUniform(K), kind, order=order)


def make_icar(W, dist=None, kind: str = "fixed") -> EffectSpec:
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or np.any(W != W.T) or np.any(W < 0) \
            or np.any(np.diag(W) != 0):
        raise DisconnectedGraph("adjacency must be a symmetric non-negative matrix with empty diagonal")
    K = W.shape[0]
    n_comp, _ = connected_components(W != 0, directed=False)
    if K < 2 or n_comp != 1:
        raise DisconnectedGraph(f"graph has {n_comp} connected components")
    Q = np.diag(W.sum(axis=1)) - W
    return EffectSpec("icar", StructureMatrix(Q, np.ones((K, 1))),
                      dist if dist is not None else DiscreteUniform(K), kind,
                      order=1, adjacency=W)


def make_pspline(K: int, order: int = 2, interval=(0.0, 1.0), dist=None,
                 kind: str = "fixed") -> EffectSpec:
    """Cubic P-spline with a random-walk penalty of the given order on K weights."""
    S = rw_structure(K, order)
    BSplineBasis(K, interval)  # validates K and the interval
    return EffectSpec("pspline", S, dist if dist is not None else ContinuousUniform(*interval),
                      kind, order=order, interval=tuple(map(float, interval)))


def grid_adjacency(rows: int, cols: int) -> np.ndarray:
    """Rook-neighbour adjacency for a rows x cols lattice, row-major labels."""
    idx = np.arange(rows * cols).reshape(rows, cols)
    W = np.zeros((rows * cols, rows * cols))
    for a, b in ((idx[:, :-1], idx[:, 1:]), (idx[:-1, :], idx[1:, :])):
        W[a.ravel(), b.ravel()] = W[b.ravel(), a.ravel()] = 1.0
    return W


def read_adjacency(path, K: int | None = None) -> np.ndarray:
    """Adjacency from a CSV edge list (``i,j`` pairs, 1-based) or a JSON matrix."""
    path = Path(path)
    if path.suffix == ".json":
        return np.asarray(json.loads(path.read_text()), dtype=float)
    edges = []
    with path.open() as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                edges.append((int(row[0]), int(row[1])))
            except ValueError:
                continue  # header line
    n = K or max(max(e) for e in edges)
    W = np.zeros((n, n))
    for i, j in edges:
        W[i - 1, j - 1] = W[j - 1, i - 1] = 1.0
    return W


def effect_from_dict(d: dict) -> EffectSpec:
    """Build an effect from ``{family, K, dist, kind, order?, adjacency?, interval?}``."""
    family = d.get("family")
    kind = d.get("kind", "fixed")
    dist = dist_from_dict(d["dist"]) if "dist" in d else None
    K = d.get("K")
    if family in ("rw1", "rw2"):
        family, d = "rw", {**d, "order": d.get("order", int(family[-1]))}
    if family == "linear":
        return make_linear(dist if dist is not None else ContinuousUniform(), kind)
    if family == "categorical":
        p = dist.p if isinstance(dist, Categorical) else np.full(K, 1.0 / K)
        return make_categorical(p, kind)
    if family == "rw":
        return make_rw(int(K), int(d.get("order", 1)), dist, kind)
    if family == "icar":
        adj = d.get("adjacency")
        W = read_adjacency(adj, K) if isinstance(adj, str) else np.asarray(adj, dtype=float)
        return make_icar(W, dist, kind)
    if family == "pspline":
        return make_pspline(int(K), int(d.get("order", 2)), tuple(d.get("interval", (0.0, 1.0))),
                            dist, kind)
    raise UnsupportedFamily(f"unknown family {family!r}")


# ------------------------------------------------------------- decomposition

@dataclass
class CompositeEffect:
    """An intrinsic effect split into polynomial trends plus a constrained residual.

    ``trend`` holds single-basis effects ``h_m(x)``; ``residual`` keeps the
    original basis with ``residual_constraints @ u = 0``.
    """
    trend: list
    residual: EffectSpec
    residual_constraints: np.ndarray
    modification: object = None
    parts: dict = field(default_factory=dict)

    @property
    def components(self):
        return [*self.trend, self.residual]


def orthogonal_polynomials(dist, degree: int, breaks=None) -> list:
    """Monomials 1..degree orthogonalized (Gram-Schmidt) under the covariate law.

    Returns coefficient tuples, lowest power first; each polynomial has zero
    mean. The first is ``x - E[X]``.
    """
    x, w = dist.nodes(breaks)
    basis = [np.array([1.0])]
    out = []
    for m in range(1, degree + 1):
        c = np.zeros(m + 1)
        c[m] = 1.0
        for b in basis:
            vb = np.polynomial.polynomial.polyval(x, b)
            vc = np.polynomial.polynomial.polyval(x, c)
            proj = np.dot(w, vb * vc) / np.dot(w, vb * vb)
            c[: b.size] -= proj * b
        basis.append(c)
        out.append(tuple(c))
    return out


def decompose(e: EffectSpec, modify: bool = True) -> CompositeEffect:
    """Split an intrinsic effect of order d into d - 1 trends and a residual.

    Random walks and ICAR fields keep their original structure with the
    null-space constraint on the residual. P-splines either use the
    modified structure whose null space is the covariate-averaged moments of
    the basis (``modify=True``) or keep the raw polynomial constraint.
    """
    if e.family not in ("rw", "icar", "pspline"):
        raise UnsupportedFamily(f"{e.family} effects are not intrinsic")
    d = e.structure.rank_deficiency
    breaks = e.breakpoints()
    trend = [EffectSpec("polynomial", StructureMatrix(np.ones((1, 1)), np.zeros((1, 0))),
                        e.dist, "fixed", poly_coef=c, label=f"trend{m + 1}")
             for m, c in enumerate(orthogonal_polynomials(e.dist, d - 1, breaks))]
    if e.family == "pspline" and modify:
        from .qmod import modified_structure
        res = modified_structure(e)
        residual = EffectSpec("pspline", res.Q_tilde, e.dist, e.kind, order=e.order,
                              interval=e.interval, label="residual")
        return CompositeEffect(trend, residual, res.S_tilde.T.copy(), modification=res)
    # an unmodified P-spline residual carries only the index-polynomial
    # constraint; adding the zero-mean row would already be a modification
    kind = "random" if e.family == "pspline" else e.kind
    residual = EffectSpec(e.family, e.structure, e.dist, kind, order=e.order,
                          adjacency=e.adjacency, interval=e.interval, label="residual")
    return CompositeEffect(trend, residual, e.structure.null_space.T.copy())
