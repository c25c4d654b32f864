"""Exact grid posteriors for Gaussian-response latent models.

The response is ``y = mu + sum_j f_j + eps`` with ``f_j = Z_j u_j``,
``u_j ~ N(0, sigma2_j I)`` (``Z_j`` already carries the standardized
covariance factor), ``eps ~ N(0, sigma2_eps I)`` and ``mu ~ N(0, tau2)``.
The coefficients and the intercept are integrated out analytically; the
variance parameters live on a deterministic log grid spanned by the ratios
``r_j = sigma2_j / sigma2_eps`` and ``sigma2_eps`` itself. For fixed ratios
the marginal covariance is ``sigma2_eps (I + Z D Z^T) + tau2 11^T``, so one
small Cholesky factor per ratio node serves the whole noise axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .effects import make_pspline, make_rw
from .errors import GridMassEscape, NonPDCovariance, SpecError
from .gmrf import covariance_factor
from .priors import PC0, BetaOnOmega, InvGamma, PriorSet, VPPrior
from .standardize import standardize, standardize_intrinsic

TAU2_INTERCEPT = 1e3
LOG_2PI = np.log(2 * np.pi)


def gaussian_log_marginal(y, designs, covs, sigma2_eps: float, tau2: float = TAU2_INTERCEPT) -> float:
    """``log N(y; 0, sum_j D_j S_j D_j^T + sigma2_eps I + tau2 11^T)``.

    ``covs`` are the coefficient covariances already multiplied by their
    variance parameters. Dense reference implementation.
    """
    y = np.asarray(y, dtype=float)
    N = y.size
    cov = sigma2_eps * np.eye(N) + tau2 * np.ones((N, N))
    for D, S in zip(designs, covs):
        D = np.asarray(D, dtype=float).reshape(N, -1)
        cov += D @ np.asarray(S, dtype=float) @ D.T
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NonPDCovariance("marginal covariance is not positive definite") from exc
    z = np.linalg.solve(L, y)
    return float(-0.5 * (N * LOG_2PI + 2 * np.sum(np.log(np.diag(L))) + z @ z))


@dataclass
class Component:
    """One latent effect evaluated at the data.

    ``factor @ factor.T`` is the covariance of the effect at the data per
    unit variance parameter; ``gain`` is its expected variance over the
    covariate per unit variance parameter.
    """
    name: str
    factor: np.ndarray
    gain: float = 1.0


# -------------------------------------------------------------------- models

@dataclass
class LocalLevel:
    """One observation per level of a first-order random walk on 1..K."""
    K: int = 25

    variances = ("f", "eps")

    def covariates(self):
        return np.arange(1, self.K + 1, dtype=float)

    def components(self, x, scaling="expectation"):
        s = standardize(make_rw(self.K, 1), scaling, with_reference=scaling != "none")
        L = covariance_factor(s.covariance / s.scale)
        return [Component("f", s.base.design(x) @ L, s.effective_gain)]

    def derived(self, s2, comps):
        g = comps[0].gain
        signal = s2["f"] * g
        return {"phi": signal / (signal + s2["eps"]), "T": signal + s2["eps"]}

    def prior_set(self, name):
        if name == "ig":
            return PriorSet({"f": InvGamma(1, 5e-5), "eps": InvGamma(1, 5e-5)}, name="ig")
        if name == "pc":
            return PriorSet({"f": PC0(3, 0.05), "eps": PC0(3, 0.05)}, name="pc")
        if name == "vp":
            return PriorSet({}, VPPrior(("f", "eps"), BetaOnOmega(1, 1)), name="vp")
        raise SpecError(f"unknown prior set {name!r}")


@dataclass
class LinearPlusSpline:
    """Standardized linear trend plus a cubic P-spline residual on [0, 1]."""
    K: int = 10
    modified: bool = True
    order: int = 2

    variances = ("t", "r", "eps")

    def components(self, x, scaling="expectation"):
        x = np.asarray(x, dtype=float)
        trend, resid = standardize_intrinsic(make_pspline(self.K, self.order), "expectation",
                                             modify=self.modified)
        if scaling != "expectation":
            resid = standardize(resid.base, scaling, with_reference=scaling != "none")
        L = covariance_factor(resid.covariance / resid.scale)
        return [Component("t", trend.design(x), trend.effective_gain),
                Component("r", resid.base.design(x) @ L, resid.effective_gain)]

    def derived(self, s2, comps):
        gt, gr = comps[0].gain, comps[1].gain
        lin, smooth = s2["t"] * gt, s2["r"] * gr
        return {"phi": smooth / (lin + smooth), "T": lin + smooth + s2["eps"]}

    def prior_set(self, name):
        if name == "ig":
            return PriorSet({k: InvGamma(1, 5e-5) for k in self.variances}, name="ig")
        if name == "pc":
            return PriorSet({k: PC0(3, 0.05) for k in self.variances}, name="pc")
        if name == "vp":
            return PriorSet({"eps": InvGamma(1, 5e-5)}, VPPrior(("t", "r"), BetaOnOmega(1, 1)),
                            name="vp")
        raise SpecError(f"unknown prior set {name!r}")


# ---------------------------------------------------------------- posterior

@dataclass
class GridPosterior:
    """Normalised posterior on a log grid.

    ``axes`` maps ``log_r_<name>`` for each effect and ``log_eps`` to the
    node coordinates; all arrays in ``derived`` share the grid shape.
    """
    axes: dict
    log_joint: np.ndarray
    normalization: float
    derived: dict = field(default_factory=dict)
    expansions: int = 0

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_joint - self.normalization)

    def mean(self, name: str) -> float:
        return float(np.sum(self.weights * self.derived[name]))

    def interval(self, name: str, level: float = 0.9):
        """Equal-tailed credible interval from the grid CDF."""
        v = self.derived[name].ravel()
        w = self.weights.ravel()
        order = np.argsort(v, kind="stable")
        v, w = v[order], w[order]
        cdf = np.cumsum(w) - 0.5 * w
        tail = (1 - level) / 2
        return float(np.interp(tail, cdf, v)), float(np.interp(1 - tail, cdf, v))

    def boundary_mass(self) -> dict:
        """Posterior mass on the first and last slice of each axis."""
        w = self.weights
        out = {}
        for i, name in enumerate(self.axes):
            m = np.moveaxis(w, i, 0).reshape(w.shape[i], -1).sum(axis=1)
            out[name] = (float(m[0]), float(m[-1]))
        return out


def _ratio_node_terms(Z, y, log_r_cols):
    """Woodbury pieces for every ratio node.

    Returns ``q = [y'M^-1 y, 1'M^-1 y, 1'M^-1 1]``, ``log det M`` and
    ``Z'M^-1 y``, ``Z'M^-1 1`` for ``M = I + Z diag(r) Z'``.
    """
    N, p = Z.shape
    one = np.ones(N)
    ZtZ = Z.T @ Z
    Zy, Z1 = Z.T @ y, Z.T @ one
    sq = np.exp(0.5 * log_r_cols)                       # (G, p)
    A = np.eye(p) + sq[:, :, None] * ZtZ[None] * sq[:, None, :]
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NonPDCovariance("ratio system is not positive definite") from exc
    logdet = 2 * np.sum(np.log(np.diagonal(L, axis1=1, axis2=2)), axis=1)
    rhs = np.stack([sq * Zy, sq * Z1], axis=-1)          # (G, p, 2)
    sol = np.linalg.solve(A, rhs)
    q_yy = y @ y - np.einsum("gp,gp->g", rhs[..., 0], sol[..., 0])
    q_1y = one @ y - np.einsum("gp,gp->g", rhs[..., 1], sol[..., 0])
    q_11 = N - np.einsum("gp,gp->g", rhs[..., 1], sol[..., 1])
    back = np.einsum("pq,gqk->gpk", ZtZ, sq[:, :, None] * sol)
    zy = Zy[None] - back[..., 0]
    z1 = Z1[None] - back[..., 1]
    return (q_yy, q_1y, q_11), logdet, zy, z1


def _axis(center, half_width, n, lo_extra=0, hi_extra=0):
    step = 2 * half_width / (n - 1)
    return center + step * np.arange(-lo_extra, n + hi_extra) - half_width


def grid_log_posterior(y, comps, prior: PriorSet, ratio_axes, noise_axis,
                       tau2=TAU2_INTERCEPT, coef_of=()):
    """Log joint (likelihood times prior in log coordinates) on the grid.

    Returns the log joint, the variances at each node and conditional
    posterior means of single-column components named in ``coef_of``.
    """
    y = np.asarray(y, dtype=float)
    N = y.size
    Z = np.hstack([c.factor for c in comps])
    col_owner = np.concatenate([[j] * c.factor.shape[1] for j, c in enumerate(comps)])
    mesh = np.meshgrid(*ratio_axes, indexing="ij")
    log_r = np.stack([m.ravel() for m in mesh], axis=-1)            # (G, J)
    (q_yy, q_1y, q_11), logdet, zy, z1 = _ratio_node_terms(Z, y, log_r[:, col_owner])
    e = np.exp(noise_axis)[None, :]                                  # (1, E)
    kappa = tau2 / e
    den = 1 + kappa * q_11[:, None]
    quad = (q_yy[:, None] - kappa * q_1y[:, None] ** 2 / den) / e
    ll = -0.5 * (N * LOG_2PI + N * np.log(e) + logdet[:, None] + np.log(den) + quad)
    s2 = {c.name: np.exp(log_r[:, j])[:, None] * e for j, c in enumerate(comps)}
    s2["eps"] = np.broadcast_to(e, ll.shape)
    log_jac = sum(np.log(v) for v in s2.values())
    lp = ll + prior.log_density(s2) + log_jac
    coefs = {}
    for name in coef_of:
        j = [c.name for c in comps].index(name)
        col = int(np.flatnonzero(col_owner == j)[0])
        r = np.exp(log_r[:, j])[:, None]
        coefs[name] = r * (zy[:, col, None] - z1[:, col, None] * kappa * q_1y[:, None] / den)
    shape = tuple(len(a) for a in ratio_axes) + (len(noise_axis),)
    reshape = lambda a: np.broadcast_to(a, ll.shape).reshape(shape)
    return reshape(lp), {k: reshape(v) for k, v in s2.items()}, {k: reshape(v) for k, v in coefs.items()}


@dataclass
class GridOptions:
    points: int = 80
    decades: float = 6.0
    max_expansions: int = 3
    edge_tol: float = 0.01


def fit_grid(y, model, prior="vp", scaling="expectation", x=None, opts: GridOptions | None = None,
             coef_of=()) -> GridPosterior:
    """Grid posterior of the variance parameters of ``model`` given ``y``.

    The ratio axes start centred at one and the noise axis at the sample
    variance of ``y``, each spanning ``opts.decades`` orders of magnitude.
    An axis edge holding more than ``opts.edge_tol`` of the mass is pushed
    out by half the initial width; after ``opts.max_expansions`` rounds
    ``GridMassEscape`` is raised.
    """
    opts = opts or GridOptions()
    y = np.asarray(y, dtype=float)
    if x is None:
        x = model.covariates()
    comps = model.components(x, scaling)
    prior = model.prior_set(prior) if isinstance(prior, str) else prior
    half = 0.5 * opts.decades * np.log(10)
    centers = [0.0] * len(comps) + [float(np.log(np.var(y)))]
    names = [f"log_r_{c.name}" for c in comps] + ["log_eps"]
    extra = [[0, 0] for _ in names]
    grow = opts.points // 2
    for round_ in range(opts.max_expansions + 1):
        axes = [_axis(c, half, opts.points, *ex) for c, ex in zip(centers, extra)]
        lp, s2, coefs = grid_log_posterior(y, comps, prior, axes[:-1], axes[-1], coef_of=coef_of)
        norm = float(np.logaddexp.reduce(lp.ravel()))
        post = GridPosterior(dict(zip(names, axes)), lp, norm, expansions=round_)
        edges = post.boundary_mass()
        bad = [(i, side) for i, n in enumerate(names) for side in (0, 1)
               if edges[n][side] >= opts.edge_tol]
        if not bad:
            break
        if round_ == opts.max_expansions:
            raise GridMassEscape(f"posterior mass escapes the grid: {edges}")
        for i, side in bad:
            extra[i][side] += grow
    post.derived = {**model.derived(s2, comps), **s2, **coefs}
    return post
