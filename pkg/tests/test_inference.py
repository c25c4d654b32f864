from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lgmstd.errors import GridMassEscape, NonPDCovariance
from lgmstd.inference import (Component, GridOptions, LinearPlusSpline, LocalLevel, fit_grid,
                              gaussian_log_marginal, grid_log_posterior)
from lgmstd.priors import PC0, PriorSet
from lgmstd.rng import make_rng


@dataclass
class TinyModel:
    """A fixed factor and noise; enough for brute-force oracles."""
    Z: np.ndarray
    prior: PriorSet

    def covariates(self):
        return None

    def components(self, x, scaling="expectation"):
        return [Component("f", self.Z, 1.0)]

    def derived(self, s2, comps):
        return {"phi": s2["f"] / (s2["f"] + s2["eps"])}

    def prior_set(self, name):
        return self.prior


def _likelihood_on_grid(y, Z, log_r, log_e):
    lp, s2, _ = grid_log_posterior(y, [Component("f", Z)], PriorSet({}), [log_r], log_e)
    return lp - np.log(s2["f"]) - np.log(s2["eps"]), s2


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 1000), N=st.integers(3, 12), p=st.integers(1, 4))
def test_woodbury_matches_dense(seed, N, p):
    rng = np.random.default_rng(seed)
    Z, y = rng.normal(size=(N, p)), rng.normal(size=N)
    ll, s2 = _likelihood_on_grid(y, Z, np.array([-2.0, 0.5]), np.array([-1.0, 0.3]))
    for i in range(2):
        for j in range(2):
            ref = gaussian_log_marginal(y, [Z], [s2["f"][i, j] * np.eye(p)], s2["eps"][i, j])
            assert ll[i, j] == pytest.approx(ref, rel=1e-10, abs=1e-10)


def test_vanishing_effect_variance_leaves_noise_only():
    rng = np.random.default_rng(0)
    Z, y = rng.normal(size=(6, 2)), rng.normal(size=6)
    ll, _ = _likelihood_on_grid(y, Z, np.array([-40.0]), np.array([0.0]))
    assert ll[0, 0] == pytest.approx(gaussian_log_marginal(y, [], [], 1.0), abs=1e-12)


def test_permutation_invariance():
    rng = np.random.default_rng(1)
    Z, y = rng.normal(size=(8, 3)), rng.normal(size=8)
    perm = rng.permutation(8)
    a, _ = _likelihood_on_grid(y, Z, np.array([0.2]), np.array([-0.4]))
    b, _ = _likelihood_on_grid(y[perm], Z[perm], np.array([0.2]), np.array([-0.4]))
    assert a[0, 0] == pytest.approx(b[0, 0], rel=1e-12)


def test_marginal_against_monte_carlo_integration():
    rng = make_rng(4)
    Z = np.array([[1.0, 0.0], [0.5, 1.0], [-1.0, 0.3]])
    y = np.array([0.3, -0.2, 1.1])
    s_f, s_e, tau2 = 0.7, 0.4, 2.0
    n = 2_000_000
    mu = rng.normal(0, np.sqrt(tau2), n)
    u = rng.normal(0, np.sqrt(s_f), (n, 2))
    r = y[None] - mu[:, None] - u @ Z.T
    logp = -0.5 * (3 * np.log(2 * np.pi * s_e) + np.sum(r ** 2, 1) / s_e)
    mc = np.log(np.mean(np.exp(logp)))
    exact = gaussian_log_marginal(y, [Z], [s_f * np.eye(2)], s_e, tau2=tau2)
    assert mc == pytest.approx(exact, abs=0.01)


def test_non_pd_covariance_raises():
    with pytest.raises(NonPDCovariance):
        gaussian_log_marginal(np.zeros(2), [np.eye(2)], [-10 * np.eye(2)], 1.0)


def _local_level_data(phi=0.5, seed=0):
    m = LocalLevel(25)
    comps = m.components(m.covariates())
    rng = make_rng(seed)
    L = comps[0].factor
    return m, np.sqrt(phi) * L @ rng.standard_normal(L.shape[1]) + np.sqrt(1 - phi) * rng.standard_normal(25)


@pytest.mark.parametrize("prior", ["ig", "pc", "vp"])
def test_grid_weights_normalised_and_deterministic(prior):
    m, y = _local_level_data()
    a = fit_grid(y, m, prior)
    b = fit_grid(y, m, prior)
    assert a.weights.sum() == pytest.approx(1, abs=1e-8)
    assert a.mean("phi") == b.mean("phi")
    lo, hi = a.interval("phi")
    assert 0 <= lo < a.mean("phi") < hi <= 1
    assert max(max(v) for v in a.boundary_mass().values()) < 0.01


@pytest.mark.parametrize("prior", ["ig", "pc"])
@pytest.mark.parametrize("seed", range(4))
def test_noise_only_data_gives_small_phi(prior, seed):
    y = make_rng(seed).standard_normal(25)
    assert fit_grid(y, LocalLevel(25), prior).mean("phi") < 0.25


@pytest.mark.parametrize("scaling", ["expectation", "none", "geometric_mean"])
def test_phi_is_share_of_effective_variances(scaling):
    m, y = _local_level_data(seed=2)
    post = fit_grid(y, m, "vp", scaling)
    g = m.components(m.covariates(), scaling)[0].gain
    sig = post.derived["f"] * g
    assert np.allclose(post.derived["phi"], sig / (sig + post.derived["eps"]))
    if scaling == "expectation":
        assert g == pytest.approx(1.0)
    if scaling == "none":
        assert g == pytest.approx(4.160, abs=5e-4)


def test_grid_matches_importance_sampling_oracle():
    Z = np.array([[1.0], [-1.0]])
    y = np.array([1.4, -0.9])
    prior = PriorSet({"f": PC0(3, 0.05), "eps": PC0(3, 0.05)})
    model = TinyModel(Z, prior)
    post = fit_grid(y, model, prior, opts=GridOptions(points=160, decades=8, max_expansions=6))
    rng = make_rng(11)
    n = 2_000_000
    s_f, s_e = prior.independent["f"].sample(n, rng), prior.independent["eps"].sample(n, rng)
    # y = mu + z u + eps: project out the intercept direction analytically
    d = (y[0] - y[1]) / np.sqrt(2)
    c = (y[0] + y[1]) / np.sqrt(2)
    v_d = 2 * s_f + s_e
    v_c = s_e + 2 * 1e3
    logw = -0.5 * (np.log(v_d) + d ** 2 / v_d + np.log(v_c) + c ** 2 / v_c)
    w = np.exp(logw - logw.max())
    phi = s_f / (s_f + s_e)
    assert post.mean("phi") == pytest.approx(np.sum(w * phi) / w.sum(), rel=0.02)


def test_grid_escape_raises():
    m, y = _local_level_data()
    with pytest.raises(GridMassEscape):
        fit_grid(y, m, "vp", opts=GridOptions(points=20, decades=0.2, max_expansions=0))


@pytest.mark.slow
def test_linear_trend_coefficient_is_recovered():
    rng = make_rng(5)
    x = rng.uniform(0, 1, 300)
    beta = np.sqrt(0.5)
    y = (x - 0.5) * np.sqrt(12) * beta + np.cos(2 * np.pi * x) + rng.standard_normal(300)
    post = fit_grid(y, LinearPlusSpline(10, True), "ig", x=x, coef_of=("t",))
    assert post.weights.sum() == pytest.approx(1, abs=1e-8)
    assert abs(post.mean("t") - beta) < 0.3
