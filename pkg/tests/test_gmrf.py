import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lgmstd.effects import grid_adjacency, make_icar, rw_structure
from lgmstd.errors import (NegativeEigenvalue, NonSymmetric, OrderTooLarge,
                           SingularConstraintGram)
from lgmstd.gmrf import (ConstrainedGaussian, StructureMatrix, condition_on_constraints,
                         generalized_inverse, polynomial_null_space, pseudo_log_det,
                         sample_constrained)


@settings(max_examples=30, deadline=None)
@given(K=st.integers(4, 40), order=st.integers(1, 2))
def test_penrose_conditions(K, order):
    Q = rw_structure(K, order).entries
    G = generalized_inverse(Q)
    tol = 1e-8 * np.abs(G).max()
    assert np.allclose(Q @ G @ Q, Q, atol=1e-8 * np.abs(Q).max())
    assert np.allclose(G @ Q @ G, G, atol=tol)
    assert np.allclose(Q @ G, (Q @ G).T, atol=1e-9)
    assert np.allclose(G @ Q, (G @ Q).T, atol=1e-9)


def test_pinv_matches_numpy():
    Q = rw_structure(12, 2).entries
    assert np.allclose(generalized_inverse(Q), np.linalg.pinv(Q, hermitian=True), atol=1e-8)


def test_rw_stencils_are_exact_integers():
    Q = rw_structure(6, 2).entries
    assert np.array_equal(Q[2, :], [1, -4, 6, -4, 1, 0])
    assert np.array_equal(Q[0, :3], [1, -2, 1])
    assert np.array_equal(rw_structure(4, 1).entries[1], [-1, 2, -1, 0])


def test_input_validation():
    with pytest.raises(NonSymmetric):
        generalized_inverse(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(NegativeEigenvalue):
        generalized_inverse(np.diag([1.0, -1.0]))


def test_pseudo_log_det_path_graph():
    # matrix-tree theorem: product of non-zero Laplacian eigenvalues is K
    for K in (3, 7, 20):
        assert pseudo_log_det(rw_structure(K, 1)) == pytest.approx(np.log(K), rel=1e-10)


def test_polynomial_null_space():
    for order in (1, 2, 3):
        Q = rw_structure(9, order).entries
        S = polynomial_null_space(9, order)
        assert np.abs(Q @ S).max() == 0.0
    with pytest.raises(OrderTooLarge):
        polynomial_null_space(3, 3)


def test_conditioning_projects_out_constraints():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((6, 6))
    cov = X @ X.T
    A = rng.standard_normal((2, 6))
    out = condition_on_constraints(cov, A)
    assert np.abs(A @ out).max() < 1e-10
    assert np.allclose(condition_on_constraints(out, A), out, atol=1e-10)
    assert np.linalg.eigvalsh(cov - out).min() > -1e-10


def test_conditioning_on_satisfied_constraint_is_noop():
    G = generalized_inverse(rw_structure(6, 2))
    S = polynomial_null_space(6, 2)
    out = condition_on_constraints(G, S.T)
    assert np.allclose(out, G, atol=1e-12)
    assert np.abs(S.T @ out).max() < 1e-12


def test_dependent_constraints_rejected():
    A = np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])
    with pytest.raises(SingularConstraintGram):
        condition_on_constraints(np.eye(3), A)


def test_sampler_respects_constraints_and_covariance():
    Q = rw_structure(8, 2)
    g = ConstrainedGaussian(Q, Q.null_space.T, sigma2=2.0)
    u = sample_constrained(g, 200_000, seed=4)
    assert np.abs(u @ Q.null_space).max() < 1e-9
    emp = u.T @ u / len(u)
    assert np.abs(emp - g.covariance).max() < 0.05 * np.abs(g.covariance).max()
    assert np.array_equal(u[:5], sample_constrained(g, 200_000, seed=4)[:5])


def test_icar_null_space_and_structure():
    e = make_icar(grid_adjacency(3, 3))
    assert np.abs(e.structure.entries @ np.ones(9)).max() == 0
    assert e.structure.rank_deficiency == 1
    assert StructureMatrix(e.structure.entries).rank_deficiency == 1
