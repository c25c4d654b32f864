from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.interpolate import BSpline

from lgmstd.bspline import (BSplineBasis, eval_basis, eval_basis_closed_form, exact_moments,
                            mc_moments, _uniform_unit_moments)
from lgmstd.effects import ContinuousUniform
from lgmstd.errors import KTooSmall, OutOfInterval


def scipy_basis(b, x):
    """Independent evaluation through scipy's de Boor implementation."""
    n = b.n_cells
    lo, hi = b.interval
    knots = lo + (hi - lo) * np.arange(-3, n + 4) / n
    cols = [BSpline.basis_element(knots[k:k + 5], extrapolate=False)(x) for k in range(b.K)]
    out = np.nan_to_num(np.column_stack(cols))
    # scipy treats the right end as open; the basis here closes the last cell
    at_end = x == hi
    out[at_end] = 0.0
    out[np.ix_(at_end, range(b.K - 3, b.K))] = [1 / 6, 2 / 3, 1 / 6]
    return out


@settings(max_examples=40, deadline=None)
@given(K=st.integers(4, 30), x=st.lists(st.floats(0, 1), min_size=1, max_size=20))
def test_partition_of_unity_and_nonnegativity(K, x):
    B = eval_basis(BSplineBasis(K), np.array(x))
    assert np.allclose(B.sum(axis=1), 1.0, atol=1e-12)
    assert B.min() >= -1e-14
    assert ((B > 1e-15).sum(axis=1) <= 4).all()


@pytest.mark.parametrize("K", [4, 5, 6, 7, 10, 23])
def test_recursion_matches_closed_form_and_scipy(K):
    b = BSplineBasis(K, (-1.0, 2.5))
    x = np.linspace(-1.0, 2.5, 1001)
    B = eval_basis(b, x)
    assert np.abs(B - eval_basis_closed_form(b, x)).max() < 1e-13
    assert np.abs(B - scipy_basis(b, x)).max() < 1e-13


def test_closed_last_cell():
    B = eval_basis(BSplineBasis(5), np.array([1.0]))[0]
    assert np.allclose(B, [0, 0, 1 / 6, 2 / 3, 1 / 6])


def test_errors():
    with pytest.raises(OutOfInterval):
        eval_basis(BSplineBasis(6), np.array([1.2]))
    with pytest.raises(KTooSmall):
        BSplineBasis(3)


def test_published_moment_tables():
    s0, v = _uniform_unit_moments(5)
    assert s0 == [Fraction(1, 48), Fraction(1, 4), Fraction(11, 24), Fraction(1, 4), Fraction(1, 48)]
    assert v[1] == Fraction(7, 120)
    s0, _ = _uniform_unit_moments(10)
    assert s0[0] == Fraction(1, 24) / 7 and s0[5] == Fraction(1, 7)


@pytest.mark.parametrize("K", [4, 5, 6, 7, 8, 9, 12, 40])
@pytest.mark.parametrize("interval", [(0.0, 1.0), (2.0, 5.0)])
def test_exact_moments_against_quadrature(K, interval):
    b = BSplineBasis(K, interval)
    x, w = ContinuousUniform(*interval).nodes(b.breakpoints(), per_cell=8)
    B = eval_basis(b, x)
    s0, s1 = exact_moments(b)
    assert np.abs(w @ B - s0).max() < 1e-14
    assert np.abs((w * x) @ B - s1).max() < 1e-13
    assert sum(s0) == pytest.approx(1.0)


def test_mc_moments_agree():
    b = BSplineBasis(10)
    s0, s1 = exact_moments(b)
    m0, m1 = mc_moments(b, ContinuousUniform().sample, 400_000, seed=1)
    assert np.abs(m0 - s0).max() < 3e-3
    assert np.abs(m1 - s1).max() < 3e-3
