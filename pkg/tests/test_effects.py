import json

import numpy as np
import pytest

from lgmstd.effects import (Categorical, ContinuousUniform, DiscreteUniform, Empirical,
                            decompose, dist_from_dict, effect_from_dict, grid_adjacency,
                            make_categorical, make_icar, make_linear, make_pspline, make_rw,
                            orthogonal_polynomials, read_adjacency)
from lgmstd.errors import (DisconnectedGraph, InvalidProbabilityVector, TooFewLevels,
                           UnsupportedFamily, ZeroVarianceCovariate)


def test_constructor_errors():
    with pytest.raises(ZeroVarianceCovariate):
        make_linear(Empirical((2.0, 2.0, 2.0)))
    with pytest.raises(InvalidProbabilityVector):
        make_categorical([0.5, 0.6])
    with pytest.raises(InvalidProbabilityVector):
        make_categorical([1.0, 0.0])
    with pytest.raises(TooFewLevels):
        make_rw(3, 2)
    W = np.zeros((4, 4))
    W[0, 1] = W[1, 0] = W[2, 3] = W[3, 2] = 1
    with pytest.raises(DisconnectedGraph):
        make_icar(W)
    with pytest.raises(UnsupportedFamily):
        decompose(make_linear(ContinuousUniform()))


def test_indicator_design():
    e = make_rw(5, 1)
    D = e.design([1, 3, 5])
    assert np.array_equal(D.argmax(axis=1), [0, 2, 4]) and D.sum() == 3


def test_distributions_roundtrip_and_nodes():
    for d in (DiscreteUniform(4), Categorical((0.2, 0.8)), ContinuousUniform(-1, 2),
              Empirical((0.1, 0.5, 0.7))):
        back = dist_from_dict(json.loads(json.dumps(d.to_dict())))
        assert back == d
        x, w = d.nodes()
        assert w.sum() == pytest.approx(1.0)
    x, w = ContinuousUniform(-1, 2).nodes([0.0, 0.5])
    assert w @ x == pytest.approx(0.5) and w @ x ** 6 == pytest.approx((2 ** 7 + 1) / 21)


def test_effect_json_roundtrip():
    specs = [make_rw(7, 2), make_categorical([0.1, 0.9], "random"),
             make_pspline(8, 2, (0.0, 2.0)), make_icar(grid_adjacency(2, 3)),
             make_linear(ContinuousUniform(0, 3))]
    for e in specs:
        d = json.loads(json.dumps(e.to_dict()))
        back = effect_from_dict(d)
        assert back.family == e.family and back.K == e.K and back.kind == e.kind
        assert np.array_equal(back.structure.entries, e.structure.entries)


def test_adjacency_csv(tmp_path):
    path = tmp_path / "edges.csv"
    path.write_text("i,j\n1,2\n2,3\n3,4\n")
    W = read_adjacency(path)
    assert W.shape == (4, 4) and W.sum() == 6
    e = effect_from_dict({"family": "icar", "K": 4, "adjacency": str(path)})
    assert e.structure.entries[1, 1] == 2


def test_orthogonal_polynomials_are_centred_and_orthogonal():
    for dist in (DiscreteUniform(9), ContinuousUniform(0, 1)):
        polys = orthogonal_polynomials(dist, 3)
        x, w = dist.nodes()
        vals = [np.polynomial.polynomial.polyval(x, c) for c in polys]
        for i, v in enumerate(vals):
            assert abs(w @ v) < 1e-12
            for u in vals[:i]:
                assert abs(w @ (u * v)) < 1e-10
    assert orthogonal_polynomials(DiscreteUniform(9), 1)[0] == pytest.approx((-5.0, 1.0))


def test_decompose_random_walk():
    c = decompose(make_rw(10, 2))
    assert len(c.trend) == 1
    assert c.residual_constraints.shape == (2, 10)
    c3 = decompose(make_rw(10, 3))
    assert len(c3.trend) == 2


def test_decompose_pspline_uses_moment_null_space():
    c = decompose(make_pspline(10, 2))
    S = c.residual.structure.null_space
    assert S.shape == (10, 2)
    assert np.abs(c.residual.structure.entries @ S).max() < 1e-10
    plain = decompose(make_pspline(10, 2), modify=False)
    assert np.array_equal(plain.residual.structure.entries, make_pspline(10, 2).structure.entries)
