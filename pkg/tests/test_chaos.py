import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gausshardy import PreconditionError
from gausshardy.chaos import (
    ChaosExpansion,
    GridFunction,
    MultiIndex,
    analyze,
    apply_adjoint_derivative,
    apply_derivative,
    apply_multiplier,
    basis_matrix,
    default_rule_order,
    gauss_hermite,
    hermite_eval,
    multi_indices,
    random_expansion,
    synthesize,
)


def _rule_grid(n, order):
    pts, w = gauss_hermite(order).tensor(n)
    return pts, w


def _inner(f, g, n, order=24):
    pts, w = _rule_grid(n, order)
    return float(w @ (f(pts) * g(pts)))


def test_multi_index_rejects_negative_entries():
    with pytest.raises(ValueError):
        MultiIndex((1, -1))
    assert MultiIndex((2, 3)).order == 5


def test_quadrature_weights_sum_to_sqrt_pi():
    for q in (1, 5, 16, 40):
        r = gauss_hermite(q)
        assert abs(r.weights.sum() - math.sqrt(math.pi)) < 1e-13
        assert np.allclose(r.nodes, -r.nodes[::-1], atol=0)


@pytest.mark.parametrize("q", [3, 8, 15])
def test_quadrature_exact_on_monomials(q):
    r = gauss_hermite(q)
    for k in range(2 * q):
        exact = 0.0 if k % 2 else math.gamma((k + 1) / 2)
        scale = r.weights @ np.abs(r.nodes) ** k
        assert abs(r.weights @ r.nodes**k - exact) < 1e-12 * max(1.0, scale)


def test_hermite_values():
    assert hermite_eval((0,), np.array([0.7])) == 1.0
    assert abs(hermite_eval((1,), np.array([0.3])) - math.sqrt(2) * 0.3) < 1e-15
    assert abs(hermite_eval((2,), np.array([0.0])) + 1 / math.sqrt(2)) < 1e-15
    with pytest.raises(ValueError):
        hermite_eval((1, 0), np.array([0.3]))


def test_gram_matrix_is_identity():
    for n in (1, 2):
        idx = multi_indices(n, 5)
        pts, w = _rule_grid(n, 16)
        B = basis_matrix(pts, idx)
        G = B.T @ (w[:, None] * B)
        assert np.max(np.abs(G - np.eye(len(idx)))) < 1e-10


def test_analyze_examples():
    pts, w = _rule_grid(1, 12)
    one = analyze(GridFunction(pts, np.ones(len(pts)), w), 4)
    assert abs(one[(0,)] - 1) < 1e-13 and all(abs(one[b]) < 1e-13 for b in one.indices if b.order)
    h3 = analyze(GridFunction(pts, hermite_eval((3,), pts), w), 6)
    assert abs(h3[(3,)] - 1) < 1e-12
    assert all(abs(h3[b]) < 1e-12 for b in h3.indices if b != (3,))
    x = analyze(GridFunction(pts, pts[:, 0], w), 3)
    assert abs(x[(1,)] - 1 / math.sqrt(2)) < 1e-13


def test_analyze_rejects_low_order_rule():
    rule = gauss_hermite(4)
    f = GridFunction.on_rule(lambda p: p[:, 0] ** 2, 1, rule)
    with pytest.raises(PreconditionError):
        analyze(f, 6)
    with pytest.raises(PreconditionError):
        analyze(GridFunction(np.zeros((3, 1)), np.ones(3)), 2)


def test_synthesize_examples():
    assert synthesize(ChaosExpansion(1, {(0,): 1.0}), [[0.4]]).values[0] == 1.0
    assert synthesize(ChaosExpansion(1, {(1,): 1.0}), [[0.0]]).values[0] == 0.0


def test_round_trip_n2():
    rng = np.random.default_rng(3)
    c = random_expansion(2, 6, rng)
    rule = gauss_hermite(default_rule_order(6))
    back = analyze(GridFunction.on_rule(c, 2, rule), 6)
    assert back.max_abs_difference(c) < 1e-10


def test_derivative_examples():
    assert apply_derivative(ChaosExpansion(1, {(1,): 1.0}), 0).coeffs == {(0,): math.sqrt(2)}
    assert len(apply_derivative(ChaosExpansion.constant(1), 0)) == 0
    assert apply_derivative(ChaosExpansion(1, {(2,): 1.0}), 0).coeffs == {(1,): 2.0}


def test_adjoint_derivative_examples():
    assert apply_adjoint_derivative(ChaosExpansion.constant(1), 0).coeffs == {(1,): math.sqrt(2)}
    assert apply_adjoint_derivative(ChaosExpansion(1, {(1,): 1.0}), 0).coeffs == {(2,): 2.0}


def test_adjoint_physical_space_identity():
    rng = np.random.default_rng(1)
    g = random_expansion(2, 4, rng)
    x = rng.standard_normal((50, 2))
    for j in range(2):
        lhs = apply_adjoint_derivative(g, j)(x)
        rhs = 2 * x[:, j] * g(x) - apply_derivative(g, j)(x)
        assert np.max(np.abs(lhs - rhs)) < 1e-11


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 2))
def test_adjointness_random(seed, n):
    rng = np.random.default_rng(seed)
    f, g = random_expansion(n, 5, rng), random_expansion(n, 5, rng)
    for j in range(n):
        lhs = _inner(apply_derivative(f, j), g, n, 12)
        rhs = _inner(f, apply_adjoint_derivative(g, j), n, 12)
        assert abs(lhs - rhs) < 1e-10 * (1 + abs(lhs))


def test_multiplier_examples():
    c = ChaosExpansion(1, {(2,): 1.0})
    assert abs(apply_multiplier(c, lambda k: math.exp(-k))[(2,)] - math.exp(-2)) < 1e-16
    d = ChaosExpansion(1, {(1,): 1.0, (3,): 2.0})
    assert apply_multiplier(d, lambda k: 1.0).coeffs == d.coeffs
    assert apply_multiplier(d, lambda k: k).coeffs == {(1,): 1.0, (3,): 6.0}


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 2), st.integers(0, 8))
def test_parseval(seed, n, deg):
    c = random_expansion(n, deg, np.random.default_rng(seed))
    pts, w = _rule_grid(n, 18)
    assert abs(math.sqrt(w @ c(pts) ** 2) - c.norm()) < 1e-9 * (1 + c.norm())


def test_creation_annihilation_composition():
    rng = np.random.default_rng(2)
    c = random_expansion(2, 5, rng)
    for j in range(2):
        lhs = apply_derivative(apply_adjoint_derivative(c, j), j)
        rhs = ChaosExpansion(2, {b: 2 * (b[j] + 1) * v for b, v in c.coeffs.items()})
        assert lhs.max_abs_difference(rhs) < 1e-12


def test_eigenrelation_by_finite_differences():
    # -L h_beta = |beta| h_beta with L = 1/2 Laplacian - x.grad
    h = 1e-4
    pts, w = _rule_grid(2, 14)
    for beta in [(1, 0), (2, 1), (0, 3), (2, 2)]:
        f = ChaosExpansion.basis(beta)
        vals = np.zeros(len(pts))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            lap = (f(pts + e) - 2 * f(pts) + f(pts - e)) / h**2
            grad = (f(pts + e) - f(pts - e)) / (2 * h)
            vals += -0.5 * lap + pts[:, j] * grad
        c = analyze(GridFunction(pts, vals, w), 6)
        k = sum(beta)
        assert abs(c[beta] - k) < 1e-4 * k
        assert all(abs(c[b]) < 1e-4 * k for b in c.indices if b != beta)


def test_json_round_trip():
    c = random_expansion(2, 3, np.random.default_rng(0))
    back = ChaosExpansion.from_json_dict(json.loads(json.dumps(c.to_json_dict())))
    assert back.max_abs_difference(c) == 0.0
    with pytest.raises(ValueError):
        ChaosExpansion.from_json_dict({"n": 1})


def test_expansion_invariants():
    with pytest.raises(ValueError):
        ChaosExpansion(1, {(1, 0): 1.0})
    with pytest.raises(ValueError):
        ChaosExpansion(1, {(4,): 1.0}, max_degree=2)
