import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.special import gamma

from gausshardy.chaos import ChaosExpansion, GridFunction, gauss_hermite, random_expansion
from gausshardy.geometry import admissibility
from gausshardy.semigroup import (
    GaussianBump,
    SemigroupQuery,
    apply_gradient_semigroup,
    apply_J_infty,
    apply_J_remainder_Dc,
    apply_semigroup,
    decomposition_terms,
    default_N,
    heat_values,
    reproduce,
    reproducing_constant,
)


def test_query_validation():
    with pytest.raises(ValueError):
        SemigroupQuery(0.0)
    with pytest.raises(ValueError):
        SemigroupQuery(1.0, path="fourier")
    assert SemigroupQuery(0.6, alpha=4.0).time == pytest.approx(0.09)
    assert default_N(1) == 2 and default_N(4) == 2 and default_N(5) == 3


def test_constant_is_fixed():
    one = ChaosExpansion.constant(2)
    for t in (0.01, 0.5, 3.0):
        assert apply_semigroup(one, SemigroupQuery(t)).coeffs == one.coeffs
        res = apply_semigroup(one, SemigroupQuery(t, path="both"))
        assert np.max(np.abs(res.kernel.values - 1)) < 1e-10


def test_eigenfunction_decay():
    for beta in [(1,), (3,), (2, 1)]:
        out = apply_semigroup(ChaosExpansion.basis(beta), SemigroupQuery(1.0))
        assert out[beta] == pytest.approx(math.exp(-sum(beta)), rel=1e-15)


def test_representation_mismatch():
    rule = gauss_hermite(10)
    g = GridFunction.on_rule(lambda p: p[:, 0], 1, rule)
    with pytest.raises(ValueError):
        apply_semigroup(g, SemigroupQuery(1.0))
    with pytest.raises(ValueError):
        apply_semigroup(GridFunction(g.points, g.values, g.weights), SemigroupQuery(1.0, path="kernel"))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 2), st.floats(0.01, 2))
def test_semigroup_law(seed, s, t):
    u = random_expansion(2, 6, np.random.default_rng(seed))
    a = apply_semigroup(apply_semigroup(u, SemigroupQuery(s)), SemigroupQuery(t))
    b = apply_semigroup(u, SemigroupQuery(s + t))
    assert a.max_abs_difference(b) < 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 3))
def test_mass_conservation(seed, t):
    u = random_expansion(1, 6, np.random.default_rng(seed))
    assert abs(apply_semigroup(u, SemigroupQuery(t)).mean() - u.mean()) < 1e-9


@pytest.mark.parametrize("n,deg", [(1, 8), (2, 6)])
@pytest.mark.parametrize("t", [0.01, 0.3, 2.0])
def test_dual_path_agreement(n, deg, t):
    u = random_expansion(n, deg, np.random.default_rng(int(100 * t) + n))
    res = apply_semigroup(u, SemigroupQuery(t, path="both"))
    assert res.discrepancy < 1e-6 * max(1.0, u.norm())


def test_kernel_path_power_against_spectral():
    u = random_expansion(1, 6, np.random.default_rng(4))
    res = apply_semigroup(u, SemigroupQuery(0.8, N=2, alpha=4.0, path="both"))
    assert res.discrepancy < 1e-6 * u.norm()


def test_kernel_positivity():
    bump = GaussianBump(np.array([0.5]), 0.3)
    pts = np.linspace(-8, 8, 101)[:, None]
    for t in (0.01, 0.5, 4.0):
        out = apply_semigroup(bump, SemigroupQuery(t, path="kernel"), pts)
        assert np.all(out.values >= 0)


def test_gaussian_bump_closed_form_matches_kernel():
    bump = GaussianBump(np.array([0.2, -0.4]), 0.7)
    pts = np.random.default_rng(0).normal(size=(30, 2))
    exact = heat_values(bump, 0.4, pts)
    kern = apply_semigroup(bump, SemigroupQuery(0.4, path="kernel"), pts).values
    assert np.max(np.abs(exact - kern)) < 1e-9


def test_gradient_examples():
    pts = np.linspace(-2, 2, 7)[:, None]
    g = apply_gradient_semigroup(ChaosExpansion.constant(1), 0.7, pts)
    assert np.all(g[0].values == 0)
    t = 0.7
    h1 = apply_gradient_semigroup(ChaosExpansion.basis((1,)), t, pts)[0].values
    assert np.allclose(h1, t * math.exp(-(t**2)) * math.sqrt(2), rtol=1e-14)


@pytest.mark.parametrize("seed", range(3))
def test_gradient_dual_path(seed):
    rng = np.random.default_rng(seed)
    u = random_expansion(1 + seed % 2, 5, rng)
    pts = rng.normal(size=(25, u.dimension))
    for t in (0.2, 0.9):
        a = apply_gradient_semigroup(u, t, pts, "spectral")
        b = apply_gradient_semigroup(u, t, pts, "kernel")
        for ga, gb in zip(a, b):
            scale = max(1.0, np.max(np.abs(ga.values)))
            assert np.max(np.abs(ga.values - gb.values)) < 1e-6 * scale


@pytest.mark.parametrize("N", [0, 1, 3])
def test_reproducing_constant_by_quadrature(N):
    a, alpha = 2.0, 36.0
    c = (1 + a**2) / alpha
    val, _ = integrate.quad(lambda t: (-(t**2)) ** (N + 1) * math.exp(-c * t**2) / t, 0, np.inf)
    assert reproducing_constant(N, a, alpha) * val == pytest.approx(1.0, rel=1e-10)


def test_reproducing_constant_gamma_ratio():
    a, alpha = 1.5, 10.0
    c = (1 + a**2) / alpha
    r = reproducing_constant(1, a, alpha) / reproducing_constant(0, a, alpha)
    assert r == pytest.approx(-c * gamma(1) / gamma(2), rel=1e-14)


def test_reproduce_examples():
    h2 = ChaosExpansion.basis((2,))
    res = reproduce(h2, 1, 2.0, 36.0, 20.0)
    assert abs(res.expansion[(2,)] - 1) < 1e-8 and res.tail_bound < 1e-8
    one = ChaosExpansion.constant(1)
    assert reproduce(one, 1, 2.0, 36.0).expansion.coeffs == one.coeffs
    u = random_expansion(2, 6, np.random.default_rng(9))
    assert reproduce(u, 1, 2.0, 36.0).expansion.max_abs_difference(u) < 1e-7


def test_reproduce_reports_short_horizon():
    res = reproduce(ChaosExpansion.basis((1,)), 1, 2.0, 36.0, t_max=1.0)
    assert res.tail_bound > 1e-3


def test_J_infty_examples():
    pts = np.linspace(-3, 3, 13)[:, None]
    assert np.all(apply_J_infty(ChaosExpansion.constant(1), 1, 2.0, 36.0, 6.0, pts).values == 0)
    k, N, a, alpha, b = 3, 1, 2.0, 36.0, 6.0
    c = (1 + a**2) / alpha
    out = apply_J_infty(ChaosExpansion.basis((k,)), N, a, alpha, b, pts).values
    h = ChaosExpansion.basis((k,))(pts)
    for x, v, hv in zip(pts, out, h):
        lo = float(admissibility(x)) / b
        ref, _ = integrate.quad(lambda t: (-(t**2) * k) ** (N + 1) * math.exp(-c * k * t**2) / t,
                                lo, 20.0, limit=200)
        assert abs(v - hv * ref) < 1e-9 * max(1.0, abs(hv * ref))


def test_J_infty_converges_in_t_max():
    u = random_expansion(1, 4, np.random.default_rng(2))
    rule = gauss_hermite(40)
    pts, w = rule.tensor(1)
    norms = [np.abs(apply_J_infty(u, 1, 2.0, 36.0, 6.0, pts, t_max=T).values) @ w
             for T in (20.0, 30.0, 40.0)]
    assert abs(norms[1] - norms[0]) < 1e-8 and abs(norms[2] - norms[1]) < 1e-8


def test_Dc_remainder_examples():
    pts = np.array([[0.0], [1.5], [4.0]])
    assert np.all(apply_J_remainder_Dc(ChaosExpansion.constant(1), 1, 2.0, 36.0, 6.0, pts).values == 0)
    # for b large the t-range sits deep inside D for every node used
    out = apply_J_remainder_Dc(ChaosExpansion.basis((2,)), 1, 2.0, 36.0, 1e4, pts[:1])
    assert np.all(out.values == 0)


def test_decomposition_recombines():
    u = ChaosExpansion(1, {(1,): 0.6, (2,): -0.3, (0,): 0.2})
    pts = np.array([[-1.0], [0.3], [2.5]])
    parts = decomposition_terms(u, 1, 2.0, 36.0, 6.0, pts)
    assert np.max(np.abs(parts["total"] - u(pts))) < 1e-5
