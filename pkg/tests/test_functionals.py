import math

import numpy as np
import pytest
from scipy import integrate

from gausshardy.chaos import ChaosExpansion, random_expansion
from gausshardy.geometry import ConeSpec, admissibility
from gausshardy.functionals import (
    EvaluationGrid,
    cone_split,
    default_grid,
    glob_tau,
    h1_norms,
    hl_maximal,
    l1_norm,
    maximal_full_kernel,
    maximal_function,
    maximal_global,
    maximal_local,
    square_function,
    square_plan,
)
from gausshardy.functionals import test_family as family
from gausshardy.semigroup import GaussianBump, heat_values

SMALL = ConeSpec(t_levels=10, radii=3, directions=8)
PTS1 = np.linspace(-4, 4, 17)[:, None]


def test_default_grid_integrates_gamma():
    # constants are exact in every dimension; the kink of |h_1| costs accuracy on coarse grids
    for n, tol in ((1, 1e-12), (2, 1e-5), (3, 1e-3)):
        g = default_grid(n)
        assert abs(g.weights.sum() - 1) < 1e-14
        assert l1_norm(ChaosExpansion.constant(n), g) == pytest.approx(1.0, abs=1e-14)
        assert l1_norm(ChaosExpansion.basis((1,) + (0,) * (n - 1)), g) == pytest.approx(
            math.sqrt(2) / math.sqrt(math.pi), rel=tol)


def test_maximal_of_constant():
    g = default_grid(1)
    for spec in (SMALL, ConeSpec(), ConeSpec(t_levels=3, radii=0)):
        out = maximal_function(ChaosExpansion.constant(1), spec, g)
        assert np.all(out.values == 1.0)
        assert g.l1(out.values) == pytest.approx(1.0, abs=1e-10)


def test_maximal_dominates_top_axis_sample():
    u = ChaosExpansion.basis((1,))
    spec = SMALL.with_parameters(1.0, 2.0)
    out = maximal_function(u, spec, PTS1).values
    top = 2.0 * admissibility(PTS1)
    axis = np.abs([heat_values(u, t**2, x[None])[0] for t, x in zip(top, PTS1)])
    assert np.all(out >= axis)


def test_maximal_monotone_in_parameters():
    u = random_expansion(1, 4, np.random.default_rng(1))
    base = ConeSpec(aperture=1.0, admissibility=1.0, t_levels=7, t_min_fraction=1 / 64, radii=3)
    wide = ConeSpec(aperture=2.0, admissibility=1.0, t_levels=7, t_min_fraction=1 / 64, radii=6)
    tall = ConeSpec(aperture=1.0, admissibility=2.0, t_levels=8, t_min_fraction=1 / 128, radii=3)
    # the larger cones sample a superset of points (heights agree up to rounding)
    m0 = maximal_function(u, base, PTS1).values * (1 - 1e-12)
    assert np.all(maximal_function(u, wide, PTS1).values >= m0)
    assert np.all(maximal_function(u, tall, PTS1).values >= m0)


def test_square_function_monotone_in_aperture():
    u = random_expansion(1, 4, np.random.default_rng(2))
    s1 = square_function(u, 1.0, PTS1, SMALL).values
    s2 = square_function(u, 2.0, PTS1, SMALL).values
    assert np.all(s2 >= s1 * (1 - 1e-6))


def _hl_oracle(f, x, r_grid):
    best = 0.0
    for r in r_grid:
        pts = [0.0] if x - r < 0 < x + r else None
        num = integrate.quad(lambda z: f(z) * np.exp(-z * z), x - r, x + r, points=pts, limit=200)[0]
        den = integrate.quad(lambda z: np.exp(-z * z), x - r, x + r)[0]
        best = max(best, num / den)
    return best


def test_hl_maximal_examples():
    pts = np.linspace(0, 3, 7)[:, None]
    one = hl_maximal(lambda p: np.ones(len(p)), pts).values
    assert np.allclose(one, 1.0, atol=1e-12)
    bump = GaussianBump(np.zeros(1), 0.3)
    r_grid = np.geomspace(0.02, 12, 400)
    hl = hl_maximal(bump, pts, r_grid).values
    for x, v in zip(pts[::2, 0], hl[::2]):
        assert abs(v - _hl_oracle(lambda z: np.exp(-z * z / 0.18), x, r_grid)) < 1e-7
    assert np.all(hl <= 1.0 + 1e-12) and hl[0] == hl.max()
    # gamma-averages over balls reaching the origin keep a plateau: weakly decreasing only
    assert np.all(np.diff(hl) < 1e-4)


def test_hl_maximal_bounded_by_sup_n2():
    u = random_expansion(2, 3, np.random.default_rng(3))
    pts = np.random.default_rng(4).uniform(-2, 2, (12, 2))
    hl = hl_maximal(u, pts, np.geomspace(0.05, 2, 10)).values
    # averages over B(x, r) with r <= 2 stay below the sup of |u| on the 4-box
    g = np.stack(np.meshgrid(*[np.linspace(-4, 4, 201)] * 2), -1).reshape(-1, 2)
    assert np.all(hl <= np.abs(u(g)).max() * (1 + 1e-9))


def test_maximal_dominated_by_hl():
    # pointwise T* <= C HL with a moderate constant on a smooth positive input
    bump = GaussianBump(np.array([1.0]), 0.4)
    tm = maximal_function(bump, SMALL, PTS1).values
    hl = hl_maximal(bump, PTS1).values
    assert np.all(tm <= 20 * hl)


def test_local_plus_global_is_full():
    bump = GaussianBump(np.array([0.5]), 0.6)
    spec = SMALL.with_parameters(1.0, 1.0)
    loc, glo = cone_split(bump, spec, PTS1)
    full = maximal_full_kernel(bump, 1.0, 1.0, PTS1, SMALL).values
    assert np.max(np.abs((loc + glo).max(axis=1) - full)) < 1e-14
    # the kernel-node evaluation of e^{t^2L}|u| matches the closed-form heat flow
    direct = maximal_function(bump, spec, PTS1).values
    assert np.max(np.abs(full - direct)) < 1e-8
    assert np.all(maximal_local(bump, 1.0, 1.0, PTS1, SMALL).values <= full + 1e-15)


def test_global_part_of_constant_is_below_one():
    one = lambda p: np.ones(len(p))
    g = maximal_global(one, 1.0, 1.0, PTS1, SMALL).values
    assert np.all(g <= 1.0 + 1e-12) and np.any(g < 1.0)
    assert glob_tau(1.0, 1.0) == 3.0


def test_square_function_examples():
    g = square_function(ChaosExpansion.constant(1), 1.0, PTS1, SMALL)
    assert np.all(g.values == 0)
    h = square_function(ChaosExpansion.basis((1,)), 1.0, PTS1, SMALL)
    assert np.all(h.values > 0)


def test_square_plan_reuse_and_mismatch():
    plan = square_plan(PTS1, SMALL)
    u = ChaosExpansion.basis((2,))
    a = square_function(u, 1.0, PTS1, plan=plan).values
    b = square_function(u, 1.0, PTS1, SMALL).values
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        square_function(u, 1.0, PTS1[:3], plan=plan)


@pytest.mark.parametrize("member", [1, 5, 11, 16])
def test_square_refinement_stability(member):
    f = family(1)[member].function
    grid = default_grid(1)
    coarse = grid.l1(square_function(f, 1.0, grid, ConeSpec()).values)
    fine = grid.l1(square_function(f, 1.0, grid, ConeSpec().refined()).values)
    assert abs(fine / coarse - 1) < 0.02


def test_h1_norms_examples():
    one = h1_norms(ChaosExpansion.constant(1), 1.0, 1.0, SMALL)
    assert one.quad == pytest.approx(1.0, abs=1e-10)
    assert one.max == pytest.approx(1.0, abs=1e-10)
    assert one.ratio == pytest.approx(1.0, abs=1e-10)
    h = h1_norms(ChaosExpansion.basis((1,)), 1.0, 1.0, SMALL)
    assert 0 < h.quad < math.inf and 0 < h.max < math.inf


def test_family_composition():
    for n in (1, 2):
        fam = family(n)
        assert len(fam) == 20
        ids = [m.function_id for m in fam]
        assert len(set(ids)) == 20
        assert {"bump0", "bump1", "bump2", "bump3"} <= set(ids)
        assert all(m.dimension == n for m in fam)
    a = family(1, seed=3)[-1].function
    b = family(1, seed=3)[-1].function
    assert a.coeffs == b.coeffs


def test_evaluation_grid_l1():
    g = EvaluationGrid(np.zeros((2, 1)), np.array([0.25, 0.75]))
    assert g.l1([-2.0, 1.0]) == 1.25
