import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erf

from gausshardy import PreconditionError
from gausshardy.geometry import (
    AdmissibleBall,
    Annulus,
    ConeSpec,
    admissibility,
    annulus_indicator,
    annulus_measure,
    cone_points,
    cone_quadrature,
    gaussian_ball_measure,
    in_local_region,
    in_region_D,
    log_gaussian_ball_measure,
    montecarlo_ball_measure,
)


def test_admissibility_examples():
    assert admissibility(np.zeros(2)) == 1.0
    assert admissibility(np.array([2.0, 0.0])) == 0.5
    assert admissibility(np.array([0.5])) == 1.0
    assert np.allclose(admissibility(np.array([[3.0], [0.1]])), [1 / 3, 1.0])


def test_local_region_examples():
    assert in_local_region(np.zeros(1), np.zeros(1), 1.0)
    assert not in_local_region(np.array([2.0]), np.array([2.6]), 1.0)
    assert in_local_region(np.array([2.0]), np.array([2.4]), 1.0)
    # the scale is read at the first argument
    assert in_local_region(np.array([0.0]), np.array([0.9]), 1.0)
    assert not in_local_region(np.array([10.0]), np.array([9.1]), 1.0)


def test_region_D_examples():
    assert in_region_D(0.5, np.zeros(1))
    assert not in_region_D(1.5, np.array([0.3]))
    assert in_region_D(0.4, np.array([2.0])) and not in_region_D(0.6, np.array([2.0]))
    with pytest.raises(ValueError):
        in_region_D(0.0, np.zeros(1))


def test_ball_admissibility_enforced():
    AdmissibleBall(np.array([2.0]), 0.5, 1.0)
    with pytest.raises(PreconditionError):
        AdmissibleBall(np.array([2.0]), 0.6, 1.0)
    with pytest.raises(ValueError):
        AdmissibleBall(np.zeros(1), -1.0, 1.0)


def test_ball_measure_oracles():
    assert abs(gaussian_ball_measure(np.zeros(1), 50.0) - 1.0) < 1e-14
    assert abs(gaussian_ball_measure(np.zeros(1), 1.0) - erf(1.0)) < 1e-14
    for r in (0.1, 0.7, 2.0):
        exact = -math.expm1(-(r**2))
        assert abs(gaussian_ball_measure(np.zeros(2), r) / exact - 1) < 1e-8
    with pytest.raises(ValueError):
        gaussian_ball_measure(np.zeros(1), 0.0)


def test_ball_measure_offcentre_against_erf():
    c, r = 1.7, 0.3
    exact = 0.5 * (erf(c + r) - erf(c - r))
    assert abs(gaussian_ball_measure(np.array([c]), r) / exact - 1) < 1e-12


def test_ball_measure_montecarlo_agrees():
    c = np.array([0.8, -0.4])
    est, se = montecarlo_ball_measure(c, 0.6, seed=3)
    assert abs(est - gaussian_ball_measure(c, 0.6)) < 5 * se


def test_log_ball_measure_far_tail():
    # far from the origin the measure underflows but its log does not
    v = log_gaussian_ball_measure(np.array([40.0, 0.0]), 0.01)
    assert np.isfinite(v) and v < -1500


def test_annulus_examples():
    B = AdmissibleBall(np.array([0.5]), 0.2, 1.0)
    c = B.center
    assert annulus_indicator(Annulus(B, 0), c)
    assert annulus_indicator(Annulus(B, 1), c + 3 * B.radius)
    assert not annulus_indicator(Annulus(B, 2), c + 3 * B.radius)


def test_annuli_partition_big_ball():
    rng = np.random.default_rng(0)
    B = AdmissibleBall(np.array([0.3, -0.2]), 0.1, 1.0)
    K = 5
    x = B.center + rng.uniform(-5, 5, (20000, 2)) * B.radius * 2 ** (K - 1)
    # put some points exactly on the dyadic circles
    x[:64] = B.center + np.array([[1.0, 0.0]]) * (B.radius * 2.0 ** np.arange(64)[:, None] % 7)
    total = sum(annulus_indicator(Annulus(B, k), x).astype(int) for k in range(K + 1))
    inside = np.linalg.norm(x - B.center, axis=1) <= 2 ** (K + 1) * B.radius
    assert np.array_equal(total, inside.astype(int))


def test_annulus_measure_cap():
    B = AdmissibleBall(np.zeros(2), 0.1, 1.0)
    full = annulus_measure(Annulus(B, 2))
    assert abs(full - (gaussian_ball_measure(B.center, 0.8) - gaussian_ball_measure(B.center, 0.4))) < 1e-14
    assert annulus_measure(Annulus(B, 2), cap=0.3) == 0.0


@pytest.mark.parametrize("n", [1, 2])
def test_cone_points_membership(n):
    rng = np.random.default_rng(n)
    spec = ConeSpec(aperture=1.5, admissibility=2.0)
    count = 0
    for x in rng.standard_normal((40, n)) * 3:
        s = cone_points(x, spec)
        m = admissibility(x)
        assert np.all(np.linalg.norm(s.y - x, axis=1) < spec.aperture * s.t)
        assert np.all(s.t <= spec.admissibility * m * (1 + 1e-15))
        assert np.all(s.t >= spec.t_min_fraction * spec.admissibility * m * (1 - 1e-12))
        count += len(s)
    assert count >= 5000


def test_cone_axis_only_and_height_bound():
    spec = ConeSpec(radii=0)
    s = cone_points(np.array([0.3]), spec)
    assert np.all(s.y == 0.3)
    s = cone_points(np.array([2.0]), ConeSpec(aperture=1.0, admissibility=1.0))
    assert np.all(s.t <= 0.5)


def test_cone_refinement_nests_samples():
    spec = ConeSpec(t_levels=5, radii=2, directions=4)
    x = np.array([0.7, -0.1])
    a = cone_points(x, spec)
    b = cone_points(x, spec.refined())
    coarse = {(round(t, 12), *np.round(y, 12)) for t, y in zip(a.t, a.y)}
    fine = {(round(t, 12), *np.round(y, 12)) for t, y in zip(b.t, b.y)}
    assert coarse <= fine


@pytest.mark.parametrize("n", [1, 2])
def test_cone_quadrature_volume(n):
    # int_cone dy dt/t = |B_1| A^n (a m)^n (1 - f^n)/n
    spec = ConeSpec(aperture=1.3, admissibility=1.0)
    x = np.array([0.4] * n)
    s = cone_quadrature(x, spec)
    h = spec.admissibility * admissibility(x)
    unit = 2.0 if n == 1 else math.pi
    exact = unit * spec.aperture**n * h**n * (1 - spec.t_min_fraction**n) / n
    assert abs(s.weight.sum() / exact - 1) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(-20, 20), st.floats(1e-3, 1.0), st.floats(0.1, 4))
def test_ball_measure_monotone_in_radius(c, frac, grow):
    r = frac * admissibility(np.array([c]))
    small = log_gaussian_ball_measure(np.array([c]), r)
    big = log_gaussian_ball_measure(np.array([c]), r * (1 + grow))
    assert big >= small


def test_ball_json_round_trip():
    B = AdmissibleBall(np.array([0.1, 0.2]), 0.3, 2.0)
    back = AdmissibleBall.from_json_dict(B.to_json_dict())
    assert np.array_equal(back.center, B.center)
    assert (back.radius, back.scale) == (B.radius, B.scale)
