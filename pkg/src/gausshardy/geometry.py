"""Admissibility geometry for the Gaussian measure.

Balls ``B(c, r)`` are admissible at scale ``a`` when ``r <= a m(c)`` with
``m(x) = min(1, 1/|x|)``.  Cones are truncated at height ``a m(x)`` and use the
closed inequality there; their aperture condition ``|y - x| < A t`` is strict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import log_ndtr, logsumexp

from .errors import PreconditionError

__all__ = [
    "admissibility",
    "in_local_region",
    "in_region_D",
    "AdmissibleBall",
    "Annulus",
    "annulus_indicator",
    "gaussian_ball_measure",
    "log_gaussian_ball_measure",
    "montecarlo_ball_measure",
    "annulus_measure",
    "ConeSpec",
    "ConeSample",
    "cone_template",
    "cone_points",
    "cone_quadrature",
]

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_PI = 0.5 * math.log(math.pi)


def admissibility(x) -> float | np.ndarray:
    """``m(x) = min(1, 1/|x|)``; accepts one point ``(n,)`` or a batch ``(m, n)``."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    with np.errstate(divide="ignore"):
        out = np.minimum(1.0, 1.0 / r)
    return float(out) if out.ndim == 0 else out


def in_local_region(x, y, a: float) -> bool | np.ndarray:
    """``|x - y| <= a m(x)``.  Not symmetric: the scale is taken at ``x``."""
    if a <= 0:
        raise ValueError("a must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.linalg.norm(x - y, axis=-1) <= a * admissibility(x)
    return bool(out) if np.ndim(out) == 0 else out


def in_region_D(t, x) -> bool | np.ndarray:
    """``t < m(x)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    out = t < admissibility(x)
    return bool(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Balls and annuli


@dataclass(frozen=True)
class AdmissibleBall:
    center: np.ndarray
    radius: float
    scale: float = 2.0

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).reshape(-1)
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        # small slack so that radii computed as a*m(c) are accepted
        if self.radius > self.scale * admissibility(center) * (1 + 1e-12):
            raise PreconditionError(
                f"ball radius {self.radius} exceeds {self.scale} m(c) = "
                f"{self.scale * admissibility(center)}"
            )

    @property
    def dimension(self) -> int:
        return self.center.shape[0]

    def contains(self, x) -> bool | np.ndarray:
        out = np.linalg.norm(np.asarray(x, dtype=float) - self.center, axis=-1) < self.radius
        return bool(out) if np.ndim(out) == 0 else out

    def distance_to_complement(self, y) -> np.ndarray:
        """``d(y, B^c)``, zero outside the ball."""
        d = self.radius - np.linalg.norm(np.asarray(y, dtype=float) - self.center, axis=-1)
        return np.maximum(d, 0.0)

    def measure(self) -> float:
        return gaussian_ball_measure(self.center, self.radius)

    def to_json_dict(self) -> dict:
        return {"center": [float(c) for c in self.center], "radius": float(self.radius),
                "scale": float(self.scale)}

    @classmethod
    def from_json_dict(cls, data) -> "AdmissibleBall":
        try:
            return cls(np.asarray(data["center"], dtype=float), float(data["radius"]),
                       float(data.get("scale", 2.0)))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed ball: {exc}") from exc


@dataclass(frozen=True)
class Annulus:
    """``C_0 = B(c, 2r)``; ``C_k = B(c, 2^{k+1} r) minus B(c, 2^k r)`` for ``k >= 1``."""

    ball: AdmissibleBall
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("annulus index must be non-negative")

    @property
    def inner_radius(self) -> float:
        return 0.0 if self.k == 0 else 2.0**self.k * self.ball.radius

    @property
    def outer_radius(self) -> float:
        return 2.0 ** (self.k + 1) * self.ball.radius


def annulus_indicator(ann: Annulus, x) -> bool | np.ndarray:
    # closed outer boundary, open inner boundary, so annuli tile B(c, 2^{K+1} r)
    d = np.linalg.norm(np.asarray(x, dtype=float) - ann.ball.center, axis=-1)
    out = d <= ann.outer_radius
    if ann.k > 0:
        out = out & (d > ann.inner_radius)
    return bool(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Gaussian measure of balls


def _log_interval(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """``log gamma_1([lo, hi])`` without cancellation in either tail."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    right = lo > 0  # whole interval in the right tail: reflect
    a = np.where(right, -hi, lo) * _SQRT2
    b = np.where(right, -lo, hi) * _SQRT2
    lb = log_ndtr(b)
    la = log_ndtr(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = lb + np.log1p(-np.exp(la - lb))
    return np.where(hi > lo, out, -np.inf)


def _log_ball(centers: np.ndarray, radii: np.ndarray, tol: float) -> np.ndarray:
    """Vectorised ``log gamma(B(c_i, r_i))`` for centers ``(m, n)``.

    One coordinate is integrated by Gauss-Legendre in ``x1 = c1 + r sin(theta)``;
    the chord is a ball one dimension lower.  Orders double until successive
    log-values agree to ``tol``.
    """
    n = centers.shape[1]
    if n == 1:
        return _log_interval(centers[:, 0] - radii, centers[:, 0] + radii)
    prev = None
    order = 16
    while True:
        theta, w = np.polynomial.legendre.leggauss(order)
        theta = theta * (np.pi / 2)
        w = w * (np.pi / 2)
        x1 = centers[:, :1] + radii[:, None] * np.sin(theta)[None, :]
        chord = radii[:, None] * np.cos(theta)[None, :]
        inner = np.repeat(centers[:, 1:], order, axis=0)
        lower = _log_ball(inner, chord.ravel(), tol).reshape(x1.shape)
        with np.errstate(divide="ignore"):
            terms = np.log(w)[None, :] + np.log(chord) - x1**2 - _LOG_SQRT_PI + lower
        cur = logsumexp(terms, axis=1)
        if prev is not None and np.all(np.abs(cur - prev) <= tol):
            return cur
        if order >= 1024:
            return cur
        prev = cur
        order *= 2


def log_gaussian_ball_measure(center, radius, tol: float = 1e-10) -> float | np.ndarray:
    """Natural log of ``gamma(B(center, radius))``; broadcasts over batches of centers."""
    center = np.asarray(center, dtype=float)
    single = center.ndim == 1
    centers = np.atleast_2d(center)
    radii = np.broadcast_to(np.asarray(radius, dtype=float), (centers.shape[0],)).copy()
    if np.any(~(radii > 0)):
        raise ValueError("radius must be positive")
    # beyond |c| + 40 the missing mass is below exp(-1600)
    radii = np.minimum(radii, np.linalg.norm(centers, axis=1) + 40.0)
    out = _log_ball(centers, radii, tol)
    return float(out[0]) if single else out


def gaussian_ball_measure(center, radius, method: str = "quadrature", *, seed: int = 0,
                          samples: int = 200_000) -> float | np.ndarray:
    """``gamma(B(center, radius))``.

    ``method="quadrature"`` is accurate to about 1e-8 relative (exact erf in one
    dimension).  ``method="montecarlo"`` returns only the estimate; use
    :func:`montecarlo_ball_measure` to get its standard error as well.
    """
    if method == "quadrature":
        return np.exp(log_gaussian_ball_measure(center, radius))
    if method == "montecarlo":
        return montecarlo_ball_measure(center, radius, seed=seed, samples=samples)[0]
    raise ValueError(f"unknown method {method!r}")


def montecarlo_ball_measure(center, radius, *, seed: int = 0,
                            samples: int = 200_000) -> tuple[float, float]:
    """Estimate and standard error from ``samples`` draws of ``gamma``."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=float).reshape(-1)
    rng = np.random.default_rng(seed)
    z = rng.normal(scale=np.sqrt(0.5), size=(samples, center.shape[0]))
    hits = (np.linalg.norm(z - center, axis=1) < radius).astype(float)
    p = hits.mean()
    return float(p), float(np.sqrt(max(p * (1 - p), 0.0) / samples))


def annulus_measure(ann: Annulus, cap: float | None = None) -> float:
    """``gamma(C_k(B))``, optionally intersected with ``B(c_B, cap)``."""
    c = ann.ball.center
    outer = ann.outer_radius if cap is None else min(ann.outer_radius, cap)
    inner = ann.inner_radius if cap is None else min(ann.inner_radius, cap)
    big = gaussian_ball_measure(c, outer) if outer > 0 else 0.0
    small = gaussian_ball_measure(c, inner) if inner > 0 else 0.0
    return max(big - small, 0.0)


# ---------------------------------------------------------------------------
# Cones


# relative gap keeping the outer sample ring inside the open cone |y - x| < A t
BOUNDARY_GAP = 1e-9


@dataclass(frozen=True)
class ConeSpec:
    """Discretisation of the admissible cone ``{(y,t): |y-x| < A t, t <= a m(x)}``.

    Sup samples sit on ``t_levels`` log-uniform heights in
    ``[t_min_fraction a m(x), a m(x)]`` (both ends included).  At each height the
    axis point ``y = x`` is sampled together with ``radii`` radial fractions
    ``(1 - BOUNDARY_GAP) i/radii`` of ``A t`` along ``directions`` directions
    (two in one dimension).  The outermost ring sits just inside the cone
    boundary, where the sup of a continuous function over the open cone is
    approached.  :meth:`refined` nests the samples, so discrete sups can only grow.
    """

    aperture: float = 1.0
    admissibility: float = 1.0
    t_levels: int = 24
    radii: int = 4
    directions: int = 16
    t_min_fraction: float = 1.0 / 64
    seed: int = 0

    def __post_init__(self):
        if not (self.aperture > 0 and self.admissibility > 0):
            raise ValueError("aperture and admissibility must be positive")
        if self.t_levels < 1 or self.radii < 0 or self.directions < 1:
            raise ValueError("invalid cone resolution")
        if not 0 < self.t_min_fraction < 1:
            raise ValueError("t_min_fraction must lie in (0, 1)")

    def rays_per_level(self, n: int) -> int:
        dirs = 2 if n == 1 else self.directions
        return 1 + self.radii * dirs

    def refined(self) -> "ConeSpec":
        return replace(self, t_levels=2 * self.t_levels - 1, radii=2 * self.radii,
                       directions=2 * self.directions)

    def with_parameters(self, aperture: float | None = None,
                        admissibility: float | None = None) -> "ConeSpec":
        return replace(self,
                       aperture=self.aperture if aperture is None else aperture,
                       admissibility=self.admissibility if admissibility is None else admissibility)


def _directions(n: int, count: int, seed: int) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        offset = 0.0 if seed == 0 else np.random.default_rng(seed).uniform(0, 2 * np.pi)
        ang = offset + 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    # Fibonacci sphere, rotated by a seeded orthogonal matrix
    i = np.arange(count) + 0.5
    z = 1 - 2 * i / count
    phi = np.pi * (1 + 5**0.5) * i
    d = np.stack([np.sqrt(1 - z**2) * np.cos(phi), np.sqrt(1 - z**2) * np.sin(phi), z], axis=-1)
    if seed:
        q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((3, 3)))
        d = d @ q.T
    return d


def cone_template(spec: ConeSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Height fractions ``(L,)`` of ``a m(x)`` and unit offsets ``(R, n)`` with ``|u| <= 1``.

    A sample is ``t = frac * a m(x)`` and ``y = x + A t u``.
    """
    if spec.t_levels == 1:
        fracs = np.array([1.0])
    else:
        fracs = np.exp(np.linspace(np.log(spec.t_min_fraction), 0.0, spec.t_levels))
        fracs[-1] = 1.0
    offsets = [np.zeros(n)]
    if spec.radii:
        dirs = _directions(n, spec.directions, spec.seed)
        for i in range(1, spec.radii + 1):
            offsets.extend(dirs * ((1 - BOUNDARY_GAP) * i / spec.radii))
    return fracs, np.array(offsets).reshape(-1, n)


@dataclass(frozen=True)
class ConeSample:
    """Points of a discretised cone: ``y`` is ``(m, n)``, ``t`` and ``weight`` are ``(m,)``.

    ``weight`` is the Lebesgue ``dy dt/t`` quadrature weight, or ``None`` for
    sup-only samples.
    """

    y: np.ndarray
    t: np.ndarray
    weight: np.ndarray | None = None

    def __len__(self) -> int:
        return self.t.shape[0]


def cone_points(x, spec: ConeSpec) -> ConeSample:
    """Deterministic sup samples of the cone at ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    fracs, unit = cone_template(spec, x.shape[0])
    t = np.repeat(fracs * spec.admissibility * admissibility(x), unit.shape[0])
    y = x + spec.aperture * t[:, None] * np.tile(unit, (fracs.shape[0], 1))
    return ConeSample(y, t)


def _log_t_nodes(lo: float, hi: float, points: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre in ``log t`` on ``[lo, hi]``: nodes and ``dt/t`` weights."""
    u, w = np.polynomial.legendre.leggauss(points)
    half = 0.5 * (np.log(hi) - np.log(lo))
    mid = 0.5 * (np.log(hi) + np.log(lo))
    return np.exp(mid + half * u), half * w


def cone_quadrature_template(spec: ConeSpec, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Unit-cone rule: height fractions with ``dt/t`` weights and offsets in the unit ball
    with Lebesgue weights (to be scaled by ``(A t)^n``)."""
    fracs, fw = _log_t_nodes(spec.t_min_fraction, 1.0, spec.t_levels)
    if n == 1:
        u, uw = np.polynomial.legendre.leggauss(2 * spec.radii + 2)
        return fracs, fw, u[:, None], uw
    if n == 2:
        rho, rw = np.polynomial.legendre.leggauss(spec.radii + 1)
        rho = 0.5 * (rho + 1)
        rw = 0.5 * rw * rho
        offset = 0.0 if spec.seed == 0 else np.random.default_rng(spec.seed).uniform(0, 2 * np.pi)
        ang = offset + 2 * np.pi * (np.arange(spec.directions) + 0.5) / spec.directions
        d = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        u = (rho[:, None, None] * d[None, :, :]).reshape(-1, 2)
        uw = np.repeat(rw * 2 * np.pi / spec.directions, spec.directions)
        return fracs, fw, u, uw
    # n == 3: tensor GL in a cube clipped to the ball (low accuracy, exploratory only)
    g, gw = np.polynomial.legendre.leggauss(spec.radii + 2)
    pts = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
    wts = np.einsum("i,j,k->ijk", gw, gw, gw).ravel()
    keep = np.linalg.norm(pts, axis=1) < 1
    return fracs, fw, pts[keep], wts[keep]


def cone_quadrature(x, spec: ConeSpec) -> ConeSample:
    """Integration nodes for ``int_{cone at x} g(y,t) dy dt/t``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    n = x.shape[0]
    fracs, fw, unit, uw = cone_quadrature_template(spec, n)
    t = fracs * spec.admissibility * admissibility(x)
    scale = spec.aperture * t
    y = x + (scale[:, None, None] * unit[None, :, :]).reshape(-1, n)
    weight = (fw[:, None] * scale[:, None] ** n * uw[None, :]).ravel()
    return ConeSample(y, np.repeat(t, unit.shape[0]), weight)
