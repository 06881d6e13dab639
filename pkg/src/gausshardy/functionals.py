"""Maximal and square functionals on admissible cones, and the h^1 norms built from them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chaos import ChaosExpansion, GridFunction, multi_indices, random_expansion
from .geometry import (
    ConeSpec,
    admissibility,
    cone_quadrature_template,
    cone_template,
    log_gaussian_ball_measure,
)
from .quadrature import gamma_grid, legendre
from .semigroup import GaussianBump, _z_rule, heat_gradient, heat_values
from .kernels import one_minus_exp2

__all__ = [
    "EvaluationGrid",
    "default_grid",
    "maximal_function",
    "maximal_local",
    "maximal_global",
    "glob_tau",
    "cone_split",
    "maximal_full_kernel",
    "hl_maximal",
    "SquarePlan",
    "square_plan",
    "square_function",
    "H1Norms",
    "h1_norms",
    "l1_norm",
    "FamilyMember",
    "test_family",
]

_LOG_PI = math.log(math.pi)


@dataclass(frozen=True)
class EvaluationGrid:
    """Points with gamma weights on which L^1(gamma) norms are computed."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def l1(self, values) -> float:
        return float(self.weights @ np.abs(values))


def default_grid(n: int) -> EvaluationGrid:
    """Composite Gauss-Legendre grid with gamma weights; kinks of ``m`` are tolerated."""
    if n == 1:
        pts, w = gamma_grid(1, 6.0, 24, 8)
    elif n == 2:
        pts, w = gamma_grid(2, 5.0, 10, 4)
    else:
        pts, w = gamma_grid(n, 4.0, 4, 4)
    return EvaluationGrid(pts, w)


def _as_points(points) -> np.ndarray:
    if isinstance(points, EvaluationGrid):
        return points.points
    return np.atleast_2d(np.asarray(points, dtype=float))


def _weights(points):
    return points.weights if isinstance(points, EvaluationGrid) else None


def l1_norm(u, grid: EvaluationGrid) -> float:
    """``||u||_{L^1(gamma)}`` on the grid; ``u`` is an expansion or a vectorised callable."""
    return grid.l1(u(grid.points))


def _cone_samples(points: np.ndarray, spec: ConeSpec):
    """All sup samples for a batch of base points: ``t`` is ``(m, S)``, ``y`` is ``(m, S, n)``."""
    n = points.shape[1]
    fracs, unit = cone_template(spec, n)
    base = spec.admissibility * admissibility(points)  # (m,)
    t_lvl = base[:, None] * fracs[None, :]  # (m, L)
    t = np.repeat(t_lvl, unit.shape[0], axis=1)  # (m, L*R)
    offs = np.tile(unit, (fracs.shape[0], 1))  # (L*R, n)
    y = points[:, None, :] + spec.aperture * t[:, :, None] * offs[None, :, :]
    return t, y


def maximal_function(u, spec: ConeSpec, points, chunk: int = 16) -> GridFunction:
    """Discrete ``sup |e^{t^2 L} u(y)|`` over the cone samples at each point."""
    pts = _as_points(points)
    n = pts.shape[1]
    out = np.empty(pts.shape[0])
    for lo in range(0, pts.shape[0], chunk):
        t, y = _cone_samples(pts[lo : lo + chunk], spec)
        vals = heat_values(u, (t**2).ravel(), y.reshape(-1, n)).reshape(t.shape)
        out[lo : lo + chunk] = np.max(np.abs(vals), axis=1)
    return GridFunction(pts, out, _weights(points))


def glob_tau(a: float, A: float) -> float:
    """Width of the local region separating the global part of the maximal function."""
    return (1 + a * A) * (1 + 2 * a * A) / 2


def cone_split(u, spec: ConeSpec, points, tau: float | None = None,
               z_order: int | None = None, chunk: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Per cone sample, the local and global parts of ``int M_{t^2}(y,z)|u(z)| dz``.

    Both parts use the same nodes ``z = e^{-s} y + sqrt(1-e^{-2s}) zeta``, so
    they add up to the unmasked integral sample by sample.  Returns two
    ``(m, S)`` arrays.
    """
    if not callable(u):
        raise ValueError("cone_split needs a vectorised function")
    pts = _as_points(points)
    n = pts.shape[1]
    if tau is None:
        tau = glob_tau(spec.admissibility, spec.aperture)
    z, w = _z_rule(n, z_order)
    local, glob = [], []
    for lo in range(0, pts.shape[0], chunk):
        t, y = _cone_samples(pts[lo : lo + chunk], spec)
        s = (t**2).ravel()
        yy = y.reshape(-1, n)
        E = np.exp(-s)[:, None, None]
        sd = np.sqrt(one_minus_exp2(s))[:, None, None]
        zz = E * yy[:, None, :] + sd * z[None, :, :]  # (S, Z, n)
        vals = np.abs(np.asarray(u(zz.reshape(-1, n)))).reshape(zz.shape[:2])
        near = np.linalg.norm(zz - yy[:, None, :], axis=-1) <= tau * admissibility(yy)[:, None]
        local.append(((vals * near) @ w).reshape(t.shape))
        glob.append(((vals * ~near) @ w).reshape(t.shape))
    return np.concatenate(local), np.concatenate(glob)


def _masked_maximal(u, spec, points, region, tau, z_order) -> GridFunction:
    local, glob = cone_split(u, spec, points, tau, z_order)
    vals = {"local": local, "global": glob, "all": local + glob}[region]
    return GridFunction(_as_points(points), vals.max(axis=1), _weights(points))


def maximal_global(u, A: float, a: float, points, spec: ConeSpec | None = None,
                   tau: float | None = None, z_order: int | None = None) -> GridFunction:
    """Cone sup of ``int M_{t^2}(y,z) 1[|y-z| > tau m(y)] |u(z)| dz``."""
    spec = (spec or ConeSpec()).with_parameters(A, a)
    return _masked_maximal(u, spec, points, "global", tau, z_order)


def maximal_local(u, A: float, a: float, points, spec: ConeSpec | None = None,
                  tau: float | None = None, z_order: int | None = None) -> GridFunction:
    """Companion of :func:`maximal_global` restricted to ``|y-z| <= tau m(y)``."""
    spec = (spec or ConeSpec()).with_parameters(A, a)
    return _masked_maximal(u, spec, points, "local", tau, z_order)


def maximal_full_kernel(u, A: float, a: float, points, spec: ConeSpec | None = None,
                        z_order: int | None = None) -> GridFunction:
    """Cone sup of ``e^{t^2 L}|u|`` on the same node set used by the masked variants."""
    spec = (spec or ConeSpec()).with_parameters(A, a)
    return _masked_maximal(u, spec, points, "all", None, z_order)


def hl_maximal(u, points, r_grid=None, nodes: int = 48) -> GridFunction:
    """Discrete sup over ``r_grid`` of gamma-averages of ``|u|`` on ``B(x, r)``.

    The average is a ratio of two quadratures on the same nodes, so the
    normalisation by ``gamma(B(x,r))`` is consistent with the numerator.
    """
    pts = _as_points(points)
    n = pts.shape[1]
    if r_grid is None:
        r_grid = np.geomspace(0.02, 12.0, 40)
    r_grid = np.asarray(r_grid, dtype=float)
    if n == 1:
        g, gw = legendre(nodes, -1.0, 1.0)
        unit, uw = g[:, None], gw
    else:
        rho, rw = legendre(nodes // 2, 0.0, 1.0)
        if n == 2:
            ang = 2 * np.pi * (np.arange(nodes) + 0.5) / nodes
            d = np.stack([np.cos(ang), np.sin(ang)], -1)
            unit = (rho[:, None, None] * d[None]).reshape(-1, 2)
            uw = np.repeat(rw * rho * 2 * np.pi / nodes, nodes)
        else:
            g, gw = legendre(nodes // 4, -1.0, 1.0)
            cube = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
            cw = np.einsum("i,j,k->ijk", gw, gw, gw).ravel()
            keep = np.linalg.norm(cube, axis=1) < 1
            unit, uw = cube[keep], cw[keep]
    out = np.zeros(pts.shape[0])
    for i, x in enumerate(pts):
        z = x[None, None, :] + r_grid[:, None, None] * unit[None, :, :]  # (R, U, n)
        logdens = -np.sum(z**2, axis=-1) + np.sum(x**2)
        dens = np.exp(logdens - logdens.max(axis=1, keepdims=True)) * uw[None, :]
        vals = np.abs(np.asarray(u(z.reshape(-1, n)))).reshape(z.shape[:2])
        avg = np.sum(vals * dens, axis=1) / np.sum(dens, axis=1)
        out[i] = avg.max()
    return GridFunction(pts, out, _weights(points))


# ---------------------------------------------------------------------------
# Square function


@dataclass(frozen=True)
class SquarePlan:
    """Cone quadrature for all base points, with ``dgamma(y)/gamma(B(y,t)) dt/t`` weights.

    Built once per (grid, spec) and shared by every function of a family.
    """

    y: np.ndarray  # (m, S, n)
    t: np.ndarray  # (m, S)
    weight: np.ndarray  # (m, S)
    spec: ConeSpec


def square_plan(points, spec: ConeSpec) -> SquarePlan:
    pts = _as_points(points)
    m, n = pts.shape
    fracs, fw, unit, uw = cone_quadrature_template(spec, n)
    base = spec.admissibility * admissibility(pts)
    t_lvl = base[:, None] * fracs[None, :]  # (m, L)
    scale = spec.aperture * t_lvl
    y = pts[:, None, None, :] + scale[:, :, None, None] * unit[None, None, :, :]
    leb = fw[None, :, None] * scale[:, :, None] ** n * uw[None, None, :]
    t = np.broadcast_to(t_lvl[:, :, None], leb.shape)
    y = y.reshape(m, -1, n)
    t = t.reshape(m, -1)
    leb = leb.reshape(m, -1)
    flat_y, flat_t = y.reshape(-1, n), t.ravel()
    logball = np.concatenate([
        np.atleast_1d(log_gaussian_ball_measure(flat_y[lo : lo + 20000], flat_t[lo : lo + 20000]))
        for lo in range(0, flat_t.shape[0], 20000)
    ]).reshape(t.shape)
    logdens = -np.sum(y**2, axis=-1) - 0.5 * n * _LOG_PI
    weight = leb * np.exp(logdens - logball)
    return SquarePlan(y, np.ascontiguousarray(t), weight, spec)


def square_function(u, a: float, points, spec: ConeSpec | None = None,
                    plan: SquarePlan | None = None, chunk: int = 20000) -> GridFunction:
    """``S_a u(x)`` by cone quadrature of ``|t grad e^{t^2 L} u(y)|^2 / gamma(B(y,t))``."""
    pts = _as_points(points)
    if plan is None:
        spec = (spec or ConeSpec()).with_parameters(1.0, a)
        plan = square_plan(pts, spec)
    m, S, n = plan.y.shape
    if m != pts.shape[0]:
        raise ValueError("plan was built for a different grid")
    out = np.empty(m)
    step = max(1, chunk // S)
    for lo in range(0, m, step):
        t = plan.t[lo : lo + step].ravel()
        grad = heat_gradient(u, t**2, plan.y[lo : lo + step].reshape(-1, n))
        sq = (t**2 * np.sum(grad**2, axis=-1)).reshape(-1, S)
        out[lo : lo + step] = np.sqrt(np.sum(plan.weight[lo : lo + step] * sq, axis=1))
    return GridFunction(pts, out, _weights(points))


# ---------------------------------------------------------------------------
# Norms


@dataclass(frozen=True)
class H1Norms:
    quad: float
    max: float
    ratio: float


def h1_norms(u, a: float, a_prime: float, spec: ConeSpec | None = None,
             grid: EvaluationGrid | None = None, plan: SquarePlan | None = None) -> H1Norms:
    """``||S_a u||_1 + ||u||_1`` and ``||T*_{a'} u||_1`` on a common grid; ``ratio = max/quad``."""
    n = u.dimension
    grid = grid or default_grid(n)
    spec = spec or ConeSpec()
    square = square_function(u, a, grid, spec.with_parameters(1.0, a), plan)
    maximal = maximal_function(u, spec.with_parameters(1.0, a_prime), grid)
    quad = grid.l1(square.values) + grid.l1(u(grid.points))
    mx = grid.l1(maximal.values)
    return H1Norms(quad, mx, mx / quad if quad > 0 else math.inf)


# ---------------------------------------------------------------------------
# Test family


@dataclass(frozen=True)
class FamilyMember:
    function_id: str
    function: object

    @property
    def dimension(self) -> int:
        return self.function.dimension


def test_family(n: int, seed: int = 0) -> list[FamilyMember]:
    """Twenty fixed functions: ``h_beta`` with ``|beta| <= 3``, Gaussian bumps centred at
    distance 0, 1, 2, 3 from the origin, and seeded random expansions of degree <= 5."""
    out: list[FamilyMember] = []
    for beta in multi_indices(n, 3):
        if len(out) >= 10:
            break
        out.append(FamilyMember("h" + "".join(map(str, beta)), ChaosExpansion.basis(beta)))
    direction = np.ones(n) / math.sqrt(n)
    for r in (0, 1, 2, 3):
        out.append(FamilyMember(f"bump{r}", GaussianBump(r * direction, 0.5)))
    rng = np.random.default_rng(seed)
    k = 0
    while len(out) < 20:
        out.append(FamilyMember(f"rand{k}", random_expansion(n, 5, rng)))
        k += 1
    return out


# pytest would otherwise try to collect the family builder
test_family.__test__ = False
