"""Riesz transforms ``R_k = d_k M`` and ``S_k = d*_k M`` with ``M h_beta = |beta|^{-1/2} h_beta``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .atoms import TentAtom, annulus_rule, coefficient_basis, worst_case_l1
from .chaos import ChaosExpansion, MultiIndex, apply_multiplier, hermite_table
from .errors import PreconditionError
from .functionals import EvaluationGrid, default_grid, h1_norms
from .geometry import AdmissibleBall, ConeSpec, admissibility
from .kernels import MIN_TIME, kernel_dK_tilde, one_minus_exp2
from .quadrature import log_time_rule
from .semigroup import _chaos_arrays, _z_rule, heat_gradient

__all__ = [
    "apply_M",
    "RieszQuery",
    "riesz_constant",
    "riesz_apply",
    "riesz_pairing",
    "riesz_adjoint_pairing",
    "RieszRow",
    "RieszL2Report",
    "riesz_l2_norm_experiment",
    "RieszH1Report",
    "riesz_h1_experiment",
    "RieszRemainderReport",
    "riesz_atom_term",
    "riesz_atom_values",
    "worst_riesz_atom_term",
    "riesz_Dc_term",
    "riesz_tail_term",
    "riesz_remainder_bounds",
]

_T_FLOOR = 1e-6


def apply_M(c: ChaosExpansion) -> ChaosExpansion:
    """Multiplier ``|beta|^{-1/2}``, zero on the constant."""
    return apply_multiplier(c, lambda k: 0.0 if k == 0 else 1.0 / math.sqrt(k))


@dataclass(frozen=True)
class RieszQuery:
    k: int
    variant: str = "R"
    path: str = "spectral"
    N: int = 1
    alpha: float = 36.0
    b: float = 1.0
    t_max: float = 20.0

    def __post_init__(self):
        if self.variant not in ("R", "S"):
            raise ValueError("variant must be 'R' or 'S'")
        if self.path not in ("spectral", "integral"):
            raise ValueError("path must be 'spectral' or 'integral'")
        if self.k < 0:
            raise ValueError("axis must be non-negative")
        if self.N < 0 or not self.alpha > 0:
            raise ValueError("need N >= 0 and alpha > 0")


def riesz_constant(N: int, alpha: float) -> float:
    """``C`` with ``|beta|^{-1/2} = C int_0^inf t (-t^2|beta|)^{N+1} e^{-5 t^2 |beta|/alpha} dt/t``.

    The integral equals ``(-1)^{N+1} Gamma(N+3/2) / (2 c^{N+3/2}) |beta|^{-1/2}`` with ``c = 5/alpha``.
    """
    if N < 0 or not alpha > 0:
        raise ValueError("need N >= 0 and alpha > 0")
    c = 5.0 / alpha
    sign = 1.0 if (N + 1) % 2 == 0 else -1.0
    return sign * 2.0 * math.exp((N + 1.5) * math.log(c) - gammaln(N + 1.5))


def _riesz_multiplier_integral(order: int, N: int, alpha: float, t_max: float) -> float:
    """``C int t (-t^2 k)^{N+1} e^{-5 t^2 k/alpha} dt/t`` by quadrature; ``|beta|^{-1/2}`` in the limit."""
    if order == 0:
        return 0.0
    t, w = log_time_rule(_T_FLOOR, t_max)
    c = 5.0 / alpha
    return riesz_constant(N, alpha) * float(w @ (t * (-(t**2) * order) ** (N + 1) * np.exp(-c * order * t**2)))


def _shift(c: ChaosExpansion, k: int, variant: str, weight) -> ChaosExpansion:
    out: dict[MultiIndex, float] = {}
    for beta, cb in c.coeffs.items():
        order = beta.order
        if order == 0:
            continue
        bk = beta[k]
        if variant == "R":
            if bk == 0:
                continue
            key, factor = beta.shifted(k, -1), math.sqrt(2 * bk / order)
        else:
            key, factor = beta.shifted(k, 1), math.sqrt(2 * (bk + 1) / order)
        out[key] = out.get(key, 0.0) + weight(order) * factor * cb
    return ChaosExpansion(c.dimension, out)


def riesz_apply(c: ChaosExpansion, q: RieszQuery) -> ChaosExpansion:
    """``R_k c`` or ``S_k c``.

    The spectral path uses ``c'_{beta - e_k} = sqrt(2 beta_k / |beta|) c_beta`` (R)
    and ``c'_{beta + e_k} = sqrt(2 (beta_k + 1) / |beta|) c_beta`` (S).  The
    integral path replaces ``|beta|^{-1/2}`` by the quadrature of the t-integral
    representation over ``[1e-6, t_max]``.
    """
    if q.k >= c.dimension:
        raise ValueError(f"axis {q.k} out of range for dimension {c.dimension}")
    if q.path == "spectral":
        return _shift(c, q.k, q.variant, lambda order: 1.0)
    cache: dict[int, float] = {}

    def ratio(order):
        if order not in cache:
            cache[order] = _riesz_multiplier_integral(order, q.N, q.alpha, q.t_max) * math.sqrt(order)
        return cache[order]

    return _shift(c, q.k, q.variant, ratio)


def riesz_pairing(f: ChaosExpansion, g: ChaosExpansion, k: int,
                  order: int | None = None) -> tuple[float, float]:
    """``<R_k f, g>`` and ``<f, S_k g>`` by Gauss-Hermite quadrature in physical space."""
    from .chaos import gauss_hermite

    deg = max(f.max_degree, g.max_degree) + 1
    rule = gauss_hermite(order or deg + 4).tensor(f.dimension)
    pts, w = rule
    rf = riesz_apply(f, RieszQuery(k, "R"))
    sg = riesz_apply(g, RieszQuery(k, "S"))
    return float(w @ (rf(pts) * g(pts))), float(w @ (f(pts) * sg(pts)))


def riesz_adjoint_pairing(f: ChaosExpansion, g: ChaosExpansion, k: int,
                          order: int | None = None) -> tuple[float, float]:
    """``<R_k f, g>`` and ``<f, M d*_k g>``; ``M d*_k`` is the L^2(gamma) adjoint of ``R_k``."""
    from .chaos import apply_adjoint_derivative, gauss_hermite

    deg = max(f.max_degree, g.max_degree) + 1
    pts, w = gauss_hermite(order or deg + 4).tensor(f.dimension)
    rf = riesz_apply(f, RieszQuery(k, "R"))
    mg = apply_M(apply_adjoint_derivative(g, k))
    return float(w @ (rf(pts) * g(pts))), float(w @ (f(pts) * mg(pts)))


# ---------------------------------------------------------------------------
# Experiments


@dataclass(frozen=True)
class RieszRow:
    function_id: str
    variant: str
    axis: int
    l2_ratio: float
    l1_h1_ratio: float = math.nan


@dataclass(frozen=True)
class RieszL2Report:
    rows: tuple[RieszRow, ...]
    sup_R: float
    sup_S: float


def riesz_l2_norm_experiment(family) -> RieszL2Report:
    """``||R_k u||_2 / ||u||_2`` and ``||S_k u||_2 / ||u||_2`` for chaos-finite members."""
    rows = []
    for fid, u in _members(family):
        nu = u.norm()
        for k in range(u.dimension):
            for v in ("R", "S"):
                r = riesz_apply(u, RieszQuery(k, v)).norm() / nu if nu > 0 else 0.0
                rows.append(RieszRow(fid, v, k, r))
    return RieszL2Report(tuple(rows),
                         max((r.l2_ratio for r in rows if r.variant == "R"), default=0.0),
                         max((r.l2_ratio for r in rows if r.variant == "S"), default=0.0))


def _members(family):
    out = []
    for i, m in enumerate(family):
        if isinstance(m, ChaosExpansion):
            out.append((f"f{i}", m))
        elif isinstance(getattr(m, "function", None), ChaosExpansion):
            out.append((m.function_id, m.function))
    return out


@dataclass(frozen=True)
class RieszH1Report:
    rows: tuple[RieszRow, ...]
    sup_R: float
    sup_S: float


def riesz_h1_experiment(family, a: float = 2.0, spec: ConeSpec | None = None,
                        grid: EvaluationGrid | None = None) -> RieszH1Report:
    """``||R_k u||_{L^1} / ||u||_{h^1_quad,a}`` (and the same for ``S_k``) over the family."""
    members = _members(family)
    n = members[0][1].dimension
    grid = grid or default_grid(n)
    spec = (spec or ConeSpec()).with_parameters(1.0, a)
    from .functionals import square_plan

    plan = square_plan(grid, spec)
    rows = []
    for fid, u in members:
        quad = h1_norms(u, a, a, spec, grid, plan).quad
        for k in range(n):
            for v in ("R", "S"):
                ru = riesz_apply(u, RieszQuery(k, v))
                l1 = grid.l1(ru(grid.points))
                l2 = ru.norm() / u.norm() if u.norm() > 0 else 0.0
                rows.append(RieszRow(fid, v, k, l2, l1 / quad))
    return RieszH1Report(tuple(rows),
                         max(r.l1_h1_ratio for r in rows if r.variant == "R"),
                         max(r.l1_h1_ratio for r in rows if r.variant == "S"))


# ---------------------------------------------------------------------------
# Remainder operators


def riesz_atom_values(F: TentAtom, N: int, alpha: float, b: float, j: int = 0, k: int = 0,
                      K: int = 3, chunk: int = 32) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes, sign and ``log|value| + log weight`` of the Riesz atom term on an annulus rule."""
    pts, logw, _ = annulus_rule(F.ball, K)
    live = F.profile != 0
    ti, yk = np.nonzero(live)
    t = F.t_samples[ti]
    y = F.y_samples[yk]
    logF = np.log(F.t_weights[ti]) + np.log(F.y_weights[yk]) + np.log(np.abs(F.profile[ti, yk]))
    sF = np.sign(F.profile[ti, yk])
    signs, logs = [], []
    for lo in range(0, pts.shape[0], chunk):
        xs = pts[lo : lo + chunk]
        kv = kernel_dK_tilde(t[None, :], N, alpha, j, k, xs[:, None, :], y[None, :, :])
        mask = t[None, :] < admissibility(xs)[:, None] / b
        val, sgn = logsumexp(kv.log_scale + logF[None, :], b=kv.sign * sF[None, :] * mask,
                             axis=1, return_sign=True)
        signs.append(sgn)
        logs.append(np.where(sgn != 0, val, -np.inf) + logw[lo : lo + chunk])
    return pts, np.concatenate(signs), np.concatenate(logs)


def riesz_atom_term(F: TentAtom, N: int, alpha: float, b: float, j: int = 0, k: int = 0,
                    K: int = 3, chunk: int = 32) -> float:
    """``|| int_0^{m(x)/b} t d_k (t^2L)^N e^{(t^2/alpha)L} t d*_j F(t,.) dt/t ||_{L^1(gamma)}``."""
    _, _, a = riesz_atom_values(F, N, alpha, b, j, k, K, chunk)
    return float(np.exp(logsumexp(a))) if np.any(np.isfinite(a)) else 0.0


def worst_riesz_atom_term(ball: AdmissibleBall, N: int, alpha: float, b: float, j: int = 0,
                          k: int = 0, K: int = 3) -> float:
    """Largest :func:`riesz_atom_term` over all atoms with profiles on ``ball``."""
    basis, G = coefficient_basis(ball)
    cols = np.stack([s * np.exp(a) for _, s, a in
                     (riesz_atom_values(F, N, alpha, b, j, k, K) for F in basis)], axis=1)
    return math.sqrt(0.99 / ball.measure()) * worst_case_l1(cols, G)


def riesz_Dc_term(u: ChaosExpansion, N: int, alpha: float, b: float, points, k: int = 0,
                  a: float = 2.0, z_order: int | None = None, per_decade: int = 8,
                  region: str = "Dc") -> np.ndarray:
    """``sum_j int_0^{m(x)/b} t d_k (t^2L)^N e^{(t^2/alpha)L} t d*_j (1_{D^c} t d_j e^{(a^2t^2/alpha)L} u) dt/t``.

    Same node set and t-range as the D^c remainder of the reproducing formula,
    with the outer kernel differentiated in ``x_k``.  ``region="all"`` drops the
    mask, which turns the j-sum into ``-2 t^2 L`` and gives a spectral check.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[1]
    z, w = _z_rule(n, z_order)
    # Lebesgue weights for y = E x + sqrt(D) z: pi^{n/2} e^{|z|^2} w D^{n/2}
    wz = w * np.exp(np.sum(z**2, axis=-1) + 0.5 * n * math.log(math.pi))
    out = np.zeros(points.shape[0])
    for i, x in enumerate(points):
        hi = admissibility(x) / b
        # below sqrt(alpha MIN_TIME) the D^c mask needs |y| > 1/t, far off any grid
        lo = max(hi * 1e-4, 1.01 * math.sqrt(alpha * MIN_TIME))
        if lo >= hi:
            continue
        ts, tw = log_time_rule(lo, hi, per_decade)
        total = 0.0
        for t, wt in zip(ts, tw):
            s = t**2 / alpha
            E = math.exp(-s)
            D = float(one_minus_exp2(s))
            y = E * x + math.sqrt(D) * z
            mask = t >= admissibility(y) if region == "Dc" else np.ones(y.shape[0], bool)
            if not np.any(mask):
                continue
            ym = y[mask]
            grad = t * heat_gradient(u, a**2 * t**2 / alpha, ym)
            for j in range(n):
                kv = kernel_dK_tilde(t, N, alpha, j, k, x[None, :], ym)
                total += wt * D ** (n / 2) * float(np.sum(wz[mask] * kv.value * grad[:, j]))
        out[i] = total
    return out


def riesz_tail_term(u: ChaosExpansion, N: int, alpha: float, b: float, points, k: int = 0,
                    t_max: float = 20.0) -> np.ndarray:
    """``int_{m(x)/b}^{t_max} t d_k (t^2L)^{N+1} e^{(5t^2/alpha)L} u(x) dt/t`` pointwise."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if k >= u.dimension:
        raise ValueError("axis out of range")
    idx, coef = _chaos_arrays(u)
    keep = idx[:, k] > 0 if idx.size else np.zeros(0, bool)
    if not np.any(keep):
        return np.zeros(points.shape[0])
    idx, coef = idx[keep], coef[keep]
    orders = idx.sum(axis=1)
    lowered = idx.copy()
    lowered[:, k] -= 1
    coef = coef * np.sqrt(2.0 * idx[:, k])
    tab = hermite_table(points, int(idx.max()))
    basis = np.ones((points.shape[0], idx.shape[0]))
    for d in range(u.dimension):
        basis *= tab[:, d, :][:, lowered[:, d]]
    c = 5.0 / alpha
    out = np.zeros(points.shape[0])
    cache: dict[float, np.ndarray] = {}
    for i, lo in enumerate(admissibility(points) / b):
        key = float(lo)
        if key not in cache:
            if lo >= t_max:
                cache[key] = np.zeros(orders.shape)
            else:
                t, w = log_time_rule(lo, t_max)
                tk = t[:, None] ** 2 * orders[None, :]
                cache[key] = w @ (t[:, None] * (-tk) ** (N + 1) * np.exp(-c * tk))
        out[i] = basis[i] @ (cache[key] * coef)
    return out


@dataclass(frozen=True)
class RieszRemainderReport:
    """L^1(gamma) norms of the three remainder operators and their dominators."""

    atom_term: float | None
    dc_term: float
    tail_term: float
    u_l1: float

    @property
    def dc_ratio(self) -> float:
        return self.dc_term / self.u_l1 if self.u_l1 > 0 else 0.0

    @property
    def tail_ratio(self) -> float:
        return self.tail_term / self.u_l1 if self.u_l1 > 0 else 0.0


def riesz_remainder_bounds(u: ChaosExpansion, N: int, alpha: float, b: float,
                           atom: TentAtom | None = None, k: int = 0,
                           grid: EvaluationGrid | None = None,
                           dc_grid: EvaluationGrid | None = None) -> RieszRemainderReport:
    """Measured norms: atom term against 1, the D^c and tail terms against ``||u||_1``."""
    if N < 0 or not alpha > 1 or not b > 0:
        raise PreconditionError("need N >= 0, alpha > 1, b > 0")
    grid = grid or default_grid(u.dimension)
    dc_grid = dc_grid or grid
    atom_l1 = None if atom is None else riesz_atom_term(atom, N, alpha, b, 0, k)
    dc = dc_grid.l1(riesz_Dc_term(u, N, alpha, b, dc_grid.points, k))
    tail = grid.l1(riesz_tail_term(u, N, alpha, b, grid.points, k))
    return RieszRemainderReport(atom_l1, dc, tail, grid.l1(u(grid.points)))
