"""Tent-space atoms, the tent norm, and the molecules produced from atoms.

Molecule values decay like ``exp(-c 4^k)`` on the dyadic annuli around the
ball, far below double precision, so they are carried as sign and log-magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .chaos import GridFunction, basis_matrix, multi_indices
from .errors import ConstructionError, PreconditionError
from .geometry import (
    AdmissibleBall,
    Annulus,
    admissibility,
    annulus_indicator,
    gaussian_ball_measure,
    log_gaussian_ball_measure,
)
from .kernels import kernel_Ktilde
from .quadrature import composite_legendre, legendre

__all__ = [
    "TentField",
    "TentAtom",
    "make_atom",
    "random_atom_ball",
    "combine_atoms",
    "tent_norm",
    "LogGrid",
    "MoleculeReport",
    "annulus_rule",
    "atom_to_molecule",
    "check_molecule",
    "relation_error",
    "atom_window_values",
    "coefficient_basis",
    "worst_case_l1",
    "worst_case_l2",
    "worst_window_term",
    "worst_k0_constant",
    "atom_window_term",
]

_LOG_PI = math.log(math.pi)


def _box_rule(lo: np.ndarray, hi: np.ndarray, per_axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor composite Gauss-Legendre on a box with Lebesgue weights."""
    panels = max(1, per_axis // 8)
    axes = [composite_legendre(a, b, panels, 8) for a, b in zip(lo, hi)]
    grids = np.meshgrid(*[x for x, _ in axes], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    w = axes[0][1]
    for _, wk in axes[1:]:
        w = np.multiply.outer(w, wk)
    return pts, np.asarray(w).ravel()


def _log_t_rule(lo: float, hi: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    u, w = legendre(order, math.log(lo), math.log(hi))
    return np.exp(u), w


# ---------------------------------------------------------------------------
# Fields and atoms


@dataclass(frozen=True)
class TentField:
    """A field ``F(t, y)`` sampled on a product rule.

    ``values[i, k] = F(t[i], y[k])``; ``t_weights`` integrate ``dt/t`` and
    ``y_weights`` integrate Lebesgue ``dy``.
    """

    t: np.ndarray
    t_weights: np.ndarray
    y: np.ndarray
    y_weights: np.ndarray
    values: np.ndarray

    def scaled(self, factor: float) -> "TentField":
        return TentField(self.t, self.t_weights, self.y, self.y_weights, factor * self.values)

    def l2_squared(self) -> float:
        """``int int |F|^2 dy dt/t``."""
        return float(self.t_weights @ (self.values**2) @ self.y_weights)


def _bump(s2):
    """``exp(1 - 1/(1 - s^2))`` for ``s^2 < 1``, else 0 (smooth, flat at the edge)."""
    s2 = np.asarray(s2, dtype=float)
    out = np.zeros_like(s2)
    inside = s2 < 1
    out[inside] = np.exp(1 - 1 / (1 - s2[inside]))
    return out


@dataclass(frozen=True)
class TentAtom:
    """A smooth atom supported in the tent over a ball of scale 2.

    ``F(t, y) = scale * P(t/T, (y-c)/rho) * bump(|y-c|/rho) * bump(log2(2t/T))``
    with ``rho = r/2`` and ``T = min(r/2, 1, 1/(|c| + rho))``, so the support
    lies in ``{t <= min(d(y, B^c), m(y))}``.
    """

    ball: AdmissibleBall
    coefficients: np.ndarray  # (2, K): rows for t-degree 0 and 1, columns for y-monomials
    scale: float
    t_samples: np.ndarray
    t_weights: np.ndarray
    y_samples: np.ndarray
    y_weights: np.ndarray
    profile: np.ndarray  # (len(t_samples), len(y_samples))
    norm_certificate: float

    @property
    def dimension(self) -> int:
        return self.ball.dimension

    @property
    def rho(self) -> float:
        return 0.5 * self.ball.radius

    @property
    def height(self) -> float:
        return _height(self.ball)

    def __call__(self, t, y) -> np.ndarray:
        """Closed-form ``F`` on the outer product of ``t`` (shape ``(p,)``) and ``y`` (``(q, n)``)."""
        return self.scale * _raw_profile(self.ball, self.coefficients, np.asarray(t, float),
                                         np.atleast_2d(np.asarray(y, float)))

    def field(self) -> TentField:
        return TentField(self.t_samples, self.t_weights, self.y_samples, self.y_weights, self.profile)

    def support_box(self) -> tuple[float, float, np.ndarray, np.ndarray]:
        T = self.height
        return T / 4, T, self.ball.center - self.rho, self.ball.center + self.rho

    def to_json_dict(self) -> dict:
        return {
            "ball": self.ball.to_json_dict(),
            "coefficients": self.coefficients.tolist(),
            "scale": self.scale,
            "t_samples": self.t_samples.tolist(),
            "y_samples": self.y_samples.tolist(),
            "profile": self.profile.tolist(),
            "norm_certificate": self.norm_certificate,
        }

    @classmethod
    def from_json_dict(cls, data, y_nodes: int | None = None) -> "TentAtom":
        try:
            ball = AdmissibleBall.from_json_dict(data["ball"])
            coeffs = np.asarray(data["coefficients"], dtype=float)
            scale = float(data["scale"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed atom: {exc}") from exc
        t_nodes = len(data.get("t_samples", [])) or 16
        if y_nodes is None:
            y_nodes = round(len(data.get("y_samples", [])) ** (1 / ball.dimension)) or 64
        return _assemble(ball, coeffs, t_nodes, y_nodes, scale=scale)


def _height(ball: AdmissibleBall) -> float:
    rho = 0.5 * ball.radius
    return min(rho, 1.0, 1.0 / (np.linalg.norm(ball.center) + rho))


def _y_monomials(n: int) -> list[tuple[int, ...]]:
    return [b for b in multi_indices(n, 2)]


def _raw_profile(ball: AdmissibleBall, coeffs: np.ndarray, t: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = ball.dimension
    rho = 0.5 * ball.radius
    T = _height(ball)
    tau = t / T
    eta = (y - ball.center) / rho
    mono = np.stack([np.prod(eta**np.asarray(b), axis=-1) for b in _y_monomials(n)], axis=-1)
    poly = coeffs[0][None, :] + tau[:, None, None] * coeffs[1][None, None, :]  # (p, 1|q, K)
    poly = np.sum(poly * mono[None, :, :], axis=-1)
    ybump = _bump(np.sum(eta**2, axis=-1))
    tbump = _bump(np.log2(2 * tau) ** 2)
    return poly * ybump[None, :] * tbump[:, None]


def _assemble(ball, coeffs, t_nodes, y_nodes, scale=None) -> TentAtom:
    T = _height(ball)
    rho = 0.5 * ball.radius
    t, tw = _log_t_rule(T / 4, T, t_nodes)
    y, yw = _box_rule(ball.center - rho, ball.center + rho, y_nodes)
    raw = _raw_profile(ball, coeffs, t, y)
    energy = float(tw @ raw**2 @ yw)
    if not energy > 0 or not np.isfinite(energy):
        raise ConstructionError("atom support is empty at the sampled resolution")
    if scale is None:
        scale = math.sqrt(0.99 / (ball.measure() * energy))
    profile = scale * raw
    return TentAtom(ball, coeffs, scale, t, tw, y, yw, profile, scale**2 * energy)


def make_atom(ball: AdmissibleBall, seed: int, t_nodes: int = 12,
              y_nodes: int | None = None) -> TentAtom:
    """Seeded smooth atom normalised to ``int int |F|^2 dy dt/t = 0.99/gamma(B)``."""
    if abs(ball.scale - 2.0) > 1e-12:
        raise PreconditionError("atoms are built over balls of scale 2")
    if ball.radius < 1e-8:
        raise ConstructionError("ball too small to carry an atom")
    n = ball.dimension
    if y_nodes is None:
        y_nodes = 128 if n == 1 else 48
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal((2, len(_y_monomials(n))))
    return _assemble(ball, coeffs, t_nodes, y_nodes)


def random_atom_ball(n: int, rng: np.random.Generator, box: float = 2.0,
                     fraction: tuple[float, float] = (0.1, 0.5)) -> AdmissibleBall:
    """Ball of scale 2 with centre uniform in ``[-box, box]^n`` and radius a random
    fraction of ``2 m(c)``."""
    c = rng.uniform(-box, box, n)
    r = 2 * admissibility(c) * rng.uniform(*fraction)
    return AdmissibleBall(c, float(r), 2.0)


def combine_atoms(atoms, coefficients, t_nodes: int = 24, y_nodes: int | None = None) -> TentField:
    """``sum c_i F_i`` sampled on one product rule covering all supports."""
    atoms = list(atoms)
    n = atoms[0].dimension
    if y_nodes is None:
        y_nodes = 256 if n == 1 else 48
    boxes = [a.support_box() for a in atoms]
    t, tw = _log_t_rule(min(b[0] for b in boxes), max(b[1] for b in boxes), t_nodes)
    lo = np.min([b[2] for b in boxes], axis=0)
    hi = np.max([b[3] for b in boxes], axis=0)
    y, yw = _box_rule(lo, hi, y_nodes)
    vals = sum(c * a(t, y) for a, c in zip(atoms, coefficients))
    return TentField(t, tw, y, yw, vals)


def tent_norm(F, x_nodes: int | None = None) -> float:
    """``int (int_{Gamma_x} |F(t,y)|^2 / gamma(B(y,t)) dgamma(y) dt/t)^{1/2} dgamma(x)``.

    The cone is ``{|y-x| < t, t <= m(x)}``.  The outer integral runs over a box
    containing every ``x`` whose cone meets the support of ``F``.
    """
    field = F.field() if isinstance(F, TentAtom) else F
    n = field.y.shape[1]
    if not np.any(field.values):
        return 0.0
    if x_nodes is None:
        x_nodes = 256 if n == 1 else 32
    tmax = float(field.t.max())
    x, xw = _box_rule(field.y.min(axis=0) - tmax, field.y.max(axis=0) + tmax, x_nodes)
    logxw = np.log(xw) - np.sum(x**2, axis=-1) - 0.5 * n * _LOG_PI
    nt, ny = field.values.shape
    yy = np.broadcast_to(field.y[None], (nt, ny, n)).reshape(-1, n)
    tt = np.repeat(field.t, ny)
    logball = log_gaussian_ball_measure(yy, tt).reshape(nt, ny)
    dens = np.exp(-np.sum(field.y**2, axis=-1)[None, :] - 0.5 * n * _LOG_PI - logball)
    g = field.t_weights[:, None] * field.y_weights[None, :] * dens * field.values**2  # (nt, ny)
    mx = admissibility(x)
    total = 0.0
    for i in range(x.shape[0]):
        inside = np.linalg.norm(field.y - x[i], axis=-1)[None, :] < field.t[:, None]
        inside &= (field.t <= mx[i])[:, None]
        inner = float(np.sum(g * inside))
        if inner > 0:
            total += math.exp(logxw[i]) * math.sqrt(inner)
    return total


# ---------------------------------------------------------------------------
# Molecules


@dataclass(frozen=True)
class LogGrid:
    """Values ``sign * exp(log_abs)`` on points with log gamma-weights."""

    points: np.ndarray
    log_weights: np.ndarray
    sign: np.ndarray
    log_abs: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return self.sign * np.exp(self.log_abs)

    def to_grid(self) -> GridFunction:
        return GridFunction(self.points, self.values, np.exp(self.log_weights))

    @classmethod
    def from_grid(cls, g: GridFunction) -> "LogGrid":
        if g.weights is None:
            raise ValueError("grid function needs quadrature weights")
        with np.errstate(divide="ignore"):
            return cls(g.points, np.log(g.weights), np.sign(g.values), np.log(np.abs(g.values)))

    def log_l2(self, mask=None) -> float:
        """``log ||1_mask f||_{L^2(gamma)}``; ``-inf`` for a vanishing restriction."""
        a = 2 * self.log_abs + self.log_weights
        if mask is not None:
            a = a[mask]
        if a.size == 0 or np.all(a == -np.inf):
            return -math.inf
        return 0.5 * float(logsumexp(a))


@dataclass(frozen=True)
class MoleculeReport:
    """Annulus norms of ``f`` and ``f~`` around ``ball`` (natural logs, ``k = 0..K``).

    ``fitted_decay_rate`` is the least-squares slope of
    ``log(||1_{C_k} f|| gamma(B)^{1/2})`` against ``-4^k`` over ``k = 1..4``.
    ``holds`` records whether the three molecule clauses hold at ``rate``.
    """

    ball: AdmissibleBall
    N: int
    log_annulus_norms: tuple[float, ...]
    log_tilde_annulus_norms: tuple[float, ...]
    fitted_decay_rate: float
    k0_constant: float
    rate: float
    holds: bool
    relation_error: float | None = None

    @property
    def annulus_norms(self) -> np.ndarray:
        return np.exp(np.asarray(self.log_annulus_norms))

    @property
    def tilde_annulus_norms(self) -> np.ndarray:
        return np.exp(np.asarray(self.log_tilde_annulus_norms))

    def csv_rows(self) -> list[tuple[int, float, float]]:
        return [(k, float(a), float(b)) for k, (a, b) in
                enumerate(zip(self.annulus_norms, self.tilde_annulus_norms))]


def annulus_rule(ball: AdmissibleBall, K: int = 4, panels: int = 16,
                 angles: int = 48) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Points, log gamma-weights and annulus labels covering ``B(c, 2^{K+1} r)``.

    ``C_0`` gets a uniform composite rule; ``C_k`` panels are graded towards the
    inner edge, where the molecule mass of the annulus concentrates.
    """
    n = ball.dimension
    r = ball.radius
    radial, rweights, labels = [], [], []
    for k in range(K + 1):
        if k == 0:
            breaks = np.linspace(0.0, 2 * r, 4 * panels + 1)
        else:
            lo, hi = 2.0**k * r, 2.0 ** (k + 1) * r
            breaks = lo + (hi - lo) * np.concatenate([[0.0], np.geomspace(1e-5, 1.0, panels)])
        x, w = composite_legendre(0, 0, 0, 8, breaks=breaks)
        radial.append(x)
        rweights.append(w)
        labels.append(np.full(x.shape, k))
    rho = np.concatenate(radial)
    rw = np.concatenate(rweights)
    lab = np.concatenate(labels)
    c = ball.center
    if n == 1:
        pts = np.concatenate([c[0] - rho, c[0] + rho])[:, None]
        w = np.concatenate([rw, rw])
        lab = np.concatenate([lab, lab])
    elif n == 2:
        ang = 2 * np.pi * (np.arange(angles) + 0.5) / angles
        d = np.stack([np.cos(ang), np.sin(ang)], -1)
        pts = (c + rho[:, None, None] * d[None]).reshape(-1, 2)
        w = np.repeat(rw * rho * 2 * np.pi / angles, angles)
        lab = np.repeat(lab, angles)
    else:
        raise ValueError("molecule grids are available for n <= 2")
    logw = np.log(w) - np.sum(pts**2, axis=-1) - 0.5 * n * _LOG_PI
    return pts, logw, lab


def _apply_dual(atom: TentAtom, N: int, alpha: float, j: int, x: np.ndarray,
                power: int, chunk: int, t_window=None) -> tuple[np.ndarray, np.ndarray]:
    """Sign and log of ``int t^{power} int Ktilde_N(t; x, y) F(t, y) dy dt/t``.

    ``t_window(x)`` may return per-point ``(lo, hi)`` arrays restricting ``t``.
    """
    F = atom.profile
    live = F != 0
    sign_out = np.empty(x.shape[0])
    log_out = np.empty(x.shape[0])
    ti, yk = np.nonzero(live)
    t = atom.t_samples[ti]
    y = atom.y_samples[yk]
    logw = (np.log(atom.t_weights[ti]) + np.log(atom.y_weights[yk]) + np.log(np.abs(F[ti, yk]))
            + power * np.log(t))
    sF = np.sign(F[ti, yk])
    for lo in range(0, x.shape[0], chunk):
        xs = x[lo : lo + chunk]
        kv = kernel_Ktilde(t[None, :], N, alpha, j, xs[:, None, :], y[None, :, :])
        a = kv.log_scale + logw[None, :]
        b = kv.sign * sF[None, :]
        if t_window is not None:
            tlo, thi = t_window(xs)
            b = b * ((t[None, :] >= tlo[:, None]) & (t[None, :] <= thi[:, None]))
        val, sgn = logsumexp(a, b=b, axis=1, return_sign=True)
        log_out[lo : lo + chunk] = np.where(sgn != 0, val, -np.inf)
        sign_out[lo : lo + chunk] = sgn
    return sign_out, log_out


def atom_to_molecule(F: TentAtom, N: int, alpha: float, j: int = 0, K: int = 4,
                     chunk: int = 32) -> tuple[GridFunction, GridFunction, MoleculeReport]:
    """``f = int (t^2 L)^N e^{(t^2/alpha) L} t d*_j F(t,.) dt/t`` and
    ``f~ = int t^{2N+1} e^{(t^2/alpha) L} d*_j F(t,.) dt/t`` on an annulus grid.

    The report carries the measured molecule quantities and the relation error
    between ``analyze(f)`` and ``(-|beta|)^N analyze(f~)``.
    """
    if N < 1:
        raise PreconditionError("N must be at least 1")
    if not 0 <= j < F.dimension:
        raise ValueError(f"axis {j} out of range")
    pts, logw, _ = annulus_rule(F.ball, K)
    sf, lf = _apply_dual(F, N, alpha, j, pts, 0, chunk)
    st, lt = _apply_dual(F, 0, alpha, j, pts, 2 * N, chunk)
    f = LogGrid(pts, logw, sf, lf)
    ft = LogGrid(pts, logw, st, lt)
    err = relation_error(f, ft, N)
    report = check_molecule(f, ft, F.ball, N, 0.0, K=K, relation=err)
    return f.to_grid(), ft.to_grid(), report


def atom_window_values(F: TentAtom, N: int, alpha: float, b: float, j: int = 0, K: int = 3,
                       chunk: int = 32) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes, sign and ``log|value| + log weight`` of the windowed term on an annulus rule."""
    pts, logw, _ = annulus_rule(F.ball, K)
    window = lambda xs: (admissibility(xs) / b, np.full(xs.shape[0], 2.0))
    sgn, logf = _apply_dual(F, N, alpha, j, pts, 0, chunk, window)
    return pts, sgn, logf + logw


def atom_window_term(F: TentAtom, N: int, alpha: float, b: float, j: int = 0, K: int = 3,
                     chunk: int = 32) -> float:
    """``|| int 1_{[m(x)/b, 2]}(t) t^{2N+1} L^N e^{(t^2/alpha)L} d*_j F(t,.) dt/t ||_{L^1(gamma)}``."""
    _, _, a = atom_window_values(F, N, alpha, b, j, K, chunk)
    return float(np.exp(logsumexp(a))) if np.any(np.isfinite(a)) else 0.0


def coefficient_basis(ball: AdmissibleBall, t_nodes: int = 12,
                      y_nodes: int | None = None) -> tuple[list[TentAtom], np.ndarray]:
    """Unscaled atoms for each profile coefficient and their energy Gram matrix.

    Every atom over ``ball`` is ``sqrt(0.99 / (gamma(B) c^T G c)) sum_i c_i F_i``,
    so linear images of atoms can be maximised over ``c`` exactly.
    """
    n = ball.dimension
    if y_nodes is None:
        y_nodes = 128 if n == 1 else 48
    shape = (2, len(_y_monomials(n)))
    eye = np.eye(shape[0] * shape[1])
    basis = [_assemble(ball, e.reshape(shape), t_nodes, y_nodes, scale=1.0) for e in eye]
    tw, yw = basis[0].t_weights, basis[0].y_weights
    G = np.array([[float(tw @ (a.profile * b.profile) @ yw) for b in basis] for a in basis])
    return basis, G


def _whiten(columns: np.ndarray, G: np.ndarray) -> np.ndarray:
    # c = L^{-T} z turns c^T G c into |z|^2
    L = np.linalg.cholesky(G)
    return np.linalg.solve(L, columns.T).T


def worst_case_l1(columns: np.ndarray, G: np.ndarray, starts: int = 32) -> float:
    """``max_c ||columns @ c||_1 / sqrt(c^T G c)``.

    ``columns`` hold weighted values so the l^1 sum is the L^1 norm.  The
    sign fixed point ``z <- W^T sign(W z)`` increases ``||W z||_1`` on the unit
    sphere; it is run from the coordinate axes and fixed pseudo-random starts.
    """
    W = _whiten(columns, G)
    d = W.shape[1]
    rng = np.random.default_rng(0)
    Z = np.concatenate([np.eye(d), rng.standard_normal((starts, d))])
    best = 0.0
    for z in Z:
        z = z / np.linalg.norm(z)
        val = np.abs(W @ z).sum()
        for _ in range(200):
            g = W.T @ np.sign(W @ z)
            nz = np.linalg.norm(g)
            if nz == 0:
                break
            z = g / nz
            new = np.abs(W @ z).sum()
            if new <= val * (1 + 1e-14):
                val = max(val, new)
                break
            val = new
        best = max(best, val)
    return float(best)


def worst_case_l2(columns: np.ndarray, G: np.ndarray) -> float:
    """``max_c ||columns @ c||_2 / sqrt(c^T G c)`` (largest singular value after whitening)."""
    return float(np.linalg.norm(_whiten(columns, G), 2))


def _linear_columns(values) -> np.ndarray:
    return np.stack([s * np.exp(np.where(np.isfinite(a), a, -np.inf)) for s, a in values], axis=1)


def worst_window_term(ball: AdmissibleBall, N: int, alpha: float, b: float, j: int = 0,
                      K: int = 3, t_nodes: int = 12, y_nodes: int | None = None) -> float:
    """Largest :func:`atom_window_term` over all atoms with profiles on ``ball``."""
    basis, G = coefficient_basis(ball, t_nodes, y_nodes)
    cols = _linear_columns(atom_window_values(F, N, alpha, b, j, K)[1:] for F in basis)
    return math.sqrt(0.99 / ball.measure()) * worst_case_l1(cols, G)


def worst_k0_constant(ball: AdmissibleBall, N: int, alpha: float, j: int = 0, t_nodes: int = 12,
                      y_nodes: int | None = None) -> float:
    """Largest ``||1_{C_0} f||_2 gamma(B)^{1/2}`` over all atoms with profiles on ``ball``."""
    basis, G = coefficient_basis(ball, t_nodes, y_nodes)
    pts, logw, labels = annulus_rule(ball, 0)
    keep = labels == 0
    cols = []
    for F in basis:
        sgn, logf = _apply_dual(F, N, alpha, j, pts[keep], 0, 32)
        cols.append((sgn, logf + 0.5 * logw[keep]))
    # gamma(B)^{1/2} * sqrt(0.99 / gamma(B)) = sqrt(0.99)
    return math.sqrt(0.99) * worst_case_l2(_linear_columns(cols), G)


def _coefficients(g: LogGrid, degree: int) -> np.ndarray:
    idx = multi_indices(g.points.shape[1], degree)
    B = basis_matrix(g.points, idx)
    return (np.exp(g.log_weights) * g.values) @ B, idx


def relation_error(f: LogGrid, f_tilde: LogGrid, N: int, degree: int = 6) -> float:
    """``max |c_beta(f) - (-|beta|)^N c_beta(f~)| / max |c_beta(f)|`` over ``|beta| <= degree``."""
    cf, idx = _coefficients(f, degree)
    ct, _ = _coefficients(f_tilde, degree)
    mult = np.array([(-float(sum(b))) ** N for b in idx])
    scale = np.max(np.abs(cf))
    if scale == 0:
        return 0.0 if np.max(np.abs(ct * mult)) == 0 else math.inf
    return float(np.max(np.abs(cf - mult * ct)) / scale)


def _fit_rate(logs: np.ndarray, ks: np.ndarray) -> float:
    if np.any(~np.isfinite(logs)):
        return math.inf if np.all(logs == -np.inf) else math.nan
    X = -(4.0**ks)
    slope, _ = np.polyfit(X, logs, 1)
    return float(slope)


def check_molecule(f, f_tilde, ball: AdmissibleBall, N: int, C: float, K: int = 4,
                   relation: float | None = None) -> MoleculeReport:
    """Measure the molecule clauses of ``(f, f~)`` around ``ball`` at rate ``C``.

    Clause (i): ``||1_{C_k} f|| <= e^{-C 4^k} gamma(B)^{-1/2}``; clause (iii):
    the same for ``f~`` with an extra factor ``r^{2N}``; clause (ii) is the
    relation ``f = L^N f~`` and is taken from ``relation`` when given.
    """
    f = f if isinstance(f, LogGrid) else LogGrid.from_grid(f)
    f_tilde = f_tilde if isinstance(f_tilde, LogGrid) else LogGrid.from_grid(f_tilde)
    log_gamma = math.log(gaussian_ball_measure(ball.center, ball.radius))
    ks = np.arange(K + 1)
    masks = [annulus_indicator(Annulus(ball, int(k)), f.points) for k in ks]
    masks_t = [annulus_indicator(Annulus(ball, int(k)), f_tilde.points) for k in ks]
    logs = np.array([f.log_l2(m) for m in masks])
    logs_t = np.array([f_tilde.log_l2(m) for m in masks_t])
    scaled = logs + 0.5 * log_gamma
    scaled_t = logs_t + 0.5 * log_gamma - 2 * N * math.log(ball.radius)
    bound = -C * 4.0**ks
    tol = 1e-12
    holds = bool(np.all(scaled <= bound + tol) and np.all(scaled_t <= bound + tol))
    if relation is not None:
        holds = holds and relation < 1e-5
    fit_ks = ks[1:5] if K >= 4 else ks[1:]
    return MoleculeReport(
        ball=ball,
        N=N,
        log_annulus_norms=tuple(float(v) for v in logs),
        log_tilde_annulus_norms=tuple(float(v) for v in logs_t),
        fitted_decay_rate=_fit_rate(scaled[fit_ks], fit_ks),
        k0_constant=float(math.exp(scaled[0])) if np.isfinite(scaled[0]) else 0.0,
        rate=C,
        holds=holds,
        relation_error=relation,
    )
