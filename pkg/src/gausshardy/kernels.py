"""Mehler kernel, its time derivatives and the dual derivative kernels.

Time derivatives are represented as

    d^N/ds^N M_s(x, y) = D^{-N} P_N(E, U, V) M_s(x, y)

with ``E = e^{-s}``, ``D = 1 - E^2``, ``U_j = (E x_j - y_j)/sqrt(D)`` and
``V_j = sqrt(D) x_j``.  The polynomials are built once with exact rational
coefficients and evaluated in floating point.  Kernels whose magnitude can
overflow are returned as a sign and a log-magnitude.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .chaos import hermite_table
from .errors import PreconditionError, ResourceLimitError

__all__ = [
    "MIN_TIME",
    "MAX_ORDER",
    "one_minus_exp2",
    "mehler",
    "log_mehler",
    "KernelPoly",
    "KernelEvaluation",
    "build_PN",
    "build_QN",
    "kernel_K",
    "kernel_K_spectral",
    "kernel_Ktilde",
    "kernel_dK_tilde",
    "check_slow2",
    "check_slow2_y",
    "slow2_margin",
    "est_log_ratio",
    "rtest_log_ratio",
]

MIN_TIME = 1e-6
MAX_ORDER = 6
_LOG_PI = math.log(math.pi)


def one_minus_exp2(s):
    """``1 - exp(-2 s)`` without cancellation for small ``s``."""
    return -np.expm1(-2.0 * np.asarray(s, dtype=float))


def _check_time(s):
    s = np.asarray(s, dtype=float)
    if np.any(~(s > 0)):
        raise ValueError("time must be positive")
    if np.any(s < MIN_TIME):
        raise PreconditionError(f"time below {MIN_TIME}: the kernel is numerically a delta")
    return s


def _pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != y.shape[-1]:
        raise ValueError("x and y must have the same dimension")
    return x, y


def log_mehler(s, x, y):
    """``log M_s(x, y)``; broadcasts over leading axes of ``x`` and ``y``."""
    s = _check_time(s)
    x, y = _pair(x, y)
    n = x.shape[-1]
    d = one_minus_exp2(s)
    diff = np.exp(-s)[..., None] * x - y if np.ndim(s) else math.exp(-float(s)) * x - y
    return -0.5 * n * (_LOG_PI + np.log(d)) - np.sum(diff**2, axis=-1) / d


def mehler(t, x, y):
    """Mehler kernel ``M_t(x, y)`` of ``e^{tL}`` against Lebesgue measure ``dy``."""
    out = np.exp(log_mehler(t, x, y))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Exact polynomials in (E, U_1..U_n, V_1..V_n)

Poly = dict  # exponent tuple -> Fraction


def _padd(p: Poly, expo: tuple, coeff: Fraction):
    if coeff:
        v = p.get(expo, Fraction(0)) + coeff
        if v:
            p[expo] = v
        else:
            p.pop(expo, None)


def _pdiff(p: Poly, i: int) -> Poly:
    out: Poly = {}
    for expo, c in p.items():
        if expo[i]:
            e = list(expo)
            e[i] -= 1
            _padd(out, tuple(e), c * expo[i])
    return out


def _pmul_mono(p: Poly, mono: Mapping[int, int], coeff) -> Poly:
    out: Poly = {}
    for expo, c in p.items():
        e = list(expo)
        for i, k in mono.items():
            e[i] += k
        _padd(out, tuple(e), c * coeff)
    return out


def _psum(*polys: Poly) -> Poly:
    out: Poly = {}
    for p in polys:
        for expo, c in p.items():
            _padd(out, expo, c)
    return out


@dataclass(frozen=True)
class KernelPoly:
    """Polynomial factor of a Mehler-kernel derivative.

    ``prefactor_exponent`` is the power ``q`` in ``(1 - e^{-2s})^{-q}``; it is
    ``N`` for time derivatives and ``N + 1/2`` once a space derivative is taken.
    Variables are ordered ``(E, U_1..U_n, V_1..V_n)``.
    """

    dimension: int
    order: int
    prefactor_exponent: Fraction
    terms: Mapping[tuple, Fraction]

    def __post_init__(self):
        object.__setattr__(self, "prefactor_exponent", Fraction(self.prefactor_exponent))
        object.__setattr__(self, "terms", MappingProxyType(dict(sorted(self.terms.items()))))
        exps = np.array(list(self.terms), dtype=float).reshape(-1, 2 * self.dimension + 1)
        coeffs = np.array([float(c) for c in self.terms.values()])
        object.__setattr__(self, "_exps", exps)
        object.__setattr__(self, "_coeffs", coeffs)

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def __len__(self) -> int:
        return len(self.terms)

    def evaluate(self, E, U, V) -> np.ndarray:
        """Float evaluation; ``E`` broadcasts against the leading axes of ``U`` and ``V``."""
        U = np.asarray(U, dtype=float)
        V = np.asarray(V, dtype=float)
        E = np.asarray(E, dtype=float)
        lead = np.broadcast_shapes(E.shape, U.shape[:-1], V.shape[:-1])
        E = np.broadcast_to(E, lead)
        U = np.broadcast_to(U, lead + U.shape[-1:])
        V = np.broadcast_to(V, lead + V.shape[-1:])
        z = np.concatenate([E[..., None], U, V], axis=-1)
        if not len(self.terms):
            return np.zeros(U.shape[:-1])
        mono = np.ones(z.shape[:-1] + (len(self.terms),))
        for i in range(z.shape[-1]):
            col = self._exps[:, i]
            if np.any(col):
                mono = mono * z[..., i : i + 1] ** col
        return mono @ self._coeffs

    def derivative(self, var: int) -> Poly:
        return _pdiff(dict(self.terms), var)

    def to_json(self) -> str:
        rows = [{"expo": list(e), "coeff": str(c)} for e, c in self.terms.items()]
        return json.dumps(rows)

    @classmethod
    def from_json(cls, text: str, dimension: int, order: int,
                  prefactor_exponent) -> "KernelPoly":
        rows = json.loads(text)
        terms = {tuple(r["expo"]): Fraction(r["coeff"]) for r in rows}
        return cls(dimension, order, Fraction(prefactor_exponent), terms)


def _check_order(N: int, n: int):
    if N < 0:
        raise ValueError("order must be non-negative")
    if n < 1:
        raise ValueError("dimension must be positive")
    if N > MAX_ORDER:
        raise ResourceLimitError(f"kernel order {N} exceeds the practical bound {MAX_ORDER}")


@lru_cache(maxsize=None)
def _pn_terms(N: int, n: int) -> tuple:
    width = 2 * n + 1
    iE = 0
    iU = list(range(1, n + 1))
    iV = list(range(n + 1, 2 * n + 1))
    zero = (0,) * width
    p: Poly = {zero: Fraction(1)}
    # potential term from d/ds log M_s, times D
    pot: Poly = {}
    _padd(pot, tuple(2 if i == iE else 0 for i in range(width)), Fraction(-n))
    for j in range(n):
        e = [0] * width
        e[iE], e[iU[j]], e[iV[j]] = 1, 1, 1
        _padd(pot, tuple(e), Fraction(2))
        e = [0] * width
        e[iE], e[iU[j]] = 2, 2
        _padd(pot, tuple(e), Fraction(2))
    for k in range(N):
        parts = [_pmul_mono(p, {iE: 2}, Fraction(-2 * k))]
        dE = _pdiff(p, iE)
        parts.append(_pmul_mono(dE, {iE: 1}, -1))
        parts.append(_pmul_mono(dE, {iE: 3}, 1))
        for j in range(n):
            dU = _pdiff(p, iU[j])
            parts.append(_pmul_mono(dU, {iE: 1, iV[j]: 1}, -1))
            parts.append(_pmul_mono(dU, {iE: 2, iU[j]: 1}, -1))
            dV = _pdiff(p, iV[j])
            parts.append(_pmul_mono(dV, {iE: 2, iV[j]: 1}, 1))
        # multiply by the potential
        prod: Poly = {}
        for e1, c1 in pot.items():
            for e2, c2 in p.items():
                _padd(prod, tuple(a + b for a, b in zip(e1, e2)), c1 * c2)
        parts.append(prod)
        p = _psum(*parts)
    return tuple(sorted(p.items()))


def build_PN(N: int, n: int) -> KernelPoly:
    """Polynomial ``P_N`` with ``d^N/ds^N M_s = D^{-N} P_N M_s``; ``P_0 = 1``."""
    _check_order(N, n)
    return KernelPoly(n, N, Fraction(N), dict(_pn_terms(N, n)))


@lru_cache(maxsize=None)
def _qn_terms(N: int, n: int, j: int) -> tuple:
    p = dict(_pn_terms(N, n))
    iE, iU, iV = 0, 1 + j, 1 + n + j
    dU = _pdiff(p, iU)
    dV = _pdiff(p, iV)
    q = _psum(
        _pmul_mono(dU, {iE: 1}, 1),
        dV,
        _pmul_mono(dV, {iE: 2}, -1),
        _pmul_mono(p, {iE: 1, iU: 1}, -2),
    )
    return tuple(sorted(q.items()))


def build_QN(N: int, n: int, j: int) -> KernelPoly:
    """Polynomial ``Q_N`` with ``d/dx_j d^N/ds^N M_s = D^{-(N+1/2)} Q_N M_s``."""
    _check_order(N, n)
    if not 0 <= j < n:
        raise ValueError(f"axis {j} out of range")
    return KernelPoly(n, N, Fraction(2 * N + 1, 2), dict(_qn_terms(N, n, j)))


# ---------------------------------------------------------------------------
# Kernel evaluations


@dataclass(frozen=True)
class KernelEvaluation:
    """A kernel value stored as ``sign * exp(log_scale)``; arrays allowed."""

    sign: np.ndarray | float
    log_scale: np.ndarray | float

    @property
    def value(self):
        with np.errstate(over="ignore"):
            out = self.sign * np.exp(self.log_scale)
        return float(out) if np.ndim(out) == 0 else out


def _signed_log(values, extra_log):
    values = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore"):
        log_abs = np.log(np.abs(values)) + extra_log
    sign = np.sign(values)
    if np.ndim(sign) == 0:
        return KernelEvaluation(float(sign), float(log_abs))
    return KernelEvaluation(sign, log_abs)


def _variables(s, x, y):
    """``E``, ``D``, ``U``, ``V`` for the pair ``(x, y)``."""
    E = np.exp(-s)
    D = one_minus_exp2(s)
    sd = np.sqrt(D)
    Ee = np.asarray(E)[..., None] if np.ndim(E) else E
    sde = np.asarray(sd)[..., None] if np.ndim(sd) else sd
    U = (Ee * x - y) / sde
    V = sde * x
    return E, D, U, V


def kernel_K(t, N: int, alpha: float, x, y) -> KernelEvaluation:
    """``K(x, y) = t^{2N} d^N/ds^N M_s(x, y)`` at ``s = t^2/alpha``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("t must be positive")
    x, y = _pair(x, y)
    s = _check_time(t**2 / alpha)
    poly = build_PN(N, x.shape[-1])
    E, D, U, V = _variables(s, x, y)
    vals = poly.evaluate(E, U, V)
    extra = 2 * N * np.log(t) - N * np.log(D) + log_mehler(s, x, y)
    return _signed_log(vals, extra)


def kernel_K_spectral(t, N: int, alpha: float, x, y, degree: int = 60) -> tuple[float, float]:
    """Truncated eigen-expansion of ``kernel_K`` and a bound on the omitted tail.

    ``sum_beta (-t^2|beta|)^N e^{-s|beta|} h_beta(x) h_beta(y) pi^{-n/2} e^{-|y|^2}``
    over ``|beta| <= degree``.  The tail bound uses ``|h_k(x)| <= e^{x^2/2}``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = x.shape[0]
    s = t**2 / alpha
    tx = hermite_table(x, degree)
    ty = hermite_table(y, degree)
    # sum over |beta| = k of prod_j h_{beta_j}(x_j) h_{beta_j}(y_j), by convolution over axes
    per_axis = tx * ty  # (n, degree+1)
    level = per_axis[0]
    for j in range(1, n):
        level = np.convolve(level, per_axis[j])[: degree + 1]
    k = np.arange(degree + 1)
    weights = (-(t**2) * k) ** N * np.exp(-s * k)
    dens = math.exp(-float(y @ y)) / math.pi ** (n / 2)
    value = float(weights @ level) * dens
    # tail: number of indices of order k is C(k+n-1, n-1)
    kk = np.arange(degree + 1, degree + 400)
    counts = np.array([math.comb(int(q) + n - 1, n - 1) for q in kk], dtype=float)
    envelope = math.exp(0.5 * float(x @ x + y @ y))
    tail = float(np.sum(counts * (t**2 * kk) ** N * np.exp(-s * kk))) * envelope * dens
    return value, tail


def _dual_variables(s, x, y):
    """Variables of the kernel with its arguments swapped: ``U' = (E y - x)/sqrt(D)``."""
    return _variables(s, y, x)


def _log_dual_mehler(s, x, y):
    """``log M_s(y, x) + |x|^2 - |y|^2`` (which equals ``log M_s(x, y)``)."""
    return log_mehler(s, y, x) + np.sum(x**2, axis=-1) - np.sum(y**2, axis=-1)


def kernel_Ktilde(t, N: int, alpha: float, j: int, x, y) -> KernelEvaluation:
    """Kernel of ``(t^2 L)^N e^{(t^2/alpha) L} t d*_j`` against Lebesgue ``dy``.

    Equals ``t^{2N+1} d/dy_j d^N/ds^N M_s(y, x) exp(|x|^2 - |y|^2)``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("t must be positive")
    x, y = _pair(x, y)
    s = _check_time(t**2 / alpha)
    q = build_QN(N, x.shape[-1], j)
    E, D, Up, Vp = _dual_variables(s, x, y)
    vals = q.evaluate(E, Up, Vp)
    extra = (2 * N + 1) * np.log(t) - float(q.prefactor_exponent) * np.log(D) + _log_dual_mehler(s, x, y)
    return _signed_log(vals, extra)


def kernel_dK_tilde(t, N: int, alpha: float, j: int, k: int, x, y) -> KernelEvaluation:
    """``t d/dx_k`` of :func:`kernel_Ktilde`.

    The ``x``-dependence sits in ``U'`` (through ``-x/sqrt(D)``) and in the
    Gaussian factor, giving a polynomial part of order ``D^{-(N+1)}`` and a part
    carrying ``x_k`` of order ``D^{-(N+1/2)}``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("t must be positive")
    x, y = _pair(x, y)
    n = x.shape[-1]
    if not 0 <= k < n:
        raise ValueError(f"axis {k} out of range")
    s = _check_time(t**2 / alpha)
    q = build_QN(N, n, j)
    dq = KernelPoly(n, N, q.prefactor_exponent, q.derivative(1 + k))
    E, D, Up, Vp = _dual_variables(s, x, y)
    qv = q.evaluate(E, Up, Vp)
    dqv = dq.evaluate(E, Up, Vp)
    sd = np.sqrt(D)
    # common factor D^{-(N+1)}; the x_k part gains sqrt(D)
    poly = -dqv + 2 * Up[..., k] * qv + 2 * sd * x[..., k] * qv
    extra = (2 * N + 2) * np.log(t) - (N + 1) * np.log(D) + _log_dual_mehler(s, x, y)
    return _signed_log(poly, extra)


# ---------------------------------------------------------------------------
# Comparison inequalities


def _slow2_sides(t, alpha, a, C, x, y, use_y: bool):
    t = np.asarray(t, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    a = np.asarray(a, dtype=float)
    C = np.asarray(C, dtype=float)
    if np.any(~(alpha > 1)):
        raise PreconditionError("alpha must exceed 1")
    if np.any(~(t > 0)) or np.any(t > a):
        raise PreconditionError("t must lie in (0, a]")
    if np.any(~(C > 0)):
        raise PreconditionError("C must be positive")
    x, y = _pair(x, y)
    s = t**2 / alpha
    d_small = one_minus_exp2(s)
    d_big = one_minus_exp2(t**2)
    e_small = np.exp(-s)[..., None]
    e_big = np.exp(-(t**2))[..., None]
    lhs = -C * np.sum((e_small * x - y) ** 2, axis=-1) / d_small
    w = y if use_y else x
    rhs = (-C * alpha / (2 * np.exp(2 * a**2)) * np.sum((e_big * x - y) ** 2, axis=-1) / d_big
           + C * t**4 * np.sum(w**2, axis=-1) / d_small)
    return lhs, rhs


def slow2_margin(t, alpha, a, C, x, y, use_y: bool = False):
    """``log(RHS) - log(LHS)`` of the comparison inequality (nonnegative when it holds)."""
    lhs, rhs = _slow2_sides(t, alpha, a, C, x, y, use_y)
    return rhs - lhs


def _slow2_holds(t, alpha, a, C, x, y, use_y):
    lhs, rhs = _slow2_sides(t, alpha, a, C, x, y, use_y)
    out = lhs <= rhs + 1e-12 * (1 + np.abs(lhs) + np.abs(rhs))
    return bool(out) if np.ndim(out) == 0 else out


def check_slow2(t, alpha, a, C, x, y):
    """Compare ``exp(-C|e^{-s}x-y|^2/(1-e^{-2s}))``, ``s = t^2/alpha``, with the
    slower Gaussian at time ``t^2`` times the correction ``exp(C t^4|x|^2/(1-e^{-2s}))``.

    Evaluated in log space; broadcasts over batches.
    """
    return _slow2_holds(t, alpha, a, C, x, y, False)


def check_slow2_y(t, alpha, a, C, x, y):
    """As :func:`check_slow2` with the correction carried by ``|y|^2``."""
    return _slow2_holds(t, alpha, a, C, x, y, True)


def _gauss_exponent(t, x, y):
    """``|e^{-t^2} x - y|^2 / (1 - e^{-2t^2})``."""
    e = np.exp(-(np.asarray(t) ** 2))
    e = e[..., None] if np.ndim(e) else e
    return np.sum((e * x - y) ** 2, axis=-1) / one_minus_exp2(np.asarray(t) ** 2)


def est_log_ratio(clause: str, t, N: int, alpha: float, a: float, x, y, j: int = 0):
    """``log(LHS) - log(RHS without constant)`` for the three kernel comparison bounds.

    ``clause`` selects the left side: ``"mehler"`` for ``M_{t^2/alpha}(x,y)``,
    ``"K"`` for ``|K(x,y)|`` and ``"Ktilde"`` for ``|Ktilde_j(x,y)|``.  The right
    sides are Gaussian factors times ``M_{t^2}(x, y)``.
    """
    x, y = _pair(x, y)
    t = np.asarray(t, dtype=float)
    base = log_mehler(t**2, x, y)
    g = np.exp(2 * a**2)
    if clause == "mehler":
        lhs = log_mehler(t**2 / alpha, x, y)
        rhs = -alpha / (2 * g) * _gauss_exponent(t, x, y) + base
    elif clause == "K":
        lhs = kernel_K(t, N, alpha, x, y).log_scale
        rhs = -alpha / (4 * g) * _gauss_exponent(t, x, y) + base
    elif clause == "Ktilde":
        lhs = kernel_Ktilde(t, N, alpha, j, x, y).log_scale
        rhs = -alpha / (4 * g) * _gauss_exponent(t, y, x) + base
    else:
        raise ValueError(f"unknown clause {clause!r}")
    return lhs - rhs


def rtest_log_ratio(t, N: int, alpha: float, j: int, k: int, x, y):
    """``log|t d_k Ktilde_j| - log[(1 + t|x|) exp(-alpha/(4e^8) ...) M_{t^2}(x,y)]``."""
    x, y = _pair(x, y)
    t = np.asarray(t, dtype=float)
    lhs = kernel_dK_tilde(t, N, alpha, j, k, x, y).log_scale
    rhs = (np.log1p(t * np.linalg.norm(x, axis=-1))
           - alpha / (4 * math.exp(8)) * _gauss_exponent(t, y, x) + log_mehler(t**2, x, y))
    return lhs - rhs
