"""Hermite chaos: orthonormal basis of L^2(gamma), quadrature and coefficient operators.

The basis is the physicists' Hermite family normalised in L^2(gamma), with
``dgamma = pi^{-n/2} exp(-|x|^2) dx``::

    h_k(x) = H_k(x) / sqrt(2^k k!),     h_beta(x) = prod_j h_{beta_j}(x_j)

so that ``L = 1/2 Laplacian - x . grad`` acts as ``L h_beta = -|beta| h_beta``.
For reference, ``h_1(x) = sqrt(2) x`` and ``h_2(0) = -1/sqrt(2)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import PreconditionError

__all__ = [
    "MultiIndex",
    "multi_indices",
    "QuadratureRule",
    "gauss_hermite",
    "default_rule_order",
    "GridFunction",
    "ChaosExpansion",
    "hermite_table",
    "hermite_eval",
    "basis_matrix",
    "analyze",
    "synthesize",
    "apply_derivative",
    "apply_adjoint_derivative",
    "apply_multiplier",
    "random_expansion",
]


class MultiIndex(tuple):
    """Tuple of non-negative integers indexing a Hermite basis element."""

    def __new__(cls, entries: Iterable[int]):
        entries = tuple(int(b) for b in entries)
        if any(b < 0 for b in entries):
            raise ValueError(f"multi-index entries must be non-negative, got {entries}")
        return super().__new__(cls, entries)

    @property
    def order(self) -> int:
        return sum(self)

    def shifted(self, axis: int, step: int) -> "MultiIndex | None":
        entries = list(self)
        entries[axis] += step
        if entries[axis] < 0:
            return None
        return MultiIndex(entries)


def multi_indices(n: int, max_degree: int) -> list[MultiIndex]:
    """All multi-indices of length ``n`` with order <= ``max_degree``, in lexicographic order."""
    if n < 1:
        raise ValueError("dimension must be positive")
    out = [
        MultiIndex(b)
        for b in itertools.product(range(max_degree + 1), repeat=n)
        if sum(b) <= max_degree
    ]
    return sorted(out)


# ---------------------------------------------------------------------------
# Quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """One-dimensional Gauss-Hermite rule for the weight ``exp(-x^2)``.

    ``weights`` sum to sqrt(pi); ``gamma_weights`` are normalised to the
    probability measure.  Tensor products are built on demand.
    """

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return len(self.nodes)

    @property
    def gamma_weights(self) -> np.ndarray:
        return self.weights / np.sqrt(np.pi)

    def tensor(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Tensor nodes of shape ``(Q**n, n)`` and their gamma weights."""
        grids = np.meshgrid(*([self.nodes] * n), indexing="ij")
        points = np.stack([g.ravel() for g in grids], axis=-1)
        w = self.gamma_weights
        weights = w
        for _ in range(n - 1):
            weights = np.multiply.outer(weights, w)
        return points, np.asarray(weights).ravel()


def gauss_hermite(order: int) -> QuadratureRule:
    """Golub-Welsch nodes and weights for ``int f(x) exp(-x^2) dx``.

    Node symmetry is imposed after the eigen-solve so that odd moments vanish
    to roundoff.
    """
    if order < 1:
        raise ValueError("quadrature order must be positive")
    k = np.arange(1, order)
    off = np.sqrt(k / 2.0)
    jacobi = np.diag(off, 1) + np.diag(off, -1)
    nodes, vecs = np.linalg.eigh(jacobi)
    weights = np.sqrt(np.pi) * vecs[0, :] ** 2
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    if order % 2 == 1:
        nodes[order // 2] = 0.0
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights)


def default_rule_order(max_degree: int) -> int:
    return 2 * max_degree + 8


# ---------------------------------------------------------------------------
# Functions on grids


@dataclass(frozen=True)
class GridFunction:
    """Point samples, optionally carrying gamma-quadrature weights.

    When the points are the tensor nodes of a Gauss-Hermite rule the rule is
    attached as well, which lets ``analyze`` check its accuracy precondition.
    ``source``, when present, is the function that was sampled; kernel-based
    operators need it to evaluate off the grid.
    """

    points: np.ndarray
    values: np.ndarray
    weights: np.ndarray | None = None
    rule: QuadratureRule | None = None
    source: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False,
                                                              repr=False)

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if points.shape[0] != values.shape[0]:
            raise ValueError(
                f"points and values differ in length: {points.shape[0]} != {values.shape[0]}"
            )
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)
        if self.weights is not None:
            weights = np.asarray(self.weights, dtype=float).reshape(-1)
            if weights.shape != values.shape:
                raise ValueError("weights must match values")
            object.__setattr__(self, "weights", weights)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @classmethod
    def on_rule(cls, f: Callable[[np.ndarray], np.ndarray], n: int, rule: QuadratureRule):
        points, weights = rule.tensor(n)
        return cls(points, f(points), weights, rule, f)

    @classmethod
    def sample(cls, f: Callable[[np.ndarray], np.ndarray], points, weights=None):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(points, f(points), weights, None, f)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.points, values, self.weights, self.rule)

    def l1_norm(self) -> float:
        return self.norm(1)

    def _require_weights(self) -> np.ndarray:
        if self.weights is None:
            raise PreconditionError("grid function carries no quadrature weights")
        return self.weights

    def integral(self) -> float:
        return float(self._require_weights() @ self.values)

    def norm(self, p: float = 2) -> float:
        w = self._require_weights()
        if np.isinf(p):
            return float(np.max(np.abs(self.values)))
        return float((w @ np.abs(self.values) ** p) ** (1.0 / p))


# ---------------------------------------------------------------------------
# Expansions


def _freeze(coeffs: Mapping) -> Mapping[MultiIndex, float]:
    items = sorted((MultiIndex(b), float(c)) for b, c in coeffs.items())
    return MappingProxyType(dict(items))


@dataclass(frozen=True)
class ChaosExpansion:
    """Finitely many Hermite coefficients ``{beta: c_beta}`` in the orthonormal basis."""

    dimension: int
    coeffs: Mapping[MultiIndex, float] = field(default_factory=dict)
    max_degree: int | None = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        coeffs = _freeze(self.coeffs)
        for beta in coeffs:
            if len(beta) != self.dimension:
                raise ValueError(f"index {tuple(beta)} does not have length {self.dimension}")
        top = max((b.order for b in coeffs), default=0)
        max_degree = top if self.max_degree is None else int(self.max_degree)
        if top > max_degree:
            raise ValueError(f"stored order {top} exceeds max_degree {max_degree}")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "max_degree", max_degree)

    # constructors
    @classmethod
    def zero(cls, n: int) -> "ChaosExpansion":
        return cls(n, {})

    @classmethod
    def constant(cls, n: int, value: float = 1.0) -> "ChaosExpansion":
        return cls(n, {(0,) * n: value})

    @classmethod
    def basis(cls, beta: Sequence[int], scale: float = 1.0) -> "ChaosExpansion":
        return cls(len(beta), {tuple(beta): scale})

    # accessors
    def __getitem__(self, beta) -> float:
        return self.coeffs.get(MultiIndex(beta), 0.0)

    def __iter__(self):
        return iter(self.coeffs.items())

    def __len__(self) -> int:
        return len(self.coeffs)

    @property
    def indices(self) -> list[MultiIndex]:
        return list(self.coeffs)

    def mean(self) -> float:
        """Integral against gamma: the coefficient of the constant."""
        return self[(0,) * self.dimension]

    def norm(self) -> float:
        """L^2(gamma) norm by Parseval."""
        return float(np.sqrt(sum(c * c for c in self.coeffs.values())))

    def inner(self, other: "ChaosExpansion") -> float:
        return float(sum(c * other[b] for b, c in self.coeffs.items()))

    def max_abs_difference(self, other: "ChaosExpansion") -> float:
        keys = set(self.coeffs) | set(other.coeffs)
        return max((abs(self[b] - other[b]) for b in keys), default=0.0)

    def pruned(self, tol: float = 0.0) -> "ChaosExpansion":
        return ChaosExpansion(
            self.dimension,
            {b: c for b, c in self.coeffs.items() if abs(c) > tol},
            self.max_degree,
        )

    # algebra
    def _combine(self, other: "ChaosExpansion", sign: float) -> "ChaosExpansion":
        if other.dimension != self.dimension:
            raise ValueError("dimension mismatch")
        out = dict(self.coeffs)
        for b, c in other.coeffs.items():
            out[b] = out.get(b, 0.0) + sign * c
        return ChaosExpansion(self.dimension, out, max(self.max_degree, other.max_degree))

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, scalar: float):
        return ChaosExpansion(
            self.dimension, {b: scalar * c for b, c in self.coeffs.items()}, self.max_degree
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __call__(self, points) -> np.ndarray:
        return evaluate(self, points)

    # serialisation
    def to_json_dict(self) -> dict:
        return {
            "n": self.dimension,
            "coeffs": [{"beta": list(b), "c": c} for b, c in self.coeffs.items()],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "ChaosExpansion":
        try:
            n = int(data["n"])
            coeffs = {tuple(int(v) for v in row["beta"]): float(row["c"]) for row in data["coeffs"]}
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed expansion: {exc}") from exc
        return cls(n, coeffs)


# ---------------------------------------------------------------------------
# Evaluation


def hermite_table(x, kmax: int) -> np.ndarray:
    """Values ``h_0(x), ..., h_kmax(x)`` stacked on a new last axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (kmax + 1,))
    out[..., 0] = 1.0
    if kmax >= 1:
        out[..., 1] = np.sqrt(2.0) * x
    for k in range(1, kmax):
        out[..., k + 1] = (np.sqrt(2.0) * x * out[..., k] - np.sqrt(k) * out[..., k - 1]) / np.sqrt(
            k + 1.0
        )
    return out


def hermite_eval(beta: Sequence[int], x) -> np.ndarray | float:
    """Orthonormal ``h_beta`` at ``x`` (shape ``(n,)`` or ``(m, n)``)."""
    beta = MultiIndex(beta)
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (len(beta),):
        raise ValueError(f"point dimension {x.shape[-1:]} does not match index length {len(beta)}")
    tab = hermite_table(x, max(beta, default=0))
    vals = np.ones(x.shape[:-1])
    for j, b in enumerate(beta):
        vals = vals * tab[..., j, b]
    return float(vals) if vals.ndim == 0 else vals


def basis_matrix(points, indices: Sequence[MultiIndex]) -> np.ndarray:
    """Matrix ``B[i, k] = h_{indices[k]}(points[i])``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if not indices:
        return np.zeros((points.shape[0], 0))
    n = points.shape[1]
    if any(len(b) != n for b in indices):
        raise ValueError("index length does not match point dimension")
    kmax = max(max(b) for b in indices)
    tab = hermite_table(points, kmax)  # (m, n, kmax+1)
    idx = np.array(indices, dtype=int)  # (K, n)
    mat = np.ones((points.shape[0], len(indices)))
    for j in range(n):
        mat *= tab[:, j, :][:, idx[:, j]]
    return mat


def evaluate(c: ChaosExpansion, points) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != c.dimension:
        raise ValueError("point dimension does not match expansion")
    if not c.coeffs:
        return np.zeros(points.shape[0])
    idx = c.indices
    return basis_matrix(points, idx) @ np.array([c.coeffs[b] for b in idx])


def synthesize(c: ChaosExpansion, points) -> GridFunction:
    """Pointwise ``sum_beta c_beta h_beta(x)``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return GridFunction(points, evaluate(c, points))


def analyze(f: GridFunction, max_degree: int) -> ChaosExpansion:
    """Project a weighted grid function onto ``{h_beta : |beta| <= max_degree}``."""
    if f.weights is None:
        raise PreconditionError("analysis needs a grid function with quadrature weights")
    if f.rule is not None and f.rule.order < max_degree + 1:
        raise PreconditionError(
            f"quadrature order {f.rule.order} is too low for degree {max_degree}"
        )
    idx = multi_indices(f.dimension, max_degree)
    coeffs = basis_matrix(f.points, idx).T @ (f.weights * f.values)
    return ChaosExpansion(f.dimension, dict(zip(idx, coeffs)), max_degree)


# ---------------------------------------------------------------------------
# Coefficient operators


def _check_axis(c: ChaosExpansion, j: int):
    if not 0 <= j < c.dimension:
        raise ValueError(f"axis {j} out of range for dimension {c.dimension}")


def apply_derivative(c: ChaosExpansion, j: int) -> ChaosExpansion:
    """``d/dx_j``: ``h_k -> sqrt(2k) h_{k-1}`` along axis ``j``."""
    _check_axis(c, j)
    out: dict[MultiIndex, float] = {}
    for b, cb in c.coeffs.items():
        if b[j] == 0:
            continue
        lower = b.shifted(j, -1)
        out[lower] = out.get(lower, 0.0) + np.sqrt(2.0 * b[j]) * cb
    return ChaosExpansion(c.dimension, out, max(c.max_degree - 1, 0))


def apply_adjoint_derivative(c: ChaosExpansion, j: int) -> ChaosExpansion:
    """Adjoint of ``d/dx_j`` in L^2(gamma), i.e. ``g -> 2 x_j g - d_j g``."""
    _check_axis(c, j)
    out: dict[MultiIndex, float] = {}
    for b, cb in c.coeffs.items():
        upper = b.shifted(j, 1)
        out[upper] = out.get(upper, 0.0) + np.sqrt(2.0 * (b[j] + 1)) * cb
    return ChaosExpansion(c.dimension, out, c.max_degree + 1)


def apply_multiplier(c: ChaosExpansion, phi: Callable[[int], float]) -> ChaosExpansion:
    """Spectral multiplier ``c_beta -> phi(|beta|) c_beta``."""
    cache: dict[int, float] = {}
    out = {}
    for b, cb in c.coeffs.items():
        k = b.order
        if k not in cache:
            cache[k] = float(phi(k))
        out[b] = cache[k] * cb
    return ChaosExpansion(c.dimension, out, c.max_degree)


def random_expansion(
    n: int, max_degree: int, rng: np.random.Generator, *, include_constant: bool = True
) -> ChaosExpansion:
    """Standard-normal coefficients on every index of order <= ``max_degree``."""
    idx = multi_indices(n, max_degree)
    if not include_constant:
        idx = [b for b in idx if b.order > 0]
    return ChaosExpansion(n, dict(zip(idx, rng.standard_normal(len(idx)))), max_degree)
