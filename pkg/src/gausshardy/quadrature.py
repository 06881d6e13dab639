"""Composite Gauss-Legendre rules used by the operator and norm computations."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .chaos import gauss_hermite

__all__ = [
    "legendre",
    "composite_legendre",
    "log_time_rule",
    "gamma_grid",
    "gaussian_z_rule",
]


@lru_cache(maxsize=64)
def _leg(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def legendre(order: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = _leg(order)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1), half * w


def composite_legendre(lo: float, hi: float, panels: int, order: int = 8,
                       breaks=None) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre on ``panels`` equal panels, or on the intervals given by ``breaks``."""
    edges = np.linspace(lo, hi, panels + 1) if breaks is None else np.asarray(breaks, float)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = legendre(order, a, b)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def log_time_rule(lo: float, hi: float, per_decade: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Nodes in ``[lo, hi]`` and weights for ``dt/t``.

    Gauss-Legendre in ``log t`` with one panel per decade and ``per_decade``
    points per panel.
    """
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    decades = math.log10(hi / lo)
    panels = max(1, math.ceil(decades - 1e-12))
    u, w = composite_legendre(math.log(lo), math.log(hi), panels, per_decade)
    return np.exp(u), w


def gamma_grid(n: int, half_width: float = 8.0, panels: int = 32,
               order: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Tensor composite-Legendre nodes on ``[-L, L]^n`` with gamma-density weights.

    Suited to integrands with kinks (maximal functions, masked operators) where
    Gauss-Hermite nodes lose their spectral accuracy.  The one-dimensional
    weights are normalised to sum to one, so constants integrate exactly.
    """
    x, w = composite_legendre(-half_width, half_width, panels, order)
    w = w * np.exp(-(x**2))
    w = w / w.sum()
    grids = np.meshgrid(*([x] * n), indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=-1)
    weights = w
    for _ in range(n - 1):
        weights = np.multiply.outer(weights, w)
    return points, np.asarray(weights).ravel()


def gaussian_z_rule(n: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Hermite nodes with weights for ``pi^{-n/2} exp(-|z|^2) dz`` (summing to 1)."""
    return gauss_hermite(order).tensor(n)
