"""Small numerical kernels shared by the modules: quadrature rules and
finite-difference weights."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def graded_rule(levels: int = 16, order: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on [0, 1] graded geometrically toward both ends.

    Panels halve in width toward each endpoint down to ``2**-(levels+1)``, so
    integrands with a near-endpoint peak (a pole just outside the interval)
    are resolved without adaptivity. The rule is fixed, which keeps results
    smooth in any parameter the integrand depends on.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    edges = [0.0] + [2.0 ** -(k + 1) for k in range(levels, 0, -1)]
    left = np.array(edges)
    edges = np.concatenate([left, 1.0 - left[::-1][1:]])
    a, b = edges[:-1], edges[1:]
    nodes = (a[:, None] + (b - a)[:, None] * x[None, :]).ravel()
    weights = ((b - a)[:, None] * w[None, :]).ravel()
    return nodes, weights


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def fd_weights(offsets, order: int) -> np.ndarray:
    """Weights ``c`` with ``sum(c * f(x0 + offsets*h)) / h**order ~ f^(order)(x0)``.

    Exact for polynomials of degree ``len(offsets) - 1``.
    """
    offsets = np.asarray(offsets, dtype=float)
    m = offsets.size
    if order >= m:
        raise ValueError("need more stencil points than the derivative order")
    vander = np.vander(offsets, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return np.linalg.solve(vander, rhs)


def central_offsets(order: int, accuracy: int = 4) -> np.ndarray:
    """Symmetric integer stencil giving ``accuracy``-order central differences."""
    half = (order + 1) // 2 - 1 + accuracy // 2
    return np.arange(-half, half + 1, dtype=float)
