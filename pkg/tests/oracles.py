"""Independent brute-force references used by the tests."""

from __future__ import annotations

import numpy as np


def phase_space_density(potential, energy: float, q_range: tuple[float, float], dq: float = 2e-6, width: float = 1e-3) -> float:
    """rho(E) from the phase-space volume of the shell E - w/2 < H < E + w/2.

    The q axis is a plain midpoint Riemann sum; for each q the momentum
    measure of the shell is the exact length of the allowed p interval.
    """
    lo, hi = q_range
    n = int(np.ceil((hi - lo) / dq))
    total = 0.0
    for start in range(0, n, 1_000_000):
        q = lo + (np.arange(start, min(n, start + 1_000_000)) + 0.5) * dq
        v = potential(q)
        outer = np.sqrt(2.0 * np.clip(energy + 0.5 * width - v, 0.0, None))
        inner = np.sqrt(2.0 * np.clip(energy - 0.5 * width - v, 0.0, None))
        total += np.sum(2.0 * (outer - inner))
    return total * dq / (2.0 * np.pi * width)
