"""Microcanonical temperature, caloric curves and thermal energy distributions.

All quantities derive from ``ln rho``: ``beta_mic = (ln rho)'`` and
``C_mic = -beta^2 / (ln rho)''`` at each solution of ``beta_mic(E) = beta``.
Because ``beta_mic`` need not be monotonic, a single ``beta`` can have
several solutions; the caloric curve is therefore kept as a list of
monotonic branches and every query reports which branch it used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ._numerics import central_offsets, fd_weights
from .density import LevelDensity, SingularWindowError, laplace_transform, log_density_derivative, node_log_derivatives

DECREASING = "decreasing"
INCREASING = "increasing"
SINGULAR = "singular"

#: |d^2 ln rho / dE^2| below this at a root is reported as a divergence
DIVERGENCE_THRESHOLD = 1e-8


class MicrocanonicalUndefined(ValueError):
    """beta_mic has no non-negative value anywhere above the requested energy."""


class MultivaluedRegime(ValueError):
    """beta falls where the caloric curve has more than one solution."""


def beta_mic(density: LevelDensity, energy: float, window: float = 2.0) -> float:
    """``d ln rho / dE`` at ``energy``.

    Raises :class:`SingularWindowError` near a singular point and
    :class:`MicrocanonicalUndefined` when the value is negative and rho never
    increases again on the grid (a power law with M < 1, for example).
    """
    value, error = log_density_derivative(density, 1, energy, window)
    if value < -max(error, 1e-10):
        tail = density.values[density.grid >= energy]
        if np.all(np.diff(tail) <= 0.0):
            raise MicrocanonicalUndefined(
                f"beta_mic(E={energy:.6g}) = {value:.6g} < 0 and rho does not increase above E"
            )
    return value


@dataclass(frozen=True)
class Branch:
    """Maximal run of samples on which beta_mic is strictly monotonic."""

    index: int
    energies: np.ndarray
    betas: np.ndarray
    tag: str

    @property
    def energy_range(self) -> tuple[float, float]:
        return float(self.energies[0]), float(self.energies[-1])

    @property
    def beta_range(self) -> tuple[float, float]:
        return float(self.betas.min()), float(self.betas.max())

    @property
    def capacity_sign(self) -> int:
        return 1 if self.tag == DECREASING else -1


@dataclass(frozen=True)
class SingularCrossing:
    """One-sided limits of beta_mic around a singular window."""

    energy: float
    beta_left: float
    beta_right: float

    @property
    def jump(self) -> float:
        return self.beta_right - self.beta_left


@dataclass(frozen=True)
class Root:
    energy: float
    tag: str
    branch: int | None


@dataclass(frozen=True)
class CaloricCurve:
    density: LevelDensity
    energies: np.ndarray
    betas: np.ndarray
    slopes: np.ndarray
    branches: tuple[Branch, ...]
    turning_points: tuple[float, ...]
    singular_crossings: tuple[SingularCrossing, ...]
    window: float = 2.0

    def branch_at(self, energy: float) -> Branch | None:
        for b in self.branches:
            lo, hi = b.energy_range
            if lo <= energy <= hi:
                return b
        return None

    def nearest_branch(self, energy: float) -> Branch | None:
        if not self.branches:
            return None
        return min(self.branches, key=lambda b: max(b.energy_range[0] - energy, energy - b.energy_range[1], 0.0))


def _segments(mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open index ranges of consecutive True entries."""
    padded = np.concatenate([[False], mask, [False]]).astype(int)
    edges = np.flatnonzero(np.diff(padded))
    return list(zip(edges[::2], edges[1::2]))


def build_caloric_curve(density: LevelDensity, window: float = 2.0) -> CaloricCurve:
    """Sample beta_mic on the grid and split it into monotonic branches.

    Singular windows and nodes with vanishing rho are excluded and act as
    branch boundaries; each interior singular point records the one-sided
    values of beta_mic next to it.
    """
    grid = density.grid
    betas = node_log_derivatives(density, 1, window)
    slopes = node_log_derivatives(density, 2, window)
    valid = np.isfinite(betas) & np.isfinite(slopes) & (density.values > 0)
    branches: list[Branch] = []
    turning: list[float] = []
    for lo, hi in _segments(valid):
        sign = np.sign(slopes[lo:hi])
        # exact zeros continue the current run
        for i in range(1, sign.size):
            if sign[i] == 0:
                sign[i] = sign[i - 1]
        cuts = np.flatnonzero(sign[1:] != sign[:-1]) + 1
        for i in cuts:
            a, b = lo + i - 1, lo + i
            t = slopes[a] / (slopes[a] - slopes[b])
            turning.append(float(grid[a] + t * (grid[b] - grid[a])))
        starts = np.concatenate([[0], cuts])
        stops = np.concatenate([cuts, [sign.size]])
        for s, e in zip(starts, stops):
            tag = INCREASING if sign[s] > 0 else DECREASING
            sl = slice(lo + s, lo + e)
            branches.append(Branch(len(branches), grid[sl].copy(), betas[sl].copy(), tag))
    crossings = []
    for point in density.singular_points:
        left = np.flatnonzero(valid & (grid < point.energy))
        right = np.flatnonzero(valid & (grid > point.energy))
        if left.size and right.size:
            crossings.append(SingularCrossing(point.energy, float(betas[left[-1]]), float(betas[right[0]])))
    return CaloricCurve(density, grid, betas, slopes, tuple(branches), tuple(turning), tuple(crossings), window)


def _refine(fn, a: float, b: float, tol: float, exact: bool) -> float:
    fa = fn(a)
    if exact:
        return optimize.brentq(fn, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = fn(m)
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _root_tag(curve: CaloricCurve, energy: float) -> tuple[str, int | None]:
    try:
        d2, _ = log_density_derivative(curve.density, 2, energy, curve.window)
    except SingularWindowError:
        return SINGULAR, None
    branch = curve.branch_at(energy) or curve.nearest_branch(energy)
    tag = INCREASING if d2 > 0 else DECREASING
    return tag, branch.index if branch else None


def solve_caloric(curve: CaloricCurve, beta: float, exact: bool = False) -> list[Root]:
    """All energies with ``beta_mic(E) = beta``, in increasing energy.

    Roots are bracketed between neighbouring samples and bisected to 1/64 of
    a grid cell (``exact=True`` refines to machine precision instead). A
    sign change across a singular window yields a root tagged ``"singular"``
    located at the singular energy.
    """
    if not beta > 0.0:
        raise ValueError("beta must be positive")
    density = curve.density
    h = density.spacing
    fn = lambda e: log_density_derivative(density, 1, e, curve.window)[0] - beta
    diff = curve.betas - beta
    valid = np.isfinite(diff) & (density.values > 0)
    roots: list[Root] = []
    segments = _segments(valid)
    for lo, hi in segments:
        d = diff[lo:hi]
        e = curve.energies[lo:hi]
        for i in np.flatnonzero(d == 0.0):
            roots.append(Root(float(e[i]), *_root_tag(curve, float(e[i]))))
        for i in np.flatnonzero(d[:-1] * d[1:] < 0):
            root = _refine(fn, float(e[i]), float(e[i + 1]), h / 64.0, exact)
            roots.append(Root(root, *_root_tag(curve, root)))
    for (_, end), (start, _) in zip(segments[:-1], segments[1:]):
        if diff[end - 1] * diff[start] < 0:
            inside = [p.energy for p in density.singular_points if curve.energies[end - 1] < p.energy < curve.energies[start]]
            energy = inside[0] if inside else 0.5 * (curve.energies[end - 1] + curve.energies[start])
            roots.append(Root(float(energy), SINGULAR, None))
    return sorted(roots, key=lambda r: r.energy)


@dataclass(frozen=True)
class MicroCapacity:
    value: float
    tag: str
    energy: float
    branch: int | None


def heat_capacity_micro(density: LevelDensity, beta: float, curve: CaloricCurve | None = None) -> list[MicroCapacity]:
    """``-beta^2 / (ln rho)''`` at every caloric root of ``beta``.

    Roots where the second derivative vanishes are reported as signed
    infinities; roots inside a singular window as NaN.
    """
    curve = curve or build_caloric_curve(density)
    out = []
    for root in solve_caloric(curve, beta, exact=True):
        if root.tag == SINGULAR:
            out.append(MicroCapacity(math.nan, root.tag, root.energy, root.branch))
            continue
        d2, _ = log_density_derivative(density, 2, root.energy, curve.window)
        if abs(d2) < DIVERGENCE_THRESHOLD:
            value = math.inf if root.tag == DECREASING else -math.inf
        else:
            value = -(beta**2) / d2
        out.append(MicroCapacity(value, root.tag, root.energy, root.branch))
    return out


@dataclass(frozen=True)
class ThermalDistribution:
    """``w_beta(E)`` on the density grid, scaled so its maximum is 1.

    Multiply ``values`` by ``normalization`` to get the probability density.
    ``extrema`` lists ``(E, "max" | "min")`` in increasing energy.
    """

    beta: float
    energies: np.ndarray
    values: np.ndarray
    normalization: float
    extrema: tuple[tuple[float, str], ...]

    @property
    def maxima(self) -> list[float]:
        return [e for e, kind in self.extrema if kind == "max"]

    @property
    def minima(self) -> list[float]:
        return [e for e, kind in self.extrema if kind == "min"]

    @property
    def is_bimodal(self) -> bool:
        return len(self.maxima) >= 2

    @property
    def mode(self) -> float:
        """Global maximum (the most probable energy)."""
        return float(self.energies[np.argmax(self.values)])

    def mean(self) -> float:
        w = self.values * self.normalization
        return float(np.trapezoid(w * self.energies, self.energies))


def thermal_distribution(density: LevelDensity, beta: float, window: float = 2.0) -> ThermalDistribution:
    """Canonical energy distribution ``rho(E) exp(-beta E) / Z`` on the grid.

    Extrema come from sign changes of the discrete slope and are refined on
    ``beta_mic(E) = beta`` when the bracket is clear of singular windows.
    """
    if not beta > 0.0:
        raise ValueError("beta must be positive")
    grid = density.grid
    positive = density.values > 0
    with np.errstate(divide="ignore"):
        logw = np.log(density.values) - beta * grid
    peak = logw[positive].max()
    values = np.where(positive, np.exp(logw - peak), 0.0)
    normalization = math.exp(peak) / laplace_transform(density, beta)

    idx = np.flatnonzero(positive)
    slope = np.sign(np.diff(values[idx]))
    extrema: list[tuple[float, str]] = []
    if slope.size and slope[0] < 0:
        extrema.append((float(grid[idx[0]]), "max"))
    nonzero = np.flatnonzero(slope)
    fn = lambda e: log_density_derivative(density, 1, e, window)[0] - beta
    for j0, j1 in zip(nonzero[:-1], nonzero[1:]):
        if slope[j0] == slope[j1]:
            continue
        kind = "max" if slope[j0] > 0 else "min"
        a, b = float(grid[idx[j0]]), float(grid[idx[j1 + 1]])
        try:
            if fn(a) * fn(b) < 0:
                energy = _refine(fn, a, b, density.spacing / 64.0, False)
            else:
                energy = float(grid[idx[j1]])
        except (SingularWindowError, ValueError):
            energy = float(grid[idx[j1]])
        extrema.append((energy, kind))
    return ThermalDistribution(float(beta), grid, values, normalization, tuple(extrema))


def most_probable_energy(density: LevelDensity, beta: float) -> float:
    return thermal_distribution(density, beta).mode


def micro_capacity_derivative(
    density: LevelDensity,
    n: int,
    beta: float,
    step: float | None = None,
    curve: CaloricCurve | None = None,
) -> float:
    """n-th derivative of the single-branch C_mic(beta) by central differences.

    Every stencil temperature must have exactly one non-singular caloric
    root; otherwise :class:`MultivaluedRegime` is raised.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    curve = curve or build_caloric_curve(density)
    step = step or 0.02 * beta
    offsets = central_offsets(n, 4)
    values = []
    for k in offsets:
        b = beta + k * step
        roots = solve_caloric(curve, b, exact=True)
        if len(roots) != 1 or roots[0].tag == SINGULAR:
            raise MultivaluedRegime(f"{len(roots)} caloric roots at beta = {b:.6g}")
        d2, _ = log_density_derivative(density, 2, roots[0].energy, curve.window)
        values.append(-(b**2) / d2)
    return float(np.dot(fd_weights(offsets, n), values) / step**n)
