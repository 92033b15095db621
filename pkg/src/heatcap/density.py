"""Semiclassical level densities of separable systems.

A one-dimensional component contributes

    rho_1(E) = (1/pi) * integral over {V < E} of dq / sqrt(2 (E - V(q)))

and its k-fold antiderivatives have the closed structure

    A_k(E) = J_{k-1/2}(E) / (sqrt(2 pi) Gamma(k + 1/2)),
    J_s(E) = integral over {V < E} of (E - V(q))**s dq,

so cumulative counts, cell masses and convolutions with oscillator
densities (polynomials in E) are all exact configuration-space integrals.
For a polynomial well the inverse-square-root endpoint behaviour is removed
by ``q = mid + half*sin(theta)`` on each classically allowed interval.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import special

from ._numerics import fd_weights, graded_rule
from .potential import Kind, PotentialComponent1D, SeparableSystem, stationary_points_1d


class SingularWindowError(ValueError):
    """Raised when a derivative is requested too close to a non-analytic point."""

    def __init__(self, energy: float, singular_energy: float):
        super().__init__(
            f"E = {energy:.12g} lies within the exclusion window of the singular point {singular_energy:.12g}"
        )
        self.energy = energy
        self.singular_energy = singular_energy


@dataclass(frozen=True)
class SingularPoint:
    energy: float
    kind: str  # "jump", "log", "inverse_sqrt", "power", "degenerate"
    multiplicity: int = 1


Evaluator = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True, eq=False)
class LevelDensity:
    """Level density sampled on a uniform energy grid.

    ``evaluator(E, k)`` (optional) returns the exact k-th antiderivative of
    rho at arbitrary energies (k = 0 is rho itself); densities produced by
    numerical convolution carry only node values.
    """

    grid: np.ndarray
    values: np.ndarray
    f: int
    singular_points: tuple[SingularPoint, ...] = ()
    evaluator: Evaluator | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or values.shape != grid.shape:
            raise ValueError("grid and values must be 1-D arrays of equal length >= 2")
        steps = np.diff(grid)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps.mean():
            raise ValueError("energy grid must be uniform and strictly increasing")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("level density must be finite and non-negative")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "singular_points", tuple(sorted(self.singular_points, key=lambda s: s.energy)))

    @property
    def spacing(self) -> float:
        return float((self.grid[-1] - self.grid[0]) / (self.grid.size - 1))

    @property
    def start(self) -> float:
        return float(self.grid[0])

    def __call__(self, energy):
        """rho at arbitrary energies (exact if possible, else linear interpolation)."""
        energy = np.asarray(energy, dtype=float)
        if self.evaluator is not None:
            return self.evaluator(energy, 0)
        return np.interp(energy, self.grid, self.values, left=0.0, right=np.nan)

    def singular_energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.singular_points])

    def nearest_singular(self, energy: float) -> float | None:
        es = self.singular_energies()
        if es.size == 0:
            return None
        return float(es[np.argmin(np.abs(es - energy))])

    # -- serialization --------------------------------------------------
    def to_csv(self, path) -> tuple[Path, Path]:
        """Write ``E,rho`` rows and a sidecar ``*_singular.csv`` (E_c,type)."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["E", "rho"])
            for e, r in zip(self.grid, self.values):
                writer.writerow([_fmt(e), _fmt(r)])
        side = path.with_name(path.stem + "_singular.csv")
        with side.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["E_c", "type"])
            for s in self.singular_points:
                writer.writerow([_fmt(s.energy), s.kind])
        return path, side

    @classmethod
    def from_csv(cls, path, f: int) -> "LevelDensity":
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        side = path.with_name(path.stem + "_singular.csv")
        points = []
        if side.exists():
            with side.open() as fh:
                for row in csv.DictReader(fh):
                    points.append(SingularPoint(float(row["E_c"]), row["type"]))
        return cls(data[:, 0], data[:, 1], f, tuple(points))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# power laws


@dataclass(frozen=True)
class PowerLawSpec:
    """``H = sum_i a_i|p_i|^J_i + b_i|q_i|^I_i`` or, if ``rotational``,
    ``H = a|p|^J + b|q|^I`` in f dimensions (``terms`` then holds one tuple).

    ``terms`` entries are ``(J, I, a, b)``.
    """

    terms: tuple[tuple[float, float, float, float], ...]
    rotational: bool = False
    dof: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(tuple(float(x) for x in t) for t in self.terms))
        for t in self.terms:
            if min(t) <= 0:
                raise ValueError("powers and coefficients must be positive")
        if self.rotational and (len(self.terms) != 1 or not self.dof):
            raise ValueError("rotational spec needs exactly one (J, I, a, b) term and dof")

    @classmethod
    def separable(cls, terms) -> "PowerLawSpec":
        return cls(tuple(terms))

    @classmethod
    def rotational_form(cls, f: int, J: float, I: float, a: float = 1.0, b: float = 1.0) -> "PowerLawSpec":
        return cls(((J, I, a, b),), rotational=True, dof=f)

    @property
    def f(self) -> int:
        return self.dof if self.rotational else len(self.terms)

    @property
    def M(self) -> float:
        if self.rotational:
            J, I, _, _ = self.terms[0]
            return self.f / J + self.f / I
        return sum(1.0 / J + 1.0 / I for J, I, _, _ in self.terms)

    @property
    def log_prefactor(self) -> float:
        """log of A in Z(beta) = A * beta**-M (hbar = 1)."""
        f = self.f
        out = -f * math.log(2.0 * math.pi)
        if self.rotational:
            J, I, a, b = self.terms[0]
            log_sphere = math.log(2.0) + 0.5 * f * math.log(math.pi) - math.lgamma(0.5 * f)
            out += 2 * log_sphere
            out += math.lgamma(f / J) - math.log(J) - (f / J) * math.log(a)
            out += math.lgamma(f / I) - math.log(I) - (f / I) * math.log(b)
            return out
        for J, I, a, b in self.terms:
            out += math.log(2.0) + math.lgamma(1.0 + 1.0 / J) - math.log(a) / J
            out += math.log(2.0) + math.lgamma(1.0 + 1.0 / I) - math.log(b) / I
        return out

    def one_dim_factors(self) -> list[tuple[float, float]]:
        """(coefficient, power) of each 1-D Boltzmann factor (separable only)."""
        if self.rotational:
            raise ValueError("rotational Hamiltonians do not factorize")
        out = []
        for J, I, a, b in self.terms:
            out += [(a, J), (b, I)]
        return out


def density_power_law(spec: PowerLawSpec, energy, k: int = 0):
    """Exact level density ``A E^(M-1) / Gamma(M)`` (k-th antiderivative for k > 0).

    The constant is the exact phase-space normalization for separable and
    rotational forms with arbitrary positive powers.
    """
    energy = np.asarray(energy, dtype=float)
    if np.any(energy <= 0):
        raise ValueError("power-law density requires E > 0")
    m = spec.M + k
    return np.exp(spec.log_prefactor + (m - 1.0) * np.log(energy) - math.lgamma(m))


def power_law_density(spec: PowerLawSpec, e_max: float, n: int = 4000, start: float = 0.0) -> LevelDensity:
    """Grid density for a power-law spec with its exact evaluator."""

    def evaluator(energy, k=0):
        energy = np.asarray(energy, dtype=float)
        out = np.zeros_like(energy)
        pos = energy > 0
        out[pos] = density_power_law(spec, energy[pos], k)
        return out

    grid = np.linspace(start, e_max, n)
    values = evaluator(grid)
    if start <= 0.0 and spec.M < 1.0:
        values[grid <= 0] = 0.0
    return LevelDensity(grid, values, spec.f, (SingularPoint(0.0, "power"),), evaluator, {"M": spec.M})


# ---------------------------------------------------------------------------
# plateau wells


def density_plateau(f: int, plateaus, frequencies: Sequence[float], energy, k: int = 0):
    """Exact density of a plateau well plus f-1 oscillators.

    ``sum_k L_k Gamma(1/2) (E-E_k)^(f-3/2) / (pi sqrt(2) Gamma(f-1/2) prod(omega))``;
    ``k > 0`` gives the k-th antiderivative.
    """
    if f < 1:
        raise ValueError("f >= 1 required")
    if len(frequencies) != f - 1:
        raise ValueError(f"expected {f - 1} oscillator frequencies, got {len(frequencies)}")
    energy = np.asarray(energy, dtype=float)
    power = f + k - 1.5
    coeff = math.sqrt(math.pi) / (math.pi * math.sqrt(2.0) * math.gamma(power + 1.0))
    coeff /= float(np.prod(frequencies)) if len(frequencies) else 1.0
    out = np.zeros_like(energy)
    for item in plateaus:
        e_k, length = item[0], item[1]
        x = energy - e_k
        pos = x > 0
        out[pos] += length * x[pos] ** power
    return coeff * out


# ---------------------------------------------------------------------------
# 1-D configuration integrals


def _crossings(component: PotentialComponent1D, energy: np.ndarray, points) -> list[np.ndarray]:
    """Roots of V(q) = E on each monotone segment (NaN where absent)."""
    xs = [p.position for p in sorted(points, key=lambda p: p.position)]
    e_top = float(np.max(energy)) if energy.size else 1.0
    reach = max(1.0, max(abs(x) for x in xs))
    while component(-reach) <= e_top or component(reach) <= e_top:
        reach *= 2.0
    bounds = [-reach] + xs + [reach]
    out = []
    for left, right in zip(bounds[:-1], bounds[1:]):
        vl, vr = float(component(left)), float(component(right))
        lo_v, hi_v = min(vl, vr), max(vl, vr)
        mask = (energy > lo_v) & (energy < hi_v)
        root = np.full(energy.shape, np.nan)
        if np.any(mask):
            target = energy[mask]
            lo = np.full(target.shape, left)
            hi = np.full(target.shape, right)
            increasing = vr > vl
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                above = component(mid) > target
                if increasing:
                    hi = np.where(above, mid, hi)
                    lo = np.where(above, lo, mid)
                else:
                    lo = np.where(above, mid, lo)
                    hi = np.where(above, hi, mid)
                if np.all((hi - lo) <= 4e-16 * np.maximum(1.0, np.abs(lo))):
                    break
            root[mask] = 0.5 * (lo + hi)
        out.append(root)
    return out


def _polynomial_config_integrals(component, energy, powers, rule=None):
    """J_s(E) for a polynomial well with c > 0, vectorized over E."""
    points = stationary_points_1d(component)
    crossings = np.stack(_crossings(component, energy, points), axis=1)
    interior = np.array(sorted(p.position for p in points if p.curvature != "min"))
    t_nodes, t_weights = rule if rule is not None else graded_rule()

    idx, qls, qrs, tas, tbs = [], [], [], [], []
    for i in range(energy.size):
        row = crossings[i][~np.isnan(crossings[i])]
        for ql, qr in zip(row[0::2], row[1::2]):
            mid, half = 0.5 * (ql + qr), 0.5 * (qr - ql)
            cuts = interior[(interior > ql) & (interior < qr)]
            thetas = [-0.5 * np.pi] + [math.asin(max(-1.0, min(1.0, (x - mid) / half))) for x in cuts] + [0.5 * np.pi]
            for ta, tb in zip(thetas[:-1], thetas[1:]):
                idx.append(i)
                qls.append(ql)
                qrs.append(qr)
                tas.append(ta)
                tbs.append(tb)

    result = {s: np.zeros(energy.shape) for s in powers}
    if not idx:
        return result
    idx = np.array(idx)
    ql, qr = np.array(qls)[:, None], np.array(qrs)[:, None]
    ta, tb = np.array(tas)[:, None], np.array(tbs)[:, None]
    theta = ta + (tb - ta) * t_nodes[None, :]
    w = (tb - ta) * t_weights[None, :]
    mid, half = 0.5 * (ql + qr), 0.5 * (qr - ql)
    q = mid + half * np.sin(theta)
    cos = np.cos(theta)
    # E - V = (q - ql)(qr - q) g(q), g from exact polynomial deflation
    s_sum, p_prod = ql + qr, ql * qr
    t2 = -component.c
    t1 = s_sum * t2
    t0 = -component.b + s_sum * t1 - p_prod * t2
    g = -(t2 * q * q + t1 * q + t0)
    g = np.maximum(g, 1e-300)
    for s in powers:
        vals = half ** (2 * s + 1) * cos ** (2 * s + 1) * g**s if s != -0.5 else g**-0.5
        piece = np.sum(vals * w, axis=1)
        acc = np.zeros(energy.shape)
        np.add.at(acc, idx, piece)
        result[s] = acc
    return result


def config_integrals(component: PotentialComponent1D, energy, powers: Sequence[float]) -> dict[float, np.ndarray]:
    """``J_s(E) = integral over {V<E} of (E - V)^s dq`` for each s in ``powers``."""
    energy = np.atleast_1d(np.asarray(energy, dtype=float))
    if component.kind is Kind.PLATEAU:
        out = {}
        for s in powers:
            acc = np.zeros(energy.shape)
            for e_k, length in component.plateau_multiset:
                x = energy - e_k
                pos = x > 0
                acc[pos] += length * x[pos] ** s
            out[s] = acc
        return out
    if component.kind is Kind.POWER or component.is_harmonic:
        if component.kind is Kind.POWER:
            b, power = component.b, component.exponent
        else:
            b, power = component.b, 2.0
        out = {}
        pos = energy > 0
        for s in powers:
            acc = np.zeros(energy.shape)
            x = energy[pos]
            acc[pos] = 2.0 * (x / b) ** (1.0 / power) * x**s * special.beta(1.0 / power, s + 1.0) / power
            out[s] = acc
        return out
    out = {s: np.zeros(energy.shape) for s in powers}
    pos = energy > 0
    if np.any(pos):
        sub = _polynomial_config_integrals(component, energy[pos], powers)
        for s in powers:
            out[s][pos] = sub[s]
    return out


def component_antiderivative(component: PotentialComponent1D, energy, k: int = 0) -> np.ndarray:
    """k-th antiderivative of the 1-D density (k = 0: the density itself)."""
    s = k - 0.5
    j = config_integrals(component, energy, [s])[s]
    return j / (math.sqrt(2.0 * math.pi) * math.gamma(k + 0.5))


def component_singular_points(component: PotentialComponent1D) -> list[SingularPoint]:
    if component.kind is Kind.PLATEAU:
        return [SingularPoint(e, "inverse_sqrt") for e, _ in component.plateau_multiset]
    if component.kind is Kind.POWER:
        return [SingularPoint(0.0, "power")]
    kinds = {"min": "jump", "max": "log", "degenerate": "degenerate"}
    return [SingularPoint(p.energy, kinds[p.curvature]) for p in stationary_points_1d(component)]


def density_1d_numeric(component: PotentialComponent1D, energy, eps: float = 1e-9):
    """Level density of a single degree of freedom.

    Energies that coincide with a barrier top or a plateau energy (where rho
    diverges) are evaluated at ``E + eps``; energies below the minimum give 0.
    """
    energy = np.asarray(energy, dtype=float)
    scalar = energy.ndim == 0
    e = np.atleast_1d(energy).copy()
    for sp in component_singular_points(component):
        if sp.kind in ("log", "inverse_sqrt", "degenerate"):
            hit = np.abs(e - sp.energy) <= 1e-12 * max(1.0, abs(sp.energy))
            e[hit] = sp.energy + eps
    out = component_antiderivative(component, e, 0)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# grids and convolution


def _merge_points(points: list[SingularPoint], e_max: float, tol: float = 1e-10) -> tuple[SingularPoint, ...]:
    points = sorted((p for p in points if p.energy <= e_max), key=lambda p: p.energy)
    merged: list[SingularPoint] = []
    for p in points:
        if merged and abs(p.energy - merged[-1].energy) <= tol * max(1.0, abs(p.energy)):
            last = merged[-1]
            kind = last.kind if last.kind == p.kind else "mixed"
            merged[-1] = SingularPoint(last.energy, kind, last.multiplicity + p.multiplicity)
        else:
            merged.append(p)
    return tuple(merged)


def _combine_kinds(kinds: Sequence[str]) -> str:
    if "degenerate" in kinds:
        return "degenerate"
    if "inverse_sqrt" in kinds:
        return "inverse_sqrt"
    if "power" in kinds:
        return "power"
    return "log" if sum(k == "log" for k in kinds) % 2 else "jump"


def sum_singular_points(groups: Sequence[Sequence[SingularPoint]], e_max: float) -> tuple[SingularPoint, ...]:
    """All sums taking one singular point from each group."""
    pts = []
    for combo in itertools.product(*groups):
        energy = sum(p.energy for p in combo)
        if energy <= e_max:
            pts.append(SingularPoint(energy, _combine_kinds([p.kind for p in combo])))
    return _merge_points(pts, e_max)


def _node_values(evaluator: Evaluator, grid: np.ndarray, singular, h: float):
    """Evaluate rho at nodes, moving nodes that sit on a divergence by h/2."""
    nodes = grid.copy()
    shifted = []
    for sp in singular:
        if sp.kind in ("log", "inverse_sqrt", "degenerate", "mixed"):
            hit = np.abs(nodes - sp.energy) <= 1e-12 * max(1.0, abs(sp.energy))
            if np.any(hit):
                nodes[hit] = sp.energy + 0.5 * h
                shifted.append(sp.energy)
    return evaluator(nodes, 0), shifted


def system_density(system: SeparableSystem, e_max: float, n: int = 4000) -> LevelDensity:
    """Level density of a separable system on ``linspace(0, e_max, n)``.

    Oscillator components are folded in analytically: an n-dimensional
    oscillator density is a polynomial, so its convolution with a 1-D density
    is an antiderivative of that density. With at most one anharmonic
    component the result is exact at every energy; further anharmonic
    components are added by moment-matched convolution.
    """
    comps = list(system.components)
    harmonic = [c for c in comps if c.is_harmonic]
    others = [c for c in comps if not c.is_harmonic]
    if not others:
        others = [harmonic.pop(0)]
    d = len(harmonic)
    log_omega = sum(math.log(c.omega) for c in harmonic)
    grid = np.linspace(0.0, e_max, n)
    h = grid[1] - grid[0]

    singular = sum_singular_points([component_singular_points(c) for c in comps], e_max)
    last = others[-1]

    def evaluator(energy, k=0, _c=last):
        return component_antiderivative(_c, energy, d + k) * math.exp(-log_omega)

    values, shifted = _node_values(evaluator, grid, singular, h)
    if len(others) == 1:
        return LevelDensity(grid, values, system.f, singular, evaluator, {"shifted_nodes": shifted, "method": "exact"})
    partner_points = sum_singular_points(
        [component_singular_points(last)] + [[SingularPoint(0.0, "jump")]] * d, e_max
    )
    partner = LevelDensity(grid, values, d + 1, partner_points, evaluator, {"shifted_nodes": shifted})
    kernels = [one_dim_density(c, grid) for c in others[:-1]]
    out = convolve_densities(kernels + [partner])
    return LevelDensity(out.grid, out.values, system.f, singular, None, out.metadata)


def one_dim_density(component: PotentialComponent1D, grid: np.ndarray) -> LevelDensity:
    grid = np.asarray(grid, dtype=float)
    h = grid[1] - grid[0]
    singular = tuple(p for p in component_singular_points(component) if p.energy <= grid[-1])

    def evaluator(energy, k=0, _c=component):
        return component_antiderivative(_c, energy, k)

    values, shifted = _node_values(evaluator, grid, singular, h)
    return LevelDensity(grid, values, 1, singular, evaluator, {"shifted_nodes": shifted})


def antiderivative_nodes(density: LevelDensity, levels: int) -> list[np.ndarray]:
    """Node values of rho and of as many of its antiderivatives as are known (<= levels)."""
    out = [density.values]
    if density.evaluator is not None:
        out += [density.evaluator(density.grid, k) for k in range(1, levels + 1)]
    else:
        out += list(density.metadata.get("antiderivatives", ()))[:levels]
    return out


def _cell_moments(levels: list[np.ndarray], k: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Mass and first moment about the cell midpoint of the level-k function on each cell."""
    if k + 2 < len(levels):
        g, hh = levels[k + 1], levels[k + 2]
        mass = np.diff(g)
        first = 0.5 * h * (g[1:] + g[:-1]) - np.diff(hh)
        return mass, first
    r = levels[k]
    return 0.5 * h * (r[1:] + r[:-1]), h * h * (r[1:] - r[:-1]) / 12.0


def cell_weights(density: LevelDensity) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell ``(int rho*(b-u)/h, int rho*(u-a)/h)`` weights of rho.

    Exact from antiderivatives when known, else from the piecewise-linear
    interpolant of the node values.
    """
    h = density.spacing
    mass, first = _cell_moments(antiderivative_nodes(density, 2), 0, h)
    upper = 0.5 * mass + first / h
    return mass - upper, upper


def _pair_convolve(m1, mu1, m2, mu2, h: float) -> np.ndarray:
    # each factor is the linear function with the cell's mass and first
    # moment; aligned cell pairs integrate to (m1*m2 - 12*mu1*mu2/h^2)/h
    n = m1.size + 1
    out = np.zeros(n)
    out[1:] = (np.convolve(m1, m2)[: n - 1] - 12.0 / (h * h) * np.convolve(mu1, mu2)[: n - 1]) / h
    return out


def convolve_densities(parts: Sequence[LevelDensity]) -> LevelDensity:
    """Density of a sum of independent energies.

    Every factor is represented on each grid cell by the linear function
    having the cell's exact mass and first moment (taken from
    antiderivatives where known), so jumps and integrable divergences are
    integrated exactly at the level of cell moments. Antiderivatives of the
    running result are propagated so that later stages stay exact in the
    same sense.
    """
    if not parts:
        raise ValueError("nothing to convolve")
    h = parts[0].spacing
    for p in parts[1:]:
        if abs(p.spacing - h) > 1e-9 * h:
            raise ValueError("all densities must share the same grid spacing")
    if len(parts) == 1:
        return parts[0]
    n = min(p.grid.size for p in parts)
    exact = [i for i, p in enumerate(parts) if p.evaluator is not None]
    pool = exact if exact else range(len(parts))
    pi = max(pool, key=lambda i: (parts[i].f, i))
    kernels = [p for i, p in enumerate(parts) if i != pi]
    levels = [a[:n] for a in antiderivative_nodes(parts[pi], 2 * len(kernels) + 2)]
    start = parts[pi].start
    for kern in kernels:
        m1, mu1 = _cell_moments([a[:n] for a in antiderivative_nodes(kern, 2)], 0, h)
        new = []
        for k in range(max(len(levels) - 2, 1)):
            m2, mu2 = _cell_moments(levels, k, h)
            new.append(_pair_convolve(m1, mu1, m2, mu2, h))
        levels = new
        start += kern.start
    grid = start + h * np.arange(n)
    groups = []
    for p in parts:
        pts = list(p.singular_points)
        if p.start not in [s.energy for s in pts]:
            pts.append(SingularPoint(p.start, "jump"))
        groups.append(pts)
    singular = sum_singular_points(groups, grid[-1])
    values = np.maximum(levels[0], 0.0)
    meta = {"method": "moment-matched convolution", "antiderivatives": tuple(levels[1:3])}
    return LevelDensity(grid, values, sum(p.f for p in parts), singular, None, meta)


# ---------------------------------------------------------------------------
# Laplace transform


def _exp_moments(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """int_0^1 e^{-x t} dt and int_0^1 (t - 1/2) e^{-x t} dt."""
    small = np.abs(x) < 1e-3
    xs = np.where(small, 1.0, x)
    m0 = np.where(small, 1.0 - x / 2.0 + x * x / 6.0 - x**3 / 24.0, -np.expm1(-xs) / xs)
    m1_big = (1.0 - (1.0 + xs) * np.exp(-xs)) / xs**2 + np.expm1(-xs) / (2.0 * xs)
    m1 = np.where(small, -x / 12.0 + x * x / 24.0 - x**3 / 80.0, m1_big)
    return m0, m1


def laplace_transform(density: LevelDensity, beta: float) -> float:
    """``int rho(E) exp(-beta E) dE`` over the grid.

    On each cell rho is replaced by the linear function with the cell's mass
    and first moment (exact ones when available) and integrated exactly
    against the exponential.
    """
    h = density.spacing
    mass, first = _cell_moments(antiderivative_nodes(density, 2), 0, h)
    a = density.grid[:-1]
    m0, m1 = _exp_moments(np.full(a.shape, beta * h))
    # linear rho = mass/h + 12 first/h^3 (u - mid); integrate against e^{-beta u}
    weight = np.exp(-beta * a)
    return float(np.sum(weight * (mass * m0 + 12.0 * first / h * m1)))


# ---------------------------------------------------------------------------
# logarithmic derivatives


def _poly_derivative(x: np.ndarray, y: np.ndarray, order: int) -> float:
    coeffs = np.polynomial.polynomial.polyfit(x, y, x.size - 1)
    return float(coeffs[order] * math.factorial(order)) if order < coeffs.size else 0.0


def _stencil_positions(density: LevelDensity, energy: float, m: int, window: float):
    """Stencil abscissae (in units of h, relative to E) avoiding singular points."""
    h = density.spacing
    es = density.singular_energies()
    if es.size and np.min(np.abs(es - energy)) < window * h:
        raise SingularWindowError(energy, density.nearest_singular(energy))
    exact = density.evaluator is not None
    if exact:
        base = np.arange(m) - (m - 1) / 2.0
        lo_shift, hi_shift = -np.inf, np.inf
        for ec in es:
            d = (ec - energy) / h
            if d > 0:
                hi_shift = min(hi_shift, d - 0.25 - base[-1])
            else:
                lo_shift = max(lo_shift, d + 0.25 - base[0])
        if lo_shift > hi_shift:
            raise SingularWindowError(energy, density.nearest_singular(energy))
        shift = min(max(0.0, lo_shift), hi_shift)
        return base + shift
    # node stencil
    pos = (energy - density.start) / h
    i0 = int(round(pos)) - (m - 1) // 2
    nodes = np.arange(m) + i0
    rel = nodes - pos
    lo, hi = -np.inf, np.inf
    for ec in es:
        d = (ec - energy) / h
        if d > 0:
            hi = min(hi, d - 0.25)
        else:
            lo = max(lo, d + 0.25)
    shift = 0
    while rel[-1] + shift > hi:
        shift -= 1
    while rel[0] + shift < lo:
        shift += 1
    if rel[-1] + shift > hi:
        raise SingularWindowError(energy, density.nearest_singular(energy))
    return rel + shift


def _log_values(density: LevelDensity, energy: float, rel: np.ndarray) -> np.ndarray:
    h = density.spacing
    if density.evaluator is not None:
        vals = density.evaluator(energy + rel * h, 0)
    else:
        idx = np.rint((energy - density.start) / h + rel).astype(int)
        if idx.min() < 0 or idx.max() >= density.grid.size:
            raise ValueError(f"derivative stencil at E = {energy:.6g} leaves the energy grid")
        vals = density.values[idx]
    if np.any(vals <= 0):
        raise ValueError(f"rho vanishes inside the derivative stencil at E = {energy:.6g}")
    return np.log(vals)


def log_density_derivative(density: LevelDensity, order: int, energy: float, window: float = 2.0) -> tuple[float, float]:
    """n-th derivative of ln rho at E, with a truncation-error estimate.

    Raises SingularWindowError within ``window`` grid cells of a singular
    point; stencils near (but outside) the window are made one-sided.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    h = density.spacing
    m = order + 4
    rel = _stencil_positions(density, energy, m, window)
    y = _log_values(density, energy, rel)
    value = _poly_derivative(rel, y, order) / h**order
    # lower-order estimate drops the outermost points
    keep = np.argsort(np.abs(rel))[: m - 2]
    coarse = _poly_derivative(rel[keep], y[keep], order) / h**order
    return value, abs(value - coarse)


def node_log_derivatives(density: LevelDensity, order: int, window: float = 2.0) -> np.ndarray:
    """n-th derivative of ln rho at every grid node (NaN in singular windows)."""
    h = density.spacing
    grid = density.grid
    m = order + 4
    out = np.full(grid.size, np.nan)
    with np.errstate(divide="ignore"):
        logs = np.log(density.values)
    es = density.singular_energies()
    base = np.arange(m) - (m - 1) // 2
    pos = np.arange(grid.size)
    shifts = np.zeros(grid.size, dtype=int)
    valid = np.ones(grid.size, dtype=bool)
    for ec in es:
        d = (ec - grid) / h
        valid &= np.abs(d) >= window
    for ec in es:
        d = (ec - grid) / h
        right = d > 0
        # nodes left of the point: top of stencil must stay below it
        need = np.floor(d - 0.25) - base[-1]
        shifts = np.where(right & (base[-1] + shifts > d - 0.25), np.minimum(shifts, need), shifts)
        need = np.ceil(d + 0.25) - base[0]
        shifts = np.where(~right & (base[0] + shifts < d + 0.25), np.maximum(shifts, need), shifts)
    shifts = shifts.astype(int)
    for s in np.unique(shifts[valid]):
        sel = valid & (shifts == s)
        offs = base + s
        idx = pos[sel][:, None] + offs[None, :]
        ok = (idx.min(axis=1) >= 0) & (idx.max(axis=1) < grid.size)
        rows = np.where(sel)[0][ok]
        w = fd_weights(offs, order)
        vals = logs[idx[ok]]
        with np.errstate(invalid="ignore"):
            res = vals @ w / h**order
        res[~np.all(np.isfinite(vals), axis=1)] = np.nan
        out[rows] = res
    # stencils that had to cross a second singular point are unusable
    for ec in es:
        for s in np.unique(shifts[valid]):
            sel = valid & (shifts == s)
            lo_e = grid + (base[0] + s) * h
            hi_e = grid + (base[-1] + s) * h
            cross = sel & (lo_e < ec - 0.25 * h) & (hi_e > ec + 0.25 * h)
            out[cross] = np.nan
    return out


def default_energy_max(system: SeparableSystem, beta_min: float, tail: float = 1e-12) -> float:
    """Energy cut-off where the Boltzmann tail of a polynomial-growth density is below ``tail``."""
    base = -math.log(tail) / beta_min
    return base + 2.0 * system.f / beta_min
