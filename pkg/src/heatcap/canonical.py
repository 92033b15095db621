"""Canonical-ensemble thermodynamics of separable systems.

Momenta are Gaussian and handled analytically. Each potential component is
reduced to its Boltzmann weight on configuration space, so every quantity is
built from per-component partition functions and central moments of ``V_i``.
Independent components add cumulants, which gives the moments of the total
potential and the total energy without any f-dimensional integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from ._numerics import gauss_legendre
from .density import PowerLawSpec
from .potential import Kind, PotentialComponent1D, SeparableSystem, stationary_points_1d

#: largest exponent kept in the Boltzmann factor (exp(-746) underflows)
BOLTZMANN_CUTOFF = 746.0

_PANEL_ORDER = 20


@dataclass(frozen=True)
class ThermalMoments:
    """Mean and central moments of a potential-energy distribution at ``beta``."""

    beta: float
    mean: float
    dispersion: float
    third: float

    @property
    def skewness(self) -> float:
        if self.dispersion <= 0.0:
            return 0.0
        return self.third / self.dispersion**1.5


@dataclass(frozen=True)
class ComponentStats:
    log_z: float
    moments: ThermalMoments


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not beta > 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    return beta


# ---------------------------------------------------------------------------
# one component


def _gamma_stats(beta: float, shape: float, log_z: float) -> ComponentStats:
    # V ~ Gamma(shape, 1/beta) for V = b|q|^I with shape = 1/I
    return ComponentStats(
        log_z,
        ThermalMoments(beta, shape / beta, shape / beta**2, 2.0 * shape / beta**3),
    )


def _harmonic_stats(component: PotentialComponent1D, beta: float) -> ComponentStats:
    log_z = 0.5 * math.log(math.pi / (beta * component.b))
    return _gamma_stats(beta, 0.5, log_z)


def _power_stats(component: PotentialComponent1D, beta: float) -> ComponentStats:
    inv = 1.0 / component.exponent
    log_z = math.log(2.0) + math.lgamma(1.0 + inv) - inv * math.log(beta * component.b)
    return _gamma_stats(beta, inv, log_z)


def _plateau_stats(component: PotentialComponent1D, beta: float) -> ComponentStats:
    levels = component.plateau_multiset
    energies = np.array([e for e, _ in levels])
    lengths = np.array([length for _, length in levels])
    e0 = energies.min()
    weights = lengths * np.exp(-beta * (energies - e0))
    total = weights.sum()
    p = weights / total
    mean = float(p @ energies)
    dev = energies - mean
    return ComponentStats(
        math.log(total) - beta * e0,
        ThermalMoments(beta, mean, float(p @ dev**2), float(p @ dev**3)),
    )


def _support(component: PotentialComponent1D, beta: float) -> tuple[float, float]:
    """Interval where ``beta * V <= BOLTZMANN_CUTOFF``."""
    cut = BOLTZMANN_CUTOFF / beta
    coeffs = component.polynomial_coefficients().copy()
    coeffs[-1] -= cut
    roots = np.roots(coeffs)
    real = roots[np.abs(roots.imag) <= 1e-9 * np.maximum(1.0, np.abs(roots))].real
    return float(real.min()), float(real.max())


def _panels(component: PotentialComponent1D, beta: float) -> np.ndarray:
    lo, hi = _support(component, beta)
    stationary = stationary_points_1d(component)
    curvature = max(abs(float(component.derivative(p.position, 2))) for p in stationary)
    width = 0.5 / math.sqrt(beta * max(curvature, 1e-300))
    width = min(width, 0.25 * (beta * component.c) ** -0.25, (hi - lo) / 16.0)
    breaks = sorted({lo, hi, *(p.position for p in stationary if lo < p.position < hi)})
    edges = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        count = max(1, math.ceil((b - a) / width))
        edges.append(np.linspace(a, b, count + 1)[:-1])
    edges.append(np.array([hi]))
    return np.concatenate(edges)


def _polynomial_stats(component: PotentialComponent1D, beta: float) -> ComponentStats:
    edges = _panels(component, beta)
    x, w = gauss_legendre(_PANEL_ORDER)
    a, h = edges[:-1, None], np.diff(edges)[:, None]
    q = (a + h * x).ravel()
    weights = (h * w).ravel()
    v = component(q)
    boltzmann = weights * np.exp(-beta * v)
    z = boltzmann.sum()
    p = boltzmann / z
    mean = float(p @ v)
    dev = v - mean
    return ComponentStats(
        math.log(z),
        ThermalMoments(beta, mean, float(p @ dev**2), float(p @ dev**3)),
    )


def component_statistics(component: PotentialComponent1D, beta: float) -> ComponentStats:
    """Configuration partition function and potential moments of one component.

    ``log_z`` is the log of ``integral exp(-beta V(q)) dq``. Quadratic,
    pure-power and plateau components are closed form; quartic wells use
    fixed Gauss-Legendre panels split at the stationary points.
    """
    beta = _check_beta(beta)
    if component.kind is Kind.PLATEAU:
        return _plateau_stats(component, beta)
    if component.kind is Kind.POWER:
        return _power_stats(component, beta)
    if component.is_harmonic:
        if component.b <= 0.0:
            raise ValueError("potential is unbounded below")
        return _harmonic_stats(component, beta)
    if component.c < 0.0:
        raise ValueError("potential is unbounded below")
    return _polynomial_stats(component, beta)


# ---------------------------------------------------------------------------
# whole system


def kinetic_log_factor(f: int, beta: float) -> float:
    """log of ``(2 pi)^-f (2 pi / beta)^(f/2)``: momentum integrals and 1/h^f."""
    return -f * math.log(2.0 * math.pi) + 0.5 * f * math.log(2.0 * math.pi / beta)


def log_partition_function(system: SeparableSystem, beta: float) -> float:
    beta = _check_beta(beta)
    log_z = kinetic_log_factor(system.f, beta)
    return log_z + sum(component_statistics(c, beta).log_z for c in system.components)


def partition_function(system: SeparableSystem, beta: float) -> float:
    return math.exp(log_partition_function(system, beta))


def thermal_moments(system: SeparableSystem, beta: float) -> ThermalMoments:
    """Mean and central moments of the total potential ``V = sum V_i``."""
    beta = _check_beta(beta)
    stats = [component_statistics(c, beta).moments for c in system.components]
    return ThermalMoments(
        beta,
        sum(s.mean for s in stats),
        sum(s.dispersion for s in stats),
        sum(s.third for s in stats),
    )


def config_moment(system: SeparableSystem, n: int, beta: float) -> float:
    """Raw moment ``<V^n>`` for n = 1, 2, 3."""
    m = thermal_moments(system, beta)
    if n == 1:
        return m.mean
    if n == 2:
        return m.dispersion + m.mean**2
    if n == 3:
        return m.third + 3.0 * m.dispersion * m.mean + m.mean**3
    raise ValueError("n must be 1, 2 or 3")


def energy_moments(system: SeparableSystem, beta: float) -> ThermalMoments:
    """Mean and central moments of the total energy.

    Each kinetic term ``p^2/2`` is Gamma(1/2, 1/beta) distributed.
    """
    pot = thermal_moments(system, beta)
    f = system.f
    return ThermalMoments(
        pot.beta,
        pot.mean + 0.5 * f / beta,
        pot.dispersion + 0.5 * f / beta**2,
        pot.third + f / beta**3,
    )


def heat_capacity_canonical(system: SeparableSystem, beta: float) -> float:
    """``f/2 + beta^2 <dV^2>``."""
    return 0.5 * system.f + potential_heat_capacity(system, beta)


def potential_heat_capacity(system: SeparableSystem, beta: float) -> float:
    """Configuration part ``beta^2 <dV^2>`` of the canonical heat capacity."""
    beta = _check_beta(beta)
    return beta**2 * thermal_moments(system, beta).dispersion


def _second_derivative(fn, x: float, h: float) -> float:
    def stencil(step):
        values = [fn(x + k * step) for k in (-2, -1, 0, 1, 2)]
        return (-values[0] + 16 * values[1] - 30 * values[2] + 16 * values[3] - values[4]) / (12 * step**2)

    coarse, fine = stencil(2 * h), stencil(h)
    return fine + (fine - coarse) / 15.0


def heat_capacity_from_lnZ(system: SeparableSystem, beta: float, rel_step: float = 1e-3) -> float:
    """``beta^2 d^2 lnZ / d beta^2`` by Richardson-extrapolated central differences."""
    beta = _check_beta(beta)
    h = rel_step * beta
    return beta**2 * _second_derivative(lambda b: log_partition_function(system, b), beta, h)


def dC_dbeta(system: SeparableSystem, beta: float) -> float:
    """``2 beta <dE^2> - beta^2 <dE^3>``.

    Summed per component. Kinetic terms and Gamma-distributed potentials
    (quadratic, pure power) contribute exactly zero and are skipped, which
    keeps the sign reliable where the remaining part is exponentially small.
    """
    beta = _check_beta(beta)
    total = 0.0
    for component in system.components:
        if component.kind is Kind.POWER or (component.kind is not Kind.PLATEAU and component.is_harmonic):
            continue
        m = component_statistics(component, beta).moments
        total += 2.0 * beta * m.dispersion - beta**2 * m.third
    return total


# ---------------------------------------------------------------------------
# closed forms


def closed_form_Z_degenerate_double_well(beta: float) -> float:
    """``integral exp(-beta (x^4 - 2 x^2)) dx`` via modified Bessel functions.

    Equals ``(pi/2) exp(beta/2) [I_{-1/4}(beta/2) + I_{1/4}(beta/2)]``. This is
    the configuration factor of the unshifted potential; the component built
    by :func:`heatcap.potential.quartic` is shifted by ``v = 1`` and carries an
    extra ``exp(-beta)``. Multiply by ``exp(kinetic_log_factor(1, beta))`` for
    the full one-dimensional partition function.
    """
    beta = _check_beta(beta)
    x = 0.5 * beta
    # ive(nu, x) = iv(nu, x) exp(-x) keeps large beta finite
    return 0.5 * math.pi * math.exp(2 * x) * (special.ive(-0.25, x) + special.ive(0.25, x))


def _radial_moments(power: float, dim: float) -> tuple[float, float]:
    """Mean and variance of ``x^P`` under weight ``x^(d-1) exp(-x^P)`` on x > 0."""

    def moment(n):
        fn = lambda x: x ** (dim - 1.0 + n * power) * math.exp(-(x**power))
        peak = ((dim - 1.0 + n * power) / power) ** (1.0 / power) if dim - 1 + n * power > 0 else 0.0
        head = integrate.quad(fn, 0.0, peak + 1.0, epsabs=0.0, epsrel=1e-13, limit=200)[0]
        tail = integrate.quad(fn, peak + 1.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)[0]
        return head + tail

    m0, m1, m2 = (moment(n) for n in range(3))
    mean = m1 / m0
    return mean, m2 / m0 - mean**2


def power_law_heat_capacity(spec: PowerLawSpec, beta: float) -> float:
    """Canonical heat capacity of a power-law Hamiltonian by numerical quadrature.

    Each factor ``c r^P`` (1-D, or radial in f dimensions for the rotational
    form) is integrated numerically; after scaling ``r`` by ``(beta c)^(-1/P)``
    its variance is ``var(x^P) / beta^2``.
    """
    beta = _check_beta(beta)
    if spec.rotational:
        J, I, _, _ = spec.terms[0]
        factors = [(J, spec.f), (I, spec.f)]
    else:
        factors = [(power, 1) for _, power in spec.one_dim_factors()]
    return sum(_radial_moments(power, dim)[1] for power, dim in factors)
