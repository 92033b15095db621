"""One-dimensional potential components and separable systems built from them.

Every system has the kinetic energy ``sum(p_i**2 / 2)`` in natural units
(hbar = k_B = 1); only the potential part varies between degrees of freedom.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class Kind(str, enum.Enum):
    HARMONIC = "harmonic"
    QUARTIC = "quartic"
    PLATEAU = "plateau"
    POWER = "power"


class WellShape(str, enum.Enum):
    DOUBLE_WELL = "double_well"
    SINGLE_WELL = "single_well"
    QUADRATIC = "quadratic"


@dataclass(frozen=True)
class StationaryPoint:
    """A root of V'(q) = 0 with its shifted energy."""

    position: float
    energy: float
    curvature: str  # "min", "max" or "degenerate"

    @property
    def degenerate(self) -> bool:
        return self.curvature == "degenerate"


@dataclass(frozen=True)
class PotentialComponent1D:
    """Potential of one degree of freedom.

    Polynomial kinds evaluate ``v + a*q + b*q**2 + c*q**4``; ``v`` is fixed at
    construction so that the global minimum is exactly zero. A plateau well
    stores ``(energy, length, left_edge)`` triples sorted by left edge and
    is infinite outside them. A pure power is ``b * |q|**exponent``.
    """

    kind: Kind
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    v: float = 0.0
    plateaus: tuple[tuple[float, float, float], ...] = ()
    exponent: float = 2.0

    # -- evaluation -----------------------------------------------------
    @property
    def is_polynomial(self) -> bool:
        return self.kind in (Kind.HARMONIC, Kind.QUARTIC)

    @property
    def is_harmonic(self) -> bool:
        """Purely quadratic (c = 0), whatever kind label it was built with."""
        return self.is_polynomial and self.c == 0.0

    @property
    def omega(self) -> float:
        if not self.is_harmonic:
            raise ValueError("angular frequency is defined for quadratic components only")
        return math.sqrt(2.0 * self.b)

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        if self.is_polynomial:
            q2 = q * q
            return self.v + self.a * q + self.b * q2 + self.c * q2 * q2
        if self.kind is Kind.POWER:
            return self.b * np.abs(q) ** self.exponent
        out = np.full(q.shape, np.inf)
        for energy, length, left in self.plateaus:
            out = np.where((q >= left) & (q < left + length), energy, out)
        return out if out.ndim else float(out)

    def derivative(self, q, n: int = 1):
        """n-th derivative of a polynomial component."""
        if not self.is_polynomial:
            raise ValueError("derivatives are available for polynomial components only")
        q = np.asarray(q, dtype=float)
        coeffs = np.polynomial.Polynomial([self.v, self.a, self.b, 0.0, self.c])
        return coeffs.deriv(n)(q)

    @property
    def minimum_location(self) -> float:
        if self.is_polynomial:
            minima = [p for p in stationary_points_1d(self) if p.curvature != "max"]
            return min(minima, key=lambda p: (p.energy, p.position)).position
        if self.kind is Kind.POWER:
            return 0.0
        best = min(self.plateaus, key=lambda t: (t[0], t[2]))
        return best[2] + 0.5 * best[1]

    @property
    def minimum_energy(self) -> float:
        if self.kind is Kind.PLATEAU:
            return min(e for e, _, _ in self.plateaus)
        return 0.0

    def polynomial_coefficients(self) -> np.ndarray:
        """Coefficients (highest power first) of the shifted polynomial."""
        return np.array([self.c, 0.0, self.b, self.a, self.v])

    @property
    def plateau_multiset(self) -> tuple[tuple[float, float], ...]:
        """Plateaus as sorted ``(energy, total_length)`` with equal energies merged."""
        merged: dict[float, float] = {}
        for energy, length, _ in self.plateaus:
            merged[energy] = merged.get(energy, 0.0) + length
        return tuple(sorted(merged.items()))


@dataclass(frozen=True)
class SeparableSystem:
    components: tuple[PotentialComponent1D, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) < 1:
            raise ValueError("f >= 1 required")

    @property
    def f(self) -> int:
        return len(self.components)

    def potential(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return sum(comp(q[..., i]) for i, comp in enumerate(self.components))

    def hamiltonian(self, q, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return 0.5 * np.sum(p * p, axis=-1) + self.potential(q)


# ---------------------------------------------------------------------------
# construction


def _cubic_real_roots(a: float, b: float, c: float) -> list[float]:
    """Real roots of ``4c q^3 + 2b q + a = 0`` (the polynomial V').

    Closed form from the discriminant, each root polished by Newton steps.
    """
    if c == 0.0:
        if b == 0.0:
            return []
        return [-a / (2.0 * b)]
    p = b / (2.0 * c)
    r = a / (4.0 * c)
    disc = -(4.0 * p**3 + 27.0 * r**2)
    scale = max(abs(p) ** 1.5, abs(r), 1e-300)
    if abs(disc) <= 1e-14 * scale**2:
        if p == 0.0:
            roots = [0.0]
        else:
            # double root -3r/(2p) and simple root 3r/p
            roots = [3.0 * r / p, -1.5 * r / p]
    elif disc > 0.0:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = (3.0 * r / (2.0 * p)) * math.sqrt(-3.0 / p)
        theta = math.acos(max(-1.0, min(1.0, arg))) / 3.0
        roots = [m * math.cos(theta - 2.0 * math.pi * k / 3.0) for k in range(3)]
    else:
        s = math.sqrt(r * r / 4.0 + p**3 / 27.0)
        roots = [np.cbrt(-r / 2.0 + s) + np.cbrt(-r / 2.0 - s)]
    polished = []
    for q in roots:
        for _ in range(6):
            f = q**3 + p * q + r
            df = 3.0 * q * q + p
            if df == 0.0 or f == 0.0:
                break
            step = f / df
            q -= step
            if abs(step) < 1e-16 * max(1.0, abs(q)):
                break
        polished.append(float(q))
    return sorted(polished)


def build_component(kind: Kind | str, **params) -> PotentialComponent1D:
    """Build a validated component with its minimum shifted to zero.

    Parameters
    ----------
    kind : Kind or str
        ``"harmonic"`` (a, b), ``"quartic"`` (a, b, c), ``"plateau"``
        (plateaus = [(E, L) or (E, L, left_edge), ...]) or ``"power"``
        (b, exponent).

    Plateau energies are model data and are never shifted.
    """
    kind = Kind(kind)
    if kind in (Kind.HARMONIC, Kind.QUARTIC):
        a = float(params.pop("a", 0.0))
        b = float(params.pop("b", 1.0 if kind is Kind.HARMONIC else -2.0))
        c = float(params.pop("c", 0.0 if kind is Kind.HARMONIC else 1.0))
        _no_extra(params)
        if kind is Kind.HARMONIC and c != 0.0:
            raise ValueError("harmonic component must have c = 0")
        if c < 0.0:
            raise ValueError("quartic coefficient c must be >= 0")
        if c == 0.0 and b <= 0.0:
            raise ValueError("c = 0 requires b > 0 (potential unbounded below otherwise)")
        raw = PotentialComponent1D(kind, a=a, b=b, c=c, v=0.0)
        vmin = min(float(raw(q)) for q in _cubic_real_roots(a, b, c))
        return PotentialComponent1D(kind, a=a, b=b, c=c, v=-vmin)
    if kind is Kind.POWER:
        b = float(params.pop("b", 1.0))
        exponent = float(params.pop("exponent", 2.0))
        _no_extra(params)
        if b <= 0.0 or exponent <= 0.0:
            raise ValueError("pure power needs b > 0 and exponent > 0")
        return PotentialComponent1D(kind, b=b, exponent=exponent)
    plateaus = list(params.pop("plateaus", []))
    _no_extra(params)
    if not plateaus:
        raise ValueError("plateau well needs at least one plateau")
    triples = []
    edge = 0.0
    for item in plateaus:
        if len(item) == 2:
            energy, length = item
            left = edge
        else:
            energy, length, left = item
        energy, length, left = float(energy), float(length), float(left)
        if not length > 0.0:
            raise ValueError(f"plateau length must be positive, got {length}")
        triples.append((energy, length, left))
        edge = max(edge, left + length)
    triples.sort(key=lambda t: t[2])
    for (_, l0, x0), (_, _, x1) in zip(triples, triples[1:]):
        if x1 < x0 + l0:
            raise ValueError("plateau intervals overlap")
    return PotentialComponent1D(kind, plateaus=tuple(triples))


def _no_extra(params: dict) -> None:
    if params:
        raise TypeError(f"unexpected parameters: {sorted(params)}")


def double_well_threshold(b: float, c: float) -> float:
    """|a| below which ``a q + b q^2 + c q^4`` (b < 0) has two wells."""
    return math.sqrt(8.0 * abs(b) ** 3 / (27.0 * c))


def classify_well(component: PotentialComponent1D) -> WellShape:
    if not component.is_polynomial:
        raise ValueError("well classification applies to polynomial components")
    a, b, c = component.a, component.b, component.c
    if c == 0.0:
        if b <= 0.0:
            raise ValueError("c = 0 with b <= 0 is not confining")
        return WellShape.QUADRATIC
    if b < 0.0 and abs(a) < double_well_threshold(b, c):
        return WellShape.DOUBLE_WELL
    return WellShape.SINGLE_WELL


def stationary_points_1d(component: PotentialComponent1D) -> list[StationaryPoint]:
    """All stationary points of a polynomial component, sorted by energy.

    Roots where V'' vanishes (e.g. |a| equal to the double-well threshold)
    are returned with curvature ``"degenerate"``.
    """
    if component.kind is Kind.POWER:
        return [StationaryPoint(0.0, 0.0, "min" if component.exponent > 1 else "degenerate")]
    if not component.is_polynomial:
        raise ValueError("plateau wells have no isolated stationary points")
    roots = _cubic_real_roots(component.a, component.b, component.c)
    # merge coalesced roots of a (near-)double root
    merged: list[float] = []
    for q in roots:
        if merged and abs(q - merged[-1]) < 1e-7 * max(1.0, abs(q)):
            merged[-1] = 0.5 * (merged[-1] + q)
        else:
            merged.append(q)
    curv_scale = max(abs(component.b), abs(component.c), 1e-300)
    points = []
    for q in merged:
        second = float(component.derivative(q, 2))
        if abs(second) < 1e-8 * curv_scale:
            kind = "degenerate"
        else:
            kind = "min" if second > 0 else "max"
        energy = float(component(q))
        if abs(energy) < 1e-13 * max(1.0, abs(component.v)):
            energy = 0.0
        points.append(StationaryPoint(q, energy, kind))
    return sorted(points, key=lambda p: (p.energy, p.position))


# ---------------------------------------------------------------------------
# example systems


def harmonic(b: float = 1.0, a: float = 0.0) -> PotentialComponent1D:
    return build_component(Kind.HARMONIC, a=a, b=b)


def quartic(a: float = 0.0, b: float = -2.0, c: float = 1.0) -> PotentialComponent1D:
    return build_component(Kind.QUARTIC, a=a, b=b, c=c)


def plateau_well(plateaus: Iterable[Sequence[float]]) -> PotentialComponent1D:
    return build_component(Kind.PLATEAU, plateaus=list(plateaus))


def well_plus_oscillators(f: int, a: float = 0.5, b: float = -2.0, c: float = 1.0) -> SeparableSystem:
    """One quartic double well followed by f-1 identical oscillators V = q^2."""
    return SeparableSystem((quartic(a, b, c),) + tuple(harmonic() for _ in range(f - 1)))


def quartic_chain(f: int, b: float = -2.0, c: float = 1.0) -> SeparableSystem:
    """f quartic components with linear coefficients a_i = i/5."""
    return SeparableSystem(tuple(quartic(i / 5.0, b, c) for i in range(1, f + 1)))


def plateau_system(f: int, plateaus: Iterable[Sequence[float]], b: float = 1.0) -> SeparableSystem:
    """A plateau well plus f-1 oscillators."""
    return SeparableSystem((plateau_well(plateaus),) + tuple(harmonic(b) for _ in range(f - 1)))
