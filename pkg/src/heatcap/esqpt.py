"""Stationary points of separable Hamiltonians and the level-density
singularities they produce.

At a non-degenerate stationary point with r unstable directions the
(f-1)-th derivative of rho has a jump (r even) or a logarithmic divergence
(r odd). Plateau wells instead give an inverse-square-root divergence at
every plateau energy. :func:`detect_nonanalyticity` checks these
predictions on a computed density by fitting competing one-sided models.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._numerics import central_offsets, fd_weights
from .density import LevelDensity
from .potential import Kind, SeparableSystem, StationaryPoint, stationary_points_1d

JUMP = "jump"
LOG = "log"
INVERSE_SQRT = "inverse_sqrt"
DEGENERATE = "unclassified-degenerate"
MIXED = "mixed"
NONE = "none"


@dataclass(frozen=True)
class StationaryPointInfo:
    configuration: tuple[StationaryPoint, ...]
    energy: float
    rank: int
    degenerate: bool

    @property
    def predicted_type(self) -> str:
        if self.degenerate:
            return DEGENERATE
        return JUMP if self.rank % 2 == 0 else LOG

    @property
    def predicted_sign(self) -> int:
        if self.degenerate:
            return 0
        exponent = self.rank // 2 if self.rank % 2 == 0 else (self.rank + 1) // 2
        return -1 if exponent % 2 else 1


@dataclass(frozen=True)
class Prediction:
    """Expected non-analyticity of ``d^order rho / dE^order`` at ``energy``."""

    energy: float
    type: str
    sign: int
    order: int
    multiplicity: int = 1
    ranks: tuple[int, ...] = ()


def enumerate_stationary_points(system: SeparableSystem) -> list[StationaryPointInfo]:
    """Cartesian product of the component stationary points, sorted by energy."""
    per_component = []
    for component in system.components:
        if component.kind is Kind.PLATEAU:
            raise ValueError("plateau wells have flat directions; use predict_plateau_singularities")
        per_component.append(stationary_points_1d(component))
    out = []
    for combo in itertools.product(*per_component):
        rank = sum(p.curvature == "max" for p in combo)
        degenerate = any(p.degenerate for p in combo)
        out.append(StationaryPointInfo(combo, float(sum(p.energy for p in combo)), rank, degenerate))
    return sorted(out, key=lambda s: (s.energy, s.rank))


def predict_singularities(points, f: int, tol: float = 1e-10) -> list[Prediction]:
    """One prediction per distinct critical energy.

    Points whose energies agree within ``tol`` are merged; if their types or
    signs differ the merged entry is ``"mixed"`` with sign 0.
    """
    groups: list[list[StationaryPointInfo]] = []
    for p in sorted(points, key=lambda s: s.energy):
        if groups and abs(p.energy - groups[-1][0].energy) <= tol * max(1.0, abs(p.energy)):
            groups[-1].append(p)
        else:
            groups.append([p])
    out = []
    for group in groups:
        kinds = {(p.predicted_type, p.predicted_sign) for p in group}
        kind, sign = kinds.pop() if len(kinds) == 1 else (MIXED, 0)
        out.append(
            Prediction(group[0].energy, kind, sign, f - 1, len(group), tuple(sorted(p.rank for p in group)))
        )
    return out


def predict_plateau_singularities(system: SeparableSystem) -> list[Prediction]:
    """Inverse-sqrt divergences of ``d^(f-1) rho`` at the plateau energies.

    The remaining components must be quadratic (their minima sit at 0).
    """
    plateaus = [c for c in system.components if c.kind is Kind.PLATEAU]
    if len(plateaus) != 1 or not all(c.is_harmonic for c in system.components if c.kind is not Kind.PLATEAU):
        raise ValueError("expected one plateau well plus quadratic oscillators")
    return [
        Prediction(energy, INVERSE_SQRT, 1, system.f - 1)
        for energy, _ in plateaus[0].plateau_multiset
    ]


# ---------------------------------------------------------------------------
# detection


@dataclass(frozen=True)
class DetectionReport:
    energy: float
    type: str
    sign: int
    magnitude: float
    conclusive: bool
    residuals: dict = field(default_factory=dict)
    resolution: float = 0.0
    note: str = ""

    def agrees_with(self, prediction: Prediction) -> bool:
        return (
            self.conclusive
            and self.type == prediction.type
            and self.sign == prediction.sign
            and abs(self.energy - prediction.energy) <= self.resolution
        )


def _singular_column(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == JUMP:
        return (x > 0).astype(float)
    if kind == LOG:
        return np.log(np.abs(x))
    return np.where(x > 0, 1.0 / np.sqrt(np.abs(x)), 0.0)


def _fit(columns: list[np.ndarray], y: np.ndarray) -> tuple[float, np.ndarray]:
    design = np.column_stack(columns)
    scale = np.linalg.norm(design, axis=0)
    scale[scale == 0] = 1.0
    coef, *_ = np.linalg.lstsq(design / scale, y, rcond=None)
    resid = y - (design / scale) @ coef
    return float(resid @ resid), coef / scale


def _flank_nodes(density: LevelDensity, e_c: float, half: int, n_flank: int, pad: int):
    """Indices (into the zero-padded array) of usable nodes on each side."""
    h = density.spacing
    pc = (e_c - density.start) / h + pad
    size = density.grid.size + pad
    others = [(s.energy - density.start) / h + pad for s in density.singular_points if abs(s.energy - e_c) > 0.5 * h]
    lo_bound = max([o for o in others if o < pc], default=-np.inf)
    hi_bound = min([o for o in others if o > pc], default=np.inf)
    gap = max(half + 1, 2)
    left = [i for i in range(int(math.floor(pc - 0.25)) - gap, -1, -1)
            if i - half >= 0 and i - half > lo_bound + 0.25 and i + half < pc - 0.25][:n_flank]
    right = [i for i in range(int(math.ceil(pc + 0.25)) + gap, size)
             if i + half < size and i + half < hi_bound - 0.25 and i - half > pc + 0.25][:n_flank]
    return np.array(sorted(left), dtype=int), np.array(right, dtype=int)


def detect_nonanalyticity(
    density: LevelDensity,
    e_c: float,
    order: int,
    n_flank: int = 24,
    min_flank: int = 10,
) -> DetectionReport:
    """Classify the behaviour of ``d^order rho / dE^order`` around ``e_c``.

    Finite-difference derivatives are taken on nodes whose stencils stay on
    one side of ``e_c`` (rho is zero-padded below the grid start). Five
    parameter models are fitted to both flanks together: a smooth quartic,
    and ``1, x, x^2, theta(x) x`` plus one of a step, ``ln|x|`` or
    ``theta(x)/sqrt(x)``. The singular location is scanned over one grid
    cell either side. A singular model wins only if it beats the smooth
    one by a factor 100 and the smooth fit is visibly imperfect.
    """
    h = density.spacing
    if not density.grid[0] - h <= e_c <= density.grid[-1]:
        raise ValueError("E_c lies outside the energy grid")
    offsets = central_offsets(order, 4)
    half = int(offsets[-1])
    pad = n_flank + 2 * half + 4
    values = np.concatenate([np.zeros(pad), density.values])
    left, right = _flank_nodes(density, e_c, half, n_flank, pad)
    if min(left.size, right.size) < min_flank:
        return DetectionReport(
            e_c, NONE, 0, 0.0, False, resolution=h,
            note=f"fewer than {min_flank} clean nodes on a flank; grid spacing {h:.3g} is too coarse here",
        )
    nodes = np.concatenate([left, right])
    weights = fd_weights(offsets, order)
    stencil = nodes[:, None] + offsets.astype(int)[None, :]
    y = values[stencil] @ weights / h**order
    energies = density.start + (nodes - pad) * h
    y_scale = np.max(np.abs(y)) or 1.0
    y = y / y_scale
    ss_tot = float(np.sum((y - y.mean()) ** 2)) or 1.0

    best = {}
    for shift in np.linspace(-h, h, 9):
        x = (energies - (e_c + shift)) / h
        base = [np.ones_like(x), x, x**2, np.where(x > 0, x, 0.0)]
        for kind in (JUMP, LOG, INVERSE_SQRT):
            rss, coef = _fit(base + [_singular_column(kind, x)], y)
            if kind not in best or rss < best[kind][0]:
                best[kind] = (rss, coef[-1] * y_scale, e_c + shift)
    x0 = (energies - e_c) / h
    rss_smooth, _ = _fit([x0**k for k in range(5)], y)
    residuals = {NONE: rss_smooth / ss_tot, **{k: v[0] / ss_tot for k, v in best.items()}}
    kind = min(best, key=lambda k: best[k][0])
    rss, magnitude, located = best[kind]
    if rss_smooth / ss_tot < 1e-10 or rss > 1e-2 * rss_smooth:
        return DetectionReport(e_c, NONE, 0, 0.0, True, residuals, h, "smooth model is adequate")
    return DetectionReport(float(located), kind, int(np.sign(magnitude)), float(magnitude), True, residuals, h)
