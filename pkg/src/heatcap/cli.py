"""Scenario files and the ``heatcap run`` command.

A scenario is a small sectioned key-value file::

    [system.1]
    kind = quartic
    a = 0.5
    b = -2
    c = 1

    [system.2]
    kind = harmonic
    b = 1
    count = 2

    [grids]
    beta_min = 0.1
    beta_max = 10
    beta_count = 50
    beta_spacing = log
    energy_max = 12
    energy_count = 4000

    [outputs]
    include = canonical_sweep, caloric_curve, distribution
    distribution_betas = 2.45

``kind`` is one of harmonic (a, b), quartic (a, b, c), plateau
(``plateaus = (E,L);(E,L)``) or power (``power = b,I``); ``count`` repeats
a section. Each run writes its tables into ``<out>/<config hash>/``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import math
import platform
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import canonical, esqpt, microcanonical
from .density import LevelDensity, _fmt, system_density
from .potential import Kind, PotentialComponent1D, SeparableSystem, build_component, stationary_points_1d

log = logging.getLogger(__name__)

OUTPUTS = (
    "canonical_sweep",
    "micro_sweep",
    "caloric_curve",
    "distribution",
    "stationary_points",
    "singularity_report",
    "closed_form_checks",
    "density",
)

_COMPONENT_KEYS = {
    "harmonic": {"a", "b"},
    "quartic": {"a", "b", "c"},
    "plateau": {"plateaus"},
    "power": {"power"},
}
_GRID_KEYS = ("beta_min", "beta_max", "beta_count", "beta_spacing", "energy_max", "energy_count")
_PROFILES = {"strict": 1, "fast": 4}


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class ComponentSpec:
    kind: str
    params: tuple[tuple[str, str], ...]
    count: int = 1

    def build(self) -> PotentialComponent1D:
        p = dict(self.params)
        if self.kind == "plateau":
            return build_component(Kind.PLATEAU, plateaus=_parse_plateaus(p["plateaus"]))
        if self.kind == "power":
            b, exponent = _parse_floats(p["power"], 2)
            return build_component(Kind.POWER, b=b, exponent=exponent)
        kind = Kind.HARMONIC if self.kind == "harmonic" else Kind.QUARTIC
        return build_component(kind, **{k: float(v) for k, v in p.items()})


@dataclass(frozen=True)
class Scenario:
    components: tuple[ComponentSpec, ...]
    beta_min: float = 0.1
    beta_max: float = 10.0
    beta_count: int = 50
    beta_spacing: str = "log"
    energy_max: float = 12.0
    energy_count: int = 4000
    outputs: tuple[str, ...] = OUTPUTS
    distribution_betas: tuple[float, ...] = ()

    def system(self) -> SeparableSystem:
        built = []
        for spec in self.components:
            component = spec.build()
            built += [component] * spec.count
        return SeparableSystem(tuple(built))

    def betas(self) -> np.ndarray:
        if self.beta_spacing == "log":
            return np.geomspace(self.beta_min, self.beta_max, self.beta_count)
        return np.linspace(self.beta_min, self.beta_max, self.beta_count)

    def digest(self) -> str:
        return hashlib.sha256(serialize_scenario(self).encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# parsing


def _parse_floats(text: str, n: int) -> list[float]:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != n:
        raise ValueError(f"expected {n} comma-separated numbers, got {text!r}")
    return parts


def _parse_plateaus(text: str) -> list[tuple[float, float]]:
    items = [s.strip() for s in text.split(";") if s.strip()]
    out = []
    for item in items:
        m = re.fullmatch(r"\(\s*([^,()]+)\s*,\s*([^,()]+)\s*\)", item)
        if not m:
            raise ValueError(f"plateau entries look like (E,L), got {item!r}")
        out.append((float(m.group(1)), float(m.group(2))))
    return out


def _sections(text: str) -> list[tuple[str, int, dict[str, tuple[str, int]]]]:
    sections: list[tuple[str, int, dict]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError(f"unterminated section header {line!r}", lineno)
            sections.append((line[1:-1].strip(), lineno, {}))
            continue
        if "=" not in line:
            raise ScenarioError(f"expected 'key = value', got {line!r}", lineno)
        if not sections:
            raise ScenarioError("key outside of any section", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        entries = sections[-1][2]
        if key in entries:
            raise ScenarioError(f"duplicate key {key!r}", lineno)
        entries[key] = (value, lineno)
    return sections


def _component(entries: dict[str, tuple[str, int]], header_line: int) -> ComponentSpec:
    if "kind" not in entries:
        raise ScenarioError("system section needs a 'kind'", header_line)
    kind, kind_line = entries["kind"]
    if kind not in _COMPONENT_KEYS:
        raise ScenarioError(f"unknown kind {kind!r}; choose from {sorted(_COMPONENT_KEYS)}", kind_line)
    params = []
    count = 1
    for key, (value, lineno) in entries.items():
        if key == "kind":
            continue
        if key == "count":
            count = _number(value, lineno, int)
            if count < 1:
                raise ScenarioError("count must be >= 1", lineno)
            continue
        if key not in _COMPONENT_KEYS[kind]:
            raise ScenarioError(f"unknown key {key!r} for kind {kind}", lineno)
        if kind in ("harmonic", "quartic"):
            value = repr(_number(value, lineno, float))
        params.append((key, value))
    spec = ComponentSpec(kind, tuple(sorted(params)), count)
    try:
        spec.build()
    except (ValueError, TypeError, KeyError) as exc:
        raise ScenarioError(f"invalid {kind} component: {exc}", header_line) from None
    return spec


def _number(text: str, lineno: int, kind=float):
    try:
        return kind(text)
    except ValueError:
        raise ScenarioError(f"expected {kind.__name__}, got {text!r}", lineno) from None


def parse_scenario(text: str) -> Scenario:
    """Parse and validate scenario text (see module docstring for the format)."""
    systems: list[tuple[int, ComponentSpec]] = []
    values: dict = {}
    for name, header_line, entries in _sections(text):
        if name.startswith("system."):
            try:
                index = int(name.split(".", 1)[1])
            except ValueError:
                raise ScenarioError(f"system sections are numbered, got [{name}]", header_line) from None
            systems.append((index, _component(entries, header_line)))
        elif name == "grids":
            for key, (value, lineno) in entries.items():
                if key not in _GRID_KEYS:
                    raise ScenarioError(f"unknown key {key!r} in [grids]", lineno)
                if key == "beta_spacing":
                    if value not in ("log", "linear"):
                        raise ScenarioError("beta_spacing must be 'log' or 'linear'", lineno)
                    values[key] = value
                else:
                    values[key] = _number(value, lineno, int if key.endswith("count") else float)
        elif name == "outputs":
            for key, (value, lineno) in entries.items():
                if key == "include":
                    names = tuple(s.strip() for s in value.split(",") if s.strip())
                    bad = [n for n in names if n not in OUTPUTS]
                    if bad:
                        raise ScenarioError(f"unknown outputs {bad}; choose from {list(OUTPUTS)}", lineno)
                    values["outputs"] = names
                elif key == "distribution_betas":
                    values["distribution_betas"] = tuple(
                        _number(s.strip(), lineno) for s in value.split(",") if s.strip()
                    )
                else:
                    raise ScenarioError(f"unknown key {key!r} in [outputs]", lineno)
        else:
            raise ScenarioError(f"unknown section [{name}]", header_line)
    if not systems:
        raise ScenarioError("f >= 1 required: no [system.N] sections")
    systems.sort(key=lambda t: t[0])
    scenario = Scenario(tuple(spec for _, spec in systems), **values)
    _validate(scenario)
    return scenario


def _validate(s: Scenario) -> None:
    if not s.beta_min > 0:
        raise ScenarioError("beta_min must be positive")
    if s.beta_max < s.beta_min or s.beta_count < 1:
        raise ScenarioError("beta grid needs beta_max >= beta_min and beta_count >= 1")
    if s.energy_count < 16 or not s.energy_max > 0:
        raise ScenarioError("energy grid needs energy_max > 0 and energy_count >= 16")
    if any(b <= 0 for b in s.distribution_betas):
        raise ScenarioError("distribution betas must be positive")
    system = s.system()
    top = 0.0
    for c in system.components:
        if c.kind is Kind.PLATEAU:
            top += max(e for e, _ in c.plateau_multiset)
        elif c.is_polynomial:
            top += max(p.energy for p in stationary_points_1d(c))
    if s.energy_max <= top:
        log.warning("energy_max %.6g does not exceed the highest stationary energy %.6g", s.energy_max, top)


def serialize_scenario(s: Scenario) -> str:
    lines = []
    for i, spec in enumerate(s.components, 1):
        lines += [f"[system.{i}]", f"kind = {spec.kind}"]
        lines += [f"{k} = {v}" for k, v in spec.params]
        if spec.count != 1:
            lines.append(f"count = {spec.count}")
        lines.append("")
    lines.append("[grids]")
    for key in _GRID_KEYS:
        value = getattr(s, key)
        lines.append(f"{key} = {value if isinstance(value, (int, str)) else repr(float(value))}")
    lines += ["", "[outputs]", f"include = {', '.join(s.outputs)}"]
    if s.distribution_betas:
        lines.append("distribution_betas = " + ", ".join(repr(float(b)) for b in s.distribution_betas))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# running


def _write_csv(path: Path, header: list[str], rows) -> Path:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def _canonical_row(system: SeparableSystem, beta: float) -> list:
    log_z = canonical.log_partition_function(system, beta)
    moments = canonical.thermal_moments(system, beta)
    c_can = canonical.heat_capacity_canonical(system, beta)
    return [
        beta, 1.0 / beta, math.exp(log_z), log_z, c_can, c_can / system.f,
        beta**2 * moments.dispersion, canonical.dC_dbeta(system, beta),
        moments.mean, moments.dispersion, moments.third,
    ]


def _beta_label(beta: float) -> str:
    return format(beta, "g").replace(".", "p")


@dataclass
class RunResult:
    directory: Path
    files: list[Path] = field(default_factory=list)
    errors: dict[str, str] = field(default_factory=dict)


class _Runner:
    def __init__(self, scenario: Scenario, directory: Path, threads: int, profile: str):
        self.scenario = scenario
        self.directory = directory
        self.threads = threads
        self.profile = profile
        self.system = scenario.system()
        self._density: LevelDensity | None = None
        self._curve = None

    @property
    def density(self) -> LevelDensity:
        if self._density is None:
            count = max(500, self.scenario.energy_count // _PROFILES[self.profile])
            self._density = system_density(self.system, self.scenario.energy_max, count)
        return self._density

    @property
    def curve(self):
        if self._curve is None:
            self._curve = microcanonical.build_caloric_curve(self.density)
        return self._curve

    def _map(self, fn, items):
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, items))

    def canonical_sweep(self):
        rows = self._map(lambda b: _canonical_row(self.system, float(b)), self.scenario.betas())
        header = ["beta", "T", "Z", "lnZ", "C_can", "C_can_per_f", "C_pot", "dC_dbeta", "mean_V", "var_V", "skew_V"]
        return [_write_csv(self.directory / "canonical_sweep.csv", header, rows)]

    def micro_sweep(self):
        curve, f = self.curve, self.system.f

        def rows_for(beta):
            return [
                [float(beta), 1.0 / beta, -1 if c.branch is None else c.branch, c.tag, c.energy, c.value, c.value / f]
                for c in microcanonical.heat_capacity_micro(self.density, float(beta), curve)
            ]

        rows = [row for chunk in self._map(rows_for, self.scenario.betas()) for row in chunk]
        header = ["beta", "T", "branch_id", "tag", "E", "C_mic", "C_mic_per_f"]
        return [_write_csv(self.directory / "micro_sweep.csv", header, rows)]

    def caloric_curve(self):
        rows = [
            [e, beta, branch.index, branch.tag]
            for branch in self.curve.branches
            for e, beta in zip(branch.energies, branch.betas)
        ]
        return [_write_csv(self.directory / "caloric_curve.csv", ["E", "beta_mic", "branch_id", "tag"], rows)]

    def distribution(self):
        files = []
        for beta in self.scenario.distribution_betas:
            dist = microcanonical.thermal_distribution(self.density, beta)
            stem = f"distribution_{_beta_label(beta)}"
            files.append(_write_csv(self.directory / f"{stem}.csv", ["E", "w"], zip(dist.energies, dist.values)))
            files.append(_write_csv(self.directory / f"{stem}_extrema.csv", ["E", "kind"], dist.extrema))
        return files

    def _predictions(self):
        if any(c.kind is Kind.PLATEAU for c in self.system.components):
            return [], esqpt.predict_plateau_singularities(self.system)
        points = esqpt.enumerate_stationary_points(self.system)
        return points, esqpt.predict_singularities(points, self.system.f)

    def stationary_points(self):
        _, predictions = self._predictions()
        rows = [[p.energy, " ".join(map(str, p.ranks)) or "-", p.type == esqpt.DEGENERATE, p.type, p.multiplicity]
                for p in predictions]
        header = ["E_c", "r", "degenerate", "predicted_type", "multiplicity"]
        return [_write_csv(self.directory / "stationary_points.csv", header, rows)]

    def singularity_report(self):
        _, predictions = self._predictions()
        grid = self.density.grid
        rows = []
        for p in predictions:
            if not grid[0] <= p.energy < grid[-1]:
                continue
            report = esqpt.detect_nonanalyticity(self.density, p.energy, p.order)
            rows.append([p.energy, p.type, p.sign, p.order, report.type, report.sign, report.energy,
                         report.agrees_with(p), report.note])
        header = ["E_c", "predicted_type", "predicted_sign", "order", "detected_type", "detected_sign",
                  "located_E", "agrees", "note"]
        return [_write_csv(self.directory / "singularity_report.csv", header, rows)]

    def closed_form_checks(self):
        rows = []
        for i, c in enumerate(self.system.components):
            if c.is_polynomial and (c.a, c.b, c.c) == (0.0, -2.0, 1.0):
                for beta in self.scenario.betas():
                    quad = math.exp(canonical.component_statistics(c, beta).log_z + beta * c.v)
                    exact = canonical.closed_form_Z_degenerate_double_well(beta)
                    rows.append([i + 1, float(beta), quad, exact, quad / exact - 1.0])
        header = ["component", "beta", "Z_config_quadrature", "Z_config_closed_form", "rel_error"]
        return [_write_csv(self.directory / "closed_form_checks.csv", header, rows)]

    def density_table(self):
        return list(self.density.to_csv(self.directory / "density.csv"))


def _versions() -> dict[str, str]:
    from . import __version__

    return {"heatcap": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def run_scenario(
    scenario: Scenario,
    out: Path | str = "runs",
    threads: int = 1,
    profile: str = "strict",
) -> RunResult:
    """Write every requested table into ``<out>/<config hash>/`` plus a manifest.

    A failure in one output is recorded in the manifest and the remaining
    outputs are still produced.
    """
    if profile not in _PROFILES:
        raise ValueError(f"unknown tolerance profile {profile!r}")
    directory = Path(out) / scenario.digest()
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "scenario.ini").write_text(serialize_scenario(scenario))
    runner = _Runner(scenario, directory, threads, profile)
    result = RunResult(directory)
    manifest = {
        "config_hash": scenario.digest(),
        "f": str(runner.system.f),
        "tolerance_profile": profile,
        "threads": str(threads),
        "beta_grid": f"{scenario.beta_spacing} {scenario.beta_min!r} {scenario.beta_max!r} {scenario.beta_count}",
        "energy_grid": f"0 {scenario.energy_max!r} "
        f"{max(500, scenario.energy_count // _PROFILES[profile])}",
        "boltzmann_cutoff": repr(canonical.BOLTZMANN_CUTOFF),
        "divergence_threshold": repr(microcanonical.DIVERGENCE_THRESHOLD),
    }
    manifest.update({f"version.{k}": v for k, v in _versions().items()})
    stages = {name: getattr(runner, "density_table" if name == "density" else name) for name in OUTPUTS}
    for name in OUTPUTS:
        if name not in scenario.outputs:
            continue
        start = time.perf_counter()
        try:
            result.files += stages[name]()
            manifest[f"output.{name}"] = "ok"
        except Exception as exc:  # noqa: BLE001 - reported per output
            log.exception("output %s failed", name)
            result.errors[name] = f"{type(exc).__name__}: {exc}"
            manifest[f"output.{name}"] = f"error: {result.errors[name]}"
        manifest[f"wall_time.{name}"] = f"{time.perf_counter() - start:.3f}"
    text = "".join(f"{k} = {v}\n" for k, v in manifest.items())
    (directory / "manifest.txt").write_text(text)
    return result


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="heatcap", description="Heat-capacity scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("config", type=Path)
    run.add_argument("--out", type=Path, default=Path("runs"))
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--tolerance-profile", choices=sorted(_PROFILES), default="strict")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        scenario = parse_scenario(args.config.read_text())
    except (OSError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = run_scenario(scenario, args.out, args.threads, args.tolerance_profile)
    print(result.directory)
    for name, message in result.errors.items():
        print(f"{name}: {message}", file=sys.stderr)
    return 1 if result.errors else 0


if __name__ == "__main__":
    sys.exit(main())
