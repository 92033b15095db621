import csv
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatcap.cli import ScenarioError, main, parse_scenario, run_scenario, serialize_scenario

SCENARIOS = Path(__file__).parent.parent / "scenarios"

FIG3A = """
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
beta_min = 0.5
beta_max = 4
beta_count = 6
beta_spacing = log
energy_max = 8
energy_count = 800

[outputs]
include = canonical_sweep, micro_sweep, caloric_curve, distribution, stationary_points, singularity_report, density
distribution_betas = 1.5
"""


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_parse_well_plus_oscillators():
    scenario = parse_scenario(FIG3A)
    assert scenario.system().f == 3
    assert scenario.distribution_betas == (1.5,)


def test_parse_quartic_chain():
    sections = "".join(f"[system.{i}]\nkind = quartic\na = {i / 5}\nb = -2\nc = 1\n" for i in range(1, 5))
    assert parse_scenario(sections).system().f == 4


def test_empty_system_rejected():
    with pytest.raises(ScenarioError, match="f >= 1"):
        parse_scenario("[grids]\nbeta_min = 1\n")


@pytest.mark.parametrize(
    "text, line",
    [
        ("[system.1]\nkind = quartic\nq = 1\n", 3),
        ("[system.1]\nkind = bogus\n", 2),
        ("[system.1]\nkind = harmonic\nb = 1\n[grids]\nbeta_min = x\n", 5),
        ("[system.1]\nkind = harmonic\nb = 1\n\n[outputs]\ninclude = plots\n", 6),
        ("[system.1]\nkind = harmonic\nb = 1\nnonsense line\n", 4),
        ("[system.1]\nkind = quartic\na = 0\nb = -2\nc = -1\n", 1),
    ],
)
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    assert info.value.line == line


def test_semantic_error_names_invariant():
    with pytest.raises(ScenarioError, match="beta_min must be positive"):
        parse_scenario("[system.1]\nkind = harmonic\nb = 1\n[grids]\nbeta_min = 0\n")


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.ini")), ids=lambda p: p.stem)
def test_shipped_scenarios_round_trip(path):
    scenario = parse_scenario(path.read_text())
    assert parse_scenario(serialize_scenario(scenario)) == scenario


number = st.floats(-3, 3, allow_nan=False).map(lambda x: round(x, 6))


@settings(max_examples=40)
@given(
    st.lists(st.tuples(number, st.floats(-3, -0.1), st.floats(0.1, 3), st.integers(1, 3)), min_size=1, max_size=3),
    st.floats(0.01, 1),
    st.integers(1, 100),
)
def test_round_trip_property(components, beta_min, count):
    text = "".join(
        f"[system.{i}]\nkind = quartic\na = {a!r}\nb = {b!r}\nc = {c!r}\ncount = {k}\n"
        for i, (a, b, c, k) in enumerate(components, 1)
    )
    text += f"[grids]\nbeta_min = {beta_min!r}\nbeta_count = {count}\nenergy_max = 30\n"
    scenario = parse_scenario(text)
    assert parse_scenario(serialize_scenario(scenario)) == scenario


def test_run_is_deterministic(tmp_path):
    scenario = parse_scenario(FIG3A)
    first = run_scenario(scenario, tmp_path / "a", threads=4)
    second = run_scenario(scenario, tmp_path / "b", threads=1)
    assert not first.errors
    names = sorted(p.name for p in first.files)
    assert names == sorted(p.name for p in second.files)
    for name in names:
        assert (first.directory / name).read_bytes() == (second.directory / name).read_bytes()
    assert first.directory.name == scenario.digest()


def test_run_outputs(tmp_path):
    result = run_scenario(parse_scenario(FIG3A), tmp_path)
    sweep = _rows(result.directory / "canonical_sweep.csv")
    assert sweep[0][:3] == ["beta", "T", "Z"]
    assert len(sweep) == 7
    report = _rows(result.directory / "singularity_report.csv")
    assert all(row[7] == "True" for row in report[1:])
    manifest = (result.directory / "manifest.txt").read_text()
    assert "output.canonical_sweep = ok" in manifest
    assert "wall_time.micro_sweep" in manifest


def test_failures_are_isolated(tmp_path, monkeypatch):
    from heatcap import cli

    def broken(self):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli._Runner, "caloric_curve", broken)
    result = run_scenario(parse_scenario(FIG3A), tmp_path)
    assert result.errors == {"caloric_curve": "RuntimeError: boom"}
    produced = {p.name for p in result.files}
    assert {"canonical_sweep.csv", "micro_sweep.csv", "density.csv"} <= produced
    manifest = (result.directory / "manifest.txt").read_text()
    assert "output.caloric_curve = error: RuntimeError: boom" in manifest


def test_main_entry_point(tmp_path, capsys):
    config = tmp_path / "run.ini"
    config.write_text(FIG3A.replace("canonical_sweep, micro_sweep, caloric_curve, distribution, stationary_points, singularity_report, density", "canonical_sweep"))
    assert main(["run", str(config), "--out", str(tmp_path / "out"), "--tolerance-profile", "fast"]) == 0
    out_dir = Path(capsys.readouterr().out.strip())
    assert (out_dir / "canonical_sweep.csv").exists()


def test_main_reports_parse_errors(tmp_path, capsys):
    config = tmp_path / "bad.ini"
    config.write_text("[system.1]\nkind = harmonic\nbogus = 2\n")
    assert main(["run", str(config)]) == 2
    assert "line 3" in capsys.readouterr().err
