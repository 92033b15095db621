import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatcap.density import PowerLawSpec, power_law_density, system_density
from heatcap.esqpt import (
    INVERSE_SQRT,
    JUMP,
    LOG,
    MIXED,
    NONE,
    detect_nonanalyticity,
    enumerate_stationary_points,
    predict_plateau_singularities,
    predict_singularities,
)
from heatcap.potential import (
    SeparableSystem,
    harmonic,
    plateau_system,
    quartic,
    quartic_chain,
    stationary_points_1d,
    well_plus_oscillators,
)


@pytest.mark.parametrize("f", [3, 4, 5, 15])
def test_well_family_has_three_points(f):
    points = enumerate_stationary_points(well_plus_oscillators(f))
    assert [p.rank for p in points] == [0, 0, 1]
    assert points[0].energy == 0.0


@pytest.mark.parametrize("f, count", [(3, 27), (4, 81), (5, 243), (15, 2187)])
def test_quartic_chain_counts(f, count):
    assert len(enumerate_stationary_points(quartic_chain(f))) == count


def test_global_minimum_first():
    points = enumerate_stationary_points(quartic_chain(4))
    assert points[0].rank == 0 and points[0].energy == 0.0
    assert all(0 <= p.rank <= 4 for p in points)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-3, 2), st.floats(0.1, 2)), min_size=1, max_size=4))
def test_count_and_morse_laws(params):
    system = SeparableSystem(tuple(quartic(a, b, c) for a, b, c in params))
    per = [stationary_points_1d(c) for c in system.components]
    points = enumerate_stationary_points(system)
    assert len(points) == math.prod(len(p) for p in per)
    if not any(p.degenerate for p in points):
        morse = math.prod(sum(1 if s.curvature == "min" else -1 for s in comp) for comp in per)
        assert sum((-1) ** p.rank for p in points) == morse == 1


def test_prediction_rows():
    preds = predict_singularities(enumerate_stationary_points(well_plus_oscillators(3)), 3)
    assert [(p.type, p.sign, p.order) for p in preds] == [(JUMP, 1, 2), (JUMP, 1, 2), (LOG, -1, 2)]
    (minimum,) = [p for p in predict_singularities(enumerate_stationary_points(well_plus_oscillators(4)), 4) if p.energy == 0]
    assert (minimum.type, minimum.sign, minimum.order) == (JUMP, 1, 3)


def test_rank_two_sign():
    system = SeparableSystem((quartic(0, -2, 1), quartic(0.5, -2, 1)))
    top = predict_singularities(enumerate_stationary_points(system), 2)[-1]
    assert top.ranks == (2,) and top.type == JUMP and top.sign == -1


def test_coincident_energies_merge():
    preds = predict_singularities(enumerate_stationary_points(SeparableSystem((quartic(0, -2, 1),))), 1)
    assert preds[0].energy == 0.0 and preds[0].multiplicity == 2 and preds[0].type == JUMP
    mixed = predict_singularities(enumerate_stationary_points(SeparableSystem((quartic(0, -2, 1),) * 2)), 2)
    # E = 1: two points with r = 1 (one barrier + one minimum each)
    at_one = [p for p in mixed if p.energy == pytest.approx(1.0)][0]
    assert at_one.multiplicity == 4 and at_one.type == LOG
    assert all(p.type != MIXED for p in mixed)


def test_plateau_predictions():
    preds = predict_plateau_singularities(plateau_system(4, [(0, 1), (1, 1)]))
    assert [(p.energy, p.type, p.order) for p in preds] == [(0.0, INVERSE_SQRT, 3), (1.0, INVERSE_SQRT, 3)]


def test_plateau_rejected_in_enumeration():
    with pytest.raises(ValueError):
        enumerate_stationary_points(plateau_system(2, [(0, 1)]))


def test_detection_well_plus_oscillators(well3_density):
    points = enumerate_stationary_points(well_plus_oscillators(3))
    for pred in predict_singularities(points, 3):
        report = detect_nonanalyticity(well3_density, pred.energy, 2)
        assert report.agrees_with(pred), (pred, report)


def test_detection_f4_prediction_agreement():
    system = well_plus_oscillators(4)
    d = system_density(system, 8.0, 4000)
    for pred in predict_singularities(enumerate_stationary_points(system), 4):
        assert detect_nonanalyticity(d, pred.energy, 3).agrees_with(pred)


def test_detection_plateau_f4():
    system = plateau_system(4, [(0, 1), (1, 1)])
    d = system_density(system, 6.0, 4000)
    for pred in predict_plateau_singularities(system):
        report = detect_nonanalyticity(d, pred.energy, 3)
        assert report.type == INVERSE_SQRT and report.agrees_with(pred)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_smooth_density_reports_none(order):
    spec = PowerLawSpec.separable([(2, 4, 1, 1), (2, 2, 1, 1), (2, 3, 1, 1)])
    report = detect_nonanalyticity(power_law_density(spec, 6.0, 4000), 2.0, order)
    assert report.type == NONE and report.conclusive


def test_coarse_grid_is_inconclusive():
    d = system_density(well_plus_oscillators(3), 8.0, 60)
    report = detect_nonanalyticity(d, d.singular_points[1].energy, 2)
    assert not report.conclusive
    assert "grid spacing" in report.note
