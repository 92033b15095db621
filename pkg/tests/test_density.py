import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import phase_space_density

from heatcap.density import (
    LevelDensity,
    PowerLawSpec,
    SingularWindowError,
    config_integrals,
    convolve_densities,
    density_1d_numeric,
    density_plateau,
    density_power_law,
    laplace_transform,
    log_density_derivative,
    one_dim_density,
    power_law_density,
    system_density,
)
from heatcap.potential import Kind, build_component, harmonic, plateau_well, quartic, quartic_chain


def test_harmonic_density_is_flat():
    e = np.linspace(0.01, 20, 57)
    assert np.allclose(density_1d_numeric(harmonic(1), e), 1 / math.sqrt(2), rtol=1e-12)


def test_density_zero_below_minimum():
    assert float(density_1d_numeric(quartic(0.5, -2, 1), -0.1)) == 0.0


def test_pure_quartic_scaling():
    comp = build_component(Kind.POWER, b=1.0, exponent=4.0)
    e = np.array([0.2, 1.7, 5.0])
    assert np.allclose(density_1d_numeric(comp, e), density_1d_numeric(comp, 1.0) * e**-0.25, rtol=1e-12)


def test_polynomial_quartic_matches_pure_power():
    poly = build_component(Kind.QUARTIC, a=0.0, b=0.0, c=1.0)
    power = build_component(Kind.POWER, b=1.0, exponent=4.0)
    e = np.array([0.3, 1.0, 4.0])
    assert np.allclose(density_1d_numeric(poly, e), density_1d_numeric(power, e), rtol=1e-11)


def test_double_well_below_barrier_sums_two_wells():
    comp = quartic(0, -2, 1)
    for e in (0.3, 0.8):
        ref = phase_space_density(comp, e, (-2.0, 2.0))
        assert float(density_1d_numeric(comp, e)) == pytest.approx(ref, rel=1e-5)
    # each well alone: restrict the oracle to q > 0
    half = phase_space_density(comp, 0.5, (0.0, 2.0))
    assert float(density_1d_numeric(comp, 0.5)) == pytest.approx(2 * half, rel=1e-5)


def test_antiderivative_identity():
    # dJ_{1/2}/dE = J_{-1/2}/2
    comp = quartic(0.5, -2, 1)
    e, h = 2.3, 1e-4
    j = config_integrals(comp, [e - h, e + h, e], [0.5, -0.5])
    assert (j[0.5][1] - j[0.5][0]) / (2 * h) == pytest.approx(0.5 * j[-0.5][2], rel=1e-7)


# -- power laws ------------------------------------------------------------


@pytest.mark.parametrize(
    "terms, M",
    [([(2, 2, 1, 1)], 1.0), ([(2, 4, 1, 1)], 0.75), ([(2, 2, 1, 1), (2, 2, 1, 1)], 2.0)],
)
def test_power_law_exponent(terms, M):
    spec = PowerLawSpec.separable(terms)
    assert spec.M == pytest.approx(M)
    e = np.array([0.5, 1.0, 4.0])
    rho = density_power_law(spec, e)
    assert np.allclose(rho / rho[1], e ** (M - 1))


def test_hard_wall_limit():
    spec = PowerLawSpec.separable([(2, 1e6, 1, 1)])
    assert spec.M - 1 == pytest.approx(-0.5, abs=1e-5)


def test_harmonic_power_law_normalization():
    # H = p^2/2 + q^2/2 has rho = 1/omega = 1
    spec = PowerLawSpec.separable([(2, 2, 0.5, 0.5)])
    assert float(density_power_law(spec, 3.0)) == pytest.approx(1.0, rel=1e-13)


def test_rotational_matches_separable_for_quadratic():
    sep = PowerLawSpec.separable([(2, 2, 0.5, 0.5)] * 3)
    rot = PowerLawSpec.rotational_form(3, 2, 2, 0.5, 0.5)
    assert rot.M == sep.M
    assert float(density_power_law(rot, 2.0)) == pytest.approx(float(density_power_law(sep, 2.0)), rel=1e-12)


def test_power_law_rejects_nonpositive_energy():
    with pytest.raises(ValueError):
        density_power_law(PowerLawSpec.separable([(2, 2, 1, 1)]), 0.0)


@given(st.floats(0.2, 5), st.floats(0.1, 10), st.lists(st.tuples(st.floats(1, 6), st.floats(1, 6)), min_size=1, max_size=4))
def test_power_law_energy_scaling(lam, e, powers):
    # H -> lam H maps rho(E) to rho(E/lam)/lam
    spec = PowerLawSpec.separable([(J, I, 1.0, 1.0) for J, I in powers])
    scaled = PowerLawSpec.separable([(J, I, lam, lam) for J, I in powers])
    assert float(density_power_law(scaled, e)) == pytest.approx(float(density_power_law(spec, e / lam)) / lam, rel=1e-10)


# -- plateau wells ---------------------------------------------------------


def test_single_plateau_f1():
    e = np.array([0.1, 1.0, 3.0])
    assert np.allclose(density_plateau(1, [(0, 1)], [], e), (2 * e) ** -0.5 / math.pi, rtol=1e-13)


def test_single_plateau_f2():
    e, length, omega = np.array([0.4, 2.0]), 1.7, 1.3
    expected = length / (math.pi * omega) * np.sqrt(2 * e)
    assert np.allclose(density_plateau(2, [(0, length)], [omega], e), expected, rtol=1e-13)


def test_plateau_frequency_count_checked():
    with pytest.raises(ValueError):
        density_plateau(3, [(0, 1)], [1.0], 1.0)


def test_plateau_system_density_matches_closed_form():
    from heatcap.potential import plateau_system

    plateaus = [(0, 1), (1, 0.5), (2, 2)]
    d = system_density(plateau_system(4, plateaus), 5.0, 1000)
    ref = density_plateau(4, plateaus, [math.sqrt(2)] * 3, d.grid)
    # nodes sitting exactly on a divergence are evaluated half a cell higher
    moved = np.isin(d.grid, d.metadata["shifted_nodes"])
    assert moved.sum() == 1
    assert np.allclose(d.values[~moved], ref[~moved], rtol=1e-11, atol=1e-14)


def test_plateau_convolution_with_oscillator_pair():
    grid = np.linspace(0, 6, 3001)
    well = one_dim_density(plateau_well([(0, 1), (1, 1)]), grid)
    osc = power_law_density(PowerLawSpec.separable([(2, 2, 0.5, 0.5)] * 2), 6.0, 3001)
    out = convolve_densities([well, osc])
    ref = density_plateau(3, [(0, 1), (1, 1)], [1.0, 1.0], out.grid)
    away = np.abs(out.grid - 1.0) > 0.01
    away &= out.grid > 0.01
    assert np.allclose(out.values[away], ref[away], rtol=1e-4)


def test_concentrated_kernel_acts_like_a_shift():
    grid = np.linspace(0, 4, 4001)
    h = grid[1]
    well = one_dim_density(plateau_well([(0.5, 1)]), grid)
    # unit mass piled on the first node past zero
    spike = np.zeros_like(grid)
    spike[1] = 1.0 / h
    out = convolve_densities([well, LevelDensity(grid, spike, 1)])
    probe = np.array([1.5, 2.5, 3.5])
    assert np.allclose(np.interp(probe, out.grid, out.values), well(probe - h), rtol=1e-5)


# -- convolution -----------------------------------------------------------


def _smooth(M, n=2001):
    return power_law_density(PowerLawSpec.separable([(2, 2 / (M - 0.5), 0.5, 0.5)]), 4.0, n)


def test_convolution_against_exact_power_law():
    a = power_law_density(PowerLawSpec.separable([(2, 4, 1, 1)]), 4.0, 2001)
    b = power_law_density(PowerLawSpec.separable([(2, 2, 1, 1), (2, 3, 1, 1)]), 4.0, 2001)
    out = convolve_densities([a, b])
    sel = out.grid > 0.2
    ref = density_power_law(PowerLawSpec.separable([(2, 4, 1, 1), (2, 2, 1, 1), (2, 3, 1, 1)]), out.grid[sel])
    assert np.allclose(out.values[sel], ref, rtol=1e-8)


def test_convolution_associativity():
    a, b, c = (_smooth(m) for m in (1.2, 1.5, 2.0))
    left = convolve_densities([convolve_densities([a, b]), c])
    right = convolve_densities([a, convolve_densities([b, c])])
    sel = left.grid > 0.2
    assert np.allclose(left.values[sel], right.values[sel], rtol=1e-8)


def test_convolution_rejects_mismatched_spacing():
    with pytest.raises(ValueError):
        convolve_densities([_smooth(1.5, 2001), _smooth(1.5, 1001)])


def test_singular_point_bookkeeping_counts():
    d = system_density(quartic_chain(3), 8.0, 801)
    # 27 stationary energies, all below 8
    assert len(d.singular_points) == 27


def test_multi_kernel_density_is_grid_converged():
    coarse = system_density(quartic_chain(3), 4.0, 1001)
    fine = system_density(quartic_chain(3), 4.0, 2001)
    probe = np.array([0.5, 1.1, 1.7, 2.9, 3.7])
    idx_c = np.rint(probe / coarse.spacing).astype(int)
    idx_f = np.rint(probe / fine.spacing).astype(int)
    assert np.allclose(coarse.values[idx_c], fine.values[idx_f], rtol=1e-4)


# -- Laplace and log-derivatives ---------------------------------------------


def test_laplace_of_power_law():
    spec = PowerLawSpec.separable([(2, 2, 1, 1), (2, 4, 1, 1)])
    d = power_law_density(spec, 60.0, 4000)
    for beta in (0.5, 1.0, 3.0):
        assert laplace_transform(d, beta) == pytest.approx(math.exp(spec.log_prefactor) * beta**-spec.M, rel=1e-6)


@pytest.mark.parametrize("order, expected", [(1, 2.0), (2, -4.0)])
def test_log_derivative_power_law(order, expected):
    d = power_law_density(PowerLawSpec.separable([(2, 2, 1, 1)] * 2), 4.0, 4000)
    value, err = log_density_derivative(d, order, 0.5)
    assert value == pytest.approx(expected, rel=1e-8)
    assert err < 1e-4 * abs(expected)


def test_log_derivative_flat():
    d = power_law_density(PowerLawSpec.separable([(2, 2, 1, 1)]), 4.0, 400)
    assert abs(log_density_derivative(d, 1, 1.3)[0]) < 1e-12


def test_log_derivative_refuses_near_singularity(well3_density):
    e_c = well3_density.singular_points[1].energy
    with pytest.raises(SingularWindowError):
        log_density_derivative(well3_density, 1, e_c + 0.5 * well3_density.spacing)


def test_csv_round_trip(tmp_path, well3_density):
    main, side = well3_density.to_csv(tmp_path / "rho.csv")
    back = LevelDensity.from_csv(main, 3)
    assert np.array_equal(back.values, well3_density.values)
    assert np.allclose(back.singular_energies(), well3_density.singular_energies(), rtol=0, atol=0)
    assert side.read_text().splitlines()[0] == "E_c,type"


@settings(max_examples=15, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-3, -0.5), st.floats(0.3, 2), st.floats(0.05, 6))
def test_density_is_derivative_of_volume(a, b, c, e):
    comp = quartic(a, b, c)
    h = 1e-5
    j = config_integrals(comp, [e - h, e + h, e], [0.5, -0.5])
    assert (j[0.5][1] - j[0.5][0]) / (2 * h) == pytest.approx(0.5 * j[-0.5][2], rel=1e-5)
