import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from microdoppler.cs import CsSolverConfig
from microdoppler.mimo import (MimoDataCube, QuadrantLayout, array_factor, assemble_coherent_matrix,
                               beamwidth_3db, build_virtual_array, doa_matched_filter, doa_sparse,
                               identifiability_experiment, phase_transition, physical_array,
                               round_robin_schedule, synthesize_mimo_echo,
                               write_phase_transition_csv)
from microdoppler.signal import AliasingError, MicroDopplerTarget, PulseTrainConfig, synthesize_echo

LAYOUT = QuadrantLayout.pwr()
VA = build_virtual_array(LAYOUT)
CFG = PulseTrainConfig(64, 1 / 5120)
WEIGHTS = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]])


def test_virtual_array_matches_brute_force():
    d = LAYOUT.quadrant_size
    counts = {}
    for t, r in itertools.product(LAYOUT.centers, repeat=2):
        key = tuple(np.round((t + r) / d, 6))
        counts[key] = counts.get(key, 0) + 1
    assert len(VA.centers) == 9 == len(counts)
    for c, w in zip(VA.centers, VA.weights):
        assert counts[tuple(np.round(c / d, 6))] == w
    assert np.array_equal(VA.weight_grid(), WEIGHTS)
    assert VA.weights.sum() == 16


def test_pitch_d_corner_layout():
    d = 0.5
    lay = QuadrantLayout(np.array([[0, d], [d, d], [0, 0], [d, 0]]), 0.03, d)
    va = build_virtual_array(lay)
    xs = sorted(set(np.round(va.centers[:, 0], 9)))
    assert np.allclose(xs, [0, d, 2 * d])
    assert np.array_equal(va.weight_grid(), WEIGHTS)


def test_single_colocated_quadrant():
    va = build_virtual_array(QuadrantLayout(np.zeros((1, 2)), 0.03, 0.36))
    assert len(va.centers) == 1 and list(va.weights) == [1]


def test_aperture_extent_is_one_and_a_half():
    vx, vy = VA.extent_wavelengths
    px, py = physical_array(LAYOUT).extent_wavelengths
    assert (round(vx), round(vy), round(px), round(py)) == (36, 36, 24, 24)
    assert vx / px == pytest.approx(1.5) and vy / py == pytest.approx(1.5)


def test_round_robin_schedule():
    s = round_robin_schedule(4, 3)
    assert s.tolist() == [[0, 4, 8], [1, 5, 9], [2, 6, 10], [3, 7, 11]]


def test_broadside_cube_is_siso_echo():
    tgt = MicroDopplerTarget(1.0, 700.0, ((120.0, 0.4),))
    cube = synthesize_mimo_echo(LAYOUT, [tgt], CFG)
    siso = synthesize_echo(CFG, [tgt]).samples
    for t in range(4):
        for r in range(4):
            assert np.allclose(cube.data[t, r], siso[cube.schedule[t]])


def test_coinciding_phase_centres_give_identical_channels():
    # Tx0/Rx1 and Tx1/Rx0 land on the same virtual center. They fire on
    # different pulses, so only a zero-Doppler target gives equal samples.
    still = synthesize_mimo_echo(LAYOUT, [MicroDopplerTarget(1.0, 0.0, azimuth=0.2)], CFG)
    assert np.allclose(still.data[0, 1], still.data[1, 0])
    moving = synthesize_mimo_echo(LAYOUT, [MicroDopplerTarget(1.0, 300.0, azimuth=0.2)], CFG)
    lag = np.exp(-1j * 300.0 * CFG.pri)  # Tx1 fires one PRI after Tx0
    assert np.allclose(moving.data[1, 0], moving.data[0, 1] * lag)


def test_coherent_matrix_broadside_is_weight_times_phase():
    cube = synthesize_mimo_echo(LAYOUT, [MicroDopplerTarget(1.0, 0.0)], CFG)
    m = assemble_coherent_matrix(cube, VA)
    assert m.shape == (16, 3, 3)
    assert np.allclose(m[0], WEIGHTS)


def test_coherent_matrix_phases_follow_geometry():
    theta = np.deg2rad(0.7)
    cube = synthesize_mimo_echo(LAYOUT, [MicroDopplerTarget(1.0, 0.0, azimuth=theta)], CFG)
    m = assemble_coherent_matrix(cube, VA)[0]
    k = 2 * np.pi / LAYOUT.wavelength
    for (row, col), c, w in zip(VA.cell_index(), VA.centers, VA.weights):
        assert np.isclose(m[row, col], w * np.exp(-1j * k * c[0] * np.sin(theta)))


def test_zero_cube_and_missing_channel():
    sched = round_robin_schedule(4, 2)
    zero = MimoDataCube(np.zeros((4, 4, 2)), sched, CFG)
    assert not assemble_coherent_matrix(zero, VA).any()
    bad = np.zeros((4, 4, 2), complex)
    bad[1, 2, 0] = np.nan
    with pytest.raises(ValueError):
        assemble_coherent_matrix(MimoDataCube(bad, sched, CFG), VA)


@given(seed=st.integers(0, 2**31), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_coherent_matrix_is_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    sched = round_robin_schedule(4, 2)
    d1 = rng.standard_normal((4, 4, 2)) + 1j * rng.standard_normal((4, 4, 2))
    d2 = rng.standard_normal((4, 4, 2)) + 0j
    f = lambda d: assemble_coherent_matrix(MimoDataCube(d, sched, CFG), VA)
    assert np.allclose(f(a * d1 + b * d2), a * f(d1) + b * f(d2))


def test_cube_validation():
    with pytest.raises(ValueError):
        synthesize_mimo_echo(LAYOUT, [], PulseTrainConfig(30, 1e-3))
    with pytest.raises(AliasingError):
        synthesize_mimo_echo(LAYOUT, [MicroDopplerTarget(1.0, 1e6)], CFG)
    with pytest.raises(ValueError):
        MimoDataCube(np.zeros((4, 4, 2)), np.zeros((4, 2), int), CFG)


def test_doa_matched_filter_peak_within_one_cell():
    theta = np.deg2rad(0.55)
    cube = synthesize_mimo_echo(LAYOUT, [MicroDopplerTarget(1.0, 0.0, azimuth=theta)], CFG)
    m = assemble_coherent_matrix(cube, VA)[0]
    grid = np.deg2rad(np.linspace(-1.2, 1.2, 49))
    fine = np.deg2rad(np.linspace(-1.2, 1.2, 4801))
    coarse_peak = grid[np.argmax(doa_matched_filter(m, VA, grid))]
    fine_peak = fine[np.argmax(doa_matched_filter(m, VA, fine))]
    step = grid[1] - grid[0]
    assert abs(coarse_peak - fine_peak) <= step
    assert abs(fine_peak - theta) < np.deg2rad(0.001)


def test_doa_sparse_on_grid_target():
    angles = np.deg2rad(np.linspace(-1.0, 1.0, 21))
    theta = angles[14]
    cube = synthesize_mimo_echo(LAYOUT, [MicroDopplerTarget(1.0, 0.0, azimuth=theta)], CFG)
    est = doa_sparse(assemble_coherent_matrix(cube, VA)[0], VA, angles,
                     CsSolverConfig(mode="basis-pursuit"))
    assert int(np.argmax(np.abs(est.amplitudes))) == 14
    assert est.metrics["angles"][14] == pytest.approx(theta)


def test_array_factor_single_element_is_flat():
    va = build_virtual_array(QuadrantLayout(np.zeros((1, 2)), 0.03, 0.36))
    pat = array_factor(va, np.linspace(-0.5, 0.5, 51), element_pattern=False)
    assert np.allclose(pat.power, pat.power[0])


def test_virtual_pattern_symmetric_and_peaked_at_broadside():
    angles = np.deg2rad(np.linspace(-5, 5, 2001))
    pat = array_factor(VA, angles, weighting="multiplicity")
    assert np.argmax(pat.power) == 1000
    assert np.allclose(pat.power, pat.power[::-1])


def test_beamwidth_ratio_two_thirds():
    angles = np.deg2rad(np.linspace(-3, 3, 60001))
    ratio = array_factor(VA, angles).width_3db / array_factor(physical_array(LAYOUT), angles).width_3db
    assert ratio == pytest.approx(2 / 3, rel=0.05)


def test_beamwidth_of_known_sinc():
    # a uniform aperture of D wavelengths has a 0.886 / D rad half-power width
    u = np.linspace(-0.1, 0.1, 20001)
    p = np.sinc(20 * u) ** 2
    assert beamwidth_3db(u, p) == pytest.approx(0.886 / 20, rel=1e-3)


def test_tiny_grid_identifiability():
    # L=1 from two samples on a 4-point grid: every pair of columns is distinct
    assert identifiability_experiment(1, 2, 1, 2, range(20), n_grid=4) == 1.0


def test_phase_transition_collapse_and_recovery(tmp_path):
    rows = phase_transition([2], [lambda L: L, lambda L: 6 * L], range(20), n_grid=64)
    low, high = rows
    assert low["measurements"] == 2 and low["success_rate"] <= 0.2
    assert high["measurements"] == 12 and high["success_rate"] >= 0.9
    write_phase_transition_csv(rows, tmp_path / "pt.csv")
    lines = (tmp_path / "pt.csv").read_text().splitlines()
    assert lines[0] == "L,channels,samples,pulses,measurements,success_rate"
    assert len(lines) == 3


def test_identifiability_validation():
    with pytest.raises(ValueError):
        identifiability_experiment(1, 4, 4, 8, [0], n_grid=64)
    with pytest.raises(ValueError):
        phase_transition([1], [3], [0], channels=2)
