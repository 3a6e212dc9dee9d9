import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from microdoppler.numerics import (DopplerGrid, SingularMatrixError, SpectrumEstimate, as_matrix,
                                   dft_matrix, fft_spectrum, hermitian_svd, solve_hermitian,
                                   window_taps)
from microdoppler.signal import MicroDopplerTarget, PulseTrainConfig, target_echo

from conftest import random_hermitian


@given(n=st.integers(1, 12), seed=st.integers(0, 2**31), psd=st.booleans())
def test_hermitian_svd_reconstructs(n, seed, psd):
    m = random_hermitian(np.random.default_rng(seed), n, psd)
    u, s, v = hermitian_svd(m)
    assert np.allclose(u @ np.diag(s) @ v.conj().T, m, atol=1e-9 * max(1, np.abs(m).max()))
    assert np.all(np.diff(s) <= 1e-12)
    assert np.all(s >= 0)
    assert np.allclose(u.conj().T @ u, np.eye(n), atol=1e-10)


@given(seed=st.integers(0, 2**31))
def test_hermitian_svd_singular_values_match_numpy(seed):
    m = random_hermitian(np.random.default_rng(seed), 6)
    _, s, _ = hermitian_svd(m)
    assert np.allclose(s, np.linalg.svd(m, compute_uv=False))


def test_hermitian_svd_psd_has_v_equal_u(rng):
    u, _, v = hermitian_svd(random_hermitian(rng, 5, psd=True))
    assert np.array_equal(u, v)


def test_hermitian_svd_negative_eigenvalue_flips_v():
    u, s, v = hermitian_svd(np.diag([-3.0, 1.0]))
    assert np.allclose(s, [3, 1])
    assert np.allclose(v[:, 0], -u[:, 0])
    assert np.allclose(v[:, 1], u[:, 1])


def test_hermitian_svd_rejects_non_hermitian():
    with pytest.raises(ValueError):
        hermitian_svd(np.array([[1, 2], [0, 1]], dtype=complex))


def test_as_matrix_rejects_nan_and_shape():
    with pytest.raises(ValueError):
        as_matrix(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        as_matrix(np.ones((2, 3)), square=True)


@given(seed=st.integers(0, 2**31))
def test_solve_hermitian_matches_dense_solve(seed):
    rng = np.random.default_rng(seed)
    m = random_hermitian(rng, 5, psd=True) + np.eye(5)
    b = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    load = 1e-6 * np.trace(m).real / 5
    assert np.allclose(solve_hermitian(m, b), np.linalg.solve(m + load * np.eye(5), b))


def test_solve_hermitian_singular_raises():
    with pytest.raises(SingularMatrixError) as info:
        solve_hermitian(np.zeros((3, 3)), np.ones(3), loading=0.0)
    assert not np.isfinite(info.value.cond) or info.value.cond > 1e14


def test_canonical_grid_bins():
    g = DopplerGrid.canonical(8, 0.5)
    assert np.allclose(g.frequencies * 8 * 0.5 / (2 * np.pi), np.arange(-4, 4))
    assert np.isclose(g.spacing, 2 * np.pi / 4)
    assert g.is_canonical(8) and not g.is_canonical(16)
    assert DopplerGrid.canonical(7, 1.0).frequencies[0] == pytest.approx(-3 * 2 * np.pi / 7)


def test_grid_validation():
    with pytest.raises(ValueError):
        DopplerGrid(np.array([0.0, -1.0]), 1.0)
    with pytest.raises(ValueError):
        DopplerGrid(np.array([0.0, 4.0]), 1.0)
    with pytest.raises(ValueError):
        DopplerGrid(np.array([]), 1.0)


def test_grid_equality():
    assert DopplerGrid.canonical(16, 1e-3) == DopplerGrid.canonical(16, 1e-3)
    assert DopplerGrid.canonical(16, 1e-3) != DopplerGrid.canonical(16, 2e-3)


@given(n=st.integers(2, 64), k=st.integers(-1000, 1000))
def test_dft_column_is_echo_of_grid_tone(n, k):
    # oracle: the signal model's own echo of a unit tone at the grid frequency
    pri = 1e-3
    g = DopplerGrid.canonical(n, pri)
    col = k % n
    if n % 2 == 0 and col == 0:
        col = 1  # the -n/2 bin sits on the aliasing edge the echo model rejects
    cfg = PulseTrainConfig(n, pri)
    echo = target_echo(cfg, [MicroDopplerTarget(1.0, g.frequencies[col])])
    xi = dft_matrix(n, g)
    assert np.allclose(xi[:, col], echo)
    assert np.allclose(np.abs(xi), 1.0)


def test_canonical_dft_is_orthogonal():
    xi = dft_matrix(16, DopplerGrid.canonical(16, 1.0))
    assert np.allclose(xi.conj().T @ xi, 16 * np.eye(16))


def test_window_taps_against_formula():
    n = 32
    t = np.arange(n)
    assert np.allclose(window_taps("hann", n), 0.5 - 0.5 * np.cos(2 * np.pi * t / n))
    assert np.allclose(window_taps("hamming", n), 0.54 - 0.46 * np.cos(2 * np.pi * t / n))
    assert np.array_equal(window_taps("rectangular", n), np.ones(n))
    assert window_taps("taylor", n).max() == pytest.approx(1.0, abs=0.05)
    with pytest.raises(ValueError):
        window_taps("kaiser", n)


@given(n=st.integers(1, 40), pad=st.integers(0, 40), seed=st.integers(0, 2**31))
def test_fft_spectrum_matches_brute_force_dtft(n, pad, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    est = fft_spectrum(x, n_fft=n + pad, pri=2e-4)
    t = np.arange(n) * 2e-4
    oracle = np.array([np.sum(x * np.exp(1j * f * t)) for f in est.grid.frequencies])
    assert np.allclose(est.amplitudes, oracle)


@given(n=st.integers(1, 40), pad=st.integers(0, 40), seed=st.integers(0, 2**31))
def test_fft_parseval(n, pad, seed):
    x = np.random.default_rng(seed).standard_normal(n) + 0j
    est = fft_spectrum(x, n_fft=n + pad)
    assert np.isclose(est.power.sum() / (n + pad), np.sum(np.abs(x) ** 2))


def test_fft_on_grid_tone_peak_height():
    cfg = PulseTrainConfig(64, 1e-3)
    f = cfg.bin_frequency(5)
    x = target_echo(cfg, [MicroDopplerTarget(0.7j, f)])
    est = fft_spectrum(x, pri=cfg.pri)
    k = int(np.argmax(est.power))
    assert est.grid.frequencies[k] == pytest.approx(f)
    assert np.isclose(est.amplitudes[k], 64 * 0.7j)


def test_fft_rejects_short_nfft():
    with pytest.raises(ValueError):
        fft_spectrum(np.ones(8), n_fft=4)


def test_spectrum_length_must_match_grid():
    with pytest.raises(ValueError):
        SpectrumEstimate(DopplerGrid.canonical(4, 1.0), np.zeros(3), "x")


def test_spectrum_csv_round_trip(tmp_path):
    est = fft_spectrum(np.array([1, 2j, -1, 0.5]), n_fft=8)
    est.to_csv(tmp_path / "s.csv")
    with open(tmp_path / "s.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["frequency", "re", "im", "power_db"]
    back = np.array([complex(float(r[1]), float(r[2])) for r in rows[1:]])
    assert np.array_equal(back, est.amplitudes)
