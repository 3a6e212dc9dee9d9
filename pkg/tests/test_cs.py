import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from microdoppler.cs import (CsSolverConfig, MeasurementPlan, build_reconstruction_matrix,
                             coherence, kkt_violation, lagrangian_objective, reconstruct_time,
                             soft_threshold, solve_l1, write_objective_csv)
from microdoppler.metrics import support_recovery_score, truth_vector
from microdoppler.numerics import DopplerGrid, dft_matrix


def random_problem(seed, m=12, n=24):
    rng = np.random.default_rng(seed)
    theta = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2 * m)
    y = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return theta, y


# ------------------------------------------------------------ measurement plan

@given(n=st.integers(2, 200), data=st.data(), seed=st.integers(0, 2**31))
def test_plan_indices_sorted_unique_deterministic(n, data, seed):
    k = data.draw(st.integers(1, n - 1))
    plan = MeasurementPlan(n, k, seed=seed)
    idx = plan.selected_indices
    assert idx.size == k and np.all(np.diff(idx) > 0)
    assert idx.min() >= 0 and idx.max() < n
    assert np.array_equal(idx, MeasurementPlan(n, k, seed=seed).selected_indices)


@pytest.mark.parametrize("kind", ["row-subsample", "complex-gaussian"])
def test_plan_apply_matches_matrix(kind, rng):
    plan = MeasurementPlan(32, 8, kind, seed=3)
    x = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    assert np.allclose(plan.apply(x), plan.matrix() @ x)


def test_gaussian_plan_column_energy():
    psi = MeasurementPlan(256, 128, "complex-gaussian", seed=1).matrix()
    assert abs(np.mean(np.sum(np.abs(psi) ** 2, axis=0)) - 1.0) < 0.05


def test_plan_validation():
    with pytest.raises(ValueError):
        MeasurementPlan(8, 8)
    with pytest.raises(ValueError):
        MeasurementPlan(8, 2, "bernoulli")
    with pytest.raises(ValueError):
        MeasurementPlan.from_indices(8, [1, 1])
    p = MeasurementPlan.from_indices(8, [5, 0, 2])
    assert p.seed == -1 and list(p.selected_indices) == [0, 2, 5]


@pytest.mark.parametrize("kind", ["row-subsample", "complex-gaussian"])
def test_reconstruction_matrix_is_psi_xi(kind):
    grid = DopplerGrid.canonical(16, 1e-3)
    plan = MeasurementPlan(16, 5, kind, seed=2)
    assert np.allclose(build_reconstruction_matrix(plan, grid), plan.matrix() @ dft_matrix(16, grid))
    with pytest.raises(ValueError):
        build_reconstruction_matrix(plan, DopplerGrid.canonical(32, 1e-3))


# ------------------------------------------------------------------ building blocks

@given(re=st.floats(-100, 100), im=st.floats(-100, 100), t=st.floats(0, 50))
def test_soft_threshold_shrinks_magnitude_keeps_phase(re, im, t):
    z = np.array([complex(re, im)])
    out = soft_threshold(z, t)[0]
    assert abs(out) == pytest.approx(max(abs(z[0]) - t, 0.0), abs=1e-9)
    if abs(out) > 1e-9:
        assert np.angle(out) == pytest.approx(np.angle(z[0]), abs=1e-9)


def test_coherence_oracle():
    grid = DopplerGrid.canonical(8, 1.0)
    assert coherence(dft_matrix(8, grid)) == pytest.approx(0.0, abs=1e-12)
    theta = build_reconstruction_matrix(MeasurementPlan.from_indices(8, [0, 4]), grid)
    # columns k and k+2 coincide on samples {0, 4}
    assert coherence(theta) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        coherence(np.zeros((2, 2)))


# ------------------------------------------------------------------- solver

@given(seed=st.integers(0, 2**31), lam_frac=st.floats(0.05, 0.9))
def test_unitary_dictionary_closed_form(seed, lam_frac):
    # with unitary Theta the minimizer is soft(Theta^H y, lam / 2)
    n = 16
    theta = dft_matrix(n, DopplerGrid.canonical(n, 1.0)) / np.sqrt(n)
    y = np.random.default_rng(seed).standard_normal(n) * (1 - 0.5j)
    lam = lam_frac * 2 * np.abs(theta.conj().T @ y).max()
    est = solve_l1(y, theta, CsSolverConfig(lam=lam))
    assert np.allclose(est.amplitudes, soft_threshold(theta.conj().T @ y, lam / 2), atol=1e-7)


@given(seed=st.integers(0, 2**31), scale=st.floats(0.01, 0.5))
def test_lagrangian_certificates(seed, scale):
    theta, y = random_problem(seed)
    est = solve_l1(y, theta, CsSolverConfig(lam_scale=scale))
    d = est.diagnostics
    assert d["converged"]
    assert kkt_violation(est.amplitudes, y, theta, d["lam"]) <= 1.01
    h = np.asarray(d["history"])
    assert np.all(np.diff(h) <= 1e-12 * np.abs(h[:-1]))
    assert d["objective"] == pytest.approx(lagrangian_objective(est.amplitudes, y, theta, d["lam"]))


def test_lagrangian_matches_convex_solver():
    cp = pytest.importorskip("cvxpy")
    theta, y = random_problem(7, m=10, n=20)
    lam = 0.3
    s = cp.Variable(20, complex=True)
    prob = cp.Problem(cp.Minimize(cp.sum_squares(y - theta @ s) + lam * cp.norm1(s)))
    prob.solve()
    est = solve_l1(y, theta, CsSolverConfig(lam=lam))
    ours = lagrangian_objective(est.amplitudes, y, theta, lam)
    assert ours <= prob.value + 1e-6
    assert np.allclose(est.amplitudes, s.value, atol=1e-3)


def test_basis_pursuit_matches_convex_solver():
    cp = pytest.importorskip("cvxpy")
    theta, _ = random_problem(3, m=14, n=28)
    truth = np.zeros(28, complex)
    truth[[2, 17]] = [1.0, -0.5j]
    y = theta @ truth
    s = cp.Variable(28, complex=True)
    cp.Problem(cp.Minimize(cp.norm1(s)), [theta @ s == y]).solve()
    est = solve_l1(y, theta, CsSolverConfig(mode="basis-pursuit"))
    assert np.abs(est.amplitudes).sum() == pytest.approx(np.abs(s.value).sum(), rel=1e-4)
    assert np.allclose(est.amplitudes, truth, atol=1e-4)


def test_constrained_mode_meets_residual_bound():
    theta, y = random_problem(5)
    eps = 0.2 * np.linalg.norm(y) ** 2
    est = solve_l1(y, theta, CsSolverConfig(mode="bpdn-constrained", epsilon=eps))
    res2 = est.diagnostics["residual"] ** 2
    assert res2 <= eps
    assert res2 >= 0.95 * eps  # the bound is active, not trivially satisfied


def test_three_tone_exact_recovery(three_tone):
    x = three_tone.synthesize()
    n = len(x)
    grid = DopplerGrid.canonical(n, x.config.pri)
    plan = MeasurementPlan(n, 32, seed=0)
    theta = build_reconstruction_matrix(plan, grid)
    est = solve_l1(plan.apply(x), theta, CsSolverConfig(mode="basis-pursuit"), grid)
    truth, on_grid = truth_vector(grid, x.truth.tones)
    assert on_grid
    exact, hamming, rmse = support_recovery_score(est, truth)
    assert exact and hamming == 0 and rmse < 1e-3
    xhat = reconstruct_time(est, n)
    assert np.linalg.norm(xhat.samples - x.samples) / np.linalg.norm(x.samples) < 1e-3


def test_zero_measurements_give_zero_spectrum():
    theta, _ = random_problem(1)
    est = solve_l1(np.zeros(12), theta)
    assert not est.amplitudes.any() and est.diagnostics["converged"]


def test_nonconvergence_is_flagged_not_raised():
    theta, y = random_problem(2)
    est = solve_l1(y, theta, CsSolverConfig(lam_scale=0.001, max_iters=3))
    assert est.diagnostics["converged"] is False


def test_solver_validation():
    theta, y = random_problem(1)
    with pytest.raises(ValueError):
        solve_l1(y[:5], theta)
    for bad in ({"mode": "lasso"}, {"lam": -1.0}, {"epsilon": -1.0}, {"max_iters": 0},
                {"continuation_factor": 1.5}):
        with pytest.raises(ValueError):
            CsSolverConfig(**bad)
    est = solve_l1(y, theta)
    with pytest.raises(ValueError):
        reconstruct_time(est, 12)


def test_objective_csv(tmp_path):
    theta, y = random_problem(4)
    est = solve_l1(y, theta)
    write_objective_csv(est, tmp_path / "o.csv")
    lines = (tmp_path / "o.csv").read_text().splitlines()
    assert lines[0] == "iteration,objective"
    assert len(lines) == len(est.diagnostics["history"]) + 1
