"""Single-snapshot Iterative Adaptive Approach (IAA) Doppler estimation."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .numerics import DopplerGrid, SingularMatrixError, SpectrumEstimate, as_matrix, as_vector, dft_matrix

__all__ = [
    "IaaConfig",
    "steering_matrix",
    "iaa_spectrum",
    "clutter_noise_matrix",
    "wls_amplitude",
    "write_power_history_csv",
]


@dataclass
class IaaConfig:
    """``grid=None`` builds a canonical grid of ``grid_factor * P`` points."""

    grid: DopplerGrid | None = None
    grid_factor: int = 16
    max_iters: int = 15
    tol: float = 1e-4
    loading: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.loading < 0:
            raise ValueError("loading must be non-negative")

    def grid_for(self, n_pulses: int, pri: float) -> DopplerGrid:
        if self.grid is not None:
            return self.grid
        return DopplerGrid.canonical(self.grid_factor * n_pulses, pri)


def steering_matrix(n_pulses: int, grid: DopplerGrid) -> np.ndarray:
    """P x K matrix with columns ``a(f_k)[p] = exp(-1j f_k p pri)``."""
    return dft_matrix(n_pulses, grid)


def clutter_noise_matrix(r, p_k: float, a_k) -> np.ndarray:
    """Interference-plus-noise covariance seen by bin k: ``R - P_k a a^H``."""
    r = as_matrix(r, square=True)
    a_k = as_vector(a_k)
    return r - p_k * np.outer(a_k, a_k.conj())


def wls_amplitude(y, a_k, m) -> complex:
    """Weighted least-squares amplitude ``a^H M^-1 y / a^H M^-1 a``."""
    m = as_matrix(m, square=True)
    sol = np.linalg.solve(m, np.column_stack([as_vector(y), as_vector(a_k)]))
    a_k = np.asarray(a_k)
    return complex(a_k.conj() @ sol[:, 0] / (a_k.conj() @ sol[:, 1]))


def _reject_non_uniform(y) -> None:
    # MeasurementPlan lives in cs; duck-type to avoid the import cycle.
    if hasattr(y, "selected_indices") or hasattr(y, "plan"):
        raise TypeError("IAA needs contiguous uniformly spaced pulses, not a measurement plan")


def iaa_spectrum(y, cfg: IaaConfig | None = None, pri: float | None = None) -> SpectrumEstimate:
    """IAA amplitude spectrum of one slow-time snapshot.

    ``y`` is a ``SlowTimeVector`` or a 1-D array (then ``pri`` or the grid
    supplies the PRI). Per-iteration power vectors are kept in
    ``diagnostics["power_history"]``.
    """
    cfg = cfg or IaaConfig()
    _reject_non_uniform(y)
    samples = getattr(y, "samples", y)
    samples = np.asarray(samples)
    if samples.ndim != 1:
        raise ValueError("IAA is single-snapshot: pass exactly one slow-time vector")
    samples = as_vector(samples)
    n = samples.size
    if n < 2:
        raise ValueError("need at least 2 pulses")
    config = getattr(y, "config", None)
    if config is not None:
        pri = config.pri
    elif pri is None:
        pri = cfg.grid.pri if cfg.grid is not None else 1.0
    grid = cfg.grid_for(n, pri)
    if not np.isclose(grid.pri, pri, rtol=1e-12):
        raise ValueError("grid PRI does not match the data PRI")

    a = steering_matrix(n, grid)
    # Iteration 0 is R = I: the normalized matched filter.
    s = (a.conj().T @ samples) / n
    power = np.abs(s) ** 2
    history = [power.copy()]
    converged = False
    iterations = 0
    if not np.any(power > 0):
        return SpectrumEstimate(grid, np.zeros(len(grid)), "iaa", diagnostics={
            "iterations": 1, "converged": True, "power_history": history, "n_samples": n})

    for iterations in range(1, cfg.max_iters + 1):
        r = (a * power) @ a.conj().T
        r += cfg.loading * float(np.real(np.trace(r))) / n * np.eye(n)
        try:
            chol = sla.cho_factor(r, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            raise SingularMatrixError("IAA covariance is singular after loading",
                                      float(np.linalg.cond(r))) from None
        rinv_y = sla.cho_solve(chol, samples, check_finite=False)
        rinv_a = sla.cho_solve(chol, a, check_finite=False)
        num = a.conj().T @ rinv_y
        den = np.real(np.einsum("pk,pk->k", a.conj(), rinv_a))
        s = num / den
        new_power = np.abs(s) ** 2
        change = np.linalg.norm(new_power - power) / max(np.linalg.norm(power), np.finfo(float).tiny)
        power = new_power
        history.append(power.copy())
        if change < cfg.tol:
            converged = True
            break

    return SpectrumEstimate(grid, s, "iaa", diagnostics={
        "iterations": iterations, "converged": converged,
        "power_history": history, "n_samples": n})


def write_power_history_csv(est: SpectrumEstimate, path: str | Path) -> None:
    """One row per (iteration, grid point): iteration, frequency, power."""
    history = est.diagnostics.get("power_history", [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "frequency", "power"])
        for it, power in enumerate(history):
            for f, p in zip(est.grid.frequencies, power):
                w.writerow([it, repr(float(f)), repr(float(p))])
