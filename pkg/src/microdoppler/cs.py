"""Compressed-sensing Doppler recovery from randomly selected pulses.

The l1 problems are solved with a monotone accelerated proximal gradient
method (complex soft thresholding). Basis pursuit and the epsilon-constrained
form are reached by continuation on the Lagrangian weight.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import DopplerGrid, SpectrumEstimate, as_matrix, as_vector, dft_matrix
from .signal import PulseTrainConfig, SlowTimeVector

__all__ = [
    "MeasurementPlan",
    "CsSolverConfig",
    "build_reconstruction_matrix",
    "solve_l1",
    "lagrangian_objective",
    "kkt_violation",
    "reconstruct_time",
    "coherence",
    "soft_threshold",
    "write_objective_csv",
]

MODES = ("basis-pursuit", "bpdn-constrained", "bpdn-lagrangian")
KINDS = ("row-subsample", "complex-gaussian")


@dataclass(frozen=True)
class MeasurementPlan:
    """Which pulses (or which random projections) are observed.

    A pure function of ``(kind, seed, n_full, n_meas)``; row-subsample plans
    draw indices uniformly without replacement.
    """

    n_full: int
    n_meas: int
    kind: str = "row-subsample"
    seed: int = 0
    selected_indices: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown measurement kind {self.kind!r}")
        if not 1 <= self.n_meas < self.n_full:
            raise ValueError("need 1 <= n_meas < n_full")
        rng = np.random.default_rng(self.seed)
        if self.kind == "row-subsample":
            idx = np.sort(rng.choice(self.n_full, size=self.n_meas, replace=False))
        else:
            idx = np.arange(self.n_meas)
        object.__setattr__(self, "selected_indices", idx)

    @classmethod
    def from_indices(cls, n_full: int, indices) -> "MeasurementPlan":
        """Row-subsample plan with explicit pulse indices (seed is -1)."""
        idx = np.unique(np.asarray(indices, dtype=int))
        if idx.size != len(indices) or idx.min() < 0 or idx.max() >= n_full:
            raise ValueError("indices must be unique and inside [0, n_full)")
        plan = cls(n_full, idx.size, "row-subsample", 0)
        object.__setattr__(plan, "seed", -1)
        object.__setattr__(plan, "selected_indices", idx)
        return plan

    def matrix(self) -> np.ndarray:
        if self.kind == "row-subsample":
            psi = np.zeros((self.n_meas, self.n_full), dtype=np.complex128)
            psi[np.arange(self.n_meas), self.selected_indices] = 1.0
            return psi
        rng = np.random.default_rng(self.seed)
        z = rng.standard_normal((2, self.n_meas, self.n_full))
        return (z[0] + 1j * z[1]) / np.sqrt(2 * self.n_meas)

    def apply(self, x) -> np.ndarray:
        samples = as_vector(getattr(x, "samples", x))
        if samples.size != self.n_full:
            raise ValueError(f"signal length {samples.size} != plan n_full {self.n_full}")
        if self.kind == "row-subsample":
            return samples[self.selected_indices]
        return self.matrix() @ samples


@dataclass
class CsSolverConfig:
    mode: str = "bpdn-lagrangian"
    lam: float | None = None
    lam_scale: float = 0.05
    epsilon: float = 0.0
    max_iters: int = 5000
    tol: float = 1e-9
    accelerate: bool = True
    continuation_factor: float = 0.2
    lam_min_ratio: float = 1e-9

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown solver mode {self.mode!r}; expected one of {MODES}")
        if self.lam is not None and self.lam <= 0:
            raise ValueError("lam must be > 0")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.continuation_factor < 1:
            raise ValueError("continuation_factor must be in (0, 1)")


def build_reconstruction_matrix(plan: MeasurementPlan, grid: DopplerGrid) -> np.ndarray:
    """Theta = psi @ xi for the plan's pulses and the grid dictionary."""
    if len(grid) != plan.n_full:
        raise ValueError(f"grid size {len(grid)} does not match plan n_full {plan.n_full}")
    xi = dft_matrix(plan.n_full, grid)
    if plan.kind == "row-subsample":
        return xi[plan.selected_indices, :]
    return plan.matrix() @ xi


def soft_threshold(z: np.ndarray, thresh: float) -> np.ndarray:
    mag = np.abs(z)
    scale = np.maximum(0.0, 1.0 - thresh / np.maximum(mag, np.finfo(float).tiny))
    return z * scale


def lagrangian_objective(s, y, theta, lam: float) -> float:
    r = y - theta @ s
    return float(lam * np.sum(np.abs(s)) + np.real(np.vdot(r, r)))


def kkt_violation(s, y, theta, lam: float) -> float:
    """``max|Theta^H (y - Theta s)| / (lam/2)``; <= 1 at a Lagrangian optimum."""
    corr = theta.conj().T @ (y - theta @ s)
    return float(np.max(np.abs(corr)) / (lam / 2))


def _prox_grad(y, theta, lam, s0, step, max_iters, tol, accelerate, record=False):
    """Monotone FISTA with restart for ``lam*|s|_1 + |y - theta s|^2``."""
    th_h = theta.conj().T
    x = s0.copy()
    f_x = lagrangian_objective(x, y, theta, lam)
    v = x.copy()
    t = 1.0
    history = [f_x] if record else None
    converged = False
    at_x = True  # v coincides with the accepted iterate x
    it = 0
    for it in range(1, max_iters + 1):
        grad = -2.0 * (th_h @ (y - theta @ v))
        z = soft_threshold(v - step * grad, lam * step)
        f_z = lagrangian_objective(z, y, theta, lam)
        delta = np.linalg.norm(z - v) / max(np.linalg.norm(z), np.finfo(float).tiny)
        if f_z > f_x and at_x:
            # A plain 1/L step from x cannot increase the objective in exact
            # arithmetic, so this is the rounding floor.
            converged = True
            if record:
                history.append(f_x)
            break
        if f_z <= f_x:
            x_new, f_new = z, f_z
        else:
            x_new, f_new = x, f_x
        if accelerate:
            if f_z > f_x:
                # restart momentum from the last accepted point
                t_new = 1.0
                v = x_new.copy()
                at_x = True
            else:
                t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
                v = x_new + ((t - 1.0) / t_new) * (x_new - x)
                at_x = t == 1.0 or np.array_equal(x_new, x)
            t = t_new
        else:
            v = x_new
            at_x = True
        x, f_x = x_new, f_new
        if record:
            history.append(f_x)
        if np.all(z == 0) and np.all(v == 0):
            converged = True
            break
        if delta < tol:
            converged = True
            break
    return x, {"iterations": it, "converged": converged, "objective": f_x, "history": history}


def solve_l1(y, theta, cfg: CsSolverConfig | None = None,
             grid: DopplerGrid | None = None) -> SpectrumEstimate:
    """Sparse spectrum estimate from measurements ``y = Theta s``.

    Non-convergence does not raise; check ``diagnostics["converged"]``.
    """
    cfg = cfg or CsSolverConfig()
    y = as_vector(y)
    theta = as_matrix(theta)
    if y.size != theta.shape[0]:
        raise ValueError(f"len(y)={y.size} does not match Theta rows {theta.shape[0]}")
    n = theta.shape[1]
    if grid is None:
        grid = DopplerGrid.canonical(n, 1.0)
    if len(grid) != n:
        raise ValueError("grid size does not match Theta columns")

    lipschitz = 2.0 * np.linalg.norm(theta, 2) ** 2
    step = 1.0 / lipschitz if lipschitz > 0 else 1.0
    corr_max = float(np.max(np.abs(theta.conj().T @ y))) if y.size else 0.0
    s = np.zeros(n, dtype=np.complex128)
    diag = {"mode": cfg.mode}

    if corr_max == 0.0:
        lam = cfg.lam if cfg.lam is not None else 1.0
        diag.update(iterations=0, converged=True, objective=0.0, history=[0.0], lam=lam,
                    residual=float(np.linalg.norm(y)), kkt=0.0, stages=0)
        return SpectrumEstimate(grid, s, "cs", diagnostics=diag)

    if cfg.mode == "bpdn-lagrangian":
        lam = cfg.lam if cfg.lam is not None else cfg.lam_scale * corr_max
        s, info = _prox_grad(y, theta, lam, s, step, cfg.max_iters, cfg.tol,
                             cfg.accelerate, record=True)
        diag.update(info, lam=lam, stages=1)
    else:
        # s = 0 is optimal for lam >= 2 max|Theta^H y|; walk lam down from there.
        lam = 2.0 * corr_max * cfg.continuation_factor
        lam_min = 2.0 * corr_max * cfg.lam_min_ratio
        history: list[float] = []
        total = 0
        stages = 0
        converged = True
        eps = cfg.epsilon if cfg.mode == "bpdn-constrained" else None
        prev = (lam / cfg.continuation_factor, s.copy())
        while True:
            stages += 1
            last = lam <= lam_min
            tol = cfg.tol if last else max(cfg.tol, 1e-6)
            s, info = _prox_grad(y, theta, lam, s, step, cfg.max_iters, tol,
                                 cfg.accelerate, record=True)
            total += info["iterations"]
            history.extend(info["history"])
            if eps is not None:
                res2 = float(np.linalg.norm(y - theta @ s) ** 2)
                if res2 <= eps:
                    s, lam, extra = _bisect_epsilon(y, theta, eps, prev, (lam, s), step, cfg)
                    total += extra["iterations"]
                    converged = info["converged"] and extra["converged"]
                    break
            if last:
                converged = info["converged"]
                break
            prev = (lam, s.copy())
            lam = max(lam * cfg.continuation_factor, lam_min)
        diag.update(iterations=total, converged=converged, history=history, stages=stages,
                    objective=lagrangian_objective(s, y, theta, lam), lam=lam)

    diag["residual"] = float(np.linalg.norm(y - theta @ s))
    diag["kkt"] = kkt_violation(s, y, theta, diag["lam"])
    return SpectrumEstimate(grid, s, "cs", diagnostics=diag)


def _bisect_epsilon(y, theta, eps, hi, lo, step, cfg, n_steps: int = 30):
    """Refine lam in log space so that |y - Theta s|^2 sits just below eps.

    ``hi`` is a (lam, s) pair that violates the bound, ``lo`` one that meets it.
    """
    lam_hi, _ = hi
    lam_lo, s_lo = lo
    iters = 0
    converged = True
    for _ in range(n_steps):
        if lam_hi / lam_lo < 1.0 + 1e-4:
            break
        mid = np.sqrt(lam_hi * lam_lo)
        s_mid, info = _prox_grad(y, theta, mid, s_lo, step, cfg.max_iters, cfg.tol, cfg.accelerate)
        iters += info["iterations"]
        converged = converged and info["converged"]
        if np.linalg.norm(y - theta @ s_mid) ** 2 <= eps:
            lam_lo, s_lo = mid, s_mid
        else:
            lam_hi = mid
    return s_lo, lam_lo, {"iterations": iters, "converged": converged}


def reconstruct_time(est: SpectrumEstimate, n_time: int) -> SlowTimeVector:
    """Inverse transform ``x_hat = xi @ s_hat``; needs the canonical grid."""
    if not est.grid.is_canonical(n_time):
        raise ValueError("reconstruction requires the canonical n_time-point grid")
    xi = dft_matrix(n_time, est.grid)
    return SlowTimeVector(xi @ est.amplitudes, PulseTrainConfig(n_time, est.grid.pri),
                          history=[f"reconstruct[{est.method}]"])


def coherence(theta) -> float:
    """Largest normalized inner product between distinct columns."""
    theta = as_matrix(theta)
    norms = np.linalg.norm(theta, axis=0)
    if np.any(norms == 0):
        raise ValueError("Theta has a zero column")
    g = np.abs(theta.conj().T @ theta) / np.outer(norms, norms)
    np.fill_diagonal(g, 0.0)
    return float(g.max()) if g.size > 1 else 0.0


def write_objective_csv(est: SpectrumEstimate, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "objective"])
        for i, f in enumerate(est.diagnostics.get("history") or []):
            w.writerow([i, repr(float(f))])
