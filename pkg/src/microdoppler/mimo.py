"""Quadrant MIMO: virtual phase centers, time-multiplexed data cubes,
array patterns, and the sparse-recovery identifiability sweep.

Coordinates are in metres with x horizontal (azimuth) and y vertical.
Quadrants are numbered 0..3 as [[0, 1], [2, 3]] seen from the front.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cs import CsSolverConfig, MeasurementPlan, build_reconstruction_matrix, solve_l1
from .metrics import support_recovery_score
from .numerics import DopplerGrid, SpectrumEstimate
from .signal import AliasingError, ClutterModel, NoiseModel, PulseTrainConfig, synthesize_clutter

__all__ = [
    "SPEED_OF_LIGHT",
    "QuadrantLayout",
    "VirtualArray",
    "MimoDataCube",
    "BeamPattern",
    "build_virtual_array",
    "physical_array",
    "assemble_coherent_matrix",
    "synthesize_mimo_echo",
    "array_factor",
    "beamwidth_3db",
    "azimuth_steering",
    "doa_matched_filter",
    "doa_sparse",
    "identifiability_trial",
    "identifiability_experiment",
    "phase_transition",
    "write_phase_transition_csv",
]

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class QuadrantLayout:
    """Transmit/receive phase centers; the same quadrants do both."""

    centers: np.ndarray
    wavelength: float
    quadrant_size: float

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if c.shape[1] != 2:
            raise ValueError("centers must be (n, 2)")
        object.__setattr__(self, "centers", c)

    @classmethod
    def pwr(cls, quadrant_size_wl: float = 12.0, carrier: float = 9.41e9) -> "QuadrantLayout":
        """2x2 quadrants of ``quadrant_size_wl`` wavelengths, centered on the origin."""
        lam = SPEED_OF_LIGHT / carrier
        d = quadrant_size_wl * lam
        h = d / 2
        centers = np.array([[-h, h], [h, h], [-h, -h], [h, -h]])
        return cls(centers, lam, d)

    @property
    def carrier(self) -> float:
        return SPEED_OF_LIGHT / self.wavelength

    @property
    def n(self) -> int:
        return self.centers.shape[0]


@dataclass(frozen=True)
class VirtualArray:
    """Distinct phase centers with multiplicity weights.

    ``pair_map[t, r]`` is the index of the center that Tx ``t``/Rx ``r`` lands on.
    """

    centers: np.ndarray
    weights: np.ndarray
    pair_map: np.ndarray
    wavelength: float
    element_size: float

    @property
    def extent(self) -> tuple[float, float]:
        """Aperture extent per axis, in metres, including the element size."""
        span = self.centers.max(axis=0) - self.centers.min(axis=0)
        return float(span[0] + self.element_size), float(span[1] + self.element_size)

    @property
    def extent_wavelengths(self) -> tuple[float, float]:
        ex, ey = self.extent
        return ex / self.wavelength, ey / self.wavelength

    def weight_grid(self) -> np.ndarray:
        """Multiplicities laid out with the top row first, x ascending."""
        xs = np.unique(np.round(self.centers[:, 0], 9))
        ys = np.unique(np.round(self.centers[:, 1], 9))[::-1]
        out = np.zeros((ys.size, xs.size), dtype=int)
        for (x, y), wgt in zip(np.round(self.centers, 9), self.weights):
            out[np.searchsorted(-ys, -y), np.searchsorted(xs, x)] = wgt
        return out

    def cell_index(self) -> list[tuple[int, int]]:
        """(row, col) of each center in ``weight_grid`` layout."""
        xs = np.unique(np.round(self.centers[:, 0], 9))
        ys = np.unique(np.round(self.centers[:, 1], 9))[::-1]
        return [(int(np.searchsorted(-ys, -y)), int(np.searchsorted(xs, x)))
                for x, y in np.round(self.centers, 9)]


def _dedupe(points: np.ndarray, scale: float):
    key = np.round(points / scale, 9)
    uniq, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return uniq * scale, inverse.ravel(), counts


def build_virtual_array(layout: QuadrantLayout) -> VirtualArray:
    """Spatial convolution of Tx and Rx centers: every pair sum, deduplicated."""
    n = layout.n
    sums = (layout.centers[:, None, :] + layout.centers[None, :, :]).reshape(-1, 2)
    centers, inverse, counts = _dedupe(sums, layout.wavelength)
    return VirtualArray(centers, counts, inverse.reshape(n, n), layout.wavelength,
                        layout.quadrant_size)


def physical_array(layout: QuadrantLayout) -> VirtualArray:
    """The physical quadrants as a one-way array (weight 1 each)."""
    centers, inverse, counts = _dedupe(layout.centers, layout.wavelength)
    return VirtualArray(centers, counts, inverse.reshape(-1, 1), layout.wavelength,
                        layout.quadrant_size)


@dataclass
class MimoDataCube:
    """``data[t, r, f]``: Rx ``r`` during frame ``f`` while Tx ``t`` is active.

    ``schedule[t, f]`` is the global pulse index of that transmission.
    """

    data: np.ndarray
    schedule: np.ndarray
    config: PulseTrainConfig

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 3 or self.data.shape[0] != self.data.shape[1]:
            raise ValueError("data must be (n_tx, n_rx, n_frames) with n_tx == n_rx")
        covered = np.sort(self.schedule.ravel())
        if self.schedule.shape != (self.data.shape[0], self.data.shape[2]) or \
                np.unique(covered).size != covered.size:
            raise ValueError("schedule must give one distinct pulse per (tx, frame)")

    @property
    def n_frames(self) -> int:
        return self.data.shape[2]


def round_robin_schedule(n_tx: int, n_frames: int) -> np.ndarray:
    return np.arange(n_frames)[None, :] * n_tx + np.arange(n_tx)[:, None]


def assemble_coherent_matrix(cube: MimoDataCube, va: VirtualArray) -> np.ndarray:
    """Per-frame virtual-array matrix, shape ``(n_frames, rows, cols)``.

    Each cell sums every Tx/Rx channel whose phase-center sum lands on it.
    """
    data = cube.data
    if np.any(~np.isfinite(data)):
        raise ValueError("cube has missing (non-finite) channels")
    n_tx, n_rx, _ = data.shape
    if va.pair_map.shape != (n_tx, n_rx):
        raise ValueError("virtual array does not match the cube's channel count")
    grid = va.weight_grid()
    cells = va.cell_index()
    out = np.zeros((cube.n_frames,) + grid.shape, dtype=np.complex128)
    for t in range(n_tx):
        for r in range(n_rx):
            row, col = cells[va.pair_map[t, r]]
            out[:, row, col] += data[t, r]
    return out


def _geometric_phase(layout: QuadrantLayout, azimuth: float) -> np.ndarray:
    """Two-way phase ``2 pi / lambda (x_tx + x_rx) sin(azimuth)``, shape (n, n)."""
    x = layout.centers[:, 0]
    return 2 * np.pi / layout.wavelength * (x[:, None] + x[None, :]) * np.sin(azimuth)


def synthesize_mimo_echo(layout: QuadrantLayout, scene, cfg: PulseTrainConfig,
                         noise: NoiseModel | None = None,
                         clutter: ClutterModel | None = None) -> MimoDataCube:
    """Time-multiplexed quadrant MIMO echo.

    Tx ``q`` fires on pulses ``p = q (mod n_tx)``; ``cfg.n_pulses`` must be a
    multiple of the quadrant count. Doppler phase accrues over the schedule.
    """
    n = layout.n
    if cfg.n_pulses % n:
        raise ValueError(f"n_pulses must be a multiple of {n}")
    n_frames = cfg.n_pulses // n
    schedule = round_robin_schedule(n, n_frames)
    data = np.zeros((n, n, n_frames), dtype=np.complex128)
    for tgt in scene:
        geo = np.exp(-1j * _geometric_phase(layout, tgt.azimuth))
        for doppler, amp in tgt.tones():
            if abs(doppler) * cfg.pri >= np.pi:
                raise AliasingError(f"Doppler {doppler:.6g} rad/s outside unambiguous span")
            dop = amp * np.exp(-1j * doppler * schedule * cfg.pri)
            data += geo[:, :, None] * dop[:, None, :]
    if clutter is not None and clutter.power > 0:
        c = synthesize_clutter(cfg, clutter)
        data += c[schedule][:, None, :]
    if noise is not None and noise.variance > 0:
        rng = np.random.default_rng(noise.seed)
        z = rng.standard_normal((2,) + data.shape)
        data += np.sqrt(noise.variance / 2) * (z[0] + 1j * z[1])
    return MimoDataCube(data, schedule, cfg)


@dataclass
class BeamPattern:
    angles: np.ndarray
    power: np.ndarray
    width_3db: float


def beamwidth_3db(angles: np.ndarray, power: np.ndarray) -> float:
    """Width of the contiguous region around the peak within 3 dB of it."""
    p = np.asarray(power) / np.max(power)
    i0 = int(np.argmax(p))
    half = 10 ** (-3.0103 / 10)
    lo = i0
    while lo > 0 and p[lo - 1] >= half:
        lo -= 1
    hi = i0
    while hi < p.size - 1 and p[hi + 1] >= half:
        hi += 1

    def cross(i_in, i_out):
        # linear interpolation of the half-power crossing
        a0, a1 = angles[i_in], angles[i_out]
        p0, p1 = p[i_in], p[i_out]
        return a0 + (half - p0) * (a1 - a0) / (p1 - p0)

    left = cross(lo, lo - 1) if lo > 0 else angles[0]
    right = cross(hi, hi + 1) if hi < p.size - 1 else angles[-1]
    return float(right - left)


def array_factor(va: VirtualArray, angles, weighting: str = "uniform",
                 element_pattern: bool = True) -> BeamPattern:
    """Azimuth power pattern ``|sum_m w_m exp(j 2pi/lambda x_m sin(theta))|^2``.

    ``weighting="multiplicity"`` uses the Tx/Rx pair counts; ``"uniform"`` gives
    every distinct center weight 1 (overlapping channels averaged). With
    ``element_pattern`` each center radiates as a filled aperture of
    ``va.element_size``.
    """
    angles = np.asarray(angles, dtype=float)
    if angles.size == 0:
        raise ValueError("empty angle grid")
    if weighting == "uniform":
        w = np.ones(va.weights.size)
    elif weighting == "multiplicity":
        w = va.weights.astype(float)
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    k = 2 * np.pi / va.wavelength
    s = np.sin(angles)
    af = np.exp(1j * k * np.outer(s, va.centers[:, 0])) @ w
    if element_pattern:
        af = af * np.sinc(va.element_size * s / va.wavelength)
    power = np.abs(af) ** 2
    return BeamPattern(angles, power, beamwidth_3db(angles, power))


def azimuth_steering(va: VirtualArray, angles) -> np.ndarray:
    """Virtual-center steering vectors (centers x angles), two-way convention."""
    k = 2 * np.pi / va.wavelength
    return np.exp(-1j * k * np.outer(va.centers[:, 0], np.sin(np.asarray(angles, dtype=float))))


def _cells_to_centers(coherent: np.ndarray, va: VirtualArray) -> np.ndarray:
    return np.array([coherent[..., r, c] for r, c in va.cell_index()])


def doa_matched_filter(coherent: np.ndarray, va: VirtualArray, angles) -> np.ndarray:
    """Matched-filter azimuth spectrum of one frame's coherent matrix.

    Cells carry multiplicity-weighted sums, so they are normalized first.
    """
    v = _cells_to_centers(coherent, va) / va.weights
    a = azimuth_steering(va, angles)
    return np.abs(a.conj().T @ v) ** 2


def doa_sparse(coherent: np.ndarray, va: VirtualArray, angles,
               cfg: CsSolverConfig | None = None) -> SpectrumEstimate:
    """l1 azimuth estimate over ``angles`` with the virtual steering dictionary."""
    v = _cells_to_centers(coherent, va) / va.weights
    a = azimuth_steering(va, angles)
    cfg = cfg or CsSolverConfig()
    est = solve_l1(v, a, cfg, DopplerGrid.canonical(len(angles), 1.0))
    est.method = "cs-doa"
    est.metrics["angles"] = [float(t) for t in angles]
    return est


def _trial_plan(n_grid: int, channels: int, samples: int, pulses: int,
                seed: int) -> MeasurementPlan:
    """Time-multiplexed slots: ``channels`` channels x ``samples`` distinct pulses
    drawn from the first ``pulses`` slots of the dwell."""
    m = channels * samples
    rng = np.random.default_rng([seed, channels, samples, pulses])
    idx = np.sort(rng.choice(pulses, size=m, replace=False))
    return MeasurementPlan.from_indices(n_grid, idx)


def identifiability_trial(L: int, channels: int, samples: int, pulses: int, seed: int,
                          n_grid: int = 64) -> bool:
    """One noiseless on-grid scene; True if basis pursuit recovers the support."""
    m = channels * samples
    if m > pulses or pulses > n_grid or m >= n_grid:
        raise ValueError("need channels*samples <= pulses <= n_grid and fewer measurements than grid points")
    rng = np.random.default_rng([seed, L, n_grid])
    support = rng.choice(n_grid, size=L, replace=False)
    truth = np.zeros(n_grid, dtype=np.complex128)
    truth[support] = rng.uniform(0.5, 1.5, L) * np.exp(2j * np.pi * rng.uniform(size=L))
    grid = DopplerGrid.canonical(n_grid, 1.0)
    plan = _trial_plan(n_grid, channels, samples, pulses, seed)
    theta = build_reconstruction_matrix(plan, grid)
    est = solve_l1(theta @ truth, theta, CsSolverConfig(mode="basis-pursuit"), grid)
    exact, _, _ = support_recovery_score(est, truth)
    return exact


def identifiability_experiment(L: int, channels: int, samples: int, pulses: int,
                               seeds, n_grid: int = 64) -> float:
    """Monte-Carlo exact-support success rate over ``seeds``."""
    seeds = list(seeds)
    wins = sum(identifiability_trial(L, channels, samples, pulses, s, n_grid) for s in seeds)
    return wins / len(seeds)


def phase_transition(Ls, measurement_counts, seeds, n_grid: int = 64,
                     channels: int = 1) -> list[dict]:
    """Success-rate table over L and total measurement count.

    ``measurement_counts`` may be ints or callables ``L -> m``.
    """
    rows = []
    for L in Ls:
        for mc in measurement_counts:
            m = mc(L) if callable(mc) else int(mc)
            if m % channels:
                raise ValueError("measurement count must be a multiple of channels")
            samples = m // channels
            rate = identifiability_experiment(L, channels, samples, n_grid, seeds, n_grid)
            rows.append({"L": L, "channels": channels, "samples": samples, "pulses": n_grid,
                         "measurements": m, "success_rate": rate})
    return rows


def write_phase_transition_csv(rows: list[dict], path: str | Path) -> None:
    cols = ["L", "channels", "samples", "pulses", "measurements", "success_rate"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: row[k] for k in cols})
