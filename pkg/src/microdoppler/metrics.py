"""Scoring of spectra against ground truth: peaks, sidelobes, support, clutter."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .numerics import SpectrumEstimate

__all__ = [
    "Peak",
    "ToneMatch",
    "PeakReport",
    "extract_peaks",
    "truth_vector",
    "support_recovery_score",
    "clutter_suppression_db",
    "tone_amplitude",
    "resolution_cell_bins",
]


@dataclass
class Peak:
    index: int
    frequency: float
    power_db: float
    width_3db: float


@dataclass
class ToneMatch:
    truth_frequency: float
    truth_bin: int
    peak_index: int | None
    error: float | None


@dataclass
class PeakReport:
    """``power_db`` values are relative to the strongest bin."""

    peaks: list[Peak]
    matches: list[ToneMatch] = field(default_factory=list)
    sidelobe_db: float | None = None
    cell_bins: int = 1

    @property
    def resolved_count(self) -> int:
        return sum(m.peak_index is not None for m in self.matches)

    @property
    def frequency_rmse(self) -> float | None:
        errs = [m.error for m in self.matches if m.error is not None]
        if not errs:
            return None
        return float(np.sqrt(np.mean(np.square(errs))))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["resolved_count"] = self.resolved_count
        d["frequency_rmse"] = self.frequency_rmse
        return d


def resolution_cell_bins(est: SpectrumEstimate) -> int:
    """Grid bins per Rayleigh cell of the data that produced ``est``."""
    n = est.diagnostics.get("n_samples")
    if not n:
        return 1
    return max(1, int(round(len(est.grid) / n)))


def _local_maxima(p: np.ndarray) -> np.ndarray:
    # strict on the left, non-strict on the right: plateaus resolve to their
    # lowest-frequency bin
    left = np.concatenate([[True], p[1:] > p[:-1]])
    right = np.concatenate([p[:-1] >= p[1:], [True]])
    return np.flatnonzero(left & right & (p > 0))


def _width(p: np.ndarray, i: int, spacing: float) -> float:
    half = p[i] / 2
    lo = i
    while lo > 0 and p[lo - 1] >= half:
        lo -= 1
    hi = i
    while hi < p.size - 1 and p[hi + 1] >= half:
        hi += 1
    return (hi - lo + 1) * spacing


def extract_peaks(est: SpectrumEstimate, min_separation: int = 1, threshold_db: float = -60.0,
                  truth_freqs=None, match_tol_bins: int = 1,
                  cell_bins: int | None = None) -> PeakReport:
    """Local maxima above ``threshold_db`` (relative to the maximum).

    Peaks closer than ``min_separation`` bins to a stronger one are merged.
    With ``truth_freqs``, each truth tone is matched (injectively, in the
    order given) to the nearest peak within ``match_tol_bins``. The sidelobe level
    is the highest local maximum more than one resolution cell away from
    every matched peak, or from the main peak when no truth is given.
    """
    p = est.power
    if p.size == 0:
        raise ValueError("empty spectrum")
    cell = resolution_cell_bins(est) if cell_bins is None else cell_bins
    pmax = p.max()
    if pmax == 0:
        return PeakReport([], [ToneMatch(float(f), est.grid.nearest_bin(f), None, None)
                               for f in (truth_freqs or [])], None, cell)
    rel_db = 10 * np.log10(np.maximum(p / pmax, 1e-300))
    maxima = _local_maxima(p)
    order = sorted(maxima, key=lambda i: (-p[i], i))
    accepted: list[int] = []
    for i in order:
        if rel_db[i] < threshold_db:
            continue
        if any(abs(i - j) < min_separation for j in accepted):
            continue
        accepted.append(int(i))
    freqs = est.grid.frequencies
    peaks = [Peak(i, float(freqs[i]), float(rel_db[i]), _width(p, i, est.grid.spacing))
             for i in accepted]

    matches: list[ToneMatch] = []
    anchors: list[int] = []
    if truth_freqs is not None:
        taken: set[int] = set()
        for f in truth_freqs:
            b = est.grid.nearest_bin(f)
            cands = [pk for pk in peaks if pk.index not in taken and abs(pk.index - b) <= match_tol_bins]
            if cands:
                best = min(cands, key=lambda pk: (abs(pk.index - b), pk.index))
                taken.add(best.index)
                anchors.append(best.index)
                matches.append(ToneMatch(float(f), b, best.index, float(best.frequency - f)))
            else:
                matches.append(ToneMatch(float(f), b, None, None))
    elif peaks:
        anchors = [peaks[0].index]

    far = [i for i in maxima if all(abs(i - a) > cell for a in anchors)]
    sidelobe = float(max(rel_db[i] for i in far)) if far else None
    return PeakReport(peaks, matches, sidelobe, cell)


def truth_vector(grid, tones) -> tuple[np.ndarray, bool]:
    """Map (frequency, amplitude) tones onto ``grid``.

    Returns the vector and whether every tone sat on a grid point.
    """
    vec = np.zeros(len(grid), dtype=np.complex128)
    on_grid = True
    for f, a in tones:
        b = grid.nearest_bin(f)
        if not np.isclose(grid.frequencies[b], f, rtol=0, atol=1e-9 * abs(grid.spacing)):
            on_grid = False
        vec[b] += a
    return vec, on_grid


def _support(v: np.ndarray, rel_threshold: float) -> set:
    mag = np.abs(v)
    if mag.max(initial=0.0) == 0:
        return set()
    return set(np.flatnonzero(mag > rel_threshold * mag.max()))


def support_recovery_score(est: SpectrumEstimate, truth, rel_threshold: float = 0.01):
    """``(exact, hamming, amp_rmse)`` of the thresholded support vs truth.

    Both supports keep entries above ``rel_threshold`` times their own maximum.

    ``truth`` is a vector on ``est.grid`` or a list of (frequency, amplitude).
    """
    if not isinstance(truth, np.ndarray):
        truth, _ = truth_vector(est.grid, truth)
    truth = np.asarray(truth, dtype=np.complex128)
    s = est.amplitudes
    if truth.shape != s.shape:
        raise ValueError("truth does not match the spectrum grid")
    est_support = _support(s, rel_threshold)
    # same relative threshold on both sides, so scoring a vector against itself is exact
    true_support = _support(truth, rel_threshold)
    hamming = len(est_support ^ true_support)
    union = sorted(est_support | true_support)
    rmse = float(np.sqrt(np.mean(np.abs(s[union] - truth[union]) ** 2))) if union else 0.0
    return hamming == 0, hamming, rmse


def clutter_suppression_db(before: SpectrumEstimate, after: SpectrumEstimate,
                           band_bins: int = 0, center: float = 0.0,
                           floor_db: float = 120.0) -> float:
    """Drop in clutter-band power from ``before`` to ``after``, in dB.

    An emptied band clamps to ``floor_db``.
    """
    if before.grid != after.grid:
        raise ValueError("spectra are on different grids")
    c = before.grid.nearest_bin(center)
    sl = slice(max(0, c - band_bins), c + band_bins + 1)
    pb = float(before.power[sl].sum())
    pa = float(after.power[sl].sum())
    if pb == pa:
        return 0.0
    if pa == 0:
        return floor_db
    if pb == 0:
        return -floor_db
    return float(np.clip(10 * np.log10(pb / pa), -floor_db, floor_db))


def tone_amplitude(samples, freq: float, pri: float) -> float:
    """Magnitude of the DTFT at ``freq`` divided by the sample count."""
    x = np.asarray(getattr(samples, "samples", samples))
    p = np.arange(x.size)
    return float(np.abs(np.sum(x * np.exp(1j * freq * p * pri))) / x.size)
