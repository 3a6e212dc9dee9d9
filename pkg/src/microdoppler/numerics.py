"""Complex linear-algebra and transform kernels shared by the estimators.

Nothing in here knows about radar. Matrices and vectors are plain numpy
``complex128`` arrays; the helpers below only validate shape and finiteness.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.signal import windows

__all__ = [
    "SingularMatrixError",
    "DopplerGrid",
    "SpectrumEstimate",
    "as_matrix",
    "as_vector",
    "hermitian_svd",
    "solve_hermitian",
    "default_loading",
    "dft_matrix",
    "window_taps",
    "fft_spectrum",
]

WINDOW_KINDS = ("rectangular", "hann", "hamming", "taylor")


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a (loaded) system is numerically singular."""

    def __init__(self, msg: str, cond: float):
        super().__init__(f"{msg} (condition estimate {cond:.3e})")
        self.cond = cond


def as_matrix(m, square: bool = False) -> np.ndarray:
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def as_vector(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.complex128)
    if a.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("vector has non-finite entries")
    return a


def _check_hermitian(m: np.ndarray, rtol: float = 1e-9) -> None:
    scale = max(np.linalg.norm(m), np.finfo(float).tiny)
    if np.linalg.norm(m - m.conj().T) > rtol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")


def hermitian_svd(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD of a Hermitian matrix through its eigendecomposition.

    Returns ``(U, s, V)`` with ``U @ diag(s) @ V^H == m`` and ``s`` sorted
    descending. For PSD input ``V == U``; negative eigenvalues flip the sign
    of the matching column of ``V``.
    """
    m = as_matrix(m, square=True)
    _check_hermitian(m)
    lam, vecs = np.linalg.eigh(m)
    order = np.argsort(-np.abs(lam), kind="stable")
    lam = lam[order]
    u = vecs[:, order]
    s = np.abs(lam)
    v = u * np.where(lam < 0, -1.0, 1.0)
    return u, s, v


def default_loading(m: np.ndarray, eps: float = 1e-6) -> float:
    n = m.shape[0]
    return eps * float(np.real(np.trace(m))) / n


def solve_hermitian(m, b, loading: float | None = None) -> np.ndarray:
    """Solve ``(m + loading*I) x = b`` for Hermitian PSD ``m``.

    ``loading=None`` uses ``1e-6 * trace(m) / n``.
    """
    m = as_matrix(m, square=True)
    b = as_vector(b)
    if b.shape[0] != m.shape[0]:
        raise ValueError(f"rhs length {b.shape[0]} does not match matrix size {m.shape[0]}")
    _check_hermitian(m)
    if loading is None:
        loading = default_loading(m)
    if loading < 0:
        raise ValueError("loading must be non-negative")
    n = m.shape[0]
    a = m + loading * np.eye(n)
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularMatrixError("loaded matrix is singular", float(cond))
    x = np.linalg.solve(a, b)
    return x


@dataclass(frozen=True)
class DopplerGrid:
    """Ascending grid of Doppler radial frequencies (rad/s) for a given PRI."""

    frequencies: np.ndarray
    pri: float

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        if f.ndim != 1 or f.size == 0:
            raise ValueError("grid must be a non-empty 1-D array")
        if self.pri <= 0:
            raise ValueError("pri must be positive")
        if np.any(np.diff(f) <= 0):
            raise ValueError("grid frequencies must be strictly ascending")
        limit = np.pi / self.pri
        if np.any(np.abs(f) > limit * (1 + 1e-12)):
            raise ValueError("grid exceeds the unambiguous Doppler span")
        object.__setattr__(self, "frequencies", f)

    @classmethod
    def canonical(cls, n: int, pri: float) -> "DopplerGrid":
        """The n-point DFT grid, bins -n//2 .. n - n//2 - 1."""
        k = np.arange(-(n // 2), n - n // 2)
        return cls(2 * np.pi * k / (n * pri), pri)

    def __len__(self) -> int:
        return self.frequencies.size

    @property
    def spacing(self) -> float:
        if len(self) < 2:
            return 2 * np.pi / self.pri
        return float(self.frequencies[1] - self.frequencies[0])

    @property
    def span(self) -> tuple[float, float]:
        return float(self.frequencies[0]), float(self.frequencies[-1])

    def is_canonical(self, n_time: int) -> bool:
        if len(self) != n_time:
            return False
        ref = DopplerGrid.canonical(n_time, self.pri).frequencies
        return bool(np.allclose(self.frequencies, ref, rtol=0, atol=1e-9 * np.pi / self.pri))

    def nearest_bin(self, freq: float) -> int:
        return int(np.argmin(np.abs(self.frequencies - freq)))

    def __eq__(self, other):
        if not isinstance(other, DopplerGrid):
            return NotImplemented
        return (self.pri == other.pri and len(self) == len(other)
                and bool(np.array_equal(self.frequencies, other.frequencies)))

    __hash__ = None


def dft_matrix(n_time: int, grid: DopplerGrid) -> np.ndarray:
    """Dictionary whose column k is the slow-time signature of ``grid[k]``.

    Entry ``(t, k) = exp(-1j * f_k * t * pri)``, the same phase convention as
    the echo model, so a target at Doppler ``f`` lands on grid point ``f``.
    """
    if n_time < 1:
        raise ValueError("n_time must be >= 1")
    t = np.arange(n_time)[:, None] * grid.pri
    return np.exp(-1j * t * grid.frequencies[None, :])


def window_taps(kind: str, n: int, nbar: int = 4, sll: float = 30.0) -> np.ndarray:
    if kind == "rectangular":
        return np.ones(n)
    if kind == "hann":
        return windows.hann(n, sym=False)
    if kind == "hamming":
        return windows.hamming(n, sym=False)
    if kind == "taylor":
        return windows.taylor(n, nbar=nbar, sll=sll, norm=True, sym=False)
    raise ValueError(f"unknown window {kind!r}; expected one of {WINDOW_KINDS}")


@dataclass
class SpectrumEstimate:
    """Complex amplitudes on a Doppler grid plus solver diagnostics.

    Power and dB are derived views of ``amplitudes``.
    """

    grid: DopplerGrid
    amplitudes: np.ndarray
    method: str
    diagnostics: dict[str, Any] = field(default_factory=dict)
    metrics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (len(self.grid),):
            raise ValueError(
                f"amplitudes length {self.amplitudes.shape} does not match grid size {len(self.grid)}"
            )

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def power_db(self, floor_db: float = -300.0) -> np.ndarray:
        p = self.power
        with np.errstate(divide="ignore"):
            db = 10 * np.log10(p)
        return np.maximum(db, floor_db)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["frequency", "re", "im", "power_db"])
            for f, a, db in zip(self.grid.frequencies, self.amplitudes, self.power_db()):
                w.writerow([repr(float(f)), repr(float(a.real)), repr(float(a.imag)), repr(float(db))])


def fft_spectrum(x, window: str = "rectangular", n_fft: int | None = None,
                 pri: float = 1.0, **window_kw) -> SpectrumEstimate:
    """Windowed, zero-padded spectrum on the canonical ``n_fft`` grid.

    ``x`` may be a ``SlowTimeVector`` (its PRI is used) or a bare array.
    A rectangular-window on-grid tone of amplitude A peaks at ``len(x) * A``.
    """
    samples = getattr(x, "samples", x)
    cfg = getattr(x, "config", None)
    if cfg is not None:
        pri = cfg.pri
    samples = as_vector(samples)
    n = samples.size
    if n == 0:
        raise ValueError("empty input")
    if n_fft is None:
        n_fft = n
    if n_fft < n:
        raise ValueError("n_fft must be >= len(x)")
    w = window_taps(window, n, **window_kw)
    # column^H (w x) == sum_t w_t x_t exp(+j 2 pi k t / n_fft)
    amps = np.fft.fftshift(n_fft * np.fft.ifft(w * samples, n_fft))
    grid = DopplerGrid.canonical(n_fft, pri)
    return SpectrumEstimate(grid, amps, "fft",
                            diagnostics={"window": window, "n_samples": n, "n_fft": n_fft})
