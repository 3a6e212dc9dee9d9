"""Eigen-subspace clutter suppression and rank-selection denoising.

The slow-time series is Hankel-embedded into length-M windows, the windows'
autocorrelation matrix is eigendecomposed, and the windows are projected onto
the retained eigenvectors. The filtered series comes back by averaging the
anti-diagonals of the projected trajectory matrix.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .numerics import hermitian_svd
from .signal import SlowTimeVector, mean_power

__all__ = [
    "ClutterAmbiguityError",
    "PcaConfig",
    "PcaReport",
    "hankel_embed",
    "hankel_average",
    "autocorrelation_matrix",
    "select_clutter",
    "suppress_clutter",
    "denoise_rank_select",
    "mti_two_pulse",
    "truth_snr_db",
]

SELECTIONS = ("power-match", "largest")


class ClutterAmbiguityError(ValueError):
    """Power-match found no eigenvalue near the DC power estimate."""

    def __init__(self, estimate: float, candidates):
        self.estimate = estimate
        self.candidates = list(candidates)
        listing = ", ".join(f"{c:.4g}" for c in self.candidates[:8])
        super().__init__(
            f"no eigenvalue within threshold of DC power estimate {estimate:.4g}; "
            f"per-sample eigen powers: {listing}"
        )


@dataclass
class PcaConfig:
    """``embed_dim=None`` means N // 4.

    ``retained_dims`` keeps only the top-r clutter-free eigenvectors (None keeps
    all of them). ``clutter_floor_db`` is the DC-to-total power ratio below
    which power-match declares the scene clutter-free.
    """

    embed_dim: int | None = None
    selection: str = "power-match"
    threshold_db: float = 3.0
    n_clutter: int = 1
    retained_dims: int | None = None
    subtract_mean: bool = False
    clutter_floor_db: float = -40.0

    def __post_init__(self):
        if self.selection not in SELECTIONS:
            raise ValueError(f"unknown clutter selection {self.selection!r}")
        if self.n_clutter < 0:
            raise ValueError("n_clutter must be >= 0")
        if self.threshold_db <= 0:
            raise ValueError("threshold_db must be positive")

    def resolve_embed_dim(self, n: int) -> int:
        m = n // 4 if self.embed_dim is None else self.embed_dim
        if not 1 <= m <= n // 2:
            raise ValueError(f"embed_dim {m} must lie in [1, {n // 2}] for N={n}")
        if self.retained_dims is not None and not 0 <= self.retained_dims <= m:
            raise ValueError("retained_dims must lie in [0, embed_dim]")
        return m


@dataclass
class PcaReport:
    embed_dim: int
    eigenvalues: np.ndarray
    removed_indices: list[int]
    retained_indices: list[int]
    clutter_power_estimate: float
    snr_before: float | None = None
    snr_after: float | None = None
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eigenvalues"] = [float(v) for v in self.eigenvalues]
        return d


def hankel_embed(x, m: int) -> np.ndarray:
    """M x K matrix whose columns are the windows ``x[i:i+M]``."""
    x = np.asarray(x)
    k = x.size - m + 1
    idx = np.arange(m)[:, None] + np.arange(k)[None, :]
    return x[idx]


def hankel_average(w: np.ndarray) -> np.ndarray:
    """Invert ``hankel_embed`` by averaging each anti-diagonal."""
    m, k = w.shape
    n = m + k - 1
    out = np.zeros(n, dtype=np.complex128)
    counts = np.zeros(n)
    for j in range(m):
        out[j:j + k] += w[j]
        counts[j:j + k] += 1
    return out / counts


def _series(x, subtract_mean: bool) -> np.ndarray:
    s = np.asarray(getattr(x, "samples", x), dtype=np.complex128)
    return s - s.mean() if subtract_mean else s


def autocorrelation_matrix(x, embed_dim: int, subtract_mean: bool = True) -> np.ndarray:
    """M x M window autocorrelation ``W W^H / K`` of the (mean-removed) series."""
    s = np.asarray(getattr(x, "samples", x))
    if not 1 <= embed_dim <= s.size // 2:
        raise ValueError(f"embed_dim must lie in [1, {s.size // 2}]")
    w = hankel_embed(_series(s, subtract_mean), embed_dim)
    r = w @ w.conj().T / w.shape[1]
    return 0.5 * (r + r.conj().T)


def select_clutter(eigenvalues: np.ndarray, m: int, dc_power: float, total_power: float,
                   cfg: PcaConfig) -> list[int]:
    """Indices (into the descending eigenvalues) to treat as clutter."""
    n_remove = min(cfg.n_clutter, eigenvalues.size)
    if cfg.selection == "largest":
        return list(range(n_remove))
    if n_remove == 0 or total_power == 0:
        return []
    if dc_power <= total_power * 10 ** (cfg.clutter_floor_db / 10):
        return []
    per_sample = eigenvalues / m
    with np.errstate(divide="ignore"):
        gap = np.abs(10 * np.log10(per_sample / dc_power))
    order = np.argsort(gap, kind="stable")
    if not gap[order[0]] <= cfg.threshold_db:
        raise ClutterAmbiguityError(dc_power, per_sample)
    return sorted(int(i) for i in order[:n_remove])


def truth_snr_db(samples: np.ndarray, truth) -> float | None:
    """SNR of ``samples`` against the clean target echo in ``truth``."""
    if truth is None:
        return None
    sig = truth.signal
    err = np.linalg.norm(samples - sig) ** 2
    ps = np.linalg.norm(sig) ** 2
    if err == 0:
        return float("inf")
    if ps == 0:
        return float("-inf")
    return float(10 * np.log10(ps / err))


def _filter(x: SlowTimeVector, cfg: PcaConfig, retained_dims: int | None, step: str):
    s = np.asarray(x.samples, dtype=np.complex128)
    n = s.size
    m = cfg.resolve_embed_dim(n)
    series = _series(s, cfg.subtract_mean)
    w = hankel_embed(series, m)
    r = w @ w.conj().T / w.shape[1]
    r = 0.5 * (r + r.conj().T)
    u, eig, _ = hermitian_svd(r)
    removed = select_clutter(eig, m, mean_power(s), float(np.mean(np.abs(s) ** 2)), cfg)
    keep = [i for i in range(m) if i not in removed]
    if retained_dims is not None:
        keep = keep[:retained_dims]
    ur = u[:, keep]
    out = hankel_average(ur @ (ur.conj().T @ w))
    report = PcaReport(m, eig, removed, keep, mean_power(s))
    if x.truth is not None:
        report.snr_before = truth_snr_db(s, x.truth)
        report.snr_after = truth_snr_db(out, x.truth)
        n_tones = len(x.truth.tones)
        if retained_dims is not None and retained_dims < n_tones:
            report.warnings.append(
                f"retained {retained_dims} dims for {n_tones} signal components: signal energy loss"
            )
    return x.replace(out, step), report


def suppress_clutter(x: SlowTimeVector, cfg: PcaConfig | None = None):
    """Project out the clutter eigenvector(s); returns ``(filtered, report)``."""
    cfg = cfg or PcaConfig()
    return _filter(x, cfg, None, "pca")


def denoise_rank_select(x: SlowTimeVector, cfg: PcaConfig):
    """Clutter removal followed by keeping only the top ``retained_dims``."""
    if cfg.retained_dims is None:
        raise ValueError("denoise_rank_select needs retained_dims")
    return _filter(x, cfg, cfg.retained_dims, f"pca-denoise[{cfg.retained_dims}]")


def mti_two_pulse(x):
    """Two-pulse canceller ``x[p+1] - x[p]`` (length N-1)."""
    s = np.asarray(getattr(x, "samples", x), dtype=np.complex128)
    return s[1:] - s[:-1]
