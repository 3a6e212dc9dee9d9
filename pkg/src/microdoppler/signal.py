"""Slow-time echo synthesis for micro-Doppler targets, clutter and noise.

Fast time is collapsed to the matched-filter peak of a single range gate, so
each scatterer contributes ``alpha * rel_amp * exp(-1j * doppler * p * pri)``
to pulse ``p``. Doppler values are radial frequencies in rad/s.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AliasingError",
    "PulseTrainConfig",
    "MicroDopplerTarget",
    "ClutterModel",
    "NoiseModel",
    "GroundTruth",
    "SlowTimeVector",
    "synthesize_echo",
    "synthesize_clutter",
    "synthesize_noise",
    "mean_power",
]


class AliasingError(ValueError):
    """A scatterer's Doppler lies outside the unambiguous span."""


@dataclass(frozen=True)
class PulseTrainConfig:
    n_pulses: int
    pri: float
    carrier: float = 9.41e9
    gate_width: float = 1e-6

    def __post_init__(self):
        if self.n_pulses < 1:
            raise ValueError("n_pulses must be >= 1")
        if self.pri <= 0:
            raise ValueError("pri must be positive")
        if self.gate_width <= 0:
            raise ValueError("gate_width must be positive")

    @property
    def cpi(self) -> float:
        return self.n_pulses * self.pri

    @property
    def max_doppler(self) -> float:
        """Edge of the unambiguous span, pi / pri (rad/s)."""
        return np.pi / self.pri

    def bin_frequency(self, k: float, n: int | None = None) -> float:
        """Radial frequency of DFT bin ``k`` for an ``n``-point transform."""
        n = self.n_pulses if n is None else n
        return 2 * np.pi * k / (n * self.pri)

    def with_pulses(self, n_pulses: int) -> "PulseTrainConfig":
        return PulseTrainConfig(n_pulses, self.pri, self.carrier, self.gate_width)


@dataclass(frozen=True)
class MicroDopplerTarget:
    """A body Doppler tone plus constant-frequency micro-Doppler sidebands.

    The body tone always has relative amplitude 1; ``micro_components`` holds
    ``(offset_rad_s, relative_amplitude)`` pairs and may be empty; a complex
    relative amplitude sets the sideband phase.
    """

    amplitude: complex
    body_doppler: float
    micro_components: tuple[tuple[float, complex], ...] = ()
    delay: float = 0.0
    azimuth: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "amplitude", complex(self.amplitude))
        object.__setattr__(
            self, "micro_components",
            tuple((float(d), complex(a)) for d, a in self.micro_components),
        )

    def tones(self) -> list[tuple[float, complex]]:
        """(doppler, complex amplitude) for the body and every sideband."""
        out = [(float(self.body_doppler), self.amplitude)]
        for offset, rel in self.micro_components:
            out.append((float(self.body_doppler + offset), self.amplitude * rel))
        return out


@dataclass(frozen=True)
class ClutterModel:
    power: float = 0.0
    doppler_center: float = 0.0
    spectral_width: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("clutter power must be >= 0")
        if self.spectral_width < 0:
            raise ValueError("clutter spectral width must be >= 0")


@dataclass(frozen=True)
class NoiseModel:
    variance: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("noise variance must be >= 0")


@dataclass
class GroundTruth:
    targets: list[MicroDopplerTarget]
    clutter: ClutterModel
    noise: NoiseModel
    signal: np.ndarray
    clutter_samples: np.ndarray
    noise_samples: np.ndarray

    @property
    def tones(self) -> list[tuple[float, complex]]:
        return [t for tgt in self.targets for t in tgt.tones()]

    def sliced(self, sl: slice) -> "GroundTruth":
        return GroundTruth(self.targets, self.clutter, self.noise,
                           self.signal[sl], self.clutter_samples[sl], self.noise_samples[sl])


@dataclass
class SlowTimeVector:
    samples: np.ndarray
    config: PulseTrainConfig
    truth: GroundTruth | None = None
    history: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.ndim != 1:
            raise ValueError("slow-time samples must be 1-D")
        if self.samples.size != self.config.n_pulses:
            raise ValueError(
                f"{self.samples.size} samples but config has {self.config.n_pulses} pulses"
            )

    def __len__(self) -> int:
        return self.samples.size

    def replace(self, samples: np.ndarray, step: str | None = None) -> "SlowTimeVector":
        hist = self.history + ([step] if step else [])
        return SlowTimeVector(samples, self.config, self.truth, hist)

    def segment(self, start: int, length: int) -> "SlowTimeVector":
        """Contiguous run of ``length`` pulses starting at ``start``."""
        if start < 0 or length < 1 or start + length > len(self):
            raise ValueError("segment out of range")
        sl = slice(start, start + length)
        truth = self.truth.sliced(sl) if self.truth is not None else None
        # Tone phases are referenced to pulse 0 of the full train.
        return SlowTimeVector(self.samples[sl], self.config.with_pulses(length), truth,
                              self.history + [f"segment[{start}:{start + length}]"])


def _check_span(doppler: float, pri: float) -> None:
    if abs(doppler) * pri >= np.pi:
        raise AliasingError(
            f"Doppler {doppler:.6g} rad/s outside unambiguous span +/-{np.pi / pri:.6g}"
        )


def _in_gate(target: MicroDopplerTarget, cfg: PulseTrainConfig, gate: int | None) -> bool:
    if gate is None:
        return True
    return int(np.floor(target.delay / cfg.gate_width)) == gate


def synthesize_clutter(cfg: PulseTrainConfig, clutter: ClutterModel) -> np.ndarray:
    n = cfg.n_pulses
    if clutter.power == 0:
        return np.zeros(n, dtype=np.complex128)
    _check_span(clutter.doppler_center, cfg.pri)
    rng = np.random.default_rng(clutter.seed)
    p = np.arange(n)
    carrier = np.exp(-1j * clutter.doppler_center * p * cfg.pri)
    if clutter.spectral_width == 0:
        phase = rng.uniform(0, 2 * np.pi)
        return np.sqrt(clutter.power) * np.exp(1j * phase) * carrier
    # Unit-power Gaussian-PSD process shaped in the frequency domain.
    white = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    freqs = 2 * np.pi * np.fft.fftfreq(n, d=cfg.pri)
    shape = np.exp(-0.25 * (freqs / clutter.spectral_width) ** 2)
    proc = np.fft.ifft(np.fft.fft(white) * shape)
    proc /= np.sqrt(np.mean(np.abs(proc) ** 2))
    return np.sqrt(clutter.power) * proc * carrier


def synthesize_noise(n: int, noise: NoiseModel) -> np.ndarray:
    if noise.variance == 0:
        return np.zeros(n, dtype=np.complex128)
    rng = np.random.default_rng(noise.seed)
    z = rng.standard_normal((2, n))
    return np.sqrt(noise.variance / 2) * (z[0] + 1j * z[1])


def target_echo(cfg: PulseTrainConfig, targets, times: np.ndarray | None = None) -> np.ndarray:
    """Noise-free target echo sampled at pulse indices ``times``."""
    p = np.arange(cfg.n_pulses) if times is None else np.asarray(times)
    out = np.zeros(p.shape, dtype=np.complex128)
    for tgt in targets:
        for doppler, amp in tgt.tones():
            _check_span(doppler, cfg.pri)
            out += amp * np.exp(-1j * doppler * p * cfg.pri)
    return out


def synthesize_echo(cfg: PulseTrainConfig, scene, clutter: ClutterModel | None = None,
                    noise: NoiseModel | None = None, gate: int | None = None) -> SlowTimeVector:
    """Slow-time echo of ``scene`` at range gate ``gate`` (None: every target).

    Raises ``AliasingError`` when any tone falls outside +/- pi/pri.
    """
    clutter = clutter or ClutterModel()
    noise = noise or NoiseModel()
    targets = [t for t in scene if _in_gate(t, cfg, gate)]
    for t in scene:
        for doppler, _ in t.tones():
            _check_span(doppler, cfg.pri)
    signal = target_echo(cfg, targets)
    c = synthesize_clutter(cfg, clutter)
    w = synthesize_noise(cfg.n_pulses, noise)
    truth = GroundTruth(targets, clutter, noise, signal, c, w)
    return SlowTimeVector(signal + c + w, cfg, truth)


def mean_power(x) -> float:
    """Power of the coherent mean, ``|mean(x)|**2``: the DC/clutter estimate."""
    samples = np.asarray(getattr(x, "samples", x))
    if samples.size == 0:
        raise ValueError("empty input")
    return float(np.abs(samples.mean()) ** 2)
