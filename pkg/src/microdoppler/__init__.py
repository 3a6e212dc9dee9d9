"""Few-pulse Doppler estimation for micro-Doppler radar targets.

Modules: ``signal`` (echo synthesis), ``pca`` (eigen-subspace clutter
filter), ``cs`` (l1 sparse recovery), ``iaa`` (iterative adaptive approach),
``mimo`` (quadrant MIMO geometry), ``metrics`` and ``pipeline``.
"""
from .numerics import DopplerGrid, SpectrumEstimate, fft_spectrum
from .signal import (ClutterModel, MicroDopplerTarget, NoiseModel, PulseTrainConfig,
                     SlowTimeVector, synthesize_echo)

__version__ = "0.1.0"

__all__ = [
    "DopplerGrid",
    "SpectrumEstimate",
    "fft_spectrum",
    "ClutterModel",
    "MicroDopplerTarget",
    "NoiseModel",
    "PulseTrainConfig",
    "SlowTimeVector",
    "synthesize_echo",
]
