"""Scenario documents: pulse train, targets, clutter, noise.

JSON layout (Doppler in rad/s unless a ``_hz`` or ``_bin`` key is used)::

    {
      "name": "...",
      "pulse_train": {"n_pulses": 512, "pri": 1.953125e-4, "carrier": 9.41e9},
      "targets": [
        {"amplitude": [1.0, 0.0], "body_bin": 40,
         "micro": [{"offset_bin": -10, "rel_amp": [0.38, 0.32]}]}
      ],
      "clutter": {"power": 100.0, "doppler_center": 0.0, "spectral_width": 0.0, "seed": 3},
      "noise": {"snr_db": 20.0, "seed": 1},
      "gate": null
    }

Bins refer to the ``n_pulses``-point DFT grid. ``snr_db`` is total target
power per pulse over the noise variance. ``scenario_to_dict`` always writes
rad/s and an explicit variance, so ``load(dump(s)) == s``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .signal import (ClutterModel, MicroDopplerTarget, NoiseModel, PulseTrainConfig,
                     SlowTimeVector, synthesize_echo)

__all__ = ["Scenario", "scenario_from_dict", "scenario_to_dict", "load_scenario",
           "dump_scenario", "bundled_path"]


@dataclass
class Scenario:
    config: PulseTrainConfig
    targets: list[MicroDopplerTarget]
    clutter: ClutterModel = field(default_factory=ClutterModel)
    noise: NoiseModel = field(default_factory=NoiseModel)
    gate: int | None = None
    name: str = ""
    description: str = ""

    def synthesize(self) -> SlowTimeVector:
        return synthesize_echo(self.config, self.targets, self.clutter, self.noise, self.gate)

    def reseeded(self, seed: int) -> "Scenario":
        """Same scene with noise and clutter realizations drawn from ``seed``."""
        return replace(self, noise=replace(self.noise, seed=int(seed)),
                       clutter=replace(self.clutter, seed=int(seed) + 1))

    @property
    def signal_power(self) -> float:
        return float(sum(abs(a) ** 2 for t in self.targets for _, a in t.tones()))


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        re, im = v
        return complex(float(re), float(im))
    return complex(v)


def _freq(d: dict, key: str, cfg: PulseTrainConfig, default=None) -> float:
    if key in d:
        return float(d[key])
    if f"{key}_hz" in d:
        return 2 * np.pi * float(d[f"{key}_hz"])
    if f"{key}_bin" in d:
        return cfg.bin_frequency(float(d[f"{key}_bin"]))
    if default is not None:
        return default
    raise KeyError(f"missing {key!r} (or {key}_hz / {key}_bin)")


def _target(d: dict, cfg: PulseTrainConfig) -> MicroDopplerTarget:
    body = _freq({k.replace("body_doppler", "body"): v for k, v in d.items()}, "body", cfg)
    micro = tuple((_freq(m, "offset", cfg), _complex(m.get("rel_amp", 1.0)))
                  for m in d.get("micro", []))
    return MicroDopplerTarget(_complex(d.get("amplitude", 1.0)), body, micro,
                              float(d.get("delay", 0.0)), float(d.get("azimuth", 0.0)))


def scenario_from_dict(d: dict) -> Scenario:
    pt = d["pulse_train"]
    cfg = PulseTrainConfig(int(pt["n_pulses"]), float(pt["pri"]),
                           float(pt.get("carrier", 9.41e9)), float(pt.get("gate_width", 1e-6)))
    targets = [_target(t, cfg) for t in d.get("targets", [])]
    c = d.get("clutter") or {}
    clutter = ClutterModel(float(c.get("power", 0.0)),
                           _freq(c, "doppler_center", cfg, 0.0),
                           _freq(c, "spectral_width", cfg, 0.0),
                           int(c.get("seed", 0)))
    nz = d.get("noise") or {}
    if "snr_db" in nz:
        if "variance" in nz:
            raise ValueError("give noise variance or snr_db, not both")
        power = sum(abs(a) ** 2 for t in targets for _, a in t.tones())
        variance = power / 10 ** (float(nz["snr_db"]) / 10)
    else:
        variance = float(nz.get("variance", 0.0))
    noise = NoiseModel(variance, int(nz.get("seed", 0)))
    gate = d.get("gate")
    return Scenario(cfg, targets, clutter, noise, None if gate is None else int(gate),
                    d.get("name", ""), d.get("description", ""))


def _cplx(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def scenario_to_dict(s: Scenario) -> dict:
    cfg = s.config
    return {
        "name": s.name,
        "description": s.description,
        "pulse_train": {"n_pulses": cfg.n_pulses, "pri": cfg.pri, "carrier": cfg.carrier,
                        "gate_width": cfg.gate_width},
        "targets": [
            {"amplitude": _cplx(t.amplitude), "body_doppler": t.body_doppler,
             "micro": [{"offset": off, "rel_amp": _cplx(rel)} for off, rel in t.micro_components],
             "delay": t.delay, "azimuth": t.azimuth}
            for t in s.targets
        ],
        "clutter": {"power": s.clutter.power, "doppler_center": s.clutter.doppler_center,
                    "spectral_width": s.clutter.spectral_width, "seed": s.clutter.seed},
        "noise": {"variance": s.noise.variance, "seed": s.noise.seed},
        "gate": s.gate,
    }


def bundled_path(name: str) -> Path:
    """Path of a scenario or pipeline file shipped with the package."""
    root = resources.files("microdoppler") / "data"
    for cand in (name, f"{name}.json"):
        p = Path(str(root / cand))
        if p.is_file():
            return p
    raise FileNotFoundError(f"no bundled file named {name!r}")


def load_scenario(src) -> Scenario:
    """Load from a dict, a path, or the name of a bundled scenario."""
    if isinstance(src, Scenario):
        return src
    if isinstance(src, dict):
        return scenario_from_dict(src)
    p = Path(src)
    if not p.is_file():
        p = bundled_path(str(src))
    with open(p) as fh:
        return scenario_from_dict(json.load(fh))


def dump_scenario(s: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(s), fh, indent=2)
        fh.write("\n")
