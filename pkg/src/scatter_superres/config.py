"""Experiment configuration: physical and algorithmic parameters, file
loading (TOML or JSON), and reproducibility helpers.

Defaults reproduce the reference configuration used throughout:
5 GHz central frequency, 1 GHz bandwidth over 26 frequencies, a
31-receiver array spanning 30 wavelengths, a 19 x 19 image window at
14 m range with 0.5/1.66 wavelength spacings, and 400 point scatterers
between the array and the window.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - version-dependent import
    import tomli as tomllib

from . import sparsedict, wavefield

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "config_hash"]


class ConfigError(ValueError):
    """Invalid or physically inconsistent configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    # physical parameters
    f0: float = 5e9                      # central frequency, Hz
    bandwidth: float = 1e9               # total bandwidth, Hz
    n_frequencies: int = 26
    c0: float = 3e8
    n_receivers: int = 31
    aperture: float = 30.0               # receiver span, wavelengths
    array_range: float = 14.0            # image-window depth L, meters
    n_cross: int = 19
    n_range: int = 19
    spacing_cross: float = 0.5           # wavelengths
    spacing_range: float = 1.66          # wavelengths
    region_x: Tuple[float, float] = (-5.0, 5.0)   # scatterer region, meters
    region_z: Tuple[float, float] = (2.0, 12.0)
    n_scatterers: int = 400
    tau_interval: Tuple[float, float] = (2.0, 4.0)
    n_samples: int = 5000                # measurements M
    sparsity: int = 3                    # sources per measurement s
    amplitude_law: str = "complex_gaussian"

    # algorithm parameters
    gelma_max_iters: int = 5000
    gelma_residual_tol: float = 1e-6
    outer_iters: int = 20
    overproduce_factor: float = 1.5
    neighbor_count: int = 4
    mds_refine: bool = True
    allow_reflection: bool = True
    dbscan_eps: float = 0.0075
    dbscan_c_min: int = 5
    k_target: int = 0                    # 0 = grid size

    # seeds (separate stochastic sources)
    seed_medium: int = 0
    seed_data: int = 0
    seed_algorithm: int = 0

    workers: int = 1

    def __post_init__(self):
        if self.c0 <= 0 or self.f0 <= 0:
            raise ConfigError("speeds and frequencies must be positive")
        if not 0 < self.bandwidth < 2 * self.f0:
            raise ConfigError("bandwidth must satisfy 0 < B < 2 f0")
        if self.n_frequencies < 1 or self.n_receivers < 1:
            raise ConfigError("need at least one frequency and receiver")
        if self.n_cross < 1 or self.n_range < 1:
            raise ConfigError("image window must be non-empty")
        if min(self.spacing_cross, self.spacing_range) <= 0:
            raise ConfigError("grid spacings must be positive")
        if self.sparsity < 0 or self.n_samples < 1:
            raise ConfigError("need n_samples >= 1 and sparsity >= 0")
        if self.tau_interval[0] > self.tau_interval[1]:
            raise ConfigError("tau interval must be ordered")

    # derived quantities -------------------------------------------------
    @property
    def wavelength(self) -> float:
        return self.c0 / self.f0

    @property
    def n_grid_points(self) -> int:
        return self.n_cross * self.n_range

    @property
    def k_effective(self) -> int:
        return self.k_target if self.k_target else self.n_grid_points

    def frequencies(self) -> np.ndarray:
        """Angular frequencies (rad/s), evenly covering the band."""
        f = np.linspace(self.f0 - self.bandwidth / 2,
                        self.f0 + self.bandwidth / 2, self.n_frequencies)
        return 2.0 * np.pi * f

    # factories ----------------------------------------------------------
    def make_array(self) -> wavefield.ArrayGeometry:
        lam = self.wavelength
        spacing = (self.aperture * lam / (self.n_receivers - 1)
                   if self.n_receivers > 1 else lam)
        return wavefield.linear_array(self.n_receivers, spacing,
                                      frequencies=self.frequencies())

    def make_grid(self) -> wavefield.ImageGrid:
        lam = self.wavelength
        return wavefield.centered_grid(
            (0.0, 0.0, self.array_range), self.n_cross, self.n_range,
            self.spacing_cross * lam, self.spacing_range * lam)

    def make_medium(self) -> wavefield.Medium:
        return wavefield.random_medium(
            self.n_scatterers, self.region_x, self.region_z,
            tau_interval=self.tau_interval, c0=self.c0,
            seed=self.seed_medium)

    def gelma_params(self) -> sparsedict.GelmaParams:
        return sparsedict.GelmaParams(max_iters=self.gelma_max_iters,
                                      residual_tol=self.gelma_residual_tol)

    # serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("region_x", "region_z", "tau_interval"):
            d[key] = list(d[key])
        return d

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)


def _coerce(raw: dict) -> ExperimentConfig:
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("region_x", "region_z", "tau_interval"):
        if key in raw:
            raw[key] = tuple(raw[key])
    return ExperimentConfig(**raw)


def load_config(path) -> ExperimentConfig:
    """Read an ExperimentConfig from a TOML or JSON file.

    Keys may be flat or grouped into sections (section names are ignored;
    only leaf keys matter).
    """
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        raw = json.loads(text.decode())
    else:
        raw = tomllib.loads(text.decode())
    flat: dict = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            for k, v in value.items():
                if k in flat:
                    raise ConfigError(f"duplicate config key {k!r}")
                flat[k] = v
        else:
            if key in flat:
                raise ConfigError(f"duplicate config key {key!r}")
            flat[key] = value
    return _coerce(flat)


def config_hash(config: ExperimentConfig) -> str:
    """Stable short hash of the full configuration, for run manifests."""
    canon = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]
