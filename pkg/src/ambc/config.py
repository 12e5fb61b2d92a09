"""System-wide constants and the configuration record shared by every stage."""

from __future__ import annotations

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

#: Default admissible band for the BD frequency keys, in Hz.
KEY_BAND = (200.0, 1000.0)

FADING_MODES = ("static", "rayleigh-block")
FIDELITIES = ("tap", "grid")


class KeyRatioWarning(UserWarning):
    """f1/f0 is an integer, so aliased harmonics of one key hit the other."""


@dataclass(frozen=True)
class KeyPair:
    """FSK frequency keys (Hz) of the backscatter square waves."""

    f0: float = 300.0
    f1: float = 650.0
    band: tuple = KEY_BAND

    def __post_init__(self):
        if not (math.isfinite(self.f0) and math.isfinite(self.f1)):
            raise ConfigError("frequency keys must be finite")
        if not 0 < self.f0 < self.f1:
            raise ConfigError(f"need 0 < f0 < f1, got f0={self.f0}, f1={self.f1}")
        lo, hi = self.band
        for name, f in (("f0", self.f0), ("f1", self.f1)):
            if not lo <= f <= hi:
                raise ConfigError(f"{name}={f} Hz outside admissible band [{lo}, {hi}] Hz")
        if self.integer_ratio:
            warnings.warn(
                f"f1/f0 = {self.f1 / self.f0:g} is an integer", KeyRatioWarning, stacklevel=3
            )

    @property
    def integer_ratio(self) -> bool:
        ratio = self.f1 / self.f0
        return abs(ratio - round(ratio)) < 1e-9

    def key(self, bit: int) -> float:
        return self.f1 if bit else self.f0


@dataclass(frozen=True)
class SystemConfig:
    """Physical, protocol and receiver constants.

    Distances are metres, times seconds, frequencies Hz. ``noise_var`` is the
    per-resource-element noise variance sigma_n^2 (linear); the first-tap
    estimate sees ``noise_var / n_pilots``.
    """

    f_c: float = 486e6
    bandwidth: float = 7.68e6
    n_subcarriers: int = 252  # 21 resource blocks
    t_slot: float = 0.5e-3
    delta_t: float = 35.6e-6
    t_bc: float = 40e-3
    sleep_duration: float = 0.1
    payload_bits: int = 16
    keys: KeyPair = field(default_factory=KeyPair)
    d_tx_rx: float = 125.0
    d_tx_bd: float = 130.0
    d_bd_rx: float = 10.0
    r_on: float = 10 ** (-6 / 20)
    noise_var: float = 0.0
    fading_mode: str = "static"
    coherence_time: float | None = None  # None: one fading draw per trace
    fidelity: str = "tap"
    crs_shift: int = 0
    bpf_bandwidth: float = 200.0
    bpf_taps: int = 257
    sync_threshold: int = 14
    max_header_errors: int = 7
    rng_seed: int = 0

    def __post_init__(self):
        if isinstance(self.keys, dict):
            object.__setattr__(self, "keys", KeyPair(**self.keys))
        for name in ("d_tx_rx", "d_tx_bd", "d_bd_rx", "f_c", "bandwidth", "t_slot", "t_bc"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.r_on <= 1:
            raise ConfigError(f"r_on must lie in (0, 1], got {self.r_on}")
        if not 0 <= self.delta_t < self.t_slot / 2:
            raise ConfigError("delta_t must satisfy 0 <= delta_t < t_slot/2")
        if self.n_subcarriers < 6:
            raise ConfigError("n_subcarriers must be at least 6")
        if self.noise_var < 0:
            raise ConfigError("noise_var must be non-negative")
        if self.sleep_duration < 0 or self.payload_bits < 0:
            raise ConfigError("sleep_duration and payload_bits must be non-negative")
        if self.fading_mode not in FADING_MODES:
            raise ConfigError(f"fading_mode must be one of {FADING_MODES}")
        if self.fidelity not in FIDELITIES:
            raise ConfigError(f"fidelity must be one of {FIDELITIES}")
        if self.coherence_time is not None and self.coherence_time <= 0:
            raise ConfigError("coherence_time must be positive")
        if self.bpf_taps < 31 or self.bpf_taps % 2 == 0:
            raise ConfigError("bpf_taps must be odd and >= 31")
        spb = self.t_bc * self.sample_rate
        if abs(spb - round(spb)) > 1e-6:
            raise ConfigError("t_bc must span an integer number of nominal samples")

    @property
    def subcarrier_spacing(self) -> float:
        return self.bandwidth / self.n_subcarriers

    @property
    def sample_rate(self) -> float:
        """Nominal channel-estimate rate, two CRS symbols per slot."""
        return 2.0 / self.t_slot

    @property
    def samples_per_symbol(self) -> int:
        return int(round(self.t_bc * self.sample_rate))

    @property
    def n_pilots(self) -> int:
        return self.n_subcarriers // 6

    @property
    def wavelength(self) -> float:
        from scipy.constants import c

        return c / self.f_c

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["keys"] = {"f0": self.keys.f0, "f1": self.keys.f1, "band": list(self.keys.band)}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        d = dict(d)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown SystemConfig fields: {sorted(unknown)}")
        if "keys" in d and isinstance(d["keys"], dict):
            k = dict(d["keys"])
            if "band" in k:
                k["band"] = tuple(k["band"])
            d["keys"] = KeyPair(**k)
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_json(path) -> dict:
    """Read a JSON document, mapping decode failures to :class:`ConfigError`."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
