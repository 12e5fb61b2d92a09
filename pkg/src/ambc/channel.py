"""Two-path propagation, CRS pilot observation and first-tap channel estimates.

The direct composite ``h_d`` (base station to receiver) and the scattered
composite ``h_s`` (base station to BD to receiver) are modelled as flat over the
band, so both land in channel tap 0 and the estimate at a CRS instant t is

    h0(t) = h_d(t) + x(t) * r_on * h_s(t) + z(t).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .errors import ConfigError, SingularImpedanceError, TraceParseError
from .waveforms import BdWaveform

TAP_CSV_HEADER = ("t_seconds", "re", "im")


def fspl(distance, wavelength):
    """Free-space path loss ``(4 pi D / lambda)**2`` in linear scale."""
    if not (distance > 0 and wavelength > 0):
        raise ValueError("distance and wavelength must be positive")
    return (4.0 * math.pi * distance / wavelength) ** 2


def reflection_coefficient(z_load, z_antenna):
    """Reflection coefficient ``(Z_x - Z_a*) / (Z_x + Z_a*)``."""
    den = complex(z_load) + complex(z_antenna).conjugate()
    if den == 0:
        raise SingularImpedanceError("Z_x + conj(Z_a) = 0")
    return (complex(z_load) - complex(z_antenna).conjugate()) / den


def sample_instants(n_slots, config: SystemConfig):
    """CRS channel-sampling instants {k T_slot, k T_slot + T_slot/2 + dT}."""
    if n_slots < 1:
        raise ValueError("n_slots must be >= 1")
    k = np.arange(n_slots) * config.t_slot
    out = np.empty(2 * n_slots)
    out[0::2] = k
    out[1::2] = k + config.t_slot / 2 + config.delta_t
    return out


@dataclass(frozen=True)
class PathGains:
    """Block-constant complex gains of the direct and scattered composites.

    ``direct[b]`` / ``scattered[b]`` hold the gains of coherence block ``b``
    covering ``[b*block_length, (b+1)*block_length)``; times past the last block
    reuse it.
    """

    direct: np.ndarray
    scattered: np.ndarray
    block_length: float
    mean_direct_power: float
    mean_scattered_power: float
    mode: str

    def _block(self, t):
        t = np.asarray(t, dtype=float)
        if math.isinf(self.block_length):
            return np.zeros(t.shape, dtype=np.int64)
        b = np.floor(t / self.block_length).astype(np.int64)
        return np.clip(b, 0, len(self.direct) - 1)

    def h_d(self, t):
        return self.direct[self._block(t)]

    def h_s(self, t):
        return self.scattered[self._block(t)]

    def scaled(self, c) -> "PathGains":
        c = complex(c)
        p = abs(c) ** 2
        return PathGains(
            self.direct * c,
            self.scattered * c,
            self.block_length,
            self.mean_direct_power * p,
            self.mean_scattered_power * p,
            self.mode,
        )


def path_powers(config: SystemConfig):
    """Mean powers E|h_d|^2 and E|h_s|^2 from the free-space losses."""
    lam = config.wavelength
    p_d = 1.0 / fspl(config.d_tx_rx, lam)
    p_s = 1.0 / (fspl(config.d_tx_bd, lam) * fspl(config.d_bd_rx, lam))
    return p_d, p_s


def make_path_gains(config: SystemConfig, rng=None, n_blocks=1) -> PathGains:
    """Draw path gains for ``n_blocks`` coherence blocks.

    Static mode gives real positive gains with exactly the path-loss powers.
    Rayleigh-block mode draws CN(0, power) per block.
    """
    p_d, p_s = path_powers(config)
    block = math.inf if config.coherence_time is None else config.coherence_time
    if config.fading_mode == "static":
        d = np.full(n_blocks, math.sqrt(p_d), dtype=complex)
        s = np.full(n_blocks, math.sqrt(p_s), dtype=complex)
    else:
        rng = np.random.default_rng(rng)
        g = rng.standard_normal((2, 2, n_blocks)) * math.sqrt(0.5)
        d = (g[0, 0] + 1j * g[0, 1]) * math.sqrt(p_d)
        s = (g[1, 0] + 1j * g[1, 1]) * math.sqrt(p_s)
    return PathGains(d, s, block, p_d, p_s, config.fading_mode)


def crs_pilot_mask(config: SystemConfig):
    """Port-0 CRS subcarrier indices for OFDM symbols 0 and 4 of a slot."""
    n = config.n_subcarriers
    if n < 6:
        raise ValueError("need at least 6 subcarriers")
    v = config.crs_shift % 6
    return {
        0: np.arange(v, n, 6),
        4: np.arange((v + 3) % 6, n, 6),
    }


def pilot_symbols(n, seed=0x5EED):
    """Known unit-magnitude QPSK pilot values, fixed for a given ``n``."""
    rng = np.random.default_rng(seed)
    q = rng.integers(0, 4, size=n)
    return np.exp(1j * (np.pi / 4 + np.pi / 2 * q))


@dataclass(frozen=True)
class TapSeries:
    """First-tap channel estimates on the irregular CRS instants."""

    instants: np.ndarray
    values: np.ndarray
    nominal_rate: float

    def __post_init__(self):
        inst = np.asarray(self.instants, dtype=float)
        vals = np.asarray(self.values, dtype=complex)
        if inst.shape != vals.shape or inst.ndim != 1:
            raise ValueError("instants and values must be equal-length 1-D arrays")
        if inst.size > 1 and np.any(np.diff(inst) <= 0):
            raise ValueError("instants must be strictly increasing")
        if not np.all(np.isfinite(vals)):
            raise ValueError("tap values must be finite")
        object.__setattr__(self, "instants", inst)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.size

    def scaled(self, c) -> "TapSeries":
        return TapSeries(self.instants, self.values * complex(c), self.nominal_rate)

    def shifted(self, c) -> "TapSeries":
        return TapSeries(self.instants, self.values + complex(c), self.nominal_rate)


def observe_and_estimate(
    path_gains: PathGains,
    waveform: BdWaveform,
    config: SystemConfig,
    rng=None,
    *,
    instants=None,
    frame_start=0.0,
    fidelity=None,
) -> TapSeries:
    """Produce first-tap estimates at the CRS instants.

    ``fidelity="grid"`` forms per-pilot LS estimates and takes tap 0 of their
    IDFT; ``fidelity="tap"`` adds the equivalent CN(0, noise_var/n_pilots) noise
    to the tap directly. Both coincide at zero noise.
    """
    fidelity = fidelity or config.fidelity
    if not math.isclose(waveform.frame.symbol_duration, config.t_bc, rel_tol=1e-12):
        raise ConfigError("waveform symbol duration differs from config.t_bc")
    if (waveform.keys.f0, waveform.keys.f1) != (config.keys.f0, config.keys.f1):
        raise ConfigError("waveform keys differ from config.keys")
    if instants is None:
        n_slots = max(1, math.ceil((frame_start + waveform.duration) / config.t_slot))
        instants = sample_instants(n_slots, config)
    instants = np.asarray(instants, dtype=float)
    x = waveform(instants - frame_start)
    h = path_gains.h_d(instants) + x * config.r_on * path_gains.h_s(instants)

    if fidelity == "tap":
        if config.noise_var > 0:
            rng = np.random.default_rng(rng)
            sd = math.sqrt(config.noise_var / config.n_pilots / 2)
            z = rng.standard_normal((2, h.size)) * sd
            h = h + z[0] + 1j * z[1]
        return TapSeries(instants, h, config.sample_rate)

    if fidelity != "grid":
        raise ConfigError(f"unknown fidelity {fidelity!r}")
    mask = crs_pilot_mask(config)
    values = np.empty(h.size, dtype=complex)
    rng = np.random.default_rng(rng) if config.noise_var > 0 else None
    # even instants carry symbol-0 pilots, odd instants symbol-4 pilots
    for parity, sym in ((0, 0), (1, 4)):
        idx = np.arange(parity, h.size, 2)
        sc = mask[sym]
        p = pilot_symbols(config.n_subcarriers)[sc]
        y = h[idx, None] * p[None, :]
        if rng is not None:
            sd = math.sqrt(config.noise_var / 2)
            y = y + sd * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
        h_ls = y / p[None, :]
        values[idx] = np.fft.ifft(h_ls, axis=1)[:, 0]
    return TapSeries(instants, values, config.sample_rate)


@dataclass(frozen=True)
class SnrReport:
    snr1_db: float
    snr2_db: float
    delta_l_db: float


def _db(x):
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def signal_powers(config: SystemConfig, path_gains: PathGains | None = None):
    """CRS power E|h_d + r h_s x|^2 and backscatter power E|r h_s x|^2, x duty 1/2."""
    if path_gains is None or path_gains.mode != "static":
        p_d, p_s = path_powers(config) if path_gains is None else (
            path_gains.mean_direct_power,
            path_gains.mean_scattered_power,
        )
        cross = 0.0
    else:
        hd, hs = complex(path_gains.direct[0]), complex(path_gains.scattered[0])
        p_d, p_s = abs(hd) ** 2, abs(hs) ** 2
        cross = (hd.conjugate() * hs).real
    r = config.r_on
    p_bs = 0.5 * r**2 * p_s
    p_crs = p_d + p_bs + r * cross
    return p_crs, p_bs


def snr_definitions(config: SystemConfig, path_gains: PathGains | None = None) -> SnrReport:
    """SNR1 (CRS power), SNR2 (backscatter power) and the path-power gap, all dB."""
    p_crs, p_bs = signal_powers(config, path_gains)
    if path_gains is None:
        p_d, p_s = path_powers(config)
    else:
        p_d, p_s = path_gains.mean_direct_power, path_gains.mean_scattered_power
    delta_l = _db(p_d) - _db(p_s * config.r_on**2)
    if config.noise_var == 0:
        return SnrReport(math.inf, math.inf if p_bs > 0 else -math.inf, delta_l)
    return SnrReport(_db(p_crs / config.noise_var), _db(p_bs / config.noise_var), delta_l)


def noise_var_for_snr(config: SystemConfig, snr_db, axis="snr1", path_gains=None):
    """Noise variance that realises ``snr_db`` on the chosen SNR axis."""
    p_crs, p_bs = signal_powers(config, path_gains)
    p = {"snr1": p_crs, "snr2": p_bs}[axis]
    return p / 10 ** (snr_db / 10)


def write_tap_series(series: TapSeries, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TAP_CSV_HEADER)
        for t, v in zip(series.instants, series.values):
            w.writerow((format(t, ".17g"), format(v.real, ".17g"), format(v.imag, ".17g")))


def read_tap_series(path, nominal_rate=4000.0) -> TapSeries:
    """Parse a ``t_seconds,re,im`` CSV. An empty file yields an empty series."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if lineno == 1:
                if not row:
                    continue
                if tuple(c.strip() for c in row) != TAP_CSV_HEADER:
                    raise TraceParseError(path, lineno, f"expected header {','.join(TAP_CSV_HEADER)}")
                continue
            if not row:
                continue
            if len(row) != 3:
                raise TraceParseError(path, lineno, f"expected 3 fields, got {len(row)}")
            try:
                t, re_, im = (float(c) for c in row)
            except ValueError as exc:
                raise TraceParseError(path, lineno, str(exc)) from None
            rows.append((t, complex(re_, im)))
    if not rows:
        return TapSeries(np.empty(0), np.empty(0, dtype=complex), nominal_rate)
    t = np.array([r[0] for r in rows])
    v = np.array([r[1] for r in rows])
    try:
        return TapSeries(t, v, nominal_rate)
    except ValueError as exc:
        raise TraceParseError(path, len(rows) + 1, str(exc)) from None
