"""Square-wave FSK symbols and Barker-synchronised frames of the backscatter device.

Levels are 0/1: the waveform gates the scattered path on and off. Each symbol's
square wave restarts with a rising edge at the symbol boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import KeyPair, SystemConfig

BARKER7 = (0, 0, 0, 0, 1, 1, 0)
SYNC_HEADER = BARKER7 + BARKER7 + tuple(1 - b for b in BARKER7)


def square_wave(f_key, t):
    """50 % duty 0/1 square wave of frequency ``f_key`` with a rising edge at t = 0.

    Returns 1 where ``frac(t * f_key) < 0.5``. Scalars in, int out; arrays in,
    int8 array out.
    """
    f_key = np.asarray(f_key, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(f_key)) or np.any(f_key <= 0):
        raise ValueError("f_key must be finite and positive")
    if not np.all(np.isfinite(t_arr)):
        raise ValueError("t must be finite")
    level = (np.mod(t_arr * f_key, 1.0) < 0.5).astype(np.int8)
    if level.ndim == 0:
        return int(level)
    return level


def bd_symbol(bit, keys: KeyPair, t_bc, t):
    """One symbol: the key's square wave inside [0, t_bc), zero outside."""
    t_arr = np.asarray(t, dtype=float)
    inside = (t_arr >= 0) & (t_arr < t_bc)
    level = np.where(inside, square_wave(keys.key(bit), np.where(inside, t_arr, 0.0)), 0)
    level = level.astype(np.int8)
    if level.ndim == 0:
        return int(level)
    return level


@dataclass(frozen=True)
class BdFrame:
    sync_header: tuple
    payload: tuple
    symbol_duration: float
    sleep_duration: float

    @property
    def bits(self) -> tuple:
        return self.sync_header + self.payload

    @property
    def n_symbols(self) -> int:
        return len(self.sync_header) + len(self.payload)

    @property
    def airtime(self) -> float:
        """Symbols plus trailing sleep, in seconds."""
        return self.n_symbols * self.symbol_duration + self.sleep_duration


def encode_frame(payload, config: SystemConfig) -> BdFrame:
    payload = tuple(int(b) for b in payload)
    if any(b not in (0, 1) for b in payload):
        raise ValueError("payload must contain only 0/1")
    return BdFrame(SYNC_HEADER, payload, config.t_bc, config.sleep_duration)


@dataclass(frozen=True)
class BdWaveform:
    """Level of a framed BD transmission as a function of time from frame start."""

    frame: BdFrame
    keys: KeyPair

    def __post_init__(self):
        bits = np.asarray(self.frame.bits, dtype=np.int8)
        freqs = np.where(bits == 1, self.keys.f1, self.keys.f0)
        object.__setattr__(self, "_freqs", freqs)

    @property
    def duration(self) -> float:
        return self.frame.airtime

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        t_bc = self.frame.symbol_duration
        n = self.frame.n_symbols
        if n == 0:
            out = np.zeros(t_arr.shape, dtype=np.int8)
        else:
            m = np.floor(t_arr / t_bc).astype(np.int64)
            active = (t_arr >= 0) & (m >= 0) & (m < n)
            m_c = np.clip(m, 0, n - 1)
            local = t_arr - m_c * t_bc
            lvl = np.mod(local * self._freqs[m_c], 1.0) < 0.5
            out = (active & lvl).astype(np.int8)
        if out.ndim == 0:
            return int(out)
        return out


def frame_waveform(frame: BdFrame, keys: KeyPair) -> BdWaveform:
    return BdWaveform(frame, keys)


def symbol_spectrum(f, bit, keys: KeyPair, t_bc, l_max=51):
    """Truncated harmonic series for the Fourier transform of one BD symbol.

    ``(t_bc/2) * sum_{|l|<=l_max} sinc(l/2) * sinc((f - l*f_k) * t_bc)`` with the
    normalised sinc. The series omits the per-harmonic phase of the wave, so it
    describes magnitudes at the harmonics; truncation error is O(1/l_max).
    """
    if l_max < 1:
        raise ValueError("l_max must be >= 1")
    f_k = keys.key(bit)
    f_arr = np.asarray(f, dtype=float)
    l = np.arange(-l_max, l_max + 1)
    terms = np.sinc(l / 2.0) * np.sinc((f_arr[..., None] - l * f_k) * t_bc)
    out = (t_bc / 2.0) * terms.sum(axis=-1).astype(complex)
    if out.ndim == 0:
        return complex(out)
    return out
