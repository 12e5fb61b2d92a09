"""Spectral lines of a square-wave key seen through the irregular CRS sampling train.

The sampling train ``s(t) = delta(t) + delta(t - T_slot/2 - dT)`` (period T_slot)
has Fourier coefficients

    s_l = (2/T_slot) [l even] + eps_l / T_slot,
    eps_l = (-1)^l (exp(-2j pi dT l / T_slot) - 1),

so a line of the key at frequency F reappears at F + l/T_slot weighted by s_l.
"""

from __future__ import annotations

import csv
from fractions import Fraction
from dataclasses import dataclass, field

import numpy as np

from .config import KEY_BAND, SystemConfig

ORIGINS = ("harmonic", "regular-replica", "irregular-replica")
ALIAS_CSV_HEADER = ("freq_hz", "weight_re", "weight_im", "origin")


def sampling_coeff(l, delta_t, t_slot):
    """Fourier-series coefficient s_l of the two-impulse-per-slot sampling train."""
    if t_slot <= 0:
        raise ValueError("t_slot must be positive")
    l = np.asarray(l)
    sign = np.where(l % 2 == 0, 1.0, -1.0)
    out = (1.0 + sign * np.exp(-2j * np.pi * (delta_t / t_slot) * l)) / t_slot
    return complex(out) if out.ndim == 0 else out


def epsilon(l, delta_t, t_slot):
    """Irregular-sampling alias weight eps_l; zero for l = 0 or delta_t = 0."""
    if t_slot <= 0:
        raise ValueError("t_slot must be positive")
    l = np.asarray(l)
    sign = np.where(l % 2 == 0, 1.0, -1.0)
    out = sign * (np.exp(-2j * np.pi * (delta_t / t_slot) * l) - 1.0)
    return complex(out) if out.ndim == 0 else out


def square_wave_coeff(h):
    """Complex Fourier coefficient of the 0/1 square wave (rising edge at t=0)."""
    h = np.asarray(h)
    out = 0.5 * np.sinc(h / 2.0) * np.exp(-0.5j * np.pi * h)
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AliasLine:
    freq: float
    weight: complex
    origin: str


@dataclass(frozen=True)
class AliasTable:
    entries: tuple = field(default_factory=tuple)
    f_key: float = 0.0

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    @property
    def freqs(self):
        return np.array([e.freq for e in self.entries])

    @property
    def weights(self):
        return np.array([e.weight for e in self.entries], dtype=complex)

    def strongest(self, n, exclude_dc=False):
        lines = [e for e in self.entries if not (exclude_dc and e.freq == 0)]
        return sorted(lines, key=lambda e: -abs(e.weight))[:n]

    def main_line(self):
        """Line at the key frequency itself."""
        return min(self.entries, key=lambda e: abs(e.freq - self.f_key))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(ALIAS_CSV_HEADER)
            for e in self.entries:
                w.writerow(
                    (
                        format(e.freq, ".17g"),
                        format(e.weight.real, ".17g"),
                        format(e.weight.imag, ".17g"),
                        e.origin,
                    )
                )

    @classmethod
    def from_csv(cls, path, f_key=0.0):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(rows[0]) != ALIAS_CSV_HEADER:
            raise ValueError(f"{path}: missing AliasTable header")
        entries = tuple(
            AliasLine(float(r[0]), complex(float(r[1]), float(r[2])), r[3]) for r in rows[1:] if r
        )
        return cls(entries, f_key)


def _midpoint_square(f_key, t):
    """0/1 square wave that takes 1/2 exactly on an edge, as its Fourier series does."""
    ph = np.mod(np.asarray(t) * f_key, 1.0)
    out = (ph < 0.5).astype(float)
    edge = np.isclose(ph, 0.0, atol=1e-9) | np.isclose(ph, 0.5, atol=1e-9) | np.isclose(ph, 1.0, atol=1e-9)
    out[edge] = 0.5
    return out


def _lattice_period(f_key, t_slot, max_den=10_000):
    """Slots after which the sampled wave repeats, or None if the key is not commensurate."""
    x = f_key * t_slot
    frac = Fraction(x).limit_denominator(max_den)
    if abs(float(frac) - x) > 1e-12 * max(1.0, x):
        return None
    return frac.denominator


def exact_line_weight(freq, f_key, config: SystemConfig, t0=0.0, n_slots=None):
    """Infinite-harmonic line weight at ``freq`` for a commensurate key.

    When the sampled wave repeats every ``n_slots`` slots, summing every harmonic
    and replica that lands on ``freq`` collapses to an average over one lattice
    period of the wave, read with its Fourier-series value (1/2) on an edge.
    """
    t_slot = config.t_slot
    if n_slots is None:
        n_slots = _lattice_period(f_key, t_slot)
        if n_slots is None:
            raise ValueError(f"{f_key} Hz is not commensurate with the slot rate")
    k = np.arange(n_slots) * t_slot
    t = np.concatenate([k, k + t_slot / 2 + config.delta_t])
    x = _midpoint_square(f_key, t - t0)
    return complex(x @ np.exp(-2j * np.pi * freq * t)) / (n_slots * t_slot)


def predict_aliases(
    f_key, config: SystemConfig, l_harm_max=999, l_rep_max=None, t0=0.0, merge_tol=1e-6, exact=True
) -> AliasTable:
    """Predict the line spectrum in [0, 1/T_slot] of a sampled square wave at ``f_key``.

    Harmonic h (odd, plus DC) of the wave ``square_wave(f_key, t - t0)`` has
    coefficient ``c_h exp(-2j pi h f_key t0)`` and is replicated by every shift
    r/T_slot. Each (h, r) contributes a regular part ``c_h * 2/T_slot`` (even r
    only) and an irregular part ``c_h * eps_r / T_slot``. Contributions within
    ``merge_tol`` Hz are summed coherently; a merged line keeps the origin of
    its largest part. Negative-frequency lines are the conjugate mirror of the
    listed ones.

    ``l_rep_max=None`` picks the smallest replica range that brings every kept
    harmonic into the band. The truncated harmonic sum converges like
    1/(l_harm_max * d), with d the distance (in periods) from the nearest
    sample phase to a wave edge, so it can be far off when a sample grazes an
    edge. With ``exact=True`` and a key commensurate with the slot rate, line
    weights are replaced by their infinite-sum value (see
    :func:`exact_line_weight`); the truncated sum still decides which lines
    exist and their origin labels.
    """
    if f_key <= 0:
        raise ValueError("f_key must be positive")
    t_slot, dt = config.t_slot, config.delta_t
    f_rep = 1.0 / t_slot
    f_top = config.sample_rate / 2
    if l_rep_max is None:
        l_rep_max = int(np.ceil(l_harm_max * f_key / f_rep)) + 1
    h = np.arange(-l_harm_max, l_harm_max + 1)
    h = h[(h == 0) | (h % 2 != 0)]
    r = np.arange(-l_rep_max, l_rep_max + 1)
    hh, rr = np.meshgrid(h, r, indexing="ij")
    f = hh * f_key + rr * f_rep
    keep = (f >= -merge_tol) & (f <= f_top + merge_tol)
    hh, rr, f = hh[keep], rr[keep], np.clip(f[keep], 0.0, f_top)
    c = square_wave_coeff(hh) * np.exp(-2j * np.pi * hh * f_key * t0)
    eps = epsilon(rr, dt, t_slot)

    even = rr % 2 == 0
    freqs = np.concatenate([f[even], f])
    weights = np.concatenate([c[even] * 2.0 / t_slot, c * eps / t_slot])
    codes = np.concatenate([np.where(rr[even] == 0, 0, 1), np.full(f.size, 2)])
    nz = weights != 0
    freqs, weights, codes = freqs[nz], weights[nz], codes[nz]

    order = np.argsort(freqs, kind="stable")
    freqs, weights, codes = freqs[order], weights[order], codes[order]
    # group by proximity to the first member of each run
    starts = [0]
    for i in range(1, freqs.size):
        if freqs[i] - freqs[starts[-1]] > merge_tol:
            starts.append(i)
    bounds = starts + [freqs.size]
    merged = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        w = weights[a:b].sum()
        if abs(w) <= 1e-12 / t_slot:
            continue
        mags = np.zeros(3)
        np.add.at(mags, codes[a:b], np.abs(weights[a:b]))
        merged.append(AliasLine(float(freqs[a:b].mean()), complex(w), ORIGINS[int(mags.argmax())]))
    n_slots = _lattice_period(f_key, t_slot) if exact else None
    if n_slots is not None:
        merged = [
            AliasLine(e.freq, exact_line_weight(e.freq, f_key, config, t0, n_slots), e.origin) for e in merged
        ]
        merged = [e for e in merged if abs(e.weight) > 1e-9 / t_slot]
    return AliasTable(tuple(merged), float(f_key))


def crs_spectrum(values, config: SystemConfig):
    """Spectrum of samples taken on the CRS grid, evaluated at their true instants.

    ``values[0::2]`` are taken at k*T_slot and ``values[1::2]`` at
    k*T_slot + T_slot/2 + dT. Returns ``(freqs, spectrum)`` over
    [0, 1/T_slot] with bin spacing 1/duration. The sum is normalised by the
    record duration so a line of weight w shows up with magnitude ~|w|.
    """
    v = np.asarray(values, dtype=complex)
    n_slots = v.size // 2
    v = v[: 2 * n_slots]
    duration = n_slots * config.t_slot
    ev = np.fft.fft(v[0::2])
    od = np.fft.fft(v[1::2])
    df = 1.0 / duration
    n_bins = int(round((1.0 / config.t_slot) / df))
    k = np.arange(n_bins + 1)
    freqs = k * df
    shift = np.exp(-2j * np.pi * freqs * (config.t_slot / 2 + config.delta_t))
    spec = (ev[k % n_slots] + shift * od[k % n_slots]) / duration
    return freqs, spec


def nonuniform_dft(instants, values, freqs, chunk=512):
    """Direct sum ``sum_m v_m exp(-2j pi f t_m)``; slow reference for :func:`crs_spectrum`."""
    t = np.asarray(instants, dtype=float)
    v = np.asarray(values, dtype=complex)
    freqs = np.asarray(freqs, dtype=float)
    out = np.empty(freqs.size, dtype=complex)
    for i in range(0, freqs.size, chunk):
        f = freqs[i : i + chunk]
        out[i : i + chunk] = np.exp(-2j * np.pi * np.outer(f, t)) @ v
    return out


@dataclass(frozen=True)
class KeyReport:
    out_of_band: tuple
    integer_ratio: bool
    cross_aliases: tuple  # (source key Hz, alias freq Hz, relative magnitude, victim key Hz)

    @property
    def ok(self) -> bool:
        return not (self.out_of_band or self.integer_ratio or self.cross_aliases)


def validate_keys(
    keys, config: SystemConfig, guard_bw=None, band=KEY_BAND, rel_threshold=0.05
) -> KeyReport:
    """Check a key pair for band, ratio and cross-alias problems.

    ``keys`` is a KeyPair or an ``(f0, f1)`` tuple. ``guard_bw`` defaults to
    the symbol rate 1/T_BC.
    """
    f0, f1 = (keys.f0, keys.f1) if hasattr(keys, "f0") else (float(keys[0]), float(keys[1]))
    if guard_bw is None:
        guard_bw = 1.0 / config.t_bc
    if guard_bw <= 0:
        raise ValueError("guard_bw must be positive")
    lo, hi = band
    oob = tuple(name for name, f in (("f0", f0), ("f1", f1)) if not lo <= f <= hi)
    ratio = f1 / f0
    integer_ratio = abs(ratio - round(ratio)) < 1e-9
    hits = []
    for src, victim in ((f0, f1), (f1, f0)):
        table = predict_aliases(src, config)
        main = abs(table.main_line().weight)
        for e in table:
            rel = abs(e.weight) / main
            if rel > rel_threshold and abs(e.freq - victim) < guard_bw:
                hits.append((src, e.freq, rel, victim))
    return KeyReport(oob, integer_ratio, tuple(hits))
