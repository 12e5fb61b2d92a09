"""Backscatter FSK receiver working on the first-tap channel estimates.

Pipeline: tap power -> band-pass at each key -> per-symbol energy or coherent
decision -> Barker header correlation -> packet accept/reject. Samples are
treated as uniform at the nominal 4 kHz rate; the CRS irregularity is ignored.
"""

from __future__ import annotations

import json
from functools import lru_cache
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal

from .channel import TapSeries
from .config import KeyPair, SystemConfig
from .waveforms import SYNC_HEADER, BdFrame, frame_waveform

DETECTORS = ("energy", "coherent")
HEADER_PM = 2 * np.asarray(SYNC_HEADER, dtype=float) - 1


@dataclass(frozen=True)
class FilterSpec:
    center: float
    bandwidth: float = 200.0
    taps: int = 257

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.center - self.bandwidth / 2 <= 0:
            raise ValueError("lower band edge must be above DC")
        if self.taps < 31 or self.taps % 2 == 0:
            raise ValueError("taps must be odd and >= 31")


@dataclass(frozen=True)
class DecodeResult:
    sync_offset: int | None
    header_errors: int
    payload_bits: tuple
    accepted: bool
    soft_metrics: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["payload_bits"] = list(self.payload_bits)
        d["soft_metrics"] = [float(s) for s in self.soft_metrics]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d) -> "DecodeResult":
        return cls(
            d["sync_offset"],
            int(d["header_errors"]),
            tuple(d["payload_bits"]),
            bool(d["accepted"]),
            tuple(d["soft_metrics"]),
        )


def tap_power(series) -> np.ndarray:
    """|h0|^2 per sample, indexed on the nominal uniform grid."""
    values = series.values if isinstance(series, TapSeries) else np.asarray(series)
    if values.size == 0:
        raise ValueError("empty series")
    return np.abs(values) ** 2


def design_bandpass(spec: FilterSpec, fs) -> np.ndarray:
    """Hamming-windowed sinc band-pass, -6 dB at center +- bandwidth/2, unity at center."""
    return _design_bandpass(spec, float(fs)).copy()


@lru_cache(maxsize=64)
def _design_bandpass(spec, fs):
    lo = spec.center - spec.bandwidth / 2
    hi = spec.center + spec.bandwidth / 2
    if hi >= fs / 2:
        raise ValueError(f"upper band edge {hi} Hz violates Nyquist for fs={fs} Hz")
    fir = signal.firwin(spec.taps, [lo, hi], window="hamming", pass_zero=False, scale=True, fs=fs)
    return 0.5 * (fir + fir[::-1])  # exact linear phase despite round-off


def frequency_response(fir, freqs, fs):
    """Direct DTFT sum of the zero-phase-aligned FIR at ``freqs``."""
    fir = np.asarray(fir)
    n = np.arange(fir.size) - (fir.size - 1) / 2
    return np.exp(-2j * np.pi * np.outer(np.atleast_1d(freqs), n) / fs) @ fir


def warmup_length(fir) -> int:
    return (len(fir) - 1) // 2


def filter_series(y, fir) -> np.ndarray:
    """Delay-compensated convolution; the half-length edges are zeroed as warm-up."""
    y = np.asarray(y, dtype=float)
    fir = np.asarray(fir, dtype=float)
    if y.size <= fir.size:
        raise ValueError("series must be longer than the filter")
    out = signal.oaconvolve(y, fir, mode="same")
    w = warmup_length(fir)
    out[:w] = 0.0
    out[-w:] = 0.0
    return out


def _log_ratio(p1, p0):
    with np.errstate(divide="ignore", invalid="ignore"):
        soft = np.log(p1) - np.log(p0)
    soft = np.where((p1 == 0) & (p0 == 0), 0.0, soft)
    return soft


def demod_energy(y_f0, y_f1):
    """Bit 1 iff the f1 branch carries more mean power; soft = log power ratio."""
    y_f0, y_f1 = np.asarray(y_f0), np.asarray(y_f1)
    if y_f0.size == 0 or y_f1.size == 0:
        raise ValueError("empty window")
    p0 = np.mean(np.abs(y_f0) ** 2)
    p1 = np.mean(np.abs(y_f1) ** 2)
    return int(p1 > p0), float(_log_ratio(p1, p0))


def demod_coherent(y_f0, y_f1, keys: KeyPair, fs):
    """Mix each branch to baseband at its key and compare |mean|^2."""
    y_f0, y_f1 = np.asarray(y_f0), np.asarray(y_f1)
    if y_f0.size == 0 or y_f1.size == 0:
        raise ValueError("empty window")
    i0 = np.arange(y_f0.size)
    i1 = np.arange(y_f1.size)
    p0 = abs(np.mean(y_f0 * np.exp(-2j * np.pi * keys.f0 * i0 / fs))) ** 2
    p1 = abs(np.mean(y_f1 * np.exp(-2j * np.pi * keys.f1 * i1 / fs))) ** 2
    return int(p1 > p0), float(_log_ratio(p1, p0))


def synchronize(decisions, threshold=14, step=1, start=0, stop=None):
    """Correlate the +-1 mapped sync header against hard decisions.

    ``decisions[s]`` is the bit decided for the window starting at ``s``; header
    bit j of a frame starting at s is read at ``s + j*step``. Returns
    ``(offsets, scores)`` with score >= threshold, best first (ties: earliest).
    """
    d = 2 * np.asarray(decisions, dtype=float) - 1
    span = (len(HEADER_PM) - 1) * step
    last = d.size - span - 1
    if stop is not None:
        last = min(last, stop - 1)
    if last < start:
        return np.empty(0, dtype=np.int64), np.empty(0)
    offsets = np.arange(start, last + 1)
    scores = np.zeros(offsets.size)
    for j, b in enumerate(HEADER_PM):
        scores += b * d[offsets + j * step]
    keep = scores >= threshold
    offsets, scores = offsets[keep], scores[keep]
    order = np.lexsort((offsets, -scores))
    return offsets[order], scores[order]


class _WindowStats:
    """Per-start-sample branch powers for every symbol-length window."""

    def __init__(self, y0, y1, keys, fs, spb, detector):
        if detector == "energy":
            a0, a1 = np.abs(y0) ** 2, np.abs(y1) ** 2
        elif detector == "coherent":
            i = np.arange(y0.size)
            a0 = y0 * np.exp(-2j * np.pi * keys.f0 * i / fs)
            a1 = y1 * np.exp(-2j * np.pi * keys.f1 * i / fs)
        else:
            raise ValueError(f"unknown detector {detector!r}")
        c0 = np.concatenate([[0], np.cumsum(a0)])
        c1 = np.concatenate([[0], np.cumsum(a1)])
        s0 = (c0[spb:] - c0[:-spb]) / spb
        s1 = (c1[spb:] - c1[:-spb]) / spb
        if detector == "coherent":
            s0, s1 = np.abs(s0) ** 2, np.abs(s1) ** 2
        # relative scale so cumsum round-off cannot flip an exact tie
        tol = 1e-12 * max(float(np.max(s0, initial=0)), float(np.max(s1, initial=0)))
        self.p0 = np.where(s0 < tol, 0.0, s0)
        self.p1 = np.where(s1 < tol, 0.0, s1)
        self.bits = (self.p1 > self.p0).astype(np.int8)
        self.soft = _log_ratio(self.p1, self.p0)


def _front_end(series, config: SystemConfig):
    fs = series.nominal_rate if isinstance(series, TapSeries) else config.sample_rate
    y = tap_power(series)
    y = y - y.mean()  # direct-path power is DC; removing it exactly spares the filters' stopband
    firs = [
        design_bandpass(FilterSpec(f, config.bpf_bandwidth, config.bpf_taps), fs)
        for f in (config.keys.f0, config.keys.f1)
    ]
    return fs, filter_series(y, firs[0]), filter_series(y, firs[1])


def _extract(y0, y1, offset, n_sym, spb, keys, fs, detector):
    bits, soft = [], []
    for m in range(n_sym):
        a, b = offset + m * spb, offset + (m + 1) * spb
        if b > y0.size:
            break
        if detector == "energy":
            bit, s = demod_energy(y0[a:b], y1[a:b])
        else:
            bit, s = demod_coherent(y0[a:b], y1[a:b], keys, fs)
        bits.append(bit)
        soft.append(s)
    return bits, soft


TIMING_PHASES = 8


def header_template(config: SystemConfig, fs, lag=0.0, gaps=None) -> np.ndarray:
    """Zero-mean 0/1 sync-header waveform sampled from a candidate offset.

    ``gaps`` are the two alternating sample spacings following the candidate
    (nominal uniform grid when omitted) and ``lag`` is how far the frame
    started before that first sample.
    """
    gaps = (1 / fs, 1 / fs) if gaps is None else gaps
    return _header_template(config.keys, config.t_bc, config.samples_per_symbol, float(lag), tuple(gaps)).copy()


@lru_cache(maxsize=256)
def _header_template(keys, t_bc, spb, lag, gaps):
    n = len(SYNC_HEADER) * spb
    steps = np.tile(gaps, n // 2 + 1)[: n - 1]
    rel = np.concatenate([[0.0], np.cumsum(steps)])
    wave = frame_waveform(BdFrame(SYNC_HEADER, (), t_bc, 0.0), keys)
    tmpl = wave(rel + lag).astype(float)
    tmpl -= tmpl.mean()
    return tmpl / np.linalg.norm(tmpl)


def _alternating_gaps(instants, o):
    """Spacings (t[o+1]-t[o], t[o+2]-t[o+1]) and the gap just before t[o]."""
    d = np.diff(instants)
    g1, g2 = d[o], d[o + 1]
    return (round(float(g1), 12), round(float(g2), 12)), float(d[o - 1] if o > 0 else g2)


def _fine_timing(series, y, candidates, config, fs):
    """Pick the candidate (and sub-sample phase) whose window best matches the header.

    For each candidate parity, templates are built on the series' own sampling
    pattern for ``TIMING_PHASES`` start phases inside the gap before the
    candidate sample. The score is the normalised zero-mean correlation, so
    the direct-path power cancels; the sign of the backscatter term is
    unknown, hence the absolute value.
    """
    n = len(SYNC_HEADER) * config.samples_per_symbol
    candidates = candidates[candidates + n + 2 <= y.size]
    if candidates.size == 0:
        return None
    if candidates.size == 1:
        return int(candidates[0])
    instants = series.instants if isinstance(series, TapSeries) else np.arange(y.size) / fs
    lo, hi = int(candidates.min()), int(candidates.max())
    seg = y[lo : hi + n]
    best, best_score = int(candidates[0]), -1.0
    for parity in (0, 1):
        cand = candidates[candidates % 2 == parity]
        if cand.size == 0:
            continue
        gaps, before = _alternating_gaps(instants, int(cand[0]))
        lags = (1 - (np.arange(TIMING_PHASES) + 0.5) / TIMING_PHASES) * before
        bank = np.stack([header_template(config, fs, lag, gaps) for lag in lags])
        corr = signal.fftconvolve(seg[None, :], bank[:, ::-1], mode="valid", axes=1)
        score = np.abs(corr[:, cand - lo]).max(axis=0)
        i = int(np.argmax(score))
        if score[i] > best_score:
            best, best_score = int(cand[i]), float(score[i])
    return best


def _decode_at(y0, y1, offset, config, fs, detector):
    spb = config.samples_per_symbol
    n_hdr = len(SYNC_HEADER)
    n_sym = n_hdr + config.payload_bits
    bits, soft = _extract(y0, y1, offset, n_sym, spb, config.keys, fs, detector)
    header = bits[:n_hdr]
    errors = sum(int(a != b) for a, b in zip(header, SYNC_HEADER)) + (n_hdr - len(header))
    complete = len(bits) == n_sym
    accepted = complete and errors <= config.max_header_errors
    return DecodeResult(offset, errors, tuple(bits[n_hdr:]), accepted, tuple(soft[n_hdr:]))


def _sync_failure():
    return DecodeResult(None, len(SYNC_HEADER), (), False, ())


def decode(series, config: SystemConfig, detector="coherent") -> DecodeResult:
    """Decode the best-synchronised frame in ``series``."""
    results = decode_frames(series, config, detector, max_frames=1)
    return results[0] if results else _sync_failure()


def decode_frames(series, config: SystemConfig, detector="coherent", max_frames=None):
    """Decode successive frames; each search resumes after the previous frame."""
    if detector not in DETECTORS:
        raise ValueError(f"detector must be one of {DETECTORS}")
    spb = config.samples_per_symbol
    n_sym = len(SYNC_HEADER) + config.payload_bits
    if len(series) <= config.bpf_taps or len(series) < spb * len(SYNC_HEADER):
        return []
    fs, y0, y1 = _front_end(series, config)
    y = tap_power(series)
    stats = _WindowStats(y0, y1, config.keys, fs, spb, detector)
    results = []
    pos = 0
    while max_frames is None or len(results) < max_frames:
        offsets, scores = synchronize(stats.bits, config.sync_threshold, step=spb, start=pos)
        if offsets.size == 0:
            break
        top = offsets[scores == scores[0]]
        # earliest cluster only: later frames may tie at the same score
        top = top[top <= top.min() + spb]
        best = _fine_timing(series, y, top, config, fs)
        if best is None:
            break
        results.append(_decode_at(y0, y1, best, config, fs, detector))
        pos = best + n_sym * spb
    return results

