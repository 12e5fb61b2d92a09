"""Complex-cepstrum separation of backscatter devices from a frequency-domain channel.

A device k whose path is delayed by dtau_k relative to the direct path shows up
as a ripple exp(-i w_n dtau_k) riding on the direct response. After the complex
log, mean removal of the real part and linear detrending of the unwrapped
phase, the IDFT puts that ripple at quefrency bin q_k = N * df * dtau_k.

All array operations work along the last axis, so a stack of frames can be
processed in one call.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .errors import OutOfRegimeError, SingularInputError

LOGNOISE_COEFFS = (1.0, 1.0 / 2.0, 2.0 / 3.0, 3.0 / 2.0, 24.0 / 5.0)
FREQ_CSV_HEADER = ("n", "re", "im")
CEPSTRUM_CSV_HEADER = ("q", "re", "im")


@dataclass(frozen=True)
class DeviceGroundTruth:
    """Direct path (index 0) plus K devices.

    ``amplitudes`` and ``phases`` have K+1 entries; ``delay_offsets`` (seconds,
    relative to the direct path) and ``states`` have K.
    """

    amplitudes: tuple
    delay_offsets: tuple
    phases: tuple
    states: tuple
    tau0: float = 0.0

    def __post_init__(self):
        a = tuple(float(x) for x in self.amplitudes)
        k = len(a) - 1
        if k < 0:
            raise ValueError("need at least the direct-path amplitude")
        for name, n in (("delay_offsets", k), ("phases", k + 1), ("states", k)):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} must have {n} entries")
        if any(not 0 < x < a[0] for x in a[1:]):
            raise ValueError("need a_0 > a_k > 0")
        if any(s not in (0, 1) for s in self.states):
            raise ValueError("states must be 0/1")
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "delay_offsets", tuple(float(x) for x in self.delay_offsets))
        object.__setattr__(self, "phases", tuple(float(x) for x in self.phases))
        object.__setattr__(self, "states", tuple(int(x) for x in self.states))

    @property
    def n_devices(self) -> int:
        return len(self.amplitudes) - 1

    @property
    def ratios(self) -> np.ndarray:
        return np.asarray(self.amplitudes[1:]) / self.amplitudes[0]

    def bins(self, n, delta_f) -> np.ndarray:
        """q_k = N * df * dtau_k (not rounded)."""
        return n * delta_f * np.asarray(self.delay_offsets)

    def expected_peaks(self) -> np.ndarray:
        """First-order cepstral value at each device bin: (a_k/a_0) exp(-i dphi_k) x_k."""
        dphi = np.asarray(self.phases[1:]) - self.phases[0]
        return self.ratios * np.exp(-1j * dphi) * np.asarray(self.states)

    @classmethod
    def from_bins(cls, ratios, bins, n, delta_f, *, a0=1.0, phases=None, states=None, tau0=0.0):
        k = len(ratios)
        if len(set(bins)) != k:
            raise ValueError("device bins must be distinct")
        phases = (0.0,) * (k + 1) if phases is None else phases
        states = (1,) * k if states is None else states
        delays = tuple(q / (n * delta_f) for q in bins)
        return cls((a0,) + tuple(a0 * r for r in ratios), delays, phases, states, tau0)


@dataclass(frozen=True)
class FreqChannelFrame:
    H: np.ndarray
    delta_f: float
    noise_var: float = 0.0

    def __post_init__(self):
        h = np.asarray(self.H, dtype=complex)
        if h.ndim != 1 or h.size < 2:
            raise ValueError("H must be 1-D with N >= 2")
        if not np.all(np.isfinite(h)):
            raise ValueError("H must be finite")
        object.__setattr__(self, "H", h)

    @property
    def N(self) -> int:
        return self.H.size

    def to_csv(self, path):
        _write_indexed(path, FREQ_CSV_HEADER, self.H)

    @classmethod
    def from_csv(cls, path, delta_f, noise_var=0.0):
        return cls(_read_indexed(path, FREQ_CSV_HEADER), delta_f, noise_var)


@dataclass(frozen=True)
class CepstrumFrame:
    y: np.ndarray
    trend: tuple
    effective_snr: float = math.inf

    def to_csv(self, path):
        """``q,re,im`` rows plus a ``.json`` sidecar with beta0, beta1 and rho."""
        path = Path(path)
        if path.suffix == ".json":
            raise ValueError("cepstrum CSV path must not end in .json (sidecar clash)")
        _write_indexed(path, CEPSTRUM_CSV_HEADER, self.y)
        meta = {
            "beta0": float(self.trend[0]),
            "beta1": float(self.trend[1]),
            "rho": None if math.isinf(self.effective_snr) else float(self.effective_snr),
        }
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        y = _read_indexed(path, CEPSTRUM_CSV_HEADER)
        meta = json.loads(path.with_suffix(".json").read_text())
        rho = math.inf if meta["rho"] is None else meta["rho"]
        return cls(y, (meta["beta0"], meta["beta1"]), rho)


def _write_indexed(path, header, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, v in enumerate(values):
            w.writerow((i, format(v.real, ".17g"), format(v.imag, ".17g")))


def _read_indexed(path, header):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != header:
        raise ValueError(f"{path}: expected header {','.join(header)}")
    body = [r for r in rows[1:] if r]
    if [int(r[0]) for r in body] != list(range(len(body))):
        raise ValueError(f"{path}: indices must run 0..N-1")
    return np.array([complex(float(r[1]), float(r[2])) for r in body])


def noiseless_response(truth: DeviceGroundTruth, n, delta_f) -> np.ndarray:
    """Exact factored multi-device response on subcarriers 0..N-1."""
    w = 2 * np.pi * np.arange(n) * delta_f
    phi0 = truth.phases[0]
    ripple = np.ones(n, dtype=complex)
    for r, dtau, phi, x in zip(truth.ratios, truth.delay_offsets, truth.phases[1:], truth.states):
        ripple += r * np.exp(-1j * (w * dtau + (phi - phi0))) * x
    return truth.amplitudes[0] * np.exp(-1j * (w * truth.tau0 + phi0)) * ripple


def synthesize_channel(truth, n, delta_f, noise_var, rng=None, n_frames=None):
    """Noisy frequency-domain channel.

    Returns a FreqChannelFrame, or an ``(n_frames, N)`` array of independent
    noise draws over the same response when ``n_frames`` is given.
    """
    if n < 2:
        raise ValueError("N must be >= 2")
    if noise_var < 0:
        raise ValueError("noise_var must be >= 0")
    h = noiseless_response(truth, n, delta_f)
    shape = (n,) if n_frames is None else (n_frames, n)
    if noise_var > 0:
        rng = np.random.default_rng(rng)
        z = rng.standard_normal((2,) + shape) * math.sqrt(noise_var / 2)
        h = h + z[0] + 1j * z[1]
    else:
        h = np.broadcast_to(h, shape).copy()
    if n_frames is None:
        return FreqChannelFrame(h, delta_f, noise_var)
    return h


def complex_log(frame):
    """(L_I, L_Q): log-magnitude and phase unwrapped along the subcarrier axis."""
    h = frame.H if isinstance(frame, FreqChannelFrame) else np.asarray(frame, dtype=complex)
    if np.any(h == 0):
        raise SingularInputError("channel has a zero entry; log undefined")
    return np.log(np.abs(h)), np.unwrap(np.angle(h), axis=-1)


def lognoise_variance(gamma):
    """Five-term series for E|ln(1 + z/H)|^2 at linear SNR gamma > 1."""
    g = np.asarray(gamma, dtype=float)
    if np.any(~(g > 1)):
        raise OutOfRegimeError("series needs gamma > 1")
    inv = 1.0 / g
    out = sum(c * inv ** (k + 1) for k, c in enumerate(LOGNOISE_COEFFS))
    return float(out) if out.ndim == 0 else out


def remove_mean(l_i):
    l_i = np.asarray(l_i, dtype=float)
    if l_i.shape[-1] < 2:
        raise ValueError("need N >= 2")
    return l_i - l_i.mean(axis=-1, keepdims=True)


def detrend_linear(l_q):
    """OLS fit of ``beta0 + beta1*n``; returns (residual, beta0, beta1)."""
    l_q = np.asarray(l_q, dtype=float)
    n = l_q.shape[-1]
    if n < 3:
        raise ValueError("need N >= 3")
    idx = np.arange(n)
    nc = idx - idx.mean()
    beta1 = (l_q @ nc) / (nc @ nc)
    beta0 = l_q.mean(axis=-1) - beta1 * idx.mean()
    resid = l_q - np.expand_dims(beta0, -1) - np.expand_dims(beta1, -1) * idx
    return resid, beta0, beta1


def complex_cepstrum(y_i, y_q):
    """y[q] = (1/N) sum_n (Y_I + i Y_Q) exp(+2j pi q n / N)."""
    y_i, y_q = np.asarray(y_i), np.asarray(y_q)
    if y_i.shape != y_q.shape:
        raise ValueError("Y_I and Y_Q must have equal lengths")
    return np.fft.ifft(y_i + 1j * y_q, axis=-1)


def estimate_noise_map(frame, noise_var=None):
    """sigma_Xi^2[n] from the observed per-subcarrier SNR |H[n]|^2 / sigma_z^2."""
    h = frame.H if isinstance(frame, FreqChannelFrame) else np.asarray(frame)
    nv = frame.noise_var if noise_var is None else noise_var
    if nv <= 0:
        raise ValueError("noise variance must be positive")
    return lognoise_variance(np.abs(h) ** 2 / nv)


def effective_snr(noise_map):
    """rho = 1 / mean(sigma_Xi^2[n])."""
    s = np.asarray(noise_map, dtype=float)
    if np.any(~(s > 0)):
        raise ValueError("noise map must be positive")
    out = 1.0 / s.mean(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def process_frame(frame: FreqChannelFrame, rho=None) -> CepstrumFrame:
    """Full pipeline on one frame. ``rho`` defaults to the truth-free estimate."""
    l_i, l_q = complex_log(frame)
    y_q, b0, b1 = detrend_linear(l_q)
    y = complex_cepstrum(remove_mean(l_i), y_q)
    if rho is None:
        rho = effective_snr(estimate_noise_map(frame)) if frame.noise_var > 0 else math.inf
    return CepstrumFrame(y, (float(b0), float(b1)), rho)


def cepstrum_batch(h):
    """Complex cepstra of a stack of frames ``(..., N)``."""
    l_i, l_q = complex_log(np.asarray(h))
    return complex_cepstrum(remove_mean(l_i), detrend_linear(l_q)[0])


@dataclass(frozen=True)
class DeviceEstimate:
    q: int
    amplitude: complex
    gamma: float
    noise_var: float = field(default=0.0)


def detect_devices(y, candidate_bins, rho, n=None):
    """Read each candidate bin; per-frame SNR estimate is N*rho*|y[q]|^2.

    ``noise_var`` is the per-bin cepstral noise variance 1/(N rho).
    """
    y = np.asarray(y)
    n = y.shape[-1] if n is None else n
    bins = [int(q) for q in candidate_bins]
    if len(set(bins)) != len(bins):
        raise ValueError("candidate bins must be distinct")
    if any(not 1 <= q <= n - 1 for q in bins):
        raise ValueError("candidate bins must lie in [1, N-1]")
    sig = 1.0 / (n * rho) if rho > 0 else math.inf
    return [DeviceEstimate(q, complex(y[q]), float(n * rho * abs(y[q]) ** 2), sig) for q in bins]


def real_cepstrum_baseline(y_i, candidate_bins=(), rho=None):
    """IDFT of the mean-removed log-magnitude alone.

    Returns ``(y_real, estimates)``; a cosine ripple splits between q and N-q,
    so each bin carries half the amplitude and half the noise power of the
    complex cepstrum's real-part noise.
    """
    y_real = np.fft.ifft(np.asarray(y_i, dtype=float), axis=-1)
    if not candidate_bins or rho is None:
        return y_real, []
    n = y_real.shape[-1]
    # per-bin noise variance of the real-part-only cepstrum is 1/(2 N rho)
    est = [
        DeviceEstimate(int(q), complex(y_real[q]), float(2 * n * rho * abs(y_real[q]) ** 2), 1 / (2 * n * rho))
        for q in candidate_bins
    ]
    return y_real, est


def measured_gamma(samples):
    """|E y|^2 / Var y across frames (axis 0): SNR of a cepstral bin."""
    s = np.asarray(samples)
    return float(abs(s.mean()) ** 2 / s.var(ddof=1))


def noise_var_for_rho(truth, n, delta_f, rho):
    """sigma_z^2 that gives effective SNR ``rho`` on the noiseless response."""
    p = np.abs(noiseless_response(truth, n, delta_f)) ** 2
    hi = float(p.min()) * (1 - 1e-12)  # keeps every gamma > 1

    def excess(log_nv):
        return effective_snr(lognoise_variance(p / math.exp(log_nv))) - rho

    if excess(math.log(hi)) > 0:
        raise OutOfRegimeError(f"rho={rho} is below what the series regime allows")
    return math.exp(brentq(excess, math.log(hi) - 60, math.log(hi), xtol=1e-14))
