"""Monte Carlo trials, BER sweeps, offline trace decoding and result files."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .channel import (
    make_path_gains,
    noise_var_for_snr,
    observe_and_estimate,
    read_tap_series,
    sample_instants,
)
from .config import SystemConfig, load_json
from .errors import ConfigError
from .receiver import DETECTORS, DecodeResult, decode, decode_frames
from .waveforms import encode_frame, frame_waveform

log = logging.getLogger(__name__)

BER_CSV_HEADER = ("snr_db", "detector", "bits_sent", "bit_errors", "ber", "ci_lo", "ci_hi")


@dataclass(frozen=True)
class TrialResult:
    bits_sent: int
    bit_errors: int
    accepted: bool


@dataclass(frozen=True)
class SweepSpec:
    snr_points_db: tuple
    snr_axis: str = "snr1"
    trials_high_ber: int = 10_000
    trials_low_ber: int = 100_000
    ber_switch_threshold: float = 0.01
    detectors: tuple = DETECTORS
    base_config: SystemConfig = field(default_factory=SystemConfig)
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        pts = tuple(float(p) for p in self.snr_points_db)
        if not pts:
            raise ConfigError("snr_points_db must be non-empty")
        if list(pts) != sorted(pts):
            raise ConfigError("snr_points_db must be sorted")
        object.__setattr__(self, "snr_points_db", pts)
        object.__setattr__(self, "detectors", tuple(self.detectors))
        if self.snr_axis not in ("snr1", "snr2"):
            raise ConfigError("snr_axis must be 'snr1' or 'snr2'")
        if self.trials_high_ber < 1 or self.trials_low_ber < 1:
            raise ConfigError("trial counts must be >= 1")
        bad = set(self.detectors) - set(DETECTORS)
        if bad or not self.detectors:
            raise ConfigError(f"detectors must be a non-empty subset of {DETECTORS}")
        if isinstance(self.base_config, dict):
            object.__setattr__(self, "base_config", SystemConfig.from_dict(self.base_config))

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        d = dict(d)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown SweepSpec fields: {sorted(unknown)}")
        if "base_config" in d:
            d["base_config"] = SystemConfig.from_dict(d["base_config"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "SweepSpec":
        return cls.from_dict(load_json(path))


@dataclass(frozen=True)
class BerRow:
    snr_db: float
    detector: str
    bits_sent: int
    bit_errors: int
    ber: float
    ci_lo: float
    ci_hi: float
    trials: int = 0
    packets_rejected: int = 0
    bits_erased: int = 0

    @property
    def erasure_rate(self) -> float:
        total = self.bits_sent + self.bits_erased
        return self.bits_erased / total if total else 0.0


@dataclass(frozen=True)
class BerTable:
    rows: tuple

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def get(self, snr_db, detector) -> BerRow:
        for r in self.rows:
            if r.detector == detector and math.isclose(r.snr_db, snr_db):
                return r
        raise KeyError((snr_db, detector))


def wilson_interval(errors, n, confidence=0.95):
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    z = stats.norm.ppf(0.5 + confidence / 2)
    p = errors / n
    den = 1 + z**2 / n
    centre = (p + z**2 / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / den
    return max(0.0, float(centre - half)), min(1.0, float(centre + half))


def trial_seed(master_seed, snr_index, detector, trial_index) -> np.random.SeedSequence:
    """Stable per-trial seed: SeedSequence over the integer tuple."""
    det = DETECTORS.index(detector) if isinstance(detector, str) else int(detector)
    return np.random.SeedSequence([int(master_seed), int(snr_index), det, int(trial_index)])


def simulate_trace(config: SystemConfig, rng, payload=None):
    """One frame through the channel, preceded by a random idle gap.

    Returns ``(series, payload, offset)`` where ``offset`` is the index of the
    first CRS instant at or after the frame start.
    """
    rng = np.random.default_rng(rng)
    if payload is None:
        payload = rng.integers(0, 2, config.payload_bits)
    frame = encode_frame(payload, config)
    wave = frame_waveform(frame, config.keys)
    # idle gap in [sleep/2, sleep): past the filter warm-up, unknown to the receiver
    lead = config.sleep_duration * (0.5 + 0.5 * rng.random())
    n_slots = math.ceil((lead + wave.duration) / config.t_slot)
    instants = sample_instants(n_slots, config)
    gains = make_path_gains(config, rng, n_blocks=_n_blocks(config, instants[-1]))
    series = observe_and_estimate(gains, wave, config, rng, instants=instants, frame_start=lead)
    offset = int(np.searchsorted(instants, lead))
    return series, tuple(int(b) for b in payload), offset


def _n_blocks(config, duration):
    if config.coherence_time is None:
        return 1
    return int(duration // config.coherence_time) + 1


def run_trial(config: SystemConfig, seed, detector="coherent") -> TrialResult:
    """Deterministic in ``(config, seed, detector)``. Rejected packets count no errors."""
    rng = np.random.default_rng(seed)
    series, payload, _ = simulate_trace(config, rng)
    result = decode(series, config, detector)
    n = len(payload)
    if not result.accepted:
        return TrialResult(n, 0, False)
    errors = sum(int(a != b) for a, b in zip(result.payload_bits, payload))
    return TrialResult(n, errors, True)


def _run_batch(args):
    config, master_seed, snr_index, detector, first, count = args
    sent = errs = rejected = erased = 0
    for i in range(first, first + count):
        r = run_trial(config, trial_seed(master_seed, snr_index, detector, i), detector)
        if r.accepted:
            sent += r.bits_sent
            errs += r.bit_errors
        else:
            rejected += 1
            erased += r.bits_sent
    return sent, errs, rejected, erased


def _run_trials(config, spec, snr_index, detector, first, count, pool):
    chunk = max(1, math.ceil(count / (4 * max(1, spec.workers))))
    jobs = [
        (config, spec.master_seed, snr_index, detector, s, min(chunk, first + count - s))
        for s in range(first, first + count, chunk)
    ]
    parts = pool.map(_run_batch, jobs) if pool is not None else map(_run_batch, jobs)
    return tuple(int(x) for x in np.sum(np.array(list(parts), dtype=np.int64), axis=0))


def run_ber_sweep(spec: SweepSpec) -> BerTable:
    """BER per (SNR point, detector), extending low-BER points to ``trials_low_ber``.

    BER counts only payloads of accepted packets; rejected packets are erasures.
    Results do not depend on ``spec.workers``.
    """
    pool = ProcessPoolExecutor(spec.workers) if spec.workers > 1 else None
    rows = []
    try:
        for si, snr in enumerate(spec.snr_points_db):
            nv = noise_var_for_snr(spec.base_config, snr, spec.snr_axis)
            config = spec.base_config.replace(noise_var=nv)
            for det in spec.detectors:
                n = spec.trials_high_ber
                sent, errs, rej, erased = _run_trials(config, spec, si, det, 0, n, pool)
                ber = errs / sent if sent else 0.5
                if ber <= spec.ber_switch_threshold and spec.trials_low_ber > n:
                    more = _run_trials(config, spec, si, det, n, spec.trials_low_ber - n, pool)
                    sent, errs, rej, erased = (a + b for a, b in zip((sent, errs, rej, erased), more))
                    n = spec.trials_low_ber
                ber = errs / sent if sent else 0.5
                lo, hi = wilson_interval(errs, sent)
                log.info("snr=%g %s: %d/%d ber=%.3g rejected=%d", snr, det, errs, sent, ber, rej)
                rows.append(BerRow(snr, det, sent, errs, ber, lo, hi, n, rej, erased))
    finally:
        if pool is not None:
            pool.shutdown()
    return BerTable(tuple(rows))


def decode_trace(path, config: SystemConfig, detector="coherent") -> list:
    """Decode every frame found in a ``t_seconds,re,im`` trace file."""
    series = read_tap_series(path, nominal_rate=config.sample_rate)
    if len(series) == 0:
        return []
    return decode_frames(series, config, detector)


def _rows_for(results):
    if isinstance(results, BerTable):
        return list(BER_CSV_HEADER), [
            [r.snr_db, r.detector, r.bits_sent, r.bit_errors, r.ber, r.ci_lo, r.ci_hi]
            for r in results
        ]
    raise TypeError(f"no CSV layout for {type(results).__name__}")


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def to_jsonable(results):
    if isinstance(results, BerTable):
        return {"rows": [dataclasses.asdict(r) for r in results]}
    if isinstance(results, DecodeResult):
        return results.to_dict()
    if isinstance(results, (list, tuple)):
        return [to_jsonable(r) for r in results]
    if dataclasses.is_dataclass(results):
        return dataclasses.asdict(results)
    return results


def emit(results, path, fmt=None):
    """Write results as CSV or JSON (format from ``fmt`` or the file suffix).

    AliasTable objects use their own ``freq_hz,weight_re,weight_im,origin``
    layout. Floats are written with 17 significant digits.
    """
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower() or "json"
    try:
        if fmt == "csv":
            if hasattr(results, "to_csv"):
                results.to_csv(path)
                return
            header, rows = _rows_for(results)
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
            path.write_text(buf.getvalue())
        elif fmt == "json":
            path.write_text(json.dumps(to_jsonable(results), indent=2) + "\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def read_ber_csv(path) -> BerTable:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != BER_CSV_HEADER:
        raise ValueError(f"{path}: missing BerTable header")
    out = []
    for r in rows[1:]:
        out.append(
            BerRow(float(r[0]), r[1], int(r[2]), int(r[3]), float(r[4]), float(r[5]), float(r[6]))
        )
    return BerTable(tuple(out))
