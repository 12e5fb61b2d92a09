import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ambc.channel import TapSeries, make_path_gains, observe_and_estimate, sample_instants
from ambc.config import KeyPair, SystemConfig
from ambc.harness import simulate_trace
from ambc.receiver import (
    HEADER_PM,
    _WindowStats,
    _front_end,
    DecodeResult,
    FilterSpec,
    decode,
    decode_frames,
    demod_coherent,
    demod_energy,
    design_bandpass,
    filter_series,
    frequency_response,
    synchronize,
    tap_power,
)
from ambc.waveforms import SYNC_HEADER, BdFrame, encode_frame, frame_waveform

CFG = SystemConfig(payload_bits=8)
FS = 4000.0
FIG5 = (1, 1, 0, 0, 1, 0, 1, 0)


def _db(x):
    return 20 * math.log10(abs(x))


def test_tap_power():
    assert tap_power(np.array([3 + 4j]))[0] == 25
    assert np.all(tap_power(np.zeros(5, complex)) == 0)
    with pytest.raises(ValueError):
        tap_power(np.array([], complex))


@pytest.mark.parametrize("center", [300.0, 650.0])
def test_bandpass_response(center):
    fir = design_bandpass(FilterSpec(center), FS)
    assert abs(_db(frequency_response(fir, center, FS)[0])) <= 0.5
    assert _db(frequency_response(fir, 0.0, FS)[0]) < -40
    for edge in (center - 100, center + 100):
        assert _db(frequency_response(fir, edge, FS)[0]) == pytest.approx(-6.0, abs=0.6)
    np.testing.assert_array_equal(fir, fir[::-1])


def test_bandpass_nyquist_and_spec_errors():
    with pytest.raises(ValueError):
        design_bandpass(FilterSpec(1950.0), FS)
    with pytest.raises(ValueError):
        FilterSpec(50.0)
    with pytest.raises(ValueError):
        FilterSpec(300.0, taps=256)


def test_filter_series_impulse_tone_dc():
    fir = design_bandpass(FilterSpec(300.0), FS)
    n = 2000
    imp = np.zeros(n)
    imp[1000] = 1.0
    out = filter_series(imp, fir)
    h = len(fir) // 2
    np.testing.assert_allclose(out[1000 - h : 1000 + h + 1], fir[::-1], atol=1e-15)
    tone = np.cos(2 * np.pi * 300.0 * np.arange(n) / FS)
    y = filter_series(tone, fir)[h:-h]
    assert _db(np.sqrt(2 * np.mean(y**2))) == pytest.approx(0.0, abs=0.5)
    dc = filter_series(np.ones(n), fir)
    assert np.max(np.abs(dc)) < 1e-2
    assert np.all(dc[:h] == 0) and np.all(dc[-h:] == 0)


def test_demod_energy():
    tone = np.cos(np.arange(160))
    assert demod_energy(tone, np.zeros(160))[0] == 0
    assert demod_energy(np.zeros(160), tone)[0] == 1
    assert demod_energy(np.zeros(4), np.zeros(4)) == (0, 0.0)
    with pytest.raises(ValueError):
        demod_energy([], [1.0])


def test_demod_coherent():
    keys = KeyPair()
    i = np.arange(160)
    y0 = np.cos(2 * np.pi * keys.f0 * i / FS)
    bit, _ = demod_coherent(y0, np.zeros(160), keys, FS)
    assert bit == 0
    p = abs(np.mean(y0 * np.exp(-2j * np.pi * keys.f0 * i / FS))) ** 2
    assert p == pytest.approx(0.25, abs=0.01)
    assert demod_coherent(np.zeros(8), np.zeros(8), keys, FS)[0] == 0
    y1 = np.cos(2 * np.pi * keys.f1 * i / FS)
    assert demod_coherent(np.zeros(160), y1, keys, FS)[0] == 1
    with pytest.raises(ValueError):
        demod_coherent([], [], keys, FS)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-10, 10), min_size=4, max_size=40),
    st.lists(st.floats(-10, 10), min_size=4, max_size=40),
)
def test_energy_swap_antisymmetry(a, b):
    n = min(len(a), len(b))
    a, b = np.array(a[:n]), np.array(b[:n])
    b1, s1 = demod_energy(a, b)
    b2, s2 = demod_energy(b, a)
    assert s1 == -s2
    if s1 != 0:
        assert b1 != b2
    else:
        assert b1 == b2 == 0


@settings(max_examples=30, deadline=None)
@given(amp0=st.floats(0.1, 5), amp1=st.floats(0.1, 5), ph=st.floats(0, 6.3))
def test_coherent_swap_flips(amp0, amp1, ph):
    """Exchanging which key carries the stronger tone flips the decision."""
    if abs(amp0 - amp1) < 1e-3:
        return
    keys = KeyPair()
    i = np.arange(160)
    t0 = np.cos(2 * np.pi * keys.f0 * i / FS + ph)
    t1 = np.cos(2 * np.pi * keys.f1 * i / FS + ph)
    b1, _ = demod_coherent(amp0 * t0, amp1 * t1, keys, FS)
    b2, _ = demod_coherent(amp1 * t0, amp0 * t1, keys, FS)
    assert b1 != b2


def test_synchronize_perfect_and_constant():
    d = np.concatenate([np.zeros(10), SYNC_HEADER, np.ones(10)]).astype(int)
    off, sc = synchronize(d)
    assert off[0] == 10 and sc[0] == 21
    assert sc[1:].max(initial=0) < 21
    # the header has nine ones and twelve zeros
    for c in (0, 1):
        _, sc = synchronize(np.full(60, c), threshold=-21)
        assert np.max(np.abs(sc)) == 3
        assert synchronize(np.full(60, c))[0].size == 0


def test_synchronize_false_lock_random_bits():
    rng = np.random.default_rng(11)
    bits = rng.integers(0, 2, 100_000 + 20)
    off, _ = synchronize(bits)
    assert len(off) / 100_000 < 0.01


def _noiseless(payload, cfg=CFG, seed=0, gains=None):
    return simulate_trace(cfg, np.random.default_rng(seed), payload)


@pytest.mark.parametrize("detector", ["energy", "coherent"])
def test_decode_reference_sequence(detector):
    series, payload, offset = _noiseless(FIG5)
    r = decode(series, CFG, detector)
    assert r.accepted and r.header_errors == 0
    assert r.payload_bits == FIG5
    assert r.sync_offset == offset


@pytest.mark.parametrize("detector", ["energy", "coherent"])
def test_decode_pure_noise(detector):
    rng = np.random.default_rng(5)
    n = 4000
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    s = TapSeries(sample_instants(n // 2, CFG), v, FS)
    assert not decode(s, CFG, detector).accepted


def test_decode_corrupted_header_rejected():
    hdr = list(SYNC_HEADER)
    for j in range(8):
        hdr[j * 2] ^= 1
    frame = BdFrame(tuple(hdr), FIG5, CFG.t_bc, CFG.sleep_duration)
    wave = frame_waveform(frame, CFG.keys)
    inst = sample_instants(int((0.1 + wave.duration) / CFG.t_slot), CFG)
    s = observe_and_estimate(make_path_gains(CFG), wave, CFG, instants=inst, frame_start=0.1)
    for det in ("energy", "coherent"):
        assert not decode(s, CFG, det).accepted


def test_sync_failure_result():
    s = TapSeries(sample_instants(600, CFG), np.ones(1200, complex), FS)
    r = decode(s, CFG)
    assert r == DecodeResult(None, 21, (), False, ())


@settings(max_examples=8, deadline=None)
@given(payload=st.lists(st.integers(0, 1), min_size=8, max_size=8), re=st.floats(-3, 3), im=st.floats(0.1, 3))
def test_invariances(payload, re, im):
    series, payload, _ = _noiseless(tuple(payload), seed=len(payload))
    base = {d: decode(series, CFG, d) for d in ("energy", "coherent")}
    assert base["energy"].payload_bits == base["coherent"].payload_bits == payload
    c = complex(re, im)
    big = 100 * abs(series.values[0])
    for d in ("energy", "coherent"):
        assert decode(series.scaled(c), CFG, d).payload_bits == payload
        assert decode(series.shifted(big), CFG, d).payload_bits == payload


@pytest.mark.parametrize("detector", ["energy", "coherent"])
def test_key_relabel_symmetry(detector):
    """Swapping the branches and the key labels complements every decision."""
    series, _, _ = _noiseless(FIG5)
    fs, y0, y1 = _front_end(series, CFG)
    keys = CFG.keys
    flipped = SimpleNamespace(f0=keys.f1, f1=keys.f0)
    a = _WindowStats(y0, y1, keys, fs, 160, detector)
    b = _WindowStats(y1, y0, flipped, fs, 160, detector)
    decided = a.p0 != a.p1
    np.testing.assert_array_equal(a.bits[decided], 1 - b.bits[decided])


def test_decode_frames_multiple():
    cfg = CFG
    rng = np.random.default_rng(2)
    payloads = [tuple(rng.integers(0, 2, 8)) for _ in range(3)]
    parts, t_off = [], 0.0
    waves = [frame_waveform(encode_frame(p, cfg), cfg.keys) for p in payloads]
    total = 0.1 + sum(w.duration for w in waves)
    inst = sample_instants(int(total / cfg.t_slot) + 1, cfg)
    gains = make_path_gains(cfg)
    vals = np.full(inst.size, gains.direct[0])
    start = 0.1
    for w in waves:
        x = w(inst - start)
        vals = vals + x * cfg.r_on * gains.scattered[0]
        start += w.duration
    s = TapSeries(inst, vals, FS)
    got = decode_frames(s, cfg, "coherent")
    assert [r.payload_bits for r in got] == payloads
    assert all(r.accepted for r in got)


def test_decode_short_series():
    s = TapSeries(np.arange(10) / FS, np.ones(10, complex), FS)
    assert decode_frames(s, CFG) == []
    with pytest.raises(ValueError):
        decode(s, CFG, "psk")


def test_decode_result_json_roundtrip():
    r = DecodeResult(5, 1, (1, 0), True, (0.5, -0.25))
    import json

    assert DecodeResult.from_dict(json.loads(r.to_json())) == r


def test_header_pm():
    assert HEADER_PM.sum() == 9 - 12
