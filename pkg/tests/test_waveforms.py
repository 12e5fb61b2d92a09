import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ambc.config import KeyPair, KeyRatioWarning, SystemConfig
from ambc.errors import ConfigError
from ambc.waveforms import (
    BARKER7,
    SYNC_HEADER,
    bd_symbol,
    encode_frame,
    frame_waveform,
    square_wave,
    symbol_spectrum,
)

KEYS = KeyPair()
CFG = SystemConfig()


def test_square_wave_points():
    assert square_wave(300.0, 0.0) == 1
    assert square_wave(300.0, 1 / 600 + 1e-9) == 0
    # frac(650 * 1.0) == 0
    assert square_wave(650.0, 1.0) == 1


@pytest.mark.parametrize("f, t", [(0.0, 0.1), (-5.0, 0.1), (300.0, math.nan), (300.0, math.inf)])
def test_square_wave_rejects_bad_args(f, t):
    with pytest.raises(ValueError):
        square_wave(f, t)


@given(
    f=st.floats(200, 1000),
    t=st.floats(0, 1),
    n=st.integers(-50, 50),
)
def test_square_wave_period(f, t, n):
    t2 = t + n / f
    # skip instants that sit within rounding of an edge
    ph = (t * f) % 0.5
    if min(ph, 0.5 - ph) < 1e-6:
        return
    assert square_wave(f, t) == square_wave(f, t2)


def test_square_wave_duty_cycle():
    f = 300.0
    n = 100_000
    t = np.arange(n) / (n * f)
    assert abs(square_wave(f, t).mean() - 0.5) <= 1 / n


def test_bd_symbol_examples():
    assert bd_symbol(0, KEYS, 40e-3, 20e-3) == square_wave(300.0, 20e-3) == 1
    assert bd_symbol(1, KEYS, 40e-3, 45e-3) == 0
    assert bd_symbol(1, KEYS, 40e-3, 0.0) == 1
    assert bd_symbol(1, KEYS, 40e-3, -1e-3) == 0


def test_sync_header():
    assert BARKER7 == (0, 0, 0, 0, 1, 1, 0)
    assert "".join(map(str, SYNC_HEADER)) == "000011000001101111001"


def test_encode_frame_examples():
    fr = encode_frame([1, 1, 0, 0, 1, 0, 1, 0], CFG)
    assert "".join(map(str, fr.bits)) == "000011000001101111001" + "11001010"
    assert encode_frame([], CFG).bits == SYNC_HEADER
    assert encode_frame([0] * 8, CFG).payload == (0,) * 8
    assert fr.airtime == pytest.approx(29 * 0.04 + 0.1)
    with pytest.raises(ValueError):
        encode_frame([2], CFG)


def test_frame_waveform_segments():
    wave = frame_waveform(encode_frame([1], CFG), KEYS)
    t_bc = CFG.t_bc
    assert wave(21 * t_bc + t_bc / 2) == square_wave(650.0, t_bc / 2)
    assert wave(22 * t_bc + 0.05) == 0  # sleep
    assert wave(-1e-3) == 0
    assert wave.duration == pytest.approx(22 * t_bc + 0.1)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=0, max_size=24))
def test_frame_roundtrip_by_period(payload):
    """Recover bits by counting rising edges inside each symbol."""
    fr = encode_frame(payload, CFG)
    wave = frame_waveform(fr, KEYS)
    fs = 200_000
    bits = []
    for m in range(fr.n_symbols):
        t = m * CFG.t_bc + np.arange(int(CFG.t_bc * fs)) / fs
        lv = wave(t).astype(int)
        rises = np.count_nonzero(np.diff(lv) == 1) + 1
        bits.append(int(abs(rises / CFG.t_bc - 650) < abs(rises / CFG.t_bc - 300)))
    assert tuple(bits) == fr.bits


def test_symbol_spectrum_at_key():
    t_bc = 1.0  # long symbol: harmonics well separated
    val = symbol_spectrum(300.0, 0, KEYS, t_bc, l_max=51)
    assert abs(val) == pytest.approx(t_bc / math.pi, rel=1e-3)
    assert symbol_spectrum(0.0, 0, KEYS, t_bc).real == pytest.approx(t_bc / 2, rel=1e-3)


def test_symbol_spectrum_matches_numeric_ft():
    t_bc = 0.2
    fs = 400_000
    t = np.arange(int(t_bc * fs)) / fs
    x = bd_symbol(0, KEYS, t_bc, t).astype(float)
    for f in (0.0, 300.0, 900.0):
        num = np.sum(x * np.exp(-2j * np.pi * f * t)) / fs
        assert abs(symbol_spectrum(f, 0, KEYS, t_bc, l_max=51)) == pytest.approx(abs(num), rel=0.02)


def test_harmonic_structure_of_sampled_symbol():
    t_bc = 1.0
    fs = 300 * 64
    t = np.arange(int(t_bc * fs)) / fs
    x = bd_symbol(0, KEYS, t_bc, t).astype(float)
    spec = np.abs(np.fft.rfft(x)) / len(x)
    df = 1 / t_bc
    a1 = spec[int(300 / df)]
    for l in range(1, 10):
        amp = spec[int(l * 300 / df)]
        if l % 2 == 0:
            assert amp < 1e-3 * a1
        else:
            assert amp / a1 == pytest.approx(abs(np.sinc(l / 2) / np.sinc(0.5)), rel=0.02)


def test_keypair_validation():
    with pytest.raises(ConfigError):
        KeyPair(650, 300)
    with pytest.raises(ConfigError):
        KeyPair(100, 650)
    with pytest.warns(KeyRatioWarning):
        KeyPair(300, 900)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        KeyPair(300, 650)
