import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ambc.channel import (
    PathGains,
    TapSeries,
    crs_pilot_mask,
    fspl,
    make_path_gains,
    noise_var_for_snr,
    observe_and_estimate,
    path_powers,
    read_tap_series,
    reflection_coefficient,
    sample_instants,
    snr_definitions,
    write_tap_series,
)
from ambc.config import KeyPair, SystemConfig
from ambc.errors import ConfigError, SingularImpedanceError, TraceParseError
from ambc.waveforms import encode_frame, frame_waveform

CFG = SystemConfig()


def _static(hd, hs):
    return PathGains(np.array([hd], complex), np.array([hs], complex), math.inf, abs(hd) ** 2, abs(hs) ** 2, "static")


def _wave(payload=(1, 0, 1, 1, 0, 0, 1, 0), cfg=CFG):
    return frame_waveform(encode_frame(payload, cfg), cfg.keys)


def test_fspl():
    lam = CFG.wavelength
    assert fspl(lam / (4 * math.pi), lam) == pytest.approx(1.0)
    l10 = fspl(10.0, lam)
    assert 10 * math.log10(l10) == pytest.approx(20 * math.log10(4 * math.pi * 10.0 / lam), rel=1e-12)
    assert fspl(20.0, lam) == pytest.approx(4 * l10)
    with pytest.raises(ValueError):
        fspl(0.0, lam)


def test_reflection_coefficient():
    za = 50 + 20j
    assert reflection_coefficient(za.conjugate(), za) == 0
    assert reflection_coefficient(0, za) == pytest.approx(-1)
    assert reflection_coefficient(75, 75) == 0
    with pytest.raises(SingularImpedanceError):
        reflection_coefficient(-50 + 1j, 50 + 1j)


def test_sample_instants():
    assert sample_instants(1, CFG) == pytest.approx([0.0, 285.6e-6])
    assert sample_instants(2, CFG) == pytest.approx([0.0, 285.6e-6, 500e-6, 785.6e-6])
    u = sample_instants(10, CFG.replace(delta_t=0.0))
    assert np.diff(u) == pytest.approx(np.full(19, 250e-6))
    d = np.diff(sample_instants(50, CFG))
    assert d[0::2] == pytest.approx(np.full(50, 285.6e-6))
    assert d[1::2] == pytest.approx(np.full(49, 214.4e-6))


def test_static_gains_unit_loss():
    lam = CFG.wavelength
    g = make_path_gains(CFG.replace(d_tx_rx=lam / (4 * math.pi)))
    assert abs(g.direct[0]) == pytest.approx(1.0)


def test_rayleigh_second_moments():
    cfg = CFG.replace(fading_mode="rayleigh-block")
    g = make_path_gains(cfg, np.random.default_rng(4), n_blocks=100_000)
    p_d, p_s = path_powers(cfg)
    assert np.mean(abs(g.direct) ** 2) == pytest.approx(p_d, rel=0.02)
    assert np.mean(abs(g.scattered) ** 2) == pytest.approx(p_s, rel=0.02)


def test_block_indexing():
    g = PathGains(np.array([1, 2, 3], complex), np.zeros(3, complex), 0.1, 1, 0, "rayleigh-block")
    assert g.h_d([0.0, 0.15, 0.25, 9.0]).tolist() == [1, 2, 3, 3]


def test_pilot_mask():
    m = crs_pilot_mask(CFG.replace(n_subcarriers=12))
    assert m[0].tolist() == [0, 6] and m[4].tolist() == [3, 9]
    m6 = crs_pilot_mask(CFG.replace(n_subcarriers=6))
    assert len(m6[0]) == len(m6[4]) == 1
    assert len(crs_pilot_mask(CFG)[0]) == CFG.n_subcarriers // 6


def test_observe_constant_levels():
    g = _static(0.3 + 0.1j, 0.02 - 0.01j)
    inst = sample_instants(20, CFG)
    off = observe_and_estimate(g, _wave(), CFG, instants=inst, frame_start=10.0)
    assert off.values == pytest.approx(np.full(40, 0.3 + 0.1j))
    # during the header, x=1 at instants where the wave is high
    s = observe_and_estimate(g, _wave(), CFG, instants=inst)
    x = _wave()(inst)
    assert s.values == pytest.approx(0.3 + 0.1j + x * CFG.r_on * (0.02 - 0.01j))


def test_grid_equals_tap_at_zero_noise():
    g = make_path_gains(CFG)
    a = observe_and_estimate(g, _wave(), CFG, fidelity="tap")
    b = observe_and_estimate(g, _wave(), CFG, fidelity="grid")
    np.testing.assert_allclose(b.values, a.values, rtol=1e-10)


def test_grid_noise_matches_tap_noise_variance():
    cfg = CFG.replace(noise_var=1e-6)
    g = _static(0.0, 0.0)
    w = _wave(())
    inst = sample_instants(3000, cfg)
    a = observe_and_estimate(g, w, cfg, np.random.default_rng(1), instants=inst, fidelity="grid")
    b = observe_and_estimate(g, w, cfg, np.random.default_rng(1), instants=inst, fidelity="tap")
    target = cfg.noise_var / cfg.n_pilots
    assert np.var(a.values) == pytest.approx(target, rel=0.05)
    assert np.var(b.values) == pytest.approx(target, rel=0.05)


def test_noise_floor():
    cfg = CFG.replace(noise_var=2.0)
    g = _static(0.0, 0.0)
    inst = sample_instants(50_000, cfg)
    s = observe_and_estimate(g, _wave(()), cfg, np.random.default_rng(0), instants=inst)
    assert np.var(s.values) == pytest.approx(2.0 / cfg.n_pilots, rel=0.03)


def test_zero_noise_deterministic_and_linear():
    g = make_path_gains(CFG)
    a = observe_and_estimate(g, _wave(), CFG, np.random.default_rng(1))
    b = observe_and_estimate(g, _wave(), CFG, np.random.default_rng(2))
    np.testing.assert_array_equal(a.values, b.values)
    c = 0.3 - 2j
    s = observe_and_estimate(g.scaled(c), _wave(), CFG)
    np.testing.assert_allclose(s.values, c * a.values, rtol=1e-12)


def test_mismatched_waveform():
    with pytest.raises(ConfigError):
        observe_and_estimate(make_path_gains(CFG), _wave(), CFG.replace(t_bc=20e-3))
    other = frame_waveform(encode_frame((1,), CFG), KeyPair(300, 700))
    with pytest.raises(ConfigError):
        observe_and_estimate(make_path_gains(CFG), other, CFG)


def test_snr_definitions():
    r = snr_definitions(CFG.replace(noise_var=1e-13))
    assert r.snr1_db >= r.snr2_db
    lam = CFG.wavelength
    expect = (
        -10 * math.log10(fspl(125, lam))
        + 10 * math.log10(fspl(130, lam) * fspl(10, lam))
        + 6.0
    )
    assert r.delta_l_db == pytest.approx(expect, abs=1e-9)
    nv = noise_var_for_snr(CFG, 5.0)
    assert snr_definitions(CFG.replace(noise_var=nv)).snr1_db == pytest.approx(5.0)
    nv2 = noise_var_for_snr(CFG, 5.0, axis="snr2")
    assert snr_definitions(CFG.replace(noise_var=nv2)).snr2_db == pytest.approx(5.0)


def test_delta_l_monte_carlo():
    cfg = CFG.replace(fading_mode="rayleigh-block")
    g = make_path_gains(cfg, np.random.default_rng(7), n_blocks=200_000)
    ratio = np.mean(abs(g.direct) ** 2) / np.mean(abs(g.scattered * cfg.r_on) ** 2)
    assert 10 * math.log10(ratio) == pytest.approx(snr_definitions(cfg).delta_l_db, abs=0.2)


def test_tiny_r_on_drives_snr2_down():
    lo = snr_definitions(CFG.replace(noise_var=1e-13, r_on=1e-9))
    assert lo.snr2_db < lo.snr1_db - 100


def test_tap_csv_roundtrip(tmp_path):
    g = make_path_gains(CFG.replace(fading_mode="rayleigh-block"), np.random.default_rng(3))
    s = observe_and_estimate(g, _wave(), CFG.replace(noise_var=1e-12), np.random.default_rng(3))
    p = tmp_path / "t.csv"
    write_tap_series(s, p)
    r = read_tap_series(p)
    np.testing.assert_array_equal(r.instants, s.instants)
    np.testing.assert_array_equal(r.values, s.values)


def test_tap_csv_errors(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("")
    assert len(read_tap_series(p)) == 0
    p.write_text("t_seconds,re,im\n0,1,2\n0.1,x,3\n")
    with pytest.raises(TraceParseError, match=":3:"):
        read_tap_series(p)
    p.write_text("time,re,im\n")
    with pytest.raises(TraceParseError, match=":1:"):
        read_tap_series(p)


def test_tapseries_validation():
    with pytest.raises(ValueError):
        TapSeries(np.array([0.0, 0.0]), np.array([1, 2], complex), 4000.0)
    with pytest.raises(ValueError):
        TapSeries(np.array([0.0]), np.array([np.nan], complex), 4000.0)


@settings(max_examples=25, deadline=None)
@given(re=st.floats(-5, 5), im=st.floats(-5, 5))
def test_shifted_and_scaled(re, im):
    s = TapSeries(np.arange(4.0), np.arange(4) + 0j, 4000.0)
    c = complex(re, im)
    assert s.shifted(c).values == pytest.approx(np.arange(4) + c)
    assert s.scaled(c).values == pytest.approx(np.arange(4) * c)
