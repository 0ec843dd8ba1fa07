import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import octagon_pair_count
from onsetloc.filterbank import design_bank
from onsetloc.mccc import (OnsetMcccConfig, SpatialCorrMatrix, align_channel, frame_scores, onset_mccc_map,
                           pair_set_for_band, spatial_corr, subband_score)
from onsetloc.roomsim import Room, SceneSource, render_scene, speech_like_source, synthesize_harmonic_speech
from onsetloc.scenes import ONSET_RICH
from onsetloc.signal import ArrayGeometry, MultichannelSignal, SteeringGrid

FS = 48000
ENV = {k.removesuffix("_s"): tuple(v) for k, v in ONSET_RICH.items()}


def test_align_identity():
    x = np.random.default_rng(0).standard_normal(1000)
    assert np.allclose(align_channel(x, 0.0, FS), x, rtol=0, atol=1e-9 * np.abs(x).max())


def test_align_integer_advance():
    x = np.random.default_rng(1).standard_normal(1000)
    y = align_channel(x, 1 / FS, FS)
    assert np.allclose(y[:-1], x[1:], atol=1e-6)
    assert y[-1] == 0.0
    y = align_channel(x, -3 / FS, FS)
    assert np.allclose(y[3:], x[:-3], atol=1e-6) and not np.any(y[:3])


def test_align_half_sample_roundtrip():
    t = np.arange(4800) / FS
    x = np.sin(2 * np.pi * 700 * t) * np.hanning(t.size)
    y = align_channel(align_channel(x, 0.5 / FS, FS), -0.5 / FS, FS)
    resid = 10 * np.log10(np.sum((y - x) ** 2) / np.sum(x ** 2))
    assert resid < -60


def test_pair_sets(octagon):
    assert len(pair_set_for_band(octagon, 3000.0, 430.0)) == 24
    assert len(pair_set_for_band(octagon, 200.0, 100.0)) == 28
    assert pair_set_for_band(octagon, 1e9, 1.0) == []
    assert all(i < j for i, j in pair_set_for_band(octagon, 1000.0, 100.0))


def test_pair_sets_chord_oracle(octagon):
    bank = design_bank()
    for fc, fb in zip(bank.center_hz, bank.bandwidth_hz):
        limit = 343.0 / (fc + fb)
        assert len(pair_set_for_band(octagon, fc, fb)) == octagon_pair_count(limit)


def test_spatial_corr_identical():
    f = np.zeros((2, 960))
    f[:, [10, 300, 700]] = [[1.0, 2.0, 0.5]] * 2
    m = spatial_corr(f)
    assert m.rho[0, 1] == pytest.approx(1.0)
    assert np.allclose(m.r, m.r.T) and np.allclose(np.diag(m.r), m.sigma ** 2)


def test_spatial_corr_zero_channel():
    f = np.zeros((3, 960))
    f[1, 5] = f[2, 5] = 1.0
    rho = spatial_corr(f).rho
    assert np.all(rho[0] == 0) and np.all(rho[:, 0] == 0)


def test_spatial_corr_independent():
    rng = np.random.default_rng(0)
    small = 0
    for _ in range(200):
        f = np.zeros((2, 960))
        for c in range(2):
            idx = rng.choice(960, 20, replace=False)
            f[c, idx] = rng.uniform(0.1, 1, 20)
        small += abs(spatial_corr(f).rho[0, 1]) < 0.2
    assert small / 200 >= 0.95


def test_subband_score():
    r = np.array([[1.0, 0.9, 0.8], [0.9, 1.0, -0.1], [0.8, -0.1, 1.0]])
    m = SpatialCorrMatrix(r, np.ones(3))
    assert subband_score(m, [(0, 1), (0, 2)]) == pytest.approx(0.72)
    assert subband_score(m, [(0, 1), (1, 2)]) == 0.0
    assert subband_score(SpatialCorrMatrix(np.ones((2, 2)), np.ones(2)), [(0, 1)]) == 1.0
    assert subband_score(m, []) == 0.0


@given(st.integers(0, 10_000))
def test_frame_scores_match_matrix_route(seed):
    rng = np.random.default_rng(seed)
    spikes = np.zeros((4, 3 * 100))
    base = rng.choice(300, 15, replace=False)
    for c in range(4):
        keep = base[rng.uniform(size=base.size) < 0.8]
        spikes[c, keep] = rng.uniform(0.1, 1, keep.size)
    pairs = [(0, 1), (0, 2), (1, 3), (2, 3)]
    fast = frame_scores(spikes, 100, pairs)
    slow = [subband_score(spatial_corr(spikes[:, k * 100:(k + 1) * 100]), pairs) for k in range(3)]
    assert np.allclose(fast, slow, atol=1e-12)
    assert np.all((fast >= 0) & (fast <= 1))


# --- end-to-end on short renders ----------------------------------------------

def _scene(geo, az_deg, seconds, room=Room(None), snr=math.inf, seed=0):
    spec = speech_like_source(150.0, seconds, seed, **ENV)
    x = synthesize_harmonic_speech(spec, FS)
    pos = 1.2 * np.array([math.cos(math.radians(az_deg)), math.sin(math.radians(az_deg))])
    return render_scene([SceneSource(x, pos)], geo, room, snr, seed)


@pytest.fixture(scope="module")
def small_setup():
    geo = ArrayGeometry.circular(4, 0.08)
    bank = design_bank(250, 3600, 6)
    sig = _scene(geo, 100.0, 0.6, snr=40, seed=3)
    cfg = OnsetMcccConfig(bank, geo, SteeringGrid(step_deg=10), t_avg_s=0.2, t_shift_s=0.2)
    return geo, bank, sig, cfg, onset_mccc_map(sig, cfg)


def test_map_range_and_shape(small_setup):
    *_, cfg, srm = small_setup
    assert srm.values.shape == (30, 36)
    assert np.all(srm.values >= 0) and np.all(srm.values <= 1)
    assert np.all(srm.averaged <= 1)


def test_gain_invariance(small_setup):
    geo, bank, sig, cfg, srm = small_setup
    scaled = onset_mccc_map(sig.scaled(4.0), cfg)
    assert np.allclose(scaled.values, srm.values, rtol=1e-6, atol=1e-12)


def test_permutation_equivariance(small_setup):
    geo, bank, sig, cfg, srm = small_setup
    perm = [0, 2, 3, 1]   # mic 0 stays the alignment reference
    geo_p = ArrayGeometry(geo.mic_positions[perm])
    cfg_p = OnsetMcccConfig(bank, geo_p, cfg.grid, t_avg_s=0.2, t_shift_s=0.2)
    other = onset_mccc_map(sig.select(perm), cfg_p)
    assert np.allclose(other.values, srm.values, atol=1e-9)


def test_threads_identical(small_setup):
    geo, bank, sig, cfg, srm = small_setup
    cfg2 = OnsetMcccConfig(bank, geo, cfg.grid, t_avg_s=0.2, t_shift_s=0.2, threads=3)
    assert np.array_equal(onset_mccc_map(sig, cfg2).values, srm.values)


def test_silence_is_zero():
    geo = ArrayGeometry.circular(4, 0.08)
    cfg = OnsetMcccConfig(design_bank(250, 3600, 4), geo, SteeringGrid(step_deg=30))
    srm = onset_mccc_map(MultichannelSignal(np.zeros((4, 4800)), FS), cfg)
    assert not np.any(srm.values) and not np.any(srm.averaged)


def test_channel_mismatch():
    cfg = OnsetMcccConfig(design_bank(), ArrayGeometry.circular(8, 0.1))
    with pytest.raises(ValueError):
        onset_mccc_map(MultichannelSignal(np.zeros((4, 100)), FS), cfg)
    with pytest.raises(ValueError):
        OnsetMcccConfig(design_bank(), ArrayGeometry.circular(8, 0.1), mode="bogus")


def test_anechoic_single_source_octagon(octagon):
    sig = _scene(octagon, 60.0, 0.6, snr=60, seed=1)
    cfg = OnsetMcccConfig(design_bank(), octagon, SteeringGrid(step_deg=1), t_avg_s=0.5, t_shift_s=0.5,
                          threads=2)
    srm = onset_mccc_map(sig, cfg)
    assert abs(srm.azimuths_deg[np.argmax(srm.histogram())] - 60.0) <= 2.0
