import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from onsetloc.doa import SteeredResponseMap, calibrate_threshold, peak_mask, pick_doas, temporal_average

AZ = np.arange(360.0)


def _map(peaks):
    v = np.zeros(360)
    for a, h in peaks.items():
        v[a] = h
    return v


def test_flat_below_threshold():
    assert pick_doas(np.full(360, 0.1), AZ, 0.5).size == 0


def test_unequal_peaks_twenty_apart():
    assert pick_doas(_map({170: 0.9, 190: 0.7}), AZ, 0.1, 20).tolist() == [170.0]


def test_equal_peaks_twenty_one_apart():
    assert pick_doas(_map({170: 0.8, 191: 0.8}), AZ, 0.1, 20).tolist() == [170.0, 191.0]


def test_wraparound():
    assert pick_doas(_map({359: 0.9, 5: 0.6}), AZ, 0.1, 20).tolist() == [359.0]
    assert pick_doas(_map({359: 0.5, 5: 0.6}), AZ, 0.1, 20).tolist() == [5.0]


def test_plateau_single_pick():
    v = np.zeros(360)
    v[100:104] = 1.0
    assert pick_doas(v, AZ, 0.5, 20).tolist() == [100.0]


def test_resolution_range():
    with pytest.raises(ValueError):
        peak_mask(np.zeros(360), AZ, 0, 0)


@given(arrays(np.float64, 360, elements=st.floats(0, 1)), st.sampled_from([5.0, 10.0, 20.0, 45.0]))
def test_picks_are_separated_window_maxima(v, res):
    picks = pick_doas(v, AZ, 0.0, res)
    for a in picks.astype(int):
        idx = (a + np.arange(-int(res), int(res) + 1)) % 360
        assert v[a] == v[idx].max()
    d = np.abs((picks[:, None] - picks[None, :] + 180) % 360 - 180)
    assert np.all(d[~np.eye(picks.size, dtype=bool)] > res)


def test_temporal_average_windows():
    v = np.arange(10.0)[:, None] * np.ones((1, 3))
    t = np.arange(10) * 0.1
    avg, times = temporal_average(v, t, 0.1, 0.5, 0.5)
    assert avg[:, 0].tolist() == [2.0, 7.0]
    assert times == pytest.approx([0.2, 0.7])
    avg, _ = temporal_average(v, t, 0.1, 0.5, 0.1)
    assert avg.shape[0] == 6


def test_short_record_single_window():
    avg, _ = temporal_average(np.ones((3, 2)), np.arange(3) * 0.02, 0.02, 0.5, 0.5)
    assert avg.shape == (1, 2)


def test_map_and_calibration():
    v = np.random.default_rng(0).uniform(0, 1, (50, 360))
    m = SteeredResponseMap(v, AZ, np.arange(50) * 0.02, 0.02, 960, 0.5, 0.5)
    assert m.averaged.shape == (2, 360)
    assert calibrate_threshold(m) == pytest.approx(0.5 * m.averaged.max())
    assert np.allclose(m.histogram(), v.mean(axis=0))


def test_relative_threshold():
    from onsetloc.doa import relative_threshold
    assert relative_threshold(np.array([0.5, 2.0]), 1e-4) == pytest.approx(2e-4)
    assert relative_threshold(np.zeros(3), 1e-4) == np.inf
    assert pick_doas(np.zeros(360), AZ, relative_threshold(np.zeros(360), 1e-4)).size == 0
