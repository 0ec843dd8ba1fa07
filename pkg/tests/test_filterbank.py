import numpy as np
import pytest
from hypothesis import given, strategies as st

from onsetloc.filterbank import decompose, design_bank, erb, erb_rate, erb_rate_inverse
from onsetloc.roomsim import hilbert_envelope

FS = 48000


@pytest.fixture(scope="module")
def bank():
    return design_bank()


def test_erb_at_1khz():
    assert erb(1000.0) == pytest.approx(24.7 * 5.37)
    assert erb(1000.0) == pytest.approx(132.639, abs=1e-3)


def test_erb_rate_inverse():
    f = np.array([100.0, 250.0, 1000.0, 3600.0])
    assert np.allclose(erb_rate_inverse(erb_rate(f)), f)


def test_default_centres(bank):
    assert bank.num_bands == 16
    assert bank.center_hz[0] == 250.0 and bank.center_hz[-1] == 3600.0
    assert np.all(np.diff(bank.center_hz) > 0)
    # uniform on the ERB-rate scale
    assert np.allclose(np.diff(erb_rate(bank.center_hz)), np.diff(erb_rate(bank.center_hz))[0])
    assert np.allclose(bank.bandwidth_hz, 1.019 * erb(bank.center_hz))


def test_single_band():
    b = design_bank(1000.0, 1000.0, 1)
    assert b.center_hz.tolist() == [1000.0]


@pytest.mark.parametrize("args", [(300, 200, 4), (100, 30000, 4), (0, 1000, 4), (100, 1000, 0)])
def test_invalid_range(args):
    with pytest.raises(ValueError):
        design_bank(*args)


def test_rate_mismatch(bank):
    with pytest.raises(ValueError):
        decompose(bank, np.zeros(100), sample_rate=16000)


def test_silence(bank):
    assert not np.any(decompose(bank, np.zeros(2000)))


def test_unit_gain_at_centres(bank):
    for b, fc in enumerate(bank.center_hz):
        assert abs(bank.response_at(b, fc)[0]) == pytest.approx(1.0, abs=0.01)


def test_sinusoid_selectivity(bank):
    t = np.arange(FS // 2) / FS
    for b in (3, 8, 12):
        y = decompose(bank, np.sin(2 * np.pi * bank.center_hz[b] * t))
        # steady state, away from the abrupt stop at the end of the record
        amp = np.abs(y[:, FS // 8:FS // 4]).max(axis=1)
        others = [k for k in range(bank.num_bands) if abs(k - b) > 1]
        assert amp[b] >= 10 * amp[others].max()


def test_impulse_alignment(bank):
    x = np.zeros(8000)
    x[4000] = 1.0
    y = decompose(bank, x)
    peaks = np.array([np.argmax(hilbert_envelope(row)) for row in y])
    assert (peaks.max() - peaks.min()) / FS <= 1e-3


@given(st.integers(0, 300), st.floats(0.1, 10))
def test_linear_time_invariant(shift, gain):
    bank = design_bank(500, 2000, 4)
    rng = np.random.default_rng(shift)
    x = np.zeros(4000)
    x[1000:2000] = rng.standard_normal(1000)
    xs = np.roll(x, shift) * gain
    y = decompose(bank, x)
    ys = decompose(bank, xs)
    assert np.allclose(ys[:, 500 + shift:3500], gain * y[:, 500:3500 - shift], atol=1e-9 * gain)


def test_multichannel_shape(bank):
    assert decompose(bank, np.zeros((3, 500))).shape == (3, 16, 500)
