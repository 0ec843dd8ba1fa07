"""MCC-PHAT steered localizer and plain two-microphone GCC-PHAT.

Per 20 ms Hann frame, each alias-free microphone pair contributes its PHAT-weighted
cross-spectrum evaluated at the pair's steering delay. The map value is the
product of the rectified pair values.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .doa import SteeredResponseMap
from .signal import ArrayGeometry, MultichannelSignal, SteeringGrid

PHAT_FLOOR = 1e-12


def pair_set_global(geometry: ArrayGeometry, f_max_hz: float) -> list[tuple[int, int]]:
    """Pairs (i < j) with spacing below ``v / f_max``."""
    if not f_max_hz > 0:
        raise ValueError("f_max must be positive")
    limit = geometry.speed_of_sound / f_max_hz
    return [p for p, d in geometry.pair_spacings().items() if d < limit]


def _band_bins(nfft: int, sample_rate: float, f_max_hz: float) -> np.ndarray:
    f = sfft.rfftfreq(nfft, 1.0 / sample_rate)
    return f[f <= f_max_hz]


def phat_spectrum(spec_i: np.ndarray, spec_j: np.ndarray) -> np.ndarray:
    """``G / |G|`` for ``G = X_i conj(X_j)``; bins with ``|G|`` below the floor are zeroed."""
    g = spec_i * np.conj(spec_j)
    mag = np.abs(g)
    out = np.zeros_like(g)
    ok = mag >= PHAT_FLOOR
    out[ok] = g[ok] / mag[ok]
    return out


def gcc_phat(frame_i, frame_j, tau_s: float, f_max_hz: float, sample_rate: float = 48000.0,
             nfft: int | None = None) -> float:
    """GCC-PHAT value of one frame pair at lag ``tau_s`` (seconds, j later than i is positive).

    Sums the PHAT spectrum over bins up to ``f_max`` and divides by the bin count,
    so identical frames score 1 at zero lag.
    """
    xi = np.asarray(frame_i, dtype=float)
    xj = np.asarray(frame_j, dtype=float)
    if xi.shape != xj.shape or xi.ndim != 1:
        raise ValueError("frames must be 1-D and equal length")
    n = xi.size
    nfft = nfft or int(2 ** np.ceil(np.log2(n)))
    win = np.hanning(n + 2)[1:-1]
    f = _band_bins(nfft, sample_rate, f_max_hz)
    xs = phat_spectrum(sfft.rfft(xi * win, nfft)[: f.size], sfft.rfft(xj * win, nfft)[: f.size])
    return float(np.real(np.sum(xs * np.exp(-2j * np.pi * f * tau_s))) / f.size)


def frame_signal(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """(channels, n) -> (frames, channels, frame_len); trailing partial frame dropped."""
    n = x.shape[-1]
    n_frames = 0 if n < frame_len else 1 + (n - frame_len) // hop
    idx = np.arange(n_frames)[:, None] * hop + np.arange(frame_len)[None, :]
    return x[:, idx].transpose(1, 0, 2)


@dataclass(frozen=True)
class MccPhatConfig:
    geometry: ArrayGeometry
    grid: SteeringGrid = SteeringGrid()
    f_max_hz: float = 3600.0
    frame_s: float = 0.02
    overlap: float = 0.5
    t_avg_s: float = 0.5
    t_shift_s: float = 0.5
    threads: int = 1

    def __post_init__(self):
        if not 0 <= self.overlap < 1:
            raise ValueError("overlap must lie in [0, 1)")


def mcc_phat_map(signal: MultichannelSignal, config: MccPhatConfig) -> SteeredResponseMap:
    """MCC-PHAT localization function over Hann frames and the scan grid."""
    geo = config.geometry
    if signal.num_channels < 2:
        raise ValueError("MCC-PHAT needs at least 2 channels")
    if signal.num_channels != geo.num_mics:
        raise ValueError(f"signal has {signal.num_channels} channels, geometry {geo.num_mics} mics")
    fs = signal.sample_rate
    L = int(round(config.frame_s * fs))
    hop = max(1, int(round(L * (1.0 - config.overlap))))
    nfft = int(2 ** np.ceil(np.log2(L)))
    f = _band_bins(nfft, fs, config.f_max_hz)
    pairs = pair_set_global(geo, config.f_max_hz)
    az = config.grid.azimuths_deg

    frames = frame_signal(signal.samples, L, hop)
    n_frames = frames.shape[0]
    win = np.hanning(L + 2)[1:-1]
    spec = sfft.rfft(frames * win, nfft, axis=-1)[..., : f.size]
    # tau[a, j] = delay of mic j relative to mic 0 for scan point a; pair delay is tau_j - tau_i.
    tau = geo.steering_delays(config.grid.points, ref=0)

    phat = [phat_spectrum(spec[:, i], spec[:, j]) for i, j in pairs]

    def score(az_idx):
        out = np.ones((n_frames, az_idx.size)) if pairs else np.zeros((n_frames, az_idx.size))
        for (i, j), xs in zip(pairs, phat):
            steer = np.exp(-2j * np.pi * np.outer(f, tau[az_idx, j] - tau[az_idx, i]))
            out *= np.maximum(np.real(xs @ steer) / f.size, 0.0)
        return out

    values = np.zeros((n_frames, az.size))
    chunks = np.array_split(np.arange(az.size), max(1, min(az.size, config.threads)))
    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            for idx, block in zip(chunks, pool.map(score, chunks)):
                values[:, idx] = block
    else:
        for idx in chunks:
            values[:, idx] = score(idx)
    times = (np.arange(n_frames) * hop + 0.5 * L) / fs
    return SteeredResponseMap(values, az, times, hop / fs, L, config.t_avg_s, config.t_shift_s,
                              "mcc-phat")


def gcc_phat_tdoa(signal: MultichannelSignal, f_max_hz: float = 3600.0, frame_s: float = 0.02,
                  max_lag_s: float | None = None, resolution_s: float | None = None):
    """Per-frame TDOA estimate for a two-microphone recording (the two-mic special case).

    Returns ``(frame_times_s, tdoa_s)``, with tdoa positive when channel 1 lags channel 0.
    """
    if signal.num_channels != 2:
        raise ValueError(f"GCC-PHAT needs exactly 2 channels, got {signal.num_channels}")
    fs = signal.sample_rate
    L = int(round(frame_s * fs))
    hop = L // 2
    nfft = int(2 ** np.ceil(np.log2(L)))
    f = _band_bins(nfft, fs, f_max_hz)
    max_lag = max_lag_s if max_lag_s is not None else 0.5 * L / fs
    step = resolution_s if resolution_s is not None else 0.1 / fs
    lags = np.arange(-max_lag, max_lag + 0.5 * step, step)
    frames = frame_signal(signal.samples, L, hop)
    win = np.hanning(L + 2)[1:-1]
    spec = sfft.rfft(frames * win, nfft, axis=-1)[..., : f.size]
    xs = phat_spectrum(spec[:, 0], spec[:, 1])
    vals = np.real(xs @ np.exp(-2j * np.pi * np.outer(f, lags))) / f.size
    times = (np.arange(frames.shape[0]) * hop + 0.5 * L) / fs
    return times, lags[np.argmax(vals, axis=1)]
