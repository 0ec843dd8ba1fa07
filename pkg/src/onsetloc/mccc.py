"""Onset-MCCC steered localizer.

For every scan azimuth the channels are advanced onto the reference microphone,
split into gammatone subbands, onset-encoded, and compared frame by frame through
the mean-removed spatial correlation matrix. Each subband scores the product of
rectified normalized coefficients over alias-free microphone pairs; band scores
are averaged and then time-averaged.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .doa import SteeredResponseMap
from .filterbank import GammatoneBank
from .onset import DEFAULT_LAMBDA, onset_spikes_dense
from .signal import ArrayGeometry, MultichannelSignal, SteeringGrid

ALIGN_MODES = ("exact", "fast")


def align_channel(x: np.ndarray, tau_s: float, sample_rate: float) -> np.ndarray:
    """Return ``x(t + tau)`` sampled on the original grid, same length, zero-filled edges.

    The shift is a linear phase ramp on the zero-padded full-record spectrum, so
    fractional advances are band-limited interpolations and integer ones are exact.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    shift = tau_s * sample_rate
    pad = int(math.ceil(abs(shift))) + 64
    nfft = sfft.next_fast_len(n + 2 * pad)
    buf = np.zeros(nfft)
    buf[pad:pad + n] = x
    f = sfft.rfftfreq(nfft)
    y = sfft.irfft(sfft.rfft(buf) * np.exp(2j * np.pi * f * shift), nfft)
    out = y[pad:pad + n]
    # Samples that came from outside the record are zero.
    k = int(math.ceil(abs(shift)))
    if shift > 0 and k:
        out[n - k:] = np.where(np.arange(n - k, n) + shift > n - 1, 0.0, out[n - k:])
    elif shift < 0 and k:
        out[:k] = np.where(np.arange(k) + shift < 0, 0.0, out[:k])
    return out


def pair_set_for_band(geometry: ArrayGeometry, band_fc_hz: float, band_fB_hz: float) -> list[tuple[int, int]]:
    """Pairs (i < j) closer than ``v / (f_c + f_B)``, i.e. free of spatial aliasing."""
    if not (band_fc_hz > 0 and band_fB_hz >= 0):
        raise ValueError("band frequencies must be positive")
    limit = geometry.speed_of_sound / (band_fc_hz + band_fB_hz)
    return [p for p, d in geometry.pair_spacings().items() if d < limit]


@dataclass(frozen=True)
class SpatialCorrMatrix:
    r: np.ndarray
    sigma: np.ndarray
    band: int = 0
    azimuth: float = 0.0

    @property
    def rho(self) -> np.ndarray:
        """Normalized coefficients using the pseudoinverse of diag(sigma)."""
        inv = np.zeros_like(self.sigma)
        nz = self.sigma > 0
        inv[nz] = 1.0 / self.sigma[nz]
        return np.clip(inv[:, None] * self.r * inv[None, :], -1.0, 1.0)


def spatial_corr(frames: np.ndarray, band: int = 0, azimuth: float = 0.0) -> SpatialCorrMatrix:
    """Mean-removed spatial correlation of equal-length per-channel frames, shape (I, L)."""
    x = np.asarray(frames, dtype=float)
    L = x.shape[1]
    xc = x - x.mean(axis=1, keepdims=True)
    r = xc @ xc.T / L
    return SpatialCorrMatrix(r, np.sqrt(np.clip(np.diag(r), 0.0, None)), band, azimuth)


def subband_score(matrix: SpatialCorrMatrix, pairs) -> float:
    """Product of half-wave rectified coefficients over ``pairs``; 0 for no pairs."""
    if not pairs:
        return 0.0
    rho = matrix.rho
    return float(np.prod([max(rho[i, j], 0.0) for i, j in pairs]))


def frame_scores(spikes: np.ndarray, frame_len: int, pairs) -> np.ndarray:
    """Per-frame subband score for dense spike streams of shape (I, N).

    Vectorised :func:`spatial_corr` + :func:`subband_score` over consecutive
    non-overlapping frames; a trailing partial frame is dropped.
    """
    n_frames = spikes.shape[1] // frame_len
    if not pairs:
        return np.zeros(n_frames)
    xs = spikes[:, : n_frames * frame_len].reshape(spikes.shape[0], n_frames, frame_len)
    xs = xs.transpose(1, 0, 2)
    xs = xs - xs.mean(axis=2, keepdims=True)
    r = xs @ xs.transpose(0, 2, 1) / frame_len
    sigma = np.sqrt(np.clip(np.einsum("fii->fi", r), 0.0, None))
    inv = np.zeros_like(sigma)
    nz = sigma > 0
    inv[nz] = 1.0 / sigma[nz]
    ii = np.array([p[0] for p in pairs])
    jj = np.array([p[1] for p in pairs])
    rho = np.clip(r[:, ii, jj] * inv[:, ii] * inv[:, jj], -1.0, 1.0)
    return np.prod(np.maximum(rho, 0.0), axis=1)


@dataclass(frozen=True)
class OnsetMcccConfig:
    bank: GammatoneBank
    geometry: ArrayGeometry
    grid: SteeringGrid = SteeringGrid()
    lam: float = DEFAULT_LAMBDA
    frame_s: float = 0.02
    t_avg_s: float = 0.5
    t_shift_s: float = 0.5
    mode: str = "exact"
    threads: int = 1

    def __post_init__(self):
        if self.mode not in ALIGN_MODES:
            raise ValueError(f"mode must be one of {ALIGN_MODES}")


def onset_mccc_map(signal: MultichannelSignal, config: OnsetMcccConfig) -> SteeredResponseMap:
    """Onset-MCCC localization function over 20 ms frames and the scan grid."""
    geo, bank = config.geometry, config.bank
    if signal.num_channels < 2:
        raise ValueError("Onset-MCCC needs at least 2 channels")
    if signal.num_channels != geo.num_mics:
        raise ValueError(f"signal has {signal.num_channels} channels, geometry {geo.num_mics} mics")
    if signal.sample_rate != bank.sample_rate:
        raise ValueError("signal and filterbank sample rates differ")
    fs = signal.sample_rate
    L = int(round(config.frame_s * fs))
    az = config.grid.azimuths_deg
    # Advance of each channel onto mic 0: tau_j1 for every scan point.
    advances = geo.steering_delays(config.grid.points, ref=0) * fs
    pairs = [pair_set_for_band(geo, fc, fb) for fc, fb in zip(bank.center_hz, bank.bandwidth_hz)]
    if config.mode == "exact":
        scorer = _ExactScorer(signal.samples, bank, config.lam, L, pairs, advances)
    else:
        scorer = _FastScorer(signal.samples, bank, config.lam, L, pairs, advances)

    n_frames = signal.num_samples // L
    values = np.zeros((n_frames, az.size))
    chunks = np.array_split(np.arange(az.size), max(1, min(az.size, 4 * config.threads)))
    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            for idx, block in zip(chunks, pool.map(scorer.score_many, chunks)):
                values[:, idx] = block
    else:
        for idx in chunks:
            values[:, idx] = scorer.score_many(idx)
    times = (np.arange(n_frames) + 0.5) * L / fs
    return SteeredResponseMap(values, az, times, L / fs, L, config.t_avg_s, config.t_shift_s,
                              "onset-mccc")


class _ExactScorer:
    """Align -> filter -> detect per azimuth. Alignment and filtering are combined
    as one spectral product on the zero-padded full record."""

    def __init__(self, x, bank, lam, L, pairs, advances):
        n = x.shape[1]
        self.n, self.lam, self.L, self.pairs = n, lam, L, pairs
        self.offsets = bank.kernel_offsets
        margin = int(math.ceil(np.abs(advances).max())) + 1
        self.nfft = sfft.next_fast_len(n + bank.max_kernel_length + 2 * margin)
        self.margin = margin
        self.spec = sfft.rfft(x, self.nfft)
        self.resp = bank.frequency_responses(self.nfft)
        self.freq = sfft.rfftfreq(self.nfft)
        self.advances = advances
        # The reference channel is never shifted, so its spikes are shared.
        ref = sfft.irfft(self.spec[0] * self.resp, self.nfft)
        self.ref_spikes = [onset_spikes_dense(ref[b, off:off + n], lam) for b, off in enumerate(self.offsets)]

    def score_many(self, az_idx):
        L, n = self.L, self.n
        out = np.zeros((n // L, len(az_idx)))
        for col, a in enumerate(az_idx):
            ramp = np.exp(2j * np.pi * self.freq[None, :] * self.advances[a, 1:, None])
            shifted = self.spec[1:] * ramp
            acc = np.zeros(n // L)
            for b, off in enumerate(self.offsets):
                if not self.pairs[b]:
                    continue
                y = sfft.irfft(shifted * self.resp[b], self.nfft)
                # A positive advance wraps the earliest samples to the buffer end; the
                # slice below never reaches them because nfft leaves a margin.
                spikes = onset_spikes_dense(y[:, off:off + n], self.lam)
                acc += frame_scores(np.vstack([self.ref_spikes[b][None], spikes]), L, self.pairs[b])
            out[:, col] = acc / len(self.offsets)
        return out


class _FastScorer:
    """Detect once on unaligned subbands, then shift spike trains by the nearest
    whole-sample advance for each azimuth."""

    def __init__(self, x, bank, lam, L, pairs, advances):
        from .filterbank import decompose

        self.n, self.L, self.pairs = x.shape[1], L, pairs
        self.num_bands = bank.num_bands
        self.spikes = onset_spikes_dense(decompose(bank, x), lam)  # (I, B, N)
        self.shifts = np.rint(advances).astype(int)

    def score_many(self, az_idx):
        L, n = self.L, self.n
        out = np.zeros((n // L, len(az_idx)))
        for col, a in enumerate(az_idx):
            aligned = np.zeros_like(self.spikes)
            for j, s in enumerate(self.shifts[a]):
                # x(t + s): sample k takes input k + s.
                if s >= 0:
                    aligned[j, :, : n - s] = self.spikes[j, :, s:]
                else:
                    aligned[j, :, -s:] = self.spikes[j, :, : n + s]
            acc = np.zeros(n // L)
            for b in range(self.num_bands):
                acc += frame_scores(aligned[:, b, :], L, self.pairs[b])
            out[:, col] = acc / self.num_bands
        return out
