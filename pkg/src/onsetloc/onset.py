"""Distinct-onset detection and delta-spike encoding for subband streams.

A subband stream is half-wave rectified and tracked by a first-order recursive
average (the reflection-level estimate). The stream is split into positive runs
between zero crossings; each run contributes one spike at its peak when the
peak-to-average ratio reaches pi, and nothing otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.signal import lfilter

from .signal import write_csv

DRR_THRESHOLD = math.pi
DEFAULT_LAMBDA = 0.9998


def lambda_from_t60(t60_s: float, sample_rate: float) -> float:
    """Forgetting factor matching a reverberation time: ``10 ** (-3 / (T60 * fs))``."""
    if not t60_s > 0:
        raise ValueError(f"t60_s must be positive, got {t60_s}")
    if not sample_rate > 0:
        raise ValueError("sample_rate must be positive")
    lam = 10.0 ** (-3.0 / (t60_s * sample_rate))
    return float(min(max(lam, np.nextafter(0.0, 1.0)), np.nextafter(1.0, 0.0)))


@dataclass
class OnsetDetectorState:
    """Running reflection-level average for one (channel, band) stream."""

    lam: float = DEFAULT_LAMBDA
    running_avg: float = 0.0
    sample_rate: float = 48000.0

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")

    def update(self, rectified_sample: float) -> float:
        self.running_avg = recursive_average(self, rectified_sample)
        return self.running_avg


def recursive_average(state: OnsetDetectorState, rectified_sample: float) -> float:
    """One step of ``avg = lam * avg + (1 - lam) * sample`` (state is not mutated)."""
    if rectified_sample < 0:
        raise ValueError("recursive_average expects a rectified (non-negative) sample")
    return state.lam * state.running_avg + (1.0 - state.lam) * rectified_sample


def running_average(rectified: np.ndarray, lam: float, initial: float = 0.0) -> np.ndarray:
    """Vectorised recursive average along the last axis; identical arithmetic to
    repeated :func:`recursive_average` calls."""
    x = np.asarray(rectified, dtype=np.float64)
    if initial == 0.0:
        return lfilter([1.0 - lam], [1.0, -lam], x, axis=-1)
    zi = np.full(x.shape[:-1] + (1,), lam * initial)
    return lfilter([1.0 - lam], [1.0, -lam], x, axis=-1, zi=zi)[0]


@dataclass(frozen=True)
class SpikeTrain:
    """Sparse onset encoding of one stream: spike indices, amplitudes, stream length."""

    indices: np.ndarray
    amplitudes: np.ndarray
    length: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        amp = np.asarray(self.amplitudes, dtype=np.float64)
        if idx.shape != amp.shape or idx.ndim != 1:
            raise ValueError("indices and amplitudes must be 1-D and equal length")
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= self.length):
            raise ValueError("spike indices must be strictly increasing and inside the stream")
        if np.any(amp <= 0):
            raise ValueError("spike amplitudes must be positive")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "amplitudes", amp)

    def __len__(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.length)
        out[self.indices] = self.amplitudes
        return out

    @classmethod
    def from_dense(cls, dense) -> "SpikeTrain":
        d = np.asarray(dense, dtype=float)
        idx = np.flatnonzero(d)
        return cls(idx, d[idx], d.size)


@dataclass(frozen=True)
class RunDecisions:
    """Per positive run: its bounds, peak index, and the threshold test at the peak."""

    starts: np.ndarray
    stops: np.ndarray
    peaks: np.ndarray
    peak_values: np.ndarray
    avg_at_peak: np.ndarray
    accepted: np.ndarray
    length: int


def positive_runs(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Start (inclusive) and stop (exclusive) indices of maximal runs with x > 0."""
    pos = np.concatenate(([False], np.asarray(x) > 0, [False]))
    edges = np.flatnonzero(pos[1:] != pos[:-1])
    return edges[0::2], edges[1::2]


def evaluate_runs(stream, lam: float = DEFAULT_LAMBDA, initial: float = 0.0) -> RunDecisions:
    """Split a subband stream into positive runs and apply the pi ratio test at each run peak."""
    x = np.asarray(stream, dtype=np.float64)
    rect = np.maximum(x, 0.0)
    avg = running_average(rect, lam, initial)
    starts, stops = positive_runs(x)
    if starts.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return RunDecisions(empty, empty, empty, np.empty(0), np.empty(0), np.empty(0, bool), x.size)
    peaks = _run_argmax(rect, starts, stops)
    pv = rect[peaks]
    av = avg[peaks]
    with np.errstate(divide="ignore"):
        accepted = pv / av >= DRR_THRESHOLD
    return RunDecisions(starts, stops, peaks, pv, av, accepted, x.size)


def encode(decisions: RunDecisions) -> SpikeTrain:
    """Scaled delta encoding: one spike per accepted run, carrying the peak sample value."""
    keep = decisions.accepted
    return SpikeTrain(decisions.peaks[keep], decisions.peak_values[keep], decisions.length)


def detect_onsets(band_stream, state: OnsetDetectorState | None = None) -> SpikeTrain:
    """Detect distinct onsets in one subband stream and return their spike encoding.

    The average starts from ``state.running_avg`` and ``state`` is advanced to the
    end of the stream.
    """
    state = state if state is not None else OnsetDetectorState()
    x = np.asarray(band_stream, dtype=np.float64)
    dec = evaluate_runs(x, state.lam, state.running_avg)
    if x.size:
        state.running_avg = float(running_average(np.maximum(x, 0.0), state.lam, state.running_avg)[-1])
    return encode(dec)


def onset_spikes_dense(streams: np.ndarray, lam: float = DEFAULT_LAMBDA) -> np.ndarray:
    """Dense spike encoding of many streams at once (detection along the last axis).

    Equivalent to ``detect_onsets(row).to_dense()`` for each row, with zero initial
    average, computed by a compiled single-pass kernel.
    """
    x = np.asarray(streams, dtype=np.float64)
    rows = np.ascontiguousarray(x.reshape(-1, x.shape[-1]))
    out = np.zeros_like(rows)
    _spike_kernel(rows, float(lam), 1.0 - float(lam), out)
    return out.reshape(x.shape)


def onset_spikes_dense_numpy(streams: np.ndarray, lam: float = DEFAULT_LAMBDA) -> np.ndarray:
    """Vectorised numpy reference for :func:`onset_spikes_dense`."""
    x = np.asarray(streams, dtype=np.float64)
    shape = x.shape
    rows = x.reshape(-1, shape[-1])
    n = shape[-1]
    rect = np.maximum(rows, 0.0)
    avg = lfilter([1.0 - lam], [1.0, -lam], rect, axis=-1)
    # A zero column between rows keeps runs from spanning row boundaries.
    flat = np.concatenate([rect, np.zeros((rows.shape[0], 1))], axis=1).ravel()
    starts, stops = positive_runs(flat)
    out = np.zeros(flat.size)
    if starts.size:
        peaks = _run_argmax(flat, starts, stops)
        avg_flat = np.concatenate([avg, np.ones((rows.shape[0], 1))], axis=1).ravel()
        with np.errstate(divide="ignore"):
            ok = flat[peaks] / avg_flat[peaks] >= DRR_THRESHOLD
        out[peaks[ok]] = flat[peaks[ok]]
    return out.reshape(rows.shape[0], n + 1)[:, :n].reshape(shape)


@numba.njit(cache=True, nogil=True, error_model="numpy")
def _spike_kernel(rows, lam, gain, out):
    # Same arithmetic as lfilter([1 - lam], [1, -lam]): avg = gain * x + lam * avg.
    for r in range(rows.shape[0]):
        avg = 0.0
        best = 0.0
        best_avg = 1.0
        best_k = -1
        for k in range(rows.shape[1]):
            v = rows[r, k]
            if v > 0.0:
                avg = gain * v + lam * avg
                if v > best:
                    best = v
                    best_avg = avg
                    best_k = k
            else:
                avg = gain * 0.0 + lam * avg
                if best_k >= 0:
                    if best / best_avg >= DRR_THRESHOLD:
                        out[r, best_k] = best
                    best = 0.0
                    best_k = -1
        if best_k >= 0 and best / best_avg >= DRR_THRESHOLD:
            out[r, best_k] = best


def _run_argmax(rect: np.ndarray, starts: np.ndarray, stops: np.ndarray) -> np.ndarray:
    """Earliest index of the maximum within each [start, stop) run."""
    lengths = stops - starts
    bounds = np.empty(2 * starts.size, dtype=np.int64)
    bounds[0::2] = starts
    bounds[1::2] = stops
    padded = rect if bounds[-1] < rect.size else np.append(rect, 0.0)
    run_max = np.maximum.reduceat(padded, bounds)[0::2]
    run_id = np.repeat(np.arange(starts.size), lengths)
    member = _run_members(starts, lengths)
    hit_pos = np.flatnonzero(rect[member] == run_max[run_id])
    # Run ids along hit_pos are non-decreasing; each run's first hit is its earliest maximum.
    ids = run_id[hit_pos]
    first = np.flatnonzero(np.diff(ids, prepend=-1))
    return member[hit_pos[first]]


def _run_members(starts: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Concatenated sample indices of all runs."""
    total = int(lengths.sum())
    offsets = np.repeat(starts - np.concatenate([[0], np.cumsum(lengths)[:-1]]), lengths)
    return np.arange(total) + offsets


def spike_debug_rows(band: int, decisions: RunDecisions):
    keep = decisions.accepted
    for k, a, m in zip(decisions.peaks[keep], decisions.peak_values[keep], decisions.avg_at_peak[keep]):
        yield band, int(k), float(a), float(m)


def write_spike_debug_csv(path, per_band: list[RunDecisions]) -> None:
    """Debug dump: one row per spike with the running average at the spike."""
    rows = (r for b, dec in enumerate(per_band) for r in spike_debug_rows(b, dec))
    write_csv(path, ["band", "index", "amplitude", "running_avg"], rows)
