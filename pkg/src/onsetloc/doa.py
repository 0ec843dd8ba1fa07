"""Steered-response maps, trailing temporal averaging and local-peak DOA picking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def temporal_average(values: np.ndarray, frame_times_s: np.ndarray, frame_hop_s: float,
                     t_avg_s: float, t_shift_s: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean of consecutive frames over windows of ``t_avg`` spaced by ``t_shift``.

    Returns ``(averaged, window_times)`` where each time is the mean centre time of
    the frames in the window. A record shorter than one window yields a single
    window over all frames; trailing partial windows are dropped otherwise.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if not 0 < t_shift_s <= t_avg_s + 1e-12:
        raise ValueError("t_shift must lie in (0, t_avg]")
    if n == 0:
        return np.zeros((0,) + values.shape[1:]), np.zeros(0)
    n_avg = max(1, int(round(t_avg_s / frame_hop_s)))
    n_shift = max(1, int(round(t_shift_s / frame_hop_s)))
    if n < n_avg:
        starts = [0]
        n_avg = n
    else:
        starts = range(0, n - n_avg + 1, n_shift)
    avg = np.stack([values[s:s + n_avg].mean(axis=0) for s in starts])
    times = np.array([np.mean(frame_times_s[s:s + n_avg]) for s in starts])
    return avg, times


@dataclass(frozen=True)
class SteeredResponseMap:
    """Localization function over frame time x azimuth, plus its trailing average."""

    values: np.ndarray
    azimuths_deg: np.ndarray
    frame_times_s: np.ndarray
    frame_hop_s: float
    frame_len: int
    t_avg_s: float
    t_shift_s: float
    method: str = ""
    averaged: np.ndarray = field(init=False)
    averaged_times_s: np.ndarray = field(init=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != len(self.azimuths_deg):
            raise ValueError("values must have shape (frames, azimuths)")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "azimuths_deg", np.asarray(self.azimuths_deg, dtype=float))
        object.__setattr__(self, "frame_times_s", np.asarray(self.frame_times_s, dtype=float))
        avg, times = temporal_average(v, self.frame_times_s, self.frame_hop_s, self.t_avg_s, self.t_shift_s)
        object.__setattr__(self, "averaged", avg)
        object.__setattr__(self, "averaged_times_s", times)

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    def histogram(self) -> np.ndarray:
        """Whole-record mean over frames (the static-scene DOA histogram)."""
        if self.num_frames == 0:
            return np.zeros(len(self.azimuths_deg))
        return self.values.mean(axis=0)


def _window_offsets(azimuths_deg: np.ndarray, resolution_deg: float) -> np.ndarray:
    step = 360.0 / len(azimuths_deg)
    k = int(np.floor(resolution_deg / step + 1e-9))
    return np.arange(-k, k + 1)


def peak_mask(values: np.ndarray, azimuths_deg: np.ndarray, threshold: float,
              resolution_deg: float) -> np.ndarray:
    """Boolean mask of distinct local peaks along the last (circular azimuth) axis.

    A grid point qualifies if it reaches ``threshold`` and is the maximum over
    the circular window of +-``resolution_deg``. Ties inside a window go to the
    lowest grid index.
    """
    if not 0 < resolution_deg <= 180:
        raise ValueError("resolution_deg must lie in (0, 180]")
    v = np.asarray(values, dtype=float)
    n = v.shape[-1]
    idx = np.arange(n)
    ok = v >= threshold
    for off in _window_offsets(azimuths_deg, resolution_deg):
        if off == 0:
            continue
        j = (idx + off) % n
        other = v[..., j]
        # Strictly greater than neighbours with a lower index; >= otherwise.
        beats = np.where(j < idx, v > other, v >= other)
        ok &= beats
    return ok


def pick_doas(values: np.ndarray, azimuths_deg: np.ndarray, threshold: float,
              resolution_deg: float = 20.0):
    """DOA estimates from a 1-D map, or a list of estimate arrays for a 2-D map."""
    v = np.asarray(values, dtype=float)
    az = np.asarray(azimuths_deg, dtype=float)
    mask = peak_mask(v, az, threshold, resolution_deg)
    if v.ndim == 1:
        return az[mask]
    return [az[m] for m in mask]


def relative_threshold(values: np.ndarray, fraction: float) -> float:
    """``fraction`` of the map maximum; an all-zero map gets an unreachable threshold."""
    peak = float(np.max(values)) if np.size(values) else 0.0
    return fraction * peak if peak > 0 else np.inf


def calibrate_threshold(calibration_map: SteeredResponseMap, fraction: float = 0.5) -> float:
    """Threshold as a fraction of the averaged map's maximum on a calibration run."""
    if calibration_map.averaged.size == 0:
        raise ValueError("calibration map is empty")
    return float(fraction * calibration_map.averaged.max())
