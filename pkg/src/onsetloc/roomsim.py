"""Stochastic reverberant scenes: RIRs, harmonic sources and multichannel mixing.

The RIR is a direct-path tap followed, after a gap, by an exponentially decaying
Gaussian tail. Direct paths are rendered with band-limited fractional delays so
inter-microphone TDOAs are exact to well under a sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import fftconvolve, hilbert

from .signal import (SPEED_OF_SOUND, ArrayGeometry, MultichannelSignal, add_noise, azimuth_of,
                     write_csv)

MIN_DISTANCE_M = 0.1
TRIM_DB = 80.0
SINC_TAPS = 32
DEFAULT_GAP_S = 0.006
DEFAULT_BLOCK_S = 0.1
CROSSFADE_S = 0.01


# --- RIR ------------------------------------------------------------------

@dataclass(frozen=True)
class StochasticRir:
    direct_delay_s: float
    direct_gain: float
    gap_s: float
    t60_s: float
    taps: np.ndarray
    seed: int
    sample_rate: float
    diffuse_scale: float = 1.0

    @property
    def direct_index(self) -> int:
        return int(round(self.direct_delay_s * self.sample_rate))

    @property
    def diffuse_start(self) -> int:
        return int(round((self.direct_delay_s + self.gap_s) * self.sample_rate))

    def diffuse_taps(self) -> np.ndarray:
        """Taps with the direct-path tap removed."""
        out = self.taps.copy()
        out[self.direct_index] = 0.0
        return out


def sabine_diffuse_scale(distance_m: float, t60_s: float, room_volume_m3: float,
                         sample_rate: float) -> float:
    """Tail scale giving the direct-to-reverberant energy ratio of a Sabine room.

    The critical distance of a room is ``0.057 * sqrt(V / T60)``; at distance r the
    reverberant-to-direct energy ratio is ``(r / r_c) ** 2``. The unit-variance tail
    has energy ``fs * T60 / (6 ln 10)`` relative to the direct tap, which this
    scale corrects.
    """
    r_c = 0.057 * math.sqrt(room_volume_m3 / t60_s)
    tail_energy = sample_rate * t60_s / (6.0 * math.log(10.0))
    return float(max(distance_m, MIN_DISTANCE_M) / r_c / math.sqrt(tail_energy))


def generate_rir(geometry_distance_m: float, t60_s: float, gap_s: float = DEFAULT_GAP_S,
                 sample_rate: float = 48000.0, seed: int = 0, *,
                 speed_of_sound: float = SPEED_OF_SOUND, diffuse_scale: float = 1.0) -> StochasticRir:
    """Direct tap plus exponentially decaying Gaussian tail, trimmed at -80 dB.

    The tail tap at time t (seconds after the direct path, t >= gap) is
    ``h_d * diffuse_scale * nu * 10 ** (-3 t / T60)`` with nu ~ N(0, 1) i.i.d.
    """
    if not t60_s > 0:
        raise ValueError(f"t60_s must be positive, got {t60_s}")
    if not gap_s > 0:
        raise ValueError(f"gap_s must be positive, got {gap_s}")
    if not geometry_distance_m > 0:
        raise ValueError(f"distance must be positive, got {geometry_distance_m}")
    fs = sample_rate
    td = geometry_distance_m / speed_of_sound
    hd = 1.0 / max(geometry_distance_m, MIN_DISTANCE_M)
    k_direct = int(round(td * fs))
    k_start = int(round((td + gap_s) * fs))
    # Envelope reaches -TRIM_DB at t = TRIM_DB / 20 * T60 / 3 after the direct path.
    k_end = int(math.ceil((td + TRIM_DB / 60.0 * t60_s) * fs))
    taps = np.zeros(max(k_end, k_start) + 1)
    taps[k_direct] = hd
    k = np.arange(k_start, taps.size)
    nu = np.random.default_rng(seed).standard_normal(k.size)
    taps[k_start:] = hd * diffuse_scale * nu * 10.0 ** (-3.0 * (k / fs - td) / t60_s)
    taps.setflags(write=False)
    return StochasticRir(td, hd, gap_s, t60_s, taps, int(seed), fs, diffuse_scale)


def schroeder_t60(taps: np.ndarray, sample_rate: float, fit_db=(-5.0, -35.0)) -> float:
    """T60 from a line fit to the Schroeder backward-integrated energy decay curve."""
    e = np.cumsum(np.asarray(taps, dtype=float)[::-1] ** 2)[::-1]
    edc = 10.0 * np.log10(e / e[0] + 1e-300)
    hi, lo = fit_db
    sel = np.flatnonzero((edc <= hi) & (edc >= lo))
    t = sel / sample_rate
    slope, _ = np.polyfit(t, edc[sel], 1)
    return float(-60.0 / slope)


# --- fractional delay -------------------------------------------------------

def sinc_kernel(frac: float, taps: int = SINC_TAPS) -> np.ndarray:
    """Hann-windowed sinc delaying by ``frac`` in [0, 1) samples.

    Kernel index m corresponds to lag ``m - (taps // 2 - 1)``.
    """
    half = taps // 2
    m = np.arange(taps) - (half - 1)
    x = m - frac
    w = 0.5 * (1.0 + np.cos(np.pi * x / half))
    w[np.abs(x) >= half] = 0.0
    return np.sinc(x) * w


def fractional_delay(x: np.ndarray, delay_samples: float, taps: int = SINC_TAPS) -> np.ndarray:
    """Delay ``x`` by a real number of samples; output has the input length."""
    x = np.asarray(x, dtype=float)
    n0 = int(math.floor(delay_samples))
    y = np.convolve(x, sinc_kernel(delay_samples - n0, taps))
    src = np.arange(x.size) - n0 + (taps // 2 - 1)
    ok = (src >= 0) & (src < y.size)
    out = np.zeros_like(x)
    out[ok] = y[src[ok]]
    return out


def render_kernel(rir: StochasticRir, taps: int = SINC_TAPS) -> tuple[np.ndarray, int]:
    """Dense source-to-mic kernel with a fractional direct path.

    Returns ``(kernel, lead)``: kernel index ``lead + k`` is lag ``k`` samples.
    """
    fs = rir.sample_rate
    lead = taps // 2
    kern = np.zeros(rir.taps.size + lead + taps)
    kern[lead:lead + rir.taps.size] = rir.diffuse_taps()
    d = rir.direct_delay_s * fs
    n0 = int(math.floor(d))
    h = sinc_kernel(d - n0, taps)
    first = lead + n0 - (taps // 2 - 1)
    kern[first:first + taps] += rir.direct_gain * h
    return kern, lead


# --- harmonic sources -------------------------------------------------------

@dataclass(frozen=True)
class Syllable:
    """Envelope segment: linear rise, hold, linear decay (seconds, from ``start``)."""

    start: float
    rise: float
    hold: float
    decay: float
    level: float = 1.0

    @property
    def end(self) -> float:
        return self.start + self.rise + self.hold + self.decay

    def envelope(self, t: np.ndarray) -> np.ndarray:
        u = t - self.start
        env = np.zeros_like(t)
        r = (u >= 0) & (u < self.rise)
        env[r] = u[r] / self.rise
        h = (u >= self.rise) & (u < self.rise + self.hold)
        env[h] = 1.0
        d = (u >= self.rise + self.hold) & (u < self.rise + self.hold + self.decay)
        env[d] = 1.0 - (u[d] - self.rise - self.hold) / self.decay
        return env * self.level


@dataclass(frozen=True)
class HarmonicSourceSpec:
    f0_hz: float
    num_harmonics: int
    duration_s: float
    syllables: tuple = ()
    harmonic_weights: tuple | None = None
    phases: tuple | None = None

    def __post_init__(self):
        if not self.f0_hz > 0:
            raise ValueError("f0_hz must be positive")
        if self.num_harmonics < 1:
            raise ValueError("num_harmonics must be >= 1")
        if self.harmonic_weights is not None and len(self.harmonic_weights) != self.num_harmonics:
            raise ValueError("harmonic_weights length must equal num_harmonics")
        if self.harmonic_weights is not None and min(self.harmonic_weights) < 0:
            raise ValueError("harmonic envelopes must be non-negative")
        if self.phases is not None and len(self.phases) != self.num_harmonics:
            raise ValueError("phases length must equal num_harmonics")

    def envelope(self, t: np.ndarray) -> np.ndarray:
        if not self.syllables:
            return np.ones_like(t)
        return np.maximum.reduce([s.envelope(t) for s in self.syllables])


def random_syllables(duration_s: float, seed: int, *, rise=(0.02, 0.05), hold=(0.05, 0.15),
                     decay=(0.03, 0.08), gap=(0.06, 0.2), first_start: float = 0.02) -> tuple:
    """Random onset-rich syllable schedule covering ``duration_s``."""
    rng = np.random.default_rng(seed)
    out = []
    t = first_start + rng.uniform(0.0, 0.1)
    while True:
        s = Syllable(t, rng.uniform(*rise), rng.uniform(*hold), rng.uniform(*decay),
                     float(rng.uniform(0.6, 1.0)))
        if s.end > duration_s:
            break
        out.append(s)
        t = s.end + rng.uniform(*gap)
    return tuple(out)


def speech_like_source(f0_hz: float, duration_s: float, seed: int, max_freq_hz: float = 4000.0,
                       **syllable_kw) -> HarmonicSourceSpec:
    """Harmonic source with 1/sqrt(h) harmonic roll-off, random phases and syllables."""
    n_h = max(1, int(max_freq_hz // f0_hz))
    rng = np.random.default_rng([seed, 1])
    weights = tuple(float(w) for w in 1.0 / np.sqrt(np.arange(1, n_h + 1)))
    phases = tuple(float(p) for p in rng.uniform(0, 2 * np.pi, n_h))
    return HarmonicSourceSpec(f0_hz, n_h, duration_s, random_syllables(duration_s, seed, **syllable_kw),
                              weights, phases)


def synthesize_harmonic_speech(spec: HarmonicSourceSpec, sample_rate: float) -> np.ndarray:
    """Sum of enveloped harmonics of ``f0``, peak-normalised to 0.5."""
    if spec.num_harmonics * spec.f0_hz >= sample_rate / 2:
        raise ValueError(
            f"harmonic {spec.num_harmonics} at {spec.num_harmonics * spec.f0_hz} Hz aliases at fs={sample_rate}")
    n = int(round(spec.duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    w = spec.harmonic_weights or (1.0,) * spec.num_harmonics
    ph = spec.phases or (0.0,) * spec.num_harmonics
    carrier = np.zeros(n)
    for h in range(1, spec.num_harmonics + 1):
        carrier += w[h - 1] * np.cos(2 * np.pi * h * spec.f0_hz * t + ph[h - 1])
    x = spec.envelope(t) * carrier
    peak = np.abs(x).max()
    return x * (0.5 / peak) if peak > 0 else x


def hilbert_envelope(x: np.ndarray) -> np.ndarray:
    return np.abs(hilbert(x))


# --- trajectories and scenes -----------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear path through time-stamped 2-D waypoints."""

    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.positions, dtype=float)
        if t.ndim != 1 or p.shape != (t.size, 2):
            raise ValueError("need times (n,) and positions (n, 2)")
        if t.size < 1 or np.any(np.diff(t) <= 0):
            raise ValueError("waypoint timestamps must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", p)

    @classmethod
    def arc(cls, radius_m: float, az_start_deg: float, az_end_deg: float, t_start: float,
            t_end: float, num_points: int = 91) -> "Trajectory":
        """Constant-speed circular arc around the origin (counterclockwise if end > start)."""
        t = np.linspace(t_start, t_end, num_points)
        az = np.deg2rad(np.linspace(az_start_deg, az_end_deg, num_points))
        return cls(t, np.stack([radius_m * np.cos(az), radius_m * np.sin(az)], axis=1))

    def position_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        x = np.interp(t, self.times, self.positions[:, 0])
        y = np.interp(t, self.times, self.positions[:, 1])
        return np.stack([x, y], axis=-1)


@dataclass(frozen=True)
class SceneSource:
    signal: np.ndarray
    position: np.ndarray | Trajectory
    name: str = ""

    def position_at(self, t) -> np.ndarray:
        if isinstance(self.position, Trajectory):
            return self.position.position_at(t)
        return np.broadcast_to(np.asarray(self.position, dtype=float), np.shape(t) + (2,))


@dataclass(frozen=True)
class Room:
    """Reverberation parameters shared by all source-mic paths of a scene.

    ``t60_s=None`` renders anechoically. ``room_volume_m3`` switches the tail level
    from the unit-variance model to a Sabine-calibrated direct-to-reverberant ratio.
    """

    t60_s: float | None = 0.6
    gap_s: float = DEFAULT_GAP_S
    room_volume_m3: float | None = None
    block_s: float = DEFAULT_BLOCK_S

    def rir(self, distance: float, seed: int, fs: float, c: float) -> StochasticRir:
        if self.t60_s is None or self.t60_s <= 0:
            td = distance / c
            taps = np.zeros(int(round(td * fs)) + 1)
            taps[-1] = 1.0 / max(distance, MIN_DISTANCE_M)
            return StochasticRir(td, taps[-1], self.gap_s, 0.0, taps, seed, fs, 0.0)
        scale = 1.0
        if self.room_volume_m3 is not None:
            scale = sabine_diffuse_scale(distance, self.t60_s, self.room_volume_m3, fs)
        return generate_rir(distance, self.t60_s, self.gap_s, fs, seed, speed_of_sound=c,
                            diffuse_scale=scale)


def path_seed(seed: int, source: int, mic: int) -> int:
    return int(np.random.SeedSequence([seed, source, mic]).generate_state(1)[0])


def _convolve_path(sig: np.ndarray, rir: StochasticRir, start: int, stop: int) -> np.ndarray:
    """Samples [start, stop) of ``sig * kernel`` where kernel is the fractional-direct RIR."""
    kern, lead = render_kernel(rir)
    # Output sample n uses input samples n + lead - (len(kern) - 1) .. n + lead.
    lo = max(0, start + lead - (kern.size - 1))
    hi = min(sig.size, stop + lead)
    if hi <= lo:
        return np.zeros(stop - start)
    y = fftconvolve(sig[lo:hi], kern)
    out = np.zeros(stop - start)
    # y index m corresponds to output sample lo + m - lead.
    m0 = start + lead - lo
    m1 = min(y.size, stop + lead - lo)
    if m1 > m0:
        out[: m1 - m0] = y[m0:m1]
    return out


def render_scene(sources: Sequence[SceneSource], geometry: ArrayGeometry, room: Room,
                 snr_db: float = math.inf, seed: int = 0,
                 sample_rate: float = 48000.0) -> MultichannelSignal:
    """Mix reverberant sources at every microphone and add white noise.

    Static sources use one RIR per source-mic path. Moving sources are rendered in
    blocks: the RIR follows the block-centre position (same tail seed per path) and
    block outputs are cross-faded linearly over 10 ms at the joins.
    """
    if not sources:
        raise ValueError("a scene needs at least one source")
    n = max(len(s.signal) for s in sources)
    out = np.zeros((geometry.num_mics, n))
    c = geometry.speed_of_sound
    for q, src in enumerate(sources):
        sig = np.zeros(n)
        sig[: len(src.signal)] = src.signal
        if isinstance(src.position, Trajectory):
            if src.position.times[-1] > len(src.signal) / sample_rate + 1e-9:
                raise ValueError(f"trajectory of source {q} extends past its signal duration")
            out += _render_moving(sig, src.position, geometry, room, seed, q, sample_rate)
        else:
            pos = np.asarray(src.position, dtype=float)
            for i, m in enumerate(geometry.mic_positions):
                rir = room.rir(float(np.linalg.norm(pos - m)), path_seed(seed, q, i), sample_rate, c)
                out[i] += _convolve_path(sig, rir, 0, n)
    mix = MultichannelSignal(out, sample_rate)
    return add_noise(mix, snr_db, int(np.random.SeedSequence([seed, 99991]).generate_state(1)[0]))


def _block_windows(n: int, block: int, fade: int) -> list[tuple[int, int, np.ndarray]]:
    """(start, stop, weights) per block; weights of overlapping blocks sum to one.

    Each join at a block boundary ``a`` is a linear ramp over ``[a - fade // 2, a - fade // 2 + fade)``.
    """
    fade = max(1, min(fade, block))
    n_blocks = int(math.ceil(n / block))
    out = []
    for b in range(n_blocks):
        a, e = b * block, min(n, (b + 1) * block)
        lo = max(0, a - fade // 2) if b > 0 else 0
        hi = min(n, e - fade // 2 + fade) if b < n_blocks - 1 else n
        idx = np.arange(lo, hi)
        w = np.ones(idx.size)
        if b > 0:
            w = np.minimum(w, np.clip((idx - (a - fade // 2) + 0.5) / fade, 0, 1))
        if b < n_blocks - 1:
            w = np.minimum(w, 1 - np.clip((idx - (e - fade // 2) + 0.5) / fade, 0, 1))
        out.append((lo, hi, w))
    return out


def _render_moving(sig, traj, geometry, room, seed, q, fs):
    n = sig.size
    out = np.zeros((geometry.num_mics, n))
    block = max(1, int(round(room.block_s * fs)))
    fade = max(2, int(round(CROSSFADE_S * fs)))
    for lo, hi, w in _block_windows(n, block, fade):
        centre = traj.position_at(0.5 * (lo + hi) / fs)
        for i, m in enumerate(geometry.mic_positions):
            rir = room.rir(float(np.linalg.norm(centre - m)), path_seed(seed, q, i), fs,
                           geometry.speed_of_sound)
            out[i, lo:hi] += w * _convolve_path(sig, rir, lo, hi)
    return out


# --- ground truth -----------------------------------------------------------

def source_activity(signal: np.ndarray, sample_rate: float, times: np.ndarray,
                    window_s: float = 0.5, rel_floor: float = 1e-3) -> np.ndarray:
    """True where the source has energy within +-window/2 of each time."""
    x = np.abs(np.asarray(signal, dtype=float))
    peak = x.max() if x.size else 0.0
    if peak == 0:
        return np.zeros(len(times), dtype=bool)
    loud = np.concatenate([[0], np.cumsum(x > rel_floor * peak)])
    half = int(round(window_s / 2 * sample_rate))
    k = np.round(np.asarray(times) * sample_rate).astype(int)
    lo = np.clip(k - half, 0, x.size)
    hi = np.clip(k + half + 1, 0, x.size)
    return (loud[hi] - loud[lo]) > 0


def ground_truth_rows(sources: Sequence[SceneSource], sample_rate: float, duration_s: float,
                      hop_s: float = 0.01, activity_window_s: float = 0.5):
    """(time_s, source_id, azimuth_deg, active_flag) rows on a regular time grid."""
    times = np.arange(int(math.floor(duration_s / hop_s)) + 1) * hop_s
    rows = []
    per_source = []
    for q, src in enumerate(sources):
        pos = src.position_at(times)
        act = source_activity(src.signal, sample_rate, times, activity_window_s)
        per_source.append((pos, act))
    for k, t in enumerate(times):
        for q, (pos, act) in enumerate(per_source):
            rows.append((round(float(t), 9), q, azimuth_of(pos[k]), int(act[k])))
    return rows


def write_ground_truth(path, rows) -> None:
    write_csv(path, ["time_s", "source_id", "azimuth_deg", "active_flag"], rows)
