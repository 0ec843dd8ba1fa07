"""Core sample and geometry types, WAV/CSV I/O, noise, far-field steering."""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SPEED_OF_SOUND = 343.0


class WavFormatError(ValueError):
    """Raised for unsupported or malformed WAV files."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def wrap_deg(angle):
    """Wrap angles (degrees) into [0, 360)."""
    return np.mod(angle, 360.0)


def angular_distance(a, b):
    """Absolute circular difference between azimuths in degrees, in [0, 180]."""
    d = np.abs(np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), 360.0))
    return np.minimum(d, 360.0 - d)


@dataclass(frozen=True)
class MultichannelSignal:
    """Sampled audio with I channels sharing one rate.

    ``samples`` has shape (channels, n_samples). ``start_index`` is the integer
    sample offset of the first column, so absolute time is
    ``(start_index + k) / sample_rate``.
    """

    samples: np.ndarray
    sample_rate: float
    start_index: int = 0

    def __post_init__(self):
        data = np.array(self.samples, dtype=np.float64, copy=True)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2:
            raise ValueError("samples must be 1-D or (channels, n_samples)")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        data.setflags(write=False)
        object.__setattr__(self, "samples", data)
        object.__setattr__(self, "start_index", int(self.start_index))

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate

    def channel(self, i: int) -> np.ndarray:
        return self.samples[i]

    def scaled(self, gain: float) -> "MultichannelSignal":
        return MultichannelSignal(self.samples * gain, self.sample_rate, self.start_index)

    def select(self, channels: Sequence[int]) -> "MultichannelSignal":
        return MultichannelSignal(self.samples[list(channels)], self.sample_rate, self.start_index)


@dataclass(frozen=True)
class ArrayGeometry:
    """Planar microphone positions in meters."""

    mic_positions: np.ndarray
    speed_of_sound: float = SPEED_OF_SOUND
    max_spacing: float = field(init=False)

    def __post_init__(self):
        pos = np.array(self.mic_positions, dtype=np.float64, copy=True)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError("mic_positions must have shape (n_mics, 2)")
        if pos.shape[0] < 2:
            raise ValueError("an array needs at least 2 microphones")
        if not self.speed_of_sound > 0:
            raise ValueError("speed_of_sound must be positive")
        dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        off_diag = dist[~np.eye(len(pos), dtype=bool)]
        if np.any(off_diag <= 0):
            raise ValueError("microphone positions must be pairwise distinct")
        if not np.all(np.isfinite(pos)):
            raise ValueError("microphone positions must be finite")
        pos.setflags(write=False)
        object.__setattr__(self, "mic_positions", pos)
        object.__setattr__(self, "max_spacing", float(off_diag.max()))

    @classmethod
    def circular(cls, num_mics: int = 8, diameter: float = 0.1, speed_of_sound: float = SPEED_OF_SOUND,
                 start_deg: float = 0.0) -> "ArrayGeometry":
        """Uniform circular array centred on the origin; mic 0 at ``start_deg``."""
        ang = np.deg2rad(start_deg + 360.0 * np.arange(num_mics) / num_mics)
        r = diameter / 2.0
        return cls(np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1), speed_of_sound)

    @property
    def num_mics(self) -> int:
        return self.mic_positions.shape[0]

    def spacing(self, i: int, j: int) -> float:
        return float(np.linalg.norm(self.mic_positions[i] - self.mic_positions[j]))

    def pair_spacings(self) -> dict[tuple[int, int], float]:
        n = self.num_mics
        return {(i, j): self.spacing(i, j) for i in range(n) for j in range(i + 1, n)}

    def steering_delays(self, points: np.ndarray, ref: int = 0) -> np.ndarray:
        """TDOA of every mic relative to ``ref`` for each point; shape (n_points, n_mics).

        Entry ``[p, j]`` is ``(|p - m_j| - |p - m_ref|) / v``, i.e. how much later
        the wavefront reaches mic j than the reference.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        dist = np.linalg.norm(pts[:, None, :] - self.mic_positions[None, :, :], axis=-1)
        return (dist - dist[:, [ref]]) / self.speed_of_sound


@dataclass(frozen=True)
class SteeringGrid:
    """Azimuth scan points on a circle of fixed radius (counterclockwise from +x)."""

    radius_m: float = 1.0
    step_deg: float = 1.0

    def __post_init__(self):
        if not self.radius_m > 0:
            raise ValueError("radius_m must be positive")
        if not 0 < self.step_deg <= 360:
            raise ValueError("step_deg must be in (0, 360]")

    @property
    def azimuths_deg(self) -> np.ndarray:
        n = int(round(360.0 / self.step_deg))
        return np.arange(n) * (360.0 / n)

    @property
    def points(self) -> np.ndarray:
        th = np.deg2rad(self.azimuths_deg)
        return np.stack([self.radius_m * np.cos(th), self.radius_m * np.sin(th)], axis=1)


def azimuth_of(point) -> float:
    """Azimuth of a 2-D point as seen from the origin, degrees in [0, 360)."""
    x, y = float(point[0]), float(point[1])
    return float(wrap_deg(math.degrees(math.atan2(y, x))))


def steering_tdoa(geometry: ArrayGeometry, grid_point, mic_i: int, mic_j: int) -> float:
    """Far-field TDOA ``tau_ji`` in seconds: how much later mic j hears ``grid_point`` than mic i."""
    n = geometry.num_mics
    for idx in (mic_i, mic_j):
        if not (isinstance(idx, (int, np.integer)) and 0 <= idx < n):
            raise IndexError(f"microphone index {idx!r} out of range for {n} mics")
    p = np.asarray(grid_point, dtype=np.float64)
    d_j = np.linalg.norm(p - geometry.mic_positions[mic_j])
    d_i = np.linalg.norm(p - geometry.mic_positions[mic_i])
    return float((d_j - d_i) / geometry.speed_of_sound)


def add_noise(signal: MultichannelSignal, snr_db: float, seed: int) -> MultichannelSignal:
    """Add independent white Gaussian noise to each channel at a fixed per-channel SNR.

    Noise is rescaled to its exact empirical power, so the realised SNR over the
    record equals ``snr_db``. ``snr_db=inf`` returns the input unchanged.
    """
    if signal.num_samples == 0:
        raise ValueError("cannot add noise to an empty signal")
    if math.isinf(snr_db) and snr_db > 0:
        return signal
    x = signal.samples
    p_sig = np.mean(x ** 2, axis=1)
    if np.any(p_sig == 0):
        raise ValueError("SNR is undefined for a channel with zero power")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(x.shape)
    noise -= noise.mean(axis=1, keepdims=True)
    p_noise = np.mean(noise ** 2, axis=1)
    target = p_sig / 10.0 ** (snr_db / 10.0)
    noise *= np.sqrt(target / p_noise)[:, None]
    return MultichannelSignal(x + noise, signal.sample_rate, signal.start_index)


# --- WAV ------------------------------------------------------------------

_PCM = 1
_FLOAT = 3
_EXTENSIBLE = 0xFFFE


def read_wav(path) -> MultichannelSignal:
    """Read a RIFF/WAVE file holding 16-bit PCM or 32-bit float samples."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise WavFormatError("file too short for a RIFF header", len(data))
    if data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError("not a RIFF/WAVE file", 0)
    pos = 12
    fmt = None
    payload = None
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = pos + 8
        if body + size > len(data):
            raise WavFormatError(
                f"chunk {cid!r} declares {size} bytes but only {len(data) - body} remain", pos + 4)
        if cid == b"fmt ":
            if size < 16:
                raise WavFormatError("fmt chunk shorter than 16 bytes", pos + 4)
            tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", data, body)
            if tag == _EXTENSIBLE:
                if size < 40:
                    raise WavFormatError("extensible fmt chunk shorter than 40 bytes", pos + 4)
                (tag,) = struct.unpack_from("<H", data, body + 24)
            fmt = (tag, channels, rate, block_align, bits, body)
        elif cid == b"data":
            payload = (body, size)
        pos = body + size + (size & 1)
    if fmt is None:
        raise WavFormatError("missing fmt chunk", 12)
    if payload is None:
        raise WavFormatError("missing data chunk", pos)
    tag, channels, rate, block_align, bits, fmt_off = fmt
    if channels < 1 or rate < 1:
        raise WavFormatError("invalid channel count or sample rate", fmt_off)
    if tag == _PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif tag == _FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise WavFormatError(f"unsupported encoding (format tag {tag}, {bits} bits)", fmt_off)
    body, size = payload
    if block_align != channels * dtype.itemsize:
        raise WavFormatError("block_align inconsistent with channels and bit depth", fmt_off)
    if size % block_align:
        raise WavFormatError("data chunk length is not a whole number of frames", body - 4)
    raw = np.frombuffer(data, dtype=dtype, count=size // dtype.itemsize, offset=body)
    samples = raw.reshape(-1, channels).T.astype(np.float64) * scale
    return MultichannelSignal(samples, float(rate))


def write_wav(signal: MultichannelSignal, path, encoding: str = "float32") -> None:
    """Write ``signal`` as RIFF/WAVE; ``encoding`` is ``"float32"`` or ``"pcm16"``."""
    rate = signal.sample_rate
    if abs(rate - round(rate)) > 1e-9:
        raise ValueError("WAV requires an integer sample rate")
    x = signal.samples.T
    if encoding == "float32":
        tag, dtype = _FLOAT, np.dtype("<f4")
        frames = x.astype(dtype)
    elif encoding == "pcm16":
        tag, dtype = _PCM, np.dtype("<i2")
        frames = np.clip(np.round(x * 32768.0), -32768, 32767).astype(dtype)
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    channels = signal.num_channels
    block = channels * dtype.itemsize
    payload = np.ascontiguousarray(frames).tobytes()
    fmt = struct.pack("<HHIIHH", tag, channels, int(round(rate)), int(round(rate)) * block, block,
                      dtype.itemsize * 8)
    riff_size = 4 + (8 + len(fmt)) + (8 + len(payload) + (len(payload) & 1))
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", riff_size) + b"WAVE")
        fh.write(b"fmt " + struct.pack("<I", len(fmt)) + fmt)
        fh.write(b"data" + struct.pack("<I", len(payload)) + payload)
        if len(payload) & 1:
            fh.write(b"\x00")


# --- CSV ------------------------------------------------------------------

def format_float(value: float) -> str:
    """Shortest round-tripping decimal representation, independent of locale."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) for v in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV (no header)")
    return rows[0], rows[1:]
