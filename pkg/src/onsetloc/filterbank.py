"""ERB-spaced gammatone filterbank with per-band envelope-peak alignment.

Each band kernel is the sampled gammatone

    g(t) = (t + t_d)^(order-1) * exp(-2*pi*f_b*(t + t_d)) * cos(2*pi*f_c*t),  t >= -t_d

with ``t_d = (order - 1) / (2*pi*f_b)`` the envelope-peak delay, so every band's
envelope peaks at t = 0 and outputs line up across bands. Kernels are FIR,
truncated where the envelope falls 60 dB below its peak.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .signal import write_csv

ERB_BANDWIDTH_FACTOR = 1.019
TRUNCATION_DB = 60.0


def erb(f_hz):
    """Glasberg-Moore equivalent rectangular bandwidth in Hz."""
    return 24.7 * (4.37 * np.asarray(f_hz, dtype=float) / 1000.0 + 1.0)


def erb_rate(f_hz):
    """Number of ERBs below ``f_hz``."""
    return 21.4 * np.log10(4.37 * np.asarray(f_hz, dtype=float) / 1000.0 + 1.0)


def erb_rate_inverse(e):
    return (10.0 ** (np.asarray(e, dtype=float) / 21.4) - 1.0) * 1000.0 / 4.37


@dataclass(frozen=True)
class GammatoneBank:
    center_hz: np.ndarray
    bandwidth_hz: np.ndarray
    order: int
    sample_rate: float
    align_delay_s: np.ndarray = field(init=False)
    kernels: tuple = field(init=False, repr=False, compare=False)
    kernel_offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        fc = np.asarray(self.center_hz, dtype=float)
        fb = np.asarray(self.bandwidth_hz, dtype=float)
        object.__setattr__(self, "center_hz", fc)
        object.__setattr__(self, "bandwidth_hz", fb)
        object.__setattr__(self, "align_delay_s", (self.order - 1) / (2 * np.pi * fb))
        kernels, offsets = zip(*(_band_kernel(c, b, self.order, self.sample_rate)
                                 for c, b in zip(fc, fb)))
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "kernel_offsets", np.array(offsets, dtype=int))

    @property
    def num_bands(self) -> int:
        return len(self.center_hz)

    @property
    def max_kernel_length(self) -> int:
        return max(len(k) for k in self.kernels)

    def frequency_responses(self, nfft: int) -> np.ndarray:
        """Kernel spectra on the ``rfft`` grid of size ``nfft``, shape (num_bands, nfft // 2 + 1).

        After the inverse transform, band ``b`` output sample 0 sits at index
        ``kernel_offsets[b]``.
        """
        out = np.empty((self.num_bands, nfft // 2 + 1), dtype=np.complex128)
        for b, k in enumerate(self.kernels):
            out[b] = sfft.rfft(k, nfft)
        return out

    def response_at(self, band: int, f_hz) -> np.ndarray:
        """Complex frequency response of one band kernel at arbitrary frequencies."""
        k = self.kernels[band]
        n = np.arange(len(k)) - self.kernel_offsets[band]
        f = np.atleast_1d(np.asarray(f_hz, dtype=float))
        return np.exp(-2j * np.pi * np.outer(f, n) / self.sample_rate) @ k

    def to_csv(self, path) -> None:
        rows = ((b, float(c), float(w), float(d)) for b, (c, w, d)
                in enumerate(zip(self.center_hz, self.bandwidth_hz, self.align_delay_s)))
        write_csv(path, ["band", "center_hz", "bandwidth_hz", "align_delay_s"], rows)


def _band_kernel(fc: float, fb: float, order: int, fs: float):
    td = (order - 1) / (2 * np.pi * fb)
    offset = int(math.floor(td * fs))
    # Envelope e(u) = u^(order-1) exp(-2 pi fb u), u = t + td, peaks at u = td.
    floor = 10.0 ** (-TRUNCATION_DB / 20.0)
    u_end = td
    step = 1.0 / fb
    while _env_ratio(u_end, td, fb, order) > floor:
        u_end += step
    n = np.arange(int(math.ceil(u_end * fs)) + 1)
    t = (n - offset) / fs
    u = t + td
    env = np.where(u > 0, u, 0.0) ** (order - 1) * np.exp(-2 * np.pi * fb * u)
    k = env * np.cos(2 * np.pi * fc * t)
    # Unit peak magnitude response.
    nfft = sfft.next_fast_len(max(16 * len(k), int(fs)))
    peak = np.abs(sfft.rfft(k, nfft)).max()
    return k / peak, offset


def _env_ratio(u, td, fb, order):
    if order == 1:
        return math.exp(-2 * math.pi * fb * u)
    return (u / td) ** (order - 1) * math.exp(-2 * math.pi * fb * (u - td))


def design_bank(fmin_hz: float = 250.0, fmax_hz: float = 3600.0, num_bands: int = 16,
                order: int = 4, sample_rate: float = 48000.0) -> GammatoneBank:
    """Gammatone bank with centers uniformly spaced on the ERB-rate scale."""
    if num_bands < 1:
        raise ValueError("num_bands must be >= 1")
    if order < 1:
        raise ValueError("order must be >= 1")
    nyq = sample_rate / 2.0
    if not (0 < fmin_hz <= fmax_hz < nyq):
        raise ValueError(f"need 0 < fmin <= fmax < Nyquist ({nyq} Hz), got {fmin_hz}, {fmax_hz}")
    if fmin_hz == fmax_hz and num_bands > 1:
        raise ValueError("fmin == fmax only allowed with a single band")
    centers = erb_rate_inverse(np.linspace(erb_rate(fmin_hz), erb_rate(fmax_hz), num_bands))
    centers[0] = fmin_hz
    if num_bands > 1:
        centers[-1] = fmax_hz
    return GammatoneBank(centers, ERB_BANDWIDTH_FACTOR * erb(centers), int(order), float(sample_rate))


def decompose(bank: GammatoneBank, signal, sample_rate: float | None = None) -> np.ndarray:
    """Filter ``signal`` (shape (..., n)) through every band.

    Returns shape (..., num_bands, n): each band is the kernel convolution advanced
    by the band's alignment delay, truncated to the input length.
    """
    if sample_rate is not None and sample_rate != bank.sample_rate:
        raise ValueError(f"signal rate {sample_rate} != bank rate {bank.sample_rate}")
    x = np.asarray(signal, dtype=float)
    n = x.shape[-1]
    nfft = sfft.next_fast_len(n + bank.max_kernel_length)
    spec = sfft.rfft(x, nfft)[..., None, :] * bank.frequency_responses(nfft)
    full = sfft.irfft(spec, nfft)
    out = np.empty(x.shape[:-1] + (bank.num_bands, n))
    for b, off in enumerate(bank.kernel_offsets):
        out[..., b, :] = full[..., b, off:off + n]
    return out
