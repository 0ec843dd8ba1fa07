"""Build and render scenes from :class:`SceneConfig`, plus the stock experiment scenes."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .config import ArrayConfig, HarmonicConfig, SceneConfig, SourceConfig
from .roomsim import (Room, SceneSource, Trajectory, ground_truth_rows, render_scene,
                      speech_like_source, synthesize_harmonic_speech)
from .signal import read_wav


def _polar(azimuth_deg: float, distance_m: float) -> np.ndarray:
    th = math.radians(azimuth_deg)
    return np.array([distance_m * math.cos(th), distance_m * math.sin(th)])


def source_signal(src: SourceConfig, scene: SceneConfig, base_dir: Path | None = None) -> np.ndarray:
    n = int(round(scene.duration_s * scene.sample_rate))
    if src.wav is not None:
        path = Path(src.wav)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        wav = read_wav(path)
        if wav.sample_rate != scene.sample_rate:
            raise ValueError(f"{path}: sample rate {wav.sample_rate} != scene rate {scene.sample_rate}")
        x = wav.samples[0]
    else:
        h: HarmonicConfig = src.harmonic
        spec = speech_like_source(h.f0_hz, scene.duration_s, h.seed, h.max_freq_hz,
                                  rise=tuple(h.rise_s), hold=tuple(h.hold_s),
                                  decay=tuple(h.decay_s), gap=tuple(h.gap_s))
        x = synthesize_harmonic_speech(spec, scene.sample_rate)
    out = np.zeros(n)
    out[: min(n, x.size)] = x[:n]
    return out


def build_sources(scene: SceneConfig, base_dir: Path | None = None) -> list[SceneSource]:
    sources = []
    for k, src in enumerate(scene.sources):
        sig = source_signal(src, scene, base_dir)
        if src.trajectory_times_s is not None:
            times = np.asarray(src.trajectory_times_s, dtype=float)
            az = np.asarray(src.trajectory_azimuths_deg, dtype=float)
            # Densify so the path follows the circle rather than its chords.
            t = np.linspace(times[0], times[-1], max(2, int(round((times[-1] - times[0]) * 50)) + 1))
            a = np.deg2rad(np.interp(t, times, az))
            pos = np.stack([src.distance_m * np.cos(a), src.distance_m * np.sin(a)], axis=1)
            where = Trajectory(t, pos)
        else:
            where = _polar(src.azimuth_deg, src.distance_m)
        sources.append(SceneSource(sig, where, src.name or f"s{k}"))
    return sources


def scene_room(scene: SceneConfig) -> Room:
    t60 = scene.t60_s if scene.t60_s else None
    return Room(t60, scene.gap_s, scene.room_volume_m3, scene.block_s)


def render(scene: SceneConfig, base_dir: Path | None = None):
    """Render a scene; returns ``(signal, truth_rows)``."""
    scene.validate()
    sources = build_sources(scene, base_dir)
    geo = scene.array.geometry()
    sig = render_scene(sources, geo, scene_room(scene), scene.snr_db, scene.seed, scene.sample_rate)
    rows = ground_truth_rows(sources, scene.sample_rate, scene.duration_s, scene.truth_hop_s)
    return sig, rows


# --- stock scenes -----------------------------------------------------------

# Percussive syllables: fast rise, short hold, speech-like decay.
ONSET_RICH = dict(rise_s=[0.002, 0.006], hold_s=[0.0, 0.03], decay_s=[0.04, 0.1], gap_s=[0.15, 0.4])
SCENARIO1_SOURCES = ((120.0, 180.0), (210.0, 300.0), (300.0, 60.0))   # (f0, azimuth)
ROOM_VOLUME_M3 = 6.0 * 8.0 * 3.0


def scenario1(t60_s: float = 0.6, snr_db: float = 40.0, duration_s: float = 4.0, seed: int = 1,
              envelope: dict | None = None) -> SceneConfig:
    env = ONSET_RICH if envelope is None else envelope
    srcs = [SourceConfig(f"speaker{k + 1}", harmonic=HarmonicConfig(f0, seed=k, **env),
                         azimuth_deg=az, distance_m=1.2)
            for k, (f0, az) in enumerate(SCENARIO1_SOURCES)]
    return SceneConfig(srcs, duration_s=duration_s, t60_s=t60_s, room_volume_m3=ROOM_VOLUME_M3,
                       snr_db=snr_db, seed=seed, array=ArrayConfig())


def scenario2(t60_s: float = 0.6, snr_db: float = 10.0, duration_s: float = 4.0, seed: int = 2,
              envelope: dict | None = None) -> SceneConfig:
    env = ONSET_RICH if envelope is None else envelope
    srcs = [SourceConfig(f"speaker{k + 1}", harmonic=HarmonicConfig(f0, seed=10 + k, **env),
                         azimuth_deg=az, distance_m=2.0)
            for k, (f0, az) in enumerate(((120.0, 170.0), (210.0, 190.0)))]
    return SceneConfig(srcs, duration_s=duration_s, t60_s=t60_s, room_volume_m3=ROOM_VOLUME_M3,
                       snr_db=snr_db, seed=seed, array=ArrayConfig())


def moving_source(t60_s: float = 0.65, snr_db: float = 40.0, duration_s: float = 8.0, seed: int = 4,
                  envelope: dict | None = None) -> SceneConfig:
    env = ONSET_RICH if envelope is None else envelope
    src = SourceConfig("mover", harmonic=HarmonicConfig(150.0, seed=20, **env), distance_m=1.2,
                       trajectory_times_s=[0.0, duration_s], trajectory_azimuths_deg=[90.0, 270.0])
    return SceneConfig([src], duration_s=duration_s, t60_s=t60_s, room_volume_m3=ROOM_VOLUME_M3,
                       snr_db=snr_db, seed=seed, array=ArrayConfig())


def truth_azimuths(scene: SceneConfig) -> list[float]:
    """Azimuths of static sources."""
    return [s.azimuth_deg for s in scene.sources if s.azimuth_deg is not None]

