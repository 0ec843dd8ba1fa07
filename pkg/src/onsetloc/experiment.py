"""Shared experiment steps: run both localizers on a rendered scene and score the picks."""

from __future__ import annotations

import time

import numpy as np

from .config import SceneConfig
from .doa import SteeredResponseMap, pick_doas, relative_threshold
from .evaluate import OspaConfig, ospa_series, rmse_fixed_truth
from .filterbank import design_bank
from .mccc import OnsetMcccConfig, onset_mccc_map
from .mccphat import MccPhatConfig, mcc_phat_map
from .signal import MultichannelSignal

PICK_FRACTION = 1e-4      # pick threshold: -80 dB below the map maximum
RESOLUTION_DEG = 20.0


def run_methods(sig: MultichannelSignal, scene: SceneConfig, threads: int = 1, mode: str = "exact"):
    """Both maps with default parameters; returns ``({method: map}, {method: seconds})``."""
    geo = scene.array.geometry()
    maps, secs = {}, {}
    t = time.perf_counter()
    maps["onset-mccc"] = onset_mccc_map(sig, OnsetMcccConfig(design_bank(sample_rate=sig.sample_rate), geo,
                                                             mode=mode, threads=threads))
    secs["onset-mccc"] = time.perf_counter() - t
    t = time.perf_counter()
    maps["mcc-phat"] = mcc_phat_map(sig, MccPhatConfig(geo, threads=threads))
    secs["mcc-phat"] = time.perf_counter() - t
    return maps, secs


def histogram_doas(srm: SteeredResponseMap, fraction: float = PICK_FRACTION,
                   resolution_deg: float = RESOLUTION_DEG) -> np.ndarray:
    """Peaks of the whole-record histogram (static scenes)."""
    h = srm.histogram()
    return pick_doas(h, srm.azimuths_deg, relative_threshold(h, fraction), resolution_deg)


def window_doas(srm: SteeredResponseMap, fraction: float = PICK_FRACTION,
                resolution_deg: float = RESOLUTION_DEG) -> list[np.ndarray]:
    """Peaks of every averaging window, thresholded against the whole map's maximum."""
    return pick_doas(srm.averaged, srm.azimuths_deg, relative_threshold(srm.averaged, fraction), resolution_deg)


def truth_at(rows, times) -> list[np.ndarray]:
    """Active-source azimuths from ground-truth rows at the truth sample nearest each time."""
    by_time: dict[float, list] = {}
    for t, _, az, active in rows:
        by_time.setdefault(t, [])
        if active:
            by_time[t].append(az)
    grid = np.array(sorted(by_time))
    out = []
    for t in times:
        k = int(np.argmin(np.abs(grid - t)))
        out.append(np.array(by_time[float(grid[k])]))
    return out


def static_rmse(srm: SteeredResponseMap, truth, gate_deg: float = RESOLUTION_DEG):
    doas = histogram_doas(srm)
    return doas, rmse_fixed_truth([doas], truth, gate_deg)


def moving_ospa(srm: SteeredResponseMap, rows, cfg: OspaConfig = OspaConfig()):
    """Per-window picks against the window-time truth; returns ``(picks, truth, ospa_rows)``."""
    picks = window_doas(srm)
    truth = truth_at(rows, srm.averaged_times_s)
    return picks, truth, ospa_series(truth, picks, cfg)
