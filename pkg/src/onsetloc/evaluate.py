"""Localization metrics (OSPA over azimuth sets, gated RMSE) and map/DOA exports."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .doa import SteeredResponseMap
from .signal import angular_distance, format_float, read_csv, write_csv

DB_FLOOR = -120.0


@dataclass(frozen=True)
class OspaConfig:
    order_rho: float = 2.0
    cutoff_c: float = 20.0

    def __post_init__(self):
        if not self.order_rho >= 1:
            raise ValueError("OSPA order must be >= 1")
        if not self.cutoff_c > 0:
            raise ValueError("OSPA cutoff must be positive")


def _cutoff_distances(a, b, c: float) -> np.ndarray:
    return np.minimum(c, angular_distance(np.asarray(a, float)[:, None], np.asarray(b, float)[None, :]))


def ospa(truth, estimates, cfg: OspaConfig = OspaConfig()) -> tuple[float, float, float]:
    """OSPA distance between two azimuth sets in degrees: ``(total, location, cardinality)``.

    The two parts share the 1/n normalisation, so for order 2 the squares add up to
    the total's square. Two empty sets are at distance 0.
    """
    x = np.atleast_1d(np.asarray(truth, dtype=float))
    y = np.atleast_1d(np.asarray(estimates, dtype=float))
    if x.size > y.size:
        x, y = y, x
    m, n = x.size, y.size
    if n == 0:
        return 0.0, 0.0, 0.0
    p, c = cfg.order_rho, cfg.cutoff_c
    matched = 0.0
    if m:
        cost = _cutoff_distances(x, y, c) ** p
        rows, cols = linear_sum_assignment(cost)
        matched = float(cost[rows, cols].sum())
    card = c ** p * (n - m)
    loc_part = (matched / n) ** (1.0 / p)
    card_part = (card / n) ** (1.0 / p)
    total = ((matched + card) / n) ** (1.0 / p)
    return total, loc_part, card_part


@dataclass(frozen=True)
class RmseResult:
    per_source: dict          # truth azimuth -> RMSE in degrees, or None when never matched
    overall: float | None     # RMSE pooled over all matched estimates
    match_rate: float         # fraction of frames with a full one-to-one gated match
    matched_frames: int
    total_frames: int


def rmse_fixed_truth(estimate_series, truth_set, gate_deg: float = 20.0) -> RmseResult:
    """Per-source RMSE against a static truth set.

    A frame counts only if it has exactly as many estimates as truths and the
    minimum-cost one-to-one assignment keeps every pair within ``gate_deg``.
    Other frames are excluded and show up in the match rate.
    """
    truth = np.asarray(truth_set, dtype=float)
    sq = {float(t): [] for t in truth}
    matched = 0
    frames = list(estimate_series)
    for est in frames:
        est = np.atleast_1d(np.asarray(est, dtype=float))
        if est.size != truth.size or truth.size == 0:
            continue
        d = angular_distance(truth[:, None], est[None, :])
        rows, cols = linear_sum_assignment(d)
        if np.any(d[rows, cols] > gate_deg):
            continue
        matched += 1
        for r, cidx in zip(rows, cols):
            sq[float(truth[r])].append(float(d[r, cidx]) ** 2)
    per = {t: (math.sqrt(np.mean(v)) if v else None) for t, v in sq.items()}
    pooled = [e for v in sq.values() for e in v]
    overall = math.sqrt(np.mean(pooled)) if pooled else None
    rate = matched / len(frames) if frames else 0.0
    return RmseResult(per, overall, rate, matched, len(frames))


def ospa_series(truth_series, estimate_series, cfg: OspaConfig = OspaConfig()) -> np.ndarray:
    """Per-frame OSPA rows ``(total, location, cardinality)``."""
    rows = [ospa(t, e, cfg) for t, e in zip(truth_series, estimate_series)]
    return np.array(rows, dtype=float).reshape(-1, 3)


# --- exports ----------------------------------------------------------------

def export_map_csv(srm: SteeredResponseMap, path) -> None:
    """Long-format CSV: frame_time_s, azimuth_deg, xi, xi_avg.

    ``xi_avg`` is the trailing average of the window the frame closes, empty for
    frames that close no window.
    """
    avg_at = {}
    n_avg = max(1, int(round(srm.t_avg_s / srm.frame_hop_s)))
    n_shift = max(1, int(round(srm.t_shift_s / srm.frame_hop_s)))
    n_avg = min(n_avg, srm.num_frames)
    for w in range(srm.averaged.shape[0]):
        avg_at[w * n_shift + n_avg - 1] = srm.averaged[w]

    def rows():
        for k in range(srm.num_frames):
            avg = avg_at.get(k)
            for a, az in enumerate(srm.azimuths_deg):
                yield (format_float(srm.frame_times_s[k]), format_float(az), format_float(srm.values[k, a]),
                       "" if avg is None else format_float(avg[a]))

    write_csv(path, ["frame_time_s", "azimuth_deg", "xi", "xi_avg"], rows())


def histogram(srm: SteeredResponseMap, reduce: str = "mean", normalize: bool = True,
              db: bool = False) -> np.ndarray:
    """Per-azimuth reduction of the frame map, optionally normalised and in 20*log10 scale."""
    if reduce not in ("mean", "max"):
        raise ValueError("reduce must be 'mean' or 'max'")
    if srm.num_frames == 0:
        h = np.zeros(len(srm.azimuths_deg))
    else:
        h = srm.values.mean(axis=0) if reduce == "mean" else srm.values.max(axis=0)
    if normalize and h.max() > 0:
        h = h / h.max()
    if db:
        with np.errstate(divide="ignore"):
            h = np.where(h > 0, 20.0 * np.log10(np.where(h > 0, h, 1.0)), DB_FLOOR)
        h = np.maximum(h, DB_FLOOR)
    return h


def export_histogram(srm: SteeredResponseMap, path, reduce: str = "mean", db: bool = False) -> None:
    h = histogram(srm, reduce=reduce, normalize=True, db=db)
    write_csv(path, ["azimuth_deg", "value_db" if db else "value"],
              ((format_float(a), format_float(v)) for a, v in zip(srm.azimuths_deg, h)))


def write_doa_csv(path, times_s, doa_sets) -> None:
    """One row per (time, azimuth) estimate; a frame without estimates gets one row
    with an empty azimuth so that misses survive the round trip."""
    def rows():
        for t, s in zip(times_s, doa_sets):
            if len(s) == 0:
                yield format_float(t), ""
            for a in s:
                yield format_float(t), format_float(a)

    write_csv(path, ["frame_time_s", "azimuth_deg"], rows())


def read_doa_csv(path) -> tuple[np.ndarray, list[np.ndarray]]:
    header, rows = read_csv(path)
    if header[:2] != ["frame_time_s", "azimuth_deg"]:
        raise ValueError(f"{path}: expected header frame_time_s,azimuth_deg, got {header}")
    times: list[float] = []
    sets: list[list[float]] = []
    for r in rows:
        t = float(r[0])
        if not times or t != times[-1]:
            times.append(t)
            sets.append([])
        if r[1] != "":
            sets[-1].append(float(r[1]))
    return np.array(times), [np.array(s) for s in sets]


def read_ground_truth(path):
    """Ground-truth CSV -> (times, {source_id: (azimuths, active)})."""
    header, rows = read_csv(path)
    if header != ["time_s", "source_id", "azimuth_deg", "active_flag"]:
        raise ValueError(f"{path}: unexpected ground-truth header {header}")
    by_src: dict[int, list] = {}
    for r in rows:
        by_src.setdefault(int(r[1]), []).append((float(r[0]), float(r[2]), int(r[3])))
    times = None
    out = {}
    for q, items in sorted(by_src.items()):
        arr = np.array(items)
        if times is None:
            times = arr[:, 0]
        elif arr.shape[0] != times.size or np.any(arr[:, 0] != times):
            raise ValueError(f"{path}: source {q} is sampled on a different time grid")
        out[q] = (arr[:, 1], arr[:, 2].astype(bool))
    return (np.zeros(0) if times is None else times), out


def align_to_truth(est_times, truth_times, tolerance_s: float) -> np.ndarray:
    """Index of the nearest truth sample for each estimate time; raises when any gap
    exceeds ``tolerance_s``."""
    if truth_times.size == 0 or len(est_times) == 0:
        raise ValueError("cannot align: empty estimate or truth time range")
    idx = np.clip(np.searchsorted(truth_times, est_times), 1, truth_times.size - 1)
    left = truth_times[idx - 1]
    right = truth_times[np.minimum(idx, truth_times.size - 1)]
    idx = np.where(np.abs(est_times - left) <= np.abs(right - est_times), idx - 1, idx)
    if truth_times.size == 1:
        idx = np.zeros(len(est_times), dtype=int)
    gap = np.abs(truth_times[idx] - est_times)
    if np.any(gap > tolerance_s + 1e-9):
        bad = float(np.asarray(est_times)[np.argmax(gap)])
        raise ValueError(f"estimate time {bad} s has no truth sample within {tolerance_s} s")
    return idx


def write_results_json(path, per_source_rmse: dict, ospa_rows: np.ndarray, extra: dict | None = None) -> None:
    """Results file with keys per_source_rmse, ospa_series, ospa_mean, cardinality_mean."""
    rows = np.asarray(ospa_rows, dtype=float).reshape(-1, 3)
    doc = {
        "per_source_rmse": {format_float(k): v for k, v in per_source_rmse.items()},
        "ospa_series": [{"total": r[0], "location": r[1], "cardinality": r[2]} for r in rows.tolist()],
        "ospa_mean": float(rows[:, 0].mean()) if rows.size else None,
        "cardinality_mean": float(rows[:, 2].mean()) if rows.size else None,
    }
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
