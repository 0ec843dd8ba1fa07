"""Command-line front end: simulate | rir | localize | evaluate.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal error.
The default worker count comes from ``ONSETLOC_THREADS`` (else 1).
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError, RunConfig, SceneConfig
from .doa import pick_doas, relative_threshold
from .evaluate import (OspaConfig, align_to_truth, export_histogram, export_map_csv, ospa_series,
                       read_doa_csv, read_ground_truth, rmse_fixed_truth, write_doa_csv,
                       write_results_json)
from .filterbank import design_bank
from .mccc import OnsetMcccConfig, onset_mccc_map
from .mccphat import MccPhatConfig, mcc_phat_map
from .onset import lambda_from_t60
from .roomsim import Room, write_ground_truth
from .scenes import render
from .signal import MultichannelSignal, WavFormatError, format_float, read_wav, write_csv, write_wav

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
THREADS_ENV = "ONSETLOC_THREADS"

log = logging.getLogger("onsetloc")


class DataError(Exception):
    """Input data inconsistent with the configuration or unreadable."""


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(THREADS_ENV, f"expected an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(THREADS_ENV, "must be >= 1")
    return n


def _threads(args) -> int:
    n = args.threads if args.threads is not None else default_threads()
    if n < 1:
        raise ConfigError("--threads", "must be >= 1")
    return n


def _run_config(args) -> RunConfig:
    cfg = cfgmod.load_run_config(args.config) if args.config else RunConfig().validate()
    if getattr(args, "method", None):
        cfg.localize.method = args.method
        cfg.validate()
    return cfg


# --- subcommands ------------------------------------------------------------

def cmd_simulate(args) -> int:
    scene = cfgmod.load_scene_config(args.scene)
    if args.print_config:
        sys.stdout.write(cfgmod.dumps(scene))
        return EXIT_OK
    try:
        sig, rows = render(scene, Path(args.scene).parent)
    except (OSError, WavFormatError) as exc:
        raise DataError(str(exc)) from exc
    write_wav(sig, args.out_wav, encoding=args.encoding)
    truth = args.out_truth or str(Path(args.out_wav).with_suffix(".truth.csv"))
    write_ground_truth(truth, rows)
    log.info("wrote %s and %s", args.out_wav, truth)
    return EXIT_OK


def cmd_rir(args) -> int:
    if not args.distance > 0:
        raise ConfigError("--distance", "must be positive")
    if args.t60 is not None and not args.t60 > 0:
        raise ConfigError("--t60", "must be positive")
    if not args.gap > 0:
        raise ConfigError("--gap", "must be positive")
    room = Room(args.t60, args.gap, args.room_volume)
    rir = room.rir(args.distance, args.seed, args.sample_rate, args.speed_of_sound)
    if args.out.lower().endswith(".wav"):
        write_wav(MultichannelSignal(rir.taps[None, :], args.sample_rate), args.out, encoding="float32")
    else:
        write_csv(args.out, ["index", "tap"], ((k, format_float(v)) for k, v in enumerate(rir.taps)))
    return EXIT_OK


def localize_signal(sig: MultichannelSignal, cfg: RunConfig, threads: int = 1):
    """Run the configured localizer; returns ``(map, doa_sets)`` over averaged frames."""
    geo = cfg.array.geometry()
    loc = cfg.localize
    if sig.sample_rate != cfg.sample_rate:
        raise DataError(f"WAV sample rate {sig.sample_rate} != configured {cfg.sample_rate}")
    if sig.num_channels != geo.num_mics:
        raise DataError(f"WAV has {sig.num_channels} channels but the array has {geo.num_mics} mics")
    if loc.method == "gcc-phat" and geo.num_mics != 2:
        raise ConfigError("localize.method",
                          f"gcc-phat needs exactly 2 microphones (got {geo.num_mics}); use mcc-phat")
    grid = cfg.grid.grid()
    if loc.method == "onset-mccc":
        lam = lambda_from_t60(loc.t60_s, cfg.sample_rate) if loc.t60_s else loc.lam
        fb = cfg.filterbank
        bank = design_bank(fb.fmin_hz, fb.fmax_hz, fb.num_bands, fb.order, cfg.sample_rate)
        srm = onset_mccc_map(sig, OnsetMcccConfig(bank, geo, grid, lam, loc.frame_s, loc.t_avg_s,
                                                  loc.t_shift_s, loc.align_mode, threads))
    else:
        # gcc-phat is the two-microphone case of the same steered product.
        srm = mcc_phat_map(sig, MccPhatConfig(geo, grid, loc.f_max_hz, loc.frame_s, loc.overlap,
                                              loc.t_avg_s, loc.t_shift_s, threads))
    thr = loc.threshold if loc.threshold is not None else relative_threshold(srm.averaged, loc.relative_threshold)
    doas = pick_doas(srm.averaged, srm.azimuths_deg, thr, loc.resolution_deg)
    return srm, doas


def cmd_localize(args) -> int:
    cfg = _run_config(args)
    if args.print_config:
        sys.stdout.write(cfgmod.dumps(cfg))
        return EXIT_OK
    if args.wav is None:
        raise ConfigError("wav", "input WAV path is required")
    try:
        sig = read_wav(args.wav)
    except (OSError, WavFormatError) as exc:
        raise DataError(str(exc)) from exc
    srm, doas = localize_signal(sig, cfg, _threads(args))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    export_map_csv(srm, out / "map.csv")
    write_doa_csv(out / "doa.csv", srm.averaged_times_s, doas)
    export_histogram(srm, out / "histogram.csv", db=args.db)
    log.info("wrote map.csv, doa.csv, histogram.csv to %s", out)
    return EXIT_OK


def evaluate_files(doa_csv, truth_csv, cfg: RunConfig) -> dict:
    try:
        est_times, est_sets = read_doa_csv(doa_csv)
        truth_times, truth = read_ground_truth(truth_csv)
    except (OSError, ValueError, IndexError) as exc:
        raise DataError(str(exc)) from exc
    hop = float(np.median(np.diff(truth_times))) if truth_times.size > 1 else math.inf
    try:
        idx = align_to_truth(est_times, truth_times, hop / 2)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    truth_sets = [np.array([az[k] for az, act in truth.values() if act[k]]) for k in idx]
    ev = cfg.evaluation
    rows = ospa_series(truth_sets, est_sets, OspaConfig(ev.order_rho, ev.cutoff_deg))
    static = all(np.all(az == az[0]) for az, _ in truth.values())
    per_source = {}
    if static:
        res = rmse_fixed_truth(est_sets, [az[0] for az, _ in truth.values()], ev.gate_deg)
        per_source = res.per_source
        extra = {"match_rate": res.match_rate, "overall_rmse": res.overall}
    else:
        extra = {"match_rate": None, "overall_rmse": None}
    extra["frame_times_s"] = [float(t) for t in est_times]
    return {"per_source_rmse": per_source, "ospa_rows": rows, "extra": extra}


def cmd_evaluate(args) -> int:
    cfg = _run_config(args)
    res = evaluate_files(args.doa_csv, args.truth_csv, cfg)
    write_results_json(args.out, res["per_source_rmse"], res["ospa_rows"], res["extra"])
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="onsetloc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="render a scene file to a multichannel WAV and truth CSV")
    s.add_argument("scene", help="scene description (.toml or .json)")
    s.add_argument("--out-wav", default="scene.wav")
    s.add_argument("--out-truth", default=None, help="default: <out-wav stem>.truth.csv")
    s.add_argument("--encoding", choices=("float32", "pcm16"), default="float32")
    s.add_argument("--print-config", action="store_true", help="print the resolved scene and exit")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("rir", help="generate one stochastic room impulse response")
    r.add_argument("--distance", type=float, required=True, help="source-mic distance in m")
    r.add_argument("--t60", type=float, default=0.6)
    r.add_argument("--gap", type=float, default=0.006)
    r.add_argument("--room-volume", type=float, default=None,
                   help="scale the tail to the Sabine direct-to-reverberant ratio of this volume (m^3)")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--sample-rate", type=float, default=48000.0)
    r.add_argument("--speed-of-sound", type=float, default=343.0)
    r.add_argument("--out", default="rir.csv", help=".csv (index,tap) or .wav")
    r.set_defaults(func=cmd_rir)

    loc = sub.add_parser("localize", help="compute a DOA map and picked DOAs from a WAV")
    loc.add_argument("wav", nargs="?")
    loc.add_argument("--config", help="run config (.toml or .json); defaults otherwise")
    loc.add_argument("--method", choices=cfgmod.METHODS)
    loc.add_argument("--out-dir", default="out")
    loc.add_argument("--db", action="store_true", help="histogram in 20*log10 scale")
    loc.add_argument("--threads", type=int, default=None, help=f"worker threads (default ${THREADS_ENV} or 1)")
    loc.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    loc.set_defaults(func=cmd_localize)

    ev = sub.add_parser("evaluate", help="score a DOA CSV against a ground-truth CSV")
    ev.add_argument("doa_csv")
    ev.add_argument("truth_csv")
    ev.add_argument("--config")
    ev.add_argument("--out", default="results.json")
    ev.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, WavFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the documented exit code
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
