"""Absolute pick threshold from a single-speaker anechoic run: a fraction of the averaged map's maximum.

The default picking rule is relative (a fraction of each map's own maximum); use this
when a fixed absolute threshold is wanted in a run config (``localize.threshold``).

    python scripts/calibrate_threshold.py --azimuth 60 --fraction 0.5
"""

import argparse

from onsetloc.config import HarmonicConfig, SceneConfig, SourceConfig
from onsetloc.doa import calibrate_threshold
from onsetloc.experiment import run_methods
from onsetloc.scenes import ONSET_RICH, render


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--azimuth", type=float, default=60.0)
    p.add_argument("--duration", type=float, default=2.0)
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    scene = SceneConfig([SourceConfig("calibration", harmonic=HarmonicConfig(150.0, seed=args.seed, **ONSET_RICH),
                                      azimuth_deg=args.azimuth)],
                        duration_s=args.duration, t60_s=None, snr_db=60.0, seed=args.seed)
    sig, _ = render(scene)
    maps, _ = run_methods(sig, scene)
    for method, srm in maps.items():
        print(f"{method}: threshold = {calibrate_threshold(srm, args.fraction):.6g}")


if __name__ == "__main__":
    main()
