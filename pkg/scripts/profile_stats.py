"""Per-class feature statistics of the synthetic generator.

    python scripts/profile_stats.py --per-class 100

Prints mean and spread of pause fraction, RMSE, ZCR, spectral flux and c0
for each class profile, which is a quick way to see how separable a
profile change makes the classes.
"""
import argparse
import sys

import numpy as np

from fluency.dsp import FeatureConfig, extract_segment
from fluency.synth import DEFAULT_PROFILES, generate_segment, measured_pause_fraction


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--per-class", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    cfg = FeatureConfig()
    columns = ["pause", "rmse", "zcr", "sf", "c0"]
    print(f"{'class':>13} " + " ".join(f"{c:>16}" for c in columns))
    for profile in DEFAULT_PROFILES:
        rows = []
        for i in range(args.per_class):
            x = generate_segment(profile, (args.seed, int(profile.label), i))
            fv = extract_segment(x, cfg)
            rows.append([measured_pause_fraction(x), fv["rmse"], fv["zcr"], fv["sf"], fv.values[0]])
        rows = np.array(rows)
        cells = [f"{m:8.4f} +/-{s:6.3f}" for m, s in zip(rows.mean(axis=0), rows.std(axis=0))]
        print(f"{profile.label.name.title():>13} " + " ".join(cells))
    return 0


if __name__ == "__main__":
    sys.exit(main())
