"""Synthesise a corpus, then run the MFCC sweep and the extras comparison.

    python scripts/run_experiment.py --out runs/seed42 --seed 42 --jobs 4

Writes ``<out>/corpus``, ``<out>/sweep`` and ``<out>/compare``; pass
``--manifest`` to skip synthesis and use existing recordings.
"""
import argparse
import os
import sys
from pathlib import Path

from fluency import cli


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("runs/default"))
    p.add_argument("--manifest", type=Path, default=None, help="use this manifest instead of synthesising")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--models", default="svm,rf,mlp")
    p.add_argument("--repeats", type=int, default=1)
    args = p.parse_args(argv)

    seed, jobs = str(args.seed), str(args.jobs)
    manifest = args.manifest
    if manifest is None:
        code = cli.main(["synth", "--out", str(args.out / "corpus"), "--seed", seed, "--jobs", jobs])
        if code:
            return code
        manifest = args.out / "corpus" / "manifest.csv"
    common = ["--manifest", str(manifest), "--models", args.models, "--seed", seed, "--jobs", jobs,
              "--repeats", str(args.repeats)]
    code = cli.main(["sweep", "--out", str(args.out / "sweep"), *common])
    if code:
        return code
    return cli.main(["compare", "--out", str(args.out / "compare"), *common])


if __name__ == "__main__":
    sys.exit(main())
