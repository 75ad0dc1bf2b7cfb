"""``fluency`` command line: synth, extract, train, eval, sweep, compare.

Exit codes: 0 success, 2 runtime/data error, 64 usage error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .classifiers import MODEL_KINDS, ModelSpec, load_model, save_model, train_model
from .dsp import FeatureConfig, stft_power, write_spectrogram_csv
from .errors import ConfigError, ConvergenceWarning, FluencyError
from .evaluation import ExperimentReport, accuracy, confusion, run_protocol, split_train_test
from .segmentation import Dataset, build_dataset, load_manifest
from .synth import DEFAULT_PROFILES, generate_corpus

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 2, 64
DEFAULT_SEED = 42


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _model_list(text: str) -> list:
    kinds = [v.strip().lower() for v in text.split(",") if v.strip()]
    bad = [k for k in kinds if k not in MODEL_KINDS]
    if bad or not kinds:
        raise argparse.ArgumentTypeError(f"models must be drawn from {','.join(MODEL_KINDS)}")
    return kinds


def _add_common(p, jobs=True):
    p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                   help=f"seed for every randomized step (default {DEFAULT_SEED})")
    if jobs:
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="worker processes (default: available CPUs); results do not depend on it")


def _add_features(p, extras_default=True):
    p.add_argument("--n-mfcc", type=int, default=20, help="MFCC coefficients (default 20)")
    p.add_argument("--extras", action=argparse.BooleanOptionalAction, default=extras_default,
                   help="append ZCR, RMSE and spectral flux")
    p.add_argument("--n-fft", type=int, default=2048)
    p.add_argument("--hop", type=int, default=512)
    p.add_argument("--n-mels", type=int, default=128, help="mel filters (default 128)")
    p.add_argument("--segment-seconds", type=float, default=5.0)


def _add_split(p):
    p.add_argument("--split-ratio", type=float, default=0.7, help="training fraction (default 0.7)")
    p.add_argument("--stratified", action="store_true", help="preserve class proportions in the split")


def _add_hyper(p):
    p.add_argument("--c", dest="C", type=float, default=1.0, help="SVM penalty C")
    p.add_argument("--gamma", type=float, default=None, help="SVM RBF width (default 1/d)")
    p.add_argument("--trees", type=int, default=100, help="random forest size")
    p.add_argument("--epochs", type=int, default=200, help="MLP epochs")
    p.add_argument("--batch", type=int, default=32, help="MLP batch size")
    p.add_argument("--lr", type=float, default=1e-3, help="MLP Adam learning rate")
    p.add_argument("--no-standardize", action="store_true",
                   help="skip feature standardization for SVM/MLP")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fluency", description="Speaker fluency classification pipeline")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a labelled synthetic corpus")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--per-class", type=int, default=None,
                   help="segments per class (overrides the default 374/618/432)")
    p.add_argument("--counts", type=_int_list, default=None, help="low,intermediate,high counts")
    p.add_argument("--balanced", action="store_true",
                   help="equal class sizes (per-class default: 1424 // 3)")
    _add_common(p)

    p = sub.add_parser("extract", help="manifest -> feature matrix CSV")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path, help="feature CSV to write")
    p.add_argument("--dump-spectrogram", type=Path, default=None, metavar="DIR",
                   help="also write each segment's power spectrogram as CSV into DIR")
    _add_features(p)
    _add_common(p)

    p = sub.add_parser("train", help="feature CSV -> model file")
    p.add_argument("--features", required=True, type=Path)
    p.add_argument("--model", required=True, choices=MODEL_KINDS)
    p.add_argument("--out", type=Path, default=None, help="model file (default <model>.model)")
    p.add_argument("--all-rows", action="store_true", help="train on every row instead of the split")
    _add_split(p)
    _add_hyper(p)
    _add_common(p)

    p = sub.add_parser("eval", help="score a model on its held-out split or a test CSV")
    p.add_argument("--model", required=True, type=Path, help="model file from `train`")
    p.add_argument("--features", required=True, type=Path)
    p.add_argument("--test-features", type=Path, default=None,
                   help="score every row of this CSV instead of the held-out split")
    p.add_argument("--out", type=Path, default=Path("."), help="directory for confusion_<model>.csv")

    for name, help_ in (("sweep", "accuracy vs number of MFCCs"),
                        ("compare", "MFCC-only vs MFCC + ZCR/RMSE/SF")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--manifest", required=True, type=Path)
        p.add_argument("--out", type=Path, default=Path("results"), help="report directory")
        if name == "sweep":
            p.add_argument("--nmel", type=_int_list, default=[5, 10, 12, 20],
                           help="comma-separated MFCC counts (default 5,10,12,20)")
        else:
            p.add_argument("--n-mfcc", type=int, default=20)
        p.add_argument("--models", type=_model_list, default=list(MODEL_KINDS))
        p.add_argument("--repeats", type=int, default=1, help="repeat with seeds seed..seed+k-1")
        p.add_argument("--n-fft", type=int, default=2048)
        p.add_argument("--hop", type=int, default=512)
        p.add_argument("--n-mels", type=int, default=128)
        _add_split(p)
        _add_hyper(p)
        _add_common(p)
    return parser


def _feature_config(args, n_mfcc, extras) -> FeatureConfig:
    try:
        return FeatureConfig(n_mfcc=n_mfcc, include_extras=extras, n_fft=args.n_fft,
                             hop=args.hop, n_mel_filters=args.n_mels)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def _model_spec(args, kind) -> ModelSpec:
    if args.C <= 0 or args.trees < 1 or args.epochs < 0 or args.batch < 1 or args.lr <= 0:
        raise UsageError("hyperparameters must be positive")
    return ModelSpec(kind, C=args.C, gamma=args.gamma, trees=args.trees, epochs=args.epochs,
                     batch=args.batch, lr=args.lr,
                     standardize=False if args.no_standardize else None)


def _run_config(args) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())}


def _check_split(args):
    if not 0 < args.split_ratio < 1:
        raise UsageError(f"--split-ratio must lie in (0, 1), got {args.split_ratio}")


# -- subcommands --------------------------------------------------------------

def cmd_synth(args) -> int:
    profiles = DEFAULT_PROFILES
    if args.counts is not None:
        if len(args.counts) != len(profiles) or min(args.counts) < 0:
            raise UsageError("--counts needs three non-negative integers")
        counts = list(args.counts)
    elif args.per_class is not None or args.balanced:
        k = args.per_class if args.per_class is not None else sum(p.n_segments for p in profiles) // 3
        if k < 0:
            raise UsageError("--per-class must be non-negative")
        counts = [k] * len(profiles)
    else:
        counts = [p.n_segments for p in profiles]
    manifest = generate_corpus(args.out, profiles, counts, seed=args.seed, jobs=args.jobs)
    n = len(manifest)
    print(f"manifest: {args.out / 'manifest.csv'}")
    print(f"segments: {n} ({n * 5.0 / 60:.2f} minutes) counts low/intermediate/high = "
          f"{'/'.join(str(c) for c in counts)} seed={args.seed}")
    return EXIT_OK


def cmd_extract(args) -> int:
    cfg = _feature_config(args, args.n_mfcc, args.extras)
    if args.segment_seconds <= 0:
        raise UsageError("--segment-seconds must be positive")
    manifest = load_manifest(args.manifest)
    ds = build_dataset(manifest, cfg, segment_s=args.segment_seconds, jobs=args.jobs)
    ds.to_csv(args.out)
    if args.dump_spectrogram is not None:
        _dump_spectrograms(manifest, cfg, args.segment_seconds, args.dump_spectrogram)
    counts = ", ".join(f"{k}={v}" for k, v in ds.class_counts().items())
    print(f"wrote {args.out}: {len(ds)} segments x {ds.dim} features ({counts}; "
          f"{ds.minutes:.2f} minutes)")
    return EXIT_OK


def _dump_spectrograms(manifest, cfg, segment_s, out_dir: Path) -> None:
    from .audio_io import load_canonical
    from .segmentation import segment_fixed

    out_dir.mkdir(parents=True, exist_ok=True)
    for path in manifest.paths():
        for seg in segment_fixed(load_canonical(path, cfg.sr), segment_s):
            write_spectrogram_csv(out_dir / f"{path.stem}_{seg.index:04d}.csv", stft_power(seg.samples, cfg))


def _train_rows(args, ds: Dataset):
    if args.all_rows:
        return np.arange(len(ds))
    return split_train_test(ds, args.split_ratio, args.seed, args.stratified).train


def cmd_train(args) -> int:
    _check_split(args)
    spec = _model_spec(args, args.model)
    ds = Dataset.from_csv(args.features)
    rows = _train_rows(args, ds)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        pipe = train_model(spec, ds.X[rows], ds.y[rows], seed=args.seed)
    pipe.meta["split"] = {"ratio": args.split_ratio, "seed": args.seed, "stratified": args.stratified,
                          "all_rows": args.all_rows, "n_rows": len(ds)}
    out = args.out or Path(f"{args.model}.model")
    save_model(out, pipe)
    log = {"run_config": _run_config(args), "n_train": int(rows.size),
           "train_seconds": pipe.train_seconds, **pipe.meta}
    if args.model == "mlp":
        log["initial_loss"] = pipe.model.initial_loss
        log["loss_history"] = pipe.model.loss_history
    elif args.model == "svm":
        log["kkt_gaps"] = [m.kkt_gap for m in pipe.model.machines]
    Path(str(out) + ".log.json").write_text(json.dumps(log, indent=2, default=str) + "\n")
    for w in caught:
        if issubclass(w.category, ConvergenceWarning):
            print(f"warning: {w.message}", file=sys.stderr)
    print(f"trained {args.model} on {rows.size} rows x {ds.dim} features -> {out} "
          f"({pipe.train_seconds:.2f}s, seed={args.seed})")
    return EXIT_OK


def cmd_eval(args) -> int:
    ds = Dataset.from_csv(args.features)
    pipe = load_model(args.model, expected_dim=ds.dim)
    if args.test_features is not None:
        test = Dataset.from_csv(args.test_features)
        if test.dim != pipe.n_features:
            raise FluencyError(f"model expects {pipe.n_features} features, "
                               f"{args.test_features} has {test.dim}")
        X, y = test.X, test.y
    else:
        split = pipe.meta.get("split", {})
        if split.get("all_rows"):
            raise UsageError("model was trained on all rows; pass --test-features")
        if split.get("n_rows") not in (None, len(ds)):
            raise FluencyError(f"{args.features} has {len(ds)} rows but the model was trained on a "
                               f"{split['n_rows']}-row file; pass --test-features")
        sp = split_train_test(ds, split.get("ratio", 0.7), split.get("seed", DEFAULT_SEED),
                              split.get("stratified", False))
        X, y = ds.X[sp.test], ds.y[sp.test]
    pred = pipe.predict(X)
    acc = accuracy(pred, y)
    cm = confusion(pred, y)
    args.out.mkdir(parents=True, exist_ok=True)
    cm_path = args.out / f"confusion_{pipe.kind}.csv"
    cm.to_csv(cm_path)
    print(f"accuracy: {acc!r} ({int(np.trace(cm.counts))}/{cm.total})")
    print(f"confusion matrix -> {cm_path}")
    return EXIT_OK


def _protocol(args, feature_sets, bars: bool) -> int:
    _check_split(args)
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    specs = [_model_spec(args, k) for k in args.models]
    max_n = max(n for n, _ in feature_sets)
    cfg = _feature_config(args, max_n, any(e for _, e in feature_sets))
    for n, _ in feature_sets:
        if n < 1:
            raise UsageError(f"MFCC counts must be >= 1, got {n}")
    manifest = load_manifest(args.manifest)
    ds = build_dataset(manifest, cfg, jobs=args.jobs)
    config = {"run_config": _run_config(args), "feature_config": cfg.to_dict()}
    report = ExperimentReport([], args.seed, config)
    for fs in feature_sets:
        # one feature set at a time so finished cells are on disk if a later one fails
        part = run_protocol(ds, [fs], specs, seed=args.seed, ratio=args.split_ratio,
                            repeats=args.repeats, stratified=args.stratified, jobs=args.jobs,
                            config=config)
        report.cells.extend(part.cells)
        report.notes, report.n_examples, report.split_sizes = part.notes, part.n_examples, part.split_sizes
        report.write(args.out, bars=bars)
    for note in report.notes:
        print(f"note: {note}")
    print(f"N={report.n_examples} train={report.split_sizes[0]} test={report.split_sizes[1]} "
          f"seed={args.seed}")
    print(report.table())
    print(f"report -> {args.out / 'report.csv'}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    return _protocol(args, [(n, False) for n in args.nmel], bars=False)


def cmd_compare(args) -> int:
    return _protocol(args, [(args.n_mfcc, False), (args.n_mfcc, True)], bars=True)


COMMANDS = {"synth": cmd_synth, "extract": cmd_extract, "train": cmd_train, "eval": cmd_eval,
            "sweep": cmd_sweep, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except (FluencyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
