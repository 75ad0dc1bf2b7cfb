"""Train/test protocol, accuracy, confusion matrices and the two experiment tables."""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .classifiers import ModelSpec, train_model
from .errors import ConfigError, EvalError, FluencyError
from .segmentation import CLASS_NAMES, Dataset

N_CLASSES = len(CLASS_NAMES)
REFERENCE_CORPUS_SIZE = 1424  # size of the recorded corpus the protocol was designed around


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    test: np.ndarray
    ratio: float
    seed: int
    stratified: bool = False


def _largest_remainder(counts: np.ndarray, ratio: float, total: int) -> np.ndarray:
    exact = counts * ratio
    take = np.floor(exact).astype(np.int64)
    short = total - take.sum()
    order = np.argsort(-(exact - take), kind="stable")
    take[order[:short]] += 1
    return take


def split_train_test(n_or_dataset, ratio: float = 0.7, seed: int = 42,
                     stratified: bool = False, labels=None) -> Split:
    """Seeded shuffle; the first ``round(ratio * N)`` shuffled rows train.

    Stratified mode shuffles within each class and allocates train rows by
    largest remainder, so every class is within one row of its share and
    the train size is still ``round(ratio * N)``.
    """
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must lie in (0, 1), got {ratio}")
    if isinstance(n_or_dataset, Dataset):
        n, labels = len(n_or_dataset), n_or_dataset.y if labels is None else labels
    else:
        n = int(n_or_dataset)
    if n < 10:
        raise EvalError(f"need at least 10 examples to split, got {n}")
    n_train = int(round(ratio * n))
    rng = np.random.default_rng(seed)
    if not stratified:
        perm = rng.permutation(n)
        train, test = perm[:n_train], perm[n_train:]
    else:
        if labels is None:
            raise EvalError("stratified split needs labels")
        labels = np.asarray(labels)
        classes = np.unique(labels)
        members = [np.flatnonzero(labels == c) for c in classes]
        take = _largest_remainder(np.array([m.size for m in members]), ratio, n_train)
        train_parts, test_parts = [], []
        for m, k in zip(members, take):
            m = rng.permutation(m)
            train_parts.append(m[:k])
            test_parts.append(m[k:])
        train, test = np.concatenate(train_parts), np.concatenate(test_parts)
    return Split(np.sort(train), np.sort(test), ratio, seed, stratified)


def _check_pair(predicted, actual):
    p, a = np.asarray(predicted), np.asarray(actual)
    if p.shape != a.shape or p.ndim != 1:
        raise EvalError(f"prediction/label length mismatch: {p.shape} vs {a.shape}")
    if p.size == 0:
        raise EvalError("cannot score an empty prediction vector")
    return p, a


def accuracy(predicted, actual) -> float:
    p, a = _check_pair(predicted, actual)
    return float(np.count_nonzero(p == a) / p.size)


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, cols = predicted

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total)

    def class_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["true\\predicted", *CLASS_NAMES])
            for name, row in zip(CLASS_NAMES, self.counts):
                w.writerow([name, *(int(v) for v in row)])

    @classmethod
    def from_csv(cls, path) -> "ConfusionMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))[1:]
        return cls(np.array([[int(v) for v in r[1:]] for r in rows], dtype=np.int64))


def confusion(predicted, actual, n_classes: int = N_CLASSES) -> ConfusionMatrix:
    p, a = _check_pair(predicted, actual)
    if p.min() < 0 or a.min() < 0 or p.max() >= n_classes or a.max() >= n_classes:
        raise EvalError(f"labels must lie in 0..{n_classes - 1}")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (a.astype(np.int64), p.astype(np.int64)), 1)
    return ConfusionMatrix(counts)


# -- experiments --------------------------------------------------------------

@dataclass
class Cell:
    model: str
    n_mfcc: int
    extras: bool
    accuracies: list
    confusion: ConfusionMatrix     # first repeat
    train_seconds: list

    @property
    def accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def accuracy_std(self) -> float:
        return float(np.std(self.accuracies))

    @property
    def key(self) -> str:
        return f"{self.model}_mfcc{self.n_mfcc}" + ("_extras" if self.extras else "")


@dataclass
class ExperimentReport:
    cells: list
    seed: int
    config: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    n_examples: int = 0
    split_sizes: tuple = (0, 0)

    def cell(self, model: str, n_mfcc: int, extras: bool) -> Cell:
        for c in self.cells:
            if (c.model, c.n_mfcc, c.extras) == (model, n_mfcc, extras):
                return c
        raise KeyError((model, n_mfcc, extras))

    def table(self) -> str:
        """Rows = models, columns = feature configurations, accuracies in percent."""
        cols = []
        for c in self.cells:
            if (c.n_mfcc, c.extras) not in cols:
                cols.append((c.n_mfcc, c.extras))
        models = list(dict.fromkeys(c.model for c in self.cells))
        head = ["Model"] + [f"{n}{'+extras' if e else ''}" for n, e in cols]
        lines = [" | ".join(f"{h:>10}" for h in head)]
        for m in models:
            vals = []
            for n, e in cols:
                try:
                    vals.append(f"{100 * self.cell(m, n, e).accuracy:9.2f}%")
                except KeyError:
                    vals.append(f"{'-':>10}")
            lines.append(" | ".join([f"{m.upper():>10}"] + vals))
        return "\n".join(lines)

    def write(self, out_dir, bars: bool = False) -> list:
        """report.csv, per-cell confusion CSVs, optional bars.csv, report_meta.json.

        Everything except ``report_meta.json`` (which carries wall-clock
        timings) is a pure function of data, config and seed.
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        path = out / "report.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "n_mfcc", "extras", "accuracy", "accuracy_std", "repeats"])
            for c in self.cells:
                w.writerow([c.model, c.n_mfcc, int(c.extras), repr(c.accuracy),
                            repr(c.accuracy_std), len(c.accuracies)])
        written.append(path)
        last = {}
        for c in self.cells:
            p = out / f"confusion_{c.key}.csv"
            c.confusion.to_csv(p)
            written.append(p)
            last[c.model] = c
        for model, c in last.items():
            p = out / f"confusion_{model}.csv"
            c.confusion.to_csv(p)
            written.append(p)
        if bars:
            p = out / "bars.csv"
            with open(p, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["model", "baseline", "extras"])
                for model in dict.fromkeys(c.model for c in self.cells):
                    base = [c for c in self.cells if c.model == model and not c.extras]
                    ext = [c for c in self.cells if c.model == model and c.extras]
                    w.writerow([model, repr(base[0].accuracy) if base else "",
                                repr(ext[0].accuracy) if ext else ""])
            written.append(p)
        meta = {
            "seed": self.seed, "config": self.config, "notes": self.notes,
            "n_examples": self.n_examples, "train_size": self.split_sizes[0],
            "test_size": self.split_sizes[1],
            "train_seconds": {c.key: c.train_seconds for c in self.cells},
        }
        p = out / "report_meta.json"
        p.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
        written.append(p)
        return written


def _run_cell(args):
    X, y, train, test, spec, seed, label = args
    try:
        pipe = train_model(spec, X[train], y[train], seed=seed)
    except FluencyError as exc:
        raise type(exc)(f"{label}: {exc}") from exc
    pred = pipe.predict(X[test])
    return accuracy(pred, y[test]), confusion(pred, y[test]).counts, pipe.train_seconds


def run_protocol(dataset: Dataset, feature_sets: Sequence[tuple], models: Sequence[ModelSpec],
                 seed: int = 42, ratio: float = 0.7, repeats: int = 1, stratified: bool = False,
                 jobs: int = 1, config: Optional[dict] = None) -> ExperimentReport:
    """Accuracy for every (model, (n_mfcc, extras)) cell.

    Repeat ``r`` uses seed ``seed + r`` for both the split and the models,
    and every feature set shares that split.
    """
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    splits = [split_train_test(dataset, ratio, seed + r, stratified) for r in range(repeats)]
    views = {fs: dataset.select_features(*fs) for fs in feature_sets}
    keys, tasks = [], []
    for fs in feature_sets:
        view = views[fs]
        for spec in models:
            for r, sp in enumerate(splits):
                keys.append((spec.kind, fs))
                label = f"model={spec.kind} n_mfcc={fs[0]} extras={fs[1]} repeat={r}"
                tasks.append((view.X, view.y, sp.train, sp.test, spec, seed + r, label))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, tasks))
    else:
        results = [_run_cell(t) for t in tasks]

    cells = {}
    for (kind, (n, extras)), (acc, counts, secs) in zip(keys, results):
        cell = cells.get((kind, n, extras))
        if cell is None:
            cells[(kind, n, extras)] = Cell(kind, n, extras, [acc], ConfusionMatrix(counts), [secs])
        else:
            cell.accuracies.append(acc)
            cell.train_seconds.append(secs)
    notes = []
    if len(dataset) == REFERENCE_CORPUS_SIZE:
        notes.append(f"N={REFERENCE_CORPUS_SIZE}: ratio {ratio} gives {len(splits[0].train)}/"
                     f"{len(splits[0].test)}; the published 926/498 split is ~65/35.")
    return ExperimentReport(list(cells.values()), seed, dict(config or {}), notes, len(dataset),
                            (len(splits[0].train), len(splits[0].test)))


def sweep_nmel(dataset: Dataset, nmel_values: Sequence[int] = (5, 10, 12, 20),
               models: Sequence[ModelSpec] = (), seed: int = 42, **kw) -> ExperimentReport:
    """MFCC-only accuracy for each requested coefficient count."""
    models = models or [ModelSpec(k) for k in ("svm", "rf", "mlp")]
    return run_protocol(dataset, [(int(n), False) for n in nmel_values], models, seed, **kw)


def compare_extras(dataset: Dataset, n_mfcc: int = 20, models: Sequence[ModelSpec] = (),
                   seed: int = 42, **kw) -> ExperimentReport:
    """MFCC-only vs MFCC + ZCR + RMSE + SF on the same split."""
    models = models or [ModelSpec(k) for k in ("svm", "rf", "mlp")]
    return run_protocol(dataset, [(n_mfcc, False), (n_mfcc, True)], models, seed, **kw)
