"""Fixed-length segmentation, label manifests and the feature dataset."""
from __future__ import annotations

import csv
import enum
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .audio_io import CANONICAL_SR, AudioBuffer, load_canonical
from .dsp import FeatureConfig, extract_segment
from .errors import ConfigError, DatasetError, FluencyError, ManifestError

DEFAULT_SEGMENT_S = 5.0
MANIFEST_VERSION = 1
MANIFEST_COLUMNS = ("path", "speaker", "label", "sublevel")


class FluencyClass(enum.IntEnum):
    LOW = 0
    INTERMEDIATE = 1
    HIGH = 2

    @classmethod
    def parse(cls, token: str) -> "FluencyClass":
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown label {token.strip()!r}") from None

    @property
    def display(self) -> str:
        return self.name.capitalize()


CLASS_NAMES = tuple(c.display for c in FluencyClass)

_SUBLEVEL_CLASS = {0: FluencyClass.LOW, 1: FluencyClass.LOW,
                   2: FluencyClass.INTERMEDIATE, 3: FluencyClass.INTERMEDIATE,
                   4: FluencyClass.HIGH, 5: FluencyClass.HIGH}


@dataclass(frozen=True)
class FluencyLabel:
    cls: FluencyClass
    sublevel: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "cls", FluencyClass(self.cls))
        if self.sublevel is not None:
            if self.sublevel not in _SUBLEVEL_CLASS:
                raise ValueError(f"sublevel must be 0-5, got {self.sublevel}")
            if _SUBLEVEL_CLASS[self.sublevel] != self.cls:
                raise ValueError(f"sublevel {self.sublevel} belongs to "
                                 f"{_SUBLEVEL_CLASS[self.sublevel].display}, not {self.cls.display}")


@dataclass(frozen=True)
class Segment:
    samples: np.ndarray
    source_id: str
    index: int
    speaker_id: str = ""
    label: Optional[FluencyLabel] = None
    duration_s: float = DEFAULT_SEGMENT_S
    sample_rate: int = CANONICAL_SR
    n_valid: Optional[int] = None  # real samples before zero padding

    @property
    def padded(self) -> bool:
        return self.n_valid is not None and self.n_valid < self.samples.size


def segment_length(segment_s: float, sr: int) -> int:
    return int(round(segment_s * sr))


def segment_fixed(buffer: AudioBuffer, segment_s: float = DEFAULT_SEGMENT_S,
                  drop_partial: bool = True, speaker_id: str = "",
                  label: Optional[FluencyLabel] = None) -> list[Segment]:
    """Cut a mono buffer into consecutive, non-overlapping segments.

    With ``drop_partial`` a trailing remainder is discarded; otherwise it is
    zero-padded to full length and its ``n_valid`` records the real samples.
    """
    if segment_s <= 0:
        raise ConfigError(f"segment_s must be positive, got {segment_s}")
    if buffer.channels != 1:
        raise ConfigError("segment_fixed expects a mono buffer")
    x = buffer.samples
    L = segment_length(segment_s, buffer.sample_rate)
    n_full = x.size // L
    segments = [
        Segment(x[i * L:(i + 1) * L], buffer.source_id, i, speaker_id, label,
                segment_s, buffer.sample_rate)
        for i in range(n_full)
    ]
    rest = x.size - n_full * L
    if not drop_partial and rest:
        tail = np.zeros(L)
        tail[:rest] = x[n_full * L:]
        segments.append(Segment(tail, buffer.source_id, n_full, speaker_id, label,
                                segment_s, buffer.sample_rate, n_valid=rest))
    return segments


# -- manifest -----------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    speaker_id: str
    label: FluencyLabel
    segments: Optional[tuple] = None  # inclusive (first, last) index range
    row: int = 0

    def covers(self, index: int) -> bool:
        return self.segments is None or self.segments[0] <= index <= self.segments[1]


@dataclass
class Manifest:
    entries: list
    format_version: int = MANIFEST_VERSION
    root: Path = field(default_factory=Path)

    def __len__(self):
        return len(self.entries)

    def paths(self) -> list:
        seen = {}
        for e in self.entries:
            seen.setdefault(e.path, None)
        return list(seen)

    def validate(self) -> None:
        missing = [str(p) for p in self.paths() if not p.is_file()]
        if missing:
            raise ManifestError(f"{len(missing)} missing audio file(s): " + ", ".join(missing))


def _parse_range(token: str, row: int) -> Optional[tuple]:
    token = token.strip()
    if not token:
        return None
    try:
        if "-" in token:
            lo, hi = (int(t) for t in token.split("-", 1))
        else:
            lo = hi = int(token)
    except ValueError:
        raise ManifestError(f"row {row}: bad segment range {token!r}") from None
    if lo < 0 or hi < lo:
        raise ManifestError(f"row {row}: bad segment range {token!r}")
    return (lo, hi)


def _check_duplicates(entries: Sequence[ManifestEntry]) -> None:
    by_path: dict = {}
    for e in entries:
        by_path.setdefault(e.path, []).append(e)
    for path, group in by_path.items():
        whole = [e for e in group if e.segments is None]
        if len(whole) > 1:
            raise ManifestError(f"rows {whole[0].row} and {whole[1].row}: duplicate entry for {path}")
        ranged = sorted((e for e in group if e.segments is not None), key=lambda e: e.segments)
        for a, b in zip(ranged, ranged[1:]):
            if b.segments[0] <= a.segments[1]:
                raise ManifestError(f"rows {a.row} and {b.row}: overlapping segment ranges for {path}")


def parse_manifest(text: str, root: Path = Path(".")) -> Manifest:
    reader = csv.DictReader(io.StringIO(text))
    header = [h.strip().lower() for h in (reader.fieldnames or [])]
    missing_cols = [c for c in MANIFEST_COLUMNS if c not in header]
    if missing_cols:
        raise ManifestError(f"manifest header lacks column(s): {', '.join(missing_cols)}")
    reader.fieldnames = header
    entries = []
    for row_no, row in enumerate(reader, start=1):
        try:
            cls = FluencyClass.parse(row["label"] or "")
        except ValueError as exc:
            raise ManifestError(f"row {row_no}: {exc}") from None
        sub_tok = (row.get("sublevel") or "").strip()
        try:
            label = FluencyLabel(cls, int(sub_tok) if sub_tok else None)
        except ValueError as exc:
            raise ManifestError(f"row {row_no}: {exc}") from None
        path = Path((row["path"] or "").strip())
        if not str(path) or str(path) == ".":
            raise ManifestError(f"row {row_no}: empty path")
        if not path.is_absolute():
            path = root / path
        entries.append(ManifestEntry(path, (row["speaker"] or "").strip(), label,
                                     _parse_range(row.get("segments") or "", row_no), row_no))
    _check_duplicates(entries)
    return Manifest(entries, MANIFEST_VERSION, root)


def load_manifest(path, validate: bool = True) -> Manifest:
    """Read a ``path,speaker,label,sublevel[,segments]`` CSV.

    Relative audio paths resolve against the manifest's directory. The
    optional ``segments`` column (``"3"`` or ``"0-11"``) restricts a row to
    those segment indices; such rows override a whole-file row for the same
    audio.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise ManifestError(f"{path}: {exc.strerror or exc}") from exc
    manifest = parse_manifest(text, root=path.parent)
    if validate:
        manifest.validate()
    return manifest


def write_manifest(path, entries: Sequence[ManifestEntry], root: Optional[Path] = None) -> None:
    root = Path(path).parent if root is None else root
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS + ("segments",))
        for e in entries:
            p = e.path
            try:
                p = p.relative_to(root)
            except ValueError:
                pass
            seg = "" if e.segments is None else f"{e.segments[0]}-{e.segments[1]}"
            w.writerow([p.as_posix(), e.speaker_id, e.label.cls.name.lower(),
                        "" if e.label.sublevel is None else e.label.sublevel, seg])


# -- dataset ------------------------------------------------------------------

@dataclass
class Dataset:
    X: np.ndarray                 # [n, d]
    y: np.ndarray                 # [n] class indices
    speakers: list
    sources: list
    indices: np.ndarray
    config: Optional[FeatureConfig] = None
    segment_s: float = DEFAULT_SEGMENT_S
    sublevels: Optional[list] = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.size:
            raise DatasetError("X must be [n, d] with one label per row")

    def __len__(self):
        return self.y.size

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def minutes(self) -> float:
        return len(self) * self.segment_s / 60.0

    def class_counts(self) -> dict:
        counts = np.bincount(self.y, minlength=len(FluencyClass))
        return {c.display: int(counts[c]) for c in FluencyClass}

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return replace(
            self, X=self.X[rows], y=self.y[rows],
            speakers=[self.speakers[i] for i in rows], sources=[self.sources[i] for i in rows],
            indices=self.indices[rows],
            sublevels=None if self.sublevels is None else [self.sublevels[i] for i in rows])

    def select_features(self, n_mfcc: int, include_extras: bool) -> "Dataset":
        """Project onto a smaller feature configuration without re-extracting.

        The orthonormal DCT makes coefficient k independent of how many are
        kept, so the first ``n_mfcc`` columns equal a fresh extraction.
        """
        cfg = self.config
        if cfg is None:
            raise DatasetError("dataset has no feature config; cannot select columns")
        if n_mfcc > cfg.n_mfcc or (include_extras and not cfg.include_extras):
            raise DatasetError(f"cannot derive n_mfcc={n_mfcc}, extras={include_extras} from {cfg}")
        cols = list(range(n_mfcc))
        if include_extras:
            cols += list(range(cfg.n_mfcc, cfg.dim))
        return replace(self, X=self.X[:, cols],
                       config=cfg.replace(n_mfcc=n_mfcc, include_extras=include_extras))

    def to_csv(self, path) -> None:
        """Feature matrix CSV plus a ``<path>.meta.json`` sidecar holding the feature config."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["source", "index", "speaker", "label"] + [f"f{i}" for i in range(self.dim)])
            for i in range(len(self)):
                w.writerow([self.sources[i], int(self.indices[i]), self.speakers[i],
                            FluencyClass(self.y[i]).name.lower()]
                           + [repr(float(v)) for v in self.X[i]])
        meta = {"feature_config": None if self.config is None else self.config.to_dict(),
                "segment_s": self.segment_s}
        Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        try:
            fh = open(path, newline="", encoding="utf-8")
        except OSError as exc:
            raise DatasetError(f"{path}: {exc.strerror or exc}") from exc
        with fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[:4] != ["source", "index", "speaker", "label"]:
                raise DatasetError(f"{path}: not a feature matrix CSV")
            d = len(header) - 4
            sources, idx, speakers, y, rows = [], [], [], [], []
            for line_no, rec in enumerate(reader, start=2):
                if len(rec) != d + 4:
                    raise DatasetError(f"{path}:{line_no}: expected {d + 4} fields, got {len(rec)}")
                try:
                    y.append(FluencyClass.parse(rec[3]))
                    rows.append([float(v) for v in rec[4:]])
                    idx.append(int(rec[1]))
                except ValueError as exc:
                    raise DatasetError(f"{path}:{line_no}: {exc}") from None
                sources.append(rec[0])
                speakers.append(rec[2])
        if not rows:
            raise DatasetError(f"{path}: no rows")
        config, segment_s = _read_sidecar(path, d)
        return cls(np.array(rows), np.array(y), speakers, sources, np.array(idx), config, segment_s)


def _read_sidecar(path, d: int):
    side = Path(str(path) + ".meta.json")
    if not side.exists():
        return None, DEFAULT_SEGMENT_S
    try:
        meta = json.loads(side.read_text())
        cfg = meta.get("feature_config")
        config = None if cfg is None else FeatureConfig(**cfg)
    except (ValueError, TypeError, ConfigError) as exc:
        raise DatasetError(f"{side}: {exc}") from None
    if config is not None and config.dim != d:
        config = None  # sidecar describes a different matrix; ignore it
    return config, float(meta.get("segment_s", DEFAULT_SEGMENT_S))


def _labels_for(entries: Sequence[ManifestEntry], n_segments: int) -> list:
    """Resolve (speaker, label) per segment index; ranged rows override whole-file rows."""
    out = [None] * n_segments
    for e in sorted(entries, key=lambda e: e.segments is not None):
        for i in range(n_segments):
            if e.covers(i):
                out[i] = (e.speaker_id, e.label)
    return out


def _extract_file(args):
    path, entries, config, segment_s = args
    try:
        buffer = load_canonical(path, config.sr)
    except FluencyError as exc:
        raise type(exc)(f"while decoding {path}: {exc}") from exc
    segments = segment_fixed(buffer, segment_s)
    labels = _labels_for(entries, len(segments))
    rows = []
    for seg, lab in zip(segments, labels):
        if lab is None:
            continue
        fv = extract_segment(seg, config)
        rows.append((seg.index, lab[0], lab[1], fv.values))
    return rows


def build_dataset(manifest: Manifest, config: FeatureConfig,
                  segment_s: float = DEFAULT_SEGMENT_S, jobs: int = 1) -> Dataset:
    """Decode, segment and featurise every manifest file, in manifest order."""
    groups: dict = {}
    for e in manifest.entries:
        groups.setdefault(e.path, []).append(e)
    tasks = [(path, entries, config, segment_s) for path, entries in groups.items()]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_extract_file, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_extract_file(t) for t in tasks]

    X, y, speakers, sources, indices, sublevels = [], [], [], [], [], []
    for (path, _, _, _), rows in zip(tasks, results):
        for index, speaker, label, values in rows:
            X.append(values)
            y.append(int(label.cls))
            sublevels.append(label.sublevel)
            speakers.append(speaker)
            sources.append(path.relative_to(manifest.root).as_posix()
                           if path.is_relative_to(manifest.root) else str(path))
            indices.append(index)
    if not X:
        raise DatasetError("dataset is empty (no manifest entries or no whole segments)")
    return Dataset(np.vstack(X), np.array(y), speakers, sources, np.array(indices),
                   config, segment_s, sublevels)


__all__ = [
    "CLASS_NAMES", "Dataset", "FluencyClass", "FluencyLabel", "Manifest",
    "ManifestEntry", "Segment", "build_dataset", "load_manifest", "parse_manifest",
    "segment_fixed", "segment_length", "write_manifest",
]
