"""Beat-level feature data: parsing, feature extraction, splitting, synthesis.

Feature matrices throughout the package use the units of the feature CSV:
interval widths in milliseconds and amplitudes in millivolts, in the column
order of :data:`FEATURE_COLUMNS`. :class:`FeatureVector` is the per-beat view
with widths in seconds.
"""

import contextlib
import csv
import enum
import io
import math
import os
from dataclasses import astuple, dataclass

import numpy as np

from .errors import DataError, FormatError, RowError


class BeatClass(enum.IntEnum):
    NORMAL = 0
    PVC = 1
    APB = 2
    RBBB = 3
    LBBB = 4
    OTHER = 5

    @property
    def code(self):
        """Label used in feature CSV files."""
        return _CODES[self]

    @classmethod
    def from_code(cls, code):
        try:
            return _FROM_CODE[code]
        except KeyError:
            raise ValueError(f"unknown beat label {code!r}") from None


_CODES = {
    BeatClass.NORMAL: "N",
    BeatClass.PVC: "PVC",
    BeatClass.APB: "APB",
    BeatClass.RBBB: "RBBB",
    BeatClass.LBBB: "LBBB",
    BeatClass.OTHER: "OTHER",
}
_FROM_CODE = {v: k for k, v in _CODES.items()}

#: The five classes the classifiers are trained on, in score-vector order.
TRAINABLE_CLASSES = (BeatClass.NORMAL, BeatClass.PVC, BeatClass.APB, BeatClass.RBBB, BeatClass.LBBB)
N_CLASSES = len(TRAINABLE_CLASSES)

#: Beat counts per class in the MIT-BIH extraction used by the original study.
TABLE1_COUNTS = {
    BeatClass.NORMAL: 74385,
    BeatClass.PVC: 6730,
    BeatClass.APB: 2356,
    BeatClass.RBBB: 7205,
    BeatClass.LBBB: 8033,
    BeatClass.OTHER: 9523,
}

FEATURE_COLUMNS = (
    "pr_ms", "qrs_ms", "qt_ms", "rr_ms",
    "qrs_amp", "qrs_mean", "qrs_std", "qt_mean", "qt_std", "rr_mean", "rr_std",
)
CSV_HEADER = ("record_id", "beat_index") + FEATURE_COLUMNS + ("label",)
N_FEATURES = len(FEATURE_COLUMNS)

_WIDTH_COLS = np.arange(4)
_STD_COLS = np.array([6, 8, 10])


def feature_violation(row):
    """Return a description of the first invariant ``row`` breaks, or None."""
    row = np.asarray(row, dtype=float)
    if row.shape != (N_FEATURES,):
        return f"expected {N_FEATURES} features, got shape {row.shape}"
    if not np.all(np.isfinite(row)):
        bad = FEATURE_COLUMNS[int(np.flatnonzero(~np.isfinite(row))[0])]
        return f"non-finite value in {bad}"
    for c in _WIDTH_COLS:
        if row[c] <= 0:
            return f"{FEATURE_COLUMNS[c]} must be positive"
    for c in _STD_COLS:
        if row[c] < 0:
            return f"{FEATURE_COLUMNS[c]} must be non-negative"
    return None


@dataclass(frozen=True)
class FeatureVector:
    """Features of one beat. Widths in seconds, amplitudes in millivolts."""

    pr_width: float
    qrs_width: float
    qt_width: float
    rr_width: float
    qrs_amplitude: float
    qrs_mean: float
    qrs_std: float
    qt_mean: float
    qt_std: float
    rr_mean: float
    rr_std: float

    def __post_init__(self):
        problem = feature_violation(self.as_array())
        if problem:
            raise DataError(problem)

    def as_array(self):
        """Feature row in CSV units (ms / mV)."""
        v = np.array(astuple(self), dtype=float)
        v[:4] *= 1000.0
        return v

    def __array__(self, dtype=None, copy=None):
        a = self.as_array()
        return a if dtype is None else a.astype(dtype)

    @classmethod
    def from_array(cls, row):
        v = np.asarray(row, dtype=float).copy()
        v[:4] /= 1000.0
        return cls(*(float(x) for x in v))


@dataclass(frozen=True)
class BeatRecord:
    record_id: str
    beat_index: int
    features: FeatureVector
    label: BeatClass


class Dataset:
    """Immutable ordered collection of beats.

    Parameters
    ----------
    record_ids : sequence of str
    beat_indices : array_like of int
    features : array_like, shape (n, 11)
        Feature rows in CSV units.
    labels : array_like of int
        :class:`BeatClass` values.
    """

    def __init__(self, record_ids, beat_indices, features, labels):
        self.record_ids = tuple(str(r) for r in record_ids)
        n = len(self.record_ids)
        self.beat_indices = np.array(beat_indices, dtype=np.int64).reshape(n)
        self.features = np.array(features, dtype=float).reshape(n, N_FEATURES)
        self.labels = np.array(labels, dtype=np.int64).reshape(n)
        for arr in (self.beat_indices, self.features, self.labels):
            arr.flags.writeable = False

        if np.any(self.beat_indices < 0):
            raise DataError("beat indices must be non-negative")
        if n and (self.labels.min() < 0 or self.labels.max() >= len(BeatClass)):
            raise DataError("labels must be BeatClass values")
        X = self.features
        bad = ~np.isfinite(X).all(axis=1) | (X[:, _WIDTH_COLS] <= 0).any(axis=1) | (X[:, _STD_COLS] < 0).any(axis=1)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DataError(f"beat {i}: {feature_violation(X[i])}")
        keys = set(zip(self.record_ids, self.beat_indices.tolist()))
        if len(keys) != n:
            raise DataError("(record_id, beat_index) pairs must be unique")

    @classmethod
    def from_records(cls, records):
        records = list(records)
        return cls(
            [r.record_id for r in records],
            [r.beat_index for r in records],
            np.array([r.features.as_array() for r in records]).reshape(len(records), N_FEATURES),
            [int(r.label) for r in records],
        )

    def __len__(self):
        return len(self.record_ids)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.record_ids == other.record_ids
            and np.array_equal(self.beat_indices, other.beat_indices)
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None

    def __repr__(self):
        counts = ", ".join(f"{c.code}: {n}" for c, n in self.class_counts.items())
        return f"Dataset({len(self)} beats; {counts})"

    @property
    def class_counts(self):
        """Map from each present :class:`BeatClass` to its beat count."""
        values, counts = np.unique(self.labels, return_counts=True)
        return {BeatClass(int(v)): int(c) for v, c in zip(values, counts)}

    @property
    def beats(self):
        return [
            BeatRecord(rid, int(bi), FeatureVector.from_array(x), BeatClass(int(y)))
            for rid, bi, x, y in zip(self.record_ids, self.beat_indices, self.features, self.labels)
        ]

    def subset(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            [self.record_ids[i] for i in idx],
            self.beat_indices[idx],
            self.features[idx],
            self.labels[idx],
        )

    def trainable(self):
        """Copy without ``OTHER`` beats."""
        return self.subset(np.flatnonzero(self.labels != BeatClass.OTHER))

    def class_index(self):
        """Position of each label in :data:`TRAINABLE_CLASSES`.

        Raises
        ------
        DataError
            If the dataset contains ``OTHER`` beats.
        """
        if np.any(self.labels == BeatClass.OTHER):
            raise DataError("OTHER beats cannot be used with the 5-class models")
        return self.labels.copy()


# ---------------------------------------------------------------------------
# CSV I/O


@contextlib.contextmanager
def _text_stream(source):
    """Yield a text stream for a path, a text stream or a binary stream."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8", newline="") as fh:
            yield fh
    elif isinstance(source, io.TextIOBase):
        yield source
    else:
        wrapper = io.TextIOWrapper(source, encoding="utf-8", newline="")
        try:
            yield wrapper
        finally:
            wrapper.detach()


def parse_feature_csv(source):
    """Read a feature CSV into a :class:`Dataset`.

    Parameters
    ----------
    source : path or binary/text stream

    Raises
    ------
    FormatError
        Header does not match :data:`CSV_HEADER`.
    RowError
        A row is malformed; carries the 1-based line number.
    """
    with _text_stream(source) as stream:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty input; expected header " + ",".join(CSV_HEADER)) from None
        if tuple(header) != CSV_HEADER:
            missing = [c for c in CSV_HEADER if c not in header]
            extra = [c for c in header if c not in CSV_HEADER]
            parts = []
            if missing:
                parts.append("missing column(s): " + ", ".join(missing))
            if extra:
                parts.append("unexpected column(s): " + ", ".join(extra))
            if not parts:
                parts.append("columns out of order")
            raise FormatError("bad header; " + "; ".join(parts))

        rids, bidx, feats, labels = [], [], [], []
        seen = set()
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise RowError(line, f"expected {len(CSV_HEADER)} fields, got {len(row)}")
            rid = row[0]
            if not rid:
                raise RowError(line, "empty record_id")
            try:
                bi = int(row[1])
            except ValueError:
                raise RowError(line, f"beat_index {row[1]!r} is not an integer") from None
            if bi < 0:
                raise RowError(line, "beat_index must be non-negative")
            values = []
            for name, raw in zip(FEATURE_COLUMNS, row[2:-1]):
                try:
                    v = float(raw)
                except ValueError:
                    raise RowError(line, f"{name} {raw!r} is not numeric") from None
                values.append(v)
            problem = feature_violation(values)
            if problem:
                raise RowError(line, problem)
            try:
                label = BeatClass.from_code(row[-1])
            except ValueError as exc:
                raise RowError(line, str(exc)) from None
            if (rid, bi) in seen:
                raise RowError(line, f"duplicate beat ({rid}, {bi})")
            seen.add((rid, bi))
            rids.append(rid)
            bidx.append(bi)
            feats.append(values)
            labels.append(int(label))
    return Dataset(rids, bidx, np.array(feats).reshape(len(rids), N_FEATURES), labels)


def format_feature_csv(dataset):
    """Serialise a dataset as feature-CSV text (exact float round-trip)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rid, bi, x, y in zip(dataset.record_ids, dataset.beat_indices, dataset.features, dataset.labels):
        writer.writerow([rid, int(bi), *(repr(float(v)) for v in x), BeatClass(int(y)).code])
    return out.getvalue()


def write_feature_csv(dataset, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_feature_csv(dataset))


# ---------------------------------------------------------------------------
# Feature extraction from fiducial annotations

_FIDUCIALS = ("p_onset", "p_peak", "qrs_onset", "r_peak", "qrs_offset", "t_offset")
_REQUIRED = ("p_onset", "qrs_onset", "r_peak", "qrs_offset", "t_offset")


@dataclass(frozen=True)
class FiducialAnnotation:
    """Sample indices of one beat's landmarks; ``None`` marks an absent point."""

    beat_index: int
    p_onset: int = None
    p_peak: int = None
    qrs_onset: int = None
    r_peak: int = None
    qrs_offset: int = None
    t_offset: int = None
    label: BeatClass = BeatClass.NORMAL

    def __post_init__(self):
        present = [getattr(self, f) for f in _FIDUCIALS if getattr(self, f) is not None]
        if any(b <= a for a, b in zip(present, present[1:])):
            raise DataError(f"beat {self.beat_index}: fiducial indices must be strictly increasing")

    def missing(self):
        return [f for f in _REQUIRED if getattr(self, f) is None]


def read_fiducials(source):
    """Parse a tab-separated fiducial file.

    Columns: ``beat_index p_onset p_peak qrs_onset r_peak qrs_offset t_offset
    label``; ``-`` marks an absent fiducial. Blank lines and lines starting
    with ``#`` are ignored.
    """
    with _text_stream(source) as stream:
        text = stream.read()
    out = []
    for line_no, line in enumerate(text.split("\n"), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\r").split("\t")
        if len(parts) != 8:
            raise RowError(line_no, f"expected 8 tab-separated fields, got {len(parts)}")
        try:
            nums = [None if p == "-" else int(p) for p in parts[:7]]
            label = BeatClass.from_code(parts[7])
        except ValueError as exc:
            raise RowError(line_no, str(exc)) from None
        if nums[0] is None:
            raise RowError(line_no, "beat_index cannot be absent")
        try:
            out.append(FiducialAnnotation(nums[0], *nums[1:], label=label))
        except DataError as exc:
            raise RowError(line_no, str(exc)) from None
    return out


def read_signal(source):
    """Parse a signal file.

    The first line is ``sampling_rate=<Hz>``; every following line holds one
    sample in millivolts.

    Returns
    -------
    samples : ndarray
    sampling_rate : float
    """
    with _text_stream(source) as stream:
        lines = stream.read().split("\n")
    key, _, value = lines[0].partition("=")
    if key.strip() != "sampling_rate":
        raise FormatError("signal header must be 'sampling_rate=<Hz>'")
    try:
        fs = float(value)
    except ValueError:
        raise FormatError(f"bad sampling rate {value!r}") from None
    samples = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            samples.append(float(line))
        except ValueError:
            raise RowError(line_no, f"sample {line!r} is not numeric") from None
    return np.array(samples), fs


def extract_features(signal, annotations, sampling_rate):
    """Compute interval and amplitude features for one record.

    Windows are inclusive sample ranges: QRS ``[qrs_onset, qrs_offset]``,
    QT ``[qrs_onset, t_offset]`` and RR ``[previous r_peak, r_peak]``. The
    previous R peak is taken from the preceding annotation.

    Returns
    -------
    beats : list of (beat_index, FeatureVector, BeatClass)
    excluded : list of (beat_index, reason)
        Beats that lacked a required fiducial or a previous R peak.

    Raises
    ------
    DataError
        A fiducial index falls outside the signal.
    """
    if sampling_rate <= 0:
        raise DataError("sampling_rate must be positive")
    x = np.asarray(signal, dtype=float)
    anns = sorted(annotations, key=lambda a: a.beat_index)
    for a in anns:
        for f in _FIDUCIALS:
            v = getattr(a, f)
            if v is not None and not 0 <= v < len(x):
                raise DataError(f"beat {a.beat_index}: {f}={v} outside signal of length {len(x)}")

    fs = float(sampling_rate)
    beats, excluded = [], []
    prev_r = None
    for a in anns:
        missing = a.missing()
        if missing:
            excluded.append((a.beat_index, "missing " + ", ".join(missing)))
        elif prev_r is None:
            excluded.append((a.beat_index, "no previous R peak"))
        elif a.r_peak <= prev_r:
            excluded.append((a.beat_index, "R peak not after previous R peak"))
        else:
            qrs = x[a.qrs_onset:a.qrs_offset + 1]
            qt = x[a.qrs_onset:a.t_offset + 1]
            rr = x[prev_r:a.r_peak + 1]
            fv = FeatureVector(
                pr_width=(a.qrs_onset - a.p_onset) / fs,
                qrs_width=(a.qrs_offset - a.qrs_onset) / fs,
                qt_width=(a.t_offset - a.qrs_onset) / fs,
                rr_width=(a.r_peak - prev_r) / fs,
                qrs_amplitude=float(qrs.max() - qrs.min()),
                qrs_mean=float(qrs.mean()),
                qrs_std=float(qrs.std()),
                qt_mean=float(qt.mean()),
                qt_std=float(qt.std()),
                rr_mean=float(rr.mean()),
                rr_std=float(rr.std()),
            )
            beats.append((a.beat_index, fv, a.label))
        prev_r = a.r_peak
    return beats, excluded


def dataset_from_extraction(record_id, beats):
    return Dataset.from_records(BeatRecord(record_id, bi, fv, lab) for bi, fv, lab in beats)


# ---------------------------------------------------------------------------
# Splitting


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.04
    calibration_fraction_of_train: float = 0.25
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")
        if not 0 <= self.calibration_fraction_of_train < 1:
            raise ValueError("calibration_fraction_of_train must lie in [0, 1)")


def _apportion(total, sizes):
    """Split ``total`` across groups in proportion to ``sizes`` (largest remainder)."""
    sizes = np.asarray(sizes, dtype=np.int64)
    if total == 0 or sizes.sum() == 0:
        return np.zeros_like(sizes)
    exact = total * sizes / sizes.sum()
    base = np.floor(exact).astype(np.int64)
    short = total - base.sum()
    order = np.argsort(-(exact - base), kind="stable")
    base[order[:short]] += 1
    return base


def split(dataset, spec):
    """Partition the non-``OTHER`` beats into train, calibration and test sets.

    ``floor(train_fraction * n)`` beats are drawn for training; of those,
    ``floor(calibration_fraction_of_train * n_train)`` are set aside for fusion
    calibration. Each partition keeps the original beat order.

    Raises
    ------
    DataError
        In stratified mode, if a class would be empty in the training or
        (non-empty) calibration partition.
    """
    included = np.flatnonzero(dataset.labels != BeatClass.OTHER)
    n = len(included)
    n_pool = math.floor(spec.train_fraction * n)
    n_cal = math.floor(spec.calibration_fraction_of_train * n_pool)
    rng = np.random.default_rng(spec.seed)

    if spec.stratified:
        labels = dataset.labels[included]
        classes = [c for c in TRAINABLE_CLASSES if np.any(labels == c)]
        members = [included[labels == c] for c in classes]
        pool_sizes = _apportion(n_pool, [len(m) for m in members])
        cal_sizes = _apportion(n_cal, pool_sizes)
        pool_parts, cal_parts = [], []
        for c, m, k, kc in zip(classes, members, pool_sizes, cal_sizes):
            if k - kc == 0:
                raise DataError(f"class {c.name} has no beats in the training partition")
            if n_cal and kc == 0:
                raise DataError(f"class {c.name} has no beats in the calibration partition")
            chosen = rng.permutation(m)[:k]
            cal_parts.append(chosen[:kc])
            pool_parts.append(chosen)
        pool = np.concatenate(pool_parts) if pool_parts else np.array([], dtype=np.int64)
        cal = np.concatenate(cal_parts) if cal_parts else np.array([], dtype=np.int64)
    else:
        pool = rng.permutation(included)[:n_pool]
        cal = pool[:n_cal]

    test = np.setdiff1d(included, pool)
    train = np.setdiff1d(pool, cal)
    return dataset.subset(train), dataset.subset(np.sort(cal)), dataset.subset(test)


# ---------------------------------------------------------------------------
# Synthetic data

# Typical adult values in CSV units and the within-class spread of each feature.
_SYNTH_BASE = np.array([160.0, 90.0, 380.0, 800.0, 1.5, 0.30, 0.45, 0.15, 0.30, 0.05, 0.15])
_SYNTH_SD = np.array([20.0, 10.0, 30.0, 100.0, 0.20, 0.08, 0.06, 0.05, 0.05, 0.03, 0.03])
_MIN_WIDTH_MS = 1.0


def _class_directions():
    # Fixed orthonormal directions, one per BeatClass, independent of the sample seed.
    g = np.random.default_rng(20110321).standard_normal((N_FEATURES, len(BeatClass)))
    q, _ = np.linalg.qr(g)
    return q.T


def synth_class_means(separation):
    """Class-mean feature rows used by :func:`synth_generate`, shape (6, 11)."""
    return _SYNTH_BASE + separation * _SYNTH_SD * _class_directions()


def synth_generate(n_per_class, seed, separation):
    """Draw a labelled Gaussian feature dataset.

    Each class has mean ``base + separation * sd * u_c`` with orthonormal
    directions ``u_c`` and diagonal covariance ``diag(sd**2)``, so class means
    sit ``separation * sqrt(2)`` standard deviations apart. Widths are clamped
    to at least 1 ms and std features to at least 0.

    Parameters
    ----------
    n_per_class : dict of BeatClass -> int
    seed : int
    separation : float
    """
    counts = {BeatClass(c): int(k) for c, k in n_per_class.items()}
    if any(k < 0 for k in counts.values()):
        raise DataError("class counts must be non-negative")
    if not any(counts.values()):
        raise DataError("all class counts are zero")
    if sum(1 for k in counts.values() if k > 0) < 2:
        raise DataError("at least two classes need a positive count")
    if separation < 0:
        raise DataError("separation must be non-negative")
    rng = np.random.default_rng(seed)
    means = synth_class_means(separation)
    rows, labels = [], []
    for c in BeatClass:
        k = counts.get(c, 0)
        if k:
            rows.append(means[c] + _SYNTH_SD * rng.standard_normal((k, N_FEATURES)))
            labels.append(np.full(k, int(c)))
    X = np.concatenate(rows)
    y = np.concatenate(labels)
    X[:, _WIDTH_COLS] = np.maximum(X[:, _WIDTH_COLS], _MIN_WIDTH_MS)
    X[:, _STD_COLS] = np.maximum(X[:, _STD_COLS], 0.0)
    order = rng.permutation(len(y))
    n = len(y)
    return Dataset(["synth"] * n, np.arange(n), X[order], y[order])


def table1_counts(total, include_other=False):
    """Scale the study's per-class beat counts to ``total`` beats."""
    classes = list(BeatClass) if include_other else list(TRAINABLE_CLASSES)
    sizes = _apportion(total, [TABLE1_COUNTS[c] for c in classes])
    return {c: int(k) for c, k in zip(classes, sizes)}


__all__ = [
    "BeatClass", "BeatRecord", "CSV_HEADER", "Dataset", "FEATURE_COLUMNS", "FeatureVector",
    "FiducialAnnotation", "N_CLASSES", "N_FEATURES", "SplitSpec", "TABLE1_COUNTS",
    "TRAINABLE_CLASSES", "dataset_from_extraction", "extract_features", "format_feature_csv",
    "parse_feature_csv", "read_fiducials", "read_signal", "split", "synth_class_means",
    "synth_generate", "table1_counts", "write_feature_csv",
]
