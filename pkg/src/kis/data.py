"""Data ingestion, preprocessing, and ANOVA feature-window construction."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DataError

MI_CLIP = 5.0


@dataclass(frozen=True)
class Normalization:
    """Per-feature z-score statistics fitted on a training split."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, points):
        return (np.asarray(points, dtype=float) - self.mean) / self.std


@dataclass(frozen=True)
class Dataset:
    """Dense labeled point set with labels in {-1, +1}.

    Attributes
    ----------
    points : ndarray, shape (n, d)
    labels : ndarray, shape (n,)
    feature_names : list of str, optional
    normalization : Normalization, optional
        Present once the dataset has been z-scored; the statistics always come
        from the training split.
    """

    points: np.ndarray
    labels: np.ndarray
    feature_names: list[str] | None = None
    normalization: Normalization | None = None

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        labels = np.asarray(self.labels, dtype=float).ravel()
        if points.shape[0] != labels.shape[0]:
            raise DataError(f"{points.shape[0]} points but {labels.shape[0]} labels")
        if not np.all((labels == 1.0) | (labels == -1.0)):
            raise DataError("labels must be -1 or +1")
        if self.feature_names is not None and len(self.feature_names) != points.shape[1]:
            raise DataError("feature_names length does not match the number of columns")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    def subset(self, index):
        return replace(self, points=self.points[index], labels=self.labels[index])


@dataclass(frozen=True)
class FeatureWindowing:
    """ANOVA windows with their weights and per-window length-scales.

    ``windows`` holds 0-based feature indices. Windows are disjoint, hold at
    most three features each, and there are at most ``ceil(d / 3)`` of them.
    """

    windows: tuple[tuple[int, ...], ...]
    weights: np.ndarray
    length_scales: np.ndarray
    mi_scores: np.ndarray | None = None
    n_features: int | None = None

    def __post_init__(self):
        windows = tuple(tuple(int(j) for j in w) for w in self.windows)
        weights = np.asarray(self.weights, dtype=float).ravel()
        scales = np.asarray(self.length_scales, dtype=float).ravel()
        if not windows:
            raise DataError("at least one feature window is required")
        if len(weights) != len(windows) or len(scales) != len(windows):
            raise DataError("need one weight and one length-scale per window")
        used = [j for w in windows for j in w]
        if len(set(used)) != len(used):
            raise DataError("feature windows must be disjoint")
        if any(not 1 <= len(w) <= 3 for w in windows):
            raise DataError("each feature window must hold 1 to 3 features")
        if min(used) < 0:
            raise DataError("feature indices must be nonnegative")
        if np.any(weights <= 0) or np.any(scales <= 0):
            raise DataError("window weights and length-scales must be positive")
        if self.n_features is not None:
            if max(used) >= self.n_features:
                raise DataError("feature window index exceeds the feature count")
            if len(windows) > math.ceil(self.n_features / 3):
                raise DataError("more than ceil(d/3) feature windows")
        object.__setattr__(self, "windows", windows)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "length_scales", scales)

    @property
    def P(self):
        return len(self.windows)

    def with_length_scales(self, length_scales):
        return replace(self, length_scales=np.broadcast_to(
            np.asarray(length_scales, dtype=float), (self.P,)).copy())


def _map_label(value, where):
    if value == 1.0:
        return 1.0
    if value in (0.0, -1.0):
        return -1.0
    raise DataError(f"{where}: label {value!r} is not one of -1, 0, +1")


def load_libsvm(path, n_features=None):
    """Read a LIBSVM/svmlight text file into a dense Dataset.

    Indices are 1-based and must strictly increase within a line. Missing
    entries are zero. ``d`` is the largest index seen unless ``n_features``
    is given. Labels 0 map to -1.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    labels, rows = [], []
    max_index = 0
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            where = f"{path}:{lineno}"
            try:
                label = float(tokens[0])
            except ValueError:
                raise DataError(f"{where}: cannot parse label {tokens[0]!r}") from None
            labels.append(_map_label(label, where))
            entries = []
            last = 0
            for tok in tokens[1:]:
                idx, sep, val = tok.partition(":")
                try:
                    if not sep:
                        raise ValueError
                    j, x = int(idx), float(val)
                except ValueError:
                    raise DataError(f"{where}: malformed feature {tok!r}") from None
                if j <= last:
                    raise DataError(f"{where}: feature indices must be 1-based and strictly increasing")
                last = j
                entries.append((j, x))
            max_index = max(max_index, last)
            rows.append(entries)
    if not rows:
        raise DataError(f"{path}: no data lines")
    d = max_index if n_features is None else int(n_features)
    if d < max_index:
        raise DataError(f"{path}: feature index {max_index} exceeds n_features={d}")
    points = np.zeros((len(rows), d))
    for i, entries in enumerate(rows):
        for j, x in entries:
            points[i, j - 1] = x
    return Dataset(points, np.array(labels))


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _read_table(path, header):
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    if header is None:
        header = not all(_is_number(c) for c in rows[0])
    names = None
    if header:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: header but no data rows")
    width = len(names) if names else len(rows[0])
    first_row = 2 if header else 1
    values = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        rowno = first_row + i
        if len(row) != width:
            raise DataError(f"{path}: row {rowno} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell == "":
                raise DataError(f"{path}: row {rowno}, column {j + 1}: empty cell")
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {rowno}, column {j + 1}: non-numeric value {cell!r}") from None
    return values, names, first_row


def load_csv(path, label_column=-1, header=None):
    """Read a rectangular numeric CSV; one column holds the labels.

    ``label_column`` is a column name (requires a header) or an integer
    index (negative counts from the end). With ``header=None`` the first row
    is treated as a header when any of its cells is non-numeric.
    """
    values, names, first_row = _read_table(path, header)
    width = values.shape[1]
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if names is None or label_column not in names:
            raise DataError(f"{path}: no column named {label_column!r}")
        label_idx = names.index(label_column)
    else:
        label_idx = int(label_column)
        if not -width <= label_idx < width:
            raise DataError(f"{path}: label column {label_idx} out of range for {width} columns")
        label_idx %= width
    labels = np.array([_map_label(v, f"{path}: row {first_row + i}")
                       for i, v in enumerate(values[:, label_idx])])
    points = np.delete(values, label_idx, axis=1)
    feature_names = None
    if names:
        feature_names = [nm for j, nm in enumerate(names) if j != label_idx]
    return Dataset(points, labels, feature_names=feature_names)


def load_features_csv(path, header=None):
    """Read an unlabeled numeric CSV; every column is a feature."""
    values, _, _ = _read_table(path, header)
    return values


def balance_and_split(data, train_fraction=0.5, seed=0):
    """Stratified random split, then down-sample the training majority class.

    Points dropped by balancing leave the pipeline; the test split keeps its
    original class ratio.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    per_class = []
    for cls in (-1.0, 1.0):
        members = np.flatnonzero(data.labels == cls)
        if members.size == 0:
            raise DataError(f"class {cls:+.0f} is absent")
        members = rng.permutation(members)
        k = int(round(train_fraction * members.size))
        per_class.append(members[:k])
        test_idx.append(members[k:])
    keep = min(len(c) for c in per_class)
    if keep < 1:
        raise DataError("balancing leaves fewer than 2 training points")
    for members in per_class:
        if len(members) > keep:
            members = rng.choice(members, size=keep, replace=False)
        train_idx.append(members)
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return data.subset(train_idx), data.subset(test_idx)


def zscore_fit_transform(train, test=None):
    """Z-score both splits with statistics from ``train`` only.

    Population standard deviation; constant columns keep std 1 and become
    all zeros.
    """
    if train.n == 0:
        raise DataError("cannot normalize an empty training split")
    mean = train.points.mean(axis=0)
    std = train.points.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)
    stats = Normalization(mean, std)
    out_train = replace(train, points=stats.transform(train.points), normalization=stats)
    if test is None:
        return out_train, None
    return out_train, replace(test, points=stats.transform(test.points), normalization=stats)


def mutual_information_scores(data, bins=10):
    """Plug-in mutual information (nats) between each feature and the label.

    Features are clipped to [-5, 5] and binned on equal-width bins over that
    range, so the estimate assumes z-scored input.
    """
    if bins < 2:
        raise DataError("bins must be at least 2")
    if data.n < bins:
        raise DataError(f"only {data.n} samples for {bins} bins; use fewer bins")
    x = np.clip(data.points, -MI_CLIP, MI_CLIP)
    cells = np.floor((x + MI_CLIP) / (2 * MI_CLIP) * bins).astype(int)
    cells = np.minimum(cells, bins - 1)
    cls = (data.labels > 0).astype(int)
    scores = np.empty(data.d)
    for j in range(data.d):
        table = np.zeros((bins, 2))
        np.add.at(table, (cells[:, j], cls), 1.0)
        scores[j] = _plugin_mi(table)
    return scores


def _plugin_mi(table):
    p = table / table.sum()
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    nz = p > 0
    return float(max(0.0, np.sum(p[nz] * np.log(p[nz] / (px @ py)[nz]))))


def build_windows(mi_scores, d=None, window_size=3):
    """Group features into ANOVA windows by descending MI rank.

    Consecutive blocks of ``window_size`` ranked features form the windows,
    capped at ``ceil(d / 3)`` windows; with ``window_size=3`` every feature is
    used and the last window may be short. Weights default to ``1/P`` and
    length-scales to 1.
    """
    mi_scores = np.asarray(mi_scores, dtype=float)
    d = len(mi_scores) if d is None else int(d)
    if window_size not in (1, 2, 3):
        raise DataError("window_size must be 1, 2 or 3")
    if len(mi_scores) != d:
        raise DataError("need one MI score per feature")
    order = np.argsort(-mi_scores, kind="stable")
    P = math.ceil(d / 3)
    windows = [tuple(sorted(int(j) for j in order[s:s + window_size]))
               for s in range(0, d, window_size)][:P]
    return FeatureWindowing(
        windows=tuple(windows),
        weights=np.full(len(windows), 1.0 / len(windows)),
        length_scales=np.ones(len(windows)),
        mi_scores=mi_scores,
        n_features=d,
    )


def explicit_windows(spec, d):
    """Parse ``"1,2,3;4,5"`` (1-based feature numbers) into a FeatureWindowing."""
    try:
        windows = tuple(tuple(int(tok) - 1 for tok in part.split(","))
                        for part in spec.split(";") if part.strip())
    except ValueError:
        raise DataError(f"cannot parse window spec {spec!r}") from None
    P = len(windows)
    return FeatureWindowing(windows, np.full(P, 1.0 / P), np.ones(P), n_features=d)
