"""Dataset ingestion, encoding, normalization, and grouped confusion matrices.

A dataset is a CSV table plus a JSON side-file describing which column is the
binary outcome, which column is the protected attribute, and how to encode the
features.  After loading, everything downstream works on plain numpy arrays:
features in [0, 1], labels in {0, 1} (1 = favorable), protected values in
{0, 1} (1 = privileged), and non-negative instance weights.
"""

import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"
LABEL_ENCODE = "label_encode"
ONE_HOT = "one_hot"


class ConfigError(ValueError):
    """Bad dataset spec or run configuration (CLI exit code 2)."""


class DataError(Exception):
    """CSV content that cannot be mapped to a usable dataset (CLI exit code 3)."""


class GroupCoverageError(ValueError):
    """Raised when an operation needs both protected groups but got one."""


def _as_values(raw) -> tuple[str, ...]:
    """Normalize a scalar-or-list spec field to a tuple of CSV cell strings."""
    if isinstance(raw, (list, tuple)):
        values = tuple(str(v) for v in raw)
    else:
        values = (str(raw),)
    if not values:
        raise ConfigError("value list must not be empty")
    return values


@dataclass(frozen=True)
class FeatureColumn:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise ConfigError(
                f"feature {self.name!r}: kind must be {NUMERIC!r} or {CATEGORICAL!r}, got {self.kind!r}"
            )


@dataclass(frozen=True)
class DatasetSpec:
    """Declarative description of how to read one CSV into an EncodedDataset.

    ``favorable_value`` / ``privileged_value`` may each be a single raw cell
    value or a list of them; every listed value maps to 1 and every other raw
    value collapses to 0, so multi-valued raw columns binarize cleanly.
    Comparison is by exact string match against the CSV cell.
    """

    name: str
    label_column: str
    favorable_value: tuple[str, ...]
    protected_column: str
    privileged_value: tuple[str, ...]
    feature_columns: tuple[FeatureColumn, ...]
    encoding: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "favorable_value", _as_values(self.favorable_value))
        object.__setattr__(self, "privileged_value", _as_values(self.privileged_value))
        feature_names = [c.name for c in self.feature_columns]
        if len(set(feature_names)) != len(feature_names):
            raise ConfigError(f"dataset {self.name!r}: duplicate feature columns")
        if self.label_column == self.protected_column:
            raise ConfigError(
                f"dataset {self.name!r}: label and protected columns must differ"
            )
        for special in (self.label_column, self.protected_column):
            if special in feature_names:
                raise ConfigError(
                    f"dataset {self.name!r}: column {special!r} may not double as a feature"
                )
        categorical = {c.name for c in self.feature_columns if c.kind == CATEGORICAL}
        for col, how in self.encoding.items():
            if col not in categorical:
                raise ConfigError(
                    f"dataset {self.name!r}: encoding given for non-categorical column {col!r}"
                )
            if how not in (LABEL_ENCODE, ONE_HOT):
                raise ConfigError(
                    f"dataset {self.name!r}: encoding for {col!r} must be "
                    f"{LABEL_ENCODE!r} or {ONE_HOT!r}, got {how!r}"
                )

    def encoding_for(self, column: str) -> str:
        return self.encoding.get(column, ONE_HOT)

    @classmethod
    def from_dict(cls, raw: dict) -> "DatasetSpec":
        try:
            features = tuple(
                FeatureColumn(str(f["name"]), str(f["kind"]))
                for f in raw["feature_columns"]
            )
            return cls(
                name=str(raw["name"]),
                label_column=str(raw["label_column"]),
                favorable_value=raw["favorable_value"],
                protected_column=str(raw["protected_column"]),
                privileged_value=raw["privileged_value"],
                feature_columns=features,
                encoding={str(k): str(v) for k, v in raw.get("encoding", {}).items()},
            )
        except KeyError as exc:
            raise ConfigError(f"dataset spec missing field {exc.args[0]!r}") from exc

    @classmethod
    def from_json(cls, text: str) -> "DatasetSpec":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"dataset spec is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_json_file(cls, path) -> "DatasetSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "label_column": self.label_column,
            "favorable_value": list(self.favorable_value),
            "protected_column": self.protected_column,
            "privileged_value": list(self.privileged_value),
            "feature_columns": [
                {"name": c.name, "kind": c.kind} for c in self.feature_columns
            ],
            "encoding": dict(self.encoding),
        }


@dataclass(frozen=True)
class EncodedDataset:
    """Numeric view of one dataset; arrays are read-only after construction."""

    name: str
    X: np.ndarray
    y: np.ndarray
    s: np.ndarray
    weights: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        for arr in (self.X, self.y, self.s, self.weights):
            arr.setflags(write=False)

    @property
    def row_count(self) -> int:
        return self.X.shape[0]

    @property
    def col_count(self) -> int:
        return self.X.shape[1]

    def with_weights(self, weights: np.ndarray) -> "EncodedDataset":
        weights = np.asarray(weights, dtype=float).copy()
        if weights.shape != (self.row_count,):
            raise ValueError("weights length must match row count")
        if np.any(weights < 0):
            raise ValueError("weights must be non-negative")
        return EncodedDataset(
            self.name, self.X, self.y, self.s, weights, self.feature_names
        )


def _open_csv(csv_source):
    if hasattr(csv_source, "read"):
        return csv_source, False
    return open(csv_source, "r", encoding="utf-8", newline=""), True


def _read_table(csv_source) -> tuple[list[str], list[list[str]]]:
    fh, owned = _open_csv(csv_source)
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("CSV is empty (no header row)")
        rows = [row for row in reader if row]
    finally:
        if owned:
            fh.close()
    return header, rows


def encode_dataset(csv_source, spec: DatasetSpec) -> EncodedDataset:
    """Read + encode a CSV without normalizing the result.

    Labels map favorable -> 1, protected maps privileged -> 1, categoricals
    are label- or one-hot-encoded (full dummy set, nothing dropped).  Rows
    with an empty cell in any used column are rejected with a warning.
    Feature values stay on their raw scale; see ``load_dataset`` for the
    normalized variant.
    """
    header, rows = _read_table(csv_source)
    col_index = {name: i for i, name in enumerate(header)}

    used = [spec.label_column, spec.protected_column] + [
        c.name for c in spec.feature_columns
    ]
    missing = [name for name in used if name not in col_index]
    if missing:
        raise ConfigError(
            f"dataset {spec.name!r}: CSV is missing columns {missing} "
            f"(header has {header})"
        )

    used_idx = [col_index[name] for name in used]
    kept, rejected = [], []
    for i, row in enumerate(rows):
        if len(row) < len(header) or any(row[j] == "" for j in used_idx):
            rejected.append(i)
        else:
            kept.append(row)
    if rejected:
        shown = ", ".join(str(i) for i in rejected[:10])
        more = "" if len(rejected) <= 10 else f" (+{len(rejected) - 10} more)"
        warnings.warn(
            f"dataset {spec.name!r}: rejected {len(rejected)} incomplete rows "
            f"at indices {shown}{more}"
        )
    if not kept:
        raise DataError(f"dataset {spec.name!r}: no usable data rows")

    n = len(kept)
    favorable = set(spec.favorable_value)
    privileged = set(spec.privileged_value)
    y = np.array(
        [1 if row[col_index[spec.label_column]] in favorable else 0 for row in kept],
        dtype=np.int64,
    )
    s = np.array(
        [1 if row[col_index[spec.protected_column]] in privileged else 0 for row in kept],
        dtype=np.int64,
    )
    if y.min() == y.max():
        raise DataError(
            f"dataset {spec.name!r}: label column {spec.label_column!r} maps to a "
            f"single outcome; need both favorable and unfavorable rows"
        )
    if 1 not in s:
        raise DataError(
            f"dataset {spec.name!r}: privileged value(s) {list(spec.privileged_value)} "
            f"never occur in column {spec.protected_column!r}"
        )
    if 0 not in s:
        raise DataError(
            f"dataset {spec.name!r}: every row is privileged; group metrics need "
            f"both groups present"
        )

    columns: list[np.ndarray] = []
    names: list[str] = []
    for feat in spec.feature_columns:
        j = col_index[feat.name]
        raw = [row[j] for row in kept]
        if feat.kind == NUMERIC:
            try:
                col = np.array([float(v) for v in raw], dtype=float)
            except ValueError as exc:
                raise DataError(
                    f"dataset {spec.name!r}: non-numeric value in column {feat.name!r}: {exc}"
                ) from exc
            if not np.all(np.isfinite(col)):
                raise DataError(
                    f"dataset {spec.name!r}: non-finite value in column {feat.name!r}"
                )
            columns.append(col)
            names.append(feat.name)
        else:
            categories = sorted(set(raw))
            if spec.encoding_for(feat.name) == LABEL_ENCODE:
                code = {c: float(k) for k, c in enumerate(categories)}
                columns.append(np.array([code[v] for v in raw], dtype=float))
                names.append(feat.name)
            else:
                for cat in categories:
                    columns.append(
                        np.array([1.0 if v == cat else 0.0 for v in raw], dtype=float)
                    )
                    names.append(f"{feat.name}={cat}")

    X = np.column_stack(columns) if columns else np.zeros((n, 0), dtype=float)
    return EncodedDataset(
        name=spec.name,
        X=X,
        y=y,
        s=s,
        weights=np.ones(n, dtype=float),
        feature_names=tuple(names),
    )


def fit_minmax(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column minima and maxima, for min-max scaling fitted on training rows."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("expected a non-empty 2-D feature matrix")
    return X.min(axis=0), X.max(axis=0)


def apply_minmax(X: np.ndarray, mins: np.ndarray, maxs: np.ndarray) -> np.ndarray:
    """Scale columns to [0, 1] using fitted bounds; constant columns map to 0."""
    X = np.asarray(X, dtype=float)
    span = maxs - mins
    safe = np.where(span > 0, span, 1.0)
    out = (X - mins) / safe
    out[:, span == 0] = 0.0
    return out


def normalize_minmax(X: np.ndarray) -> np.ndarray:
    mins, maxs = fit_minmax(X)
    return apply_minmax(X, mins, maxs)


def load_dataset(csv_source, spec: DatasetSpec) -> EncodedDataset:
    """Encode a CSV and min-max normalize every column to [0, 1] in one pass."""
    ds = encode_dataset(csv_source, spec)
    return EncodedDataset(
        name=ds.name,
        X=normalize_minmax(ds.X),
        y=ds.y,
        s=ds.s,
        weights=ds.weights.copy(),
        feature_names=ds.feature_names,
    )


@dataclass(frozen=True)
class CellCounts:
    tp: float
    fp: float
    fn: float
    tn: float

    @property
    def total(self) -> float:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class GroupedConfusionMatrix:
    """TP/FP/FN/TN per protected group, with optional weighted cell sums."""

    privileged: CellCounts
    unprivileged: CellCounts
    weighted_privileged: CellCounts | None = None
    weighted_unprivileged: CellCounts | None = None

    @property
    def total(self) -> float:
        return self.privileged.total + self.unprivileged.total


def _check_binary(name: str, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if not np.isin(v, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    return v.astype(np.int64)


def _cells(y_true, y_pred, mask, weights) -> CellCounts:
    t, p = y_true[mask], y_pred[mask]
    w = weights[mask]
    return CellCounts(
        tp=float(w[(t == 1) & (p == 1)].sum()),
        fp=float(w[(t == 0) & (p == 1)].sum()),
        fn=float(w[(t == 1) & (p == 0)].sum()),
        tn=float(w[(t == 0) & (p == 0)].sum()),
    )


def build_grouped_confusion(
    y_true, y_pred, s, weights=None
) -> GroupedConfusionMatrix:
    """Assign each row to one of the 8 cells (group x TP/FP/FN/TN).

    Requires both protected groups to be present; raises GroupCoverageError
    otherwise so callers can decide whether Undefined metrics are acceptable.
    """
    y_true = _check_binary("y_true", y_true)
    y_pred = _check_binary("y_pred", y_pred)
    s = _check_binary("s", s)
    if not (len(y_true) == len(y_pred) == len(s)):
        raise ValueError(
            f"length mismatch: y_true={len(y_true)} y_pred={len(y_pred)} s={len(s)}"
        )
    if len(y_true) == 0:
        raise ValueError("empty input")
    if s.min() == s.max():
        raise GroupCoverageError("both protected groups must be present")

    ones = np.ones(len(y_true), dtype=float)
    cm = GroupedConfusionMatrix(
        privileged=_cells(y_true, y_pred, s == 1, ones),
        unprivileged=_cells(y_true, y_pred, s == 0, ones),
    )
    if weights is None:
        return cm
    w = np.asarray(weights, dtype=float)
    if w.shape != y_true.shape:
        raise ValueError("weights length mismatch")
    return GroupedConfusionMatrix(
        privileged=cm.privileged,
        unprivileged=cm.unprivileged,
        weighted_privileged=_cells(y_true, y_pred, s == 1, w),
        weighted_unprivileged=_cells(y_true, y_pred, s == 0, w),
    )
