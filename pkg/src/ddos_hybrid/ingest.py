"""CSV ingestion and cleaning for CICFlowMeter-style flow records."""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

# Identifier-like CIC-DDoS2019 columns that carry no generalizable signal.
DEFAULT_DROP_COLUMNS = (
    "Unnamed: 0",
    "Flow ID",
    "Source IP",
    "Source Port",
    "Destination IP",
    "Destination Port",
    "Timestamp",
    "SimillarHTTP",
)
DEFAULT_LABEL_COLUMN = "Label"

_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_NONFINITE = re.compile(r"[+-]?(?:inf|infinity|nan)", re.IGNORECASE)
_ASCII_WS = " \t\r\n\x0b\x0c"


class IngestError(ValueError):
    """Raised when a flow file cannot be turned into a usable table."""


class MissingColumnError(IngestError):
    pass


@dataclass(frozen=True)
class ColumnSpec:
    feature_columns: tuple[str, ...]
    label_column: str = DEFAULT_LABEL_COLUMN
    drop_columns: tuple[str, ...] = DEFAULT_DROP_COLUMNS

    def __post_init__(self):
        object.__setattr__(self, "feature_columns", tuple(self.feature_columns))
        object.__setattr__(self, "drop_columns", tuple(self.drop_columns))
        if not self.feature_columns:
            raise ValueError("feature_columns must be non-empty")
        if self.label_column in self.feature_columns:
            raise ValueError("label column cannot also be a feature column")
        overlap = set(self.drop_columns) & set(self.feature_columns)
        if overlap:
            raise ValueError(f"columns both dropped and used as features: {sorted(overlap)}")
        if len(set(self.feature_columns)) != len(self.feature_columns):
            raise ValueError("duplicate feature column names")

    @classmethod
    def infer(
        cls,
        headers: Sequence[str],
        label_column: str = DEFAULT_LABEL_COLUMN,
        drop_columns: Iterable[str] = DEFAULT_DROP_COLUMNS,
    ) -> "ColumnSpec":
        """Every header that is neither the label nor in the drop set becomes a feature."""
        drop = tuple(drop_columns)
        if label_column not in headers:
            raise MissingColumnError(f"label column absent: {label_column!r}")
        features = tuple(h for h in headers if h != label_column and h not in drop)
        return cls(features, label_column, drop)


@dataclass(frozen=True)
class LabelCodec:
    """Bijection between label strings and ids 0..C-1, lexicographic order."""

    classes: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if list(self.classes) != sorted(set(self.classes)):
            raise ValueError("codec classes must be distinct and sorted")

    @classmethod
    def fit(cls, labels: Iterable[str]) -> "LabelCodec":
        return cls(tuple(sorted(set(labels))))

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def mapping(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.classes)}

    def encode(self, labels: Iterable[str]) -> np.ndarray:
        m = self.mapping
        try:
            return np.array([m[s] for s in labels], dtype=np.intp)
        except KeyError as e:
            raise IngestError(f"unknown label {e.args[0]!r}") from None

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.classes[int(i)] for i in ids]


@dataclass(frozen=True)
class RawTable:
    headers: tuple[str, ...]
    rows: list[list[str]]

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> list[str]:
        j = self.headers.index(name)
        return [r[j] for r in self.rows]


@dataclass(frozen=True)
class FlowTable:
    features: np.ndarray
    labels: np.ndarray
    codec: LabelCodec
    column_spec: ColumnSpec

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.ascontiguousarray(self.labels, dtype=np.intp)
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
            raise ValueError(f"features must be a non-empty 2-D matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError("one label per feature row required")
        if not np.isfinite(X).all():
            raise ValueError("features contain NaN or infinity")
        if y.min() < 0 or y.max() >= self.codec.n_classes:
            raise ValueError("label id out of codec range")
        if X.shape[1] != len(self.column_spec.feature_columns):
            raise ValueError("feature width does not match column spec")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return self.codec.n_classes

    def subset(self, idx) -> "FlowTable":
        idx = np.asarray(idx, dtype=np.intp)
        return FlowTable(self.features[idx], self.labels[idx], self.codec, self.column_spec)


@dataclass
class CleanReport:
    rows_in: int = 0
    rows_out: int = 0
    rows_dropped_missing: int = 0
    rows_dropped_nonfinite: int = 0
    columns_dropped: list[str] = field(default_factory=list)

    def consistent(self) -> bool:
        return self.rows_in == self.rows_out + self.rows_dropped_missing + self.rows_dropped_nonfinite


def _trim(s: str) -> str:
    return s.strip(_ASCII_WS)


def load_csv(path, spec: ColumnSpec | None = None) -> RawTable:
    """Read a header-first CSV into string cells; no numeric parsing happens here."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file, header row missing") from None
        headers = tuple(_trim(h) for h in header)
        seen = set()
        for h in headers:
            if h in seen:
                raise IngestError(f"{path}: duplicate header {h!r}")
            seen.add(h)
        width = len(headers)
        rows = []
        for rec in reader:
            if not rec:
                continue
            if len(rec) < width:
                rec = rec + [""] * (width - len(rec))
            elif len(rec) > width:
                rec = rec[:width]
            rows.append(rec)
    table = RawTable(headers, rows)
    if spec is not None:
        check_columns(table.headers, spec)
    log.debug("loaded %s: %d rows, %d columns", path, len(rows), width)
    return table


def check_columns(headers: Sequence[str], spec: ColumnSpec) -> None:
    if spec.label_column not in headers:
        raise MissingColumnError(f"label column absent: {spec.label_column!r}")
    missing = [c for c in spec.feature_columns if c not in headers]
    if missing:
        raise MissingColumnError(f"feature columns absent: {missing}")


def parse_number(cell: str) -> float | None:
    """Decimal or scientific notation to float; None for anything else.

    Literal infinities/NaN parse to the corresponding non-finite float so
    callers can tell them apart from garbage.
    """
    s = _trim(cell)
    if _NUMBER.fullmatch(s):
        return float(s)
    if _NONFINITE.fullmatch(s):
        return float(s)
    return None


def clean_and_encode(raw: RawTable, spec: ColumnSpec) -> tuple[FlowTable, CleanReport]:
    """Drop bad rows, keep the spec's feature columns in order, encode labels.

    A row is dropped as *missing* when a feature cell is empty or not a
    number, or its label is empty; as *nonfinite* when every feature parses
    but one is NaN or +-infinity.
    """
    check_columns(raw.headers, spec)
    col = {h: j for j, h in enumerate(raw.headers)}
    feat_idx = [col[c] for c in spec.feature_columns]
    label_idx = col[spec.label_column]
    report = CleanReport(
        rows_in=len(raw.rows),
        columns_dropped=[h for h in raw.headers if h in set(spec.drop_columns)],
    )
    values = []
    labels = []
    for rec in raw.rows:
        label = _trim(rec[label_idx])
        row = []
        bad = None
        for j in feat_idx:
            v = parse_number(rec[j])
            if v is None:
                bad = "missing"
                break
            if bad is None and not math.isfinite(v):
                bad = "nonfinite"
            row.append(v)
        if bad is None and not label:
            bad = "missing"
        if bad == "missing":
            report.rows_dropped_missing += 1
        elif bad == "nonfinite":
            report.rows_dropped_nonfinite += 1
        else:
            values.append(row)
            labels.append(label)
    report.rows_out = len(values)
    if not values:
        raise IngestError("no rows survive cleaning")
    codec = LabelCodec.fit(labels)
    if codec.n_classes < 2:
        raise IngestError(f"need at least 2 classes, found {list(codec.classes)}")
    table = FlowTable(np.array(values, dtype=np.float64), codec.encode(labels), codec, spec)
    if report.rows_out < report.rows_in:
        log.info(
            "cleaning dropped %d missing and %d non-finite rows of %d",
            report.rows_dropped_missing,
            report.rows_dropped_nonfinite,
            report.rows_in,
        )
    return table, report


def read_flow_table(path, spec: ColumnSpec | None = None, label_column=DEFAULT_LABEL_COLUMN,
                    drop_columns=DEFAULT_DROP_COLUMNS) -> tuple[FlowTable, CleanReport]:
    """load_csv + clean_and_encode, inferring the column spec from the header if needed."""
    raw = load_csv(path)
    if spec is None:
        spec = ColumnSpec.infer(raw.headers, label_column, drop_columns)
    return clean_and_encode(raw, spec)
