"""Seeded Gaussian-blob flow tables for tests and demos."""

from __future__ import annotations

import csv
import io

import numpy as np

from ddos_hybrid.ingest import ColumnSpec, FlowTable, LabelCodec
from ddos_hybrid.rng import Pcg32

# Class 0 is always benign; attacks borrow CIC-DDoS2019 family names.
CLASS_NAMES = (
    "BENIGN", "Syn", "UDP", "DrDoS_DNS", "DrDoS_LDAP", "DrDoS_MSSQL", "DrDoS_NTP",
    "DrDoS_NetBIOS", "DrDoS_SNMP", "DrDoS_SSDP", "DrDoS_UDP", "TFTP", "UDP-lag", "WebDDoS",
)
DEFAULT_SEPARATION = 4.0


def blob_arrays(n: int = 2000, d: int = 20, n_classes: int = 4,
                separation: float = DEFAULT_SEPARATION, seed: int = 7):
    """Return (X, names): row i belongs to class i % C, centre ~ separation * N(0, I)."""
    if n_classes < 2 or n_classes > len(CLASS_NAMES):
        raise ValueError(f"n_classes must be in [2, {len(CLASS_NAMES)}]")
    if n < n_classes or d < 1:
        raise ValueError("need n >= n_classes and d >= 1")
    rng = Pcg32(seed)
    centres = separation * rng.normal(n_classes * d).reshape(n_classes, d)
    cls = np.arange(n) % n_classes
    X = centres[cls] + rng.normal(n * d).reshape(n, d)
    return X, [CLASS_NAMES[c] for c in cls]


def feature_names(d: int) -> list[str]:
    return [f"f{j}" for j in range(d)]


def blob_table(n=2000, d=20, n_classes=4, separation=DEFAULT_SEPARATION, seed=7) -> FlowTable:
    """The same rows synth_csv writes, as an in-memory FlowTable."""
    X, names = blob_arrays(n, d, n_classes, separation, seed)
    # round-trip through the CSV text form so in-memory and on-disk data agree
    X = np.array([[float(repr(v)) for v in row] for row in X.tolist()])
    codec = LabelCodec.fit(names)
    return FlowTable(X, codec.encode(names), codec, ColumnSpec(tuple(feature_names(d)), "Label", ()))


def synth_csv_text(n=2000, d=20, n_classes=4, separation=DEFAULT_SEPARATION, seed=7) -> str:
    X, names = blob_arrays(n, d, n_classes, separation, seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(feature_names(d) + ["Label"])
    for row, name in zip(X.tolist(), names):
        w.writerow([repr(v) for v in row] + [name])
    return buf.getvalue()
