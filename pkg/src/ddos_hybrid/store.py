"""Single-file, bit-exact model container ("DDHM").

Layout (all integers little-endian)::

    0   4   magic  b"DDHM"
    4   4   u32    format version
    8   4   u32    metadata length M
    12  8   u64    payload length P
    20  M          metadata, UTF-8 JSON (sorted keys, compact separators)
    20+M P         payload: IEEE-754 binary64 LE arrays, in directory order
    ..  4   u32    CRC-32 (zlib polynomial) of every preceding byte

The metadata's ``sections`` list is the directory: name, offset and length
in bytes relative to the payload start, and array shape. Integer arrays
(tree structure, counts) are stored as binary64, exact below 2**53.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ddos_hybrid.extractor import ConvExtractor
from ddos_hybrid.forest import ForestConfig, ForestModel
from ddos_hybrid.hybrid import (
    ExtractorConfig,
    HybridConfig,
    HybridModel,
    MetaLearner,
    StackConfig,
)
from ddos_hybrid.ingest import ColumnSpec, LabelCodec
from ddos_hybrid.mlp import LayerParams, MlpConfig, MlpModel, TrainLog
from ddos_hybrid.preprocess import Standardizer

MAGIC = b"DDHM"
FORMAT_VERSION = 1
SUPPORTED_VERSIONS = (1,)
_HEADER = struct.Struct("<4sIIQ")


class ModelFormatError(ValueError):
    """Base class for unreadable model containers."""


class BadMagicError(ModelFormatError):
    pass


class UnsupportedVersionError(ModelFormatError):
    pass


class ChecksumError(ModelFormatError):
    pass


class TruncatedError(ModelFormatError):
    pass


class _Writer:
    def __init__(self):
        self.sections = []
        self.chunks = []
        self.offset = 0

    def add(self, name, array):
        a = np.ascontiguousarray(array, dtype="<f8")
        raw = a.tobytes()
        self.sections.append({"name": name, "offset": self.offset, "length": len(raw),
                              "shape": list(a.shape)})
        self.chunks.append(raw)
        self.offset += len(raw)


class _Reader:
    def __init__(self, sections, payload):
        self.payload = payload
        self.index = {s["name"]: s for s in sections}

    def get(self, name, dtype=np.float64):
        s = self.index[name]
        a = np.frombuffer(self.payload, dtype="<f8", count=s["length"] // 8, offset=s["offset"])
        a = a.reshape(s["shape"]).astype(np.float64)
        return a.astype(dtype) if dtype is not np.float64 else a


# -- per-type encoders -------------------------------------------------------

def _put_standardizer(w, meta, s: Standardizer, p="standardizer"):
    w.add(f"{p}.means", s.means)
    w.add(f"{p}.stds", s.stds)
    meta[p] = {"fitted_on": s.fitted_on}


def _get_standardizer(r, meta, p="standardizer"):
    return Standardizer(r.get(f"{p}.means"), r.get(f"{p}.stds"), meta[p]["fitted_on"])


def _put_extractor(w, meta, e: ConvExtractor, p="extractor"):
    w.add(f"{p}.weights", e.weights)
    w.add(f"{p}.biases", e.biases)
    meta[p] = {"init_seed": e.init_seed}


def _get_extractor(r, meta, p="extractor"):
    return ConvExtractor(r.get(f"{p}.weights"), r.get(f"{p}.biases"), meta[p]["init_seed"])


_FOREST_INT = ("feature", "left", "right", "value", "depth", "roots")


def _put_forest(w, meta, f: ForestModel, p="forest"):
    for name in _FOREST_INT:
        w.add(f"{p}.{name}", getattr(f, name))
    w.add(f"{p}.threshold", f.threshold)
    w.add(f"{p}.counts", f.counts)
    meta[p] = {"n_classes": f.n_classes, "n_features": f.n_features, "config": asdict(f.config)}


def _get_forest(r, meta, p="forest"):
    m = meta[p]
    arrays = {name: r.get(f"{p}.{name}", np.intp) for name in _FOREST_INT}
    return ForestModel(threshold=r.get(f"{p}.threshold"), counts=r.get(f"{p}.counts", np.int64),
                       n_classes=m["n_classes"], n_features=m["n_features"],
                       config=ForestConfig(**m["config"]), **arrays)


def _put_mlp(w, meta, m: MlpModel, p="mlp"):
    for i, layer in enumerate(m.layers):
        w.add(f"{p}.layer{i}.weights", layer.weights)
        w.add(f"{p}.layer{i}.biases", layer.biases)
    w.add(f"{p}.log.loss", np.array(m.train_log.loss, dtype=np.float64))
    w.add(f"{p}.log.accuracy", np.array(m.train_log.accuracy, dtype=np.float64))
    meta[p] = {"input_dim": m.input_dim, "n_classes": m.n_classes,
               "activations": [l.activation for l in m.layers]}


def _get_mlp(r, meta, p="mlp"):
    m = meta[p]
    layers = tuple(
        LayerParams(r.get(f"{p}.layer{i}.weights"), r.get(f"{p}.layer{i}.biases"), act)
        for i, act in enumerate(m["activations"])
    )
    tlog = TrainLog(r.get(f"{p}.log.loss").tolist(), r.get(f"{p}.log.accuracy").tolist())
    return MlpModel(layers, m["input_dim"], m["n_classes"], tlog)


def _put_meta(w, meta, ml: MetaLearner, p="meta"):
    w.add(f"{p}.weights", ml.weights)
    w.add(f"{p}.biases", ml.biases)
    meta[p] = {"n_classes": ml.n_classes}


def _get_meta(r, meta, p="meta"):
    return MetaLearner(r.get(f"{p}.weights"), r.get(f"{p}.biases"))


def _hybrid_config(d) -> HybridConfig:
    mlp = dict(d["mlp"])
    mlp["hidden"] = tuple(mlp["hidden"])
    return HybridConfig(ExtractorConfig(**d["extractor"]), ForestConfig(**d["forest"]),
                        MlpConfig(**mlp), StackConfig(**d["stack"]))


def _put_hybrid(w, meta, h: HybridModel):
    _put_standardizer(w, meta, h.standardizer)
    _put_extractor(w, meta, h.extractor)
    _put_forest(w, meta, h.forest)
    _put_mlp(w, meta, h.mlp)
    _put_meta(w, meta, h.meta)
    meta["classes"] = list(h.codec.classes)
    meta["column_spec"] = {
        "feature_columns": list(h.column_spec.feature_columns),
        "label_column": h.column_spec.label_column,
        "drop_columns": list(h.column_spec.drop_columns),
    }
    meta["config"] = asdict(h.config)
    meta["meta_blocks"] = ["rf", "mlp"] + (["passthrough"] if h.config.stack.passthrough else [])


def _get_hybrid(r, meta):
    cs = meta["column_spec"]
    return HybridModel(
        _get_standardizer(r, meta), _get_extractor(r, meta), _get_forest(r, meta),
        _get_mlp(r, meta), _get_meta(r, meta), LabelCodec(tuple(meta["classes"])),
        ColumnSpec(tuple(cs["feature_columns"]), cs["label_column"], tuple(cs["drop_columns"])),
        _hybrid_config(meta["config"]), meta["version"],
    )


_CODECS = {
    HybridModel: ("hybrid", _put_hybrid),
    ForestModel: ("forest", _put_forest),
    MlpModel: ("mlp", _put_mlp),
    ConvExtractor: ("extractor", _put_extractor),
    Standardizer: ("standardizer", _put_standardizer),
    MetaLearner: ("meta", _put_meta),
}
_DECODERS = {
    "hybrid": _get_hybrid,
    "forest": _get_forest,
    "mlp": _get_mlp,
    "extractor": _get_extractor,
    "standardizer": _get_standardizer,
    "meta": _get_meta,
}


# -- container ---------------------------------------------------------------

def dumps(model) -> bytes:
    try:
        kind, put = _CODECS[type(model)]
    except KeyError:
        raise TypeError(f"cannot serialize {type(model).__name__}") from None
    w = _Writer()
    meta = {"kind": kind, "version": FORMAT_VERSION}
    put(w, meta, model)
    meta["sections"] = w.sections
    meta_raw = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(w.chunks)
    body = _HEADER.pack(MAGIC, FORMAT_VERSION, len(meta_raw), len(payload)) + meta_raw + payload
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def loads(data: bytes):
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError("not a DDHM model file (bad magic)")
    if len(data) < _HEADER.size + 4:
        raise TruncatedError("file shorter than the fixed header")
    _, version, meta_len, payload_len = _HEADER.unpack_from(data)
    if version not in SUPPORTED_VERSIONS:
        raise UnsupportedVersionError(f"unsupported model format version {version}")
    expected = _HEADER.size + meta_len + payload_len + 4
    if len(data) < expected:
        raise TruncatedError(f"file has {len(data)} bytes, header declares {expected}")
    if len(data) > expected:
        raise ModelFormatError(f"{len(data) - expected} unexpected trailing bytes")
    (crc,) = struct.unpack_from("<I", data, expected - 4)
    if zlib.crc32(data[:expected - 4]) & 0xFFFFFFFF != crc:
        raise ChecksumError("CRC-32 mismatch; file is corrupted")
    meta_start = _HEADER.size
    try:
        meta = json.loads(data[meta_start:meta_start + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"unreadable metadata: {e}") from None
    payload = data[meta_start + meta_len:meta_start + meta_len + payload_len]
    _check_directory(meta.get("sections", []), payload_len)
    decoder = _DECODERS.get(meta.get("kind"))
    if decoder is None:
        raise ModelFormatError(f"unknown model kind {meta.get('kind')!r}")
    meta["version"] = version
    return decoder(_Reader(meta["sections"], payload), meta)


def _check_directory(sections, payload_len):
    spans = []
    for s in sections:
        off, length = s["offset"], s["length"]
        if off < 0 or length < 0 or off + length > payload_len:
            raise TruncatedError(f"section {s['name']} runs past the payload")
        if length % 8 or int(np.prod(s["shape"], dtype=np.int64)) * 8 != length:
            raise ModelFormatError(f"section {s['name']} length does not match its shape")
        spans.append((off, off + length))
    spans.sort()
    for (a0, a1), (b0, _) in zip(spans, spans[1:]):
        if b0 < a1:
            raise ModelFormatError("overlapping sections in directory")


def atomic_write_bytes(path, data: bytes) -> int:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return len(data)


def save(model, path) -> int:
    return atomic_write_bytes(path, dumps(model))


def load(path):
    return loads(Path(path).read_bytes())
