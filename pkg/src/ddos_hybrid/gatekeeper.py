"""Streaming detect-and-mitigate loop: flow record in, allow/block verdict out.

Line protocol (NDJSON both ways)::

    in : {"id": "<string>", "features": {"<column>": <number>, ...}}
    out: {"id", "class", "confidence", "action", "reason", "us", "model_version"}

Every input line produces exactly one output line, in input order. A line
that cannot be turned into a feature vector gets the policy's failure-mode
action with reason "malformed"; the loop never stops on bad input.
"""

from __future__ import annotations

import json
import logging
import math
import socketserver
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import islice
from typing import Iterable, Mapping

import numpy as np

from ddos_hybrid.hybrid import HybridModel
from ddos_hybrid.ingest import parse_number

log = logging.getLogger(__name__)

ALLOW, BLOCK, ERROR = "allow", "block", "error"
FAIL_OPEN, FAIL_CLOSED = "fail-open", "fail-closed"
VERDICT_KEYS = ("id", "class", "confidence", "action", "reason", "us", "model_version")


class PolicyError(ValueError):
    """Policy and model disagree; the gatekeeper refuses to start."""


class MalformedRecord(ValueError):
    pass


@dataclass(frozen=True)
class GatePolicy:
    actions: Mapping[str, str]
    default_action: str = BLOCK
    failure_mode: str = FAIL_OPEN
    confidence_floor: float = 0.0
    benign_label: str = "BENIGN"

    def __post_init__(self):
        object.__setattr__(self, "actions", dict(self.actions))
        for label, action in self.actions.items():
            if action not in (ALLOW, BLOCK):
                raise PolicyError(f"action for {label!r} must be allow or block, got {action!r}")
        if self.default_action not in (ALLOW, BLOCK):
            raise PolicyError(f"default action must be allow or block, got {self.default_action!r}")
        if self.failure_mode not in (FAIL_OPEN, FAIL_CLOSED):
            raise PolicyError(f"failure mode must be fail-open or fail-closed, got {self.failure_mode!r}")
        if not 0.0 <= self.confidence_floor <= 1.0:
            raise PolicyError("confidence floor must lie in [0, 1]")

    @classmethod
    def default_for(cls, classes: Iterable[str], benign_label: str = "BENIGN", **kw) -> "GatePolicy":
        """Benign traffic passes, every attack class is blocked."""
        return cls({c: ALLOW if c == benign_label else BLOCK for c in classes},
                   benign_label=benign_label, **kw)

    @property
    def failure_action(self) -> str:
        return ALLOW if self.failure_mode == FAIL_OPEN else BLOCK

    def validate(self, classes: Iterable[str]) -> None:
        classes = list(classes)
        missing = [c for c in classes if c not in self.actions]
        if missing:
            raise PolicyError(f"policy has no action for model classes {missing}")
        if self.benign_label in classes and self.actions[self.benign_label] != ALLOW:
            raise PolicyError(f"benign label {self.benign_label!r} must map to allow")


@dataclass
class VerdictRecord:
    id: str
    label: str | None
    confidence: float | None
    action: str
    reason: str
    us: int = 0
    model_version: int = 0

    def to_dict(self) -> dict:
        return {"id": self.id, "class": self.label, "confidence": self.confidence,
                "action": self.action, "reason": self.reason, "us": self.us,
                "model_version": self.model_version}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class RunSummary:
    records: int = 0
    allows: int = 0
    blocks: int = 0
    errors: int = 0
    malformed: int = 0
    seconds: float = 0.0

    @property
    def throughput(self) -> float:
        return self.records / self.seconds if self.seconds > 0 else 0.0

    def to_dict(self) -> dict:
        return {"records": self.records, "allows": self.allows, "blocks": self.blocks,
                "errors": self.errors, "malformed": self.malformed,
                "throughput": round(self.throughput, 1)}


def _number(value) -> float:
    if type(value) is float:
        if math.isfinite(value):
            return value
        raise MalformedRecord("non-finite value")
    if isinstance(value, bool):
        raise MalformedRecord("boolean where a number was expected")
    if isinstance(value, (int, float)):
        v = float(value)
    elif isinstance(value, str):
        v = parse_number(value)
        if v is None:
            raise MalformedRecord(f"non-numeric value {value!r}")
    else:
        raise MalformedRecord(f"unsupported value type {type(value).__name__}")
    if not math.isfinite(v):
        raise MalformedRecord("non-finite value")
    return v


def preprocess_live(fields: Mapping, model: HybridModel) -> np.ndarray:
    """Record's feature mapping -> standardized 1 x d row (same transform as offline)."""
    if not isinstance(fields, Mapping):
        raise MalformedRecord("features must be an object")
    cols = model.column_spec.feature_columns
    try:
        raw = [_number(fields[c]) for c in cols]
    except KeyError as e:
        raise MalformedRecord(f"missing feature column {e.args[0]!r}") from None
    return model.standardize(np.array([raw]))


def classify_flow(model: HybridModel, standardized) -> tuple[str, float]:
    """Predicted label and its meta-learner probability for one standardized row."""
    ids, probs = model.predict_standardized(np.atleast_2d(standardized))
    i = int(ids[0])
    return model.codec.classes[i], float(probs[0, i])


def decide(policy: GatePolicy, label: str | None, confidence: float | None,
           malformed: bool = False, record_id: str = "") -> VerdictRecord:
    if malformed:
        return VerdictRecord(record_id, None, None, policy.failure_action, "malformed")
    if confidence < policy.confidence_floor:
        return VerdictRecord(record_id, label, confidence, policy.default_action, "low-confidence")
    action = policy.actions.get(label, policy.default_action)
    return VerdictRecord(record_id, label, confidence, action, label)


def _decode(line) -> str:
    if isinstance(line, bytes):
        return line.decode("utf-8", errors="replace")
    return line


@dataclass
class Gatekeeper:
    """Model + policy, validated at construction and immutable afterwards."""

    model: HybridModel
    policy: GatePolicy
    model_version: int = field(init=False)

    def __post_init__(self):
        self.policy.validate(self.model.codec.classes)
        self.model_version = self.model.format_version

    def handle_line(self, line, seq: int = 0) -> VerdictRecord:
        t0 = time.perf_counter()
        record_id = f"line-{seq}"
        try:
            rec = json.loads(_decode(line))
            if not isinstance(rec, dict):
                raise MalformedRecord("record must be a JSON object")
            if isinstance(rec.get("id"), str):
                record_id = rec["id"]
            z = preprocess_live(rec.get("features"), self.model)
        except (ValueError, TypeError, RecursionError) as e:
            log.debug("record %s malformed: %s", record_id, e)
            v = decide(self.policy, None, None, malformed=True, record_id=record_id)
        else:
            try:
                label, conf = classify_flow(self.model, z)
                v = decide(self.policy, label, conf, record_id=record_id)
            except Exception as e:  # keep serving; surface the fault in the verdict
                log.exception("classification failed for %s", record_id)
                v = VerdictRecord(record_id, None, None, ERROR, f"classification failed: {e}")
        v.model_version = self.model_version
        v.us = int((time.perf_counter() - t0) * 1e6)
        return v


def serve_stream(lines: Iterable, out, model: HybridModel, policy: GatePolicy,
                 workers: int = 1, chunk: int = 256) -> RunSummary:
    """Read records until EOF, write one verdict line per record, in order.

    With ``workers > 1`` records are classified on a thread pool in chunks
    and re-sequenced before writing, so output equals the serial run.
    """
    gate = Gatekeeper(model, policy)
    summary = RunSummary()
    t0 = time.perf_counter()
    it = iter(lines)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    seq = 0
    try:
        while True:
            batch = list(islice(it, chunk if pool else 1))
            if not batch:
                break
            seqs = range(seq, seq + len(batch))
            seq += len(batch)
            if pool:
                verdicts = list(pool.map(gate.handle_line, batch, seqs))
            else:
                verdicts = [gate.handle_line(batch[0], seqs[0])]
            for v in verdicts:
                out.write(v.to_json() + "\n")
                summary.records += 1
                if v.reason == "malformed":
                    summary.malformed += 1
                if v.action == ALLOW:
                    summary.allows += 1
                elif v.action == BLOCK:
                    summary.blocks += 1
                else:
                    summary.errors += 1
            out.flush()
    finally:
        if pool:
            pool.shutdown()
    summary.seconds = time.perf_counter() - t0
    return summary


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        srv = self.server
        out = _TextOut(self.wfile)
        summary = serve_stream(self.rfile, out, srv.model, srv.policy, srv.workers)
        log.info("connection %s closed: %s", self.client_address, summary.to_dict())


class _TextOut:
    def __init__(self, wfile):
        self.wfile = wfile

    def write(self, s: str):
        self.wfile.write(s.encode("utf-8"))

    def flush(self):
        self.wfile.flush()


class GateServer(socketserver.ThreadingTCPServer):
    """TCP transport: each connection is an independent NDJSON stream."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, model: HybridModel, policy: GatePolicy, workers: int = 1):
        policy.validate(model.codec.classes)
        self.model = model
        self.policy = policy
        self.workers = workers
        super().__init__(address, _Handler)
