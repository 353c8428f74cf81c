import io
import json
import socket
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddos_hybrid.gatekeeper import (
    ALLOW,
    BLOCK,
    VERDICT_KEYS,
    GatePolicy,
    Gatekeeper,
    GateServer,
    MalformedRecord,
    PolicyError,
    classify_flow,
    decide,
    preprocess_live,
    serve_stream,
)
from ddos_hybrid.hybrid import predict_hybrid


def record(model, row, rid="r"):
    return json.dumps({"id": rid, "features": dict(zip(model.column_spec.feature_columns, row))})


@pytest.fixture(scope="module")
def policy(small_model):
    return GatePolicy.default_for(small_model.codec.classes)


def test_policy_defaults(small_model, policy):
    assert policy.actions["BENIGN"] == ALLOW
    assert all(policy.actions[c] == BLOCK for c in small_model.codec.classes if c != "BENIGN")
    policy.validate(small_model.codec.classes)


def test_policy_validation(small_model):
    with pytest.raises(PolicyError):
        GatePolicy({"BENIGN": ALLOW}).validate(small_model.codec.classes)
    bad = {c: BLOCK for c in small_model.codec.classes}
    with pytest.raises(PolicyError):
        GatePolicy(bad).validate(small_model.codec.classes)
    with pytest.raises(PolicyError):
        GatePolicy({"A": "drop"})
    with pytest.raises(PolicyError):
        GatePolicy({}, confidence_floor=1.5)


def test_decide_examples(policy):
    assert decide(policy, "BENIGN", 0.9).action == ALLOW
    v = decide(policy, "Syn", 0.95)
    assert (v.action, v.reason) == (BLOCK, "Syn")
    v = decide(policy, None, None, malformed=True)
    assert (v.action, v.reason) == (ALLOW, "malformed")
    closed = GatePolicy(policy.actions, failure_mode="fail-closed")
    assert decide(closed, None, None, malformed=True).action == BLOCK
    floor = GatePolicy(policy.actions, confidence_floor=0.6, default_action=BLOCK)
    v = decide(floor, "BENIGN", 0.5)
    assert (v.action, v.reason) == (BLOCK, "low-confidence")


def test_preprocess_live_matches_offline(small_model, small_table):
    row = small_table.features[3]
    fields = dict(zip(small_model.column_spec.feature_columns, row.tolist()))
    z = preprocess_live(fields, small_model)
    assert z.tobytes() == small_model.standardize(row[None, :]).tobytes()


def test_preprocess_live_malformed(small_model, small_table):
    cols = small_model.column_spec.feature_columns
    fields = dict(zip(cols, small_table.features[0].tolist()))
    missing = dict(fields)
    del missing[cols[0]]
    with pytest.raises(MalformedRecord):
        preprocess_live(missing, small_model)
    for bad in ("Infinity", "abc", None, True, [1]):
        with pytest.raises(MalformedRecord):
            preprocess_live({**fields, cols[1]: bad}, small_model)
    # numeric strings are accepted
    z = preprocess_live({**fields, cols[1]: repr(fields[cols[1]])}, small_model)
    assert z.shape == (1, len(cols))


def test_classify_flow(small_model, small_table):
    z = small_model.standardize(small_table.features[:1])
    a, b = classify_flow(small_model, z), classify_flow(small_model, z)
    assert a == b
    assert 1 / small_model.n_classes <= a[1] <= 1.0


def test_serve_three_records(small_model, small_table, policy):
    lines = [record(small_model, small_table.features[i].tolist(), f"id{i}") for i in range(3)]
    out = io.StringIO()
    summary = serve_stream(lines, out, small_model, policy)
    verdicts = [json.loads(l) for l in out.getvalue().splitlines()]
    assert [v["id"] for v in verdicts] == ["id0", "id1", "id2"]
    assert all(tuple(v) == VERDICT_KEYS for v in verdicts)
    assert summary.records == 3 and summary.allows + summary.blocks == 3
    assert all(v["us"] >= 0 and v["model_version"] == 1 for v in verdicts)


def test_serve_empty(small_model, policy):
    out = io.StringIO()
    s = serve_stream([], out, small_model, policy)
    assert (s.records, s.allows, s.blocks, s.errors) == (0, 0, 0, 0)
    assert out.getvalue() == ""


def test_startup_validation(small_model):
    with pytest.raises(PolicyError):
        serve_stream([], io.StringIO(), small_model, GatePolicy({"BENIGN": ALLOW}))


def test_workers_match_serial(small_model, small_table, policy, rng):
    lines = [record(small_model, (small_table.features[i % 300] + rng.normal(size=8)).tolist(), str(i))
             for i in range(700)]
    lines[5] = "junk"
    a, b = io.StringIO(), io.StringIO()
    serve_stream(lines, a, small_model, policy, workers=1)
    serve_stream(lines, b, small_model, policy, workers=4, chunk=64)

    def strip(text):
        return [{k: v for k, v in json.loads(l).items() if k != "us"} for l in text.splitlines()]
    assert strip(a.getvalue()) == strip(b.getvalue())


def test_online_offline_equivalence(small_model, small_table, policy):
    X = small_table.features
    lines = [record(small_model, X[i].tolist(), str(i)) for i in range(len(X))]
    out = io.StringIO()
    serve_stream(lines, out, small_model, policy)
    ids, probs = predict_hybrid(small_model, X)
    for i, line in enumerate(out.getvalue().splitlines()):
        v = json.loads(line)
        label = small_model.codec.classes[ids[i]]
        ref = decide(policy, label, float(probs[i, ids[i]]))
        assert (v["class"], v["confidence"], v["action"]) == (label, ref.confidence, ref.action)


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=200))
def test_any_bytes_one_verdict(small_model, policy, blob):
    gate = Gatekeeper(small_model, policy)
    for line in blob.split(b"\n"):
        v = gate.handle_line(line)
        assert v.action in (ALLOW, BLOCK, "error")


def test_deeply_nested_json(small_model, policy):
    v = Gatekeeper(small_model, policy).handle_line("[" * 100000 + "]" * 100000)
    assert v.reason == "malformed"


def test_tcp_transport(small_model, small_table, policy):
    srv = GateServer(("127.0.0.1", 0), small_model, policy)
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    try:
        payload = "".join(record(small_model, small_table.features[i].tolist(), f"t{i}") + "\n"
                          for i in range(5)) + "garbage\n"
        with socket.create_connection(srv.server_address, timeout=10) as s:
            s.sendall(payload.encode())
            s.shutdown(socket.SHUT_WR)
            data = b""
            while chunk := s.recv(65536):
                data += chunk
        verdicts = [json.loads(l) for l in data.decode().splitlines()]
        assert [v["id"] for v in verdicts] == [f"t{i}" for i in range(5)] + ["line-5"]
        assert verdicts[-1]["reason"] == "malformed"
    finally:
        srv.shutdown()
        srv.server_close()
