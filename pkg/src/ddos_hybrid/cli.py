"""ddos-hybrid: train, evaluate, cross-validate, predict, serve, synth."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time

import numpy as np

from ddos_hybrid import __version__, _kernels, store
from ddos_hybrid.config import ConfigError, RunConfig, load_config
from ddos_hybrid.gatekeeper import GateServer, PolicyError, serve_stream
from ddos_hybrid.hybrid import HybridModel, fit_hybrid, pipeline_trainer
from ddos_hybrid.ingest import (
    ColumnSpec,
    FlowTable,
    IngestError,
    check_columns,
    clean_and_encode,
    load_csv,
    parse_number,
)
from ddos_hybrid.metrics import (
    MODEL_ROWS,
    format_cv,
    format_per_class,
    format_table,
    kfold_cross_validate,
    ndjson_record,
    report_for,
)
from ddos_hybrid.mlp import MlpDivergedError
from ddos_hybrid.preprocess import stratified_split, train_test_split
from ddos_hybrid.synth import synth_csv_text

log = logging.getLogger("ddos_hybrid")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    """Bad input or configuration: exit code 2."""


def _read_table(cfg: RunConfig, path, spec: ColumnSpec | None = None) -> FlowTable:
    raw = load_csv(path)
    spec = spec or cfg.column_spec(raw.headers)
    table, report = clean_and_encode(raw, spec)
    log.info("%s: %d rows in, %d kept (%d missing, %d non-finite dropped)", path,
             report.rows_in, report.rows_out, report.rows_dropped_missing, report.rows_dropped_nonfinite)
    return table


def _split(cfg: RunConfig, table: FlowTable):
    if cfg["split.stratified"]:
        sp = stratified_split(table.labels, cfg["split.ratio"], cfg["split.seed"])
    else:
        sp = train_test_split(table.n_rows, cfg["split.ratio"], cfg["split.seed"])
    return table.subset(sp.train_idx), table.subset(sp.test_idx)


def _evaluate_model(model: HybridModel, table: FlowTable):
    preds = model.component_predictions(table.features)
    return {name: report_for(table.labels, preds[name], table.n_classes) for name in MODEL_ROWS}


def _emit(text: str, dest: str | None):
    if dest and dest != "-":
        store.atomic_write_bytes(dest, text.encode("utf-8"))
    else:
        sys.stdout.write(text)


def _table_for_model(model: HybridModel, cfg: RunConfig, path) -> FlowTable:
    """Clean ``path`` with the model's own column spec and label codec."""
    raw = load_csv(path)
    check_columns(raw.headers, model.column_spec)
    table, _ = clean_and_encode(raw, model.column_spec)
    unknown = set(table.codec.classes) - set(model.codec.classes)
    if unknown:
        raise UsageError(f"data has labels the model never saw: {sorted(unknown)}")
    labels = model.codec.encode(table.codec.decode(table.labels))
    return FlowTable(table.features, labels, model.codec, model.column_spec)


def cmd_train(args, cfg: RunConfig) -> int:
    table = _read_table(cfg, args.data)
    train, test = _split(cfg, table)
    t0 = time.perf_counter()
    model = fit_hybrid(train, cfg.hybrid_config())
    log.info("trained in %.1fs", time.perf_counter() - t0)
    n = store.save(model, args.model)
    reports = _evaluate_model(model, test)
    print(f"model written to {args.model} ({n} bytes); held-out rows: {test.n_rows}")
    print(format_table(reports))
    print()
    print(format_per_class(reports["hybrid"], model.codec.classes))
    return EXIT_OK


def cmd_evaluate(args, cfg: RunConfig) -> int:
    if args.model:
        model = store.load(args.model)
        test = _table_for_model(model, cfg, args.data)
    else:
        train, test = _split(cfg, _read_table(cfg, args.data))
        model = fit_hybrid(train, cfg.hybrid_config())
    reports = _evaluate_model(model, test)
    text = format_table(reports) + "\n"
    records = "".join(ndjson_record(name, reports[name]) + "\n" for name in MODEL_ROWS)
    print(text, end="")
    _emit(records, args.ndjson)
    return EXIT_OK


def cmd_crossval(args, cfg: RunConfig) -> int:
    table = _read_table(cfg, args.data)
    hc = cfg.hybrid_config()
    k, seed, strat = cfg["cv.folds"], cfg["cv.seed"], cfg["cv.stratified"]
    names = [m.strip() for m in args.models.split(",") if m.strip()]
    bad = [m for m in names if m not in MODEL_ROWS]
    if bad:
        raise UsageError(f"unknown models {bad}; choose from {list(MODEL_ROWS)}")
    reports, cvs = {}, {}
    for name in names:
        cv = kfold_cross_validate(table, pipeline_trainer(name, hc), k, seed, strat)
        cvs[name] = cv
        reports[name] = report_for(table.labels, cv.predictions, table.n_classes)
        print(format_cv(name, cv))
    print(format_table(reports, cvs))
    _emit("".join(ndjson_record(n, reports[n], cvs[n]) + "\n" for n in names), args.ndjson)
    return EXIT_OK


def cmd_predict(args, cfg: RunConfig) -> int:
    model = store.load(args.model)
    raw = load_csv(args.input)
    cols = model.column_spec.feature_columns
    missing = [c for c in cols if c not in raw.headers]
    if missing:
        raise UsageError(f"input lacks feature columns {missing}")
    idx = [raw.headers.index(c) for c in cols]
    label_col = model.column_spec.label_column
    li = raw.headers.index(label_col) if label_col in raw.headers else None
    rows, ok = [], []
    for i, rec in enumerate(raw.rows):
        vals = [parse_number(rec[j]) for j in idx]
        if all(v is not None and math.isfinite(v) for v in vals):
            rows.append(vals)
            ok.append(i)
    out = []
    ids, probs = (model.predict_standardized(model.standardize(np.array(rows)))
                  if rows else (np.empty(0, int), np.empty((0, model.n_classes))))
    pos = {i: k for k, i in enumerate(ok)}
    for i, rec in enumerate(raw.rows):
        line = {"row": i}
        if i in pos:
            k = pos[i]
            line["class"] = model.codec.classes[int(ids[k])]
            line["confidence"] = float(probs[k, ids[k]])
        else:
            line["class"] = None
            line["error"] = "malformed"
        if li is not None:
            line["label"] = rec[li].strip()
        out.append(json.dumps(line) + "\n")
    _emit("".join(out), args.out)
    return EXIT_OK


def cmd_serve(args, cfg: RunConfig) -> int:
    try:
        model = store.load(args.model)
        policy = cfg.policy(model.codec.classes)
        policy.validate(model.codec.classes)
    except (OSError, store.ModelFormatError, PolicyError, ConfigError) as e:
        log.error("refusing to start: %s", e)
        return EXIT_USAGE
    workers = cfg["serve.workers"]
    try:
        if cfg["serve.transport"] == "tcp":
            with GateServer((cfg["serve.host"], cfg["serve.port"]), model, policy, workers) as srv:
                log.info("listening on %s:%d", *srv.server_address[:2])
                srv.serve_forever()
        else:
            summary = serve_stream(sys.stdin.buffer, sys.stdout, model, policy, workers)
            print(json.dumps(summary.to_dict()), file=sys.stderr)
    except KeyboardInterrupt:
        return EXIT_OK
    except OSError as e:
        log.error("stream transport failed: %s", e)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_synth(args, cfg: RunConfig) -> int:
    text = synth_csv_text(cfg["synth.n"], cfg["synth.d"], cfg["synth.classes"],
                          cfg["synth.separation"], cfg["synth.seed"])
    store.atomic_write_bytes(args.out, text.encode("utf-8"))
    return EXIT_OK


def cmd_config(args, cfg: RunConfig) -> int:
    sys.stdout.write(cfg.dump())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="flat key = value config file")
    common.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable; wins over the file)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="ddos-hybrid", description=__doc__)
    p.add_argument("--version", action="version",
                   version=f"%(prog)s {__version__} (kernels: {_kernels.BACKEND})")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train", parents=[common], help="fit the hybrid model and save it")
    sp.add_argument("data")
    sp.add_argument("-m", "--model", required=True, help="output model path")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", parents=[common], help="RF / MLP / Hybrid metrics table")
    sp.add_argument("data")
    sp.add_argument("-m", "--model", help="saved model; without it, train on the split first")
    sp.add_argument("--ndjson", help="write NDJSON records here ('-' for stdout, the default)")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("crossval", parents=[common], help="k-fold cross-validation per model")
    sp.add_argument("data")
    sp.add_argument("--models", default=",".join(MODEL_ROWS))
    sp.add_argument("--ndjson")
    sp.set_defaults(func=cmd_crossval)

    sp = sub.add_parser("predict", parents=[common], help="classify CSV rows to NDJSON")
    sp.add_argument("model")
    sp.add_argument("input")
    sp.add_argument("-o", "--out")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("serve", parents=[common], help="run the gatekeeper on stdin/stdout or TCP")
    sp.add_argument("model")
    sp.add_argument("--tcp", action="store_true", help="shorthand for serve.transport=tcp")
    sp.add_argument("--port", type=int, help="shorthand for serve.port")
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("synth", parents=[common], help="write a seeded Gaussian-blob CSV")
    sp.add_argument("out")
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--classes", type=int)
    sp.add_argument("--separation", type=float)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("config", parents=[common], help="print the effective configuration")
    sp.set_defaults(func=cmd_config)
    return p


def _flag_overrides(args) -> list[str]:
    out = []
    for flag, key in (("n", "synth.n"), ("d", "synth.d"), ("classes", "synth.classes"),
                      ("separation", "synth.separation"), ("seed", "synth.seed"), ("port", "serve.port")):
        v = getattr(args, flag, None)
        if v is not None:
            out.append(f"{key}={v}")
    if getattr(args, "tcp", False):
        out.append("serve.transport=tcp")
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, [*args.set, *_flag_overrides(args)])
        return args.func(args, cfg)
    except (UsageError, ConfigError, IngestError, PolicyError, FileNotFoundError,
            store.ModelFormatError) as e:
        log.error("%s", e)
        return EXIT_USAGE
    except (MlpDivergedError, FloatingPointError, OSError) as e:
        log.error("%s", e)
        return EXIT_RUNTIME
    except ValueError as e:
        log.error("%s", e)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
