"""Flat ``key = value`` run configuration with typed, documented defaults."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

from ddos_hybrid.extractor import DEFAULT_FILTERS, DEFAULT_KERNEL_SIZE
from ddos_hybrid.forest import ForestConfig
from ddos_hybrid.gatekeeper import ALLOW, BLOCK, GatePolicy
from ddos_hybrid.hybrid import ExtractorConfig, HybridConfig, StackConfig
from ddos_hybrid.ingest import DEFAULT_DROP_COLUMNS, DEFAULT_LABEL_COLUMN, ColumnSpec
from ddos_hybrid.mlp import MlpConfig

POLICY_ACTION_PREFIX = "policy.action."


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _opt_int(s: str) -> int | None:
    v = s.strip().lower()
    return None if v in ("none", "auto", "") else int(v)


def _str_list(s: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in s.split(",") if p.strip())


def _int_list(s: str) -> tuple[int, ...]:
    return tuple(int(p) for p in _str_list(s))


def _choice(*options: str) -> Callable[[str], str]:
    def parse(s: str) -> str:
        v = s.strip()
        if v not in options:
            raise ConfigError(f"expected one of {options}, got {s!r}")
        return v
    return parse


def _fmt(v: Any) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    return str(v)


_F, _M, _S = ForestConfig(), MlpConfig(), StackConfig()

# key -> (parser, default)
SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "data.label_column": (str.strip, DEFAULT_LABEL_COLUMN),
    "data.feature_columns": (_str_list, ()),  # empty: every non-dropped, non-label column
    "data.drop_columns": (_str_list, DEFAULT_DROP_COLUMNS),
    "split.ratio": (float, 0.8),
    "split.seed": (int, 42),
    "split.stratified": (_bool, False),
    "extractor.filters": (int, DEFAULT_FILTERS),
    "extractor.kernel_size": (int, DEFAULT_KERNEL_SIZE),
    "extractor.seed": (int, 42),
    "forest.tree_count": (int, _F.tree_count),
    "forest.max_depth": (_opt_int, _F.max_depth),
    "forest.min_samples_split": (int, _F.min_samples_split),
    "forest.features_per_split": (_opt_int, _F.features_per_split),
    "forest.bootstrap": (_bool, _F.bootstrap),
    "forest.seed": (int, _F.seed),
    "mlp.hidden": (_int_list, _M.hidden),
    "mlp.learning_rate": (float, _M.learning_rate),
    "mlp.epochs": (int, _M.epochs),
    "mlp.batch_size": (int, _M.batch_size),
    "mlp.seed": (int, _M.seed),
    "mlp.shuffle": (_bool, _M.shuffle),
    "stack.folds": (int, _S.folds),
    "stack.seed": (int, _S.seed),
    "stack.learning_rate": (float, _S.learning_rate),
    "stack.epochs": (int, _S.epochs),
    "stack.passthrough": (_bool, _S.passthrough),
    "cv.folds": (int, 5),
    "cv.seed": (int, 42),
    "cv.stratified": (_bool, True),
    "policy.benign_label": (str.strip, "BENIGN"),
    "policy.default_action": (_choice(ALLOW, BLOCK), BLOCK),
    "policy.failure_mode": (_choice("fail-open", "fail-closed"), "fail-open"),
    "policy.confidence_floor": (float, 0.0),
    "serve.transport": (_choice("stdio", "tcp"), "stdio"),
    "serve.host": (str.strip, "127.0.0.1"),
    "serve.port": (int, 9999),
    "serve.workers": (int, 1),
    "synth.n": (int, 2000),
    "synth.d": (int, 20),
    "synth.classes": (int, 4),
    "synth.separation": (float, 4.0),
    "synth.seed": (int, 7),
}


@dataclass
class RunConfig:
    values: dict[str, Any] = field(default_factory=lambda: {k: d for k, (_, d) in SCHEMA.items()})
    policy_actions: dict[str, str] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def set(self, key: str, raw: str) -> None:
        key = key.strip()
        if key.startswith(POLICY_ACTION_PREFIX):
            label = key[len(POLICY_ACTION_PREFIX):]
            if not label:
                raise ConfigError("policy.action.<label> needs a label")
            self.policy_actions[label] = _choice(ALLOW, BLOCK)(raw)
            return
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        parser, _ = SCHEMA[key]
        try:
            self.values[key] = parser(raw)
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(f"bad value for {key}: {raw!r} ({e})") from None

    def dump(self) -> str:
        lines = [f"{k} = {_fmt(v)}" for k, v in sorted(self.values.items())]
        lines += [f"{POLICY_ACTION_PREFIX}{k} = {v}" for k, v in sorted(self.policy_actions.items())]
        return "\n".join(lines) + "\n"

    def hybrid_config(self) -> HybridConfig:
        v = self.values
        try:
            return HybridConfig(
                ExtractorConfig(v["extractor.filters"], v["extractor.kernel_size"], v["extractor.seed"]),
                ForestConfig(v["forest.tree_count"], v["forest.max_depth"], v["forest.min_samples_split"],
                             v["forest.features_per_split"], v["forest.bootstrap"], v["forest.seed"]),
                MlpConfig(v["mlp.hidden"], v["mlp.learning_rate"], v["mlp.epochs"],
                          v["mlp.batch_size"], v["mlp.seed"], v["mlp.shuffle"]),
                StackConfig(v["stack.folds"], v["stack.seed"], v["stack.learning_rate"],
                            v["stack.epochs"], v["stack.passthrough"]),
            )
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def column_spec(self, headers) -> ColumnSpec:
        label = self.values["data.label_column"]
        drop = self.values["data.drop_columns"]
        features = self.values["data.feature_columns"]
        if features:
            return ColumnSpec(features, label, tuple(d for d in drop if d not in features))
        return ColumnSpec.infer(headers, label, drop)

    def policy(self, classes) -> GatePolicy:
        v = self.values
        kw = dict(default_action=v["policy.default_action"], failure_mode=v["policy.failure_mode"],
                  confidence_floor=v["policy.confidence_floor"], benign_label=v["policy.benign_label"])
        if self.policy_actions:
            return GatePolicy(self.policy_actions, **kw)
        return GatePolicy.default_for(classes, **kw)


def parse_lines(lines: Iterable[str], cfg: RunConfig | None = None) -> RunConfig:
    cfg = cfg or RunConfig()
    for n, line in enumerate(lines, 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise ConfigError(f"line {n}: expected 'key = value', got {line!r}")
        key, raw = s.split("=", 1)
        cfg.set(key, raw.strip())
    return cfg


def load_config(path=None, overrides: Iterable[str] = ()) -> RunConfig:
    """Defaults, then the file (if any), then ``key=value`` overrides; later wins."""
    cfg = RunConfig()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        parse_lines(p.read_text(encoding="utf-8").splitlines(), cfg)
    parse_lines(overrides, cfg)
    return cfg
