"""Experiment spec files (TOML).

A spec has up to seven tables; every key is optional and falls back to the
defaults shown::

    [data]
    source = "synthetic"          # or "csv"
    path = "reference.csv"        # csv only; relative to the spec file
    seed = 0                      # synthetic only
    load_levels = [0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100]
    util_noise_sd = 2.0
    counter_noise = 0.02
    [[data.nodes]]                # synthetic only; omitted -> built-in profiles
    name = "xeon-e5-2650"
    idle_watts = 58.0
    max_watts = 232.0
    curvature = 0.85
    noise_sd = 4.0
    repeats = 40
    [data.columns]                # csv only
    node_type = "node_type"
    load_level = "load_level"
    target = "power"

    [features]
    group = "BPFOnly"             # or "All"
    isolate_idle = true
    [features.groups]
    BPFOnly = ["cpu_util", "cpu_cycles", "cpu_instructions", "cache_misses"]

    [partition]
    num_clients = 3
    test_fraction = 0.2
    [partition.assignment]        # optional node_type -> client index

    [train]
    n_estimators = 100
    learning_rate = 0.01
    max_depth = 6
    reg_lambda = 1.0
    min_split_gain = 0.0
    min_child_weight = 1.0

    [federation]
    num_rounds = 10
    base_score = 0.0
    transport = "in-process"      # or "tcp"
    round_timeout = 120.0
    weighted_aggregate = false

    [experiment]
    seeds = [1, 2, 3]
    baseline = true
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .. import data as D
from ..federation import IN_PROCESS, TCP, FedConfig
from ..gbt import TrainConfig


class SpecError(ValueError):
    """The experiment spec is invalid."""


TRANSPORTS = {"in-process": IN_PROCESS, "in_process": IN_PROCESS, "tcp": TCP}

_SECTIONS = {"data", "features", "partition", "train", "federation", "experiment"}
_NODE_KEYS = {"name", "idle_watts", "max_watts", "curvature", "noise_sd", "repeats",
              "freq_ghz", "ipc", "miss_rate", "mem_gb"}


@dataclass(frozen=True)
class ExperimentSpec:
    generator: D.GeneratorConfig | None = None
    csv_path: Path | None = None
    csv_schema: D.CsvSchema = D.CsvSchema()
    feature_group: str = D.BPF_ONLY
    feature_groups: dict = field(default_factory=lambda: dict(D.DEFAULT_FEATURE_GROUPS))
    isolate_idle: bool = True
    num_clients: int = 3
    test_fraction: float = 0.2
    assignment: dict | None = None
    train: TrainConfig = TrainConfig()
    num_rounds: int = 10
    base_score: float = 0.0
    transport: str = IN_PROCESS
    round_timeout: float = 120.0
    weighted_aggregate: bool = False
    seeds: tuple[int, ...] = (1, 2, 3)
    baseline: bool = True
    source_sha256: str = ""

    def fed_config(self, seed: int) -> FedConfig:
        return FedConfig(self.num_clients, self.num_rounds, replace(self.train, seed=seed),
                         self.base_score, self.transport, round_timeout=self.round_timeout,
                         weighted_aggregate=self.weighted_aggregate)

    def partition_plan(self, seed: int) -> D.PartitionPlan:
        return D.PartitionPlan(self.num_clients, self.test_fraction, seed, self.assignment)

    @property
    def equivalence_mode(self) -> bool:
        """One client for one round: the federated model equals the baseline."""
        return self.num_clients == 1 and self.num_rounds == 1


def _table(doc: dict, key: str) -> dict:
    value = doc.get(key, {})
    if not isinstance(value, dict):
        raise SpecError(f"[{key}] must be a table")
    return value


def _unknown(table: dict, allowed: set, where: str) -> None:
    extra = set(table) - allowed
    if extra:
        raise SpecError(f"unknown keys in [{where}]: {sorted(extra)}")


def generator_from_table(table: dict) -> D.GeneratorConfig:
    nodes_doc = table.get("nodes")
    if nodes_doc is None:
        nodes = D.DEFAULT_NODES
    else:
        nodes = []
        for i, nd in enumerate(nodes_doc):
            _unknown(nd, _NODE_KEYS, f"data.nodes[{i}]")
            try:
                nodes.append(D.NodeProfile(**nd))
            except TypeError as exc:
                raise SpecError(f"data.nodes[{i}]: {exc}") from None
        nodes = tuple(nodes)
    kwargs = {"nodes": nodes}
    for key in ("seed", "util_noise_sd", "counter_noise"):
        if key in table:
            kwargs[key] = table[key]
    if "load_levels" in table:
        kwargs["load_levels"] = tuple(float(x) for x in table["load_levels"])
    cfg = D.GeneratorConfig(**kwargs)
    cfg.validate()
    return cfg


def parse_spec(doc: dict, base_dir: Path = Path("."), source_sha256: str = "") -> ExperimentSpec:
    _unknown(doc, _SECTIONS, "top level")
    data = _table(doc, "data")
    _unknown(data, {"source", "path", "seed", "load_levels", "util_noise_sd", "counter_noise",
                    "nodes", "columns"}, "data")
    kw: dict = {"source_sha256": source_sha256}
    source = data.get("source", "synthetic")
    if source == "synthetic":
        kw["generator"] = generator_from_table(data)
    elif source == "csv":
        if "path" not in data:
            raise SpecError("[data] source = 'csv' needs a path")
        kw["csv_path"] = (base_dir / data["path"]).resolve()
        cols = _table(data, "columns")
        _unknown(cols, {"node_type", "load_level", "target", "features"}, "data.columns")
        kw["csv_schema"] = D.CsvSchema(
            cols.get("node_type", "node_type"), cols.get("load_level", "load_level"),
            cols.get("target", "power"),
            tuple(cols["features"]) if "features" in cols else None)
    else:
        raise SpecError(f"unknown data source {source!r}")

    feats = _table(doc, "features")
    _unknown(feats, {"group", "isolate_idle", "groups"}, "features")
    kw["feature_group"] = feats.get("group", D.BPF_ONLY)
    groups = dict(D.DEFAULT_FEATURE_GROUPS)
    groups.update({k: tuple(v) for k, v in _table(feats, "groups").items()})
    kw["feature_groups"] = groups
    kw["isolate_idle"] = bool(feats.get("isolate_idle", True))

    part = _table(doc, "partition")
    _unknown(part, {"num_clients", "test_fraction", "assignment"}, "partition")
    kw["num_clients"] = int(part.get("num_clients", 3))
    kw["test_fraction"] = float(part.get("test_fraction", 0.2))
    if "assignment" in part:
        kw["assignment"] = {str(k): int(v) for k, v in part["assignment"].items()}

    train = _table(doc, "train")
    _unknown(train, {"n_estimators", "learning_rate", "max_depth", "reg_lambda",
                     "min_split_gain", "min_child_weight"}, "train")
    kw["train"] = TrainConfig(**train)

    fed = _table(doc, "federation")
    _unknown(fed, {"num_rounds", "base_score", "transport", "round_timeout", "weighted_aggregate"},
             "federation")
    kw["num_rounds"] = int(fed.get("num_rounds", 10))
    kw["base_score"] = float(fed.get("base_score", 0.0))
    transport = fed.get("transport", "in-process")
    if transport not in TRANSPORTS:
        raise SpecError(f"unknown transport {transport!r}")
    kw["transport"] = TRANSPORTS[transport]
    kw["round_timeout"] = float(fed.get("round_timeout", 120.0))
    kw["weighted_aggregate"] = bool(fed.get("weighted_aggregate", False))

    exp = _table(doc, "experiment")
    _unknown(exp, {"seeds", "repeat", "baseline"}, "experiment")
    seeds = tuple(int(s) for s in exp.get("seeds", (1, 2, 3)))
    if not seeds or len(set(seeds)) != len(seeds):
        raise SpecError("experiment.seeds must be a non-empty list of distinct integers")
    if "repeat" in exp and int(exp["repeat"]) != len(seeds):
        raise SpecError(f"experiment.repeat = {exp['repeat']} but {len(seeds)} seeds are listed")
    kw["seeds"] = seeds
    kw["baseline"] = bool(exp.get("baseline", True))

    spec = ExperimentSpec(**kw)
    spec.fed_config(seeds[0])  # validates round/client counts
    return spec


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    raw = path.read_bytes()
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise SpecError(f"{path}: {exc}") from None
    return parse_spec(doc, path.parent, hashlib.sha256(raw).hexdigest())


def load_generator(path) -> D.GeneratorConfig:
    """Generator settings from the ``[data]`` table of a spec file."""
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"{path}: {exc}") from None
    table = _table(doc, "data")
    return generator_from_table(table)


def load_dataset(spec: ExperimentSpec) -> D.Dataset:
    """Source data after idle isolation and feature-group selection."""
    if spec.csv_path is not None:
        ds = D.ingest_csv(spec.csv_path, spec.csv_schema)
    else:
        ds = D.gen_synthetic(spec.generator)
    if spec.isolate_idle:
        ds = D.min_idle_isolate(ds)
    return D.select_feature_group(ds, spec.feature_group, spec.feature_groups)
