"""SPECPower-style measurement tables: ingestion, preprocessing, partitioning
and a synthetic generator.

CSV layout: UTF-8, header row, ``node_type,load_level,<feature...>,power``;
a missing feature value is an empty cell.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

BPF_ONLY = "BPFOnly"
ALL = "All"

# counter-style columns; override per experiment
DEFAULT_FEATURE_GROUPS = {
    BPF_ONLY: ("cpu_util", "cpu_cycles", "cpu_instructions", "cache_misses"),
}


class DataError(ValueError):
    """Base class for data-pipeline failures."""


class IngestError(DataError):
    pass


class EmptyFileError(IngestError):
    pass


class MissingColumnError(IngestError):
    def __init__(self, column: str):
        super().__init__(f"required column {column!r} is missing from the header")
        self.column = column


class BadValueError(IngestError):
    def __init__(self, column: str, row: int, value: str):
        super().__init__(f"row {row}: column {column!r} has unparseable value {value!r}")
        self.column = column
        self.row = row


class DoubleIsolationError(DataError):
    pass


class EmptyFeatureGroupError(DataError):
    pass


class InfeasiblePartitionError(DataError):
    pass


class GeneratorConfigError(DataError):
    pass


@dataclass(frozen=True)
class Sample:
    features: tuple[float, ...]
    target_power: float
    node_type: str
    load_level: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented table of samples. Arrays are read-only."""

    features: np.ndarray
    targets: np.ndarray
    node_types: np.ndarray
    load_levels: np.ndarray
    feature_names: tuple[str, ...]
    isolated: bool = False

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, ndmin=2)
        if X.size == 0:
            X = X.reshape(0, len(self.feature_names))
        y = np.array(self.targets, dtype=np.float64).reshape(-1)
        nt = np.array([str(t) for t in self.node_types], dtype=object)
        ll = np.array(self.load_levels, dtype=np.float64).reshape(-1)
        if X.shape[1] != len(self.feature_names):
            raise DataError(f"{X.shape[1]} feature columns but {len(self.feature_names)} names")
        if not (X.shape[0] == y.shape[0] == nt.shape[0] == ll.shape[0]):
            raise DataError("features, targets, node_types and load_levels differ in length")
        for a in (X, y, nt, ll):
            a.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "node_types", nt)
        object.__setattr__(self, "load_levels", ll)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], feature_names: Sequence[str],
                     isolated: bool = False) -> "Dataset":
        return cls(
            np.array([s.features for s in samples], dtype=np.float64).reshape(len(samples), len(feature_names)),
            [s.target_power for s in samples],
            [s.node_type for s in samples],
            [s.load_level for s in samples],
            tuple(feature_names),
            isolated,
        )

    def __len__(self) -> int:
        return self.targets.shape[0]

    @property
    def samples(self) -> list[Sample]:
        return [Sample(tuple(float(v) for v in row), float(t), nt, float(ll))
                for row, t, nt, ll in zip(self.features, self.targets, self.node_types, self.load_levels)]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.features[idx], self.targets[idx], self.node_types[idx],
                       self.load_levels[idx], self.feature_names, self.isolated)

    def with_targets(self, targets, isolated: bool | None = None) -> "Dataset":
        return Dataset(self.features, targets, self.node_types, self.load_levels, self.feature_names,
                       self.isolated if isolated is None else isolated)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.feature_names == other.feature_names and self.isolated == other.isolated
                and np.array_equal(self.features, other.features, equal_nan=True)
                and np.array_equal(self.targets, other.targets)
                and np.array_equal(self.load_levels, other.load_levels)
                and list(self.node_types) == list(other.node_types))

    __hash__ = None


def concat(datasets: Sequence[Dataset]) -> Dataset:
    """Stack datasets that share a feature layout, in the given order."""
    first = datasets[0]
    for d in datasets[1:]:
        if d.feature_names != first.feature_names or d.isolated != first.isolated:
            raise DataError("cannot concatenate datasets with different layouts")
    return Dataset(
        np.concatenate([d.features for d in datasets]),
        np.concatenate([d.targets for d in datasets]),
        np.concatenate([d.node_types for d in datasets]),
        np.concatenate([d.load_levels for d in datasets]),
        first.feature_names,
        first.isolated,
    )


# --- CSV -------------------------------------------------------------------

@dataclass(frozen=True)
class CsvSchema:
    """Which header columns hold metadata; ``feature_columns=None`` takes the rest."""

    node_type_column: str = "node_type"
    load_column: str = "load_level"
    target_column: str = "power"
    feature_columns: tuple[str, ...] | None = None


def _real(text: str) -> float:
    if text.strip() == "":
        raise ValueError("empty")
    return float(text)


def ingest_csv(path, schema: CsvSchema = CsvSchema()) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise EmptyFileError(f"{path}: file is empty")
        header = [h.strip() for h in header]
        meta = (schema.target_column, schema.node_type_column, schema.load_column)
        for col in meta:
            if col not in header:
                raise MissingColumnError(col)
        if schema.feature_columns is None:
            feature_cols = [h for h in header if h not in meta]
        else:
            feature_cols = list(schema.feature_columns)
            for col in feature_cols:
                if col not in header:
                    raise MissingColumnError(col)
        pos = {h: i for i, h in enumerate(header)}
        fpos = [pos[c] for c in feature_cols]
        X, y, nt, ll = [], [], [], []
        for rowno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise IngestError(f"row {rowno}: expected {len(header)} cells, found {len(row)}")
            try:
                target = _real(row[pos[schema.target_column]])
            except ValueError:
                target = math.nan
            if not math.isfinite(target):
                raise BadValueError(schema.target_column, rowno, row[pos[schema.target_column]])
            y.append(target)
            try:
                load = _real(row[pos[schema.load_column]])
            except ValueError:
                load = math.nan
            if not 0.0 <= load <= 100.0:
                raise BadValueError(schema.load_column, rowno, row[pos[schema.load_column]])
            ll.append(load)
            nt.append(row[pos[schema.node_type_column]])
            feats = []
            for p in fpos:
                try:
                    feats.append(_real(row[p]))
                except ValueError:
                    feats.append(math.nan)
            X.append(feats)
    if not y:
        raise EmptyFileError(f"{path}: header present but no data rows")
    return Dataset(np.array(X, dtype=np.float64).reshape(len(y), len(feature_cols)), y, nt, ll, tuple(feature_cols))


def _cell(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def write_csv(data: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node_type", "load_level", *data.feature_names, "power"])
        for row, t, nt, ll in zip(data.features, data.targets, data.node_types, data.load_levels):
            writer.writerow([nt, _cell(ll), *(_cell(v) for v in row), _cell(t)])


# --- preprocessing ------------------------------------------------------------

def idle_floors(data: Dataset) -> dict[str, float]:
    """Per node type: lowest power observed at that type's lowest load level."""
    floors = {}
    for node_type in sorted(set(data.node_types)):
        mask = data.node_types == node_type
        loads = data.load_levels[mask]
        floors[node_type] = float(data.targets[mask][loads == loads.min()].min())
    return floors


def min_idle_isolate(data: Dataset) -> Dataset:
    """Subtract each node type's idle floor so targets become dynamic power."""
    if data.isolated:
        raise DoubleIsolationError("dataset has already been idle-isolated")
    floors = idle_floors(data)
    offset = np.array([floors[t] for t in data.node_types], dtype=np.float64)
    return data.with_targets(data.targets - offset, isolated=True)


def select_feature_group(data: Dataset, group: str = BPF_ONLY,
                         groups: Mapping[str, Sequence[str]] | None = None) -> Dataset:
    """Keep only the columns whitelisted for ``group``, in their original order."""
    if group == ALL:
        return data
    groups = DEFAULT_FEATURE_GROUPS if groups is None else groups
    if group not in groups:
        raise EmptyFeatureGroupError(f"no column list configured for feature group {group!r}")
    allowed = set(groups[group])
    keep = [i for i, name in enumerate(data.feature_names) if name in allowed]
    if not keep:
        raise EmptyFeatureGroupError(f"feature group {group!r} selects none of {list(data.feature_names)}")
    return Dataset(data.features[:, keep], data.targets, data.node_types, data.load_levels,
                   tuple(data.feature_names[i] for i in keep), data.isolated)


# --- partitioning ---------------------------------------------------------------

@dataclass(frozen=True)
class PartitionPlan:
    num_clients: int
    test_fraction: float = 0.2
    split_seed: int = 0
    assignment: Mapping[str, int] | None = None

    def __post_init__(self):
        if self.num_clients < 1:
            raise InfeasiblePartitionError("num_clients must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise InfeasiblePartitionError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")

    def resolve(self, node_types: Sequence[str]) -> dict[str, int]:
        types = sorted(set(node_types))
        if self.num_clients > len(types):
            raise InfeasiblePartitionError(
                f"{self.num_clients} clients but only {len(types)} distinct node types")
        if self.assignment is None:
            return {t: i % self.num_clients for i, t in enumerate(types)}
        assignment = dict(self.assignment)
        unmapped = [t for t in types if t not in assignment]
        if unmapped:
            raise InfeasiblePartitionError(f"node types without a client: {unmapped}")
        if any(not 0 <= assignment[t] < self.num_clients for t in types):
            raise InfeasiblePartitionError("assignment refers to a client index out of range")
        empty = set(range(self.num_clients)) - {assignment[t] for t in types}
        if empty:
            raise InfeasiblePartitionError(f"clients with no node type: {sorted(empty)}")
        return {t: assignment[t] for t in types}


@dataclass(frozen=True)
class ClientSplit:
    train: Dataset
    test: Dataset
    train_index: np.ndarray = field(repr=False)
    test_index: np.ndarray = field(repr=False)


def partition(data: Dataset, plan: PartitionPlan) -> list[ClientSplit]:
    """Assign node types to clients, then hold out a seeded test split per client.

    Row indices into ``data`` are kept on each split so callers can audit
    coverage; both splits preserve the input row order.
    """
    assignment = plan.resolve(list(data.node_types))
    owner = np.array([assignment[t] for t in data.node_types], dtype=np.intp)
    splits = []
    for k in range(plan.num_clients):
        rows = np.flatnonzero(owner == k)
        rng = np.random.default_rng([plan.split_seed, k])
        perm = rng.permutation(rows.size)
        n_test = int(math.floor(rows.size * plan.test_fraction + 0.5))
        test_idx = np.sort(rows[perm[:n_test]])
        train_idx = np.sort(rows[perm[n_test:]])
        splits.append(ClientSplit(data.subset(train_idx), data.subset(test_idx), train_idx, test_idx))
    return splits


# --- synthetic generator ------------------------------------------------------

@dataclass(frozen=True)
class NodeProfile:
    """Power curve and counter characteristics of one hardware configuration."""

    name: str
    idle_watts: float
    max_watts: float
    curvature: float = 1.0
    noise_sd: float = 0.0
    repeats: int = 40
    freq_ghz: float = 2.5
    ipc: float = 1.5
    miss_rate: float = 0.01
    mem_gb: float = 64.0


@dataclass(frozen=True)
class GeneratorConfig:
    nodes: tuple[NodeProfile, ...]
    load_levels: tuple[float, ...] = tuple(float(x) for x in range(0, 101, 10))
    util_noise_sd: float = 2.0
    counter_noise: float = 0.02
    seed: int = 0

    def validate(self) -> None:
        if not self.nodes:
            raise GeneratorConfigError("generator needs at least one node profile")
        if not self.load_levels:
            raise GeneratorConfigError("generator needs at least one load level")
        for lvl in self.load_levels:
            if not 0 <= lvl <= 100:
                raise GeneratorConfigError(f"load level {lvl} outside [0, 100]")
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            raise GeneratorConfigError("node profile names must be unique")
        for n in self.nodes:
            if n.repeats <= 0:
                raise GeneratorConfigError(f"{n.name}: sample count must be positive, got {n.repeats}")
            if n.max_watts < n.idle_watts:
                raise GeneratorConfigError(f"{n.name}: max_watts {n.max_watts} < idle_watts {n.idle_watts}")
            if n.noise_sd < 0 or n.curvature <= 0:
                raise GeneratorConfigError(f"{n.name}: noise_sd must be >= 0 and curvature > 0")


DEFAULT_NODES = (
    NodeProfile("xeon-e5-2650", idle_watts=58.0, max_watts=232.0, curvature=0.85, noise_sd=4.0,
                freq_ghz=2.2, ipc=1.3, miss_rate=0.018, mem_gb=128.0),
    NodeProfile("epyc-7452", idle_watts=46.0, max_watts=285.0, curvature=1.25, noise_sd=5.0,
                freq_ghz=2.35, ipc=1.9, miss_rate=0.011, mem_gb=256.0),
    NodeProfile("ampere-altra-q80", idle_watts=34.0, max_watts=165.0, curvature=0.7, noise_sd=3.0,
                freq_ghz=3.0, ipc=1.1, miss_rate=0.007, mem_gb=64.0),
)


def power_curve(idle: float, peak: float, curvature: float, load) -> np.ndarray:
    """Noise-free power at ``load`` percent: idle + (peak - idle) * (load/100)**curvature."""
    load = np.asarray(load, dtype=np.float64)
    return idle + (peak - idle) * (load / 100.0) ** curvature


SYNTHETIC_FEATURES = ("cpu_util", "mem_usage", "disk_io", "cpu_cycles", "cpu_instructions", "cache_misses")


def gen_synthetic(config: GeneratorConfig | None = None) -> Dataset:
    """Seeded stand-in for a SPECpower_ssj2008 result table.

    Rows are ordered by node profile, then load level, then repeat.
    """
    config = config or GeneratorConfig(DEFAULT_NODES)
    config.validate()
    rng = np.random.default_rng(config.seed)
    blocks = []
    for node in config.nodes:
        load = np.repeat(np.asarray(config.load_levels, dtype=np.float64), node.repeats)
        n = load.size
        power = power_curve(node.idle_watts, node.max_watts, node.curvature, load)
        power = np.maximum(power + node.noise_sd * rng.standard_normal(n), 0.0)
        util = np.clip(load + config.util_noise_sd * rng.standard_normal(n), 0.0, 100.0)
        jitter = 1.0 + config.counter_noise * rng.standard_normal((4, n))
        # cycles and instructions in units of 1e9 per second
        cycles = util / 100.0 * node.freq_ghz * jitter[0]
        instructions = cycles * node.ipc * jitter[1]
        misses = instructions * node.miss_rate * 1e3 * jitter[2]
        mem = node.mem_gb * (0.08 + 0.5 * util / 100.0) * jitter[3]
        disk = np.abs(5.0 + 0.8 * util + 3.0 * rng.standard_normal(n))
        X = np.column_stack([util, mem, disk, cycles, instructions, misses])
        blocks.append(Dataset(X, power, [node.name] * n, load, SYNTHETIC_FEATURES))
    return concat(blocks)
