"""Bagging aggregation of boosted trees and the round protocol.

Each round the aggregator broadcasts the global ensemble; every client
scores it on local held-out data, boosts new trees on top of it from its
private training split and sends back only those trees plus the score. The
aggregator renumbers the trees and appends them, unweighted, to the global
ensemble.
"""

from __future__ import annotations

import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ..gbt import Ensemble, TrainConfig, serialize, train_local
from ..metrics import MetricsReport, evaluate, mean_report
from . import wire

log = logging.getLogger(__name__)

IN_PROCESS = "in_process"
TCP = "tcp"


class FederationError(Exception):
    """Base class for federation failures."""


class FedConfigError(FederationError, ValueError):
    pass


class AggregationError(FederationError):
    pass


class DuplicateClientError(AggregationError):
    pass


class RoundMismatchError(AggregationError):
    pass


class EmptyUpdateError(AggregationError):
    pass


class ClientFailure(FederationError):
    """A client timed out, disconnected or sent an unusable message."""

    def __init__(self, client_id: int | None, reason: str):
        super().__init__(f"client {client_id}: {reason}")
        self.client_id = client_id
        self.reason = reason


class RoundAbortedError(FederationError):
    def __init__(self, round_: int, client_id: int | None, reason: str):
        super().__init__(f"round {round_} aborted by client {client_id}: {reason}")
        self.round = round_
        self.client_id = client_id
        self.reason = reason


@dataclass(frozen=True)
class FedConfig:
    num_clients: int = 3
    num_rounds: int = 10
    train_config: TrainConfig = field(default_factory=TrainConfig)
    base_score: float = 0.0
    transport: str = IN_PROCESS
    listen_address: tuple[str, int] = ("127.0.0.1", 0)
    round_timeout: float = 120.0
    weighted_aggregate: bool = False

    def __post_init__(self):
        if self.num_clients < 1:
            raise FedConfigError(f"num_clients must be >= 1, got {self.num_clients}")
        if self.num_rounds < 1:
            raise FedConfigError(f"num_rounds must be >= 1, got {self.num_rounds}")
        if self.transport not in (IN_PROCESS, TCP):
            raise FedConfigError(f"unknown transport {self.transport!r}")
        if self.round_timeout <= 0:
            raise FedConfigError("round_timeout must be positive")


@dataclass(frozen=True)
class ClientUpdate:
    client_id: int
    round: int
    trees: tuple
    train_sample_count: int
    eval_report: MetricsReport


@dataclass(frozen=True)
class RoundLog:
    round: int
    global_tree_count: int
    client_reports: tuple[MetricsReport, ...]
    aggregate: MetricsReport


def aggregate(global_model: Ensemble, updates: Sequence[ClientUpdate],
              expected_round: int | None = None) -> Ensemble:
    """Append every client's trees to ``global_model`` with fresh ids.

    Updates are taken in ascending ``client_id``; within a client the local
    tree order is kept. One iteration boundary is added at the old tree count.
    """
    if not updates:
        raise AggregationError("no client updates to aggregate")
    rounds = {u.round for u in updates}
    if len(rounds) != 1 or (expected_round is not None and rounds != {expected_round}):
        raise RoundMismatchError(f"updates carry rounds {sorted(rounds)}, expected {expected_round}")
    ids = [u.client_id for u in updates]
    if len(set(ids)) != len(ids):
        raise DuplicateClientError(f"duplicate client ids in one round: {sorted(ids)}")
    ordered = sorted(updates, key=lambda u: u.client_id)
    for u in ordered:
        if not u.trees:
            raise EmptyUpdateError(f"client {u.client_id} sent no trees")
    return global_model.append_round([t for u in ordered for t in u.trees])


class FederatedClient:
    """Holds one party's private splits; speaks the wire protocol as bytes."""

    def __init__(self, client_id: int, train, test, train_config: TrainConfig):
        if len(train) == 0 or len(test) == 0:
            raise ValueError(f"client {client_id} needs non-empty train and test splits")
        self.client_id = client_id
        self.train = train
        self.test = test
        self.train_config = train_config
        self.finished = False

    def hello(self) -> bytes:
        return wire.hello(self.client_id)

    def fit(self, round_: int, model: Ensemble) -> ClientUpdate:
        report = evaluate(model, self.test)
        trees = train_local(model, self.train, self.train_config)
        return ClientUpdate(self.client_id, round_, tuple(trees), len(self.train), report)

    def on_message(self, payload: bytes) -> bytes | None:
        msg = wire.decode(payload)
        if msg.msg_type == wire.GLOBAL_MODEL:
            update = self.fit(msg.round, msg.body["model"])
            return wire.client_update(update.round, update.client_id, update.trees,
                                      update.train_sample_count, update.eval_report)
        if msg.msg_type == wire.ROUND_DONE:
            self.finished = msg.body["final"]
            return None
        if msg.msg_type == wire.ERROR:
            raise FederationError(f"aggregator aborted: {msg.body['reason']}")
        raise wire.ProtocolError(f"client cannot handle {msg.msg_type!r}")


def decode_update(payload: bytes, client_id: int, round_: int) -> ClientUpdate:
    """Parse a client's reply, attributing any defect to ``client_id``."""
    try:
        msg = wire.decode(payload)
    except wire.ProtocolError as exc:
        raise ClientFailure(client_id, f"malformed update: {exc}") from None
    if msg.msg_type == wire.ERROR:
        raise ClientFailure(client_id, msg.body["reason"])
    if msg.msg_type != wire.CLIENT_UPDATE:
        raise ClientFailure(client_id, f"expected client_update, got {msg.msg_type}")
    body = msg.body
    if body["client_id"] != client_id:
        raise ClientFailure(client_id, f"update claims client_id {body['client_id']}")
    if msg.round != round_:
        raise ClientFailure(client_id, f"update is for round {msg.round}, expected {round_}")
    if not body["trees"]:
        raise ClientFailure(client_id, "update holds no trees")
    return ClientUpdate(client_id, msg.round, body["trees"], body["train_sample_count"], body["eval_report"])


class InProcessTransport:
    """Delivers frames to clients by direct call, one client after another."""

    def __init__(self, clients: Sequence[FederatedClient]):
        self.clients = sorted(clients, key=lambda c: c.client_id)

    def start(self) -> None:
        pass

    def exchange(self, round_: int, payload: bytes) -> list[ClientUpdate]:
        updates = []
        for client in self.clients:
            try:
                reply = client.on_message(payload)
            except Exception as exc:  # any client-side failure aborts the round
                raise ClientFailure(client.client_id, f"{type(exc).__name__}: {exc}") from exc
            updates.append(decode_update(reply, client.client_id, round_))
        return updates

    def finish_round(self, round_: int, global_tree_count: int, final: bool) -> None:
        done = wire.round_done(round_, global_tree_count, final)
        for client in self.clients:
            client.on_message(done)

    def abort(self, round_: int, reason: str, client_id: int | None) -> None:
        pass

    def close(self) -> None:
        pass


class FederatedServer:
    """Aggregator state: the global ensemble and the per-round log."""

    def __init__(self, config: FedConfig, feature_names: Sequence[str]):
        self.config = config
        self.global_model = Ensemble(config.base_score, feature_names=tuple(feature_names))
        self.round = 0
        self.logs: list[RoundLog] = []

    def run_round(self, transport) -> RoundLog:
        round_ = self.round + 1
        payload = wire.global_model(round_, self.global_model)
        try:
            updates = transport.exchange(round_, payload)
            if sorted(u.client_id for u in updates) != list(range(self.config.num_clients)):
                raise ClientFailure(None, f"expected clients 0..{self.config.num_clients - 1}")
            new_model = aggregate(self.global_model, updates, expected_round=round_)
        except ClientFailure as exc:
            transport.abort(round_, exc.reason, exc.client_id)
            raise RoundAbortedError(round_, exc.client_id, exc.reason) from exc
        ordered = sorted(updates, key=lambda u: u.client_id)
        reports = tuple(u.eval_report for u in ordered)
        entry = RoundLog(round_, new_model.n_trees, reports,
                         mean_report(reports, weighted=self.config.weighted_aggregate))
        self.global_model = new_model
        self.round = round_
        self.logs.append(entry)
        log.info("round %d: %d trees, aggregated MAE %.4f", round_, new_model.n_trees, entry.aggregate.mae)
        transport.finish_round(round_, new_model.n_trees, final=round_ == self.config.num_rounds)
        return entry


@dataclass(frozen=True)
class FederationResult:
    logs: tuple[RoundLog, ...]
    model: Ensemble


def _write_atomic(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def run_federation(config: FedConfig, splits, model_path=None) -> FederationResult:
    """Run ``config.num_rounds`` rounds over client splits (``.train``/``.test``).

    The final model is written to ``model_path`` only if every round
    succeeds.
    """
    if len(splits) != config.num_clients:
        raise FedConfigError(f"{len(splits)} client splits for {config.num_clients} clients")
    clients = [FederatedClient(k, s.train, s.test, config.train_config) for k, s in enumerate(splits)]
    server = FederatedServer(config, clients[0].train.feature_names)
    if config.transport == TCP:
        from .tcp import TcpServerTransport
        transport = TcpServerTransport(config.listen_address, clients, config.round_timeout)
    else:
        transport = InProcessTransport(clients)
    try:
        transport.start()
        for _ in range(config.num_rounds):
            server.run_round(transport)
    finally:
        transport.close()
    result = FederationResult(tuple(server.logs), server.global_model)
    if model_path is not None:
        _write_atomic(Path(model_path), serialize(result.model))
    return result
