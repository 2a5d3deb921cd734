from .core import (
    IN_PROCESS,
    TCP,
    AggregationError,
    ClientFailure,
    ClientUpdate,
    DuplicateClientError,
    EmptyUpdateError,
    FedConfig,
    FedConfigError,
    FederatedClient,
    FederatedServer,
    FederationError,
    FederationResult,
    InProcessTransport,
    RoundAbortedError,
    RoundLog,
    RoundMismatchError,
    aggregate,
    run_federation,
)
from .tcp import TcpServerTransport, run_tcp_client

__all__ = [
    "IN_PROCESS",
    "TCP",
    "AggregationError",
    "ClientFailure",
    "ClientUpdate",
    "DuplicateClientError",
    "EmptyUpdateError",
    "FedConfig",
    "FedConfigError",
    "FederatedClient",
    "FederatedServer",
    "FederationError",
    "FederationResult",
    "InProcessTransport",
    "RoundAbortedError",
    "RoundLog",
    "RoundMismatchError",
    "TcpServerTransport",
    "aggregate",
    "run_federation",
    "run_tcp_client",
]
