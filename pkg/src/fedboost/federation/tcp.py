"""TCP transport: one connection per client, one federation per connection."""

from __future__ import annotations

import logging
import socket
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

from . import wire
from .core import ClientFailure, ClientUpdate, FederatedClient, FederationError, decode_update

log = logging.getLogger(__name__)


def run_tcp_client(client: FederatedClient, address, timeout: float | None = None) -> None:
    """Connect to an aggregator and serve rounds until the final ``round_done``."""
    with socket.create_connection(address, timeout=timeout) as sock:
        sock.settimeout(timeout)
        wire.send_frame(sock, client.hello())
        while not client.finished:
            payload = wire.recv_frame(sock)
            if payload is None:
                raise FederationError(f"client {client.client_id}: aggregator closed the connection")
            try:
                reply = client.on_message(payload)
            except FederationError:
                raise
            except Exception as exc:
                wire.send_frame(sock, wire.error(0, f"{type(exc).__name__}: {exc}", client.client_id))
                raise
            if reply is not None:
                wire.send_frame(sock, reply)


class TcpServerTransport:
    """Aggregator side of the TCP protocol.

    ``local_clients`` are served from background threads of this process,
    which is how simulations run; remote clients can connect with
    :func:`run_tcp_client` instead.
    """

    def __init__(self, address, local_clients: Sequence[FederatedClient] = (), timeout: float = 120.0,
                 num_clients: int | None = None):
        self.num_clients = len(local_clients) if num_clients is None else num_clients
        self.timeout = timeout
        self.local_clients = list(local_clients)
        self.listener = socket.create_server(tuple(address))
        self.listener.settimeout(timeout)
        self.conns: dict[int, socket.socket] = {}
        self.threads: list[threading.Thread] = []
        self.client_errors: dict[int, BaseException] = {}

    @property
    def address(self) -> tuple[str, int]:
        return self.listener.getsockname()[:2]

    def _serve_local(self, client: FederatedClient) -> None:
        try:
            run_tcp_client(client, self.address, self.timeout)
        except BaseException as exc:  # reported through the aggregator's view of the socket
            self.client_errors[client.client_id] = exc
            log.debug("local client %d stopped: %s", client.client_id, exc)

    def start(self) -> None:
        for client in self.local_clients:
            t = threading.Thread(target=self._serve_local, args=(client,), daemon=True,
                                 name=f"fedboost-client-{client.client_id}")
            t.start()
            self.threads.append(t)
        while len(self.conns) < self.num_clients:
            try:
                conn, _ = self.listener.accept()
            except socket.timeout:
                raise ClientFailure(None, f"only {len(self.conns)} of {self.num_clients} clients connected")
            conn.settimeout(self.timeout)
            try:
                msg = wire.decode(wire.recv_frame(conn) or b"")
            except (wire.ProtocolError, OSError) as exc:
                conn.close()
                raise ClientFailure(None, f"bad hello: {exc}") from None
            cid = msg.body.get("client_id")
            if msg.msg_type != wire.HELLO or not 0 <= cid < self.num_clients or cid in self.conns:
                conn.close()
                raise ClientFailure(cid, "invalid or duplicate hello")
            self.conns[cid] = conn

    def _exchange_one(self, cid: int, round_: int, payload: bytes) -> ClientUpdate:
        conn = self.conns[cid]
        try:
            wire.send_frame(conn, payload)
            reply = wire.recv_frame(conn)
        except socket.timeout:
            raise ClientFailure(cid, f"no update within {self.timeout} s") from None
        except (OSError, wire.ProtocolError) as exc:
            raise ClientFailure(cid, f"transport error: {exc}") from None
        if reply is None:
            raise ClientFailure(cid, "connection closed before sending an update")
        return decode_update(reply, cid, round_)

    def exchange(self, round_: int, payload: bytes) -> list[ClientUpdate]:
        ids = sorted(self.conns)
        with ThreadPoolExecutor(max_workers=len(ids)) as pool:
            futures = [pool.submit(self._exchange_one, cid, round_, payload) for cid in ids]
            # surface the lowest failing client id first
            return [f.result() for f in futures]

    def finish_round(self, round_: int, global_tree_count: int, final: bool) -> None:
        done = wire.round_done(round_, global_tree_count, final)
        for cid in sorted(self.conns):
            wire.send_frame(self.conns[cid], done)

    def abort(self, round_: int, reason: str, client_id: int | None) -> None:
        msg = wire.error(round_, reason, client_id)
        for conn in self.conns.values():
            try:
                wire.send_frame(conn, msg)
            except OSError:
                pass

    def close(self) -> None:
        for conn in self.conns.values():
            conn.close()
        self.conns.clear()
        self.listener.close()
        for t in self.threads:
            t.join(timeout=self.timeout)
