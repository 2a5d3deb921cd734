"""Framed JSON messages exchanged between the aggregator and its clients.

A frame is a 4-byte big-endian payload length followed by a UTF-8 JSON
document::

    {"msg_type": "...", "protocol_version": 1, "round": <int>, "body": {...}}

Every body field is declared in :data:`MESSAGE_BODIES`; decoding rejects
unknown or missing fields, so nothing beyond model artifacts and summary
metrics can travel in a message.
"""

from __future__ import annotations

import json
import socket
import struct
from dataclasses import dataclass
from typing import Any

from ..gbt import codec
from ..gbt.codec import ModelFormatError
from ..metrics import MetricsReport

PROTOCOL_VERSION = 1
MAX_FRAME = 64 * 1024 * 1024
_HEADER = struct.Struct(">I")

HELLO = "hello"
GLOBAL_MODEL = "global_model"
CLIENT_UPDATE = "client_update"
ROUND_DONE = "round_done"
ERROR = "error"

ENVELOPE_FIELDS = {"msg_type": "str", "protocol_version": "int", "round": "int", "body": "body"}
METRICS_FIELDS = {"mae": "real", "mse": "real", "rmse": "real",
                  "mape": "real?", "r2": "real?", "n": "int"}
MESSAGE_BODIES = {
    HELLO: {"client_id": "int"},
    GLOBAL_MODEL: {"model": "ensemble"},
    CLIENT_UPDATE: {"client_id": "int", "trees": "list[tree]",
                    "train_sample_count": "int", "eval_report": "metrics"},
    ROUND_DONE: {"global_tree_count": "int", "final": "bool"},
    ERROR: {"client_id": "int?", "reason": "str"},
}
# composite wire types and the field tables that define them
COMPOSITE_TYPES = {
    "ensemble": codec.ENSEMBLE_FIELDS,
    "tree": codec.TREE_FIELDS,
    "node": {**codec.SPLIT_FIELDS, **codec.LEAF_FIELDS},
    "metrics": METRICS_FIELDS,
}


class ProtocolError(Exception):
    """A frame or message violates the wire protocol."""


class FrameTooLargeError(ProtocolError):
    pass


@dataclass(frozen=True)
class Message:
    msg_type: str
    round: int
    body: dict[str, Any]


# --- framing ----------------------------------------------------------------

def frame(payload: bytes) -> bytes:
    if len(payload) > MAX_FRAME:
        raise FrameTooLargeError(f"payload of {len(payload)} bytes exceeds {MAX_FRAME}")
    return _HEADER.pack(len(payload)) + payload


def send_frame(sock: socket.socket, payload: bytes) -> None:
    sock.sendall(frame(payload))


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 20))
        if not chunk:
            if not buf:
                return None
            raise ProtocolError("connection closed mid-frame")
        buf.extend(chunk)
    return bytes(buf)


def recv_frame(sock: socket.socket) -> bytes | None:
    """Next payload, or None if the peer closed cleanly between frames."""
    header = _recv_exact(sock, _HEADER.size)
    if header is None:
        return None
    (length,) = _HEADER.unpack(header)
    if length > MAX_FRAME:
        raise FrameTooLargeError(f"peer announced a {length}-byte frame (limit {MAX_FRAME})")
    payload = _recv_exact(sock, length) if length else b""
    if payload is None:
        raise ProtocolError("connection closed mid-frame")
    return payload


# --- messages -----------------------------------------------------------------

def _metrics_doc(report: MetricsReport) -> dict:
    enc = lambda x: None if x is None else codec.encode_real(x)  # noqa: E731
    return {"mae": enc(report.mae), "mse": enc(report.mse), "rmse": enc(report.rmse),
            "mape": enc(report.mape), "r2": enc(report.r2), "n": report.n}


def _envelope(msg_type: str, round_: int, body: dict) -> bytes:
    return codec.dumps({"msg_type": msg_type, "protocol_version": PROTOCOL_VERSION,
                        "round": round_, "body": body})


def hello(client_id: int) -> bytes:
    return _envelope(HELLO, 0, {"client_id": client_id})


def global_model(round_: int, ensemble) -> bytes:
    return _envelope(GLOBAL_MODEL, round_, {"model": codec.ensemble_to_doc(ensemble)})


def client_update(round_: int, client_id: int, trees, train_sample_count: int,
                  eval_report: MetricsReport) -> bytes:
    return _envelope(CLIENT_UPDATE, round_, {
        "client_id": client_id,
        "trees": [codec.tree_to_doc(t) for t in trees],
        "train_sample_count": train_sample_count,
        "eval_report": _metrics_doc(eval_report),
    })


def round_done(round_: int, global_tree_count: int, final: bool) -> bytes:
    return _envelope(ROUND_DONE, round_, {"global_tree_count": global_tree_count, "final": final})


def error(round_: int, reason: str, client_id: int | None = None) -> bytes:
    return _envelope(ERROR, round_, {"client_id": client_id, "reason": reason})


def _decode_field(kind: str, value, where: str):
    if kind.endswith("?"):
        return None if value is None else _decode_field(kind[:-1], value, where)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ProtocolError(f"{where}: expected an integer")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ProtocolError(f"{where}: expected a boolean")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ProtocolError(f"{where}: expected a string")
        return value
    if kind == "real":
        try:
            return codec.decode_real(value, where)
        except ModelFormatError as exc:
            raise ProtocolError(str(exc)) from None
    try:
        if kind == "ensemble":
            return codec.ensemble_from_doc(value)
        if kind == "list[tree]":
            if not isinstance(value, list):
                raise ProtocolError(f"{where}: expected an array of trees")
            return tuple(codec.tree_from_doc(t, f"{where}[{i}]") for i, t in enumerate(value))
    except ModelFormatError as exc:
        raise ProtocolError(f"{where}: {exc}") from None
    if kind == "metrics":
        body = _check_fields(value, METRICS_FIELDS, where)
        return MetricsReport(**body)
    raise AssertionError(f"unhandled wire type {kind}")


def _check_fields(obj, fields: dict, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ProtocolError(f"{where}: expected an object")
    if set(obj) != set(fields):
        raise ProtocolError(f"{where}: fields {sorted(obj)} do not match {sorted(fields)}")
    return {k: _decode_field(kind, obj[k], f"{where}.{k}") for k, kind in fields.items()}


def decode(payload: bytes) -> Message:
    try:
        doc = json.loads(payload)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProtocolError(f"payload is not JSON: {exc}") from None
    if not isinstance(doc, dict) or set(doc) != set(ENVELOPE_FIELDS):
        raise ProtocolError("message envelope must hold exactly msg_type, protocol_version, round, body")
    if doc["protocol_version"] != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol_version {doc['protocol_version']!r}")
    msg_type = doc["msg_type"]
    if msg_type not in MESSAGE_BODIES:
        raise ProtocolError(f"unknown msg_type {msg_type!r}")
    round_ = _decode_field("int", doc["round"], "round")
    body = _check_fields(doc["body"], MESSAGE_BODIES[msg_type], msg_type)
    return Message(msg_type, round_, body)
