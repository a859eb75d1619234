"""The phone line: framed classical messages between Alice and Bob.

Frames are a 4-byte big-endian length followed by canonical JSON (sorted
keys, no insignificant whitespace, 17-significant-digit floats), capped at
1 MiB.  Message types: hello, outcomes, estimate, error, bye.  One session
per connection, single request-response discipline, no pipelining.

The ground-truth axis is never placed on the wire.  In a networked session
both processes derive it from the shared session seed (it stands in for the
physical entangled pairs each party holds); only Alice's announced bits and
Bob's final estimate travel as frames.
"""

from __future__ import annotations

import json
import socket
import struct
from dataclasses import dataclass
from typing import Optional, Union

from .bloch import Direction, fibonacci_grid
from .errors import (
    FrameParseError,
    FrameSizeError,
    SessionError,
    TruncationError,
    UnknownMessageError,
)
from .estimators import bob_estimate
from .protocol import (
    EstimateRecord,
    GroundTruth,
    OutcomeRecord,
    ProtocolConfig,
    Transcript,
    alice_measure,
    alice_rng,
    bob_rng,
    sample_truth,
)
from .serialize import canonical_json

MAX_FRAME_BYTES = 1 << 20
MAX_BATCH = 1024
DEFAULT_PORT = 7070

# Error codes carried by ProtocolError messages.
CODE_UNKNOWN_TYPE = 1
CODE_BAD_SEQUENCE = 2
CODE_UNEXPECTED_MESSAGE = 3
CODE_UNSUPPORTED = 4
CODE_MALFORMED = 5


@dataclass(frozen=True)
class Hello:
    role: str
    n_particles: int


@dataclass(frozen=True)
class Outcomes:
    seq: int
    outcomes: tuple[int, ...]


@dataclass(frozen=True)
class Estimate:
    x: float
    y: float
    z: float
    strategy: str


@dataclass(frozen=True)
class ProtocolError:
    code: int
    detail: str


@dataclass(frozen=True)
class Bye:
    pass


Message = Union[Hello, Outcomes, Estimate, ProtocolError, Bye]


def _validate(msg: Message) -> None:
    if isinstance(msg, Hello):
        if msg.role not in ("alice", "bob"):
            raise ValueError(f"role must be alice or bob, got {msg.role!r}")
        if msg.n_particles < 0:
            raise ValueError("n_particles must be >= 0")
    elif isinstance(msg, Outcomes):
        if msg.seq < 0:
            raise ValueError("seq must be >= 0")
        if len(msg.outcomes) > MAX_BATCH:
            raise ValueError(f"outcome batch exceeds {MAX_BATCH} entries")
        if any(o not in (+1, -1) for o in msg.outcomes):
            raise ValueError("outcomes must be +1 or -1")
    elif isinstance(msg, Estimate):
        norm2 = msg.x * msg.x + msg.y * msg.y + msg.z * msg.z
        if abs(norm2 - 1.0) > 2e-9:
            raise ValueError(f"estimate direction must be unit length, |v|^2 = {norm2!r}")


def _payload(msg: Message) -> dict:
    if isinstance(msg, Hello):
        return {"type": "hello", "role": msg.role, "n_particles": msg.n_particles}
    if isinstance(msg, Outcomes):
        return {"type": "outcomes", "seq": msg.seq, "outcomes": list(msg.outcomes)}
    if isinstance(msg, Estimate):
        return {"type": "estimate", "x": msg.x, "y": msg.y, "z": msg.z, "strategy": msg.strategy}
    if isinstance(msg, ProtocolError):
        return {"type": "error", "code": msg.code, "detail": msg.detail}
    if isinstance(msg, Bye):
        return {"type": "bye"}
    raise TypeError(f"not a message: {type(msg).__name__}")


def encode_frame(msg: Message) -> bytes:
    """Length-prefixed canonical JSON bytes for one message."""
    _validate(msg)
    payload = canonical_json(_payload(msg)).encode("utf-8")
    if len(payload) > MAX_FRAME_BYTES:
        raise FrameSizeError(f"payload of {len(payload)} bytes exceeds {MAX_FRAME_BYTES}")
    return struct.pack(">I", len(payload)) + payload


def _read_exact(stream, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = stream.read(remaining)
        if not chunk:
            raise TruncationError(f"stream ended with {remaining} of {n} bytes unread")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def _require(condition: bool, detail: str) -> None:
    if not condition:
        raise FrameParseError(detail)


def decode_frame(stream) -> Message:
    """Read one length-prefixed frame from a ``.read(n)`` stream.

    The declared length is checked against the 1 MiB cap before the payload
    is read.  A structurally valid frame with an unrecognized ``type`` raises
    ``UnknownMessageError`` so the caller can answer with a protocol error.
    """
    header = _read_exact(stream, 4)
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME_BYTES:
        raise FrameSizeError(f"declared frame length {length} exceeds {MAX_FRAME_BYTES}")
    payload = _read_exact(stream, length)
    try:
        doc = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FrameParseError(f"invalid frame payload: {exc}") from exc
    _require(isinstance(doc, dict), "frame payload must be a JSON object")
    kind = doc.get("type")
    try:
        if kind == "hello":
            msg: Message = Hello(role=doc["role"], n_particles=int(doc["n_particles"]))
        elif kind == "outcomes":
            msg = Outcomes(seq=int(doc["seq"]), outcomes=tuple(int(o) for o in doc["outcomes"]))
        elif kind == "estimate":
            msg = Estimate(
                x=float(doc["x"]), y=float(doc["y"]), z=float(doc["z"]),
                strategy=str(doc["strategy"]),
            )
        elif kind == "error":
            msg = ProtocolError(code=int(doc["code"]), detail=str(doc["detail"]))
        elif kind == "bye":
            msg = Bye()
        else:
            raise UnknownMessageError(str(kind))
        _validate(msg)
    except (KeyError, TypeError, ValueError) as exc:
        raise FrameParseError(f"malformed {kind!r} message: {exc}") from exc
    return msg


class StreamTransport:
    """Frame transport over a (reader, writer) pair of binary streams.

    ``tap``, when given, receives every raw frame as ``(direction, bytes)``
    with direction 'send' or 'recv'; tests use it to audit the byte log.
    """

    def __init__(self, reader, writer, tap=None):
        self._reader = reader
        self._writer = writer
        self._tap = tap

    @classmethod
    def from_socket(cls, sock: socket.socket, tap=None) -> "StreamTransport":
        return cls(sock.makefile("rb"), sock.makefile("wb"), tap=tap)

    def send(self, msg: Message) -> None:
        frame = encode_frame(msg)
        if self._tap is not None:
            self._tap("send", frame)
        self._writer.write(frame)
        self._writer.flush()

    def recv(self) -> Message:
        # decode_frame sees raw bytes, so tap through a tiny recording shim
        if self._tap is None:
            return decode_frame(self._reader)
        outer = self

        class _Recorder:
            def read(self, n: int) -> bytes:
                chunk = outer._reader.read(n)
                if chunk:
                    outer._tap("recv", chunk)
                return chunk

        return decode_frame(_Recorder())

    def close(self) -> None:
        for stream in (self._writer, self._reader):
            try:
                stream.close()
            except OSError:
                pass


def socketpair_transports(tap_a=None, tap_b=None) -> tuple[StreamTransport, StreamTransport]:
    """In-process transport pair (same code path as TCP)."""
    a, b = socket.socketpair()
    return StreamTransport.from_socket(a, tap=tap_a), StreamTransport.from_socket(b, tap=tap_b)


def _abort(transport: StreamTransport, code: int, detail: str):
    try:
        transport.send(ProtocolError(code, detail))
    except Exception:
        pass
    raise SessionError(code, detail)


def _recv_or_abort(transport: StreamTransport) -> Message:
    try:
        msg = transport.recv()
    except UnknownMessageError as exc:
        _abort(transport, CODE_UNKNOWN_TYPE, f"unknown message type {exc.type_name!r}")
    if isinstance(msg, ProtocolError):
        raise SessionError(msg.code, msg.detail)
    return msg


def alice_endpoint(
    truth: GroundTruth, config: ProtocolConfig, transport: StreamTransport
) -> Transcript:
    """Alice's side: hello, outcome batches in order, await estimate, bye."""
    outcomes = alice_measure(truth, config, alice_rng(config.seed))
    transport.send(Hello(role="alice", n_particles=config.n_particles))
    values = [o.alice_outcome for o in outcomes]
    for seq, start in enumerate(range(0, len(values), MAX_BATCH)):
        transport.send(Outcomes(seq=seq, outcomes=tuple(values[start : start + MAX_BATCH])))
    reply = _recv_or_abort(transport)
    if not isinstance(reply, Estimate):
        _abort(
            transport,
            CODE_UNEXPECTED_MESSAGE,
            f"expected estimate, got {type(reply).__name__.lower()}",
        )
    transport.send(Bye())
    estimate = EstimateRecord(
        Direction.normalized(reply.x, reply.y, reply.z), reply.strategy
    )
    return Transcript(
        config=config, outcomes=tuple(outcomes), estimate=estimate, truth=truth
    )


def bob_endpoint(
    strategy: str,
    transport: StreamTransport,
    seed: int,
    *,
    truth: Optional[GroundTruth] = None,
    grid_size: int = 2000,
    hemisphere_hint=None,
    seesaw_config=None,
) -> Transcript:
    """Bob's side: receive hello and outcomes, estimate, reply, accept bye.

    ``truth`` stands in for Bob's physical half of the entangled pairs; when
    omitted it is derived from the shared session seed, which is what makes
    a two-process session reproduce the single-process run exactly.
    """
    msg = _recv_or_abort(transport)
    if not isinstance(msg, Hello):
        _abort(transport, CODE_UNEXPECTED_MESSAGE, "expected hello first")
    if msg.role != "alice":
        _abort(transport, CODE_UNEXPECTED_MESSAGE, f"expected role alice, got {msg.role!r}")
    n = msg.n_particles
    config = ProtocolConfig(n, seed, hemisphere_hint)
    if truth is None:
        truth = sample_truth(config)

    values: list[int] = []
    expected_seq = 0
    while len(values) < n:
        msg = _recv_or_abort(transport)
        if not isinstance(msg, Outcomes):
            _abort(transport, CODE_UNEXPECTED_MESSAGE, "expected an outcomes batch")
        if msg.seq != expected_seq:
            _abort(
                transport,
                CODE_BAD_SEQUENCE,
                f"out-of-order batch: got seq {msg.seq}, expected {expected_seq}",
            )
        expected_seq += 1
        values.extend(msg.outcomes)
        if len(values) > n:
            _abort(transport, CODE_MALFORMED, f"received {len(values)} outcomes for n={n}")

    if strategy == "collective" and n > 8:
        _abort(transport, CODE_UNSUPPORTED, f"collective strategy caps at 8 qubits, got {n}")
    grid = fibonacci_grid(grid_size) if strategy in ("mle", "collective") else None
    direction, label = bob_estimate(
        strategy,
        values,
        truth.a_z,
        bob_rng(seed),
        grid=grid,
        hemisphere_hint=hemisphere_hint,
        seesaw_config=seesaw_config,
    )
    transport.send(Estimate(x=direction.x, y=direction.y, z=direction.z, strategy=label))
    msg = _recv_or_abort(transport)
    if not isinstance(msg, Bye):
        _abort(transport, CODE_UNEXPECTED_MESSAGE, "expected bye")
    outcomes = tuple(OutcomeRecord(i, v) for i, v in enumerate(values))
    return Transcript(
        config=config,
        outcomes=outcomes,
        estimate=EstimateRecord(direction, label),
        truth=truth,
    )
