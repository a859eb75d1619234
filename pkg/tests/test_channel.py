import io
import socket
import struct
import threading

import numpy as np
import pytest

from qtri.bloch import fibonacci_grid
from qtri.channel import (
    Bye,
    Estimate,
    Hello,
    MAX_BATCH,
    Outcomes,
    ProtocolError,
    StreamTransport,
    alice_endpoint,
    bob_endpoint,
    decode_frame,
    encode_frame,
    socketpair_transports,
)
from qtri.errors import (
    FrameParseError,
    FrameSizeError,
    SessionError,
    TruncationError,
    UnknownMessageError,
)
from qtri.experiments import run_session
from qtri.protocol import ProtocolConfig, sample_truth, transcript_to_json


def roundtrip(msg):
    return decode_frame(io.BytesIO(encode_frame(msg)))


class TestFraming:
    def test_bye_bytes_exact(self):
        frame = encode_frame(Bye())
        assert frame == b"\x00\x00\x00\x0e" + b'{"type":"bye"}'

    def test_round_trip_all_variants(self):
        messages = [
            Hello(role="alice", n_particles=512),
            Outcomes(seq=0, outcomes=(1, -1, 1)),
            Outcomes(seq=3, outcomes=()),
            Estimate(x=0.0, y=0.0, z=1.0, strategy="mle"),
            ProtocolError(code=2, detail="out of order"),
            Bye(),
        ]
        for msg in messages:
            assert roundtrip(msg) == msg

    def test_round_trip_randomized(self):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            kind = rng.integers(0, 5)
            if kind == 0:
                msg = Hello(role="alice" if rng.random() < 0.5 else "bob",
                            n_particles=int(rng.integers(0, 10_000)))
            elif kind == 1:
                count = int(rng.integers(0, 32))
                msg = Outcomes(seq=int(rng.integers(0, 100)),
                               outcomes=tuple(int(2 * b - 1) for b in rng.integers(0, 2, count)))
            elif kind == 2:
                v = rng.standard_normal(3)
                v /= np.linalg.norm(v)
                msg = Estimate(x=float(v[0]), y=float(v[1]), z=float(v[2]), strategy="frame")
            elif kind == 3:
                msg = ProtocolError(code=int(rng.integers(0, 6)), detail="x" * int(rng.integers(0, 20)))
            else:
                msg = Bye()
            assert roundtrip(msg) == msg

    def test_encoding_deterministic(self):
        msg = Estimate(x=0.1, y=0.0, z=float(np.sqrt(1 - 0.1 ** 2)), strategy="mle")
        assert encode_frame(msg) == encode_frame(msg)

    def test_truncated_header(self):
        with pytest.raises(TruncationError):
            decode_frame(io.BytesIO(b"\x00\x00\x00"))

    def test_truncated_payload(self):
        frame = encode_frame(Bye())
        with pytest.raises(TruncationError):
            decode_frame(io.BytesIO(frame[:-3]))

    def test_oversized_declared_length_rejected_before_read(self):
        header = struct.pack(">I", 2 * 1024 * 1024)

        class HeaderOnly:
            def __init__(self):
                self.reads = 0

            def read(self, n):
                self.reads += 1
                if self.reads == 1:
                    return header
                raise AssertionError("payload read attempted after size check")

        with pytest.raises(FrameSizeError):
            decode_frame(HeaderOnly())

    def test_invalid_json(self):
        payload = b"{not json"
        with pytest.raises(FrameParseError):
            decode_frame(io.BytesIO(struct.pack(">I", len(payload)) + payload))

    def test_unknown_type(self):
        payload = b'{"type":"telegram"}'
        with pytest.raises(UnknownMessageError):
            decode_frame(io.BytesIO(struct.pack(">I", len(payload)) + payload))

    def test_batch_cap_enforced(self):
        with pytest.raises(ValueError):
            encode_frame(Outcomes(seq=0, outcomes=(1,) * (MAX_BATCH + 1)))

    def test_estimate_must_be_unit(self):
        with pytest.raises(ValueError):
            encode_frame(Estimate(x=1.0, y=1.0, z=0.0, strategy="mle"))

    def test_malformed_known_type(self):
        payload = b'{"type":"hello","role":"alice"}'
        with pytest.raises(FrameParseError):
            decode_frame(io.BytesIO(struct.pack(">I", len(payload)) + payload))


def run_session_pair(config, strategy="mle", n_override=None, taps=(None, None)):
    """Run alice/bob endpoints over an in-process socket pair."""
    t_alice, t_bob = socketpair_transports(tap_a=taps[0], tap_b=taps[1])
    truth = sample_truth(config)
    transcripts = {}
    errors = []

    def bob():
        try:
            transcripts["bob"] = bob_endpoint(strategy, t_bob, config.seed, grid_size=500)
        except Exception as exc:  # surfaced in the main thread
            errors.append(exc)
            t_bob.close()  # unblock alice instead of deadlocking her recv

    thread = threading.Thread(target=bob)
    thread.start()
    try:
        transcripts["alice"] = alice_endpoint(truth, config, t_alice)
    finally:
        thread.join(timeout=30)
        t_alice.close()
        t_bob.close()
    if errors:
        raise errors[0]
    return transcripts


class TestEndpoints:
    def test_zero_particle_session(self):
        taps = ([], [])
        transcripts = run_session_pair(
            ProtocolConfig(0, 9),
            taps=(lambda d, b: taps[0].append((d, b)), lambda d, b: taps[1].append((d, b))),
        )
        assert transcripts["alice"].estimate == transcripts["bob"].estimate
        # alice's wire view: sent hello, received estimate, sent bye
        kinds = [d for d, _ in taps[0]]
        assert kinds.count("send") >= 2
        assert len(transcripts["alice"].outcomes) == 0

    def test_matches_in_process_run(self):
        config = ProtocolConfig(96, 1234)
        transcripts = run_session_pair(config, strategy="mle")
        local = run_session(config, "mle", grid=fibonacci_grid(500))
        assert transcripts["alice"].estimate == local.estimate
        assert transcript_to_json(transcripts["alice"]) == transcript_to_json(local)

    def test_byte_stream_reproducible(self):
        logs = []
        for _ in range(2):
            sent = []
            run_session_pair(
                ProtocolConfig(40, 77),
                taps=(lambda d, b, sent=sent: sent.append((d, b)), None),
            )
            logs.append(b"".join(b for d, b in sent if d == "send"))
        assert logs[0] == logs[1]

    def test_batching_large_n(self):
        config = ProtocolConfig(2500, 5)
        sent = []
        transcripts = run_session_pair(
            config, strategy="frame",
            taps=(lambda d, b, sent=sent: sent.append((d, b)), None),
        )
        assert len(transcripts["bob"].outcomes) == 2500
        frames = [b for d, b in sent if d == "send"]
        # hello + 3 outcome batches (1024+1024+452) + bye
        assert len(frames) == 5

    def test_truth_never_on_wire(self):
        config = ProtocolConfig(64, 4242)
        truth = sample_truth(config)
        blobs = []
        run_session_pair(
            config,
            taps=(
                lambda d, b: blobs.append(b),
                lambda d, b: blobs.append(b),
            ),
        )
        log = b"".join(blobs)
        for component in (truth.a_z.x, truth.a_z.y, truth.a_z.z):
            for form in (format(component, ".17g"), repr(component), format(abs(component), ".17g")):
                assert form.encode() not in log

    def test_out_of_order_seq_aborts(self):
        t_alice, t_bob = socketpair_transports()
        result = {}

        def bob():
            with pytest.raises(SessionError) as info:
                bob_endpoint("frame", t_bob, 1)
            result["code"] = info.value.code

        thread = threading.Thread(target=bob)
        thread.start()
        t_alice.send(Hello(role="alice", n_particles=4))
        t_alice.send(Outcomes(seq=1, outcomes=(1, 1, 1, 1)))  # wrong: expected seq 0
        reply = t_alice.recv()
        thread.join(timeout=10)
        assert isinstance(reply, ProtocolError)
        assert result["code"] == reply.code
        t_alice.close()
        t_bob.close()

    def test_unknown_message_mid_session_gets_error_reply(self):
        t_alice, t_bob = socketpair_transports()

        def bob():
            with pytest.raises(SessionError):
                bob_endpoint("frame", t_bob, 1)

        thread = threading.Thread(target=bob)
        thread.start()
        t_alice.send(Hello(role="alice", n_particles=4))
        raw = b'{"type":"carrier-pigeon"}'
        t_alice._writer.write(struct.pack(">I", len(raw)) + raw)
        t_alice._writer.flush()
        reply = t_alice.recv()
        thread.join(timeout=10)
        assert isinstance(reply, ProtocolError)
        assert "unknown" in reply.detail
        t_alice.close()
        t_bob.close()

    def test_tcp_transport_equivalence(self):
        config = ProtocolConfig(96, 31337)
        truth = sample_truth(config)
        in_process = run_session_pair(config, strategy="mle")["alice"]

        server = socket.create_server(("127.0.0.1", 0))
        port = server.getsockname()[1]
        transcripts = {}

        def bob():
            conn, _ = server.accept()
            transport = StreamTransport.from_socket(conn)
            try:
                transcripts["bob"] = bob_endpoint("mle", transport, config.seed, grid_size=500)
            finally:
                transport.close()
                conn.close()

        thread = threading.Thread(target=bob)
        thread.start()
        client = socket.create_connection(("127.0.0.1", port))
        transport = StreamTransport.from_socket(client)
        try:
            tcp_transcript = alice_endpoint(truth, config, transport)
        finally:
            transport.close()
            client.close()
            thread.join(timeout=30)
            server.close()
        assert transcript_to_json(tcp_transcript) == transcript_to_json(in_process)
