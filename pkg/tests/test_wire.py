import socket
import struct
import threading

import numpy as np
import pytest

from ratecon import wire
from ratecon.decoder import DecoderConfig
from ratecon.protocol import (
    Ack,
    Payload,
    Sample,
    SessionConfig,
    SyndromeAndEstimate,
    run_alice_networked,
    run_bob_networked,
)
from ratecon.rate_adapt import ConstantEfficiency


class TestGoldenBytes:
    def test_payload_framing(self):
        msg = Payload(np.array([1, 1, 0, 0, 0, 0, 0, 1], np.uint8))
        assert wire.encode(msg) == b"\x01" + b"\x00\x00\x00\x01" + b"\xc1"

    def test_sample_framing(self):
        msg = Sample(np.array([3, 65535]), np.array([1, 0], np.uint8))
        expected = (
            b"\x02" + b"\x00\x00\x00\x0d"
            + b"\x00\x00\x00\x02"
            + b"\x00\x00\x00\x03" + b"\x00\x00\xff\xff"
            + b"\x80"
        )
        assert wire.encode(msg) == expected

    def test_syndrome_framing(self):
        msg = SyndromeAndEstimate(np.array([1, 0, 1], np.uint8), 0.08)
        body = b"\xa0" + struct.pack(">d", 0.08)
        assert wire.encode(msg) == b"\x03" + struct.pack(">I", len(body)) + body

    def test_ack_framing(self):
        assert wire.encode(Ack(True)) == b"\x04\x00\x00\x00\x01\x01"
        assert wire.encode(Ack(False)) == b"\x04\x00\x00\x00\x01\x00"


class TestRoundTrip:
    def test_all_messages(self):
        rng = np.random.default_rng(0)
        payload_bits, syndrome_bits = 37, 19
        messages = [
            Payload(rng.integers(0, 2, payload_bits).astype(np.uint8)),
            Sample(np.sort(rng.choice(payload_bits, 5, replace=False)),
                   rng.integers(0, 2, 5).astype(np.uint8)),
            SyndromeAndEstimate(rng.integers(0, 2, syndrome_bits).astype(np.uint8),
                                0.1234),
            Ack(True),
        ]
        for msg in messages:
            blob = wire.encode(msg)
            tag, (length,) = blob[0], struct.unpack(">I", blob[1:5])
            assert length == len(blob) - 5
            again = wire.decode(tag, blob[5:], payload_bits, syndrome_bits)
            assert type(again) is type(msg)
            for name in msg.__dataclass_fields__:
                a, b = getattr(msg, name), getattr(again, name)
                if isinstance(a, np.ndarray):
                    assert np.array_equal(a, b)
                else:
                    assert a == pytest.approx(b)

    def test_bit_packing_msb_first(self):
        assert wire.pack_bits([1, 0, 0, 0, 0, 0, 0, 0]) == b"\x80"
        assert wire.pack_bits([0, 0, 0, 0, 0, 0, 0, 1]) == b"\x01"
        assert np.array_equal(wire.unpack_bits(b"\x80", 3), [1, 0, 0])

    def test_truncated_bodies_rejected(self):
        with pytest.raises(wire.WireError):
            wire.decode(wire.TAG_SAMPLE, b"\x00\x00", 8, 8)
        with pytest.raises(wire.WireError):
            wire.decode(wire.TAG_SYNDROME, b"\x00", 8, 8)
        with pytest.raises(wire.WireError):
            wire.decode(wire.TAG_ACK, b"", 8, 8)
        with pytest.raises(wire.WireError):
            wire.decode(0x09, b"", 8, 8)

    def test_unpack_length_checked(self):
        with pytest.raises(wire.WireError):
            wire.unpack_bits(b"\x00\x00", 3)


class TestNetworkedSession:
    def test_socketpair_end_to_end(self, code_1000):
        config = SessionConfig(
            code=code_1000, delta=0.1, t=64,
            efficiency_model=ConstantEfficiency(1.2),
            layout_seed=5, decoder=DecoderConfig(max_iterations=150),
        )
        x = np.random.default_rng(1).integers(
            0, 2, config.message_length).astype(np.uint8)
        a_sock, b_sock = socket.socketpair()
        results = {}

        def bob():
            results["bob"], results["recovered"] = run_bob_networked(
                b_sock, config, sample_seed=2)

        thread = threading.Thread(target=bob)
        thread.start()
        results["alice"] = run_alice_networked(a_sock, config, x, fill_seed=3)
        thread.join(timeout=30)
        a_sock.close()
        b_sock.close()

        assert results["alice"]["success"]
        assert results["bob"]["success"]
        # noiseless byte stream: Bob recovers the exact payload
        assert np.array_equal(results["recovered"], x)
        assert results["alice"]["disclosed_bits"] == code_1000.m + 64
