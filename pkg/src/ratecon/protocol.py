"""Two-party reconciliation sessions.

One round trip plus acknowledge: the initiator (Alice) sends her string,
the responder (Bob) returns a random sample for channel estimation, Alice
answers with the syndrome of her rate-adapted frame plus the estimate, and
Bob acknowledges after decoding.  Sessions are strict state machines; any
out-of-order message raises.  All shared randomness (frame layout) derives
from pre-agreed config, never from the wire.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import prng, rate_adapt
from .channel import BscParams, bsc_transmit
from .codes import ParityCheckCode, syndrome
from .decoder import DecoderConfig, bp_decode, init_llrs
from .rate_adapt import (
    assemble_frame,
    binary_entropy,
    build_layout,
    disassemble_frame,
    target_rate,
)

logger = logging.getLogger(__name__)

DATA_MODE = "data"
KEY_MODE = "key"

# stream tags for deriving independent per-session draws from one seed
_TAG_LAYOUT = 0x4C41594F
_TAG_FILL = 0x46494C4C
_TAG_SAMPLE = 0x53414D50


class ProtocolError(RuntimeError):
    """Message out of order or inconsistent with the session config."""


@dataclass(frozen=True)
class Payload:
    bits: np.ndarray


@dataclass(frozen=True)
class Sample:
    positions: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class SyndromeAndEstimate:
    syndrome: np.ndarray
    crossover_estimate: float


@dataclass(frozen=True)
class Ack:
    success: bool


@dataclass(frozen=True)
class SessionConfig:
    """Pre-agreed parameters shared by both parties.

    The layout seed is part of the configuration (synchronized generator);
    a per-session nonce is mixed in so repeated sessions never reuse a
    layout.  `forced_rate` bypasses the estimate-driven rate choice (used
    by sweeps that characterize the code at a pinned rate).
    """

    code: ParityCheckCode
    delta: float
    t: int
    efficiency_model: object = None
    layout_seed: int = 0
    mode: str = DATA_MODE
    session_nonce: int = 0
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    forced_rate: Optional[float] = None

    def __post_init__(self):
        if self.mode not in (DATA_MODE, KEY_MODE):
            raise ValueError(f"mode must be '{DATA_MODE}' or '{KEY_MODE}'")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"delta = {self.delta} outside [0, 1)")
        if self.message_length < 1:
            raise ValueError("empty message: delta leaves no payload")
        if self.mode == DATA_MODE and not 1 <= self.t <= self.payload_length:
            raise ValueError(f"t = {self.t} outside [1, {self.payload_length}]")
        if self.mode == KEY_MODE and not 1 <= self.t <= self.message_length - 1:
            raise ValueError(f"t = {self.t} outside [1, {self.message_length - 1}]")
        if self.efficiency_model is None and self.forced_rate is None:
            object.__setattr__(
                self, "efficiency_model", rate_adapt.benchmark_efficiency(self.delta)
            )

    @property
    def n(self) -> int:
        return self.code.n

    @property
    def d(self) -> int:
        return int(math.floor(self.delta * self.n))

    @property
    def payload_length(self) -> int:
        return self.n - self.d

    @property
    def message_length(self) -> int:
        """Bits Alice transmits in step 1 (payload, plus the sacrificial
        sample bits in key mode)."""
        return self.payload_length + (self.t if self.mode == KEY_MODE else 0)

    def effective_seed(self) -> int:
        return prng.derive_seed(self.layout_seed, self.session_nonce ^ _TAG_LAYOUT)


def estimate_crossover(sample_values, own_values, t: int) -> float:
    """Mismatch fraction between the sampled bits and the local bits,
    clamped away from 0 and 0.5 to keep the rate choice finite."""
    if t < 1:
        raise ProtocolError("cannot estimate crossover from an empty sample")
    mismatches = int(np.count_nonzero(
        np.asarray(sample_values, np.uint8) ^ np.asarray(own_values, np.uint8)
    ))
    lo, hi = 1.0 / (2 * t), 0.5 - 1.0 / (2 * t)
    return min(max(mismatches / t, lo), hi)


def _choose_rate(config: SessionConfig, p_est: float):
    """Rate, integer split and layout both parties derive identically."""
    budget = rate_adapt.RateBudget(config.n, config.d, config.code.design_rate())
    if config.forced_rate is not None:
        rate, clamped = budget.clamp(config.forced_rate)
    else:
        rate, clamped = budget.clamp(target_rate(p_est, config.efficiency_model))
    if clamped:
        logger.info("requested rate clamped into %s", budget.achievable_range())
    s, p = budget.split(rate)
    layout = build_layout(config.effective_seed(), config.n, config.d, s)
    return rate, clamped, s, p, layout


class AliceSession:
    """Initiator state machine: payload -> (sample) -> syndrome -> (ack)."""

    def __init__(self, config: SessionConfig, x, fill_seed: int = 0):
        bits = np.asarray(x, dtype=np.uint8)
        if bits.size != config.message_length:
            raise ProtocolError(
                f"message length {bits.size} != required {config.message_length}"
            )
        self.config = config
        self._x = bits
        self._fill_seed = prng.derive_seed(fill_seed, _TAG_FILL)
        self._state = "start"
        self.p_est: Optional[float] = None
        self.rate: Optional[float] = None
        self.rate_clamped = False
        self.s = self.p = 0
        self.payload: Optional[np.ndarray] = None
        self.ack: Optional[Ack] = None

    def start(self) -> Payload:
        if self._state != "start":
            raise ProtocolError(f"start() in state {self._state}")
        self._state = "await_sample"
        return Payload(self._x.copy())

    def handle_sample(self, msg) -> SyndromeAndEstimate:
        if self._state != "await_sample" or not isinstance(msg, Sample):
            raise ProtocolError(f"unexpected {type(msg).__name__} in state {self._state}")
        positions = np.asarray(msg.positions, dtype=np.int64)
        if positions.size != self.config.t:
            raise ProtocolError("sample size differs from configured t")
        if positions.size != len(np.unique(positions)):
            raise ProtocolError("sample positions repeat")
        if positions.min(initial=0) < 0 or positions.max(initial=-1) >= self._x.size:
            raise ProtocolError("sample position out of range")
        self.p_est = estimate_crossover(msg.values, self._x[positions], self.config.t)

        if self.config.mode == KEY_MODE:
            keep = np.ones(self._x.size, dtype=bool)
            keep[positions] = False
            self.payload = self._x[keep]
        else:
            self.payload = self._x
        self.rate, self.rate_clamped, self.s, self.p, layout = _choose_rate(
            self.config, self.p_est
        )
        fill = prng.bits(self._fill_seed, np.arange(layout.p, dtype=np.uint64))
        frame = assemble_frame(self.payload, layout, fill)
        self._state = "await_ack"
        return SyndromeAndEstimate(syndrome(self.config.code, frame), self.p_est)

    def handle_ack(self, msg) -> None:
        if self._state != "await_ack" or not isinstance(msg, Ack):
            raise ProtocolError(f"unexpected {type(msg).__name__} in state {self._state}")
        self.ack = msg
        self._state = "done"

    @property
    def final_key(self) -> Optional[np.ndarray]:
        """Key-mode output: the payload that survived the sample discard."""
        return self.payload if self._state == "done" else None


class BobSession:
    """Responder state machine: (payload) -> sample -> (syndrome) -> ack."""

    def __init__(self, config: SessionConfig, sample_seed: int = 0):
        self.config = config
        self._sample_seed = prng.derive_seed(sample_seed, _TAG_SAMPLE)
        self._state = "await_payload"
        self._y: Optional[np.ndarray] = None
        self._sample_positions: Optional[np.ndarray] = None
        self.p_est: Optional[float] = None
        self.rate: Optional[float] = None
        self.s = self.p = 0
        self.recovered: Optional[np.ndarray] = None
        self.iterations = 0

    def handle_payload(self, msg) -> Sample:
        if self._state != "await_payload" or not isinstance(msg, Payload):
            raise ProtocolError(f"unexpected {type(msg).__name__} in state {self._state}")
        y = np.asarray(msg.bits, dtype=np.uint8)
        if y.size != self.config.message_length:
            raise ProtocolError(
                f"payload length {y.size} != required {self.config.message_length}"
            )
        self._y = y
        order = prng.permutation(self._sample_seed, y.size)
        self._sample_positions = np.sort(order[:self.config.t])
        self._state = "await_syndrome"
        return Sample(self._sample_positions.copy(), y[self._sample_positions].copy())

    def handle_syndrome(self, msg) -> Ack:
        if self._state != "await_syndrome" or not isinstance(msg, SyndromeAndEstimate):
            raise ProtocolError(f"unexpected {type(msg).__name__} in state {self._state}")
        target = np.asarray(msg.syndrome, dtype=np.uint8)
        if target.size != self.config.code.m:
            raise ProtocolError("syndrome length mismatch")
        self.p_est = float(msg.crossover_estimate)
        if not 0.0 < self.p_est < 0.5:
            raise ProtocolError(f"crossover estimate {self.p_est} outside (0, 0.5)")

        if self.config.mode == KEY_MODE:
            keep = np.ones(self._y.size, dtype=bool)
            keep[self._sample_positions] = False
            payload = self._y[keep]
        else:
            payload = self._y
        self.rate, _, self.s, self.p, layout = _choose_rate(self.config, self.p_est)
        frame = assemble_frame(payload, layout, np.zeros(layout.p, dtype=np.uint8))
        llrs = init_llrs(layout.position_classes(), self.p_est, frame, self.config.decoder)
        outcome = bp_decode(self.config.code, llrs, target, self.config.decoder)
        self.iterations = outcome.iterations_used
        self._state = "done"
        if outcome.converged:
            self.recovered = disassemble_frame(outcome.word, layout)
            return Ack(True)
        return Ack(False)

    @property
    def final_key(self) -> Optional[np.ndarray]:
        return self.recovered


@dataclass
class ReconciliationReport:
    """Outcome and accounting of one session."""

    success: bool
    mode: str
    n: int
    m: int
    t: int
    p_est: float
    rate: float
    rate_clamped: bool
    s: int
    p: int
    disclosed_bits: int
    efficiency: Optional[float]
    no_noise: bool
    iterations: int
    residual_mismatch: Optional[int] = None
    p_true: Optional[float] = None

    def to_json(self) -> str:
        payload = {k: v for k, v in self.__dict__.items()}
        return json.dumps(payload, sort_keys=True)


def realized_efficiency(code: ParityCheckCode, s: int, p: int, crossover: float):
    """Disclosure ratio (1 - R_effective) / h(p); None when h(p) = 0."""
    h = binary_entropy(crossover)
    if h == 0.0:
        return None
    r_eff = (code.k - s) / (code.n - p - s)
    return (1.0 - r_eff) / h


def run_session(
    x,
    channel_params: BscParams,
    config: SessionConfig,
    sim_seed: int = 0,
) -> ReconciliationReport:
    """Drive a full session over a simulated BSC applied to the payload only.

    The report uses the true channel parameter for the efficiency figure
    (falling back to the estimate is the caller's concern outside
    simulation) and counts the syndrome plus the sample as disclosed.
    """
    alice = AliceSession(config, x, fill_seed=prng.derive_seed(sim_seed, 1))
    bob = BobSession(config, sample_seed=prng.derive_seed(sim_seed, 2))

    payload_msg = alice.start()
    noisy = bsc_transmit(payload_msg.bits, channel_params)
    sample = bob.handle_payload(Payload(noisy))
    syn_msg = alice.handle_sample(sample)
    ack = bob.handle_syndrome(syn_msg)
    alice.handle_ack(ack)

    residual = None
    if ack.success and bob.recovered is not None:
        residual = int(np.count_nonzero(bob.recovered ^ alice.payload))
    p_true = channel_params.crossover
    efficiency = None if p_true == 0.0 else realized_efficiency(
        config.code, alice.s, alice.p, p_true
    )
    if p_true == 0.0:
        logger.info("no-noise session: efficiency undefined")
    return ReconciliationReport(
        success=bool(ack.success),
        mode=config.mode,
        n=config.n,
        m=config.code.m,
        t=config.t,
        p_est=alice.p_est,
        rate=alice.rate,
        rate_clamped=alice.rate_clamped,
        s=alice.s,
        p=alice.p,
        disclosed_bits=config.code.m + config.t,
        efficiency=efficiency,
        no_noise=p_true == 0.0,
        iterations=bob.iterations,
        residual_mismatch=residual,
        p_true=p_true,
    )


def run_alice_networked(stream, config: SessionConfig, x, fill_seed: int = 0) -> dict:
    """Drive the initiator over a byte stream (socket-like object)."""
    from . import wire

    alice = AliceSession(config, x, fill_seed)
    wire.write_message(stream, alice.start())
    sample = wire.read_message(stream, config.message_length, config.code.m)
    wire.write_message(stream, alice.handle_sample(sample))
    ack = wire.read_message(stream, config.message_length, config.code.m)
    alice.handle_ack(ack)
    return {
        "success": bool(alice.ack.success),
        "p_est": alice.p_est,
        "rate": alice.rate,
        "s": alice.s,
        "p": alice.p,
        "disclosed_bits": config.code.m + config.t,
    }


def run_bob_networked(stream, config: SessionConfig, sample_seed: int = 0,
                      channel: Optional[BscParams] = None):
    """Drive the responder over a byte stream; returns (report dict, recovered).

    The byte stream itself is error-free; an optional BSC applied to the
    received payload stands in for the noisy distribution channel when two
    networked parties simulate a session."""
    from . import wire

    bob = BobSession(config, sample_seed)
    payload = wire.read_message(stream, config.message_length, config.code.m)
    if channel is not None:
        payload = Payload(bsc_transmit(payload.bits, channel))
    wire.write_message(stream, bob.handle_payload(payload))
    syn_msg = wire.read_message(stream, config.message_length, config.code.m)
    ack = bob.handle_syndrome(syn_msg)
    wire.write_message(stream, ack)
    report = {
        "success": bool(ack.success),
        "p_est": bob.p_est,
        "rate": bob.rate,
        "s": bob.s,
        "p": bob.p,
        "disclosed_bits": config.code.m + config.t,
        "iterations": bob.iterations,
    }
    return report, bob.recovered
