"""Rate-compatible LDPC information reconciliation toolkit."""

__version__ = "0.1.0"

from .channel import BscParams, bsc_transmit
from .codes import (
    DegreeDistribution,
    DegreeSequence,
    InvalidEnsembleError,
    ParityCheckCode,
    UnrealizableDegreeSequenceError,
    degree_sequence,
    design_rate,
    peg_construct,
    read_alist,
    read_ensemble,
    syndrome,
    write_alist,
)
from .decoder import DecodeOutcome, DecoderConfig, bp_decode, init_llrs
from .density_evolution import (
    EnsembleChannel,
    QuantizedDensity,
    de_iterate,
    error_probability,
    initial_density,
    stability_bound,
    threshold,
)
from .protocol import (
    Ack,
    AliceSession,
    BobSession,
    Payload,
    ProtocolError,
    ReconciliationReport,
    Sample,
    SessionConfig,
    SyndromeAndEstimate,
    run_session,
)
from .rate_adapt import (
    FrameLayout,
    achievable_range,
    assemble_frame,
    binary_entropy,
    build_layout,
    disassemble_frame,
    effective_rate,
    split_s_p,
    target_rate,
)
