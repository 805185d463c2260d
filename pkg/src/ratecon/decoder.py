"""Belief-propagation syndrome decoding over a Tanner graph.

Flooding-schedule sum-product, modified for syndrome decoding (each check
node's sign product is flipped when its target syndrome bit is 1) and for
punctured/shortened initialization: punctured positions start at LLR 0,
shortened positions at a large finite magnitude standing in for certainty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PAYLOAD, PUNCTURED, SHORTENED = 0, 1, 2

CONVERGED = "converged"
EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class DecoderConfig:
    max_iterations: int = 2000
    llr_clamp: float = 32.0      # magnitude bound applied to all messages
    shortened_llr: float = 64.0  # finite stand-in for certainty
    min_sum: bool = False        # opt-in approximation; sum-product otherwise
    collect_trace: bool = False  # per-iteration unsatisfied-check counts

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.shortened_llr < self.llr_clamp:
            raise ValueError("shortened_llr must be >= llr_clamp")


@dataclass
class DecodeOutcome:
    status: str
    word: np.ndarray
    iterations_used: int
    trace: list[int] | None = None

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def init_llrs(position_classes, p_est, received, config=DecoderConfig()) -> np.ndarray:
    """Channel LLRs for a frame, positive sign meaning bit 0.

    Payload positions get +-log((1-p)/p) from the received bit, punctured
    positions exactly 0, shortened positions +-shortened_llr from their
    known value (carried in `received`).
    """
    if not 0.0 < p_est < 0.5:
        raise ValueError(f"crossover estimate {p_est} outside (0, 0.5)")
    classes = np.asarray(position_classes)
    bits = np.asarray(received, dtype=np.uint8)
    if classes.shape != bits.shape:
        raise ValueError("position classes and received frame differ in length")
    sign = 1.0 - 2.0 * bits
    llr = sign * np.log((1.0 - p_est) / p_est)
    llr[classes == PUNCTURED] = 0.0
    short = classes == SHORTENED
    llr[short] = sign[short] * config.shortened_llr
    return llr


def _build_views(code):
    """Edge bookkeeping for vectorized flooding updates.

    Messages live in a (m, max check degree) matrix in check order; masks
    mark real edges, index maps convert to/from the (n, max symbol degree)
    symbol-order view.
    """
    dc = code.check_degrees()
    dv = code.symbol_degrees()
    dc_max, dv_max = int(dc.max()), int(dv.max())
    edge_chk = np.repeat(np.arange(code.m), dc)
    edge_sym = code.chk_idx
    slot_c = np.concatenate([np.arange(d) for d in dc])
    c_mask = np.zeros((code.m, dc_max), dtype=bool)
    c_mask[edge_chk, slot_c] = True

    to_sym_order = np.argsort(edge_sym, kind="stable")
    slot_v = np.concatenate([np.arange(d) for d in dv])
    v_mask = np.zeros((code.n, dv_max), dtype=bool)
    v_mask[edge_sym[to_sym_order], slot_v] = True
    to_chk_order = np.argsort(to_sym_order, kind="stable")
    return edge_chk, edge_sym, c_mask, v_mask, to_sym_order, to_chk_order


def bp_decode(code, llrs, target_syndrome, config=DecoderConfig()) -> DecodeOutcome:
    """Decode toward a target syndrome; early exit on the first satisfying word."""
    llrs = np.asarray(llrs, dtype=np.float64)
    syn = np.asarray(target_syndrome, dtype=np.uint8)
    if llrs.size != code.n:
        raise ValueError(f"LLR vector length {llrs.size} != n={code.n}")
    if syn.size != code.m:
        raise ValueError(f"syndrome length {syn.size} != m={code.m}")

    edge_chk, edge_sym, c_mask, v_mask, to_sym_order, to_chk_order = code.decoder_views
    m, n = code.m, code.n
    dc_max = c_mask.shape[1]
    clamp = config.llr_clamp
    sign_adj = (1.0 - 2.0 * syn)[:, None]
    atanh_lim = 1.0 - 1e-15

    v2c = np.zeros((m, dc_max))
    v2c[c_mask] = np.clip(llrs[edge_sym], -clamp, clamp)
    c2v_sym = np.zeros_like(v_mask, dtype=np.float64)
    trace: list[int] | None = [] if config.collect_trace else None
    hard = (llrs < 0).astype(np.uint8)

    for iteration in range(1, config.max_iterations + 1):
        if config.min_sum:
            work = np.where(c_mask, v2c, np.inf)
            c2v = np.empty((m, dc_max))
            for k in range(dc_max):
                rest = np.delete(work, k, axis=1)
                c2v[:, k] = np.prod(np.sign(rest), axis=1) * np.abs(rest).min(axis=1)
        else:
            tnh = np.ones((m, dc_max))
            tnh[c_mask] = np.tanh(v2c[c_mask] / 2.0)
            c2v = np.empty((m, dc_max))
            for k in range(dc_max):
                c2v[:, k] = np.prod(np.delete(tnh, k, axis=1), axis=1)
            c2v = 2.0 * np.arctanh(np.clip(c2v, -atanh_lim, atanh_lim))
        c2v = np.clip(c2v * sign_adj, -clamp, clamp)

        c2v_sym[v_mask] = c2v[c_mask][to_sym_order]
        marginal = llrs + c2v_sym.sum(axis=1)
        hard = (marginal < 0).astype(np.uint8)

        residual = np.zeros(m, dtype=np.uint8)
        np.bitwise_xor.at(residual, edge_chk, hard[edge_sym])
        unsatisfied = int(np.count_nonzero(residual ^ syn))
        if trace is not None:
            trace.append(unsatisfied)
        if unsatisfied == 0:
            return DecodeOutcome(CONVERGED, hard, iteration, trace)

        extrinsic = (marginal[:, None] - c2v_sym)[v_mask]
        v2c[c_mask] = np.clip(extrinsic[to_chk_order], -clamp, clamp)

    return DecodeOutcome(EXHAUSTED, hard, config.max_iterations, trace)


def write_trace_csv(outcome: DecodeOutcome, path) -> None:
    if outcome.trace is None:
        raise ValueError("decode ran without collect_trace")
    with open(path, "w") as fh:
        fh.write("iteration,unsatisfied_checks\n")
        for i, count in enumerate(outcome.trace, 1):
            fh.write(f"{i},{count}\n")
