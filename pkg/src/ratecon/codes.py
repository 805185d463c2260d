"""LDPC ensembles, Tanner-graph realization and syndrome computation.

An ensemble is given by edge-perspective degree polynomials; a concrete
code is realized from it by a progressive edge-growth construction that
honors per-check target degrees.  Codes are stored as immutable sorted
adjacency (CSR both directions) and can be round-tripped through the
alist text format.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numba import njit

from . import prng

logger = logging.getLogger(__name__)

# Exact GF(2) rank is verified at construction up to this symbol count;
# beyond it elimination cost/memory is prohibitive and full rank is assumed
# (logged, and reported as unverified by the CLI).
RANK_VERIFY_LIMIT = 20_000


class InvalidEnsembleError(ValueError):
    """Degree polynomials that do not describe a usable ensemble."""


class UnrealizableDegreeSequenceError(ValueError):
    """A degree sequence that cannot be realized as a simple bipartite graph."""


@dataclass(frozen=True)
class DegreeDistribution:
    """Edge-perspective degree polynomials of an LDPC ensemble.

    ``lambda_coeffs[i]`` is the fraction of edges incident to symbol nodes
    of degree i, ``rho_coeffs[j]`` the fraction incident to check nodes of
    degree j.  Both must sum to one.
    """

    lambda_coeffs: dict[int, float]
    rho_coeffs: dict[int, float]

    def __post_init__(self):
        for name, coeffs in (("lambda", self.lambda_coeffs), ("rho", self.rho_coeffs)):
            if not coeffs:
                raise InvalidEnsembleError(f"{name} polynomial is empty")
            for deg, frac in coeffs.items():
                if not (isinstance(deg, int) and deg >= 2):
                    raise InvalidEnsembleError(f"{name} degree {deg!r} must be an int >= 2")
                if not 0.0 <= frac <= 1.0:
                    raise InvalidEnsembleError(f"{name}_{deg} = {frac} outside [0, 1]")
            total = sum(coeffs.values())
            if abs(total - 1.0) > 1e-9:
                raise InvalidEnsembleError(f"{name} coefficients sum to {total}, not 1")

    @classmethod
    def regular(cls, symbol_degree: int, check_degree: int) -> "DegreeDistribution":
        return cls({symbol_degree: 1.0}, {check_degree: 1.0})

    @property
    def max_symbol_degree(self) -> int:
        return max(self.lambda_coeffs)

    @property
    def max_check_degree(self) -> int:
        return max(self.rho_coeffs)

    @property
    def lambda2(self) -> float:
        """Fraction of edges on degree-2 symbols (= derivative of the symbol
        polynomial at zero); the quantity bounded by the stability condition."""
        return self.lambda_coeffs.get(2, 0.0)

    @property
    def rho_derivative_at_one(self) -> float:
        return sum(frac * (deg - 1) for deg, frac in self.rho_coeffs.items())


def design_rate(dist: DegreeDistribution) -> float:
    """Asymptotic rate of the ensemble: 1 - (sum rho_j/j)/(sum lam_i/i).

    The two sums are proportional to the check and symbol node counts.
    Returns the raw value; callers that need a realizable code must check
    it lies in (0, 1) (degree_sequence does).
    """
    sym = sum(frac / deg for deg, frac in dist.lambda_coeffs.items())
    chk = sum(frac / deg for deg, frac in dist.rho_coeffs.items())
    return 1.0 - chk / sym


def node_counts(edge_coeffs: dict[int, float], count: int) -> dict[int, int]:
    """Convert edge-perspective fractions to integer node counts.

    Node-perspective fractions are (frac/deg)/sum(frac/deg); integer counts
    use largest-remainder rounding so each bucket is within one node of its
    exact share.  Raises if a declared degree would receive no node.
    """
    z = sum(frac / deg for deg, frac in edge_coeffs.items())
    exact = {deg: (frac / deg) / z * count for deg, frac in edge_coeffs.items()}
    counts = {deg: int(math.floor(v)) for deg, v in exact.items()}
    leftover = count - sum(counts.values())
    # distribute by descending remainder, ties to the smaller degree
    order = sorted(exact, key=lambda d: (-(exact[d] - counts[d]), d))
    for deg in order[:leftover]:
        counts[deg] += 1
    for deg, c in counts.items():
        if c == 0:
            raise UnrealizableDegreeSequenceError(
                f"{count} nodes are too few to realize declared degree {deg}"
            )
    return counts


@dataclass(frozen=True)
class DegreeSequence:
    """Per-node target degrees for a code realization, edge-balanced."""

    symbol_degrees: np.ndarray  # ascending, one entry per symbol node
    check_degrees: np.ndarray   # ascending by node index, one per check

    @property
    def n(self) -> int:
        return len(self.symbol_degrees)

    @property
    def m(self) -> int:
        return len(self.check_degrees)

    @property
    def edge_count(self) -> int:
        return int(self.symbol_degrees.sum())


def degree_sequence(dist: DegreeDistribution, n: int) -> DegreeSequence:
    """Integer degree assignment for n symbols and round(n*(1-R0)) checks.

    The symbol side follows the ensemble exactly (largest-remainder node
    counts); the check side absorbs all rounding slack, first by moving
    nodes into/out of the highest declared check-degree bucket, then by
    +/-1 adjustments of individual check targets until the edge counts of
    the two sides agree.
    """
    r0 = design_rate(dist)
    if not 0.0 < r0 < 1.0:
        raise InvalidEnsembleError(f"design rate {r0:.4f} outside (0, 1)")
    if n < dist.max_symbol_degree:
        raise UnrealizableDegreeSequenceError(
            f"n={n} smaller than the maximum symbol degree {dist.max_symbol_degree}"
        )

    sym_counts = node_counts(dist.lambda_coeffs, n)
    symbol_degrees = np.repeat(
        sorted(sym_counts), [sym_counts[d] for d in sorted(sym_counts)]
    ).astype(np.int32)
    edges = int(symbol_degrees.sum())

    m = int(math.floor(n * (1.0 - r0) + 0.5))
    if m < 1:
        raise UnrealizableDegreeSequenceError(f"n={n} yields no check nodes")
    chk_counts = node_counts(dist.rho_coeffs, m)

    # edge balancing: trade nodes between the top bucket and the next one down
    top = dist.max_check_degree
    lower = sorted(d for d in chk_counts if d != top)
    chk_edges = sum(d * c for d, c in chk_counts.items())
    while lower:
        src = lower[-1]
        step = top - src
        if chk_edges + step <= edges and chk_counts[src] > 1:
            chk_counts[src] -= 1
            chk_counts[top] += 1
            chk_edges += step
        elif chk_edges - step >= edges and chk_counts[top] > 1:
            chk_counts[top] -= 1
            chk_counts[src] += 1
            chk_edges -= step
        else:
            break

    check_degrees = np.repeat(
        sorted(chk_counts), [chk_counts[d] for d in sorted(chk_counts)]
    ).astype(np.int32)
    # residual imbalance: bump/trim individual targets, highest indices first
    residual = edges - int(check_degrees.sum())
    if abs(residual) >= m * top:
        raise UnrealizableDegreeSequenceError("degree sequence cannot be balanced")
    idx = m - 1
    while residual != 0:
        step = 1 if residual > 0 else -1
        if check_degrees[idx] + step < 1:
            raise UnrealizableDegreeSequenceError("degree sequence cannot be balanced")
        check_degrees[idx] += step
        residual -= step
        idx = idx - 1 if idx > 0 else m - 1
    return DegreeSequence(symbol_degrees, check_degrees)


# ---------------------------------------------------------------------------
# progressive edge growth


@njit(cache=True)
def _peg_fill(n, m, sym_deg, chk_target, order, sym_adj, chk_adj):  # pragma: no cover
    """Place all edges; returns (sym_fill, chk_fill, status), status<0 on failure.

    First edge of a symbol: the check with the lowest remaining capacity
    (target - fill), i.e. the most nearly full one; this drains partial
    checks early and keeps untouched checks in reserve for the endgame.
    Later edges: BFS over the current graph from the symbol; prefer checks
    not reached at all, else the deepest reached layer.  All ties break by
    lowest current fill, then lowest index.
    """
    sym_fill = np.zeros(n, np.int32)
    chk_fill = np.zeros(m, np.int32)
    dist = np.full(m, -1, np.int32)
    seen_s = np.full(n, -1, np.int64)
    seen_c = np.full(m, -1, np.int64)
    qc = np.empty(m, np.int32)
    qc2 = np.empty(m, np.int32)
    qs = np.empty(n, np.int32)
    epoch = 0
    for oi in range(n):
        v = order[oi]
        for e in range(sym_deg[v]):
            best = -1
            if e == 0:
                best_deficit = 1 << 30
                best_fill = 1 << 30
                for c in range(m):
                    f = chk_fill[c]
                    if f < chk_target[c]:
                        deficit = chk_target[c] - f
                        if deficit < best_deficit or (
                            deficit == best_deficit and f < best_fill
                        ):
                            best_deficit = deficit
                            best_fill = f
                            best = c
            else:
                epoch += 1
                nq = 0
                for i in range(sym_fill[v]):
                    c = sym_adj[v, i]
                    seen_c[c] = epoch
                    dist[c] = 0
                    qc[nq] = c
                    nq += 1
                seen_s[v] = epoch
                depth = 0
                while nq > 0:
                    ns = 0
                    for i in range(nq):
                        c = qc[i]
                        for j in range(chk_fill[c]):
                            s = chk_adj[c, j]
                            if seen_s[s] != epoch:
                                seen_s[s] = epoch
                                qs[ns] = s
                                ns += 1
                    depth += 1
                    nq2 = 0
                    for i in range(ns):
                        s = qs[i]
                        for j in range(sym_fill[s]):
                            c = sym_adj[s, j]
                            if seen_c[c] != epoch:
                                seen_c[c] = epoch
                                dist[c] = depth
                                qc2[nq2] = c
                                nq2 += 1
                    for i in range(nq2):
                        qc[i] = qc2[i]
                    nq = nq2
                best_fill = 1 << 30
                for c in range(m):
                    if (
                        seen_c[c] != epoch
                        and chk_fill[c] < chk_target[c]
                        and chk_fill[c] < best_fill
                    ):
                        best_fill = chk_fill[c]
                        best = c
                if best < 0:
                    best_depth = 0
                    best_fill = 1 << 30
                    for c in range(m):
                        if seen_c[c] == epoch and dist[c] >= 1 and chk_fill[c] < chk_target[c]:
                            d = dist[c]
                            f = chk_fill[c]
                            if d > best_depth or (d == best_depth and f < best_fill):
                                best_depth = d
                                best_fill = f
                                best = c
            if best < 0:
                return sym_fill, chk_fill, -1
            chk_adj[best, chk_fill[best]] = v
            chk_fill[best] += 1
            sym_adj[v, sym_fill[v]] = best
            sym_fill[v] += 1
    return sym_fill, chk_fill, 0


@njit(cache=True)
def _girth_scan(n, sptr, sidx, cptr, cidx, m):  # pragma: no cover
    """Shortest cycle length via truncated BFS from every symbol; 0 if acyclic."""
    best = 1 << 30
    dist_s = np.empty(n, np.int32)
    dist_c = np.empty(m, np.int32)
    ep_s = np.full(n, -1, np.int64)
    ep_c = np.full(m, -1, np.int64)
    par_s = np.empty(n, np.int32)
    par_c = np.empty(m, np.int32)
    qs = np.empty(n, np.int32)
    qc = np.empty(m, np.int32)
    qc2 = np.empty(m, np.int32)
    for v in range(n):
        if best == 4:
            break
        ep = v
        ep_s[v] = ep
        dist_s[v] = 0
        nq = 0
        cand = 1 << 30
        for i in range(sptr[v], sptr[v + 1]):
            c = sidx[i]
            ep_c[c] = ep
            dist_c[c] = 1
            par_c[c] = v
            qc[nq] = c
            nq += 1
        d_chk = 1
        while nq > 0 and cand == 1 << 30 and 2 * d_chk < best:
            ns = 0
            for i in range(nq):
                c = qc[i]
                for j in range(cptr[c], cptr[c + 1]):
                    s = cidx[j]
                    if s == par_c[c]:
                        continue
                    if ep_s[s] == ep:
                        length = dist_c[c] + dist_s[s] + 1
                        if length < cand:
                            cand = length
                    else:
                        ep_s[s] = ep
                        dist_s[s] = d_chk + 1
                        par_s[s] = c
                        qs[ns] = s
                        ns += 1
            nq2 = 0
            for i in range(ns):
                s = qs[i]
                for j in range(sptr[s], sptr[s + 1]):
                    c = sidx[j]
                    if c == par_s[s]:
                        continue
                    if ep_c[c] == ep:
                        length = dist_s[s] + dist_c[c] + 1
                        if length < cand:
                            cand = length
                    else:
                        ep_c[c] = ep
                        dist_c[c] = d_chk + 2
                        par_c[c] = s
                        qc2[nq2] = c
                        nq2 += 1
            for i in range(nq2):
                qc[i] = qc2[i]
            nq = nq2
            d_chk += 2
        if cand < best:
            best = cand
    if best == 1 << 30:
        return 0
    return best


@njit(cache=True)
def _gf2_rank_packed(rows, nwords):  # pragma: no cover
    """Rank of a bit-packed GF(2) matrix (one uint64 row per matrix row)."""
    m = rows.shape[0]
    rank = 0
    for col in range(nwords * 64):
        w = col >> 6
        bit = np.uint64(1) << np.uint64(col & 63)
        pivot = -1
        for r in range(rank, m):
            if rows[r, w] & bit:
                pivot = r
                break
        if pivot < 0:
            continue
        if pivot != rank:
            for k in range(nwords):
                tmp = rows[pivot, k]
                rows[pivot, k] = rows[rank, k]
                rows[rank, k] = tmp
        for r in range(m):
            if r != rank and (rows[r, w] & bit):
                for k in range(nwords):
                    rows[r, k] ^= rows[rank, k]
        rank += 1
        if rank == m:
            break
    return rank


class ParityCheckCode:
    """A realized sparse parity-check code.

    Immutable after construction: adjacency is stored sorted in CSR form in
    both directions and never mutated, so one code object can be shared by
    concurrent decoders.
    """

    def __init__(self, n, m, chk_ptr, chk_idx, rank=None):
        self.n = int(n)
        self.m = int(m)
        self.chk_ptr = chk_ptr
        self.chk_idx = chk_idx
        counts = np.bincount(chk_idx, minlength=n)
        order = np.argsort(chk_idx, kind="stable")
        owner = np.repeat(np.arange(m), np.diff(chk_ptr))
        self.sym_ptr = np.zeros(n + 1, dtype=np.int64)
        self.sym_ptr[1:] = np.cumsum(counts)
        self.sym_idx = owner[order].astype(np.int32)
        pairs = chk_idx.astype(np.int64) + np.repeat(
            np.arange(m, dtype=np.int64) * n, np.diff(chk_ptr)
        )
        if len(np.unique(pairs)) != len(pairs):
            raise ValueError("duplicate (symbol, check) edge")
        self._rank = rank

    @property
    def edge_count(self) -> int:
        return len(self.chk_idx)

    @property
    def rank(self) -> int:
        if self._rank is None:
            self._rank = gf2_rank(self)
        return self._rank

    @property
    def rank_verified(self) -> bool:
        return self._rank is not None

    @property
    def k(self) -> int:
        """Information symbols; n - m under the full-rank assumption."""
        if self._rank is not None:
            return self.n - self._rank
        return self.n - self.m

    def check_degrees(self) -> np.ndarray:
        return np.diff(self.chk_ptr).astype(np.int32)

    def symbol_degrees(self) -> np.ndarray:
        return np.diff(self.sym_ptr).astype(np.int32)

    def design_rate(self) -> float:
        return (self.n - self.m) / self.n

    def dense(self) -> np.ndarray:
        h = np.zeros((self.m, self.n), dtype=np.uint8)
        for c in range(self.m):
            h[c, self.chk_idx[self.chk_ptr[c]:self.chk_ptr[c + 1]]] = 1
        return h

    def girth(self):
        """Length of the shortest cycle, or None if the graph is acyclic."""
        g = _girth_scan(self.n, self.sym_ptr, self.sym_idx, self.chk_ptr,
                        self.chk_idx, self.m)
        return None if g == 0 else int(g)

    @cached_property
    def decoder_views(self):
        from .decoder import _build_views

        return _build_views(self)


def syndrome(code: ParityCheckCode, word: np.ndarray) -> np.ndarray:
    """XOR of the word bits adjacent to each check."""
    w = np.asarray(word, dtype=np.uint8)
    if w.size != code.n:
        raise ValueError(f"word length {w.size} != n={code.n}")
    sums = np.add.reduceat(w[code.chk_idx].astype(np.int64), code.chk_ptr[:-1])
    return (sums & 1).astype(np.uint8)


def gf2_rank(code: ParityCheckCode) -> int:
    """Exact GF(2) rank by packed-word elimination (cost grows as m^2 * n)."""
    nwords = (code.n + 63) // 64
    rows = np.zeros((code.m, nwords), dtype=np.uint64)
    for c in range(code.m):
        cols = code.chk_idx[code.chk_ptr[c]:code.chk_ptr[c + 1]]
        np.bitwise_or.at(rows[c], cols >> 6, np.uint64(1) << (cols & 63).astype(np.uint64))
    return int(_gf2_rank_packed(rows, nwords))


def peg_construct(degrees: DegreeSequence, seed: int) -> ParityCheckCode:
    """Realize a Tanner graph by progressive edge growth.

    Deterministic for a fixed seed: the seed only shuffles the processing
    order of symbols within equal-degree groups (the graph search itself is
    tie-broken deterministically).  Raises if a symbol runs out of
    non-duplicate checks with remaining capacity.
    """
    n, m = degrees.n, degrees.m
    sym_deg = degrees.symbol_degrees.astype(np.int32)
    chk_target = degrees.check_degrees.astype(np.int32)

    order = np.arange(n, dtype=np.int64)
    start = 0
    for deg in np.unique(sym_deg):
        group = np.where(sym_deg == deg)[0]
        perm = prng.permutation(prng.derive_seed(seed, int(deg)), len(group))
        order[start:start + len(group)] = group[perm]
        start += len(group)

    sym_adj = np.zeros((n, int(sym_deg.max())), np.int32)
    chk_adj = np.zeros((m, int(chk_target.max())), np.int32)
    sym_fill, chk_fill, status = _peg_fill(
        n, m, sym_deg, chk_target, order.astype(np.int32), sym_adj, chk_adj
    )
    if status < 0:
        raise UnrealizableDegreeSequenceError(
            "a symbol exhausted the reachable checks with remaining capacity"
        )

    chk_ptr = np.zeros(m + 1, dtype=np.int64)
    chk_ptr[1:] = np.cumsum(chk_fill)
    chk_idx = np.empty(int(chk_fill.sum()), dtype=np.int32)
    for c in range(m):
        chk_idx[chk_ptr[c]:chk_ptr[c + 1]] = np.sort(chk_adj[c, :chk_fill[c]])

    rank = None
    if n <= RANK_VERIFY_LIMIT:
        code = ParityCheckCode(n, m, chk_ptr, chk_idx)
        rank = gf2_rank(code)
        if rank < m:
            logger.info("parity-check matrix rank %d < m=%d; k adjusted", rank, m)
        code._rank = rank
        return code
    logger.info("rank verification skipped for n=%d > %d", n, RANK_VERIFY_LIMIT)
    return ParityCheckCode(n, m, chk_ptr, chk_idx)


# ---------------------------------------------------------------------------
# external formats


def write_alist(code: ParityCheckCode, path) -> None:
    with open(path, "w") as fh:
        fh.write(alist_str(code))


def alist_str(code: ParityCheckCode) -> str:
    """Serialize in the alist text format.

    Layout: "n m", then "max_sym_degree max_chk_degree", per-symbol degrees,
    per-check degrees, then 1-based adjacency lists (symbols first, then
    checks), each line zero-padded to the maximum degree.
    """
    sdeg = code.symbol_degrees()
    cdeg = code.check_degrees()
    dv, dc = int(sdeg.max()), int(cdeg.max())
    lines = [
        f"{code.n} {code.m}",
        f"{dv} {dc}",
        " ".join(str(d) for d in sdeg),
        " ".join(str(d) for d in cdeg),
    ]
    for v in range(code.n):
        row = (code.sym_idx[code.sym_ptr[v]:code.sym_ptr[v + 1]] + 1).tolist()
        lines.append(" ".join(str(x) for x in row + [0] * (dv - len(row))))
    for c in range(code.m):
        row = (code.chk_idx[code.chk_ptr[c]:code.chk_ptr[c + 1]] + 1).tolist()
        lines.append(" ".join(str(x) for x in row + [0] * (dc - len(row))))
    return "\n".join(lines) + "\n"


def read_alist(path) -> ParityCheckCode:
    with open(path) as fh:
        text = fh.read()
    return parse_alist(text)


def parse_alist(text: str) -> ParityCheckCode:
    rows = [line.split() for line in text.splitlines() if line.strip()]
    try:
        n, m = int(rows[0][0]), int(rows[0][1])
        sdeg = [int(x) for x in rows[2]]
        cdeg = [int(x) for x in rows[3]]
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed alist header: {exc}") from exc
    if len(sdeg) != n or len(cdeg) != m:
        raise ValueError("alist degree lines do not match declared dimensions")
    if len(rows) < 4 + n + m:
        raise ValueError("alist adjacency section truncated")

    chk_ptr = np.zeros(m + 1, dtype=np.int64)
    chk_ptr[1:] = np.cumsum(cdeg)
    chk_idx = np.empty(int(sum(cdeg)), dtype=np.int32)
    for c in range(m):
        entries = [int(x) for x in rows[4 + n + c] if x != "0"]
        if len(entries) != cdeg[c]:
            raise ValueError(f"check {c} lists {len(entries)} symbols, expected {cdeg[c]}")
        cols = np.array(entries, dtype=np.int32) - 1
        if cols.min(initial=0) < 0 or cols.max(initial=-1) >= n:
            raise ValueError(f"check {c} has symbol index out of range")
        chk_idx[chk_ptr[c]:chk_ptr[c + 1]] = np.sort(cols)
    code = ParityCheckCode(n, m, chk_ptr, chk_idx)

    # cross-validate against the symbol-side section
    for v in range(n):
        entries = sorted(int(x) - 1 for x in rows[4 + v] if x != "0")
        stored = code.sym_idx[code.sym_ptr[v]:code.sym_ptr[v + 1]].tolist()
        if entries != stored:
            raise ValueError(f"alist symbol/check sections disagree at symbol {v}")
    return code


def write_ensemble(dist: DegreeDistribution, path) -> None:
    with open(path, "w") as fh:
        for deg in sorted(dist.lambda_coeffs):
            fh.write(f"lambda: {deg} {dist.lambda_coeffs[deg]!r}\n")
        for deg in sorted(dist.rho_coeffs):
            fh.write(f"rho: {deg} {dist.rho_coeffs[deg]!r}\n")


def read_ensemble(path) -> DegreeDistribution:
    """Parse an ensemble description file.

    One coefficient per line, ``lambda: <degree> <edge fraction>`` or
    ``rho: <degree> <edge fraction>``; '#' starts a comment.  Rejects
    non-normalized polynomials (via DegreeDistribution validation).
    """
    lam: dict[int, float] = {}
    rho: dict[int, float] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                kind, rest = line.split(":", 1)
                deg_s, frac_s = rest.split()
                deg, frac = int(deg_s), float(frac_s)
            except ValueError as exc:
                raise InvalidEnsembleError(f"line {lineno}: cannot parse {raw!r}") from exc
            side = {"lambda": lam, "rho": rho}.get(kind.strip())
            if side is None:
                raise InvalidEnsembleError(f"line {lineno}: unknown side {kind!r}")
            if deg in side:
                raise InvalidEnsembleError(f"line {lineno}: duplicate degree {deg}")
            side[deg] = frac
    return DegreeDistribution(lam, rho)
