"""Discretized density evolution for the punctured/shortened BSC mixture.

Message densities are quantized LLR histograms on a symmetric support with
an explicit point mass at +infinity (shortened symbols are known, so under
the correct-word convention their messages sit at +inf).  The check-node
operation is the exact two-input quantized boxplus tabulated per bin pair;
the variable-node operation is plain convolution with saturating end bins.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.signal import fftconvolve

from . import rate_adapt
from .codes import DegreeDistribution, design_rate

logger = logging.getLogger(__name__)

DEFAULT_BIN_WIDTH = 0.01
DEFAULT_SUPPORT = 30.0
DEFAULT_MAX_ITERATIONS = 2000
DEFAULT_TARGET = 1e-8

# a fixed point is declared when the error probability improves by less than
# this for this many consecutive iterations (cannot reach the target within
# any plausible remaining budget)
_STALL_EPS = 1e-13
_STALL_WINDOW = 20


@dataclass(frozen=True)
class EnsembleChannel:
    """Mixture channel seen by a frame symbol: noiseless with probability
    sigma, erased with probability pi, BSC(p) with probability 1 - delta."""

    p: float
    delta: float = 0.0
    pi: float = 0.0
    sigma: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.p < 0.5:
            raise ValueError(f"crossover {self.p} outside (0, 0.5)")
        for name in ("delta", "pi", "sigma"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v} outside [0, 1]")
        if abs(self.pi + self.sigma - self.delta) > 1e-9:
            raise ValueError(
                f"pi + sigma = {self.pi + self.sigma} must equal delta = {self.delta}"
            )


@dataclass
class QuantizedDensity:
    """LLR mass function on bins k*bin_width, k in [-K, K], plus mass at +inf."""

    bin_width: float
    masses: np.ndarray
    mass_at_plus_inf: float = 0.0

    @property
    def half_bins(self) -> int:
        return (len(self.masses) - 1) // 2

    @property
    def support(self) -> float:
        return self.half_bins * self.bin_width

    def total_mass(self) -> float:
        return float(self.masses.sum() + self.mass_at_plus_inf)

    def copy(self) -> "QuantizedDensity":
        return QuantizedDensity(self.bin_width, self.masses.copy(), self.mass_at_plus_inf)

    def to_csv(self, path, include_empty: bool = False) -> None:
        """Debug snapshot: one (llr, mass) row per bin, +inf last."""
        K = self.half_bins
        with open(path, "w") as fh:
            fh.write("llr,mass\n")
            for k, mass in enumerate(self.masses):
                if mass or include_empty:
                    fh.write(f"{(k - K) * self.bin_width!r},{float(mass)!r}\n")
            fh.write(f"inf,{float(self.mass_at_plus_inf)!r}\n")


def initial_density(
    ch: EnsembleChannel,
    bin_width: float = DEFAULT_BIN_WIDTH,
    support: float = DEFAULT_SUPPORT,
) -> QuantizedDensity:
    """Channel LLR density: BSC pair at +-log((1-p)/p), erasure mass at the
    zero bin, shortened mass at +inf."""
    K = int(round(support / bin_width))
    llr = math.log((1.0 - ch.p) / ch.p)
    k = int(round(llr / bin_width))
    if k > K:
        raise ValueError(f"channel LLR {llr:.2f} outside support {support}")
    masses = np.zeros(2 * K + 1)
    masses[K + k] += (1.0 - ch.delta) * (1.0 - ch.p)
    masses[K - k] += (1.0 - ch.delta) * ch.p
    masses[K] += ch.pi
    return QuantizedDensity(bin_width, masses, ch.sigma)


def error_probability(density: QuantizedDensity) -> float:
    """Mass on strictly negative bins plus half the zero bin."""
    K = density.half_bins
    return float(density.masses[:K].sum() + 0.5 * density.masses[K])


def density_bhattacharyya(density: QuantizedDensity) -> float:
    """Numerical integral of exp(-x/2) against the density (+inf gives 0)."""
    K = density.half_bins
    centers = (np.arange(-K, K + 1)) * density.bin_width
    return float(np.sum(density.masses * np.exp(-centers / 2.0)))


# ---------------------------------------------------------------------------
# quantized check-node transform

_TABLE_CACHE: dict = {}


def _boxplus_table(K: int, bin_width: float) -> np.ndarray:
    """Output-magnitude bin of 2*atanh(tanh(a/2)tanh(b/2)) per magnitude pair."""
    key = (K, round(bin_width * 1e12))
    table = _TABLE_CACHE.get(key)
    if table is None:
        mags = np.arange(K + 1) * bin_width
        t = np.tanh(mags / 2.0)
        dtype = np.int16 if K <= 32000 else np.int32
        table = np.empty((K + 1, K + 1), dtype=dtype)
        for i in range(K + 1):
            r = 2.0 * np.arctanh(np.clip(t[i] * t, 0.0, 1.0 - 1e-16))
            table[i] = np.minimum(np.round(r / bin_width), K).astype(dtype)
        _TABLE_CACHE[key] = table
    return table


@njit(cache=True)
def _boxplus_accumulate(a_pos, a_neg, b_pos, b_neg, table, K):  # pragma: no cover
    out_pos = np.zeros(K + 1)
    out_neg = np.zeros(K + 1)
    for ia in range(K + 1):
        app = a_pos[ia]
        anm = a_neg[ia]
        if app == 0.0 and anm == 0.0:
            continue
        row = table[ia]
        for ib in range(K + 1):
            bpp = b_pos[ib]
            bnm = b_neg[ib]
            if bpp == 0.0 and bnm == 0.0:
                continue
            t = row[ib]
            out_pos[t] += app * bpp + anm * bnm
            out_neg[t] += app * bnm + anm * bpp
    return out_pos, out_neg


def _split_signs(density: QuantizedDensity):
    K = density.half_bins
    pos = density.masses[K:].copy()
    neg = density.masses[K::-1].copy()
    pos[0] = density.masses[K] / 2.0
    neg[0] = density.masses[K] / 2.0
    return pos, neg


def _merge_signs(pos: np.ndarray, neg: np.ndarray, bin_width: float, pinf: float):
    K = len(pos) - 1
    masses = np.zeros(2 * K + 1)
    masses[K:] = pos
    masses[:K] = neg[:0:-1]
    masses[K] = pos[0] + neg[0]
    return QuantizedDensity(bin_width, masses, pinf)


def check_combine(a: QuantizedDensity, b: QuantizedDensity) -> QuantizedDensity:
    """Density of the boxplus of two independent messages.

    The +inf component is absorbing-neutral: boxplus with +inf returns the
    other operand, so only the product of the two +inf masses stays at +inf.
    """
    K = a.half_bins
    table = _boxplus_table(K, a.bin_width)
    a_pos, a_neg = _split_signs(a)
    b_pos, b_neg = _split_signs(b)
    out_pos, out_neg = _boxplus_accumulate(a_pos, a_neg, b_pos, b_neg, table, K)
    out_pos += a.mass_at_plus_inf * b_pos + b.mass_at_plus_inf * a_pos
    out_neg += a.mass_at_plus_inf * b_neg + b.mass_at_plus_inf * a_neg
    return _merge_signs(out_pos, out_neg, a.bin_width, a.mass_at_plus_inf * b.mass_at_plus_inf)


def variable_combine(a: QuantizedDensity, b: QuantizedDensity) -> QuantizedDensity:
    """Density of the sum of two independent messages; +inf absorbs, finite
    tails saturate into the end bins."""
    K = a.half_bins
    full = fftconvolve(a.masses, b.masses)
    masses = full[K:3 * K + 1].copy()
    clipped = full[:K].sum() + full[3 * K + 1:].sum()
    masses[0] += full[:K].sum()
    masses[-1] += full[3 * K + 1:].sum()
    np.clip(masses, 0.0, None, out=masses)
    if clipped > 1e-6:
        logger.debug("saturated %.3e mass into end bins", clipped)
    pinf = a.mass_at_plus_inf + b.mass_at_plus_inf - a.mass_at_plus_inf * b.mass_at_plus_inf
    return QuantizedDensity(a.bin_width, masses, pinf)


def _mixture_of_powers(density, coeffs, combine):
    """sum_d coeffs[d] * density^(d-1) under the given pairwise combine."""
    powers = {1: density}

    def power(k: int):
        got = powers.get(k)
        if got is None:
            half = power(k // 2)
            got = combine(half, half)
            if k % 2:
                got = combine(got, density)
            powers[k] = got
        return got

    masses = np.zeros_like(density.masses)
    pinf = 0.0
    for deg in sorted(coeffs):
        term = power(deg - 1)
        masses += coeffs[deg] * term.masses
        pinf += coeffs[deg] * term.mass_at_plus_inf
    return QuantizedDensity(density.bin_width, masses, pinf)


def de_iterate(
    dist: DegreeDistribution,
    ch: EnsembleChannel,
    density: QuantizedDensity,
    renormalize: bool = True,
) -> QuantizedDensity:
    """One full evolution step of the message density.

    Variable side first: lambda-weighted mixture of (i-1)-fold convolutions
    of the incoming density, convolved once with the channel density.
    Check side: rho-weighted mixture of (j-1)-fold boxplus combinations of
    the variable output.  Iterating from the channel density itself.
    """
    p0 = initial_density(ch, density.bin_width, density.support)
    mixed = _mixture_of_powers(density, dist.lambda_coeffs, variable_combine)
    var_out = variable_combine(mixed, p0)
    out = _mixture_of_powers(var_out, dist.rho_coeffs, check_combine)
    total = out.total_mass()
    if abs(total - 1.0) > 1e-9:
        logger.warning("density mass drifted to %.12f in one iteration", total)
    if renormalize and total > 0:
        out.masses /= total
        out.mass_at_plus_inf /= total
    return out


def evolve(
    dist: DegreeDistribution,
    ch: EnsembleChannel,
    bin_width: float = DEFAULT_BIN_WIDTH,
    support: float = DEFAULT_SUPPORT,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    target: float = DEFAULT_TARGET,
    on_iteration=None,
):
    """Run density evolution until the error probability falls below target,
    a fixed point is detected, or the iteration cap is reached.

    The tracked density is the check-node output (the iterate's own
    orientation), so evolution starts from the first check half-step
    applied to the channel density.  `on_iteration(i, density)` is invoked
    after each step when given (snapshot hooks).  Returns (converged,
    iterations_used, final_density).
    """
    density = _mixture_of_powers(
        initial_density(ch, bin_width, support), dist.rho_coeffs, check_combine
    )
    if error_probability(density) < target:
        return True, 0, density
    prev = 1.0
    stall = 0
    for iteration in range(1, max_iterations + 1):
        density = de_iterate(dist, ch, density)
        if on_iteration is not None:
            on_iteration(iteration, density)
        pe = error_probability(density)
        if pe < target:
            return True, iteration, density
        if prev - pe < _STALL_EPS:
            stall += 1
            if stall >= _STALL_WINDOW:
                return False, iteration, density
        else:
            stall = 0
        prev = pe
    return False, max_iterations, density


def threshold_for_mixture(
    dist: DegreeDistribution,
    delta: float,
    pi_fraction,
    sigma_fraction,
    tol: float = 2.5e-4,
    bin_width: float = DEFAULT_BIN_WIDTH,
    support: float = DEFAULT_SUPPORT,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    target: float = DEFAULT_TARGET,
    p_max: float = 0.499,
) -> float:
    """Sup of crossover probabilities the ensemble corrects for a fixed
    (pi, sigma) mixture; callables receive the candidate p (for splits that
    depend on p, unused here) or plain floats may be given."""

    def below(p: float) -> bool:
        pi = pi_fraction(p) if callable(pi_fraction) else pi_fraction
        sigma = sigma_fraction(p) if callable(sigma_fraction) else sigma_fraction
        ch = EnsembleChannel(p=p, delta=delta, pi=pi, sigma=sigma)
        ok, _, _ = evolve(dist, ch, bin_width, support, max_iterations, target)
        return ok

    lo, hi = tol, p_max
    if not below(lo):
        return 0.0
    if below(hi):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if below(mid):
            lo = mid
        else:
            hi = mid
    return lo


def threshold(
    dist: DegreeDistribution,
    delta: float,
    rate_target: float,
    tol: float = 2.5e-4,
    bin_width: float = DEFAULT_BIN_WIDTH,
    support: float = DEFAULT_SUPPORT,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    target: float = DEFAULT_TARGET,
) -> float:
    """Decoding threshold at a target rate; the punctured/shortened split is
    the same one the protocol would use (rate_adapt.split_ratios)."""
    r0 = design_rate(dist)
    sigma, pi = rate_adapt.split_ratios(r0, rate_target, delta)
    return threshold_for_mixture(
        dist, delta, pi, sigma, tol, bin_width, support, max_iterations, target
    )


# ---------------------------------------------------------------------------
# stability


@dataclass(frozen=True)
class StabilityReport:
    lambda2: float
    bound: float
    stable: bool
    bhattacharyya: float  # closed-form integral of exp(-x/2) against the channel density


def stability_bound(dist: DegreeDistribution, ch: EnsembleChannel) -> StabilityReport:
    """Stability of the zero-error fixed point: lambda_2 < 1 / (B * rho'(1))
    where B = (1 - delta) * 2 sqrt(p(1-p)) + pi (the shortened component
    contributes nothing)."""
    bhat = (1.0 - ch.delta) * 2.0 * math.sqrt(ch.p * (1.0 - ch.p)) + ch.pi
    bound = 1.0 / (bhat * dist.rho_derivative_at_one)
    lam2 = dist.lambda2
    return StabilityReport(lam2, bound, lam2 < bound, bhat)
