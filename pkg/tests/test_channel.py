import numpy as np
import pytest

from ratecon.channel import BscParams, bsc_transmit


def test_zero_crossover_is_identity():
    bits = np.random.default_rng(0).integers(0, 2, 1000).astype(np.uint8)
    params = BscParams(0.0, seed=5)
    once = bsc_transmit(bits, params)
    assert np.array_equal(once, bits)
    assert np.array_equal(bsc_transmit(once, params), bits)


def test_determinism_per_seed():
    bits = np.zeros(10_000, np.uint8)
    a = bsc_transmit(bits, BscParams(0.1, seed=42))
    b = bsc_transmit(bits, BscParams(0.1, seed=42))
    c = bsc_transmit(bits, BscParams(0.1, seed=43))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_flip_rate_within_ten_sigma():
    n, p = 1_000_000, 0.08
    out = bsc_transmit(np.zeros(n, np.uint8), BscParams(p, seed=7))
    sigma = np.sqrt(p * (1 - p) / n)
    rate = out.sum() / n
    assert abs(rate - p) <= 10 * sigma  # [0.0772, 0.0828] band


def test_flips_are_xor_of_error_pattern():
    # transmitting x and transmitting zeros with the same seed flip the
    # same positions: output(x) = x ^ output(0)
    rng = np.random.default_rng(3)
    x = rng.integers(0, 2, 5000).astype(np.uint8)
    params = BscParams(0.3, seed=11)
    assert np.array_equal(
        bsc_transmit(x, params), x ^ bsc_transmit(np.zeros(5000, np.uint8), params)
    )


def test_crossover_validation():
    with pytest.raises(ValueError):
        BscParams(0.5)
    with pytest.raises(ValueError):
        BscParams(-0.01)
