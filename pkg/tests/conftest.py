import numpy as np
import pytest

import ratecon


def random_regular_code(n, sym_degree, chk_degree, seed):
    """Configuration-model regular bipartite graph (no PEG involved).

    Independent construction path used to cross-check the main builder and
    to bracket density-evolution thresholds by simulation.
    """
    assert n * sym_degree % chk_degree == 0
    m = n * sym_degree // chk_degree
    rng = np.random.default_rng(seed)
    chk = np.repeat(np.arange(m), chk_degree)
    stubs = np.repeat(np.arange(n), sym_degree)
    for _ in range(500):
        rng.shuffle(stubs)
        pairs = chk.astype(np.int64) * n + stubs
        if len(np.unique(pairs)) == len(pairs):
            break
    else:
        raise RuntimeError("could not avoid duplicate edges")
    order = np.argsort(chk, kind="stable")
    chk_ptr = np.zeros(m + 1, dtype=np.int64)
    chk_ptr[1:] = np.cumsum(np.full(m, chk_degree))
    chk_idx = np.empty(n * sym_degree, dtype=np.int32)
    for c in range(m):
        seg = stubs[order[c * chk_degree:(c + 1) * chk_degree]]
        chk_idx[c * chk_degree:(c + 1) * chk_degree] = np.sort(seg)
    return ratecon.ParityCheckCode(n, m, chk_ptr, chk_idx)


@pytest.fixture(scope="session")
def dist36():
    return ratecon.DegreeDistribution.regular(3, 6)


@pytest.fixture(scope="session")
def code_pool(dist36):
    """PEG codes shared across tests, keyed by symbol count (built lazily)."""
    cache = {}

    def get(n, seed=1):
        key = (n, seed)
        if key not in cache:
            cache[key] = ratecon.peg_construct(ratecon.degree_sequence(dist36, n), seed)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def toy_code(code_pool):
    return code_pool(16)


@pytest.fixture(scope="session")
def code_1000(code_pool):
    return code_pool(1000)


@pytest.fixture(scope="session")
def code_10000(code_pool):
    return code_pool(10_000)


@pytest.fixture(scope="session")
def de_threshold_cache(dist36):
    """Density-evolution thresholds at default quantization, computed once."""
    cache = {}

    def get(delta, rate, **kwargs):
        key = (delta, rate, tuple(sorted(kwargs.items())))
        if key not in cache:
            cache[key] = ratecon.threshold(dist36, delta, rate, **kwargs)
        return cache[key]

    return get
