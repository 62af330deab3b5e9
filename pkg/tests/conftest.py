import numpy as np
import pytest

from rcrtr.problem import make_rng
from rcrtr.oracle import bfgs_dense, memory_from_pairs, random_rcr_instance


@pytest.fixture
def rng():
    return make_rng(20240601)


def small_instance(rng, n=None, m=None, k=None):
    """Random (A, mem, P, B) with B the dense L-BFGS matrix matching mem."""
    n = n or int(rng.integers(8, 41))
    m = m or int(rng.integers(1, min(15, n - 2) + 1))
    k = k or int(rng.integers(1, 6))
    A, S, Y, delta, _ = random_rcr_instance(rng, n, m, k, cond_scale=rng.uniform(1, 10))
    mem, P = memory_from_pairs(S, Y, A)
    B = bfgs_dense(S, Y, mem.delta)
    return A, mem, P, B


@pytest.fixture
def instance(rng):
    return small_instance(rng, 30, 10, 4)
