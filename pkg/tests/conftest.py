import itertools

import numpy as np
import pytest

from exactmil.tensor import ProbTensor, softmax_locations, LogitTensor

# Random tensors below were drawn as softmax(normal(0, 1.5)) with the seeds
# noted; expected probabilities were computed once by ``enumerate_prob`` and frozen.
SEED_20240101_C3_2x2 = [
    [[0.6773919311770269, 0.5037010201095798], [0.007488337111064893, 0.09235230658708989]],
    [[0.09464916233328699, 0.2929698432036561], [0.5882790136005955, 0.7717909705171826]],
    [[0.1451738975189052, 0.04229323183540969], [0.34157553130724727, 0.11985206828377454]],
    [[0.08278500897078077, 0.16103590485135436], [0.06265711798109228, 0.016004654611953013]],
]
SEED_20240102_C2_2x2 = [
    [[0.04517296210096924, 0.10101639905069754], [0.35193737994736923, 0.3801517113443936]],
    [[0.905310288971602, 0.006006117169922572], [0.20888784389336185, 0.264153465168557]],
    [[0.049516748927428696, 0.8929774837793799], [0.4391747761592689, 0.35569482348704956]],
]


def enumerate_prob(values, labels):
    """Independent oracle: sum over every emission grid emitting exactly ``labels``."""
    K, M, N = values.shape
    total = 0.0
    for grid in itertools.product(range(K), repeat=M * N):
        if {g + 1 for g in grid if g != K - 1} == set(labels):
            p = 1.0
            for loc, g in enumerate(grid):
                p *= values[g, loc // N, loc % N]
            total += p
    return total


@pytest.fixture
def p532():
    """C=2, single location, p = (0.5, 0.3, 0.2)."""
    return ProbTensor(np.array([0.5, 0.3, 0.2]).reshape(3, 1, 1))


@pytest.fixture
def rand_c3():
    return ProbTensor(np.array(SEED_20240101_C3_2x2))


@pytest.fixture
def rand_c2():
    return ProbTensor(np.array(SEED_20240102_C2_2x2))


def random_prob(rng, C, M, N, scale=1.5):
    return softmax_locations(LogitTensor(rng.normal(0.0, scale, size=(C + 1, M, N))))
