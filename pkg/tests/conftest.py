import itertools
import math

import numpy as np
import pytest

from graphtension.graph import Partition, from_edges


def two_triangles():
    return from_edges([(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])


def triangle():
    return from_edges([(0, 1), (1, 2), (2, 0)])


def random_graph(rng, n, p):
    a = np.triu(rng.random((n, n)) < p, 1)
    i, j = np.nonzero(a)
    return from_edges(np.column_stack([i, j]), n)


def random_partition(rng, n, n_hat):
    return Partition(rng.integers(0, n_hat, n), n_hat)


def random_affinity(rng, n_hat, lo=-1.0, hi=3.0):
    w = rng.uniform(lo, hi, (n_hat, n_hat))
    return 0.5 * (w + w.T)


def brute_energy(graph, labels, w):
    """Energy by a double loop over ordered node pairs, with extended-real rules."""
    a = graph.adjacency.toarray()
    n = a.shape[0]
    k = graph.degrees
    two_m = graph.two_m
    cut_term = 0.0
    vol_term = 0.0
    for i in range(n):
        for j in range(n):
            wij = w[labels[i], labels[j]]
            if a[i, j]:
                if math.isinf(wij):
                    return math.inf
                cut_term += wij * a[i, j]
            if two_m > 0:
                vol_term += math.exp(-wij) * k[i] * k[j] / two_m
    return cut_term + vol_term


def all_partitions(n, n_hat):
    for labels in itertools.product(range(n_hat), repeat=n):
        yield np.array(labels)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
