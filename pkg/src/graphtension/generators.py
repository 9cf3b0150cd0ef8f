"""Synthetic benchmark graphs with planted community structure."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .exceptions import ConfigError
from .graph import Graph, Partition, from_edges

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlantedGraph:
    graph: Graph
    reference: Partition
    params: dict = field(default_factory=dict)


# -- helpers ------------------------------------------------------------------

def sample_power_law(rng, n, exponent, x_min, x_max):
    """Inverse-CDF samples from a continuous density ``~ x^-exponent`` on ``[x_min, x_max]``."""
    u = rng.random(n)
    if abs(exponent - 1.0) < 1e-12:
        return x_min * (x_max / x_min) ** u
    a = 1.0 - exponent
    lo, hi = x_min**a, x_max**a
    return (lo + u * (hi - lo)) ** (1.0 / a)


def power_law_mean(exponent, x_min, x_max):
    if abs(exponent - 1.0) < 1e-12:
        return (x_max - x_min) / math.log(x_max / x_min)
    if abs(exponent - 2.0) < 1e-12:
        return math.log(x_max / x_min) / (1.0 / x_min - 1.0 / x_max)
    a1, a2 = 1.0 - exponent, 2.0 - exponent
    return (a1 / a2) * (x_max**a2 - x_min**a2) / (x_max**a1 - x_min**a1)


def _block_labels(n_nodes, n_hat):
    # equal blocks, the remainder spread over the first communities
    sizes = np.full(n_hat, n_nodes // n_hat)
    sizes[: n_nodes % n_hat] += 1
    return np.repeat(np.arange(n_hat), sizes)


def _pair_from_index(idx):
    # strictly-lower-triangular enumeration: idx = i (i - 1) / 2 + j, j < i
    i = np.floor((1.0 + np.sqrt(1.0 + 8.0 * idx.astype(float))) / 2.0).astype(np.int64)
    i[i * (i - 1) // 2 > idx] -= 1
    i[(i + 1) * i // 2 <= idx] += 1
    j = idx - i * (i - 1) // 2
    return i, j


def _erdos_renyi_edges(rng, n, p):
    total = n * (n - 1) // 2
    n_edges = int(rng.binomial(total, p)) if total else 0
    if n_edges == 0:
        return np.empty((0, 2), dtype=np.int64)
    chosen = np.unique(rng.integers(0, total, size=n_edges))
    while chosen.size < n_edges:
        extra = rng.integers(0, total, size=n_edges - chosen.size)
        chosen = np.unique(np.concatenate([chosen, extra]))
    i, j = _pair_from_index(chosen)
    return np.column_stack([i, j])


# -- degree-corrected planted partition ---------------------------------------

def pp_omegas_from_ratio(n_hat, ratio=10.0):
    """``(omega_in, omega_out)`` with the given ratio that keep expected degrees equal to the targets."""
    omega_out = n_hat / (ratio + n_hat - 1.0)
    return ratio * omega_out, omega_out


def pp_omegas_from_lambda(n_hat, lam):
    """Interpolation ``omega = lam * planted + (1 - lam) * uniform``, degree preserving.

    ``lam = 0`` is a structureless graph, ``lam = 1`` has no inter-community edges.
    """
    if not 0.0 <= lam <= 1.0:
        raise ConfigError("lambda must lie in [0, 1]")
    return lam * n_hat + 1.0 - lam, 1.0 - lam


def gen_pp(
    n_nodes: int = 16000,
    n_hat: int = 10,
    degree_exponent: float = 2.0,
    k_min: float = 10.0,
    k_max: float = 200.0,
    omega_in: float | None = None,
    omega_out: float | None = None,
    seed=None,
) -> PlantedGraph:
    """Degree-corrected planted partition.

    Target degrees ``theta`` follow a truncated power law.  For every pair of
    blocks ``(r, s)`` the number of edges is Poisson with mean
    ``omega_rs kappa_r kappa_s / 2m`` (halved for ``r = s``), where ``kappa``
    sums ``theta`` over a block; endpoints are drawn with probability
    proportional to ``theta``.  Multi-edges collapse and self-loops are
    dropped.  Without explicit omegas, ``omega_in / omega_out = 10``.
    """
    if n_hat < 1 or n_nodes < n_hat:
        raise ConfigError("need 1 <= n_hat <= n_nodes")
    if not 0 < k_min <= k_max or k_max > n_nodes - 1:
        raise ConfigError(f"infeasible degree bounds [{k_min}, {k_max}] for {n_nodes} nodes")
    if omega_in is None and omega_out is None:
        omega_in, omega_out = pp_omegas_from_ratio(n_hat)
    elif omega_in is None or omega_out is None:
        raise ConfigError("give both omega_in and omega_out, or neither")
    if omega_out < 0 or omega_in < omega_out:
        raise ConfigError("need omega_in >= omega_out >= 0")
    rng = np.random.default_rng(seed)

    labels = _block_labels(n_nodes, n_hat)
    theta = sample_power_law(rng, n_nodes, degree_exponent, k_min, k_max)
    two_m = theta.sum()
    members = [np.flatnonzero(labels == r) for r in range(n_hat)]
    kappa = np.array([theta[m].sum() for m in members])
    probs = [theta[m] / kappa[r] for r, m in enumerate(members)]

    chunks = []
    for r in range(n_hat):
        for s in range(r, n_hat):
            omega = omega_in if r == s else omega_out
            mean = omega * kappa[r] * kappa[s] / two_m
            if r == s:
                mean /= 2.0
            count = rng.poisson(mean)
            if count == 0:
                continue
            a = rng.choice(members[r], size=count, p=probs[r])
            b = rng.choice(members[s], size=count, p=probs[s])
            chunks.append(np.column_stack([a, b]))
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)
    graph = from_edges(edges, n_nodes)
    params = dict(
        model="pp", n_nodes=n_nodes, n_hat=n_hat, degree_exponent=degree_exponent,
        k_min=k_min, k_max=k_max, omega_in=omega_in, omega_out=omega_out, seed=seed,
    )
    return PlantedGraph(graph, Partition(labels, n_hat), params)


# -- LFR-style ----------------------------------------------------------------

def _lfr_community_sizes(rng, n_nodes, exponent, s_min, s_max):
    if n_nodes < s_min:
        raise ConfigError(f"cannot fill {n_nodes} nodes with communities of at least {s_min}")
    sizes = []
    total = 0
    while total < n_nodes:
        s = int(round(sample_power_law(rng, 1, exponent, s_min, s_max)[0]))
        sizes.append(s)
        total += s
    sizes = np.array(sizes)
    excess = total - n_nodes
    sizes[-1] -= excess
    if sizes[-1] < s_min:
        # dissolve the short last community into the others
        spare = sizes[-1]
        sizes = sizes[:-1]
        while spare > 0:
            room = np.flatnonzero(sizes < s_max)
            if room.size == 0:
                raise ConfigError("community size bounds cannot cover n_nodes")
            sizes[rng.choice(room)] += 1
            spare -= 1
    return sizes


def _match_stubs(rng, stubs):
    stubs = rng.permutation(stubs)
    return stubs.reshape(-1, 2)


def _assign_communities(rng, internal, sizes):
    """Place nodes, largest internal degree first, into random communities that fit them."""
    labels = np.empty(internal.size, dtype=np.int64)
    room = sizes.copy()
    for i in np.argsort(-internal, kind="stable"):
        fits = np.flatnonzero((room > 0) & (sizes - 1 >= internal[i]))
        if fits.size == 0:
            fits = np.flatnonzero(room > 0)
        c = rng.choice(fits)
        labels[i] = c
        room[c] -= 1
    return labels


def _simple_edges(rng, pool, taken, allowed, max_tries=100):
    """Keep the valid edges of a stub pairing and rewire the rest.

    An edge is invalid if it is a loop, repeats an edge in ``taken`` or fails
    ``allowed``.  Each invalid edge ``(a, b)`` is swapped against a random kept
    edge ``(c, d)`` into ``(a, c), (b, d)``, which preserves every degree.
    Edges that cannot be placed after ``max_tries`` swaps are dropped.
    """
    kept = []
    bad = []
    for a, b in pool.tolist():
        key = (a, b) if a < b else (b, a)
        if a != b and key not in taken and allowed(a, b):
            taken.add(key)
            kept.append(key)
        else:
            bad.append((a, b))
    dropped = 0
    for a, b in bad:
        for _ in range(max_tries):
            if not kept:
                break
            j = int(rng.integers(len(kept)))
            c, d = kept[j] if rng.random() < 0.5 else kept[j][::-1]
            e1 = (a, c) if a < c else (c, a)
            e2 = (b, d) if b < d else (d, b)
            if a == c or b == d or e1 == e2 or e1 in taken or e2 in taken:
                continue
            if not (allowed(a, c) and allowed(b, d)):
                continue
            taken.discard(kept[j])
            taken.update((e1, e2))
            kept[j] = e1
            kept.append(e2)
            break
        else:
            dropped += 1
    if dropped:
        log.debug("dropped %d edges that could not be rewired into a simple graph", dropped)
    return kept


def gen_lfr_style(
    n_nodes: int = 1000,
    degree_exponent: float = 2.0,
    mean_k: float = 20.0,
    max_k: float = 50.0,
    size_exponent: float = 1.0,
    size_min: int = 10,
    size_max: int = 50,
    mu: float = 0.1,
    seed=None,
) -> PlantedGraph:
    """Stub-matching benchmark with power-law degrees and community sizes.

    The lower degree cutoff is solved so the continuous power law has mean
    ``mean_k``.  Every node gets ``ceil((1 - mu) k)`` internal stubs and the
    rest external, and is placed in a community large enough to hold its
    internal stubs when one has room (otherwise the internal count is capped
    at the community size minus one and the surplus dropped, so ``mu = 0``
    stays free of inter-community edges).  Internal stubs are paired uniformly
    inside each community, external stubs uniformly across communities;
    loops, repeated edges and external edges inside a community are removed
    by degree-preserving swaps.
    """
    if not 0.0 <= mu <= 1.0:
        raise ConfigError("mu must lie in [0, 1]")
    if not 1 <= size_min <= size_max:
        raise ConfigError("need 1 <= size_min <= size_max")
    if not 1.0 <= mean_k < max_k:
        raise ConfigError("need 1 <= mean_k < max_k")
    rng = np.random.default_rng(seed)

    try:
        k_min = brentq(lambda x: power_law_mean(degree_exponent, x, max_k) - mean_k, 1e-6, max_k - 1e-9)
    except ValueError as exc:
        raise ConfigError(f"no degree cutoff gives mean {mean_k} below {max_k}") from exc
    degrees = np.rint(sample_power_law(rng, n_nodes, degree_exponent, k_min, max_k)).astype(np.int64)
    degrees = np.clip(degrees, 1, n_nodes - 1)

    sizes = _lfr_community_sizes(rng, n_nodes, size_exponent, size_min, size_max)
    wanted = np.ceil((1.0 - mu) * degrees).astype(np.int64)
    labels = _assign_communities(rng, wanted, sizes)
    internal = np.minimum(wanted, sizes[labels] - 1)
    external = degrees - wanted
    excess = int((wanted - internal).sum())
    if excess:
        log.debug("%d internal stubs exceed community capacity and are dropped", excess)

    # odd stub totals: drop one stub of a random node
    for c in range(sizes.size):
        nodes = np.flatnonzero(labels == c)
        if internal[nodes].sum() % 2:
            i = rng.choice(nodes[internal[nodes] > 0])
            log.debug("odd internal stub count in community %d; dropping a stub of node %d", c, i)
            internal[i] -= 1
    if external.sum() % 2:
        i = rng.choice(np.flatnonzero(external > 0))
        log.debug("odd external stub count; dropping a stub of node %d", i)
        external[i] -= 1

    taken: set = set()
    edges = []
    for c in range(sizes.size):
        nodes = np.flatnonzero(labels == c)
        pool = _match_stubs(rng, np.repeat(nodes, internal[nodes]))
        edges += _simple_edges(rng, pool, taken, lambda a, b: True)
    pool = _match_stubs(rng, np.repeat(np.arange(n_nodes), external))
    edges += _simple_edges(rng, pool, taken, lambda a, b: labels[a] != labels[b])
    edges = np.array(edges, dtype=np.int64).reshape(-1, 2)

    graph = from_edges(edges, n_nodes)
    params = dict(
        model="lfr", n_nodes=n_nodes, degree_exponent=degree_exponent, mean_k=mean_k, max_k=max_k,
        size_exponent=size_exponent, size_min=size_min, size_max=size_max, mu=mu, seed=seed,
    )
    return PlantedGraph(graph, Partition(labels, sizes.size), params)


# -- multiscale -----------------------------------------------------------------

def multiscale_sizes(n_components: int) -> list[int]:
    return [10 * 2**j for j in range(n_components)]


def gen_multiscale(n_components: int = 10, seed=None) -> PlantedGraph:
    """Chain of components of doubling size joined by single bridge edges.

    Component 0 is a 10-clique, component 1 a 20-clique, and component
    ``j >= 2`` is an Erdos-Renyi graph on ``10 * 2^j`` nodes with edge
    probability ``20 / n``.  One uniformly random edge joins each pair of
    consecutive components.
    """
    if n_components < 2:
        raise ConfigError("need at least 2 components")
    rng = np.random.default_rng(seed)
    sizes = multiscale_sizes(n_components)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    edges = []
    for j, n in enumerate(sizes):
        if j < 2:
            i, k = np.triu_indices(n, 1)
            block = np.column_stack([i, k])
        else:
            block = _erdos_renyi_edges(rng, n, 20.0 / n)
        edges.append(block + offsets[j])
    for j in range(n_components - 1):
        a = offsets[j] + rng.integers(sizes[j])
        b = offsets[j + 1] + rng.integers(sizes[j + 1])
        edges.append(np.array([[a, b]]))
    n_nodes = int(offsets[-1])
    labels = np.repeat(np.arange(n_components), sizes)
    graph = from_edges(np.concatenate(edges), n_nodes)
    return PlantedGraph(graph, Partition(labels, n_components), dict(model="ms", n_components=n_components, seed=seed))
