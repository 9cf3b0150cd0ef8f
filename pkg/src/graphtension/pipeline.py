"""Outer inference loops: affinity learning, split-merge, greedy merging, KL baseline."""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ._base import MoveState, SolverResult, as_rng
from .ac import AcConfig, ac_run
from .energy import optimal_w, profile_energy, profile_energy_from_stats, reset_infinite, seed_affinity
from .exceptions import ConfigError, DegenerateInputError
from .graph import Graph, Partition, induced_subgraph, partition_stats
from .mbo import MboConfig, mbo_run
from .mcf import McfConfig, mcf_run
from .spectral import smallest_eigenpairs

log = logging.getLogger(__name__)

SOLVERS = ("mcf", "ac", "mbo")


@dataclass
class PipelineConfig:
    n_hat_expected: int = 2
    solver: str = "mcf"
    penalty_coeff: float = 0.1
    inf_reset_factor: float = 1.1
    em_max_rounds: int = 30
    split_restarts: int = 3
    seed: int | None = 0
    warm_start: bool = True
    mcf: McfConfig = field(default_factory=McfConfig)
    ac: AcConfig = field(default_factory=AcConfig)
    mbo: MboConfig = field(default_factory=MboConfig)

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.n_hat_expected < 1:
            raise ConfigError("n_hat_expected must be at least 1")
        if self.penalty_coeff < 0:
            raise ConfigError("penalty_coeff must be non-negative")
        if self.inf_reset_factor <= 1:
            raise ConfigError("inf_reset_factor must exceed 1")
        if self.em_max_rounds < 1:
            raise ConfigError("em_max_rounds must be at least 1")
        if self.split_restarts < 1:
            raise ConfigError("split_restarts must be at least 1")


def penalized_objective(e: float, n_hat: int, n_hat_expected: int, penalty_coeff: float) -> float:
    """``E + p (n_hat - n_expected)^2 |E|``; equals ``E (1 + p d^2)`` for ``E >= 0``."""
    return e + penalty_coeff * (n_hat - n_hat_expected) ** 2 * abs(e)


def _objective(graph, partition, config):
    return penalized_objective(
        profile_energy(graph, partition), partition.n_nonempty(), config.n_hat_expected, config.penalty_coeff
    )


def run_solver(graph: Graph, w, n_hat: int, config: PipelineConfig, init=None, rng=None, lap_spectrum=None) -> SolverResult:
    """Dispatch to the configured solver with ``W`` held fixed."""
    if config.solver == "mcf":
        return mcf_run(graph, w, n_hat, config.mcf, init=init, rng=rng)
    if config.solver == "ac":
        return ac_run(graph, w, n_hat, config.ac, init=init, rng=rng, lap_spectrum=lap_spectrum)
    return mbo_run(graph, w, n_hat, config.mbo, init=init, rng=rng, lap_spectrum=lap_spectrum)


def _laplacian_basis(graph, n_hat, config):
    if config.solver == "mcf" or n_hat < 2:
        return None
    m_eig = getattr(config, config.solver).m_eig or 2 * n_hat
    return smallest_eigenpairs(graph, min(m_eig, graph.n_nodes), seed=0)


# -- EM ---------------------------------------------------------------------------

@dataclass
class EmResult:
    partition: Partition
    w: np.ndarray
    energies: list
    n_rounds: int


def em_fit(
    graph: Graph,
    n_hat: int,
    config: PipelineConfig,
    init: Partition | None = None,
    w0=None,
    rng=None,
    lap_spectrum=None,
) -> EmResult:
    """Alternate the partition step (solver, ``W`` fixed) with the closed-form ``W`` step.

    A partition step is accepted only if it lowers the energy at the optimal
    ``W``; the next ``W`` is ``optimal_w`` with infinite entries reset to
    ``inf_reset_factor`` times the largest finite entry.  The returned ``w``
    is the unreset optimum of the final partition.  Without ``w0`` the first
    partition step uses the seed affinities (``omega`` 1 inside, 0.1 between)
    or, given ``init``, the reset optimum of ``init``.
    """
    if n_hat < 1:
        raise ConfigError("n_hat must be at least 1")
    rng = as_rng(rng if rng is not None else config.seed)
    if n_hat == 1:
        part = Partition.trivial(graph.n_nodes)
        return EmResult(part, optimal_w(graph, part), [profile_energy(graph, part)], 1)

    if w0 is not None:
        w = np.asarray(w0, dtype=float)
    elif init is not None:
        w = reset_infinite(optimal_w(graph, init), config.inf_reset_factor)
    else:
        w = seed_affinity(n_hat)
    best = init
    best_e = profile_energy(graph, init) if init is not None else np.inf
    trace = [best_e] if init is not None else []
    lap = lap_spectrum if lap_spectrum is not None else _laplacian_basis(graph, n_hat, config)

    rounds = 0
    for rounds in range(1, config.em_max_rounds + 1):
        start = best if config.warm_start else None
        res = run_solver(graph, w, n_hat, config, init=start, rng=rng, lap_spectrum=lap)
        e = profile_energy(graph, res.partition)
        if not e < best_e:
            break
        best, best_e = res.partition, e
        trace.append(e)
        w = reset_infinite(optimal_w(graph, best), config.inf_reset_factor)
    return EmResult(best, optimal_w(graph, best), trace, rounds)


# -- merging and splitting -------------------------------------------------------

def _merged_stats(cut, vol, a, b):
    keep = [c for c in range(vol.size) if c != b]
    fold = np.zeros((vol.size, len(keep)))
    fold[keep, np.arange(len(keep))] = 1.0
    fold[b, keep.index(a)] = 1.0
    return fold.T @ cut @ fold, vol @ fold


def greedy_merge(graph: Graph, partition: Partition, config: PipelineConfig) -> Partition:
    """Merge the best pair of communities while the penalised objective drops.

    Each candidate is scored at its closed-form optimal ``W`` through the
    merged cut and volume matrices, so no solver run is needed.
    """
    part = partition.compact()
    stats = partition_stats(graph, part)
    cut, vol = stats.cut, stats.vol
    n = vol.size
    cur = penalized_objective(profile_energy_from_stats(cut, vol, graph.two_m), n, config.n_hat_expected, config.penalty_coeff)
    labels = part.labels.copy()
    while n > 1:
        best = None
        for a in range(n):
            for b in range(a + 1, n):
                c2, v2 = _merged_stats(cut, vol, a, b)
                q = penalized_objective(
                    profile_energy_from_stats(c2, v2, graph.two_m), n - 1, config.n_hat_expected, config.penalty_coeff
                )
                if best is None or q < best[0]:
                    best = (q, a, b, c2, v2)
        if not best[0] < cur:
            break
        cur, a, b, cut, vol = best
        labels[labels == b] = a
        labels[labels > b] -= 1
        n -= 1
    return Partition(labels, n)


@dataclass
class SplitMergeResult:
    partition: Partition
    w: np.ndarray
    energy: float
    objective: float
    history: list = field(default_factory=list)


def _members(partition):
    order = np.argsort(partition.labels, kind="stable")
    bounds = np.cumsum(partition.sizes())[:-1]
    return [m for m in np.split(order, bounds) if m.size]


def split_merge(graph: Graph, config: PipelineConfig, rng=None) -> SplitMergeResult:
    """Split communities one at a time and keep splits that lower the penalised objective.

    Starting from a single community, a FIFO queue holds node sets to try.
    The current community of a popped set is re-partitioned as an induced
    subgraph (with the parent graph's degrees and ``2m``) into
    ``min(n_expected, floor(sqrt(N)))`` parts by EM from the seed
    affinities (best of ``split_restarts`` random starts), followed by
    ``greedy_merge`` on the whole partition.  Every
    community created by an accepted split is queued.  A last EM pass over
    the whole graph, warm-started from the result, is kept if it lowers the
    objective.
    """
    rng = as_rng(rng if rng is not None else config.seed)
    n = graph.n_nodes
    part = Partition.trivial(n)
    q = _objective(graph, part, config)
    history = [q]
    n_parts_max = min(config.n_hat_expected, math.isqrt(n))
    queue = deque([np.arange(n)])
    while queue:
        nodes = queue.popleft()
        c = part.labels[nodes[0]]
        members = np.flatnonzero(part.labels == c)
        n_parts = min(n_parts_max, members.size)
        if n_parts < 2:
            continue
        sub, index_map = induced_subgraph(graph, members, global_volumes=True)
        try:
            lap = _laplacian_basis(sub, n_parts, config)
            fits = [
                em_fit(sub, n_parts, config, w0=seed_affinity(n_parts), rng=rng, lap_spectrum=lap)
                for _ in range(config.split_restarts)
            ]
        except DegenerateInputError:
            log.debug("community %d has no splittable structure", c)
            continue
        fit = min(fits, key=lambda f: f.energies[-1])
        n_hat = part.n_hat
        labels = part.labels.copy()
        sub_labels = fit.partition.labels
        labels[index_map] = np.where(sub_labels == 0, c, n_hat + sub_labels - 1)
        cand = greedy_merge(graph, Partition(labels, n_hat + n_parts - 1), config)
        q_new = _objective(graph, cand, config)
        if q_new < q:
            old = {m.tobytes() for m in _members(part)}
            queue.extend(m for m in _members(cand) if m.tobytes() not in old)
            part, q = cand, q_new
            history.append(q)
            log.debug("split accepted: %d communities, objective %.6g", part.n_hat, q)

    if part.n_hat >= 2:
        try:
            polish = em_fit(graph, part.n_hat, config, init=part, rng=rng).partition.compact()
            q_new = _objective(graph, polish, config)
            if q_new < q:
                part, q = polish, q_new
                history.append(q)
        except DegenerateInputError:
            pass
    return SplitMergeResult(part, optimal_w(graph, part), profile_energy(graph, part), q, history)


# -- Kernighan-Lin baseline --------------------------------------------------------

def kl_baseline(graph: Graph, n_hat: int, seed=None, max_passes: int = 100, init: Partition | None = None) -> SolverResult:
    """Kernighan-Lin style node moves for the degree-corrected SBM.

    In a pass every node is moved exactly once, always taking the best
    available move among the nodes not yet moved (even if it raises the
    energy); the pass then reverts to its best intermediate state.  ``W`` is
    the closed-form optimum of the partition at the start of each pass.
    Passes repeat until one yields no improvement.
    """
    if n_hat < 1:
        raise ConfigError("n_hat must be at least 1")
    rng = as_rng(seed)
    if n_hat == 1:
        part = Partition.trivial(graph.n_nodes)
        e = profile_energy(graph, part)
        return SolverResult(part, [e], 0, True, e)
    part = init if init is not None else Partition(rng.integers(0, n_hat, graph.n_nodes), n_hat)
    energies = [profile_energy(graph, part)]
    converged = False
    n_pass = 0
    for n_pass in range(1, max_passes + 1):
        state = MoveState(graph, part.labels, optimal_w(graph, part))
        unmoved = np.ones(graph.n_nodes, dtype=bool)
        total, best_total = 0.0, 0.0
        slack = 1e-10 * max(1.0, abs(energies[-1]))
        history = []
        best_len = 0
        while unmoved.any():
            nodes = np.flatnonzero(unmoved)
            delta = state.deltas_many(nodes)
            delta[np.arange(nodes.size), state.labels[nodes]] = np.inf
            flat = int(np.argmin(delta))
            step = delta.flat[flat]
            if not np.isfinite(step):
                break
            i, target = nodes[flat // n_hat], flat % n_hat
            history.append((i, state.labels[i]))
            state.move(i, target)
            unmoved[i] = False
            total += step
            if total < best_total - slack:
                best_total, best_len = total, len(history)
        for i, old in reversed(history[best_len:]):
            state.move(i, old)
        if best_len == 0:
            converged = True
            break
        part = state.partition()
        energies.append(profile_energy(graph, part))
    return SolverResult(part, energies, n_pass, converged, energies[-1])
