"""Graph mean-curvature flow: per-node reassignment by exact energy change.

Each step evaluates, for every node, the energy change of moving it to every
community and applies the best move.  In simultaneous mode all moves are
computed against the start-of-step partition and applied together; in serial
mode nodes are visited in random order and every move sees the previous ones.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._base import MoveState, SolverResult, argmin_random_ties, as_rng
from .energy import energy, move_deltas
from .exceptions import ConfigError
from .graph import Graph, Partition, partition_stats

log = logging.getLogger(__name__)


@dataclass
class McfConfig:
    max_iters: int = 500
    serial_mode: bool = False
    seed: int | None = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")


def _serial_sweep(graph, labels, w, rng):
    state = MoveState(graph, labels, w)
    for i in rng.permutation(graph.n_nodes):
        delta = state.deltas(i)
        target = argmin_random_ties(delta[None, :], rng, prefer=[state.labels[i]])[0]
        state.move(i, target)
    return state.labels


def mcf_step(graph: Graph, partition: Partition, w, mode: str = "simultaneous", rng=None) -> Partition:
    """One flow step.  ``mode`` is ``"simultaneous"`` or ``"serial"``.

    A node whose current label is among its minimisers keeps it; other ties
    are broken uniformly at random.
    """
    rng = as_rng(rng)
    w = np.asarray(w, dtype=float)
    if mode == "serial":
        return Partition(_serial_sweep(graph, partition.labels, w, rng), partition.n_hat)
    if mode != "simultaneous":
        raise ConfigError(f"unknown MCF mode {mode!r}")
    stats = partition_stats(graph, partition)
    delta = move_deltas(graph, partition.labels, w, stats)
    labels = argmin_random_ties(delta, rng, prefer=partition.labels)
    return Partition(labels, partition.n_hat)


def mcf_run(graph: Graph, w, n_hat: int, config: McfConfig | None = None, init: Partition | None = None, rng=None) -> SolverResult:
    """Iterate ``mcf_step`` to a fixed point or ``config.max_iters``.

    Starts from ``init`` or from a uniformly random assignment.  Simultaneous
    updates can fall into a 2-cycle; when the new partition equals the one
    from two steps back, a serial sweep is taken instead.
    """
    config = config or McfConfig()
    rng = as_rng(rng if rng is not None else config.seed)
    w = np.asarray(w, dtype=float)
    if n_hat < 1:
        raise ConfigError("n_hat must be at least 1")
    if n_hat == 1:
        part = Partition.trivial(graph.n_nodes)
        e = energy(graph, part, w)
        return SolverResult(part, [e], 0, True, e)

    part = init if init is not None else Partition(rng.integers(0, n_hat, graph.n_nodes), n_hat)
    mode = "serial" if config.serial_mode else "simultaneous"
    energies = [energy(graph, part, w)]
    before = None
    for it in range(1, config.max_iters + 1):
        new = mcf_step(graph, part, w, mode, rng)
        if before is not None and mode == "simultaneous" and new.same_as(before):
            log.debug("MCF 2-cycle at iteration %d; taking a serial sweep", it)
            new = mcf_step(graph, part, w, "serial", rng)
        if new.same_as(part):
            return SolverResult(part, energies, it, True, energies[-1])
        before, part = part, new
        energies.append(energy(graph, part, w))
    log.info("MCF stopped at max_iters=%d without reaching a fixed point", config.max_iters)
    return SolverResult(part, energies, config.max_iters, False, energies[-1])
