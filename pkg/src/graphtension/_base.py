"""Pieces shared by the solvers: results, tie-breaking, incremental move state."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, Partition


@dataclass
class SolverResult:
    """Outcome of one solver run.

    ``energy`` is the exact surface-tension energy of ``partition`` under the
    affinities the solver was given; ``energies`` is the solver's own trace
    (exact energies for MCF/MBO, Ginzburg-Landau energies for AC).
    """

    partition: Partition
    energies: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False
    energy: float = float("nan")
    info: dict = field(default_factory=dict)


def as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def argmin_random_ties(values: np.ndarray, rng: np.random.Generator, prefer=None) -> np.ndarray:
    """Row-wise argmin with ties broken uniformly at random.

    If ``prefer`` (one column index per row) is among a row's minimisers it
    wins, so a node whose current label is already optimal stays put.
    """
    values = np.atleast_2d(values)
    best = values.min(axis=1, keepdims=True)
    ties = values == best
    keys = rng.random(values.shape)
    keys[~ties] = -1.0
    choice = keys.argmax(axis=1)
    if prefer is not None:
        rows = np.arange(values.shape[0])
        keep = ties[rows, prefer]
        choice[keep] = np.asarray(prefer)[keep]
    return choice


def argmax_random_ties(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return argmin_random_ties(-np.asarray(values), rng)


class MoveState:
    """Mutable partition bookkeeping for node-by-node moves.

    Keeps ``X = A U``, the volumes and ``exp(-W) vol`` current so the energy
    change of any single move costs ``O(n_hat^2 + deg)``.
    """

    def __init__(self, graph: Graph, labels, w):
        self.graph = graph
        self.n_hat = w.shape[0]
        self.labels = np.array(labels, dtype=np.int64)
        self.set_affinity(w)
        u = Partition(self.labels, self.n_hat).indicator()
        self.x = np.asarray((graph.adjacency @ u).todense())
        self.vol = np.bincount(self.labels, weights=graph.degrees, minlength=self.n_hat).astype(float)
        self.ov = self.omega @ self.vol
        self._indptr = graph.adjacency.indptr
        self._indices = graph.adjacency.indices

    def set_affinity(self, w):
        w = np.asarray(w, dtype=float)
        self.w = w
        self.inf_mask = np.isinf(w)
        self.w_finite = np.where(self.inf_mask, 0.0, w)
        self.omega = np.exp(-w)
        self.omega_diag = np.diag(self.omega).copy()
        if hasattr(self, "vol"):
            self.ov = self.omega @ self.vol

    def deltas(self, i: int) -> np.ndarray:
        """Energy change for moving node ``i`` to each community."""
        return self.deltas_many([i])[0]

    def deltas_many(self, nodes) -> np.ndarray:
        """``deltas`` for several nodes at once, one row per node."""
        nodes = np.asarray(nodes, dtype=np.int64)
        rows = np.arange(nodes.size)
        cur = self.labels[nodes]
        x = self.x[nodes]
        xw = x @ self.w_finite
        delta = 2.0 * (xw - xw[rows, cur][:, None])
        two_m = self.graph.two_m
        if two_m > 0:
            k = self.graph.degrees[nodes][:, None]
            self_term = self.omega_diag[None, :] + self.omega_diag[cur][:, None] - 2.0 * self.omega[cur]
            delta += (2.0 * k * (self.ov[None, :] - self.ov[cur][:, None]) + k * k * self_term) / two_m
        if self.inf_mask.any():
            touches = (x @ self.inf_mask) > 0
            flag = touches.astype(np.int8) - touches[rows, cur][:, None].astype(np.int8)
            delta[flag > 0] = np.inf
            delta[flag < 0] = -np.inf
        delta[rows, cur] = 0.0
        return delta

    def move(self, i: int, target: int) -> None:
        cur = self.labels[i]
        if cur == target:
            return
        nbrs = self._indices[self._indptr[i]:self._indptr[i + 1]]
        self.x[nbrs, cur] -= 1.0
        self.x[nbrs, target] += 1.0
        k = self.graph.degrees[i]
        self.vol[cur] -= k
        self.vol[target] += k
        self.ov += k * (self.omega[:, target] - self.omega[:, cur])
        self.labels[i] = target

    def partition(self) -> Partition:
        return Partition(self.labels.copy(), self.n_hat)
