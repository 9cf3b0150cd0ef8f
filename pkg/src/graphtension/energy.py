"""Surface-tension energy of a partition under the degree-corrected SBM.

For a partition ``g`` with cut matrix ``C`` and volumes ``v`` the energy is

    E(g, W) = sum_{a,b} [ W_ab C_ab + exp(-W_ab) v_a v_b / 2m ]

where ``W = -log(omega)`` are log-affinities.  Minimising ``E`` over ``(g, W)``
is maximum-likelihood inference for the degree-corrected SBM.

Affinity matrices are plain ``float`` arrays; ``np.inf`` is the sentinel for
pairs with zero affinity.  The extended-real conventions are ``inf * 0 = 0``
in the cut term and ``exp(-inf) = 0`` in the volume term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateInputError, InputError, UndefinedScoreError
from .graph import Graph, Partition, PartitionStats, partition_stats

__all__ = [
    "EliminatedAffinity",
    "WellPosedness",
    "energy",
    "energy_from_stats",
    "optimal_w",
    "optimal_w_from_stats",
    "profile_energy",
    "profile_energy_from_stats",
    "move_delta",
    "move_deltas",
    "eliminate_diagonal",
    "reset_infinite",
    "seed_affinity",
    "score",
    "check_well_posedness",
]


def _as_affinity(w, n_hat=None):
    w = np.array(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise InputError("affinity matrix must be square")
    if n_hat is not None and w.shape[0] != n_hat:
        raise InputError(f"affinity matrix is {w.shape[0]}x{w.shape[0]}, expected n_hat={n_hat}")
    if np.isnan(w).any() or np.isneginf(w).any():
        raise InputError("affinity entries must lie in (-inf, +inf]")
    if not np.array_equal(w, w.T):
        raise InputError("affinity matrix must be symmetric")
    return w


def _cut_term(w, cut):
    finite = np.isfinite(w)
    if np.any(~finite & (cut > 0)):
        return np.inf
    return float(np.sum(np.where(finite, w, 0.0) * cut))


def energy_from_stats(cut, vol, two_m, w) -> float:
    w = np.asarray(w, dtype=float)
    total = _cut_term(w, cut)
    if two_m > 0:
        total += float(vol @ np.exp(-w) @ vol) / two_m
    return total


def energy(graph: Graph, partition: Partition, w, stats: PartitionStats | None = None) -> float:
    """Surface-tension energy ``E(g, W)``; may be ``+inf``."""
    w = _as_affinity(w, partition.n_hat)
    if stats is None:
        stats = partition_stats(graph, partition)
    return energy_from_stats(stats.cut, stats.vol, graph.two_m, w)


def optimal_w_from_stats(cut, vol, two_m) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        omega = two_m * cut / np.outer(vol, vol)
        w = -np.log(omega)
    w[(cut <= 0) | ~np.isfinite(w)] = np.inf
    return w


def optimal_w(graph: Graph, partition: Partition, stats: PartitionStats | None = None) -> np.ndarray:
    """Closed-form minimiser of ``E(g, .)``: ``omega_ab = 2m C_ab / (v_a v_b)``.

    Pairs with no cut edges (including empty communities) get ``+inf``.
    """
    if stats is None:
        stats = partition_stats(graph, partition)
    return optimal_w_from_stats(stats.cut, stats.vol, graph.two_m)


def profile_energy_from_stats(cut, vol, two_m) -> float:
    """``E(g, W*(g))`` evaluated directly: ``sum_{C>0} C (1 - log(2m C / v_a v_b))``."""
    mask = cut > 0
    if not mask.any():
        return 0.0
    c = cut[mask]
    vv = np.outer(vol, vol)[mask]
    return float(np.sum(c * (1.0 - np.log(two_m * c / vv))))


def profile_energy(graph: Graph, partition: Partition, stats: PartitionStats | None = None) -> float:
    """Energy of ``partition`` with its own optimal affinities."""
    if stats is None:
        stats = partition_stats(graph, partition)
    return profile_energy_from_stats(stats.cut, stats.vol, graph.two_m)


def _delta_rows(graph, labels, w, stats, nodes):
    w = np.asarray(w, dtype=float)
    cur = np.asarray(labels)[nodes]
    m = nodes.size
    rows = np.arange(m)
    inf_mask = np.isinf(w)
    x = stats.x[nodes]

    xw = x @ np.where(inf_mask, 0.0, w)
    delta = 2.0 * (xw - xw[rows, cur][:, None])

    if graph.two_m > 0:
        omega = np.exp(-w)
        ov = omega @ stats.vol
        k = graph.degrees[nodes][:, None]
        diag = np.diag(omega)
        self_term = diag[None, :] + diag[cur][:, None] - 2.0 * omega[cur]
        delta += (2.0 * k * (ov[None, :] - ov[cur][:, None]) + k * k * self_term) / graph.two_m

    if inf_mask.any():
        touches = (x @ inf_mask.astype(float)) > 0
        flag = touches.astype(np.int8) - touches[rows, cur][:, None].astype(np.int8)
        delta[flag > 0] = np.inf
        delta[flag < 0] = -np.inf
    delta[rows, cur] = 0.0
    return delta


def move_deltas(graph: Graph, labels, w, stats: PartitionStats) -> np.ndarray:
    """Energy change for moving every node to every community.

    Returns an ``(N, n_hat)`` matrix whose ``[i, a]`` entry is
    ``E(g with g_i <- a) - E(g)`` with ``W`` fixed; the entry for the current
    label is exactly 0.  With infinite affinities, a move that starts touching
    an infinite pair is ``+inf``, one that stops touching every infinite pair
    is ``-inf``, and otherwise only the finite part is reported.
    """
    nodes = np.arange(np.asarray(labels).size)
    return _delta_rows(graph, labels, w, stats, nodes)


def move_delta(stats: PartitionStats, graph: Graph, partition: Partition, node: int, target: int, w) -> float:
    """Energy change from moving a single ``node`` to community ``target``."""
    if not 0 <= node < partition.n_nodes:
        raise IndexError(f"node {node} out of range")
    if not 0 <= target < partition.n_hat:
        raise IndexError(f"community {target} out of range")
    row = _delta_rows(graph, partition.labels, w, stats, np.array([node]))
    return float(row[0, target])


@dataclass(frozen=True)
class EliminatedAffinity:
    """Affinities with the internal (diagonal) tensions moved into volume terms.

    ``sigma_hat[a, b] = W_ab - W_aa / 2 - W_bb / 2`` has a zero diagonal, and
    ``sum_ab W_ab C_ab = sum_{a != b} sigma_hat_ab C_ab + sum_a W_aa v_a``.
    """

    sigma_hat: np.ndarray
    diag_w: np.ndarray

    @property
    def w(self) -> np.ndarray:
        """The original affinity matrix, reconstructed."""
        return self.sigma_hat + 0.5 * (self.diag_w[:, None] + self.diag_w[None, :])

    @property
    def volume_kernel(self) -> np.ndarray:
        """``exp(-W)`` of the original affinities."""
        return np.exp(-self.w)

    @property
    def n_hat(self) -> int:
        return self.diag_w.size


def eliminate_diagonal(w) -> EliminatedAffinity:
    w = _as_affinity(w)
    d = np.diag(w).copy()
    if not np.all(np.isfinite(d)):
        raise InputError("diagonal elimination needs a finite diagonal")
    sigma = w - 0.5 * d[:, None] - 0.5 * d[None, :]
    np.fill_diagonal(sigma, 0.0)
    return EliminatedAffinity(sigma_hat=sigma, diag_w=d)


def reset_infinite(w, factor: float = 1.1) -> np.ndarray:
    """Replace ``+inf`` entries by ``factor`` times the largest finite entry.

    When the largest finite entry ``w_max`` is not positive, the reset value is
    ``w_max + (factor - 1) |w_max|`` so that it still exceeds every finite
    entry.  Finite entries are left untouched.
    """
    w = np.array(w, dtype=float)
    inf = np.isinf(w)
    if not inf.any():
        return w
    finite = w[~inf]
    if finite.size == 0:
        raise DegenerateInputError("every affinity is infinite; the partition has no cut edges")
    w_max = float(finite.max())
    w[inf] = w_max + (factor - 1.0) * abs(w_max)
    return w


def seed_affinity(n_hat: int, omega_in: float = 1.0, omega_out: float = 0.1) -> np.ndarray:
    """Log-affinities for a uniform assortative seed, ``-log`` of omega."""
    omega = np.full((n_hat, n_hat), omega_out)
    np.fill_diagonal(omega, omega_in)
    return -np.log(omega)


def score(e_alg: float, e_ref: float) -> float:
    """Relative energy ``(E_alg - E_ref) / |E_ref|``; lower is better."""
    if e_ref == 0:
        raise UndefinedScoreError("reference energy is 0; relative score is undefined")
    return (e_alg - e_ref) / abs(e_ref)


@dataclass(frozen=True)
class WellPosedness:
    nonneg: bool
    zero_diag: bool
    triangle: bool

    def all(self) -> bool:
        return self.nonneg and self.zero_diag and self.triangle


def check_well_posedness(w) -> WellPosedness:
    """Diagnose the three classical sufficient conditions on surface tensions.

    Graphs need not satisfy them; this is informational only.
    """
    s = np.asarray(w, dtype=float)
    nonneg = bool(np.all(s >= 0))
    zero_diag = bool(np.all(np.diag(s) == 0))
    # s[a, c] + s[c, b] >= s[a, b] for all a, b, c
    via = s[:, :, None] + s.T[None, :, :]
    triangle = bool(np.all(via >= s[:, None, :]))
    return WellPosedness(nonneg=nonneg, zero_diag=zero_diag, triangle=triangle)
