"""Allen-Cahn flow of the graph Ginzburg-Landau energy.

A soft assignment ``U`` (N x n_hat, rows on the probability simplex) evolves by

    U_t = L U S - (1/2m) k k^T U exp(-W) - k diag(W)^T - (1/eps) T'(U)

with ``S`` the diagonal-eliminated tensions and ``T`` the multi-well
potential.  Time stepping is convex splitting: ``L U S`` and a stabilising
``c U`` are implicit, everything else explicit.  The implicit solve is done in
the basis of the smallest Laplacian eigenvectors and the eigenvectors of
``S``, where it is diagonal; rows are projected back to the simplex after
every step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._base import SolverResult, argmax_random_ties, as_rng
from .energy import EliminatedAffinity, eliminate_diagonal, energy
from .exceptions import ConfigError
from .graph import Graph, Partition
from .spectral import DenseSpectrum, LaplacianSpectrum, smallest_eigenpairs, sym_eig_dense

log = logging.getLogger(__name__)

PIVOT_FLOOR = 1e-12


# -- simplex projection -------------------------------------------------------

def project_rows_to_simplex(y) -> np.ndarray:
    """Euclidean projection of every row onto the probability simplex.

    Chen & Ye's sort-and-threshold algorithm, vectorised over rows: for the
    descending-sorted row ``s``, take the smallest ``r`` with
    ``t_r = (s_1 + ... + s_r - 1) / r >= s_{r+1}`` (or ``r = n``) and return
    ``max(y - t_r, 0)``.
    """
    y = np.asarray(y, dtype=float)
    squeeze = y.ndim == 1
    y = np.atleast_2d(y)
    n = y.shape[1]
    s = -np.sort(-y, axis=1)
    r = np.arange(1, n + 1)
    t = (np.cumsum(s, axis=1) - 1.0) / r
    stop = np.ones_like(t, dtype=bool)
    stop[:, :-1] = t[:, :-1] >= s[:, 1:]
    first = stop.argmax(axis=1)
    t_hat = t[np.arange(y.shape[0]), first]
    out = np.maximum(y - t_hat[:, None], 0.0)
    return out[0] if squeeze else out


# -- multi-well potential -----------------------------------------------------

def _well_distances(u):
    n_hat = u.shape[1]
    # d[i, a] = || u_i - e_a ||_1
    total = np.abs(u).sum(axis=1, keepdims=True)
    return total - np.abs(u) + np.abs(u - 1.0) if n_hat else total


def multiwell(u) -> float:
    """``T(U) = sum_i prod_a (1/4) ||U_i - e_a||_1^2``; zero exactly on partitions."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    f = 0.25 * _well_distances(u) ** 2
    return float(np.prod(f, axis=1).sum())


def _prod_except(f):
    # prod over all columns but one, without dividing (factors can be 0)
    n = f.shape[1]
    left = np.ones_like(f)
    right = np.ones_like(f)
    if n > 1:
        left[:, 1:] = np.cumprod(f[:, :-1], axis=1)
        right[:, :-1] = np.cumprod(f[:, :0:-1], axis=1)[:, ::-1]
    return left * right


def multiwell_grad(u) -> np.ndarray:
    """Gradient of ``multiwell``; the l1 kink uses sign(0) = 0."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    n_hat = u.shape[1]
    d = _well_distances(u)
    others = _prod_except(0.25 * d * d)
    eye = np.eye(n_hat)
    # signs[i, a, j] = sign(u_ij - [a == j])
    signs = np.sign(u[:, None, :] - eye[None, :, :])
    coeff = 0.5 * d * others
    return np.einsum("ia,iaj->ij", coeff, signs)


# -- energy -------------------------------------------------------------------

def gl_energy(graph: Graph, u, elim: EliminatedAffinity, epsilon: float) -> float:
    """Graph Ginzburg-Landau energy of a soft assignment.

    ``sum_ab [-S_ab U_a^T L U_b + (k^T U_a) exp(-W_ab) (k^T U_b) / 2m]
    + sum_a W_aa (k^T U_a) + T(U) / (2 eps)``.  The volume kernel uses the
    original affinities, so on partition matrices this equals the exact
    surface-tension energy for any finite ``W``.
    """
    u = np.asarray(u, dtype=float)
    lu = graph.laplacian() @ u
    quad = -float(np.sum(elim.sigma_hat * (u.T @ lu)))
    vol = graph.degrees @ u
    total = quad + float(vol @ elim.diag_w)
    if graph.two_m > 0:
        total += float(vol @ elim.volume_kernel @ vol) / graph.two_m
    return total + multiwell(u) / (2.0 * epsilon)


# -- time stepping --------------------------------------------------------------

@dataclass
class AcConfig:
    epsilon: float = 0.004
    dt: float | None = None
    c: float | None = None
    max_iters: int = 300
    stop_tol: float = 1e-4
    seed: int | None = 0
    m_eig: int | None = None
    inf_cap: float = 50.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.c is None:
            self.c = 2.01 / self.epsilon
        if self.c <= 2.0 / self.epsilon:
            raise ConfigError(f"splitting constant c={self.c} must exceed 2/epsilon={2.0 / self.epsilon}")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError("dt must be positive")


@dataclass(frozen=True)
class SpectralBasis:
    """Truncated Laplacian eigenbasis paired with the eigenbasis of ``S``."""

    lap: LaplacianSpectrum
    sigma: DenseSpectrum

    def products(self) -> np.ndarray:
        return np.outer(self.lap.values, self.sigma.values)

    def to_hat(self, u):
        return self.lap.vectors.T @ u @ self.sigma.vectors

    def from_hat(self, u_hat):
        return self.lap.vectors @ u_hat @ self.sigma.vectors.T


def prepare_affinity(w, inf_cap: float = 50.0) -> EliminatedAffinity:
    """Cap infinite affinities and eliminate the diagonal."""
    return eliminate_diagonal(np.minimum(np.asarray(w, dtype=float), inf_cap))


def default_dt(basis: SpectralBasis) -> float:
    return 1.0 / (1.0 + float(np.max(np.abs(basis.products()), initial=0.0)))


def volume_forcing(graph: Graph, u, elim: EliminatedAffinity) -> np.ndarray:
    """``(1/2m) k k^T U exp(-W) + k diag(W)^T``."""
    k = graph.degrees
    out = np.outer(k, elim.diag_w)
    if graph.two_m > 0:
        out += np.outer(k, (k @ u) @ elim.volume_kernel) / graph.two_m
    return out


def ac_step(u, graph: Graph, basis: SpectralBasis, elim: EliminatedAffinity, config: AcConfig, dt: float) -> np.ndarray:
    """One convex-split step followed by row projection onto the simplex.

    Solves ``(1 + c dt) U' - dt L U' S = U + dt (c U - forcing(U) - T'(U)/eps)``
    elementwise in the transformed basis.
    """
    c = config.c
    rhs = u + dt * (c * u - volume_forcing(graph, u, elim) - multiwell_grad(u) / config.epsilon)
    pivot = (1.0 + c * dt) - dt * basis.products()
    if np.min(np.abs(pivot)) < PIVOT_FLOOR:
        raise ConfigError(f"singular implicit solve at dt={dt}; use a smaller time step")
    u_hat = basis.to_hat(rhs) / pivot
    return project_rows_to_simplex(basis.from_hat(u_hat))


def _initial_soft(graph, n_hat, init, rng):
    if init is not None:
        u = np.zeros((graph.n_nodes, n_hat))
        u[np.arange(graph.n_nodes), init.labels] = 1.0
        return u
    return project_rows_to_simplex(rng.random((graph.n_nodes, n_hat)))


def ac_run(
    graph: Graph,
    w,
    n_hat: int,
    config: AcConfig | None = None,
    init: Partition | None = None,
    rng=None,
    lap_spectrum: LaplacianSpectrum | None = None,
) -> SolverResult:
    """Run the AC flow and round the result to a hard partition by row argmax."""
    config = config or AcConfig()
    rng = as_rng(rng if rng is not None else config.seed)
    w = np.asarray(w, dtype=float)
    if n_hat < 1:
        raise ConfigError("n_hat must be at least 1")
    if n_hat == 1:
        part = Partition.trivial(graph.n_nodes)
        e = energy(graph, part, w)
        return SolverResult(part, [e], 0, True, e)

    elim = prepare_affinity(w, config.inf_cap)
    if lap_spectrum is None:
        m_eig = config.m_eig or min(2 * n_hat, graph.n_nodes)
        lap_spectrum = smallest_eigenpairs(graph, min(m_eig, graph.n_nodes), seed=0)
    basis = SpectralBasis(lap_spectrum, sym_eig_dense(elim.sigma_hat))
    dt = config.dt if config.dt is not None else default_dt(basis)

    u = _initial_soft(graph, n_hat, init, rng)
    trace = [gl_energy(graph, u, elim, config.epsilon)]
    violations = 0
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        new = ac_step(u, graph, basis, elim, config, dt)
        change = float(np.max(np.abs(new - u)))
        u = new
        trace.append(gl_energy(graph, u, elim, config.epsilon))
        if trace[-1] > trace[-2] + 1e-9 * max(1.0, abs(trace[-2])):
            violations += 1
            log.debug("AC energy rose at step %d: %.6g -> %.6g", it, trace[-2], trace[-1])
        if change < config.stop_tol:
            converged = True
            break
    if violations:
        log.info("AC energy monitor: %d non-monotone steps out of %d (dt=%.3g)", violations, it, dt)

    labels = argmax_random_ties(u, rng)
    part = Partition(labels, n_hat)
    info = {"dt": dt, "monotone_violations": violations, "soft": u}
    return SolverResult(part, trace, it, converged, energy(graph, part, w), info)
