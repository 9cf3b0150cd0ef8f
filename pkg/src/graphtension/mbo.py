"""Graph MBO threshold dynamics for the surface-tension energy.

Each outer step diffuses the indicator matrix of the current partition for a
time ``tau`` under

    U_t = L U S - (1/2m) k k^T U exp(-W) - k diag(W)^T

(the Allen-Cahn drift without the potential) and then thresholds every row
back to a single community.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ._base import SolverResult, argmax_random_ties, argmin_random_ties, as_rng
from .ac import PIVOT_FLOOR, SpectralBasis, prepare_affinity, project_rows_to_simplex
from .energy import EliminatedAffinity, energy
from .exceptions import ConfigError, DegenerateInputError
from .graph import Graph, Partition
from .spectral import DenseSpectrum, LaplacianSpectrum, smallest_eigenpairs, sym_eig_dense

log = logging.getLogger(__name__)

THRESHOLD_RULES = ("sigma-weighted", "argmax")
DT_SAFETY = 0.9
TAU_MULTIPLIER = 8.0


@dataclass
class MboConfig:
    outer_steps: int = 100
    tau: float | None = None
    dt_inner: float | None = None
    threshold_rule: str = "sigma-weighted"
    seed: int | None = 0
    m_eig: int | None = None
    inf_cap: float = 50.0

    def __post_init__(self):
        if self.outer_steps < 1:
            raise ConfigError("outer_steps must be at least 1")
        if self.threshold_rule not in THRESHOLD_RULES:
            raise ConfigError(f"threshold_rule must be one of {THRESHOLD_RULES}")
        if self.tau is not None and self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.dt_inner is not None and self.dt_inner <= 0:
            raise ConfigError("dt_inner must be positive")


@dataclass(frozen=True)
class TimeSteps:
    dt_inner: float
    tau: float

    @property
    def n_substeps(self) -> int:
        return max(1, math.ceil(self.tau / self.dt_inner - 1e-12))


def time_steps_from_eigenvalues(diffusion_eigs, forcing_lambda_max: float) -> TimeSteps:
    """Time steps from eigenvalue estimates of the two linear operators.

    ``diffusion_eigs`` are the eigenvalues of ``U -> L U S`` (products of
    Laplacian and ``S`` eigenvalues); ``tau`` is 8 over the geometric mean of
    the largest and smallest nonzero magnitudes.  ``dt_inner`` is 0.9 times
    the explicit stability bound ``2 / forcing_lambda_max``.
    """
    mags = np.abs(np.asarray(diffusion_eigs, dtype=float)).ravel()
    nonzero = mags[mags > 1e-12 * max(1.0, float(mags.max(initial=0.0)))]
    if nonzero.size == 0:
        raise DegenerateInputError("diffusion operator has an all-zero spectrum")
    tau = TAU_MULTIPLIER / math.sqrt(float(nonzero.max()) * float(nonzero.min()))
    if forcing_lambda_max > 0:
        dt_inner = min(DT_SAFETY * 2.0 / forcing_lambda_max, tau)
    else:
        dt_inner = tau
    return TimeSteps(dt_inner=dt_inner, tau=tau)


def forcing_lambda_max(graph: Graph, elim: EliminatedAffinity) -> float:
    """Largest eigenvalue of ``U -> (1/m) k k^T U exp(-W)``, i.e. ``|k|^2/m * lambda_max``."""
    if graph.two_m <= 0:
        return 0.0
    m = graph.two_m / 2.0
    lam = float(np.max(np.abs(np.linalg.eigvalsh(elim.volume_kernel))))
    return float(graph.degrees @ graph.degrees) / m * lam


def estimate_time_steps(graph: Graph, basis: SpectralBasis, elim: EliminatedAffinity) -> TimeSteps:
    return time_steps_from_eigenvalues(basis.products(), forcing_lambda_max(graph, elim))


def row_sum_projector(n_hat: int) -> np.ndarray:
    """``P = I - 11^T / n_hat``: removes the component that changes row sums."""
    return np.eye(n_hat) - 1.0 / n_hat


def tangent_basis(lap_spectrum: LaplacianSpectrum, elim: EliminatedAffinity) -> SpectralBasis:
    """Spectral basis for ``U -> L U P S P``.

    For row-stochastic ``U`` (and ``L 1 = 0``) this equals ``(L U S) P``, the
    row-sum-preserving part of the diffusion term.  ``S`` itself usually has
    a positive eigenvalue along the row-sum direction, which would make the
    inner loop a backward heat equation.  Tensions that are not negative
    definite on the tangent space leave positive eigenvalues in ``P S P`` as
    well; those modes are frozen (eigenvalue set to 0) for the same reason.
    """
    proj = row_sum_projector(elim.n_hat)
    spec = sym_eig_dense(proj @ elim.sigma_hat @ proj)
    n_pos = int(np.sum(spec.values > 0))
    if n_pos:
        log.debug("freezing %d anti-diffusive tension mode(s)", n_pos)
    return SpectralBasis(lap_spectrum, DenseSpectrum(np.minimum(spec.values, 0.0), spec.vectors))


def forcing_kernel(elim: EliminatedAffinity) -> np.ndarray:
    """``exp(-W) P`` with the concave tangent modes frozen.

    Row-sum-free volumes only see ``P exp(-W) P``.  Where that block has
    negative eigenvalues the explicit forcing grows without bound over a
    diffusion stage, so those eigenvalues are set to 0.  The part acting on
    the row-sum direction is left as is.
    """
    proj = row_sum_projector(elim.n_hat)
    kern = elim.volume_kernel @ proj
    tangent = proj @ kern
    spec = sym_eig_dense(tangent)
    n_neg = int(np.sum(spec.values < -1e-12 * max(1.0, float(np.abs(spec.values).max()))))
    if not n_neg:
        return kern
    log.debug("freezing %d concave volume mode(s)", n_neg)
    clamped = (spec.vectors * np.maximum(spec.values, 0.0)) @ spec.vectors.T
    return kern - tangent + clamped


def mbo_diffuse(u, graph: Graph, basis: SpectralBasis, elim: EliminatedAffinity, tau: float, dt_inner: float) -> np.ndarray:
    """Integrate the diffusion stage for time ``tau``.

    ``basis`` should come from ``tangent_basis``.  ``tau`` is cut into
    ``n = ceil(tau / dt_inner)`` equal substeps.  Each substep treats the
    diffusion term implicitly (diagonal in the spectral basis) and the volume
    forcing, projected by ``P``, explicitly.  The whole loop runs in the
    reduced coordinates ``V_L^T U V_S``; rows are projected to the simplex at
    the end.
    """
    steps = TimeSteps(dt_inner, tau)
    n_sub = steps.n_substeps
    dt = tau / n_sub
    pivot = 1.0 - dt * basis.products()
    if np.min(np.abs(pivot)) < PIVOT_FLOOR:
        raise ConfigError(f"singular implicit solve at dt={dt}; use a smaller time step")

    vl, vs = basis.lap.vectors, basis.sigma.vectors
    k = graph.degrees
    k_hat = vl.T @ k
    # forcing is taken tangent to the row-sum constraint, then moved to the reduced basis
    proj = row_sum_projector(elim.n_hat)
    const_hat = np.outer(k_hat, elim.diag_w @ proj @ vs)
    kern_hat = vs.T @ forcing_kernel(elim) @ vs
    inv_2m = 1.0 / graph.two_m if graph.two_m > 0 else 0.0

    u_hat = vl.T @ np.asarray(u, dtype=float) @ vs
    for _ in range(n_sub):
        vol_hat = k_hat @ u_hat
        forcing = inv_2m * np.outer(k_hat, vol_hat @ kern_hat) + const_hat
        u_hat = (u_hat - dt * forcing) / pivot
    return project_rows_to_simplex(vl @ u_hat @ vs.T)


def mbo_threshold(u, elim: EliminatedAffinity, rule: str = "sigma-weighted", rng=None) -> Partition:
    """Round every row of ``U`` to one community.

    ``sigma-weighted``: ``argmin_a sum_b S_ab U_ib``.  ``argmax``:
    ``argmax_a U_ia``.  Ties are broken uniformly at random.
    """
    rng = as_rng(rng)
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if rule == "sigma-weighted":
        labels = argmin_random_ties(u @ elim.sigma_hat, rng)
    elif rule == "argmax":
        labels = argmax_random_ties(u, rng)
    else:
        raise ConfigError(f"unknown threshold rule {rule!r}")
    return Partition(labels, u.shape[1])


def mbo_run(
    graph: Graph,
    w,
    n_hat: int,
    config: MboConfig | None = None,
    init: Partition | None = None,
    rng=None,
    lap_spectrum: LaplacianSpectrum | None = None,
) -> SolverResult:
    """Alternate diffusion and thresholding; return the best partition seen.

    Stops as soon as a partition recurs (a fixed point or a cycle) or after
    ``outer_steps``.
    """
    config = config or MboConfig()
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
    basis = tangent_basis(lap_spectrum, elim)
    auto = estimate_time_steps(graph, basis, elim) if config.tau is None or config.dt_inner is None else None
    tau = config.tau if config.tau is not None else auto.tau
    dt_inner = config.dt_inner if config.dt_inner is not None else min(auto.dt_inner, tau)

    part = init if init is not None else Partition(rng.integers(0, n_hat, graph.n_nodes), n_hat)
    best, best_e = part, energy(graph, part, w)
    trace = [best_e]
    seen = {part.labels.tobytes()}
    converged = False
    it = 0
    for it in range(1, config.outer_steps + 1):
        u = mbo_diffuse(part.indicator().toarray(), graph, basis, elim, tau, dt_inner)
        part = mbo_threshold(u, elim, config.threshold_rule, rng)
        e = energy(graph, part, w)
        trace.append(e)
        if e < best_e:
            best, best_e = part, e
        key = part.labels.tobytes()
        if key in seen:
            converged = True
            break
        seen.add(key)
    info = {"tau": tau, "dt_inner": dt_inner}
    return SolverResult(best, trace, it, converged, best_e, info)
