"""Eigen-decompositions used by the pseudospectral AC and MBO solvers."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .exceptions import ConvergenceError, InputError
from .graph import Graph

log = logging.getLogger(__name__)

# Shift-invert needs a sparse LU of L + shift*I; past this size the fill-in on
# expander-like graphs gets expensive and the reflected operator is used.
SHIFT_INVERT_MAX_NODES = 6000
DENSE_MAX_NODES = 3000


@dataclass(frozen=True)
class LaplacianSpectrum:
    """``m_eig`` smallest eigenpairs of ``L = diag(k) - A`` (ascending)."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def m_eig(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class DenseSpectrum:
    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def _residuals(lap, values, vectors):
    r = lap @ vectors - vectors * values
    return np.linalg.norm(r, axis=0) / np.maximum(np.linalg.norm(vectors, axis=0), 1e-300)


def _krylov_smallest(lap, m_eig, tol, rng, max_iter):
    n = lap.shape[0]
    scale = max(1.0, 2.0 * float(np.max(np.abs(lap.diagonal()), initial=0.0)))
    v0 = rng.standard_normal(n)
    try:
        if n <= SHIFT_INVERT_MAX_NODES:
            ncv = min(n, max(2 * m_eig + 1, 20))
            values, vectors = spla.eigsh(
                lap.tocsc(), k=m_eig, sigma=-1e-3, which="LM", v0=v0,
                ncv=ncv, tol=tol * 1e-2, maxiter=max_iter,
            )
        else:
            reflected = spla.LinearOperator(
                (n, n), matvec=lambda x: scale * x - lap @ x, dtype=float
            )
            ncv = min(n, max(4 * m_eig, 40))
            mu, vectors = spla.eigsh(
                reflected, k=m_eig, which="LA", v0=v0, ncv=ncv, tol=tol * 1e-2, maxiter=max_iter,
            )
            values = scale - mu
    except spla.ArpackNoConvergence as exc:
        best = np.inf
        if exc.eigenvalues is not None and len(exc.eigenvalues):
            best = float(np.max(_residuals(lap, exc.eigenvalues, exc.eigenvectors)))
        raise ConvergenceError("Laplacian eigensolver did not converge", best) from exc
    # Clusters of (near) repeated eigenvalues can come back slightly
    # non-orthogonal; re-orthonormalise and take Rayleigh quotients.
    vectors, _ = np.linalg.qr(vectors)
    values = np.einsum("ij,ij->j", vectors, lap @ vectors)
    return values, vectors


def smallest_eigenpairs(
    graph: Graph,
    m_eig: int,
    tol: float = 1e-10,
    seed: int = 0,
    max_iter: int | None = None,
) -> LaplacianSpectrum:
    """Smallest ``m_eig`` eigenpairs of the combinatorial Laplacian.

    The Laplacian is block diagonal over connected components, so each
    component is solved on its own and the spectra are merged; this makes the
    zero eigenvalue's multiplicity exact.  Components are handled with
    implicitly restarted Lanczos (ARPACK), in shift-invert mode around a small
    negative shift for moderate sizes and on the reflected operator
    ``b I - L`` for large ones.  Components too small for a Krylov run
    (at most ``m_eig + 1`` nodes), or small ones where ``m_eig`` is a large
    share of the nodes, are decomposed densely.

    Residuals ``||L v - lambda v||`` are checked against ``tol * max(1, ||L||)``.
    """
    n = graph.n_nodes
    if not 1 <= m_eig <= n:
        raise InputError(f"m_eig must lie in [1, {n}], got {m_eig}")
    lap = graph.laplacian().astype(float)
    scale = max(1.0, 2.0 * float(np.max(np.abs(lap.diagonal()), initial=0.0)))
    rng = np.random.default_rng(seed)

    n_comp, comp = connected_components(graph.adjacency, directed=False)
    all_values, blocks = [], []
    for c in range(n_comp):
        members = np.flatnonzero(comp == c)
        sub = lap[members][:, members]
        k = min(m_eig, members.size)
        if members.size <= m_eig + 1 or (members.size <= DENSE_MAX_NODES and 4 * k >= members.size):
            values, vectors = sla.eigh(sub.toarray(), subset_by_index=[0, k - 1])
        else:
            values, vectors = _krylov_smallest(sub, k, tol, rng, max_iter)
        all_values.append(values)
        blocks.append((members, vectors))

    values = np.concatenate(all_values)
    owner = np.concatenate([np.full(v.size, i) for i, v in enumerate(all_values)])
    column = np.concatenate([np.arange(v.size) for v in all_values])
    order = np.argsort(values, kind="stable")[:m_eig]
    vectors = np.zeros((n, m_eig))
    for out, idx in enumerate(order):
        members, vecs = blocks[owner[idx]]
        vectors[members, out] = vecs[:, column[idx]]
    values = values[order]

    res = _residuals(lap, values, vectors)
    if res.size and np.max(res) > tol * scale:
        raise ConvergenceError("Laplacian eigenpair residual above tolerance", float(np.max(res)))
    return LaplacianSpectrum(values, vectors)


def sym_eig_dense(matrix) -> DenseSpectrum:
    """Full eigen-decomposition of a small symmetric matrix."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError("matrix must be square")
    a = 0.5 * (a + a.T)
    values, vectors = np.linalg.eigh(a)
    return DenseSpectrum(values, vectors)


def laplacian_dense_spectrum(graph: Graph) -> DenseSpectrum:
    """Full dense decomposition; only sensible for small graphs."""
    return sym_eig_dense(graph.laplacian().toarray())
