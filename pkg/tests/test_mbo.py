import numpy as np
import pytest

from graphtension.ac import prepare_affinity, project_rows_to_simplex
from graphtension.energy import eliminate_diagonal, energy
from graphtension.evaluation import nmi
from graphtension.exceptions import ConfigError, DegenerateInputError
from graphtension.graph import Partition, from_edges
from graphtension.mbo import (
    MboConfig,
    TimeSteps,
    estimate_time_steps,
    mbo_diffuse,
    mbo_run,
    mbo_threshold,
    row_sum_projector,
    tangent_basis,
    time_steps_from_eigenvalues,
)
from graphtension.spectral import smallest_eigenpairs

from conftest import random_affinity, random_graph, two_triangles


def test_time_step_examples():
    ts = time_steps_from_eigenvalues([1.0, 4.0], 10.0)
    assert ts.tau == pytest.approx(4.0)
    assert ts.dt_inner == pytest.approx(0.18)


def test_tau_homogeneity(rng):
    eigs = rng.uniform(0.1, 5.0, 12)
    for s in (0.5, 3.0):
        a = time_steps_from_eigenvalues(eigs, 1.0).tau
        b = time_steps_from_eigenvalues(s * eigs, 1.0).tau
        assert b == pytest.approx(a / s)


def test_tau_ignores_zero_modes():
    assert time_steps_from_eigenvalues([0.0, 0.0, 1.0, 4.0], 10.0).tau == pytest.approx(4.0)


def test_all_zero_spectrum_is_degenerate():
    with pytest.raises(DegenerateInputError):
        time_steps_from_eigenvalues(np.zeros(4), 1.0)


def test_substeps_round_up():
    assert TimeSteps(dt_inner=0.3, tau=1.0).n_substeps == 4
    assert TimeSteps(dt_inner=0.25, tau=1.0).n_substeps == 4


def test_dt_inner_respects_bound(rng):
    g = random_graph(rng, 40, 0.2)
    elim = prepare_affinity(random_affinity(rng, 3, lo=0.1))
    basis = tangent_basis(smallest_eigenpairs(g, 6), elim)
    ts = estimate_time_steps(g, basis, elim)
    m = g.two_m / 2
    lam = g.degrees @ g.degrees / m * np.max(np.abs(np.linalg.eigvalsh(elim.volume_kernel)))
    assert ts.dt_inner <= 2.0 / lam


def test_tangent_basis_has_no_growing_modes(rng):
    g = random_graph(rng, 30, 0.2)
    for _ in range(20):
        elim = prepare_affinity(random_affinity(rng, 4, lo=0.0, hi=5.0))
        basis = tangent_basis(smallest_eigenpairs(g, 5), elim)
        assert np.all(basis.products() <= 1e-12)


def test_diffuse_without_forcing_is_identity(rng):
    g = from_edges([], n_nodes=5)
    elim = eliminate_diagonal(np.zeros((3, 3)))
    basis = tangent_basis(smallest_eigenpairs(g, 5), elim)
    u = project_rows_to_simplex(rng.random((5, 3)))
    np.testing.assert_allclose(mbo_diffuse(u, g, basis, elim, 1.0, 0.1), u, atol=1e-12)


def test_single_inner_step_matches_dense_reference(rng):
    g = random_graph(rng, 10, 0.4)
    w = random_affinity(rng, 3)
    elim = prepare_affinity(w)
    basis = tangent_basis(smallest_eigenpairs(g, 10), elim)
    u = project_rows_to_simplex(rng.random((10, 3)))
    dt = 0.01
    lap = g.laplacian().toarray()
    k = g.degrees
    p = row_sum_projector(3)
    s = p @ elim.sigma_hat @ p
    vals, vecs = np.linalg.eigh(s)
    s = (vecs * np.minimum(vals, 0)) @ vecs.T
    kp = p @ elim.volume_kernel @ p
    vals, vecs = np.linalg.eigh(0.5 * (kp + kp.T))
    kern = (np.eye(3) - p) @ elim.volume_kernel @ p + (vecs * np.maximum(vals, 0)) @ vecs.T
    forcing = np.outer(k, k @ u @ kern) / g.two_m + np.outer(k, elim.diag_w) @ p
    op = np.eye(30) - dt * np.kron(s.T, lap)
    x = np.linalg.solve(op, (u - dt * forcing).reshape(-1, order="F")).reshape(10, 3, order="F")
    ref = project_rows_to_simplex(x)
    np.testing.assert_allclose(mbo_diffuse(u, g, basis, elim, dt, dt), ref, atol=1e-8)


def test_concave_volume_modes_stay_bounded(rng):
    # off-diagonal kernel entries above the diagonal make exp(-W) concave on the tangent space
    g = random_graph(rng, 40, 0.2)
    w = np.array([[3.0, -2.0, 1.0], [-2.0, 3.0, 0.5], [1.0, 0.5, 2.0]])
    elim = prepare_affinity(w)
    kp = row_sum_projector(3) @ elim.volume_kernel @ row_sum_projector(3)
    assert np.linalg.eigvalsh(0.5 * (kp + kp.T)).min() < 0
    basis = tangent_basis(smallest_eigenpairs(g, 8), elim)
    u = mbo_diffuse(project_rows_to_simplex(rng.random((40, 3))), g, basis, elim, 50.0, 0.01)
    assert np.all(np.isfinite(u))


def test_diffuse_output_rows_on_simplex(rng):
    g = random_graph(rng, 40, 0.15)
    elim = prepare_affinity(random_affinity(rng, 3))
    basis = tangent_basis(smallest_eigenpairs(g, 6), elim)
    u = mbo_diffuse(project_rows_to_simplex(rng.random((40, 3))), g, basis, elim, 0.5, 0.05)
    np.testing.assert_allclose(u.sum(axis=1), 1.0, atol=1e-12)


def test_threshold_examples():
    elim = eliminate_diagonal([[0.0, 1.0], [1.0, 0.0]])
    # weighted sums are (0.3, 0.7), so the first community wins
    assert mbo_threshold([[0.7, 0.3]], elim, rng=0).labels[0] == 0
    assert mbo_threshold([[0.7, 0.3]], elim, "argmax", rng=0).labels[0] == 0


def test_threshold_ties_use_both_labels():
    elim = eliminate_diagonal([[0.0, 1.0], [1.0, 0.0]])
    seen = {int(mbo_threshold([[0.5, 0.5]], elim, rng=s).labels[0]) for s in range(40)}
    assert seen == {0, 1}


def test_equal_tensions_make_rules_agree(rng):
    w = np.full((4, 4), 2.0)
    np.fill_diagonal(w, 0.0)
    elim = eliminate_diagonal(w)
    u = project_rows_to_simplex(rng.random((200, 4)))
    a = mbo_threshold(u, elim, "sigma-weighted", rng=1)
    b = mbo_threshold(u, elim, "argmax", rng=1)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_unknown_rule():
    with pytest.raises(ConfigError):
        MboConfig(threshold_rule="median")
    with pytest.raises(ConfigError):
        mbo_threshold([[1.0, 0.0]], eliminate_diagonal(np.zeros((2, 2))), "median")


def test_two_triangles_best_of_three():
    g = two_triangles()
    w = np.array([[0.0, 10.0], [10.0, 0.0]])
    runs = [mbo_run(g, w, 2, MboConfig(seed=s)) for s in range(3)]
    best = min(runs, key=lambda r: r.energy)
    assert nmi(best.partition, [0, 0, 0, 1, 1, 1]) == pytest.approx(1.0)


def test_single_community():
    res = mbo_run(two_triangles(), [[0.0]], 1)
    np.testing.assert_array_equal(res.partition.labels, 0)
    assert res.n_iter == 0


def test_returns_best_seen_and_valid_partition(rng):
    g = random_graph(rng, 60, 0.1)
    w = random_affinity(rng, 3, lo=0.5)
    init = Partition(rng.integers(0, 3, 60), 3)
    res = mbo_run(g, w, 3, MboConfig(seed=2, outer_steps=15), init=init)
    assert res.energy == pytest.approx(min(res.energies))
    assert res.energy <= energy(g, init, w)
    assert res.partition.labels.min() >= 0 and res.partition.labels.max() < 3
    assert res.n_iter <= 15


def test_fixed_point_halts():
    g = two_triangles()
    w = np.array([[0.0, 10.0], [10.0, 0.0]])
    comp = Partition([0, 0, 0, 1, 1, 1], 2)
    res = mbo_run(g, w, 2, MboConfig(seed=0), init=comp)
    assert res.converged and res.n_iter == 1
    np.testing.assert_array_equal(res.partition.labels, comp.labels)
