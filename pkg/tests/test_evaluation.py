import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import normalized_mutual_info_score

from graphtension.evaluation import (
    RunResult,
    decode_affinity,
    encode_affinity,
    knn_graph,
    knn_indices,
    nmi,
    nonlocal_features,
    read_feature_csv,
)
from graphtension.exceptions import InputError
from graphtension.graph import Partition


def test_nmi_examples():
    a = [0, 0, 1, 1, 2]
    assert nmi(a, a) == pytest.approx(1.0)
    assert nmi([0] * 5, a) == 0.0
    assert nmi([2, 2, 0, 0, 1], a) == pytest.approx(1.0)
    assert nmi(Partition(a, 3), a) == pytest.approx(1.0)


def test_nmi_length_mismatch():
    with pytest.raises(InputError):
        nmi([0, 1], [0, 1, 1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 6)), min_size=2, max_size=60))
def test_nmi_matches_reference_implementation(pairs):
    a, b = map(np.array, zip(*pairs))
    ref = normalized_mutual_info_score(a, b, average_method="arithmetic")
    assert nmi(a, b) == pytest.approx(ref, abs=1e-10)
    assert nmi(a, b) == pytest.approx(nmi(b, a), abs=1e-12)


def test_features_constant_image():
    f = nonlocal_features(np.full((4, 5, 2), 3.0))
    assert f.shape == (20, 18)
    assert np.all(f == f[0])


def test_features_center_pixel():
    img = np.arange(9.0).reshape(3, 3)
    f = nonlocal_features(img)
    weights = np.array([[0.25, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 0.25]])
    np.testing.assert_allclose(f[4], (weights * img).ravel())


def test_features_edge_padding():
    img = np.arange(9.0).reshape(3, 3)
    f = nonlocal_features(img, weights=(1.0, 1.0, 1.0))
    # top-left pixel: rows and columns before the border repeat the border
    np.testing.assert_allclose(f[0], [0, 0, 1, 0, 0, 1, 3, 3, 4])


def test_features_center_only_weights(rng):
    img = rng.random((4, 4, 3))
    f = nonlocal_features(img, weights=(1.0, 0.0, 0.0))
    np.testing.assert_allclose(f.reshape(16, 9, 3)[:, 4, :], img.reshape(16, 3))
    mask = np.ones(9, dtype=bool)
    mask[4] = False
    assert np.all(f.reshape(16, 9, 3)[:, mask, :] == 0)


def test_features_too_small():
    with pytest.raises(InputError):
        nonlocal_features(np.zeros((2, 5)))


def _brute_knn(x, k):
    unit = x / np.linalg.norm(x, axis=1, keepdims=True)
    n = len(x)
    out = []
    for i in range(n):
        cands = [(-(unit[i] @ unit[j]), (j - i) % n, j) for j in range(n) if j != i]
        cands.sort()
        out.append(sorted(c[2] for c in cands[:k]))
    return out


def test_knn_matches_brute_force(rng):
    x = rng.standard_normal((200, 6))
    got = knn_indices(x, 10, block_size=64)
    ref = _brute_knn(x, 10)
    for i in range(200):
        assert sorted(got[i]) == ref[i]


def test_knn_identical_items_form_triangle():
    g = knn_graph(np.ones((3, 2)), k=1)
    assert g.n_edges == 3


def test_knn_orthogonal_items_still_link():
    g = knn_graph(np.eye(4), k=1)
    np.testing.assert_array_equal(g.degrees, [2, 2, 2, 2])


def test_knn_zero_rows_warn(caplog):
    x = np.vstack([np.zeros(3), np.eye(3)])
    with caplog.at_level("WARNING"):
        g = knn_graph(x, k=1)
    assert "zero norm" in caplog.text
    assert g.n_nodes == 4


def test_knn_graph_is_simple(rng):
    g = knn_graph(rng.random((60, 4)), k=5)
    a = g.adjacency
    assert (a != a.T).nnz == 0 and a.diagonal().sum() == 0
    assert g.degrees.min() >= 5


def test_knn_bad_k():
    with pytest.raises(InputError):
        knn_indices(np.eye(3), 3)


def test_feature_csv():
    x = read_feature_csv(io.StringIO("1.0,2.0\n3.5,-1\n"))
    np.testing.assert_allclose(x, [[1, 2], [3.5, -1]])
    with pytest.raises(InputError):
        read_feature_csv(io.StringIO("1.0,abc\n"))


def test_affinity_encoding_round_trip():
    w = np.array([[0.5, math.inf], [math.inf, -0.2]])
    enc = encode_affinity(w)
    assert enc[0][1] == "inf"
    np.testing.assert_array_equal(decode_affinity(enc), w)


def test_run_result_round_trip():
    r = RunResult(
        energy=12.5, n_communities=2, w_matrix=[[0.1, math.inf], [math.inf, 0.3]], runtime_s=1.25,
        seed=3, solver="mcf", score=-0.01, nmi=0.97, params={"nhat": 2},
    )
    back = RunResult.from_json(r.to_json())
    assert back.to_json() == r.to_json()
    assert back.w_matrix[0][1] == math.inf


def test_run_result_omits_missing_fields():
    r = RunResult(1.0, 1, [[0.0]], 0.0, None, "mcf")
    d = r.to_dict()
    assert "score" not in d and "nmi" not in d
    r = RunResult(1.0, 1, [[0.0]], 0.0, 0, "mcf", score="undefined")
    assert RunResult.from_json(r.to_json()).score == "undefined"
