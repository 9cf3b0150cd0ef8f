"""Partition comparison, feature-vector graphs and result records."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import InputError
from .graph import Graph, Partition, from_edges

log = logging.getLogger(__name__)


# -- NMI ----------------------------------------------------------------------

def _labels(p):
    return p.labels if isinstance(p, Partition) else np.asarray(p)


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(a, b) -> float:
    """Normalised mutual information, ``I(a; b) / ((H(a) + H(b)) / 2)``.

    Two single-community partitions score 1.
    """
    la, lb = _labels(a), _labels(b)
    if la.shape != lb.shape:
        raise InputError(f"partitions cover {la.size} and {lb.size} nodes")
    n = la.size
    if n == 0:
        raise InputError("partitions are empty")
    _, ia = np.unique(la, return_inverse=True)
    _, ib = np.unique(lb, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(table, (ia, ib), 1.0)
    ha = _entropy(table.sum(axis=1), n)
    hb = _entropy(table.sum(axis=0), n)
    if ha == 0.0 and hb == 0.0:
        return 1.0
    rows, cols = np.nonzero(table)
    nij = table[rows, cols]
    outer = table.sum(axis=1)[rows] * table.sum(axis=0)[cols]
    mi = float((nij / n * np.log(n * nij / outer)).sum())
    return min(1.0, max(0.0, mi / (0.5 * (ha + hb))))


# -- features and kNN graphs -----------------------------------------------------

def nonlocal_features(image, window_radius: int = 1, weights=(1.0, 0.5, 0.25)) -> np.ndarray:
    """Stack each pixel's neighbourhood into one feature row.

    For every offset ``(dy, dx)`` in the window the neighbour's channel vector
    is scaled by ``weights[min(|dy| + |dx|, len(weights) - 1)]``; with radius 1
    that is 1 for the centre, 0.5 for edge neighbours and 0.25 for corners.
    Borders use replicated-edge padding.  Returns an ``(H * W, C * window)``
    array in row-major pixel order.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3:
        raise InputError("image must be H x W or H x W x C")
    h, w, c = img.shape
    if h < 3 or w < 3:
        raise InputError("image must be at least 3 x 3")
    r = int(window_radius)
    padded = np.pad(img, ((r, r), (r, r), (0, 0)), mode="edge")
    blocks = []
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            weight = weights[min(abs(dy) + abs(dx), len(weights) - 1)]
            blocks.append(weight * padded[r + dy:r + dy + h, r + dx:r + dx + w, :])
    return np.concatenate(blocks, axis=2).reshape(h * w, -1)


def _unit_rows(x):
    norms = np.linalg.norm(x, axis=1)
    zero = norms == 0
    if zero.any():
        log.warning("%d feature rows have zero norm; their similarities are set to 0", int(zero.sum()))
    out = np.zeros_like(x)
    out[~zero] = x[~zero] / norms[~zero, None]
    return out


def knn_indices(features, k: int = 10, block_size: int = 1024) -> np.ndarray:
    """The ``k`` most cosine-similar other items of every item, by exact search.

    Ties in similarity are broken by the cyclic index offset ``(j - i) mod N``,
    so each item prefers the items that follow it.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim != 2:
        raise InputError("features must be a 2-D array")
    if not np.isfinite(x).all():
        raise InputError("features must be finite")
    n = x.shape[0]
    if not 0 < k < n:
        raise InputError(f"k must satisfy 0 < k < {n}")
    unit = _unit_rows(x)
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, block_size):
        stop = min(n, start + block_size)
        rows = np.arange(start, stop)
        sim = unit[start:stop] @ unit.T
        sim[rows - start, rows] = -np.inf
        # k-th largest similarity per row: strictly larger ones are in, equal ones by offset
        kth = -np.partition(-sim, k - 1, axis=1)[:, k - 1]
        for r, i in enumerate(rows):
            above = np.flatnonzero(sim[r] > kth[r])
            ties = np.flatnonzero(sim[r] == kth[r])
            need = k - above.size
            ties = ties[np.argsort((ties - i) % n, kind="stable")[:need]]
            out[i] = np.concatenate([above, ties])
    return out


def knn_graph(features, k: int = 10) -> Graph:
    """Unweighted, union-symmetrised k-nearest-neighbour graph under cosine similarity."""
    nbrs = knn_indices(features, k)
    n = nbrs.shape[0]
    edges = np.column_stack([np.repeat(np.arange(n), k), nbrs.ravel()])
    return from_edges(edges, n)


def read_feature_csv(stream) -> np.ndarray:
    try:
        x = np.loadtxt(stream, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise InputError(f"malformed feature CSV: {exc}") from None
    if not np.isfinite(x).all():
        raise InputError("feature CSV contains non-finite values")
    return x


# -- result records -----------------------------------------------------------------

def _encode(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, (np.floating, np.integer)):
        return _encode(v.item())
    if isinstance(v, np.ndarray):
        return _encode(v.tolist())
    if isinstance(v, dict):
        return {k: _encode(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_encode(x) for x in v]
    return v


def encode_affinity(w) -> list:
    return _encode(np.asarray(w, dtype=float))


def decode_affinity(rows) -> np.ndarray:
    return np.array([[float(x) for x in row] for row in rows], dtype=float)


@dataclass
class RunResult:
    """Summary of one detection run.

    ``score`` is ``None`` without a reference and ``"undefined"`` when the
    reference energy is 0; ``w_matrix`` holds ``"inf"`` for infinite entries
    once serialised.
    """

    energy: float
    n_communities: int
    w_matrix: list
    runtime_s: float
    seed: int | None
    solver: str
    score: float | str | None = None
    nmi: float | None = None
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["w_matrix"] = encode_affinity(self.w_matrix)
        d = _encode(d)
        return {k: v for k, v in d.items() if v is not None}

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> RunResult:
        d = dict(d)
        d["w_matrix"] = decode_affinity(d["w_matrix"]).tolist()
        energy = d["energy"]
        d["energy"] = float(energy)
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> RunResult:
        return cls.from_dict(json.loads(text))
