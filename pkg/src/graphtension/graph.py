"""Sparse graph storage, partitions and cut/volume bookkeeping.

Community labels are 0-based inside the package (``0 .. n_hat - 1``).  The
partition file format is the only place where 1-based community ids appear.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp

from .exceptions import EdgeListParseError, InputError

__all__ = [
    "Graph",
    "Partition",
    "PartitionStats",
    "from_edges",
    "load_edge_list",
    "write_edge_list",
    "partition_stats",
    "induced_subgraph",
    "read_partition",
    "write_partition",
]


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected, unweighted simple graph.

    ``degrees`` and ``two_m`` normally equal the row sums and total degree of
    ``adjacency``.  Subgraphs produced with ``induced_subgraph(...,
    global_volumes=True)`` keep the parent's degrees and ``two_m`` instead, so
    that volumes computed on the subgraph are measured in whole-graph units.
    """

    adjacency: sp.csr_matrix
    degrees: np.ndarray
    two_m: float

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return self.adjacency.nnz // 2

    @property
    def is_embedded(self) -> bool:
        """True when degrees are inherited from a parent graph."""
        return not np.array_equal(self.degrees, _row_sums(self.adjacency))

    def laplacian(self) -> sp.csr_matrix:
        """Combinatorial Laplacian ``diag(A 1) - A`` of the stored adjacency."""
        return (sp.diags(_row_sums(self.adjacency)) - self.adjacency).tocsr()

    def edges(self) -> np.ndarray:
        """(n_edges, 2) array of edges with ``i < j``, sorted."""
        upper = sp.triu(self.adjacency, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        return np.column_stack([upper.row[order], upper.col[order]]).astype(np.int64)


def _row_sums(adjacency):
    return np.asarray(adjacency.sum(axis=1)).ravel()


def from_edges(edges, n_nodes: int | None = None) -> Graph:
    """Build a simple graph from an iterable of ``(i, j)`` pairs.

    Duplicate edges are collapsed and self-loops dropped.  Node ids must be
    non-negative; ids up to the maximum (or ``n_nodes - 1``) become nodes even
    when isolated.
    """
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InputError("edges must be an (n, 2) collection of node-id pairs")
    if arr.size and arr.min() < 0:
        raise InputError("node ids must be non-negative")
    inferred = int(arr.max()) + 1 if arr.size else 0
    if n_nodes is None:
        n_nodes = inferred
    elif n_nodes < inferred:
        raise InputError(f"edge references node {inferred - 1} but n_nodes={n_nodes}")

    keep = arr[:, 0] != arr[:, 1]
    arr = arr[keep]
    rows = np.concatenate([arr[:, 0], arr[:, 1]])
    cols = np.concatenate([arr[:, 1], arr[:, 0]])
    adj = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n_nodes, n_nodes))
    adj.sum_duplicates()
    adj.data[:] = 1.0
    adj.sort_indices()
    degrees = _row_sums(adj)
    return Graph(adjacency=adj, degrees=degrees, two_m=float(degrees.sum()))


def load_edge_list(stream: TextIO | str) -> Graph:
    """Parse a whitespace-separated edge list.

    Lines that are blank or start with ``#`` are skipped.  Extra columns are
    rejected so that weighted files are not silently misread.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    pairs = []
    n_nodes = None
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            header = line[1:].split()
            # "# nodes N ..." written by write_edge_list keeps trailing isolated nodes
            if len(header) >= 2 and header[0] == "nodes" and header[1].isdigit():
                n_nodes = int(header[1])
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListParseError(line_no, raw.rstrip("\n"))
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListParseError(line_no, raw.rstrip("\n")) from None
        if i < 0 or j < 0:
            raise InputError(f"line {line_no}: negative node id in {line!r}")
        pairs.append((i, j))
    return from_edges(pairs, n_nodes)


def write_edge_list(graph: Graph, stream: TextIO) -> None:
    stream.write(f"# nodes {graph.n_nodes} edges {graph.n_edges}\n")
    for i, j in graph.edges():
        stream.write(f"{i} {j}\n")


@dataclass(frozen=True, eq=False)
class Partition:
    """Assignment of every node to one of ``n_hat`` communities (0-based)."""

    labels: np.ndarray
    n_hat: int

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise InputError("partition labels must be a 1-D array")
        if self.n_hat < 1:
            raise InputError("n_hat must be at least 1")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_hat):
            raise InputError(f"labels must lie in [0, {self.n_hat})")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def trivial(cls, n_nodes: int) -> Partition:
        return cls(np.zeros(n_nodes, dtype=np.int64), 1)

    @property
    def n_nodes(self) -> int:
        return self.labels.size

    def indicator(self) -> sp.csr_matrix:
        """Sparse N x n_hat 0/1 matrix ``U`` with ``U[i, g_i] = 1``."""
        n = self.labels.size
        return sp.csr_matrix(
            (np.ones(n), (np.arange(n), self.labels)), shape=(n, self.n_hat)
        )

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_hat)

    def n_nonempty(self) -> int:
        return int(np.count_nonzero(self.sizes()))

    def compact(self) -> Partition:
        """Drop empty communities, keeping labels in order of first use."""
        _, first, inverse = np.unique(self.labels, return_index=True, return_inverse=True)
        order = np.argsort(np.argsort(first))
        return Partition(order[inverse], max(len(first), 1))

    def same_as(self, other: Partition) -> bool:
        return self.n_hat == other.n_hat and np.array_equal(self.labels, other.labels)


@dataclass(frozen=True, eq=False)
class PartitionStats:
    """Cut matrix, community volumes and neighbour counts ``X = A U``."""

    cut: np.ndarray
    vol: np.ndarray
    x: np.ndarray


def partition_stats(graph: Graph, partition: Partition) -> PartitionStats:
    if partition.n_nodes != graph.n_nodes:
        raise InputError(
            f"partition has {partition.n_nodes} nodes, graph has {graph.n_nodes}"
        )
    onehot = np.zeros((partition.n_nodes, partition.n_hat))
    onehot[np.arange(partition.n_nodes), partition.labels] = 1.0
    x = np.asarray(graph.adjacency @ onehot)
    cut = onehot.T @ x
    vol = np.bincount(partition.labels, weights=graph.degrees, minlength=partition.n_hat)
    return PartitionStats(cut=cut, vol=vol.astype(float), x=x)


def induced_subgraph(graph: Graph, nodes, global_volumes: bool = False):
    """Subgraph on ``nodes`` with all internal edges.

    Returns ``(subgraph, index_map)`` where ``index_map[local] = global``.
    With ``global_volumes=True`` the subgraph keeps the parent's degrees and
    ``two_m`` (used when re-partitioning one community of a larger graph).
    """
    nodes = np.asarray(nodes, dtype=np.int64).ravel()
    if nodes.size == 0:
        raise InputError("node set must be non-empty")
    if nodes.min() < 0 or nodes.max() >= graph.n_nodes:
        raise InputError("node set contains ids outside the graph")
    index_map = np.unique(nodes)
    sub = graph.adjacency[index_map][:, index_map].tocsr()
    sub.sort_indices()
    if global_volumes:
        return Graph(sub, graph.degrees[index_map].copy(), graph.two_m), index_map
    degrees = _row_sums(sub)
    return Graph(sub, degrees, float(degrees.sum())), index_map


def read_partition(stream: TextIO | str, n_nodes: int | None = None) -> Partition:
    """Read ``node_id community_id`` lines (0-based nodes, 1-based communities)."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    entries = {}
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            node, comm = int(parts[0]), int(parts[1])
        except (ValueError, IndexError):
            raise EdgeListParseError(line_no, raw.rstrip("\n"), "expected 'node_id community_id'") from None
        if len(parts) != 2:
            raise EdgeListParseError(line_no, raw.rstrip("\n"), "expected 'node_id community_id'")
        if node < 0 or comm < 1:
            raise InputError(f"line {line_no}: node ids are 0-based and community ids 1-based")
        if node in entries:
            raise InputError(f"line {line_no}: node {node} labelled twice")
        entries[node] = comm - 1
    if n_nodes is None:
        n_nodes = max(entries) + 1 if entries else 0
    missing = n_nodes - len(entries)
    if missing or (entries and max(entries) >= n_nodes):
        raise InputError(f"partition must label every node 0..{n_nodes - 1} exactly once")
    labels = np.fromiter((entries[i] for i in range(n_nodes)), dtype=np.int64, count=n_nodes)
    n_hat = int(labels.max()) + 1 if n_nodes else 1
    return Partition(labels, n_hat)


def write_partition(partition: Partition, stream: TextIO) -> None:
    for i, label in enumerate(partition.labels):
        stream.write(f"{i} {label + 1}\n")


def relabel_from_groups(groups: Iterable[np.ndarray], n_nodes: int) -> Partition:
    labels = np.full(n_nodes, -1, dtype=np.int64)
    k = 0
    for k, members in enumerate(groups):
        labels[members] = k
    if (labels < 0).any():
        raise InputError("groups do not cover every node")
    return Partition(labels, k + 1)
