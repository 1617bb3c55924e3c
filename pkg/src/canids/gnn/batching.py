"""Dense tensors for one or more window graphs.

A batch holds a block-diagonal stack of window graphs: adjacency blocks
never connect nodes of different windows, so running a forward pass over a
merged batch is exactly equivalent to running it per window.  The
transformer additionally masks attention with the window membership
matrix to keep its all-pairs attention inside each window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from ..features import FeatureTable
from ..graph_stream import WindowGraph


@dataclass(slots=True)
class GraphBatch:
    x: np.ndarray  # (N, F) node features
    adj: np.ndarray  # (N, N) bool, directed edges incl. self-loops
    adj_norm: np.ndarray  # (N, N) degree-normalized adjacency with self-connections
    weights: np.ndarray  # (N, N) accumulated edge weights, seconds
    labels: np.ndarray  # (N,) int
    window_ids: np.ndarray  # (N,) position of each node's window within the batch
    window_indices: list[int]  # stream index per batch window position
    node_ids: list[int]  # can id per row

    @property
    def n_nodes(self) -> int:
        return self.x.shape[0]

    def keys(self) -> list[tuple[int, int]]:
        """(window stream index, can id) per row."""
        return [
            (self.window_indices[w], cid)
            for w, cid in zip(self.window_ids, self.node_ids)
        ]


def normalized_adjacency(adj: np.ndarray) -> np.ndarray:
    """D^-1/2 (A + I) D^-1/2 with D the row sums of A + I."""
    a_tilde = adj.astype(np.float64) + np.eye(adj.shape[0])
    d_inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    return a_tilde * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]


def batch_windows(windows: list[WindowGraph], table: FeatureTable) -> GraphBatch:
    """Stack windows block-diagonally, features looked up per (window, node)."""
    if not windows:
        raise ShapeError("cannot batch zero windows")
    feats = table.by_key()
    offsets = []
    node_lists = []
    total = 0
    for w in windows:
        nodes = w.sorted_nodes()
        offsets.append(total)
        node_lists.append(nodes)
        total += len(nodes)

    x = np.zeros((total, 2))
    adj = np.zeros((total, total), dtype=bool)
    weights = np.zeros((total, total))
    labels = np.zeros(total, dtype=np.int64)
    window_ids = np.zeros(total, dtype=np.int64)
    node_ids: list[int] = []

    for pos, (w, nodes, off) in enumerate(zip(windows, node_lists, offsets)):
        idx = {v: off + i for i, v in enumerate(nodes)}
        for v in nodes:
            row = feats.get((w.index, v))
            if row is None:
                raise ShapeError(f"feature table misses (window {w.index}, id {v:X})")
            x[idx[v]] = (row.pagerank, row.density)
            labels[idx[v]] = w.node_labels[v]
            window_ids[idx[v]] = pos
            node_ids.append(v)
        for (s, t), wt in w.edges.items():
            adj[idx[s], idx[t]] = True
            weights[idx[s], idx[t]] = wt

    if not np.isfinite(x).all():
        raise ShapeError("node features contain non-finite values")
    return GraphBatch(
        x=x,
        adj=adj,
        adj_norm=normalized_adjacency(adj),
        weights=weights,
        labels=labels,
        window_ids=window_ids,
        window_indices=[w.index for w in windows],
        node_ids=node_ids,
    )


def chunk_batches(
    windows: list[WindowGraph], table: FeatureTable, chunk_windows: int = 32
) -> list[GraphBatch]:
    """Batch a window list in fixed-size chunks (last one may be short)."""
    if chunk_windows < 1:
        raise ShapeError(f"chunk_windows must be >= 1, got {chunk_windows}")
    return [
        batch_windows(windows[i : i + chunk_windows], table)
        for i in range(0, len(windows), chunk_windows)
    ]
