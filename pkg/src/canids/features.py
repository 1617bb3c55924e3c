"""Per-node structural features: weighted damped rank and occurrence density.

The rank iteration starts every node at 1/N and repeats

    rank(v) <- (1-d)/N + d * sum over in-neighbors p of
               (rank(p) / out_degree(p)) / weight(p -> v)

until the L1 change drops below the tolerance.  Self-loops are ignored on
both sides (they neither count toward out-degree nor contribute rank), and
nodes without in-edges rest at the floor (1-d)/N.  Dividing by the edge
weight makes lighter (faster) edges carry more influence.

Weights are treated as relative quantities: each graph's weights are
floored at a small epsilon and rescaled so the lightest edge has weight 1.
Absolute edge weights are timestamp sums in seconds, typically far below
1; raw division by them makes the iteration matrix expansive and the
iterate grows without bound instead of settling.  With the rescale the
per-source contribution factors are bounded by the damping factor, which
makes the iteration a contraction, keeps every score inside (0, 1] and
leaves unit-weight graphs (and so the classic damped rank) untouched.

Density of a node is its share of occurrences among the current window's
frames plus up to ``lookback`` frames preceding the window.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import FeatureError
from .graph_stream import WindowGraph

WEIGHT_FLOOR = 1e-9
DEFAULT_DAMPING = 0.85
DEFAULT_TOL = 1e-9
# 0.85^k must undercut the default tolerance; k ~ 128, so 100 would always
# stop on the iteration cap rather than on tol.
DEFAULT_MAX_ITER = 200
DEFAULT_LOOKBACK = 150

FEATURE_CSV_HEADER = "window,can_id_hex,pagerank,density,label"


@dataclass(slots=True)
class PagerankResult:
    scores: dict[int, float]
    converged: bool
    iterations: int


def pagerank(
    graph: WindowGraph,
    d: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> PagerankResult:
    """Edge-weighted damped rank of every node in one window graph."""
    if not 0 < d < 1:
        raise FeatureError(f"damping factor must be in (0, 1), got {d}")
    nodes = graph.sorted_nodes()
    n = len(nodes)
    if n == 0:
        raise FeatureError("cannot rank an empty graph")
    idx = {v: i for i, v in enumerate(nodes)}

    cross = {
        (s, t): max(w, WEIGHT_FLOOR)
        for (s, t), w in graph.edges.items()
        if s != t
    }
    out_degree = np.zeros(n)
    for (s, _t) in cross:
        out_degree[idx[s]] += 1.0
    w_min = min(cross.values()) if cross else 1.0

    # contribution[t, s] = d / (out_degree(s) * rescaled_weight(s->t))
    contribution = np.zeros((n, n))
    for (s, t), w in cross.items():
        contribution[idx[t], idx[s]] = d / (out_degree[idx[s]] * (w / w_min))

    floor = (1.0 - d) / n
    x = np.full(n, 1.0 / n)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        x_new = floor + contribution @ x
        delta = float(np.abs(x_new - x).sum())
        x = x_new
        if delta < tol:
            converged = True
            break
    return PagerankResult(
        scores={v: float(x[idx[v]]) for v in nodes},
        converged=converged,
        iterations=iterations,
    )


def density(window: WindowGraph, preceding_ids: Sequence[int]) -> dict[int, float]:
    """Occurrence share per window node over window + preceding frames.

    ``preceding_ids`` is the (possibly shorter, near stream start) lookback
    of CAN ids immediately before the window.  Only ids present in the
    window get a density; they occur at least once, so every value is in
    (0, 1].
    """
    population = len(window.frames) + len(preceding_ids)
    counts = dict(window.node_counts)
    for cid in preceding_ids:
        if cid in counts:
            counts[cid] += 1
    return {v: counts[v] / population for v in window.nodes}


@dataclass(frozen=True, slots=True)
class FeatureRow:
    window: int
    can_id: int
    pagerank: float
    density: float
    label: int


@dataclass(slots=True)
class FeatureTable:
    """One row per (window, node), in stream order."""

    rows: list[FeatureRow] = field(default_factory=list)

    def by_key(self) -> dict[tuple[int, int], FeatureRow]:
        return {(r.window, r.can_id): r for r in self.rows}

    def labels(self) -> dict[tuple[int, int], int]:
        return {(r.window, r.can_id): r.label for r in self.rows}

    def write_csv(self, fh: IO[str]) -> None:
        fh.write(FEATURE_CSV_HEADER + "\n")
        for r in self.rows:
            fh.write(
                f"{r.window},{r.can_id:X},{r.pagerank:.9g},{r.density:.9g},{r.label}\n"
            )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            self.write_csv(fh)

    @classmethod
    def load(cls, path: str | Path) -> "FeatureTable":
        rows = []
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != FEATURE_CSV_HEADER.split(","):
                raise FeatureError(f"unexpected feature csv header: {header}")
            for parts in reader:
                if len(parts) != 5:
                    raise FeatureError(f"bad feature row: {parts}")
                rows.append(
                    FeatureRow(
                        window=int(parts[0]),
                        can_id=int(parts[1], 16),
                        pagerank=float(parts[2]),
                        density=float(parts[3]),
                        label=int(parts[4]),
                    )
                )
        return cls(rows=rows)


@dataclass(frozen=True, slots=True)
class FeatureConfig:
    """Everything needed to recompute features for a log deterministically."""

    window_size: int = 100
    lookback: int = DEFAULT_LOOKBACK
    damping: float = DEFAULT_DAMPING
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def validate(self) -> None:
        if self.window_size < 1:
            raise FeatureError(f"window_size must be >= 1, got {self.window_size}")
        if self.lookback < 0:
            raise FeatureError(f"lookback must be >= 0, got {self.lookback}")
        if not 0 < self.damping < 1:
            raise FeatureError(f"damping must be in (0, 1), got {self.damping}")
        if self.tol <= 0 or self.max_iter < 1:
            raise FeatureError("tol must be > 0 and max_iter >= 1")


def make_feature_table(
    windows: Iterable[WindowGraph],
    d: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    lookback: int = DEFAULT_LOOKBACK,
) -> FeatureTable:
    """Join rank, density and node label per (window, node).

    Windows must arrive in stream order; the density lookback is the tail
    of the frames already consumed.
    """
    rows: list[FeatureRow] = []
    tail: list[int] = []  # last `lookback` can ids before the current window
    for window in windows:
        ranks = pagerank(window, d=d, tol=tol, max_iter=max_iter).scores
        dens = density(window, tail)
        for v in window.sorted_nodes():
            rows.append(
                FeatureRow(
                    window=window.index,
                    can_id=v,
                    pagerank=ranks[v],
                    density=dens[v],
                    label=window.node_labels[v],
                )
            )
        if lookback > 0:
            tail.extend(f.can_id for f in window.frames)
            if len(tail) > lookback:
                tail = tail[-lookback:]
    return FeatureTable(rows=rows)
