"""Conflict graph over ungranted D2D pairs and the greedy MIS heuristic."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import DuePair


@dataclass(frozen=True)
class ConflictGraph:
    """Undirected graph keyed by DUE id; adjacency maps id -> neighbor ids.

    No self-loops; adjacency is symmetric. Instances are treated as
    immutable: removal operations return new graphs.
    """

    vertices: frozenset[int]
    adjacency: dict[int, frozenset[int]]

    def __post_init__(self) -> None:
        for v, nbrs in self.adjacency.items():
            if v in nbrs:
                raise ValueError(f"self-loop at vertex {v}")
            for u in nbrs:
                if v not in self.adjacency.get(u, frozenset()):
                    raise ValueError(f"asymmetric edge ({v}, {u})")

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adjacency.get(u, frozenset())

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def edges(self) -> list[tuple[int, int]]:
        return sorted(
            (u, v) for u, nbrs in self.adjacency.items() for v in nbrs if u < v
        )

    def induced(self, ids: Iterable[int]) -> "ConflictGraph":
        """Subgraph induced on ids (must all be vertices)."""
        keep = frozenset(ids)
        missing = keep - self.vertices
        if missing:
            raise ValueError(f"unknown vertex ids {sorted(missing)}")
        return ConflictGraph(
            vertices=keep,
            adjacency={v: self.adjacency[v] & keep for v in keep},
        )


def pair_distance(a: DuePair, b: DuePair, mode: str = "min_endpoint") -> float:
    """Distance between two D2D pairs.

    "min_endpoint": minimum over the four Tx/Rx endpoint distances (mutual
    interference is dominated by the closest transmitter-receiver
    coupling). "centroid": distance between the pairs' midpoints.
    """
    if mode == "min_endpoint":
        pts_a = (a.tx_position, a.rx_position)
        pts_b = (b.tx_position, b.rx_position)
        return min(
            float(np.hypot(pa[0] - pb[0], pa[1] - pb[1]))
            for pa in pts_a
            for pb in pts_b
        )
    if mode == "centroid":
        ca = ((a.tx_position[0] + a.rx_position[0]) / 2.0,
              (a.tx_position[1] + a.rx_position[1]) / 2.0)
        cb = ((b.tx_position[0] + b.rx_position[0]) / 2.0,
              (b.tx_position[1] + b.rx_position[1]) / 2.0)
        return float(np.hypot(ca[0] - cb[0], ca[1] - cb[1]))
    raise ValueError(f"unknown distance mode {mode!r}")


def build_conflict_graph(
    due_pairs: Sequence[DuePair],
    threshold_m: float,
    mode: str = "min_endpoint",
) -> ConflictGraph:
    """One vertex per DUE pair; edge wherever the pair distance is below threshold."""
    if threshold_m <= 0.0:
        raise ValueError(f"threshold must be positive, got {threshold_m}")
    n = len(due_pairs)
    ids = [p.id for p in due_pairs]
    if n == 0:
        return ConflictGraph(frozenset(), {})

    if mode == "min_endpoint":
        pts = np.array(
            [[p.tx_position, p.rx_position] for p in due_pairs], dtype=float
        )  # (n, 2 endpoints, 2 coords)
        flat = pts.reshape(2 * n, 2)
        diff = flat[:, None, :] - flat[None, :, :]
        d4 = np.hypot(diff[..., 0], diff[..., 1]).reshape(n, 2, n, 2)
        dist = d4.min(axis=(1, 3))
    elif mode == "centroid":
        cent = np.array(
            [[(p.tx_position[0] + p.rx_position[0]) / 2.0,
              (p.tx_position[1] + p.rx_position[1]) / 2.0] for p in due_pairs],
            dtype=float,
        )
        diff = cent[:, None, :] - cent[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
    else:
        raise ValueError(f"unknown distance mode {mode!r}")

    close = dist < threshold_m
    np.fill_diagonal(close, False)
    adjacency = {
        ids[i]: frozenset(ids[j] for j in np.nonzero(close[i])[0]) for i in range(n)
    }
    return ConflictGraph(frozenset(ids), adjacency)


def maximal_independent_set(g: ConflictGraph) -> set[int]:
    """Greedy minimum-degree-first maximal independent set.

    Repeatedly take the minimum-degree vertex (ties to the lowest id), add
    it, and delete it together with its neighbors. The result is
    independent and maximal, is never empty on a non-empty graph, and is
    deterministic.
    """
    alive = set(g.vertices)
    degree = {v: len(g.adjacency[v] & alive) for v in alive}
    chosen: set[int] = set()
    while alive:
        v = min(alive, key=lambda u: (degree[u], u))
        chosen.add(v)
        removed = (g.adjacency[v] & alive) | {v}
        alive -= removed
        for w in removed:
            for u in g.adjacency[w] & alive:
                degree[u] -= 1
    return chosen


def remove_vertices(g: ConflictGraph, ids: Iterable[int]) -> ConflictGraph:
    """Induced subgraph with ids deleted; unknown ids are an error."""
    drop = frozenset(ids)
    missing = drop - g.vertices
    if missing:
        raise ValueError(f"unknown vertex ids {sorted(missing)}")
    return g.induced(g.vertices - drop)


def edge_list_text(g: ConflictGraph) -> str:
    """Plain debugging dump: one "u v" pair per line, sorted."""
    return "".join(f"{u} {v}\n" for u, v in g.edges())


def dump_edge_list(g: ConflictGraph, path: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(edge_list_text(g))
