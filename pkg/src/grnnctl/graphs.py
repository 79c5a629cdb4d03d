"""Communication topologies and graph shift operator support.

A :class:`Topology` is a directed graph on ``n`` nodes stored as a boolean
adjacency matrix in receiver-row convention: ``adjacency[i, j]`` is True iff
node ``j`` sends to node ``i``. That matches the support convention for graph
shift operators, where ``S[i, j] != 0`` means row ``i`` aggregates from ``j``.

Sampled topologies follow the nearest-neighbours-on-a-line recipe: ``n``
points uniform on [0, 1], each linked bi-directionally to its ``k`` nearest
under the absolute-difference metric. Self-loops may be recorded on the
diagonal (thresholded supports do this) but are never counted as edges:
a node talking to itself costs no communication.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .linalg import sym_eig

UNREACHABLE = math.inf


@dataclass(frozen=True, eq=False)
class Topology:
    """Unweighted digraph; ``adjacency[i, j]`` True iff edge j -> i."""

    adjacency: np.ndarray
    positions: np.ndarray | None = None

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {adj.shape}")
        object.__setattr__(self, "adjacency", adj)
        if self.positions is not None:
            pos = np.asarray(self.positions, dtype=np.float64)
            if pos.shape != (adj.shape[0],):
                raise ValueError("positions length must equal node count")
            object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_directed_edges(self) -> int:
        """Off-diagonal edge count; self-loops are excluded."""
        a = self.adjacency
        return int(a.sum() - np.diag(a).sum())

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.adjacency, self.adjacency.T))

    def edge_list(self) -> list[tuple[int, int]]:
        """Off-diagonal directed edges as (sender, receiver), sorted."""
        recv, send = np.nonzero(self.adjacency)
        return sorted((int(j), int(i)) for i, j in zip(recv, send) if i != j)

    def self_loops(self) -> list[int]:
        return [int(i) for i in np.nonzero(np.diag(self.adjacency))[0]]


def topology_from_positions(positions, k: int) -> Topology:
    """Deterministic core of the sampling recipe.

    Links each node to its ``k`` nearest others under ``|u_i - u_j|`` (ties
    broken toward the lower index) and symmetrizes, so every link is
    bi-directional.
    """
    pos = np.asarray(positions, dtype=np.float64).ravel()
    n = pos.size
    if n < 2 or not (1 <= k <= n - 1):
        raise ValueError(f"need n >= 2 and 1 <= k <= n-1, got n={n}, k={k}")
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n):
        d = np.abs(pos - pos[i])
        d[i] = np.inf
        nearest = np.argsort(d, kind="stable")[:k]
        adj[nearest, i] = True
        adj[i, nearest] = True
    return Topology(adjacency=adj, positions=pos)


def sample_topology(n: int, k: int, rng: np.random.Generator) -> Topology:
    """Sample the nearest-neighbour line topology on ``n`` nodes."""
    if n < 2 or not (1 <= k <= n - 1):
        raise ValueError(f"need n >= 2 and 1 <= k <= n-1, got n={n}, k={k}")
    return topology_from_positions(rng.random(n), k)


def directed_distance(t: Topology, src: int, dst: int) -> int | float:
    """Directed hop distance src -> dst; ``UNREACHABLE`` (inf) if no path."""
    n = t.n
    if not (0 <= src < n and 0 <= dst < n):
        raise IndexError(f"node index out of range for n={n}")
    if src == dst:
        return 0
    adj = t.adjacency
    visited = np.zeros(n, dtype=bool)
    visited[src] = True
    frontier = np.zeros(n, dtype=bool)
    frontier[src] = True
    dist = 0
    while frontier.any():
        dist += 1
        # out-neighbours of the frontier: rows receiving from any frontier node
        nxt = adj[:, frontier].any(axis=1) & ~visited
        if nxt[dst]:
            return dist
        visited |= nxt
        frontier = nxt
    return UNREACHABLE


def hop_distance_matrix(t: Topology) -> np.ndarray:
    """All-pairs directed hop distances; ``d[i, j]`` = dist(i -> j), inf if none."""
    n = t.n
    out = np.full((n, n), np.inf)
    adj = t.adjacency
    for src in range(n):
        out[src, src] = 0.0
        visited = np.zeros(n, dtype=bool)
        visited[src] = True
        frontier = visited.copy()
        dist = 0
        while frontier.any():
            dist += 1
            nxt = adj[:, frontier].any(axis=1) & ~visited
            out[src, nxt] = dist
            visited |= nxt
            frontier = nxt
    return out


def normalized_adjacency(t: Topology) -> np.ndarray:
    """Adjacency scaled by its spectral radius, so the leading eigenvalue is 1.

    Requires a symmetric topology with at least one edge.
    """
    if not t.is_symmetric():
        raise ValueError("normalized adjacency requires a symmetric topology")
    a = t.adjacency.astype(np.float64)
    if t.num_directed_edges == 0:
        raise ValueError("cannot normalize an edgeless topology")
    w, _ = sym_eig(a)
    rho = float(np.max(np.abs(w)))
    return a / rho


def support_mask(t: Topology) -> np.ndarray:
    """Boolean mask of valid graph shift operators: adjacency plus diagonal."""
    return t.adjacency | np.eye(t.n, dtype=bool)


def export_topology(t: Topology, fmt: str = "dot") -> str:
    """Serialize a topology to DOT or JSON text (deterministic ordering)."""
    if fmt == "dot":
        lines = ["digraph topology {"]
        lines.extend(f"  {i + 1};" for i in range(t.n))
        lines.extend(f"  {j + 1} -> {i + 1};" for j, i in t.edge_list())
        lines.append("}")
        return "\n".join(lines) + "\n"
    if fmt == "json":
        obj = {
            "n": t.n,
            "edges": [[j, i] for j, i in t.edge_list()],
            "self_loops": t.self_loops(),
            "positions": None if t.positions is None else [float(x) for x in t.positions],
        }
        return json.dumps(obj, sort_keys=True)
    raise ValueError(f"unknown topology format: {fmt!r}")


def topology_from_json(text: str) -> Topology:
    obj = json.loads(text)
    n = int(obj["n"])
    adj = np.zeros((n, n), dtype=bool)
    for j, i in obj["edges"]:
        adj[int(i), int(j)] = True
    for i in obj.get("self_loops", []):
        adj[int(i), int(i)] = True
    pos = obj.get("positions")
    return Topology(adjacency=adj, positions=None if pos is None else np.asarray(pos, dtype=np.float64))
