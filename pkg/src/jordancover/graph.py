"""Immutable undirected graph with CSR adjacency, plus the traversal
primitives (BFS distances, components, induced subgraphs, shortest paths)
everything else is built on.

Node ids are dense 0-based integers.  Unreachable distances are reported as
the dedicated sentinel ``UNREACHABLE`` (-1), never as a large number.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

# Sentinel for "no path": kept negative so it can never collide with a hop count.
UNREACHABLE = -1

# Row block size for the chunked ER pair scan.  Fixed so that a given seed
# always produces the same graph.
_ER_BLOCK_ROWS = 512


class EdgeListError(ValueError):
    """Malformed edge-list input; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class EdgeListStats:
    """Counters for entries dropped while loading an edge list."""

    duplicate_edges: int = 0
    self_loops: int = 0


class Graph:
    """Undirected simple graph over nodes 0..n-1.

    Adjacency is stored in CSR form (``indptr``, ``indices``) with each
    neighbor list sorted ascending.  ``edges`` holds each undirected edge
    exactly once as a (u, v) row with u < v, sorted lexicographically, and
    ``adj_edge_ids`` maps every CSR slot to the index of its edge in
    ``edges``.  Instances are immutable after construction and safe to share
    across threads and processes.
    """

    __slots__ = ("n", "edge_count", "indptr", "indices", "edges",
                 "adj_edge_ids", "load_stats")

    def __init__(self, n: int, edges: np.ndarray,
                 load_stats: Optional[EdgeListStats] = None):
        if n < 0:
            raise ValueError("node count must be non-negative")
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint out of range")
        self.n = int(n)
        self.edges = _canonical_edges(n, edges)
        self.edge_count = int(self.edges.shape[0])
        self.indptr, self.indices, self.adj_edge_ids = _build_csr(n, self.edges)
        self.load_stats = load_stats

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        return cls(n, pairs)

    def neighbors(self, v: int) -> np.ndarray:
        """Sorted neighbor ids of ``v`` (a view, do not mutate)."""
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < nb.size and nb[i] == v)

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.edge_count})"


def _canonical_edges(n: int, edges: np.ndarray) -> np.ndarray:
    """Drop self-loops and duplicates; return (E, 2) rows with u < v, lex sorted."""
    if edges.shape[0] == 0:
        return np.empty((0, 2), dtype=np.int64)
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    keep = lo != hi
    lo, hi = lo[keep], hi[keep]
    keys = np.unique(lo * n + hi)
    return np.column_stack((keys // n, keys % n))


def _build_csr(n: int, edges: np.ndarray):
    e = edges.shape[0]
    src = np.concatenate((edges[:, 0], edges[:, 1]))
    dst = np.concatenate((edges[:, 1], edges[:, 0]))
    eid = np.concatenate((np.arange(e), np.arange(e)))
    order = np.lexsort((dst, src))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst[order].astype(np.int32), eid[order].astype(np.int64)


def as_node_set(ids: Iterable[int], n: int) -> np.ndarray:
    """Validate and normalize a node set: sorted, duplicate-free, all < n."""
    arr = np.unique(np.asarray(list(ids), dtype=np.int64))
    if arr.size and (arr[0] < 0 or arr[-1] >= n):
        raise ValueError(f"node id out of range for graph with {n} nodes")
    return arr


def generate_er(n: int, p: float, rng: np.random.Generator) -> Graph:
    """Erdos-Renyi G(n, p): each unordered pair is an edge independently
    with probability p.  Bit-identical for a fixed seed."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if n < 2 or p == 0.0:
        return Graph(n, np.empty((0, 2), dtype=np.int64))
    chunks = []
    for a in range(0, n - 1, _ER_BLOCK_ROWS):
        b = min(a + _ER_BLOCK_ROWS, n - 1)
        rows = np.arange(a, b)
        widths = n - 1 - rows
        offsets = np.concatenate(([0], np.cumsum(widths)))
        total = int(offsets[-1])
        if p == 1.0:
            hit = np.arange(total)
        else:
            hit = np.flatnonzero(rng.random(total) < p)
        if hit.size:
            row_of = np.searchsorted(offsets, hit, side="right") - 1
            u = rows[row_of]
            v = u + 1 + (hit - offsets[row_of])
            chunks.append(np.column_stack((u, v)))
    if chunks:
        edges = np.concatenate(chunks)
    else:
        edges = np.empty((0, 2), dtype=np.int64)
    return Graph(n, edges)


def load_edge_list(source) -> Graph:
    """Parse an edge list: one edge per line as two whitespace-separated
    non-negative integers; '#'/'%' comment lines and blank lines ignored.

    Arbitrary ids are compacted to 0..n-1 in first-appearance order.
    Duplicate edges and self-loops are dropped; counts end up in the
    returned graph's ``load_stats``.  ``source`` may be a string, bytes, or
    a file-like object.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")

    id_map: dict[int, int] = {}
    raw_edges: list[tuple[int, int]] = []
    for lineno, line in enumerate(io.StringIO(text), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#%":
            continue
        parts = stripped.split()
        if len(parts) != 2:
            raise EdgeListError(lineno, f"expected two ids, got {len(parts)} tokens")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListError(lineno, f"non-integer id in {stripped!r}") from None
        if a < 0 or b < 0:
            raise EdgeListError(lineno, "negative node id")
        for x in (a, b):
            if x not in id_map:
                id_map[x] = len(id_map)
        raw_edges.append((id_map[a], id_map[b]))

    n = len(id_map)
    self_loops = sum(1 for a, b in raw_edges if a == b)
    seen: set[tuple[int, int]] = set()
    duplicates = 0
    kept = []
    for a, b in raw_edges:
        if a == b:
            continue
        key = (a, b) if a < b else (b, a)
        if key in seen:
            duplicates += 1
        else:
            seen.add(key)
            kept.append(key)
    edges = np.asarray(kept, dtype=np.int64).reshape(-1, 2)
    stats = EdgeListStats(duplicate_edges=duplicates, self_loops=self_loops)
    return Graph(n, edges, load_stats=stats)


def _gather_neighbors(indptr: np.ndarray, indices: np.ndarray,
                      nodes: np.ndarray) -> np.ndarray:
    """All CSR neighbors of ``nodes``, concatenated (with repetition)."""
    starts = indptr[nodes]
    counts = indptr[nodes + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=indices.dtype)
    base = np.repeat(starts - np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
    return indices[base + np.arange(total)]


def bfs_distances(g: Graph, source: int) -> np.ndarray:
    """Hop counts from ``source`` to every node; UNREACHABLE where no path."""
    if not 0 <= source < g.n:
        raise ValueError(f"source {source} out of range for n={g.n}")
    dist = np.full(g.n, UNREACHABLE, dtype=np.int32)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    d = 0
    while frontier.size:
        d += 1
        nxt = _gather_neighbors(g.indptr, g.indices, frontier)
        nxt = nxt[dist[nxt] == UNREACHABLE]
        if nxt.size == 0:
            break
        frontier = np.unique(nxt).astype(np.int64)
        dist[frontier] = d
    return dist


def distance_to_set(dist_rows: Mapping[int, np.ndarray], members: Sequence[int],
                    v: int) -> int:
    """min over u in ``members`` of d(v, u), looked up from precomputed BFS
    rows (a row for u serves d(v, u) = d(u, v)).  UNREACHABLE if no member
    has a path to v."""
    members = list(members)
    if not members:
        raise ValueError("distance to an empty node set is undefined")
    best = None
    for u in members:
        if u in dist_rows:
            d = int(dist_rows[u][v])
        elif v in dist_rows:
            d = int(dist_rows[v][u])
        else:
            raise KeyError(f"no distance row available for node {u}")
        if d != UNREACHABLE and (best is None or d < best):
            best = d
    return UNREACHABLE if best is None else best


def connected_components(g: Graph) -> list[np.ndarray]:
    """Maximal connected node sets, each sorted, ordered by smallest member."""
    label = np.full(g.n, -1, dtype=np.int64)
    comps = []
    for start in range(g.n):
        if label[start] != -1:
            continue
        cid = len(comps)
        label[start] = cid
        frontier = np.array([start], dtype=np.int64)
        members = [frontier]
        while frontier.size:
            nxt = _gather_neighbors(g.indptr, g.indices, frontier)
            nxt = nxt[label[nxt] == -1]
            if nxt.size == 0:
                break
            frontier = np.unique(nxt).astype(np.int64)
            label[frontier] = cid
            members.append(frontier)
        comps.append(np.sort(np.concatenate(members)))
    return comps


class SubgraphView:
    """A graph over a retained subset of a parent graph's nodes.

    ``local_graph`` uses compact local ids; ``to_parent[local]`` and
    ``from_parent[parent]`` translate between the two.  ``patch_edges``
    lists (as local pairs) edges that were not induced but added by
    connectivity repair; they always correspond to real parent edges lying
    on a repair shortest path.
    """

    __slots__ = ("parent", "local_graph", "to_parent", "from_parent", "patch_edges")

    def __init__(self, parent: Graph, local_graph: Graph, to_parent: np.ndarray,
                 patch_edges: Optional[list[tuple[int, int]]] = None):
        self.parent = parent
        self.local_graph = local_graph
        self.to_parent = to_parent
        self.from_parent = {int(p): i for i, p in enumerate(to_parent)}
        self.patch_edges = patch_edges or []

    @property
    def patch_edge_count(self) -> int:
        return len(self.patch_edges)

    def to_parent_ids(self, local_ids: Iterable[int]) -> np.ndarray:
        return self.to_parent[np.asarray(list(local_ids), dtype=np.int64)]

    def __repr__(self) -> str:
        return (f"SubgraphView(nodes={self.local_graph.n}, "
                f"edges={self.local_graph.edge_count}, "
                f"patch_edges={len(self.patch_edges)})")


def induced_subgraph(g: Graph, nodes: Iterable[int]) -> SubgraphView:
    """Subgraph on ``nodes`` with every parent edge whose endpoints are both
    retained.  No patch edges."""
    retained = as_node_set(nodes, g.n)
    local_of = np.full(g.n, -1, dtype=np.int64)
    local_of[retained] = np.arange(retained.size)
    if g.edge_count:
        mask = (local_of[g.edges[:, 0]] >= 0) & (local_of[g.edges[:, 1]] >= 0)
        local_edges = local_of[g.edges[mask]]
    else:
        local_edges = np.empty((0, 2), dtype=np.int64)
    return SubgraphView(g, Graph(retained.size, local_edges), retained)


def shortest_path(g: Graph, u: int, v: int) -> Optional[list[int]]:
    """A minimum-hop path from u to v, or None if unreachable.

    Among equal-length paths the result is the BFS parent-pointer path with
    lowest-id tie-breaking at each expansion, so the output is deterministic.
    """
    for x in (u, v):
        if not 0 <= x < g.n:
            raise ValueError(f"node {x} out of range for n={g.n}")
    if u == v:
        return [u]
    dist = bfs_distances(g, u)
    if dist[v] == UNREACHABLE:
        return None
    # Walk back from v, stepping to the lowest-id neighbor one level closer.
    path = [v]
    cur = v
    while cur != u:
        nb = g.neighbors(cur)
        prev = nb[dist[nb] == dist[cur] - 1].min()
        path.append(int(prev))
        cur = int(prev)
    path.reverse()
    return path
