"""Source localization from a partial snapshot.

Pipeline shared by all algorithms: select candidate nodes by how many
observed infected neighbors they have, induce (and if needed patch) a
connected search subgraph, precompute per-observed-node BFS distance rows
on it, then pick the m-node set covering the observed nodes:

* ``ojc``  -- exact minimum-eccentricity m-subset of the candidate set,
  found by a pruned lexicographic enumeration.
* ``ajc``  -- K-Means with max-distance (Jordan-center) cluster updates.
* ``dc`` / ``cc`` -- the same K-Means with distance-centroid and
  closeness-centroid updates (baseline centroid rules).

Sets are ranked by eccentricity, then total distance, then the sorted id
tuple, so every algorithm is a deterministic function of its inputs and
seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .diffusion import Snapshot
from .graph import (Graph, SubgraphView, UNREACHABLE, as_node_set,
                    bfs_distances, connected_components, induced_subgraph,
                    shortest_path, _gather_neighbors)

# Internal stand-in for "no path" in distance matrices; large enough to
# dominate any real hop count, small enough that row sums fit in int64.
_BIG = 1 << 20


class NoObservationsError(ValueError):
    """Localization is undefined on an empty snapshot."""


class InsufficientCandidatesError(RuntimeError):
    """Fewer candidates than requested sources."""

    def __init__(self, candidate_count: int, m: int):
        super().__init__(f"{candidate_count} candidates < {m} sources requested")
        self.candidate_count = candidate_count


class SubgraphTooSmallError(RuntimeError):
    """The search subgraph has fewer nodes than requested sources."""

    def __init__(self, subgraph_nodes: int, m: int):
        super().__init__(f"subgraph has {subgraph_nodes} nodes < {m} sources")
        self.subgraph_nodes = subgraph_nodes


class CentroidRule(Enum):
    JORDAN_CENTER = "jordan_center"
    DISTANCE_CENTROID = "distance_centroid"
    CLOSENESS_CENTROID = "closeness_centroid"


@dataclass(frozen=True)
class Score:
    """Coverage quality of a node set: max hop-distance from any observed
    node (eccentricity), tie-broken by the summed distance.  ``UNREACHABLE``
    in both fields marks a set that cannot reach some observed node; such
    scores rank worst."""

    eccentricity: int
    total: int

    @property
    def unreachable(self) -> bool:
        return self.eccentricity == UNREACHABLE

    @property
    def key(self) -> tuple[float, float]:
        if self.unreachable:
            return (float("inf"), float("inf"))
        return (float(self.eccentricity), float(self.total))

    @classmethod
    def _from_big(cls, ecc: int, total: int) -> "Score":
        if ecc >= _BIG:
            return cls(UNREACHABLE, UNREACHABLE)
        return cls(int(ecc), int(total))

    def __str__(self) -> str:
        if self.unreachable:
            return "Score(unreachable)"
        return f"Score(ecc={self.eccentricity}, total={self.total})"


@dataclass
class CandidateResult:
    """Output of candidate selection: the candidate set K, K+ = K union
    observed, and the connected search subgraph (with any repair patches)."""

    candidates: np.ndarray          # K, parent ids, sorted
    k_plus: np.ndarray              # K union observed, parent ids, sorted
    subgraph: SubgraphView
    threshold: int
    connected: bool                 # False only when repair found no path

    @property
    def patch_edge_count(self) -> int:
        return self.subgraph.patch_edge_count

    @property
    def candidate_count(self) -> int:
        return int(self.candidates.size)

    @property
    def subgraph_nodes(self) -> int:
        return self.subgraph.local_graph.n


@dataclass
class DistanceTable:
    """One BFS row per observed node over the search subgraph's local ids.
    ``rows[i][j]`` is the hop count from observed node i to local node j,
    UNREACHABLE when there is no path inside the subgraph."""

    rows: np.ndarray                # (num_observed, subgraph_nodes) int32
    observed: np.ndarray            # parent ids, sorted; row i belongs to observed[i]
    row_index: dict[int, int]       # parent id -> row
    _big: Optional[np.ndarray] = field(default=None, repr=False)
    _obs_cols: Optional[np.ndarray] = field(default=None, repr=False)

    def big_matrix(self) -> np.ndarray:
        """Rows with UNREACHABLE replaced by a large finite value, for
        vectorized min/max/sum arithmetic."""
        if self._big is None:
            big = self.rows.astype(np.int32, copy=True)
            big[big == UNREACHABLE] = _BIG
            self._big = big
        return self._big

    def observed_cols(self, subgraph: SubgraphView) -> np.ndarray:
        """Local column index of each observed row's own node."""
        if self._obs_cols is None:
            self._obs_cols = np.array(
                [subgraph.from_parent[int(w)] for w in self.observed],
                dtype=np.int64)
        return self._obs_cols


@dataclass
class LocalizationResult:
    """An estimated source set plus search diagnostics."""

    sources_hat: tuple[int, ...]    # parent ids, sorted, size m
    score: Score
    candidate_count: int
    subgraph_nodes: int
    wall_time: float                # seconds: selection + table + search
    restarts_used: Optional[int] = None
    iterations_used: Optional[int] = None
    objective: Optional[float] = None      # rule-specific restart objective
    # Within-restart increases of the eccentricity sequence (an invariant of
    # the max-distance update; any increase is a bug) and of the full
    # (eccentricity, total) sequence (the total can legitimately rise while
    # the eccentricity is pinned by another cluster, so this is reported,
    # not asserted).
    ecc_monotone_violations: int = 0
    score_monotone_violations: int = 0


def select_candidates(g: Graph, snapshot: Snapshot, y: int,
                      rng: Optional[np.random.Generator] = None) -> CandidateResult:
    """Candidate selection: K = nodes with at least ``y`` observed infected
    neighbors; the subgraph is induced by K+ = K union observed and patched
    with shortest paths between components if disconnected."""
    if y < 0:
        raise ValueError("threshold must be non-negative")
    observed = as_node_set(snapshot.observed, g.n)
    if observed.size == 0:
        raise NoObservationsError("no observations: localization is undefined")
    if rng is None:
        rng = np.random.default_rng(0)

    obs_mask = np.zeros(g.n, dtype=bool)
    obs_mask[observed] = True
    counts = np.zeros(g.n, dtype=np.int64)
    if g.edge_count:
        e = g.edges
        np.add.at(counts, e[:, 0], obs_mask[e[:, 1]])
        np.add.at(counts, e[:, 1], obs_mask[e[:, 0]])
    candidates = np.flatnonzero(counts >= y)
    k_plus = np.union1d(candidates, observed)

    base = induced_subgraph(g, k_plus)
    comps = connected_components(base.local_graph)
    if len(comps) <= 1:
        return CandidateResult(candidates=candidates, k_plus=k_plus,
                               subgraph=base, threshold=y, connected=True)

    # Repair: a random representative per component, a random pivot among
    # them, then the shortest path (in the parent graph) from the pivot to
    # every other representative is merged into the subgraph.
    reps = [int(base.to_parent[comp[rng.integers(comp.size)]]) for comp in comps]
    pivot = reps[int(rng.integers(len(reps)))]
    extra_nodes: set[int] = set()
    path_edges: set[tuple[int, int]] = set()
    connected = True
    for rep in reps:
        if rep == pivot:
            continue
        path = shortest_path(g, pivot, rep)
        if path is None:
            connected = False
            continue
        extra_nodes.update(path)
        for a, b in zip(path, path[1:]):
            path_edges.add((a, b) if a < b else (b, a))

    nodes = np.union1d(k_plus, np.fromiter(extra_nodes, dtype=np.int64,
                                           count=len(extra_nodes)))
    local_of = {int(p): i for i, p in enumerate(nodes)}
    in_kplus = np.zeros(g.n, dtype=bool)
    in_kplus[k_plus] = True
    kept: set[tuple[int, int]] = set()
    if g.edge_count:
        e = g.edges
        mask = in_kplus[e[:, 0]] & in_kplus[e[:, 1]]
        kept = {(int(a), int(b)) for a, b in e[mask]}
    patch = sorted(path_edges - kept)
    all_edges = sorted(kept | path_edges)
    local_edges = np.array([(local_of[a], local_of[b]) for a, b in all_edges],
                           dtype=np.int64).reshape(-1, 2)
    view = SubgraphView(g, Graph(nodes.size, local_edges), nodes,
                        patch_edges=[(local_of[a], local_of[b]) for a, b in patch])
    return CandidateResult(candidates=candidates, k_plus=k_plus, subgraph=view,
                           threshold=y, connected=connected)


def build_distance_table(candidate: CandidateResult,
                         snapshot: Snapshot) -> DistanceTable:
    """BFS on the search subgraph (patch edges included) from every
    observed node."""
    sub = candidate.subgraph
    observed = np.unique(np.asarray(snapshot.observed, dtype=np.int64))
    rows = np.empty((observed.size, sub.local_graph.n), dtype=np.int32)
    for i, w in enumerate(observed):
        rows[i] = bfs_distances(sub.local_graph, sub.from_parent[int(w)])
    return DistanceTable(rows=rows, observed=observed,
                         row_index={int(w): i for i, w in enumerate(observed)})


def score_set(table: DistanceTable, members: Sequence[int],
              subgraph: Optional[SubgraphView] = None) -> Score:
    """Score a node set against every observed row.  ``members`` are parent
    ids when ``subgraph`` is given, local ids otherwise."""
    members = list(members)
    if not members:
        raise ValueError("cannot score an empty node set")
    if subgraph is not None:
        missing = [v for v in members if int(v) not in subgraph.from_parent]
        if missing:
            raise ValueError(f"nodes {missing} not in the search subgraph")
        cols = [subgraph.from_parent[int(v)] for v in members]
    else:
        cols = [int(v) for v in members]
    big = table.big_matrix()
    minima = big[:, cols].min(axis=1)
    return Score._from_big(int(minima.max()), int(minima.sum(dtype=np.int64)))


# ---------------------------------------------------------------------------
# Exact search
# ---------------------------------------------------------------------------

def _leaf_scan(big: np.ndarray, cur_min: Optional[np.ndarray], cols: np.ndarray):
    """Best single extension of ``cur_min`` among ``cols``: returns
    (ecc, total, position-in-cols) with ties resolved to the first
    (lowest) column."""
    if cur_min is None:
        m = big[:, cols]
    else:
        m = np.minimum(cur_min[:, None], big[:, cols])
    ecc = m.max(axis=0)
    best_ecc = int(ecc.min())
    at = np.flatnonzero(ecc == best_ecc)
    totals = m[:, at].sum(axis=0, dtype=np.int64)
    j = int(np.argmin(totals))  # first occurrence wins: lowest id on ties
    return best_ecc, int(totals[j]), int(at[j])


def _search_cover(big: np.ndarray, cand_cols: np.ndarray, m: int):
    """Exact minimum of (eccentricity, total) over all m-subsets of the
    candidate columns, lexicographic-smallest set among ties.

    Lexicographic depth-first enumeration over ascending column positions.
    A branch is pruned when even completing it with every remaining
    candidate (elementwise suffix minimum) cannot beat the incumbent; since
    enumeration is lexicographic and the incumbent is replaced only on
    strict improvement, pruning on ties never changes the selected optimum.
    """
    k = cand_cols.size
    dk = np.ascontiguousarray(big[:, cand_cols])
    # suf[:, j] = elementwise min over candidate columns j..k-1
    suf = np.minimum.accumulate(dk[:, ::-1], axis=1)[:, ::-1]

    best = {"ecc": _BIG * 2, "tot": np.iinfo(np.int64).max, "cols": None}

    def beats(ecc: int, tot: int) -> bool:
        return ecc < best["ecc"] or (ecc == best["ecc"] and tot < best["tot"])

    def rec(start: int, depth: int, cur_min: Optional[np.ndarray], chosen: list[int]):
        remaining = m - depth
        if remaining == 1:
            cols = np.arange(start, k)
            ecc, tot, pos = _leaf_scan(dk, cur_min, cols)
            if beats(ecc, tot):
                best["ecc"], best["tot"] = ecc, tot
                best["cols"] = chosen + [start + pos]
            return
        for j in range(start, k - remaining + 1):
            # Bound for this j and everything after it: completing with the
            # whole remaining pool.  Grows as j advances, so a failed bound
            # ends the loop, not just this iteration.
            pool = suf[:, j] if cur_min is None else np.minimum(cur_min, suf[:, j])
            if not beats(int(pool.max()), int(pool.sum(dtype=np.int64))):
                break
            nxt = dk[:, j] if cur_min is None else np.minimum(cur_min, dk[:, j])
            rec(j + 1, depth + 1, nxt, chosen + [j])

    rec(0, 0, None, [])
    cols = best["cols"]
    return [int(cand_cols[c]) for c in cols], Score._from_big(best["ecc"], best["tot"])


def ojc(g: Graph, snapshot: Snapshot, y: int, m: int,
        rng: Optional[np.random.Generator] = None,
        selection_rng: Optional[np.random.Generator] = None) -> LocalizationResult:
    """Exact search: the m-subset of the candidate set with minimum
    infection eccentricity on the search subgraph.

    ``selection_rng``, when given, drives only the candidate-selection
    patch step, so different algorithms can be run against the identical
    search subgraph while keeping their own search randomness.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    t0 = time.perf_counter()
    candidate = select_candidates(g, snapshot, y,
                                  rng=selection_rng if selection_rng is not None
                                  else rng)
    if candidate.candidate_count < m:
        raise InsufficientCandidatesError(candidate.candidate_count, m)
    table = build_distance_table(candidate, snapshot)
    sub = candidate.subgraph
    cand_cols = np.array([sub.from_parent[int(v)] for v in candidate.candidates],
                         dtype=np.int64)
    cols, score = _search_cover(table.big_matrix(), cand_cols, m)
    sources = tuple(int(v) for v in sorted(sub.to_parent[cols]))
    return LocalizationResult(sources_hat=sources, score=score,
                              candidate_count=candidate.candidate_count,
                              subgraph_nodes=candidate.subgraph_nodes,
                              wall_time=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# K-Means search
# ---------------------------------------------------------------------------

def _rule_objective(d: np.ndarray, rule: CentroidRule):
    """Per-column objective of one cluster over its observed rows ``d``.
    Returns (values, take_max) where lower is better unless take_max."""
    if rule is CentroidRule.DISTANCE_CENTROID:
        return d.sum(axis=0, dtype=np.int64), False
    if rule is CentroidRule.CLOSENESS_CENTROID:
        # 1/d summed over the cluster's observed members, skipping the
        # member equal to the candidate itself (d == 0) and unreachable pairs
        inv = np.where((d > 0) & (d < _BIG), 1.0 / np.maximum(d, 1), 0.0)
        return inv.sum(axis=0), True
    raise ValueError(rule)


def _update_center(big: np.ndarray, member_rows: np.ndarray,
                   cand_cols: np.ndarray, rule: CentroidRule) -> tuple[int, float]:
    """Best center for one cluster among ``cand_cols``, judged against the
    cluster's observed rows.  Ties go to the lowest node id (``cand_cols``
    ascending, first occurrence wins)."""
    d = big[np.ix_(member_rows, cand_cols)]
    if rule is CentroidRule.JORDAN_CENTER:
        worst = d.max(axis=0)
        sums = d.sum(axis=0, dtype=np.int64)
        best = np.flatnonzero(worst == worst.min())
        j = best[np.argmin(sums[best])]
        return int(cand_cols[j]), float(worst[j])
    values, take_max = _rule_objective(d, rule)
    j = int(np.argmax(values)) if take_max else int(np.argmin(values))
    return int(cand_cols[j]), float(values[j])


def kmeans_localize(candidate: CandidateResult, table: DistanceTable, m: int,
                    rule: CentroidRule, restarts: int, max_iters: int,
                    rng: np.random.Generator,
                    started_at: Optional[float] = None,
                    center_domain: Optional[np.ndarray] = None,
                    update_scope: str = "subgraph") -> LocalizationResult:
    """K-Means over the search subgraph: random distinct initial centers,
    nearest-center assignment of the observed nodes (ties to the lowest
    center id), per-cluster center updates under ``rule``, stopping when a
    center set repeats or ``max_iters`` is reached.  Empty clusters are
    re-seeded with a uniformly random unused node.

    ``center_domain`` restricts initialization and update candidates to the
    given local node ids (default: every subgraph node).  ``update_scope``
    picks each cluster's update scan: "subgraph" scans the whole domain;
    "observed" scans only the cluster's own observed members, which is how
    the centroid baselines behave (their estimates are always reported
    nodes).

    Across restarts the kept result minimizes the rule's own objective
    (eccentricity Score for the Jordan-center rule, summed cluster distance
    for the distance centroid, negated summed closeness for the closeness
    centroid); the comparable Score is computed for every result.
    """
    if restarts < 1 or max_iters < 1:
        raise ValueError("restarts and max_iters must be at least 1")
    if update_scope not in ("subgraph", "observed"):
        raise ValueError(f"unknown update scope {update_scope!r}")
    t0 = time.perf_counter() if started_at is None else started_at
    nsub = candidate.subgraph_nodes
    if nsub < m:
        raise SubgraphTooSmallError(nsub, m)
    obs_cols = table.observed_cols(candidate.subgraph)
    if center_domain is not None:
        domain = np.unique(np.asarray(center_domain, dtype=np.int64))
    elif update_scope == "observed":
        domain = np.unique(obs_cols)
    else:
        domain = np.arange(nsub, dtype=np.int64)
    if domain.size < m:
        raise SubgraphTooSmallError(int(domain.size), m)
    big = table.big_matrix()

    best_key = None
    best: Optional[tuple[tuple[int, ...], Score, float]] = None
    total_iters = 0
    ecc_violations = 0
    score_violations = 0

    for _ in range(restarts):
        centers = np.sort(rng.choice(domain, size=m, replace=False))
        seen = {tuple(centers)}
        prev_key = None
        for _ in range(max_iters):
            total_iters += 1
            # centers sorted ascending; argmin takes the first on ties
            assign = np.argmin(big[:, centers], axis=1)
            new_centers = np.empty(m, dtype=np.int64)
            used: set[int] = set()
            for ci in range(m):
                rows = np.flatnonzero(assign == ci)
                if update_scope == "observed":
                    cand_cols = np.unique(obs_cols[rows])
                else:
                    cand_cols = domain
                if rows.size == 0 or cand_cols.size == 0:
                    free = np.setdiff1d(domain,
                                        np.fromiter(used, dtype=np.int64,
                                                    count=len(used)))
                    new_centers[ci] = int(free[rng.integers(free.size)]) \
                        if free.size else int(centers[ci])
                else:
                    new_centers[ci], _ = _update_center(big, rows, cand_cols, rule)
                used.add(int(new_centers[ci]))
            centers = np.unique(new_centers)
            while centers.size < m:  # collapsed centers: re-seed distinct ones
                free = np.setdiff1d(domain, centers)
                if free.size == 0:
                    free = np.setdiff1d(np.arange(nsub), centers)
                centers = np.sort(np.append(centers,
                                            free[rng.integers(free.size)]))
            if rule is CentroidRule.JORDAN_CENTER:
                minima = big[:, centers].min(axis=1)
                skey = (int(minima.max()), int(minima.sum(dtype=np.int64)))
                if prev_key is not None:
                    if skey[0] > prev_key[0]:
                        ecc_violations += 1
                    elif skey > prev_key:
                        score_violations += 1
                prev_key = skey
            key = tuple(centers)
            if key in seen:
                break
            seen.add(key)

        minima = big[:, centers].min(axis=1)
        score = Score._from_big(int(minima.max()), int(minima.sum(dtype=np.int64)))
        if rule is CentroidRule.JORDAN_CENTER:
            objective_key = score.key
        elif rule is CentroidRule.DISTANCE_CENTROID:
            objective_key = (float(minima.sum(dtype=np.int64)),)
        else:
            assign = np.argmin(big[:, centers], axis=1)
            closeness = 0.0
            for ci in range(m):
                rows = np.flatnonzero(assign == ci)
                dd = big[rows, centers[ci]]
                ok = (dd > 0) & (dd < _BIG)
                closeness += float((1.0 / dd[ok]).sum())
            objective_key = (-closeness,)
        parents = tuple(int(v) for v in
                        sorted(candidate.subgraph.to_parent[centers]))
        full_key = objective_key + score.key + (parents,)
        if best_key is None or full_key < best_key:
            best_key = full_key
            best = (parents, score, objective_key[0])

    assert best is not None
    parents, score, objective = best
    return LocalizationResult(sources_hat=parents, score=score,
                              candidate_count=candidate.candidate_count,
                              subgraph_nodes=nsub,
                              wall_time=time.perf_counter() - t0,
                              restarts_used=restarts,
                              iterations_used=total_iters,
                              objective=float(objective),
                              ecc_monotone_violations=ecc_violations,
                              score_monotone_violations=score_violations)


def ajc(g: Graph, snapshot: Snapshot, y: int, m: int, restarts: int,
        max_iters: int, rng: np.random.Generator,
        selection_rng: Optional[np.random.Generator] = None) -> LocalizationResult:
    """K-Means approximation of ``ojc``: Jordan-center cluster updates with
    centers drawn from and updated within the candidate set, so its search
    space is exactly the exact search's and its score can never beat it on
    the same subgraph."""
    if m < 1:
        raise ValueError("m must be at least 1")
    t0 = time.perf_counter()
    candidate = select_candidates(g, snapshot, y,
                                  rng=selection_rng if selection_rng is not None
                                  else rng)
    if candidate.candidate_count < m:
        raise InsufficientCandidatesError(candidate.candidate_count, m)
    table = build_distance_table(candidate, snapshot)
    cand_cols = np.array([candidate.subgraph.from_parent[int(v)]
                          for v in candidate.candidates], dtype=np.int64)
    return kmeans_localize(candidate, table, m, CentroidRule.JORDAN_CENTER,
                           restarts, max_iters, rng, started_at=t0,
                           center_domain=cand_cols)


def _centroid_baseline(g: Graph, snapshot: Snapshot, y: int, m: int,
                       restarts: int, max_iters: int, rng: np.random.Generator,
                       rule: CentroidRule,
                       selection_rng: Optional[np.random.Generator]
                       ) -> LocalizationResult:
    # The centroid baselines cluster the observed nodes and report each
    # cluster's best *observed* member; unlike the Jordan-cover algorithms
    # they never propose an unreported node, which is what caps their
    # detection rate at low sample rates.
    if m < 1:
        raise ValueError("m must be at least 1")
    t0 = time.perf_counter()
    candidate = select_candidates(g, snapshot, y,
                                  rng=selection_rng if selection_rng is not None
                                  else rng)
    table = build_distance_table(candidate, snapshot)
    return kmeans_localize(candidate, table, m, rule, restarts, max_iters, rng,
                           started_at=t0, update_scope="observed")


def dc(g: Graph, snapshot: Snapshot, y: int, m: int, restarts: int,
       max_iters: int, rng: np.random.Generator,
       selection_rng: Optional[np.random.Generator] = None) -> LocalizationResult:
    """Distance-centroid K-Means baseline."""
    return _centroid_baseline(g, snapshot, y, m, restarts, max_iters, rng,
                              CentroidRule.DISTANCE_CENTROID, selection_rng)


def cc(g: Graph, snapshot: Snapshot, y: int, m: int, restarts: int,
       max_iters: int, rng: np.random.Generator,
       selection_rng: Optional[np.random.Generator] = None) -> LocalizationResult:
    """Closeness-centroid K-Means baseline."""
    return _centroid_baseline(g, snapshot, y, m, restarts, max_iters, rng,
                              CentroidRule.CLOSENESS_CENTROID, selection_rng)
