"""Evaluation metrics: permutation-minimal error distance and detection rate.

Distances are measured in the original full graph, not the search subgraph,
since the metrics judge physical proximity of the estimates.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph import Graph, UNREACHABLE, bfs_distances

# Above this set size the permutation loop gives way to the assignment solver.
_BRUTE_FORCE_LIMIT = 6


@dataclass(frozen=True)
class TrialMetrics:
    """Per-trial evaluation of an estimate against the true sources.
    ``error_distance`` is None when some true/estimated pair was unreachable
    (flagged and excluded from aggregate means)."""

    error_distance: Optional[float]
    detection_rate: float
    exact_match: bool


def _cross_distances(g: Graph, s: np.ndarray, s_hat: np.ndarray) -> np.ndarray:
    rows = np.empty((s.size, s_hat.size), dtype=np.int64)
    for i, v in enumerate(s):
        rows[i] = bfs_distances(g, int(v))[s_hat]
    return rows

def _matching_cost_brute(cost: np.ndarray) -> int:
    m = cost.shape[0]
    return min(sum(int(cost[i, p[i]]) for i in range(m))
               for p in itertools.permutations(range(m)))


def _matching_cost_assignment(cost: np.ndarray) -> int:
    rows, cols = linear_sum_assignment(cost)
    return int(cost[rows, cols].sum())


def error_distance(g: Graph, s: Sequence[int], s_hat: Sequence[int]) -> Optional[float]:
    """Minimum over permutations of the average hop-distance between true
    and estimated sources.  Returns None (sentinel) when any cross pair is
    unreachable."""
    s = np.unique(np.asarray(list(s), dtype=np.int64))
    s_hat = np.unique(np.asarray(list(s_hat), dtype=np.int64))
    if s.size != s_hat.size or s.size == 0:
        raise ValueError(f"set sizes differ: {s.size} vs {s_hat.size}")
    cost = _cross_distances(g, s, s_hat)
    if np.any(cost == UNREACHABLE):
        return None
    m = s.size
    if m <= _BRUTE_FORCE_LIMIT:
        best = _matching_cost_brute(cost)
    else:
        best = _matching_cost_assignment(cost)
    return best / m


def detection_rate(s: Sequence[int], s_hat: Sequence[int]) -> float:
    """|S intersect S_hat| / |S|."""
    s = set(int(v) for v in s)
    if not s:
        raise ValueError("true source set is empty")
    return len(s & set(int(v) for v in s_hat)) / len(s)


def evaluate(g: Graph, s: Sequence[int], s_hat: Sequence[int]) -> TrialMetrics:
    """Bundle both metrics for one trial."""
    return TrialMetrics(
        error_distance=error_distance(g, s, s_hat),
        detection_rate=detection_rate(s, s_hat),
        exact_match=set(int(v) for v in s) == set(int(v) for v in s_hat),
    )
