"""Discrete-time heterogeneous SIR simulation and partial-snapshot sampling.

Slot semantics: at the beginning of slot i every node infected at the start
of the slot attempts, independently per incident edge, to infect each
susceptible neighbor; at the end of the slot every node infected at the
start recovers with its recovery probability.  Nodes infected within slot i
neither attack nor recover during slot i.

All randomness for a run is pre-drawn as one uniform per (edge, slot) plus
one per (node, slot), in that order.  This makes runs bit-identical for a
fixed seed and lets two runs with different infection probabilities share
the exact same draws (monotone coupling).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np

from .graph import Graph, as_node_set

SUSCEPTIBLE = 0
INFECTED = 1
RECOVERED = 2

NEVER_INFECTED = -1

ProbTable = Union[float, Mapping]


class InstanceGenerationError(RuntimeError):
    """Raised when no diffusion instance satisfied the size filter."""

    def __init__(self, attempts: int, size_range: tuple[int, int]):
        super().__init__(
            f"no run hit infected-size range {list(size_range)} in {attempts} attempts")
        self.attempts = attempts


@dataclass
class DiffusionParams:
    """Per-edge infection, per-node recovery, and per-node report probabilities.

    Each field is either one homogeneous value or a table: infection keyed by
    sorted endpoint pair, recovery/report keyed by node id.  Infection and
    report probabilities must lie in (0, 1], recovery in [0, 1].
    """

    infect: ProbTable = 1.0
    recover: ProbTable = 0.0
    report: ProbTable = 1.0

    def __post_init__(self):
        for name, value, lo_open in (("infect", self.infect, True),
                                     ("recover", self.recover, False),
                                     ("report", self.report, True)):
            if isinstance(value, Mapping):
                vals = np.array(list(value.values()), dtype=float)
            else:
                vals = np.array([value], dtype=float)
            if vals.size and (vals.max() > 1.0 or vals.min() < 0.0
                              or (lo_open and vals.min() <= 0.0)):
                lo = "(0, 1]" if lo_open else "[0, 1]"
                raise ValueError(f"{name} probabilities must lie in {lo}")

    def edge_infect_probs(self, g: Graph) -> np.ndarray:
        """Infection probability per canonical edge of ``g``."""
        if not isinstance(self.infect, Mapping):
            return np.full(g.edge_count, float(self.infect))
        out = np.empty(g.edge_count, dtype=float)
        for i, (u, v) in enumerate(g.edges):
            key = (int(u), int(v))
            if key not in self.infect:
                raise KeyError(f"missing infection probability for edge {key}")
            out[i] = self.infect[key]
        if out.size and (out.min() <= 0.0 or out.max() > 1.0):
            raise ValueError("infect probabilities must lie in (0, 1]")
        return out

    def _node_probs(self, g: Graph, table: ProbTable, name: str) -> np.ndarray:
        if not isinstance(table, Mapping):
            return np.full(g.n, float(table))
        out = np.empty(g.n, dtype=float)
        for v in range(g.n):
            if v not in table:
                raise KeyError(f"missing {name} probability for node {v}")
            out[v] = table[v]
        return out

    def node_recover_probs(self, g: Graph) -> np.ndarray:
        return self._node_probs(g, self.recover, "recover")

    def node_report_probs(self, g: Graph) -> np.ndarray:
        return self._node_probs(g, self.report, "report")

    @property
    def is_si(self) -> bool:
        if isinstance(self.recover, Mapping):
            return all(r == 0 for r in self.recover.values())
        return self.recover == 0


@dataclass
class DiffusionOutcome:
    """Final states and infection slots of one simulated run."""

    state: np.ndarray                  # per-node label in {0, 1, 2}
    infect_time: np.ndarray            # slot of infection, NEVER_INFECTED if none
    sources: np.ndarray                # sorted source ids
    duration: int                      # number of slots simulated

    @property
    def ever_infected(self) -> np.ndarray:
        """Sorted ids of nodes that are infected or recovered."""
        return np.flatnonzero(self.state != SUSCEPTIBLE)

    @property
    def infected_count(self) -> int:
        return int(np.count_nonzero(self.state != SUSCEPTIBLE))


@dataclass
class Snapshot:
    """The observed node set: infected-or-recovered nodes that reported."""

    observed: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        self.observed = np.unique(np.asarray(self.observed, dtype=np.int64))

    @property
    def size(self) -> int:
        return int(self.observed.size)


def simulate_sir(g: Graph, params: DiffusionParams, sources, t: int,
                 rng: np.random.Generator) -> DiffusionOutcome:
    """Run the slot loop for ``t`` slots from the given sources."""
    src = np.asarray(list(sources), dtype=np.int64)
    if src.size == 0:
        raise ValueError("at least one source is required")
    if np.unique(src).size != src.size:
        raise ValueError("duplicate source")
    if src.min() < 0 or src.max() >= g.n:
        raise ValueError("source out of range")
    if t < 0:
        raise ValueError("t must be non-negative")
    src = np.sort(src)

    q = params.edge_infect_probs(g)
    r = params.node_recover_probs(g)

    # One uniform per (edge, slot) then one per (node, slot); the layout is
    # independent of the epidemic's path, which is what makes coupled runs
    # comparable draw-for-draw.
    u_inf = rng.random((t, g.edge_count))
    u_rec = rng.random((t, g.n))

    state = np.full(g.n, SUSCEPTIBLE, dtype=np.int8)
    infect_time = np.full(g.n, NEVER_INFECTED, dtype=np.int32)
    state[src] = INFECTED
    infect_time[src] = 0

    for slot in range(1, t + 1):
        frontier = np.flatnonzero(state == INFECTED)
        if frontier.size == 0:
            break
        starts = g.indptr[frontier]
        counts = g.indptr[frontier + 1] - starts
        total = int(counts.sum())
        if total:
            base = np.repeat(starts - np.concatenate(([0], np.cumsum(counts)[:-1])),
                             counts)
            pos = base + np.arange(total)
            targets = g.indices[pos]
            eids = g.adj_edge_ids[pos]
            open_mask = state[targets] == SUSCEPTIBLE
            hit = open_mask & (u_inf[slot - 1, eids] < q[eids])
            newly = np.unique(targets[hit])
            if newly.size:
                state[newly] = INFECTED
                infect_time[newly] = slot
        recovering = frontier[u_rec[slot - 1, frontier] < r[frontier]]
        state[recovering] = RECOVERED

    return DiffusionOutcome(state=state, infect_time=infect_time,
                            sources=src, duration=t)


def sample_snapshot(outcome: DiffusionOutcome, params: DiffusionParams,
                    rng: np.random.Generator) -> Snapshot:
    """Each infected-or-recovered node reports independently with its
    report probability; susceptible nodes never report."""
    active = outcome.ever_infected
    if active.size == 0:
        return Snapshot(np.empty(0, dtype=np.int64))
    if isinstance(params.report, Mapping):
        theta = np.array([params.report[int(v)] for v in active])
    else:
        theta = np.full(active.size, float(params.report))
    reported = active[rng.random(active.size) < theta]
    return Snapshot(reported)


def draw_instance(g: Graph, params: DiffusionParams, m: int, t: int,
                  size_range: tuple[int, int], max_attempts: int,
                  rng: np.random.Generator) -> tuple[DiffusionOutcome, Snapshot]:
    """Draw uniform sources and re-run the diffusion (fresh sources every
    attempt) until the infected-or-recovered count lands in ``size_range``;
    the snapshot is sampled only from the accepted run."""
    lo, hi = size_range
    if m < 1:
        raise ValueError("m must be at least 1")
    if lo > hi:
        raise ValueError("empty size range")
    if max_attempts < 1:
        raise ValueError("max_attempts must be at least 1")
    if m > g.n:
        raise ValueError("more sources than nodes")
    for _ in range(max_attempts):
        sources = np.sort(rng.choice(g.n, size=m, replace=False))
        outcome = simulate_sir(g, params, sources, t, rng)
        if lo <= outcome.infected_count <= hi:
            return outcome, sample_snapshot(outcome, params, rng)
    raise InstanceGenerationError(max_attempts, (lo, hi))


def snapshot_of_all_active(outcome: DiffusionOutcome) -> Snapshot:
    """Snapshot with every infected-or-recovered node observed (report
    probability one, no randomness consumed)."""
    return Snapshot(outcome.ever_infected)


def validate_outcome(g: Graph, outcome: DiffusionOutcome) -> None:
    """Assert the structural invariants of a simulated outcome; raises
    AssertionError with a description on violation."""
    state, it = outcome.state, outcome.infect_time
    assert np.all((state != SUSCEPTIBLE) == (it != NEVER_INFECTED)), \
        "state/infect_time disagree"
    assert np.all(it[outcome.sources] == 0), "source not infected at slot 0"
    assert it.max(initial=0) <= outcome.duration, "infection after observation time"
    # A node infected at slot i was attacked by a neighbor that was already
    # infected at the start of slot i; that attacker's own infection time can
    # be anything up to i - 1 (attempts repeat every slot until recovery).
    infected = np.flatnonzero((it > 0))
    for v in infected:
        nb = g.neighbors(int(v))
        earlier = (it[nb] != NEVER_INFECTED) & (it[nb] <= it[v] - 1)
        assert np.any(earlier), \
            f"node {v} infected at {it[v]} with no earlier-infected neighbor"
