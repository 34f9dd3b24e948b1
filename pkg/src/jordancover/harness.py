"""Experiment orchestration: seeded trial generation, algorithm dispatch
with threshold fallback, metric evaluation, invariant checking, theory-bound
reporting, CSV output, and the named experiment presets.

Every trial derives its own seed from (master seed, trial index) through a
splitmix64 mix, so results are independent of execution order and of the
worker-pool size.  The instance for trial i depends only on that seed, never
on the threshold cell, so threshold sweeps see identical diffusions.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import yaml

from .diffusion import (DiffusionOutcome, DiffusionParams, InstanceGenerationError,
                        Snapshot, draw_instance, sample_snapshot, simulate_sir)
from .graph import Graph, UNREACHABLE, bfs_distances, generate_er, load_edge_list
from .localization import (InsufficientCandidatesError, LocalizationResult,
                           NoObservationsError, Score, SubgraphTooSmallError,
                           ajc, cc, dc, ojc, select_candidates)
from .metrics import detection_rate, error_distance

ALGORITHMS = ("OJC", "AJC", "DC", "CC")

CSV_HEADER = ("trial,algorithm,Y,theta,m,t,infected,observed,candidates,"
              "subgraph_nodes,ecc,total,err_dist,det_rate,exact,wall_ms,fallback_Y")

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Fixed labels for deriving independent per-purpose streams inside a trial.
_TAG_INSTANCE = 0
_TAG_ALGO = {"OJC": 1, "AJC": 2, "DC": 3, "CC": 4}
_TAG_VALIDATE = 7
_TAG_SELECT = 8
_TAG_GRAPH = 101
_TAG_SCAN = 102


def derive_seed(master: int, index: int) -> int:
    """splitmix64-style derivation: mix (master + (index+1) * golden gamma)
    through the splitmix64 finalizer.  Stable across platforms."""
    z = (master + _GOLDEN * (index + 1)) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class TScanError(RuntimeError):
    """No simulated duration produced outbreak sizes in the target range."""


# ---------------------------------------------------------------------------
# Theory bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TheoryBounds:
    """Quantities locating a configuration relative to the asymptotic
    detection/impossibility conditions.  Natural logarithms throughout.
    ``t_u`` is None when the average growth factor mu*q is at most 1 (the
    full-infection horizon is undefined there)."""

    mu: float                       # average degree n*p
    t_u: Optional[int]              # ceil(ln n / (ln mu + ln q)) + 2
    c1_value: float                 # mu*q*theta / ln n
    y_over_muqtheta: float          # Y / (mu*q*theta)
    t_upper_c3: float               # (2/3) * ln n / ln mu
    d_sources: Optional[int] = None  # max pairwise hop distance among sources


def compute_theory_bounds(n: int, p: float, q: float, theta: float, y: int,
                          sources: Optional[Sequence[int]] = None,
                          g: Optional[Graph] = None) -> TheoryBounds:
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0 < p <= 1 or not 0 < q <= 1 or not 0 < theta <= 1:
        raise ValueError("p, q, theta must lie in (0, 1]")
    mu = n * p
    log_growth = math.log(mu) + math.log(q)
    t_u = None
    if log_growth > 0:
        t_u = math.ceil(math.log(n) / log_growth) + 2
    d_sources = None
    if sources is not None and g is not None and len(sources) >= 2:
        src = list(sources)
        worst = 0
        for v in src:
            row = bfs_distances(g, int(v))[src]
            if np.any(row == UNREACHABLE):
                worst = UNREACHABLE
                break
            worst = max(worst, int(row.max()))
        d_sources = worst
    # the c3 duration ceiling degenerates when the average degree is <= 1
    t_upper = math.inf if mu <= 1.0 else (2.0 / 3.0) * math.log(n) / math.log(mu)
    return TheoryBounds(
        mu=mu,
        t_u=t_u,
        c1_value=mu * q * theta / math.log(n),
        y_over_muqtheta=y / (mu * q * theta),
        t_upper_c3=t_upper,
        d_sources=d_sources,
    )


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """One experiment: a graph, a diffusion law, a threshold sweep, and the
    algorithms to race on identical snapshots."""

    graph_er: Optional[tuple[int, float]] = None     # (n, p)
    graph_edge_list: Optional[str] = None            # path
    q: Union[float, str] = 0.8                       # value or per-edge file
    r: float = 0.0
    theta: float = 1.0
    m: int = 2
    t_fixed: Optional[int] = None                    # None means scan for size
    size_range: tuple[int, int] = (100, 300)
    y_values: tuple[int, ...] = (1,)
    algorithms: tuple[str, ...] = ("OJC", "AJC")
    restarts: int = 100
    max_iters: int = 32
    trials: int = 100
    seed: int = 1
    dc_cc_mode: str = "shared_subgraph"              # or "full_graph"
    max_attempts: int = 200
    min_source_distance: int = 0                     # 0 disables the knob
    measure_time: bool = True
    validate: bool = True
    workers: Optional[int] = None                    # None: JL_THREADS or cpu count

    def __post_init__(self):
        if (self.graph_er is None) == (self.graph_edge_list is None):
            raise ValueError("exactly one of graph_er / graph_edge_list is required")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.dc_cc_mode not in ("shared_subgraph", "full_graph"):
            raise ValueError(f"unknown dc_cc_mode {self.dc_cc_mode!r}")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ValueError(f"unknown algorithms {unknown}")
        self.y_values = tuple(int(y) for y in self.y_values)
        if any(y < 0 for y in self.y_values):
            raise ValueError("thresholds must be non-negative")
        if self.graph_er is not None:
            n, p = self.graph_er
            if not 0 <= p <= 1:
                raise ValueError("wiring probability must lie in [0, 1]")
            self.graph_er = (int(n), float(p))
        lo, hi = self.size_range
        if lo > hi:
            raise ValueError("empty size range")

    @classmethod
    def from_dict(cls, raw: dict, overrides: Optional[dict] = None) -> "ExperimentConfig":
        """Build from a parsed config-file tree; ``overrides`` (CLI flags)
        win over file values."""
        raw = dict(raw)
        if overrides:
            raw.update({k: v for k, v in overrides.items() if v is not None})
        graph = raw.get("graph", {})
        diffusion = raw.get("diffusion", {})
        t_spec = raw.get("t", "scan")
        if isinstance(t_spec, dict):
            t_fixed = t_spec.get("fixed")
        elif t_spec == "scan":
            t_fixed = None
        else:
            t_fixed = int(t_spec)
        y_raw = raw.get("Y", raw.get("y", 1))
        y_values = tuple(y_raw) if isinstance(y_raw, (list, tuple)) else (int(y_raw),)
        er = graph.get("er")
        return cls(
            graph_er=(er["n"], er["p"]) if er else None,
            graph_edge_list=graph.get("edge_list"),
            q=diffusion.get("q", 0.8),
            r=diffusion.get("r", 0.0),
            theta=diffusion.get("theta", 1.0),
            m=raw.get("m", 2),
            t_fixed=t_fixed,
            size_range=tuple(raw.get("size_range", (100, 300))),
            y_values=y_values,
            algorithms=tuple(raw.get("algorithms", ("OJC", "AJC"))),
            restarts=raw.get("restarts", 100),
            max_iters=raw.get("max_iters", 32),
            trials=raw.get("trials", 100),
            seed=raw.get("seed", 1),
            dc_cc_mode=raw.get("dc_cc_mode", "shared_subgraph"),
            max_attempts=raw.get("max_attempts", 200),
            min_source_distance=raw.get("min_source_distance", 0),
            measure_time=raw.get("measure_time", True),
            validate=raw.get("validate", True),
            workers=raw.get("workers"),
        )

    @classmethod
    def from_yaml(cls, path, overrides: Optional[dict] = None) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f) or {}
        return cls.from_dict(raw, overrides)

    def diffusion_params(self, g: Graph) -> DiffusionParams:
        q = self.q
        if isinstance(q, str):
            q = _load_edge_probs(q)
        return DiffusionParams(infect=q, recover=self.r, report=self.theta)

    def build_graph(self) -> Graph:
        if self.graph_er is not None:
            n, p = self.graph_er
            return generate_er(n, p, np.random.default_rng(
                derive_seed(self.seed, _TAG_GRAPH)))
        with open(self.graph_edge_list, "r", encoding="utf-8") as f:
            return load_edge_list(f)

    def effective_workers(self) -> int:
        if self.workers is not None:
            return max(1, int(self.workers))
        env = os.environ.get("JL_THREADS")
        if env:
            return max(1, int(env))
        return os.cpu_count() or 1

    def echo_dict(self) -> dict:
        """Flat provenance view written into output headers."""
        d = {}
        for k, v in asdict(self).items():
            if v is None:
                continue
            if isinstance(v, tuple):
                v = list(v)
            d[k] = v
        return d


def _load_edge_probs(path: str) -> dict:
    """Per-edge infection probabilities: lines of 'u v q'."""
    table = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            s = line.strip()
            if not s or s[0] in "#%":
                continue
            parts = s.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'u v q'")
            u, v, q = int(parts[0]), int(parts[1]), float(parts[2])
            table[(min(u, v), max(u, v))] = q
    return table


# ---------------------------------------------------------------------------
# Size-driven duration scan
# ---------------------------------------------------------------------------

def scan_t_for_size(g: Graph, params: DiffusionParams, m: int,
                    size_range: tuple[int, int], rng: np.random.Generator,
                    pilots: int = 50, t_max: int = 64) -> int:
    """Smallest t in [1, t_max] whose median outbreak size over ``pilots``
    pilot runs lands inside ``size_range``."""
    lo, hi = size_range
    if lo > g.n:
        raise TScanError(f"size range [{lo}, {hi}] exceeds the graph's {g.n} nodes")
    for t in range(1, t_max + 1):
        sizes = []
        for _ in range(pilots):
            sources = np.sort(rng.choice(g.n, size=m, replace=False))
            sizes.append(simulate_sir(g, params, sources, t, rng).infected_count)
        med = float(np.median(sizes))
        if lo <= med <= hi:
            return t
        if med > hi:
            break
    raise TScanError(
        f"no t in [1, {t_max}] reaches median outbreak size in [{lo}, {hi}]; "
        "adjust q, m, or the size range")


# ---------------------------------------------------------------------------
# Trial records
# ---------------------------------------------------------------------------

@dataclass
class TrialRecord:
    trial: int
    algorithm: str
    y: int
    theta: float
    m: int
    t: int
    infected: int
    observed: int
    candidates: int
    subgraph_nodes: int
    ecc: int
    total: int
    err_dist: Optional[float]
    det_rate: float
    exact: bool
    wall_ms: float
    fallback_y: Optional[int] = None

    def csv_row(self) -> str:
        err = "unreachable" if self.err_dist is None else f"{self.err_dist:g}"
        fb = "" if self.fallback_y is None else str(self.fallback_y)
        return (f"{self.trial},{self.algorithm},{self.y},{self.theta:g},{self.m},"
                f"{self.t},{self.infected},{self.observed},{self.candidates},"
                f"{self.subgraph_nodes},{self.ecc},{self.total},{err},"
                f"{self.det_rate:g},{int(self.exact)},{self.wall_ms:.3f},{fb}")


@dataclass
class CellSummary:
    algorithm: str
    y: int
    theta: float
    trials: int
    mean_det_rate: float
    stderr_det_rate: float
    mean_err_dist: Optional[float]
    stderr_err_dist: Optional[float]
    unreachable_err: int
    mean_wall_ms: float
    median_wall_ms: float
    fallbacks: int


@dataclass
class ExperimentResult:
    records: list[TrialRecord]
    summary: dict[tuple[str, int, float], CellSummary]
    config_echo: dict
    t_used: int
    skipped_trials: int = 0
    algorithm_failures: int = 0
    invariant_violations: list[str] = field(default_factory=list)
    ajc_vs_ojc_checked: int = 0
    ajc_vs_ojc_violations: int = 0
    ajc_vs_ojc_matches: int = 0
    # within-restart (ecc, total) increases at pinned eccentricity; the
    # cluster update can trade total for max, so these are informational
    score_increase_events: int = 0


def snapshot_eccentricity(g: Graph, sources: Sequence[int],
                          observed: Sequence[int]) -> int:
    """e(S, I'): max over observed nodes of the hop distance to the source
    set, measured in the full graph."""
    observed = np.asarray(list(observed), dtype=np.int64)
    if observed.size == 0:
        return 0
    best = np.full(observed.size, np.iinfo(np.int64).max)
    for s in sources:
        row = bfs_distances(g, int(s))[observed].astype(np.int64)
        row[row == UNREACHABLE] = np.iinfo(np.int64).max
        best = np.minimum(best, row)
    if best.max() == np.iinfo(np.int64).max:
        return UNREACHABLE
    return int(best.max())


# ---------------------------------------------------------------------------
# Per-trial work (runs inside pool workers)
# ---------------------------------------------------------------------------

_CTX: dict = {}


def _pool_init(g: Graph, params: DiffusionParams, cfg: ExperimentConfig, t: int):
    _CTX["g"] = g
    _CTX["params"] = params
    _CTX["cfg"] = cfg
    _CTX["t"] = t


def _draw_trial_instance(g: Graph, params: DiffusionParams, cfg: ExperimentConfig,
                         t: int, rng: np.random.Generator):
    if cfg.min_source_distance <= 0:
        return draw_instance(g, params, cfg.m, t, cfg.size_range,
                             cfg.max_attempts, rng)
    lo, hi = cfg.size_range
    for _ in range(cfg.max_attempts):
        sources = np.sort(rng.choice(g.n, size=cfg.m, replace=False))
        spaced = True
        for v in sources:
            row = bfs_distances(g, int(v))[sources]
            others = row[row != 0]
            if others.size and (np.any(others == UNREACHABLE)
                                or others.min() < cfg.min_source_distance):
                spaced = False
                break
        if not spaced:
            continue
        outcome = simulate_sir(g, params, sources, t, rng)
        if lo <= outcome.infected_count <= hi:
            return outcome, sample_snapshot(outcome, params, rng)
    raise InstanceGenerationError(cfg.max_attempts, cfg.size_range)


def _run_algorithm(name: str, g: Graph, snapshot: Snapshot, y: int,
                   cfg: ExperimentConfig, rng: np.random.Generator,
                   sel_seed: int) -> LocalizationResult:
    # Every algorithm in a cell gets the same selection stream, so they all
    # search the identical (possibly patched) subgraph; search randomness
    # stays per-algorithm.
    sel = np.random.default_rng(sel_seed)
    if name == "OJC":
        return ojc(g, snapshot, y, cfg.m, rng=rng, selection_rng=sel)
    if name == "AJC":
        return ajc(g, snapshot, y, cfg.m, cfg.restarts, cfg.max_iters, rng,
                   selection_rng=sel)
    if name == "DC":
        return dc(g, snapshot, y, cfg.m, cfg.restarts, cfg.max_iters, rng,
                  selection_rng=sel)
    if name == "CC":
        return cc(g, snapshot, y, cfg.m, cfg.restarts, cfg.max_iters, rng,
                  selection_rng=sel)
    raise ValueError(f"unknown algorithm {name!r}")


def _run_trial(trial_index: int):
    g: Graph = _CTX["g"]
    params: DiffusionParams = _CTX["params"]
    cfg: ExperimentConfig = _CTX["cfg"]
    t: int = _CTX["t"]

    tseed = derive_seed(cfg.seed, trial_index)
    rng_inst = np.random.default_rng(derive_seed(tseed, _TAG_INSTANCE))
    out = {"trial": trial_index, "records": [], "violations": [],
           "skipped": False, "failures": 0, "score_increases": 0,
           "ajc_ojc": []}  # (ajc_key, ojc_key) per cell
    try:
        outcome, snapshot = _draw_trial_instance(g, params, cfg, t, rng_inst)
    except InstanceGenerationError:
        out["skipped"] = True
        return out
    if snapshot.size == 0:
        out["skipped"] = True
        return out

    if cfg.validate:
        _validate_instance(g, params, outcome, snapshot, out["violations"])

    truth = [int(v) for v in outcome.sources]
    for y in cfg.y_values:
        if cfg.validate:
            vrng = np.random.default_rng(derive_seed(tseed, _TAG_VALIDATE))
            _validate_candidates(g, snapshot, y, vrng, out["violations"])
        cell: dict[str, LocalizationResult] = {}
        cell_y: dict[str, int] = {}
        for name in cfg.algorithms:
            y_eff = y
            if name in ("DC", "CC") and cfg.dc_cc_mode == "full_graph":
                y_eff = 0
            rng_alg = np.random.default_rng(derive_seed(tseed, _TAG_ALGO[name]))
            result = None
            fallback = None
            for y_try in range(y_eff, -1, -1):
                sel_seed = derive_seed(derive_seed(tseed, _TAG_SELECT), y_try)
                try:
                    result = _run_algorithm(name, g, snapshot, y_try, cfg,
                                            rng_alg, sel_seed)
                except (InsufficientCandidatesError, SubgraphTooSmallError):
                    continue
                fallback = y_try if y_try != y_eff else None
                break
            if result is None:
                out["failures"] += 1
                continue
            cell[name] = result
            cell_y[name] = y_eff if fallback is None else fallback
            out["score_increases"] += result.score_monotone_violations
            if cfg.validate:
                _validate_result(result, cfg.m, out["violations"])
            err = error_distance(g, truth, result.sources_hat)
            det = detection_rate(truth, result.sources_hat)
            wall_ms = result.wall_time * 1e3 if cfg.measure_time else 0.0
            out["records"].append(TrialRecord(
                trial=trial_index, algorithm=name, y=y_eff, theta=cfg.theta,
                m=cfg.m, t=t, infected=outcome.infected_count,
                observed=snapshot.size, candidates=result.candidate_count,
                subgraph_nodes=result.subgraph_nodes,
                ecc=result.score.eccentricity, total=result.score.total,
                err_dist=err, det_rate=det,
                exact=set(truth) == set(result.sources_hat),
                wall_ms=wall_ms, fallback_y=fallback))
        if "OJC" in cell and "AJC" in cell and cell_y["OJC"] == cell_y["AJC"]:
            out["ajc_ojc"].append((cell["AJC"].score.key, cell["OJC"].score.key))
    return out


def _validate_instance(g, params, outcome, snapshot, violations: list[str]):
    active = set(int(v) for v in outcome.ever_infected)
    if not set(int(v) for v in snapshot.observed) <= active:
        violations.append("observed set not contained in infected-or-recovered set")
    state_ok = np.all((outcome.state != 0) == (outcome.infect_time != -1))
    if not state_ok:
        violations.append("state/infect_time mismatch")
    if params.is_si:
        ecc = snapshot_eccentricity(g, outcome.sources, snapshot.observed)
        if ecc == UNREACHABLE or ecc > outcome.duration:
            violations.append(
                f"e(S, I') = {ecc} exceeds observation time {outcome.duration}")


def _validate_candidates(g, snapshot, y, rng, violations: list[str]):
    from .graph import connected_components
    cand = select_candidates(g, snapshot, y, rng=rng)
    obs = set(int(v) for v in snapshot.observed)
    kset = set(int(v) for v in cand.candidates)
    kplus = set(int(v) for v in cand.k_plus)
    if not obs <= kplus or not kset <= kplus:
        violations.append(f"K+ does not contain K union observed at Y={y}")
    if cand.connected and cand.subgraph.local_graph.n:
        ncomp = len(connected_components(cand.subgraph.local_graph))
        if ncomp != 1:
            violations.append(f"subgraph flagged connected but has {ncomp} components")


def _validate_result(result: LocalizationResult, m: int, violations: list[str]):
    if len(result.sources_hat) != m:
        violations.append(f"estimate size {len(result.sources_hat)} != m={m}")
    s = result.score
    if not s.unreachable and not 0 <= s.eccentricity <= s.total:
        violations.append(f"malformed score {s}")
    if result.ecc_monotone_violations:
        violations.append(
            f"{result.ecc_monotone_violations} within-restart eccentricity increases")


# ---------------------------------------------------------------------------
# Experiment driver
# ---------------------------------------------------------------------------

def run_experiment(config: ExperimentConfig,
                   graph: Optional[Graph] = None) -> ExperimentResult:
    """Run all trials of one experiment; see the module docstring for the
    seeding scheme.  ``graph`` short-circuits graph construction when the
    caller already has it (presets reuse one graph across configs)."""
    g = graph if graph is not None else config.build_graph()
    params = config.diffusion_params(g)
    if config.t_fixed is not None:
        t = config.t_fixed
    else:
        rng = np.random.default_rng(derive_seed(config.seed, _TAG_SCAN))
        t = scan_t_for_size(g, params, config.m, config.size_range, rng)

    workers = config.effective_workers()
    outs = []
    if workers <= 1 or config.trials == 1:
        _pool_init(g, params, config, t)
        for i in range(config.trials):
            outs.append(_run_trial(i))
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_pool_init,
                                 initargs=(g, params, config, t)) as pool:
            outs = list(pool.map(_run_trial, range(config.trials),
                                 chunksize=max(1, config.trials // (workers * 8))))

    outs.sort(key=lambda o: o["trial"])
    records: list[TrialRecord] = []
    violations: list[str] = []
    skipped = failures = score_increases = 0
    checked = viol = matches = 0
    for o in outs:
        records.extend(o["records"])
        violations.extend(f"trial {o['trial']}: {v}" for v in o["violations"])
        skipped += int(o["skipped"])
        failures += o["failures"]
        score_increases += o["score_increases"]
        for ajc_key, ojc_key in o["ajc_ojc"]:
            checked += 1
            if ajc_key < ojc_key:
                viol += 1
                violations.append(
                    f"trial {o['trial']}: approximate score {ajc_key} beats "
                    f"exact {ojc_key}")
            elif ajc_key == ojc_key:
                matches += 1

    echo = config.echo_dict()
    echo["t_used"] = t
    return ExperimentResult(records=records, summary=summarize(records),
                            config_echo=echo, t_used=t, skipped_trials=skipped,
                            algorithm_failures=failures,
                            invariant_violations=violations,
                            ajc_vs_ojc_checked=checked,
                            ajc_vs_ojc_violations=viol,
                            ajc_vs_ojc_matches=matches,
                            score_increase_events=score_increases)


def summarize(records: Sequence[TrialRecord]) -> dict:
    """Aggregate per (algorithm, Y, theta) cell; plain arithmetic means of
    the emitted rows so an external script can reproduce them from the CSV."""
    cells: dict[tuple[str, int, float], list[TrialRecord]] = {}
    for r in records:
        cells.setdefault((r.algorithm, r.y, r.theta), []).append(r)
    out = {}
    for key in sorted(cells, key=lambda k: (k[0], k[1], k[2])):
        rows = cells[key]
        det = np.array([r.det_rate for r in rows], dtype=float)
        err = np.array([r.err_dist for r in rows if r.err_dist is not None],
                       dtype=float)
        wall = np.array([r.wall_ms for r in rows], dtype=float)
        out[key] = CellSummary(
            algorithm=key[0], y=key[1], theta=key[2], trials=len(rows),
            mean_det_rate=float(det.mean()),
            stderr_det_rate=float(det.std(ddof=1) / math.sqrt(det.size))
            if det.size > 1 else 0.0,
            mean_err_dist=float(err.mean()) if err.size else None,
            stderr_err_dist=float(err.std(ddof=1) / math.sqrt(err.size))
            if err.size > 1 else None,
            unreachable_err=sum(1 for r in rows if r.err_dist is None),
            mean_wall_ms=float(wall.mean()),
            median_wall_ms=float(np.median(wall)),
            fallbacks=sum(1 for r in rows if r.fallback_y is not None),
        )
    return out


def write_csv(records: Sequence[TrialRecord], config_echo: dict, out) -> None:
    """Write provenance comments, the exact header row, then one row per
    record.  ``out`` is a path or a text file object."""
    close = False
    if isinstance(out, (str, Path)):
        out = open(out, "w", encoding="utf-8", newline="")
        close = True
    try:
        for k in sorted(config_echo):
            out.write(f"# {k}: {config_echo[k]}\n")
        out.write(CSV_HEADER + "\n")
        for r in records:
            out.write(r.csv_row() + "\n")
    finally:
        if close:
            out.close()


def read_csv_records(path) -> list[dict]:
    """Parse a results CSV back into dicts (comment lines skipped)."""
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("".join(lines))))


def format_summary(result: ExperimentResult) -> str:
    lines = [f"{'algorithm':<10}{'Y':>3}{'theta':>7}{'trials':>8}"
             f"{'det_rate':>10}{'err_dist':>10}{'med_ms':>10}{'fallback':>9}"]
    for key, s in result.summary.items():
        err = "n/a" if s.mean_err_dist is None else f"{s.mean_err_dist:.3f}"
        lines.append(f"{s.algorithm:<10}{s.y:>3}{s.theta:>7g}{s.trials:>8}"
                     f"{s.mean_det_rate:>10.3f}{err:>10}{s.median_wall_ms:>10.1f}"
                     f"{s.fallbacks:>9}")
    if result.skipped_trials or result.algorithm_failures:
        lines.append(f"skipped trials: {result.skipped_trials}, "
                     f"algorithm failures: {result.algorithm_failures}")
    if result.ajc_vs_ojc_checked:
        lines.append(f"approximate-vs-exact score checks: "
                     f"{result.ajc_vs_ojc_checked} trials, "
                     f"{result.ajc_vs_ojc_matches} equal, "
                     f"{result.ajc_vs_ojc_violations} violations")
    if result.score_increase_events:
        lines.append(f"within-restart total-distance increases at pinned "
                     f"eccentricity: {result.score_increase_events} (informational)")
    if result.invariant_violations:
        lines.append(f"INVARIANT VIOLATIONS: {len(result.invariant_violations)}")
        lines.extend("  " + v for v in result.invariant_violations[:20])
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Snapshot dump format
# ---------------------------------------------------------------------------

def dump_snapshot(out, t: int, sources: Sequence[int],
                  observed: Sequence[int]) -> None:
    """Three-line text format: 't <value>', 'sources <ids>', 'observed <ids>'
    with ids space-separated ascending."""
    close = False
    if isinstance(out, (str, Path)):
        out = open(out, "w", encoding="utf-8")
        close = True
    try:
        out.write(f"t {t}\n")
        out.write("sources " + " ".join(str(v) for v in sorted(sources)) + "\n")
        out.write("observed " + " ".join(str(v) for v in sorted(observed)) + "\n")
    finally:
        if close:
            out.close()


def parse_snapshot(text: str) -> tuple[int, list[int], list[int]]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) != 3 or not lines[0].startswith("t ") \
            or not lines[1].startswith("sources") or not lines[2].startswith("observed"):
        raise ValueError("snapshot file must have lines: t / sources / observed")
    t = int(lines[0].split()[1])
    sources = [int(x) for x in lines[1].split()[1:]]
    observed = [int(x) for x in lines[2].split()[1:]]
    return t, sources, observed


# ---------------------------------------------------------------------------
# Experiment presets
# ---------------------------------------------------------------------------

# Sample-rate / threshold pairs for the algorithm-comparison presets.  A
# threshold of 3 keeps the candidate search small and leaves a source out of
# the candidate set with probability falling from a few percent at
# theta=0.5 to negligible at theta=0.9, which is what makes detection
# improve visibly with the sample rate.
_SWEEP_THETA_Y = ((0.5, 3), (0.7, 3), (0.9, 3))

_SIZE_BY_M = {2: (100, 300), 3: (200, 400), 4: (300, 500)}


def preset_configs(name: str, trials: Optional[int] = None, seed: int = 1,
                   edge_list: Optional[str] = None,
                   y0_trials: Optional[int] = None,
                   algorithms: Optional[Sequence[str]] = None,
                   workers: Optional[int] = None) -> list[ExperimentConfig]:
    """Named experiment presets mirroring the benchmark setups.

    fig2       exact-search threshold sweep Y in {0,1,2} on ER(5000, 0.002),
               SI q=0.8, m=2, sizes 100-300, full reporting (theta=1).  The
               Y=0 cell is run separately with ``y0_trials`` trials (default
               10) since the unfiltered search is slow.
    fig3-m2/3/4  sample-rate sweep theta in {0.5,0.7,0.9} comparing the
               algorithms on ER(5000, 0.002); m and sizes per name.
    power-grid  the same sweep on a loaded edge list with threshold fixed
               at 2 (low average degree), AJC/DC/CC.
    """
    base = dict(seed=seed, workers=workers)
    if name == "fig2":
        n_trials = trials if trials is not None else 50
        n_y0 = y0_trials if y0_trials is not None else 10
        algos = tuple(algorithms) if algorithms else ("OJC",)
        shared = dict(graph_er=(5000, 0.002), q=0.8, r=0.0, theta=1.0, m=2,
                      size_range=(100, 300), algorithms=algos, **base)
        return [
            ExperimentConfig(y_values=(1, 2), trials=n_trials, **shared),
            ExperimentConfig(y_values=(0,), trials=n_y0, **shared),
        ]
    if name in ("fig3-m2", "fig3-m3", "fig3-m4"):
        m = int(name[-1])
        n_trials = trials if trials is not None else 100
        if algorithms:
            algos = tuple(algorithms)
        else:
            algos = ("OJC", "AJC", "DC", "CC") if m == 2 else ("AJC", "DC", "CC")
        # full_graph: the centroid baselines run without candidate selection
        # (threshold 0, whole-graph subgraph), which is how they are defined
        # as comparison heuristics
        return [
            ExperimentConfig(graph_er=(5000, 0.002), q=0.8, r=0.0, theta=theta,
                             m=m, size_range=_SIZE_BY_M[m], y_values=(y,),
                             algorithms=algos, restarts=100, trials=n_trials,
                             dc_cc_mode="full_graph", **base)
            for theta, y in _SWEEP_THETA_Y
        ]
    if name == "power-grid":
        if not edge_list:
            raise ValueError("the power-grid preset needs --edge-list")
        n_trials = trials if trials is not None else 100
        algos = tuple(algorithms) if algorithms else ("AJC", "DC", "CC")
        return [
            ExperimentConfig(graph_edge_list=edge_list, q=0.8, r=0.0,
                             theta=theta, m=2, size_range=(100, 300),
                             y_values=(2,), algorithms=algos, restarts=100,
                             trials=n_trials, **base)
            for theta, _ in _SWEEP_THETA_Y
        ]
    raise ValueError(f"unknown preset {name!r}; expected fig2, fig3-m2, "
                     "fig3-m3, fig3-m4, or power-grid")


def run_presets(configs: list[ExperimentConfig],
                graph: Optional[Graph] = None) -> tuple[list[TrialRecord], list[ExperimentResult]]:
    """Run a preset's configs, reusing one graph when they share a spec."""
    records: list[TrialRecord] = []
    results = []
    cache: dict = {}
    for cfg in configs:
        key = (cfg.graph_er, cfg.graph_edge_list, cfg.seed)
        if graph is not None:
            g = graph
        elif key in cache:
            g = cache[key]
        else:
            g = cache[key] = cfg.build_graph()
        res = run_experiment(cfg, graph=g)
        records.extend(res.records)
        results.append(res)
    return records, results
