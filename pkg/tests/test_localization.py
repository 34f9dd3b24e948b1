import numpy as np
import pytest

from jordancover.diffusion import DiffusionParams, Snapshot, draw_instance
from jordancover.graph import Graph, UNREACHABLE, generate_er
from jordancover.localization import (CentroidRule, InsufficientCandidatesError,
                                      NoObservationsError, Score,
                                      SubgraphTooSmallError, ajc,
                                      build_distance_table, cc, dc,
                                      kmeans_localize, ojc, score_set,
                                      select_candidates)

from conftest import random_graph
from oracles import naive_candidates, naive_jordan_cover

BIG = 1 << 20


def snap(ids) -> Snapshot:
    return Snapshot(np.asarray(list(ids), dtype=np.int64))


def make_table(g, observed, y=0, rng=None):
    cand = select_candidates(g, snap(observed), y, rng=rng)
    return cand, build_distance_table(cand, snap(observed))


# ---------------------------------------------------------------------------
# Candidate selection
# ---------------------------------------------------------------------------

def test_select_candidates_path(path5):
    cand = select_candidates(path5, snap([1, 3]), 1)
    assert list(cand.candidates) == [0, 2, 4]
    assert list(cand.k_plus) == [0, 1, 2, 3, 4]
    assert cand.subgraph.local_graph.edge_count == 4
    assert cand.patch_edge_count == 0
    assert cand.connected


def test_select_candidates_matches_naive_definition():
    rng = np.random.default_rng(13)
    for _ in range(20):
        g = random_graph(rng, 25, 0.15)
        observed = sorted(rng.choice(25, size=5, replace=False))
        y = int(rng.integers(0, 4))
        cand = select_candidates(g, snap(observed), y)
        assert list(cand.candidates) == naive_candidates(g, observed, y)


def test_select_candidates_y0_is_everything(path5):
    cand = select_candidates(path5, snap([2]), 0)
    assert list(cand.candidates) == [0, 1, 2, 3, 4]


def test_select_candidates_empty_snapshot(path5):
    with pytest.raises(NoObservationsError):
        select_candidates(path5, snap([]), 1)


def test_select_candidates_unpatchable_components(two_edges):
    # I' = {0, 2}: K = {1, 3}, K+ = {0,1,2,3}, induced graph has two
    # components and the parent graph offers no path between them.
    cand = select_candidates(two_edges, snap([0, 2]), 1)
    assert list(cand.candidates) == [1, 3]
    assert list(cand.k_plus) == [0, 1, 2, 3]
    assert not cand.connected
    assert cand.patch_edge_count == 0


def test_select_candidates_patches_through_outside_node():
    # path 0-1-2-3-4 with I' = {0, 4} and Y = 2: K is empty, K+ = {0, 4}
    # is disconnected, and the repair path runs through 1, 2, 3.
    g = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    cand = select_candidates(g, snap([0, 4]), 2, rng=np.random.default_rng(0))
    assert list(cand.candidates) == []
    assert cand.connected
    view = cand.subgraph
    assert view.local_graph.n == 5
    assert view.patch_edge_count == 4          # whole path added by repair
    table = build_distance_table(cand, snap([0, 4]))
    assert score_set(table, [2], subgraph=view).eccentricity == 2


def test_patch_edges_lie_on_parent_shortest_paths():
    rng = np.random.default_rng(101)
    for _ in range(20):
        g = random_graph(rng, 30, 0.08)
        observed = sorted(rng.choice(30, size=4, replace=False))
        cand = select_candidates(g, snap(observed), 3,
                                 rng=np.random.default_rng(rng.integers(1 << 30)))
        view = cand.subgraph
        for a, b in view.patch_edges:
            pa, pb = int(view.to_parent[a]), int(view.to_parent[b])
            assert g.has_edge(pa, pb)


def test_select_candidates_deterministic_given_rng():
    rng = np.random.default_rng(55)
    g = random_graph(rng, 40, 0.05)
    observed = sorted(rng.choice(40, size=6, replace=False))
    a = select_candidates(g, snap(observed), 2, rng=np.random.default_rng(9))
    b = select_candidates(g, snap(observed), 2, rng=np.random.default_rng(9))
    assert list(a.k_plus) == list(b.k_plus)
    assert a.subgraph.patch_edges == b.subgraph.patch_edges


# ---------------------------------------------------------------------------
# Distance table and scoring
# ---------------------------------------------------------------------------

def test_distance_table_path(path5):
    cand, table = make_table(path5, [1, 3], y=1)
    # g- is the whole path; rows follow ascending observed ids
    assert list(table.rows[table.row_index[1]]) == [1, 0, 1, 2, 3]
    assert list(table.rows[table.row_index[3]]) == [3, 2, 1, 0, 1]


def test_distance_table_rows_zero_on_self(path5):
    cand, table = make_table(path5, [0, 2, 4])
    for w, i in table.row_index.items():
        local = cand.subgraph.from_parent[w]
        assert table.rows[i][local] == 0


def test_score_set_path(path5):
    cand, table = make_table(path5, [1, 3], y=1)
    view = cand.subgraph
    assert score_set(table, [2], subgraph=view) == Score(1, 2)
    assert score_set(table, [1, 3], subgraph=view) == Score(0, 0)
    assert score_set(table, [0], subgraph=view) == Score(3, 4)


def test_score_set_errors(path5):
    cand, table = make_table(path5, [1, 3], y=1)
    with pytest.raises(ValueError):
        score_set(table, [], subgraph=cand.subgraph)
    with pytest.raises(ValueError):
        score_set(table, [99], subgraph=cand.subgraph)


def test_score_sentinel_propagates(two_edges):
    cand, table = make_table(two_edges, [0, 2], y=1)
    s = score_set(table, [1], subgraph=cand.subgraph)
    assert s.unreachable
    assert s.key == (float("inf"), float("inf"))
    ok = score_set(table, [1, 3], subgraph=cand.subgraph)
    assert not ok.unreachable
    assert ok.key < s.key


def test_score_ordering():
    assert Score(1, 5).key < Score(2, 0).key
    assert Score(2, 3).key < Score(2, 4).key
    assert Score(2, 3).key == Score(2, 3).key


# ---------------------------------------------------------------------------
# Exact search
# ---------------------------------------------------------------------------

def test_ojc_path(path5):
    res = ojc(path5, snap([1, 3]), 1, 1)
    assert res.sources_hat == (2,)
    assert res.score == Score(1, 2)
    assert res.candidate_count == 3


def test_ojc_m_equals_k(path5):
    res = ojc(path5, snap([1, 3]), 1, 3)
    assert res.sources_hat == (0, 2, 4)


def test_ojc_star_cover_is_observed_set(star5):
    # I' = two leaves, Y=0: the pair {1, 2} covers at eccentricity 0,
    # beating any pair through the hub (eccentricity 1) -- the cover is the
    # observed set, not the hub.  At Y=1 only the hub qualifies as a
    # candidate (leaves have no observed neighbors), so m=2 must error.
    res = ojc(star5, snap([1, 2]), 0, 2)
    assert res.sources_hat == (1, 2)
    assert res.score == Score(0, 0)
    with pytest.raises(InsufficientCandidatesError):
        ojc(star5, snap([1, 2]), 1, 2)


def test_ojc_insufficient_candidates(path5):
    with pytest.raises(InsufficientCandidatesError) as e:
        ojc(path5, snap([1, 3]), 1, 4)
    assert e.value.candidate_count == 3


def test_ojc_matches_naive_enumeration():
    rng = np.random.default_rng(71)
    for _ in range(40):
        n = int(rng.integers(8, 28))
        g = random_graph(rng, n, float(rng.uniform(0.1, 0.3)))
        k = int(rng.integers(2, max(3, n // 3)))
        observed = sorted(rng.choice(n, size=k, replace=False))
        y = int(rng.integers(0, 3))
        m = int(rng.integers(1, 4))
        cand = select_candidates(g, snap(observed), y,
                                 rng=np.random.default_rng(1))
        if cand.candidate_count < m:
            with pytest.raises(InsufficientCandidatesError):
                ojc(g, snap(observed), y, m, rng=np.random.default_rng(1))
            continue
        table = build_distance_table(cand, snap(observed))
        cols = [cand.subgraph.from_parent[int(v)] for v in cand.candidates]
        ecc, total, combo = naive_jordan_cover(table.big_matrix(), cols, m)
        res = ojc(g, snap(observed), y, m, rng=np.random.default_rng(1))
        got_cols = tuple(sorted(cand.subgraph.from_parent[v]
                                for v in res.sources_hat))
        assert got_cols == combo
        if ecc >= BIG:
            assert res.score.unreachable
        else:
            assert (res.score.eccentricity, res.score.total) == (ecc, total)


def test_ojc_score_never_worse_than_any_candidate_subset():
    # exact minimization: score(W*) <= score(S) for any m-subset S of K
    rng = np.random.default_rng(83)
    for _ in range(10):
        g = random_graph(rng, 20, 0.2)
        observed = sorted(rng.choice(20, size=4, replace=False))
        cand = select_candidates(g, snap(observed), 1)
        if cand.candidate_count < 2:
            continue
        table = build_distance_table(cand, snap(observed))
        res = ojc(g, snap(observed), 1, 2)
        for _ in range(20):
            pick = rng.choice(cand.candidates, size=2, replace=False)
            other = score_set(table, list(pick), subgraph=cand.subgraph)
            assert res.score.key <= other.key


def test_ojc_widening_candidates_never_hurts():
    # lowering Y only adds candidates; with no patching involved the optimal
    # score can only improve or stay put
    rng = np.random.default_rng(97)
    done = 0
    while done < 10:
        g = random_graph(rng, 25, 0.25)
        observed = sorted(rng.choice(25, size=6, replace=False))
        results = {}
        ok = True
        for y in (2, 1, 0):
            cand = select_candidates(g, snap(observed), y)
            if cand.candidate_count < 2 or cand.patch_edge_count:
                ok = False
                break
            results[y] = ojc(g, snap(observed), y, 2)
        if not ok:
            continue
        assert results[1].score.key <= results[2].score.key
        assert results[0].score.key <= results[1].score.key
        done += 1


# ---------------------------------------------------------------------------
# K-Means search
# ---------------------------------------------------------------------------

def test_kmeans_m1_jordan_equals_ojc():
    rng = np.random.default_rng(3)
    for _ in range(15):
        g = random_graph(rng, 22, 0.2)
        observed = sorted(rng.choice(22, size=5, replace=False))
        cand = select_candidates(g, snap(observed), 0)
        table = build_distance_table(cand, snap(observed))
        km = kmeans_localize(cand, table, 1, CentroidRule.JORDAN_CENTER,
                             restarts=1, max_iters=8,
                             rng=np.random.default_rng(4))
        exact = ojc(g, snap(observed), 0, 1)
        assert km.sources_hat == exact.sources_hat
        assert km.score == exact.score


def test_kmeans_dc_path_two_clusters(path5):
    # any initialization converges to centers {1, 3}
    cand, table = make_table(path5, [1, 3])
    for seed in range(10):
        res = kmeans_localize(cand, table, 2, CentroidRule.DISTANCE_CENTROID,
                              restarts=1, max_iters=8,
                              rng=np.random.default_rng(seed))
        assert res.sources_hat == (1, 3)
        assert res.score == Score(0, 0)


def test_kmeans_dc_m1_path_tie_structure(path5):
    # I' = {0, 4}: every node has summed distance exactly 4, so the update
    # rule's lowest-id tie-break must pick node 0
    cand, table = make_table(path5, [0, 4])
    big = table.big_matrix()
    sums = big.sum(axis=0)
    assert list(sums) == [4, 4, 4, 4, 4]
    res = kmeans_localize(cand, table, 1, CentroidRule.DISTANCE_CENTROID,
                          restarts=3, max_iters=8, rng=np.random.default_rng(0))
    assert res.sources_hat == (0,)


def test_kmeans_cc_star_center_wins(star5):
    # closeness of the hub over two observed leaves: 1 + 1 = 2; a leaf gets
    # 1/2 from the other leaf (plus nothing from itself) = 0.5 + excluded 0
    cand, table = make_table(star5, [1, 2])
    res = kmeans_localize(cand, table, 1, CentroidRule.CLOSENESS_CENTROID,
                          restarts=5, max_iters=8, rng=np.random.default_rng(1))
    assert res.sources_hat == (0,)


def test_closeness_excludes_self_and_unreachable(two_edges):
    cand, table = make_table(two_edges, [0, 2])
    # center 0: closeness over observed {0, 2} skips itself (d=0) and the
    # unreachable node 2 -> 0.0; center 1 gets 1/d(0,1) = 1 from node 0 only.
    res = kmeans_localize(cand, table, 1, CentroidRule.CLOSENESS_CENTROID,
                          restarts=4, max_iters=8, rng=np.random.default_rng(1))
    assert res.sources_hat == (1,)


def test_kmeans_subgraph_too_small(path5):
    cand, table = make_table(path5, [1, 3], y=1)
    with pytest.raises(SubgraphTooSmallError):
        kmeans_localize(cand, table, 6, CentroidRule.JORDAN_CENTER,
                        restarts=1, max_iters=1, rng=np.random.default_rng(0))


def test_kmeans_deterministic_given_seed():
    rng = np.random.default_rng(15)
    g = random_graph(rng, 30, 0.15)
    observed = sorted(rng.choice(30, size=6, replace=False))
    cand, table = make_table(g, observed)
    a = kmeans_localize(cand, table, 2, CentroidRule.JORDAN_CENTER, 1, 1,
                        np.random.default_rng(77))
    b = kmeans_localize(cand, table, 2, CentroidRule.JORDAN_CENTER, 1, 1,
                        np.random.default_rng(77))
    assert a.sources_hat == b.sources_hat and a.score == b.score


def test_kmeans_monotone_scores_on_random_instances():
    rng = np.random.default_rng(19)
    for _ in range(15):
        g = random_graph(rng, 30, 0.15)
        observed = sorted(rng.choice(30, size=8, replace=False))
        cand, table = make_table(g, observed)
        res = kmeans_localize(cand, table, 2, CentroidRule.JORDAN_CENTER,
                              restarts=20, max_iters=16,
                              rng=np.random.default_rng(rng.integers(1 << 30)))
        assert res.ecc_monotone_violations == 0


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------

def test_ajc_never_beats_ojc_and_stays_in_candidate_set():
    # the approximation's centers are drawn from and updated within the
    # candidate set, i.e. exactly the exact search's space, so its score can
    # tie but never beat the exact optimum
    rng = np.random.default_rng(27)
    matched = 0
    total = 0
    for _ in range(15):
        g = random_graph(rng, 25, 0.2)
        observed = sorted(rng.choice(25, size=6, replace=False))
        try:
            exact = ojc(g, snap(observed), 1, 2)
        except InsufficientCandidatesError:
            continue
        cand = select_candidates(g, snap(observed), 1)
        approx = ajc(g, snap(observed), 1, 2, restarts=40, max_iters=16,
                     rng=np.random.default_rng(rng.integers(1 << 30)))
        total += 1
        assert set(approx.sources_hat) <= set(int(v) for v in cand.candidates)
        assert approx.score.key >= exact.score.key
        matched += approx.score.key == exact.score.key
    assert total >= 10 and matched / total >= 0.8


def test_ajc_insufficient_candidates(path5):
    with pytest.raises(InsufficientCandidatesError):
        ajc(path5, snap([1, 3]), 1, 4, 1, 1, np.random.default_rng(0))


def test_dc_cc_run_without_candidate_requirement(path5):
    # DC/CC search the subgraph, not the candidate set, so Y that empties K
    # still works as long as the subgraph is big enough
    res = dc(path5, snap([0, 4]), 2, 2, 5, 8, np.random.default_rng(0))
    assert len(res.sources_hat) == 2
    res = cc(path5, snap([0, 4]), 2, 2, 5, 8, np.random.default_rng(0))
    assert len(res.sources_hat) == 2


def test_dc_pipeline_path_m1_tie(path5):
    # single cluster covers the whole path; all five summed distances tie
    # at 4 and the lowest id wins
    res = dc(path5, snap([0, 4]), 0, 1, 5, 8, np.random.default_rng(0))
    assert res.sources_hat == (0,)


def test_dc_pipeline_path_m2(path5):
    for seed in range(5):
        res = dc(path5, snap([1, 3]), 0, 2, 3, 8, np.random.default_rng(seed))
        assert res.sources_hat == (1, 3)


def test_cc_pipeline_reports_observed_node(star5):
    # the baseline pipelines only ever report observed nodes: with two
    # observed leaves the hub is not selectable, and the lowest-id leaf wins
    # the closeness tie (each leaf sees the other at distance 2)
    res = cc(star5, snap([1, 2]), 0, 1, 5, 8, np.random.default_rng(1))
    assert res.sources_hat == (1,)


def test_baseline_estimates_always_observed():
    rng = np.random.default_rng(41)
    for _ in range(10):
        g = random_graph(rng, 30, 0.15)
        observed = sorted(rng.choice(30, size=8, replace=False))
        for fn in (dc, cc):
            res = fn(g, snap(observed), 0, 2, 10, 8,
                     np.random.default_rng(rng.integers(1 << 30)))
            assert set(res.sources_hat) <= set(observed)


def test_shared_selection_rng_gives_identical_subgraph():
    # when the induced subgraph is disconnected the repair is random; a
    # shared selection stream must give every algorithm the same patch
    g = Graph.from_edges(9, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6),
                             (6, 7), (7, 8)])
    observed = [0, 8]
    a = select_candidates(g, snap(observed), 3, rng=np.random.default_rng(5))
    b = select_candidates(g, snap(observed), 3, rng=np.random.default_rng(5))
    assert a.subgraph.patch_edges == b.subgraph.patch_edges
    exact = ojc(g, snap(observed), 0, 1, rng=np.random.default_rng(9),
                selection_rng=np.random.default_rng(5))
    approx = ajc(g, snap(observed), 0, 1, 10, 8, np.random.default_rng(11),
                 selection_rng=np.random.default_rng(5))
    assert approx.score.key >= exact.score.key


def test_ojc_score_bounded_by_true_sources_under_si():
    # without recovery every infected node sits within t hops of the source
    # set, so when the sources are all candidates the exact optimum can
    # never score worse than the true sources, whose eccentricity is <= t
    from jordancover.diffusion import sample_snapshot, simulate_sir
    rng = np.random.default_rng(53)
    done = 0
    while done < 10:
        g = random_graph(rng, 60, 0.08)
        params = DiffusionParams(infect=0.7, recover=0.0, report=0.8)
        sources = sorted(int(v) for v in rng.choice(60, size=2, replace=False))
        t = 3
        out = simulate_sir(g, params, sources, t,
                           np.random.default_rng(rng.integers(1 << 30)))
        s = sample_snapshot(out, params,
                            np.random.default_rng(rng.integers(1 << 30)))
        if s.size == 0:
            continue
        cand = select_candidates(g, s, 0, rng=np.random.default_rng(1))
        table = build_distance_table(cand, s)
        s_score = score_set(table, sources, subgraph=cand.subgraph)
        res = ojc(g, s, 0, 2, rng=np.random.default_rng(1))
        assert res.score.key <= s_score.key
        if not s_score.unreachable:
            assert s_score.eccentricity <= t
        done += 1


def test_pipeline_on_er_instance():
    g = generate_er(300, 0.03, np.random.default_rng(5))
    params = DiffusionParams(infect=0.7, recover=0.0, report=0.8)
    outcome, snapshot = draw_instance(g, params, 2, 2, (10, 200), 100,
                                      np.random.default_rng(8))
    for fn in (lambda: ojc(g, snapshot, 1, 2),
               lambda: ajc(g, snapshot, 1, 2, 20, 16, np.random.default_rng(1)),
               lambda: dc(g, snapshot, 1, 2, 20, 16, np.random.default_rng(2)),
               lambda: cc(g, snapshot, 1, 2, 20, 16, np.random.default_rng(3))):
        res = fn()
        assert len(res.sources_hat) == 2
        assert not res.score.unreachable
        assert res.wall_time >= 0
