"""Multi-source diffusion source localization from partial SIR snapshots:
Jordan-cover search (exact and K-Means approximated), centroid baselines,
a discrete-time simulator, and a benchmark harness."""

from .graph import (Graph, SubgraphView, UNREACHABLE, bfs_distances,
                    connected_components, distance_to_set, generate_er,
                    induced_subgraph, load_edge_list, shortest_path)
from .diffusion import (DiffusionOutcome, DiffusionParams, Snapshot,
                        draw_instance, sample_snapshot, simulate_sir)
from .localization import (CandidateResult, CentroidRule, DistanceTable,
                           LocalizationResult, Score, ajc, build_distance_table,
                           cc, dc, kmeans_localize, ojc, score_set,
                           select_candidates)
from .metrics import TrialMetrics, detection_rate, error_distance, evaluate
from .harness import (ExperimentConfig, TheoryBounds, compute_theory_bounds,
                      derive_seed, run_experiment, scan_t_for_size)

__version__ = "0.1.0"
