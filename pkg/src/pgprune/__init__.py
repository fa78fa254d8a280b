"""2D pose-graph pruning for lifelong SLAM.

Keeps a growing pose graph small by marginalizing vertices where the
scale-invariant vertex density is too high, moving loop closures along
the trusted odometry chain so that wrong loop closures cannot multiply,
and capping per-vertex edge counts with a shortest-path detour guard.
Ships with an SE(2) Levenberg-Marquardt optimizer, synthetic graph
generators, text-format I/O, evaluation metrics, and a Monte Carlo
harness comparing the robust marginalization against a Chow-Liu-tree
baseline and the unpruned graph.
"""

from .density import PointSet, knn, r_density, sid_exact, sid_truncated
from .edge_ops import (
    DEFAULT_MAHALANOBIS_GATE,
    CombineResult,
    EdgeOpError,
    Verdict,
    edge_combine,
    edge_compose,
    edge_invert,
    mahalanobis_gap,
)
from .evaluation import MetricResult, map_error, relative_map_error, trajectory_error
from .geometry import Pose2, normalize_angle, pose_compose, pose_inverse, relative_pose
from .graph import Edge, EdgeKind, GraphError, PoseGraph, Provenance, Vertex, graphs_equal
from .io_formats import (
    GraphFormatError,
    RunRecord,
    RunReport,
    export_report,
    load_graph,
    parse_graph,
    save_graph,
    serialize_graph,
)
from .montecarlo import MonteCarloResult, run_monte_carlo, simulate_repeated_traversal
from .optimizer import Huber, OptimizerConfig, OptimizeStats, SolverError, chi2, optimize
from .pruning import (
    PRESETS,
    PruneLog,
    PruningConfig,
    astar_len,
    marginalize_chow_liu,
    marginalize_sid,
    prune_edges,
    prune_vertices,
)
from .synthetic import (
    CorruptionSpec,
    GridSpec,
    NoiseSpec,
    add_noise,
    corrupt_loop_closures,
    gen_grid,
    gen_random_trajectory,
)

__version__ = "0.1.0"
