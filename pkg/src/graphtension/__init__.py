"""Community detection as discrete surface-tension minimisation.

Maximum-likelihood fitting of the degree-corrected stochastic block model is
the minimisation of a surface-tension energy over partitions.  This package
provides that energy, three minimisers (mean-curvature flow, Allen-Cahn and
MBO threshold dynamics), the affinity-learning and split-merge loops around
them, benchmark generators and evaluation tools.
"""

from .ac import AcConfig, ac_run, gl_energy, multiwell, multiwell_grad, project_rows_to_simplex
from .energy import (
    energy,
    eliminate_diagonal,
    move_delta,
    move_deltas,
    optimal_w,
    profile_energy,
    reset_infinite,
    score,
    seed_affinity,
)
from .evaluation import RunResult, knn_graph, nmi, nonlocal_features
from .exceptions import (
    ConfigError,
    ConvergenceError,
    DegenerateInputError,
    EdgeListParseError,
    GraphtensionError,
    InputError,
    UndefinedScoreError,
)
from .generators import PlantedGraph, gen_lfr_style, gen_multiscale, gen_pp
from .graph import Graph, Partition, from_edges, induced_subgraph, load_edge_list, partition_stats
from .mbo import MboConfig, mbo_run
from .mcf import McfConfig, mcf_run
from .pipeline import PipelineConfig, em_fit, greedy_merge, kl_baseline, split_merge
from .spectral import smallest_eigenpairs

__version__ = "0.1.0"
