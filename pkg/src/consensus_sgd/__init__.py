"""Consensus-based distributed SGD with incremental and generalized consensus."""

from .algorithms import (
    ALGORITHMS,
    AgentStreams,
    DivergenceError,
    HyperParams,
    NoAdmissibleStepSize,
    SwarmState,
    advance,
    max_step_size,
    step,
)
from .analysis import LyapunovSpec, bound_report, consensus_bound, lyapunov_gradient, lyapunov_value
from .objectives import LogisticObjective, MLPObjective, QuadraticObjective, random_quadratic_objective
from .partition import PartitionPlan, make_partition
from .topology import InteractionMatrix, TopologyError, build_graph, make_interaction_matrix

__version__ = "0.1.0"
from .estimator import ConsensusSGDClassifier
