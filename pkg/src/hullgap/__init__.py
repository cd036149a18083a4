"""Convex-hull geometry of training sets: projection, certification and
decision-boundary experiments."""

from hullgap.errors import (
    FitError,
    GenerationError,
    HullgapError,
    InputError,
    ParseError,
    TrainingError,
)
from hullgap.hull import (
    DistanceReport,
    KktReport,
    MembershipVerdict,
    ProjectionResult,
    SampleMatrix,
    SolverConfig,
    approx_project_fw,
    batch_distances,
    membership,
    nearest_sample,
    pairwise_stats,
    perturbation,
    project_simplex,
    project_to_hull,
    sketched_project,
    support_set,
    verify_kkt,
)

__version__ = "0.1.0"
