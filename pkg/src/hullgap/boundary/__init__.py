"""Two-dimensional decision-boundary experiments: a degree-7 polynomial
boundary, Legendre reshaping fits, small ReLU networks and grid analysis."""

from hullgap.boundary.grid import (
    Grid2,
    boundary_component_count,
    grid_eval,
    nearest_cell,
    region_disagreement,
)
from hullgap.boundary.hull2d import HullPolygon, hull_2d, point_in_polygon, polygon_mask
from hullgap.boundary.mlp import (
    MlpModel,
    TrainRegime,
    TrainResult,
    loss_and_grads,
    train_mlp,
    train_with_restarts,
)
from hullgap.boundary.poly import (
    BLUE,
    DEFAULT_DOMAIN,
    DEFAULT_TRAIN_BOUNDS,
    POLY7_ROOTS,
    POLY7_SCALE,
    RED,
    LegendreFit,
    Polynomial,
    TwoClassSet,
    eval_poly7,
    gen_two_class,
    legendre_fit,
    poly7,
    reshaping_problem,
)
