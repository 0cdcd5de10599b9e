"""Local navigation with convex free-space regions, MPC tracking and PPO."""

from .env import EnvConfig, NavEnv, STAGES, get_stage
from .geom import ConvexRegion, build_convex_region, normalize_vertex_count, point_in_convex
from .mpc import MpcController, MpcParams, MpcProblem, solve_mpc

__version__ = "0.1.0"

__all__ = [
    "ConvexRegion",
    "EnvConfig",
    "MpcController",
    "MpcParams",
    "MpcProblem",
    "NavEnv",
    "STAGES",
    "build_convex_region",
    "get_stage",
    "normalize_vertex_count",
    "point_in_convex",
    "solve_mpc",
]
