"""Mixed-integer convex programs for locomotion feasibility and trajectory generation."""
from .bnb import FEAS, INFEAS, NUMERICAL, OPTIMAL, TIMEOUT, SolveResult, solve, solve_exhaustive
from .check import CheckReport, check_solution
from .config import PRESETS, MicpConfig
from .gaits import Gait, bound, default_catalog, load_catalog, pace, save_catalog, stand, trot
from .model import CHOTU, GO2, RobotModel, get_model
from .problem import MicpProblem, add_collision_constraints, build_gait_fixed, build_gait_free
from .reference import Pose, reference_trajectory
from .trajectory import Trajectory, extract_gait, unpack

__all__ = [
    "FEAS", "INFEAS", "NUMERICAL", "OPTIMAL", "TIMEOUT", "SolveResult", "solve", "solve_exhaustive",
    "CheckReport", "check_solution", "PRESETS", "MicpConfig", "Gait", "bound", "default_catalog",
    "load_catalog", "pace", "save_catalog", "stand", "trot", "CHOTU", "GO2", "RobotModel", "get_model",
    "MicpProblem", "add_collision_constraints", "build_gait_fixed", "build_gait_free", "Pose",
    "reference_trajectory", "Trajectory", "extract_gait", "unpack",
]
