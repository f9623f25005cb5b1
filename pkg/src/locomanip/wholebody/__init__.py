"""Whole-body trajectory optimization by direct transcription."""

from .build import build_problem, coordinate_names, limit_table
from .dynamics import DoubleIntegrator, DynamicsModel, PlanarFloatingBase, fd_jacobians
from .problem import ContactSpec, OcpProblem, ProblemError, Transcription, check_friction_cone
from .sqp import KktReport, OcpSolution, SolveStatus, evaluate_kkt, solve
from .trajio import Trajectory, TrajectoryFormatError, read_trajectory, solution_trajectory, write_trajectory

__all__ = [
    "ContactSpec",
    "DoubleIntegrator",
    "DynamicsModel",
    "KktReport",
    "OcpProblem",
    "OcpSolution",
    "PlanarFloatingBase",
    "ProblemError",
    "SolveStatus",
    "Trajectory",
    "TrajectoryFormatError",
    "Transcription",
    "build_problem",
    "check_friction_cone",
    "coordinate_names",
    "evaluate_kkt",
    "fd_jacobians",
    "limit_table",
    "read_trajectory",
    "solution_trajectory",
    "solve",
    "write_trajectory",
]
