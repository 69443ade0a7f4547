"""Greedy homotopy paths for least squares under a structured nonconvex
penalty that favours few representatives from few groups."""
from .model import (Breakpoint, EventKind, HomotopyPath, Partition, PathEvent,
                    ProblemInstance, ValidationError, signed_support)
from .geometry import (ball_membership, canonical_weight, enumerate_weight_vectors,
                       eval_omega)
from .engine import Mode, SolverOptions, interpolate, solve_mode, solve_path

__all__ = [
    "Breakpoint", "EventKind", "HomotopyPath", "Mode", "Partition", "PathEvent",
    "ProblemInstance", "SolverOptions", "ValidationError", "ball_membership",
    "canonical_weight", "enumerate_weight_vectors", "eval_omega", "interpolate",
    "signed_support", "solve_mode", "solve_path",
]

__version__ = "0.1.0"
