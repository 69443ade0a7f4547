"""Core domain types shared by the solver, oracles and experiment harness.

Indices are 0-based throughout the Python API. File formats written by the
command line front end use 1-based indices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np


class ValidationError(ValueError):
    """Raised when an input object violates its structural invariants."""


class Partition:
    """Disjoint variable groups covering ``{0, ..., p-1}``.

    Groups must be non-empty and contain at least two variables; a group of
    size one would make the pairwise penalty degenerate.
    """

    def __init__(self, groups: Sequence[Sequence[int]], p: Optional[int] = None):
        groups = [tuple(int(i) for i in g) for g in groups]
        if p is None:
            p = 1 + max((max(g) for g in groups if g), default=-1)
        self.p = int(p)
        lookup = np.full(self.p, -1, dtype=int)
        for k, g in enumerate(groups):
            if len(g) == 0:
                raise ValidationError(f"group {k + 1} is empty")
            if len(g) == 1:
                raise ValidationError(f"group {k + 1} is a singleton ({g[0] + 1})")
            if len(set(g)) != len(g):
                raise ValidationError(f"group {k + 1} repeats a variable")
            for i in g:
                if not 0 <= i < self.p:
                    raise ValidationError(f"group {k + 1}: variable {i + 1} out of range 1..{self.p}")
                if lookup[i] >= 0:
                    raise ValidationError(
                        f"variable {i + 1} appears in groups {lookup[i] + 1} and {k + 1}")
                lookup[i] = k
        missing = np.flatnonzero(lookup < 0)
        if missing.size:
            raise ValidationError(
                "partition does not cover variables " + ",".join(str(i + 1) for i in missing[:10]))
        self.groups = tuple(groups)
        self._lookup = lookup
        self._lookup.setflags(write=False)

    @classmethod
    def contiguous(cls, p: int, group_size: int) -> "Partition":
        if p % group_size:
            raise ValidationError(f"p={p} is not divisible by group_size={group_size}")
        return cls([range(k, k + group_size) for k in range(0, p, group_size)], p)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def group_of(self, i: int) -> int:
        """Index of the group containing variable ``i``."""
        return int(self._lookup[i])

    @property
    def group_index(self) -> np.ndarray:
        return self._lookup

    def sizes(self) -> np.ndarray:
        return np.array([len(g) for g in self.groups])

    def __len__(self) -> int:
        return len(self.groups)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Partition) and self.p == other.p and self.groups == other.groups

    def __repr__(self) -> str:
        return f"Partition(p={self.p}, groups={[list(g) for g in self.groups]})"


def as_theta(theta, partition: Partition) -> np.ndarray:
    """Validate group penalty parameters; a scalar is broadcast to all groups."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 0:
        theta = np.full(partition.n_groups, float(theta))
    if theta.shape != (partition.n_groups,):
        raise ValidationError(
            f"theta has {theta.size} entries but the partition has {partition.n_groups} groups")
    if not np.all(np.isfinite(theta)) or np.any(theta < 0):
        raise ValidationError("theta entries must be finite and nonnegative")
    theta = theta.copy()
    theta.setflags(write=False)
    return theta


def as_weights(s, p: Optional[int] = None) -> np.ndarray:
    """Validate a weight vector (every entry >= 1)."""
    s = np.asarray(s, dtype=float)
    if s.ndim != 1 or (p is not None and s.size != p):
        raise ValidationError(f"weight vector must have length {p}")
    if not np.all(np.isfinite(s)) or np.any(s < 1.0):
        raise ValidationError("weights must be finite and >= 1")
    return s


def signed_support(beta, zero_tol: float = 0.0) -> np.ndarray:
    """Sign pattern of ``beta`` with entries of magnitude ``<= zero_tol`` mapped to 0."""
    beta = np.asarray(beta, dtype=float)
    out = np.sign(beta).astype(int)
    out[np.abs(beta) <= zero_tol] = 0
    return out


@dataclass(frozen=True)
class ProblemInstance:
    """Design ``X`` (n x p), response ``y`` and optional ground truth."""

    X: np.ndarray
    y: np.ndarray
    beta_star: Optional[np.ndarray] = None
    sigma: Optional[float] = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).ravel()
        if X.ndim != 2:
            raise ValidationError("X must be a 2-d array")
        if X.shape[0] != y.size:
            raise ValidationError(f"X has {X.shape[0]} rows but y has {y.size} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValidationError("X and y must be finite")
        zero_cols = np.flatnonzero(~np.any(X != 0, axis=0))
        if zero_cols.size:
            raise ValidationError(f"X has all-zero column {zero_cols[0] + 1}")
        if self.beta_star is not None:
            b = np.array(self.beta_star, dtype=float).ravel()
            if b.size != X.shape[1]:
                raise ValidationError("beta_star length does not match the columns of X")
            b.setflags(write=False)
            object.__setattr__(self, "beta_star", b)
        if self.sigma is not None and self.sigma < 0:
            raise ValidationError("sigma must be nonnegative")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def check_partition(self, partition: Partition) -> None:
        if partition.p != self.p:
            raise ValidationError(f"partition covers {partition.p} variables but X has {self.p} columns")


class EventKind(str, Enum):
    ADD = "ADD"
    DROP = "DROP"


@dataclass(frozen=True)
class PathEvent:
    kind: EventKind
    variable: int
    lam: float


@dataclass(frozen=True)
class Breakpoint:
    """State of the path at one knot ``lam``.

    ``active`` is the ordered active set right after ``event`` is applied.
    ``weights`` are the weights in force at ``lam`` itself, i.e. those of the
    segment just above this knot; an ADD event raises the weights of the
    added variable's inactive group-mates for the segment below.
    ``event`` is None for the terminal knot.
    """

    lam: float
    beta: np.ndarray
    active: tuple
    weights: np.ndarray
    event: Optional[PathEvent]


@dataclass
class HomotopyPath:
    breakpoints: list = field(default_factory=list)
    # weights in force below the last knot (after its event, if any)
    final_weights: Optional[np.ndarray] = None
    truncated: bool = False

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([b.lam for b in self.breakpoints])

    @property
    def betas(self) -> np.ndarray:
        return np.array([b.beta for b in self.breakpoints])

    @property
    def events(self) -> list:
        return [b.event for b in self.breakpoints if b.event is not None]

    def add_events(self) -> list:
        return [e for e in self.events if e.kind is EventKind.ADD]

    def __len__(self) -> int:
        return len(self.breakpoints)

    def segment_weights(self, t: int) -> np.ndarray:
        """Weights governing the segment between knot ``t`` and knot ``t+1``."""
        if t + 1 < len(self.breakpoints):
            return self.breakpoints[t + 1].weights
        return self.final_weights

    def segments(self):
        """Yield ``(lam_hi, lam_lo, beta_hi, beta_lo, active, weights)`` per segment."""
        bps = self.breakpoints
        for t in range(len(bps) - 1):
            yield (bps[t].lam, bps[t + 1].lam, bps[t].beta, bps[t + 1].beta,
                   bps[t].active, bps[t + 1].weights)
