"""Homotopy solver for the group-adaptive weighted lasso path.

The same routine produces four algorithms depending on two switches:

=========  ======  ==========
mode       theta   drops
=========  ======  ==========
lasso      0       yes
lars       0       no
replasso   free    yes
replars    free    no
=========  ======  ==========

All lambdas are on the un-normalised scale ``||X^T y||_inf``; the
penalised problem with a ``1/(2n)`` loss uses ``lambda / n``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .cholesky import GramCholesky, SingularGramError
from .geometry import rank_increment
from .model import (Breakpoint, EventKind, HomotopyPath, Partition, PathEvent,
                    ProblemInstance, ValidationError, as_theta)

logger = logging.getLogger(__name__)

TIE_TOL = 1e-12


class PathComplete(Exception):
    """No inactive variable has a nonzero residual correlation."""


class Mode(str, Enum):
    LASSO = "lasso"
    LARS = "lars"
    REPLASSO = "replasso"
    REPLARS = "replars"

    @property
    def allow_drop(self) -> bool:
        return self in (Mode.LASSO, Mode.REPLASSO)

    @property
    def grouped(self) -> bool:
        return self in (Mode.REPLASSO, Mode.REPLARS)


@dataclass(frozen=True)
class SolverOptions:
    allow_drop: bool = True
    lambda_min: Optional[float] = None  # default 1e-8 * ||X^T y||_inf
    max_events: Optional[int] = None  # default 10 * min(n, p)
    zero_tol: float = 1e-10
    kkt_tol: float = 1e-8
    max_cond: float = 1e12

    def __post_init__(self):
        if self.lambda_min is not None and self.lambda_min < 0:
            raise ValidationError("lambda_min must be >= 0")
        if self.max_events is not None and self.max_events < 1:
            raise ValidationError("max_events must be positive")
        if self.zero_tol <= 0 or self.kkt_tol <= 0 or self.max_cond <= 0:
            raise ValidationError("tolerances must be positive")


def select_variable(residual_corr, weights, active) -> int:
    """Inactive variable with the largest weighted absolute correlation.

    Ties go to the smallest index. Raises :class:`PathComplete` when every
    inactive correlation is zero.
    """
    score = np.abs(np.asarray(residual_corr, dtype=float)) / np.asarray(weights, dtype=float)
    score[list(active)] = -np.inf
    if not np.any(np.isfinite(score)):
        raise PathComplete("no inactive variables remain")
    j = int(np.argmax(score))  # first maximum, i.e. smallest index
    if score[j] <= 0:
        raise PathComplete("all inactive residual correlations are zero")
    return j


def weight_update(weights, active, added: int, partition: Partition, theta) -> np.ndarray:
    """Raise the weights of the inactive group-mates of ``added``.

    ``active`` is the active set before ``added`` joins it. The added
    variable's own weight and every other group are left unchanged.
    """
    s = np.array(weights, dtype=float)
    g = partition.group_of(added)
    step = rank_increment(partition, theta)[added]
    if step == 0:
        return s
    taken = set(active) | {added}
    mates = [j for j in partition.groups[g] if j not in taken]
    s[mates] += step
    return s


def direction(X, active, weights, residual=None, *, signs=None, gram: Optional[GramCholesky] = None):
    """Coefficient velocity along which active weighted correlations shrink at rate one.

    Returns a p-vector ``w`` with ``w_A = (X_A^T X_A)^{-1} diag(z) s_A`` where ``z``
    is ``signs`` if given, else the sign of ``X_A^T residual``.
    """
    X = np.asarray(X, dtype=float)
    active = list(active)
    s = np.asarray(weights, dtype=float)
    if signs is None:
        signs = np.sign(X[:, active].T @ residual)
    rhs = np.asarray(signs, dtype=float) * s[active]
    if gram is None:
        gram = GramCholesky(X)
        for j in active:
            gram.insert(j)
    w = np.zeros(X.shape[1])
    w[active] = gram.solve(rhs)
    return w


def step_length(X, active, weights, residual, beta, lam, direction, allow_drop,
                *, lambda_min: float = 0.0, just_dropped: Optional[int] = None,
                zero_tol: float = 1e-10):
    """Distance ``rho`` to the next event along ``direction``.

    Returns ``(rho, event)``; ``event`` is None when no event occurs before
    ``lambda_min`` and the step runs to it.
    """
    X = np.asarray(X, dtype=float)
    s = np.asarray(weights, dtype=float)
    beta = np.asarray(beta, dtype=float)
    w = np.asarray(direction, dtype=float)
    p = X.shape[1]
    active = list(active)
    inactive = np.setdiff1d(np.arange(p), active)
    c = X.T @ residual
    a = X.T @ (X[:, active] @ w[active])
    floor = TIE_TOL * max(lam, 1e-300)
    span = lam - lambda_min

    cands = []  # (rho, kind order, variable)
    if inactive.size:
        cj, aj, sj = c[inactive], a[inactive], s[inactive]
        with np.errstate(divide="ignore", invalid="ignore"):
            r_plus = (lam * sj - cj) / (sj - aj)
            r_minus = (lam * sj + cj) / (sj + aj)
        if just_dropped is not None:
            # its crossing on the side it just left sits at rho == 0
            k = int(np.searchsorted(inactive, just_dropped))
            if cj[k] > 0:
                r_plus[k] = np.inf
            else:
                r_minus[k] = np.inf
        both = np.minimum(np.where((r_plus > floor) & (r_plus <= span), r_plus, np.inf),
                          np.where((r_minus > floor) & (r_minus <= span), r_minus, np.inf))
        ok = np.flatnonzero(np.isfinite(both))
        cands.extend((float(both[k]), 0, int(inactive[k])) for k in ok)
    if allow_drop and active:
        scale = np.max(np.abs(beta)) if beta.size else 0.0
        for i in active:
            if abs(beta[i]) > zero_tol * scale and w[i] != 0 and np.sign(w[i]) != np.sign(beta[i]):
                r = -beta[i] / w[i]
                if 0 < r <= span:
                    cands.append((float(r), 1, int(i)))
    if not cands:
        return span, None
    rmin = min(r for r, _, _ in cands)
    tied = [cd for cd in cands if cd[0] <= rmin + TIE_TOL * max(1.0, rmin)]
    rho, kind, var = min(tied, key=lambda cd: (cd[1], cd[2]))
    rho = rmin
    ev_kind = EventKind.ADD if kind == 0 else EventKind.DROP
    return rho, PathEvent(ev_kind, var, lam - rho)


def solve_path(instance: ProblemInstance, partition: Optional[Partition] = None, theta=0.0,
               options: SolverOptions = SolverOptions()) -> HomotopyPath:
    """Trace the adaptive weighted-lasso path from ``||X^T y||_inf`` down to ``lambda_min``.

    Weights start at one. Whenever a variable joins for the first time, the
    still-inactive members of its group have their weight raised by
    ``theta_g / (|G_g| - 1)``. With ``theta = 0`` this is the ordinary lasso
    (or LARS when drops are disabled) homotopy.
    """
    X, y = instance.X, instance.y
    n, p = X.shape
    if partition is None:
        if np.any(np.asarray(theta) != 0):
            raise ValidationError("a partition is required when theta is nonzero")
        inc = np.zeros(p)
    else:
        instance.check_partition(partition)
        theta = as_theta(theta, partition)
        inc = rank_increment(partition, theta)

    c = X.T @ y
    lam0 = float(np.max(np.abs(c)))
    lambda_min = options.lambda_min if options.lambda_min is not None else 1e-8 * lam0
    max_events = options.max_events if options.max_events is not None else 10 * min(n, p)

    s = np.ones(p)
    beta = np.zeros(p)
    path = HomotopyPath()
    if lam0 == 0.0:
        path.breakpoints.append(Breakpoint(0.0, beta, (), s.copy(), None))
        path.final_weights = s.copy()
        return path

    gram = GramCholesky(X, options.max_cond)
    active: list = []
    signs: dict = {}
    ever_added: set = set()
    lam = lam0
    n_events = 0

    def commit_add(j: int, corr: float):
        nonlocal s
        try:
            gram.insert(j)
        except SingularGramError as exc:
            exc.lam = lam
            raise
        # a re-entering variable does not raise its group-mates a second time
        if j not in ever_added and inc[j] != 0:
            s = weight_update(s, active, j, partition, theta)
        ever_added.add(j)
        active.append(j)
        signs[j] = 1.0 if corr > 0 else -1.0

    j0 = select_variable(c, s, active)
    path.breakpoints.append(Breakpoint(lam, beta.copy(), (j0,), s.copy(),
                                       PathEvent(EventKind.ADD, j0, lam)))
    commit_add(j0, c[j0])
    n_events = 1
    just_dropped = None

    while True:
        if n_events >= max_events:
            logger.warning("path stopped after %d events at lambda=%g", n_events, lam)
            path.truncated = True
            break
        residual = y - X @ beta
        z = np.array([signs[j] for j in active])
        w = direction(X, active, s, signs=z, gram=gram)
        rho, event = step_length(X, active, s, residual, beta, lam, w, options.allow_drop,
                                 lambda_min=lambda_min, just_dropped=just_dropped,
                                 zero_tol=options.zero_tol)
        lam_new = lam - rho if event is not None else lambda_min
        beta = beta + rho * w
        just_dropped = None
        weights_here = s.copy()
        if event is not None and event.kind is EventKind.DROP:
            i = event.variable
            gram.delete(i)
            active.remove(i)
            del signs[i]
            just_dropped = i
        # re-project onto the exact weighted-lasso solution for this active set
        beta = np.zeros(p)
        if active:
            z = np.array([signs[j] for j in active])
            beta[active] = gram.solve(X[:, active].T @ y - lam_new * z * s[active])
        lam = lam_new
        if event is None:
            path.breakpoints.append(Breakpoint(lam, beta.copy(), tuple(active), weights_here, None))
            break
        n_events += 1
        if event.kind is EventKind.ADD:
            j = event.variable
            corr = float(X[:, j] @ (y - X @ beta))
            path.breakpoints.append(Breakpoint(lam, beta.copy(), tuple(active) + (j,),
                                               weights_here, event))
            commit_add(j, corr)
        else:
            path.breakpoints.append(Breakpoint(lam, beta.copy(), tuple(active), weights_here, event))
        if lam <= lambda_min:
            break
    path.final_weights = s.copy()
    return path


def solve_mode(instance: ProblemInstance, mode, partition: Optional[Partition] = None,
               theta=0.0, options: Optional[SolverOptions] = None) -> HomotopyPath:
    """Convenience wrapper selecting the drop rule and theta from ``mode``."""
    mode = Mode(mode)
    options = replace(options or SolverOptions(), allow_drop=mode.allow_drop)
    if not mode.grouped:
        return solve_path(instance, None, 0.0, options)
    return solve_path(instance, partition, theta, options)


def _locate(path: HomotopyPath, lam: float) -> int:
    lams = path.lambdas
    hi, lo = lams[0], lams[-1]
    tol = 1e-12 * max(abs(hi), 1.0)
    if lam > hi + tol or lam < lo - tol:
        raise ValueError(f"lambda={lam} outside path range [{lo}, {hi}]")
    # index t with lams[t] >= lam >= lams[t+1]
    t = int(np.searchsorted(-lams, -lam, side="right")) - 1
    return min(max(t, 0), len(lams) - 1)


def interpolate(path: HomotopyPath, lam: float) -> np.ndarray:
    """Coefficients at ``lam`` by affine interpolation between the bracketing knots."""
    t = _locate(path, lam)
    bps = path.breakpoints
    if t == len(bps) - 1 or lam == bps[t].lam:
        return bps[t].beta.copy()
    hi, lo = bps[t], bps[t + 1]
    frac = (hi.lam - lam) / (hi.lam - lo.lam)
    return hi.beta + frac * (lo.beta - hi.beta)


def weights_at(path: HomotopyPath, lam: float) -> np.ndarray:
    """Weights governing the solution at ``lam`` (those of the enclosing segment)."""
    t = _locate(path, lam)
    if t == len(path.breakpoints) - 1:
        return path.final_weights
    return path.segment_weights(t)
