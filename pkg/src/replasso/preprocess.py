"""Lasso-style pre-processing: adaptive column scaling and an IRLS loop for
penalised logistic regression."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .engine import SolverOptions, interpolate, solve_path
from .geometry import eval_omega
from .model import Partition, ProblemInstance, ValidationError

SCALE_FLOOR = 1e-8
WEIGHT_FLOOR = 1e-6


class IRLSDivergenceError(RuntimeError):
    def __init__(self, message, iterations=()):
        super().__init__(message)
        self.iterations = list(iterations)


@dataclass(frozen=True)
class ScaledInstance:
    """A problem whose design columns were multiplied by ``column_scale``.

    A coefficient vector ``b`` fitted on the scaled design corresponds to
    ``column_scale * b`` on the original one.
    """

    instance: ProblemInstance
    column_scale: np.ndarray
    original: ProblemInstance

    def to_original(self, beta_scaled) -> np.ndarray:
        return self.column_scale * np.asarray(beta_scaled, dtype=float)

    @property
    def equivalent_weights(self) -> np.ndarray:
        """Per-coefficient penalty weights of the same problem on the original design."""
        return 1.0 / self.column_scale


def adaptive_scale(instance: ProblemInstance) -> ScaledInstance:
    """Scale each column by the magnitude of a pilot coefficient (adaptive lasso, exponent 1).

    The pilot is ordinary least squares when ``n >= p`` and the design has
    full column rank, and per-column univariate regression otherwise.
    """
    X, y = instance.X, instance.y
    n, p = X.shape
    if n >= p and np.linalg.matrix_rank(X) == p:
        pilot = np.linalg.lstsq(X, y, rcond=None)[0]
    else:
        pilot = (X.T @ y) / np.sum(X * X, axis=0)
    mag = np.abs(pilot)
    top = mag.max()
    if top == 0:
        raise ValidationError("all pilot coefficients are zero; adaptive scaling is undefined")
    scale = np.maximum(mag, SCALE_FLOOR * top)
    beta_star = None if instance.beta_star is None else instance.beta_star / scale
    scaled = ProblemInstance(X * scale, y, beta_star, instance.sigma)
    return ScaledInstance(scaled, scale, instance)


def logistic_nll(X, labels, beta) -> float:
    eta = X @ beta
    return float(np.sum(np.logaddexp(0.0, eta) - labels * eta))


@dataclass
class IRLSIteration:
    iteration: int
    beta: np.ndarray
    objective: float
    # (variable, group or None, lambda at entry, coefficient at the target lambda)
    selections: list = field(default_factory=list)


@dataclass
class IRLSResult:
    beta: np.ndarray
    iterations: list
    converged: bool


def irls_sparse_logistic(X, labels, partition: Optional[Partition], theta, lambda_alg: float,
                         outer_iters: int = 50, engine_options: Optional[SolverOptions] = None,
                         k: int = 4, tol: float = 1e-6, line_search: bool = False) -> IRLSResult:
    """Penalised logistic regression by repeated weighted least-squares paths.

    Each outer step forms the local quadratic model of the logistic loss,
    traces the grouped path on it and keeps the coefficients at
    ``lambda_alg``. The first ``k`` variables to enter each path are recorded.

    With ``line_search`` the step towards each new estimate is halved until
    the penalised objective does not increase; without it, the nonconvex
    penalty can make the iterates alternate between group representatives.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if X.shape[0] != labels.size:
        raise ValidationError("labels length does not match the rows of X")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValidationError("labels must be 0 or 1")
    if not lambda_alg > 0:
        raise ValidationError("lambda_alg must be positive")
    grouped = partition is not None and np.any(np.asarray(theta) != 0)
    options = engine_options or SolverOptions()
    p = X.shape[1]
    beta = np.zeros(p)

    def objective(b):
        pen = eval_omega(b, partition, theta) if grouped else float(np.sum(np.abs(b)))
        return logistic_nll(X, labels, b) + lambda_alg * pen

    history = []
    prev = objective(beta)
    strikes = 0
    for it in range(1, outer_iters + 1):
        eta = X @ beta
        prob = 1.0 / (1.0 + np.exp(-eta))
        v = np.maximum(prob * (1.0 - prob), WEIGHT_FLOOR)
        z = eta + (labels - prob) / v
        root = np.sqrt(v)
        inst = ProblemInstance(X * root[:, None], root * z)
        path = solve_path(inst, partition if grouped else None, theta if grouped else 0.0, options)
        lam_top = path.lambdas[0]
        if lambda_alg >= lam_top:
            new = np.zeros(p)
        else:
            new = interpolate(path, max(lambda_alg, path.lambdas[-1]))
        picks = []
        for ev in path.add_events()[:k]:
            grp = partition.group_of(ev.variable) if partition is not None else None
            picks.append((ev.variable, grp, ev.lam, float(new[ev.variable])))
        obj = objective(new)
        if line_search and obj > prev:
            t, new_obj, trial = 1.0, obj, new
            for _ in range(30):
                t *= 0.5
                trial = beta + t * (new - beta)
                new_obj = objective(trial)
                if new_obj <= prev:
                    break
            # no descent along this step: stay put, which ends the loop
            new, obj = (trial, new_obj) if new_obj <= prev else (beta.copy(), prev)
        history.append(IRLSIteration(it, new.copy(), obj, picks))
        step = float(np.max(np.abs(new - beta)))
        beta = new
        strikes = strikes + 1 if obj > prev else 0
        if strikes >= 3:
            raise IRLSDivergenceError("objective increased on 3 consecutive iterations", history)
        prev = obj
        if step < tol:
            return IRLSResult(beta, history, True)
    return IRLSResult(beta, history, False)
