"""Independent reference computations used to certify solver output.

Two lambda scales appear here. The *algorithmic* scale is the one used by
the homotopy solver (``lambda_alg``, starting at ``||X^T y||_inf``). The
*penalised* scale belongs to the objective with a ``1/(2n)`` loss factor;
``lambda_alg = n * lambda_pen``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Partition, ProblemInstance, ValidationError, as_theta, as_weights


class ConvergenceError(RuntimeError):
    pass


class AssumptionError(ValueError):
    """The design or ground truth violates an assumption an oracle requires."""


def to_alg(lam_pen: float, n: int) -> float:
    return lam_pen * n


def to_pen(lam_alg: float, n: int) -> float:
    return lam_alg / n


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def weighted_lasso_solve(X, y, weights, lambda_alg: float, tol: float = 1e-10,
                         max_sweeps: int = 100_000, beta0=None) -> np.ndarray:
    """Cyclic coordinate descent for ``1/2||y - X b||^2 + lambda_alg * sum_j s_j |b_j|``.

    Sweeps run in ascending coordinate order and stop once no coordinate
    moves by more than ``tol``.
    """
    if not lambda_alg > 0:
        raise ValidationError("lambda_alg must be positive")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    p = X.shape[1]
    s = as_weights(weights, p)
    G = X.T @ X
    diag = np.diag(G).copy()
    thresh = lambda_alg * s
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    # grad holds X^T (y - X beta)
    grad = X.T @ y - G @ beta
    for _ in range(max_sweeps):
        biggest = 0.0
        for j in range(p):
            old = beta[j]
            new = soft_threshold(grad[j] + diag[j] * old, thresh[j]) / diag[j]
            delta = new - old
            if delta != 0.0:
                beta[j] = new
                grad -= G[:, j] * delta
                biggest = max(biggest, abs(delta))
        if biggest < tol:
            return beta
    raise ConvergenceError(f"coordinate descent did not converge in {max_sweeps} sweeps")


def kkt_residual(beta, X, y, weights, lambda_alg: float) -> float:
    """Largest violation of the weighted-lasso optimality conditions.

    For nonzero ``beta_j`` the correlation must equal ``lambda * s_j * sign(beta_j)``;
    for zero ``beta_j`` its magnitude may not exceed ``lambda * s_j``.
    """
    beta = np.asarray(beta, dtype=float)
    X = np.asarray(X, dtype=float)
    s = np.asarray(weights, dtype=float)
    c = X.T @ (np.asarray(y, dtype=float) - X @ beta)
    nz = beta != 0
    worst = 0.0
    if np.any(nz):
        worst = float(np.max(np.abs(c[nz] - lambda_alg * s[nz] * np.sign(beta[nz]))))
    if np.any(~nz):
        worst = max(worst, float(np.max(np.maximum(0.0, np.abs(c[~nz]) - lambda_alg * s[~nz]))))
    return worst


def _omega_rows(B: np.ndarray, partition: Partition, theta: np.ndarray) -> np.ndarray:
    A = np.abs(B)
    total = np.zeros(B.shape[0])
    for g, members in enumerate(partition.groups):
        m = len(members)
        acc = np.zeros(B.shape[0])
        for a in range(m):
            for b in range(a + 1, m):
                u, v = A[:, members[a]], A[:, members[b]]
                acc += np.minimum(u, v) * (1.0 + theta[g]) + np.maximum(u, v)
        total += acc / (m - 1)
    return total


def brute_force_p1(instance: ProblemInstance, partition: Partition, theta, tau: float,
                   grid_step: float, radius: float, chunk: int = 2_000_000) -> np.ndarray:
    """Exhaustive grid minimiser of ``||y - X b||^2`` over the penalty ball of radius ``tau``.

    The grid is ``{k * grid_step : |k| <= radius / grid_step}`` in every coordinate.
    Ties resolve to the first grid point in lexicographic order.
    """
    p = instance.p
    if p > 3:
        raise ValidationError("brute force is limited to p <= 3")
    instance.check_partition(partition)
    theta = as_theta(theta, partition)
    K = int(round(radius / grid_step))
    axis = np.arange(-K, K + 1) * grid_step
    G = instance.X.T @ instance.X
    Xty = instance.X.T @ instance.y
    yty = float(instance.y @ instance.y)
    total = axis.size ** p
    best_val, best = np.inf, None
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        B = np.empty((idx.size, p))
        rem = idx
        for d in range(p - 1, -1, -1):
            B[:, d] = axis[rem % axis.size]
            rem = rem // axis.size
        feasible = _omega_rows(B, partition, theta) <= tau
        if not np.any(feasible):
            continue
        B = B[feasible]
        obj = yty - 2.0 * B @ Xty + np.einsum("ij,jk,ik->i", B, G, B)
        k = int(np.argmin(obj))
        if obj[k] < best_val:
            best_val, best = obj[k], B[k].copy()
    if best is None:
        raise ValidationError("no grid point lies inside the ball")
    return best


@dataclass(frozen=True)
class AssumptionReport:
    support: np.ndarray
    a1_holds: bool
    a3_holds: bool
    a4_holds: bool
    mu: np.ndarray
    gamma: np.ndarray
    worst_mu_abs: float


def _support_geometry(X: np.ndarray, b: np.ndarray, cond_limit: float):
    """Return ``(a3, mu, gamma)`` for the support of ``b``; mu/gamma are None if singular."""
    n = X.shape[0]
    S = np.flatnonzero(b)
    Sc = np.flatnonzero(b == 0)
    XS = X[:, S]
    GS = XS.T @ XS
    if np.linalg.matrix_rank(GS) < S.size or np.linalg.cond(GS) >= cond_limit:
        return False, None, None
    v = np.linalg.solve(GS, np.sign(b[S]))
    return True, X[:, Sc].T @ (XS @ v), n * v


def check_assumptions(X, beta_star, partition: Partition, cond_limit: float = 1e12) -> AssumptionReport:
    """Evaluate the one-per-group, invertibility and irrepresentability conditions.

    ``gamma`` uses ``(X_S^T X_S / n)^{-1} sign(beta_S)``. The equiangular
    genericity condition is not checked.
    """
    X = np.asarray(X, dtype=float)
    b = np.asarray(beta_star, dtype=float)
    S = np.flatnonzero(b)
    Sc = np.flatnonzero(b == 0)
    a1 = all(np.count_nonzero(b[list(g)]) <= 1 for g in partition.groups)
    if S.size == 0:
        return AssumptionReport(S, a1, True, True, np.zeros(Sc.size), np.zeros(0), 0.0)
    a3, mu, gamma = _support_geometry(X, b, cond_limit)
    if not a3:
        return AssumptionReport(S, a1, False, False, np.full(Sc.size, np.nan),
                                np.full(S.size, np.nan), np.nan)
    worst = float(np.max(np.abs(mu))) if mu.size else 0.0
    a4 = bool(worst < 1 and np.min(np.sign(b[S]) * gamma) > 0)
    return AssumptionReport(S, a1, a3, a4, mu, gamma, worst)


@dataclass(frozen=True)
class RecoveryWindow:
    """Penalised-scale interval on which the lasso has the correct signed support."""

    lambda_l: float
    lambda_u: float
    eta: np.ndarray
    epsilon: np.ndarray

    def predicts(self, lam_pen: float) -> bool:
        return self.lambda_l < lam_pen < self.lambda_u

    @property
    def nonempty(self) -> bool:
        return self.lambda_l < self.lambda_u


def signed_support_window(X, beta_star, noise_w) -> RecoveryWindow:
    """Lower and upper penalty levels bracketing exact signed-support recovery.

    ``lambda_l`` is the smallest level at which every off-support dual
    constraint is strict; ``lambda_u`` the largest at which no true
    coefficient has been shrunk through zero.
    """
    X = np.asarray(X, dtype=float)
    b = np.asarray(beta_star, dtype=float)
    w = np.asarray(noise_w, dtype=float)
    n = X.shape[0]
    S = np.flatnonzero(b)
    Sc = np.flatnonzero(b == 0)
    if S.size == 0:
        return RecoveryWindow(0.0, np.inf, X.T @ w / n, np.zeros(0))
    a3, mu, gamma = _support_geometry(X, b, 1e12)
    if not a3 or (mu.size and np.max(np.abs(mu)) >= 1) or np.min(np.sign(b[S]) * gamma) <= 0:
        raise AssumptionError("invertibility or irrepresentability fails on this design")
    XS = X[:, S]
    GS = XS.T @ XS
    eta = X[:, Sc].T @ (w - XS @ np.linalg.solve(GS, XS.T @ w)) / n
    epsilon = np.linalg.solve(GS, XS.T @ w)
    if eta.size:
        denom = np.where(eta > 0, 1.0, -1.0) - mu
        lambda_l = float(max(0.0, np.max(eta / denom)))
    else:
        lambda_l = 0.0
    ratio = (b[S] + epsilon) / gamma
    # a negative ratio means that coefficient cannot keep its sign at any level
    lambda_u = float(np.min(np.maximum(ratio, 0.0)))
    return RecoveryWindow(lambda_l, lambda_u, eta, epsilon)


def l1_logistic_solve(X, labels, lambda_alg: float, tol: float = 1e-12,
                      max_iter: int = 200_000) -> np.ndarray:
    """Accelerated proximal gradient for ``logistic NLL + lambda_alg * ||b||_1``."""
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=float)
    # the logistic Hessian is bounded by X^T X / 4
    step = 4.0 / np.linalg.norm(X, 2) ** 2
    beta = np.zeros(X.shape[1])
    mom, t = beta.copy(), 1.0
    for _ in range(max_iter):
        prob = 1.0 / (1.0 + np.exp(-(X @ mom)))
        grad = X.T @ (prob - labels)
        nxt = soft_threshold(mom - step * grad, step * lambda_alg)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        mom = nxt + ((t - 1.0) / t_next) * (nxt - beta)
        if np.max(np.abs(nxt - beta)) < tol:
            return nxt
        beta, t = nxt, t_next
    raise ConvergenceError("proximal gradient did not converge")
