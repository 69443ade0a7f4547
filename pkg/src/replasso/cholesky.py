"""Upper-triangular Cholesky factor of an active-set Gram matrix with
column insertion and deletion."""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular


class SingularGramError(np.linalg.LinAlgError):
    def __init__(self, message, active=(), lam=None):
        super().__init__(message)
        self.active = tuple(active)
        self.lam = lam


class GramCholesky:
    """Maintain ``R`` with ``R.T @ R == X_A.T @ X_A`` for an ordered active set."""

    def __init__(self, X: np.ndarray, max_cond: float = 1e12):
        self.X = X
        self.max_cond = max_cond
        self.R = np.zeros((0, 0))
        self.cols: list = []

    def __len__(self) -> int:
        return len(self.cols)

    def condition_estimate(self) -> float:
        if not self.cols:
            return 1.0
        d = np.abs(np.diag(self.R))
        if d.min() == 0:
            return np.inf
        return float((d.max() / d.min()) ** 2)

    def insert(self, j: int) -> None:
        x = self.X[:, j]
        k = len(self.cols)
        diag2 = float(x @ x)
        if k:
            r = solve_triangular(self.R, self.X[:, self.cols].T @ x, trans="T")
            diag2 -= float(r @ r)
        else:
            r = np.zeros(0)
        scale = float(x @ x)
        if diag2 <= 1e-14 * scale:
            raise SingularGramError(f"column {j} is linearly dependent on the active set",
                                    active=self.cols + [j])
        R = np.zeros((k + 1, k + 1))
        R[:k, :k] = self.R
        R[:k, k] = r
        R[k, k] = np.sqrt(diag2)
        self.R = R
        self.cols.append(j)
        self._check()

    def delete(self, j: int) -> None:
        k = self.cols.index(j)
        R = np.delete(self.R, k, axis=1)
        m = R.shape[1]
        # Givens rotations restore the upper-triangular shape
        for i in range(k, m):
            a, b = R[i, i], R[i + 1, i]
            h = np.hypot(a, b)
            if h == 0:
                continue
            c, s = a / h, b / h
            rows = R[[i, i + 1], i:].copy()
            R[i, i:] = c * rows[0] + s * rows[1]
            R[i + 1, i:] = -s * rows[0] + c * rows[1]
        self.R = R[:m, :m]
        self.cols.pop(k)
        self._check()

    def refactor(self) -> None:
        cols = list(self.cols)
        G = self.X[:, cols].T @ self.X[:, cols]
        try:
            self.R = np.linalg.cholesky(G).T
        except np.linalg.LinAlgError as exc:
            raise SingularGramError("active Gram matrix is singular", active=cols) from exc

    def _check(self) -> None:
        if self.condition_estimate() > self.max_cond:
            self.refactor()
            if self.condition_estimate() > self.max_cond:
                raise SingularGramError(
                    f"active Gram matrix condition estimate exceeds {self.max_cond:g}",
                    active=self.cols)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve ``(X_A.T X_A) z = b`` with ``b`` ordered like the active set."""
        z = solve_triangular(self.R, b, trans="T")
        return solve_triangular(self.R, z)
