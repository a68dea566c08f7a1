"""Linear quantile regression by exact minimisation of the check loss."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
from scipy.optimize import linprog


def check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {tau}")
    return tau


def pinball_loss(y, q, tau: float):
    """Check loss ``tau*(y-q)`` if ``y >= q`` else ``(1-tau)*(q-y)``.

    Works elementwise on arrays; returns a float for scalar input.
    """
    tau = check_tau(tau)
    r = np.asarray(y, dtype=float) - np.asarray(q, dtype=float)
    out = np.where(r >= 0, tau * r, (tau - 1.0) * r)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class QrModel:
    tau: float
    beta: np.ndarray  # intercept first, then one coefficient per covariate
    n_train: int
    objective: float

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        k = len(self.beta) - 1
        X = X.reshape(-1, k) if k else X.reshape(max(len(X), 1), 0)
        if not np.all(np.isfinite(X)):
            raise ValueError("covariates must be finite")
        return self.beta[0] + X @ self.beta[1:]


def _design(X, n: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(n, -1)
    return np.hstack([np.ones((n, 1)), X])


def _polish(A: np.ndarray, y: np.ndarray, beta: np.ndarray, tau: float):
    """Snap an LP solution onto the exact basic solution it sits at.

    An optimal vertex interpolates p observations; re-solving the p x p system
    through the p smallest residuals removes the solver's feasibility slack.
    """
    p = A.shape[1]
    order = np.argsort(np.abs(y - A @ beta), kind="stable")
    chosen = []
    for i in order:
        trial = chosen + [i]
        if np.linalg.matrix_rank(A[trial]) == len(trial):
            chosen = trial
            if len(chosen) == p:
                break
    if len(chosen) < p:
        return beta
    snapped = np.linalg.solve(A[chosen], y[chosen])
    if np.sum(pinball_loss(y, A @ snapped, tau)) <= np.sum(pinball_loss(y, A @ beta, tau)):
        return snapped
    return beta


def fit_qr(X, y, tau: float) -> QrModel:
    """Fit a linear conditional-quantile model with intercept.

    Solves the primal LP ``min tau*sum(u) + (1-tau)*sum(v)`` subject to
    ``y - A beta = u - v``, ``u, v >= 0`` with the HiGHS dual simplex, then
    snaps the result onto the interpolating basic solution.

    Parameters
    ----------
    X : array_like, shape (n, k)
        Covariates without the intercept column; ``k`` may be 0.
    y : array_like, shape (n,)
    tau : float
        Quantile level in (0, 1).
    """
    tau = check_tau(tau)
    y = np.asarray(y, dtype=float).ravel()
    n = len(y)
    if n < 3:
        raise ValueError(f"quantile regression needs at least 3 rows, got {n}")
    A = _design(X, n)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(y))):
        raise ValueError("training data must be finite")
    p = A.shape[1]
    if np.linalg.matrix_rank(A) < p:
        raise ValueError("design matrix is rank deficient (collinear covariates)")

    c = np.concatenate([np.zeros(p), np.full(n, tau), np.full(n, 1.0 - tau)])
    eye = sparse.identity(n, format="csr")
    A_eq = sparse.hstack([sparse.csr_matrix(A), eye, -eye], format="csr")
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    res = linprog(c, A_eq=A_eq, b_eq=y, bounds=bounds, method="highs-ds")
    if not res.success:
        raise RuntimeError(f"quantile regression LP failed: {res.message}")

    beta = _polish(A, y, res.x[:p], tau)
    objective = float(np.sum(pinball_loss(y, A @ beta, tau)))
    return QrModel(tau=tau, beta=beta, n_train=n, objective=objective)


def predict_qr(m: QrModel, x) -> float:
    """Predict the conditional quantile at a single covariate vector."""
    return float(m.predict(np.asarray(x, dtype=float).reshape(1, -1))[0])
