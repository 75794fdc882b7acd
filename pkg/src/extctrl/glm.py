"""Logistic and linear model fitting used by propensity estimation and STC.

Logistic fitting runs iteratively reweighted least squares from a zero start,
solving each inner weighted least-squares step by QR (stable up to condition
numbers around 1e8). Inference is bootstrap-based elsewhere, so no
Hessian-derived standard errors are reported here.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstantResponse,
    NoConvergence,
    RankDeficientDesign,
    SeparationDetected,
)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100

# |coefficient| beyond this on the logit scale is treated as separation.
SEPARATION_THRESHOLD = 15.0


class Family(enum.Enum):
    LOGISTIC = "logistic"
    LINEAR = "linear"


@dataclass(frozen=True)
class GlmFit:
    family: Family
    coefficients: np.ndarray
    converged: bool
    iterations: int
    deviance: float
    max_abs_coefficient: float

    def linear_predictor(self, X: np.ndarray) -> np.ndarray:
        return X @ self.coefficients

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Fitted mean response: expit of the linear predictor for logistic."""
        eta = self.linear_predictor(X)
        if self.family is Family.LOGISTIC:
            return expit(eta)
        return eta


def expit(eta: np.ndarray) -> np.ndarray:
    """Numerically stable inverse logit."""
    eta = np.asarray(eta, dtype=float)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _check_design(X: np.ndarray, n_min: int) -> None:
    n, p = X.shape
    if n < n_min:
        raise RankDeficientDesign(f"need at least {n_min} rows, got {n}")
    if np.linalg.matrix_rank(X) < p:
        raise RankDeficientDesign("design matrix is rank deficient")


def _weighted_lstsq(X: np.ndarray, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    # QR on the sqrt-weighted system; avoids forming X'WX.
    sw = np.sqrt(w)
    return np.linalg.lstsq(X * sw[:, None], z * sw, rcond=None)[0]


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> GlmFit:
    """Maximum-likelihood logistic regression via IRLS.

    Parameters
    ----------
    X : ndarray, shape (n, p+1)
        Design matrix including the intercept column.
    y : ndarray, shape (n,)
        0/1 responses, both values present.
    tol : float
        Convergence on the max absolute score component.
    max_iter : int
        Iteration cap.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if np.all(y == y[0]):
        raise ConstantResponse("response takes a single value")
    _check_design(X, p + 1)

    beta = np.zeros(p)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        mu = expit(X @ beta)
        score = X.T @ (y - mu)
        if np.max(np.abs(score)) < tol:
            converged = True
            break
        w = np.clip(mu * (1.0 - mu), 1e-12, None)
        z = X @ beta + (y - mu) / w
        beta = _weighted_lstsq(X, z, w)
        if np.max(np.abs(beta)) > SEPARATION_THRESHOLD:
            raise SeparationDetected(
                "coefficient exceeded 15 on the logit scale; data are (quasi-)separated"
            )
    if not converged:
        raise NoConvergence(f"IRLS did not converge in {max_iter} iterations")

    mu = np.clip(expit(X @ beta), 1e-300, 1 - 1e-16)
    deviance = -2.0 * float(np.sum(y * np.log(mu) + (1 - y) * np.log1p(-mu)))
    return GlmFit(
        family=Family.LOGISTIC,
        coefficients=beta,
        converged=True,
        iterations=iterations,
        deviance=deviance,
        max_abs_coefficient=float(np.max(np.abs(beta))),
    )


def fit_linear(X: np.ndarray, y: np.ndarray) -> GlmFit:
    """Ordinary least squares; deviance is the residual sum of squares."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    _check_design(X, p + 2)
    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    resid = y - X @ beta
    return GlmFit(
        family=Family.LINEAR,
        coefficients=beta,
        converged=True,
        iterations=1,
        deviance=float(resid @ resid),
        max_abs_coefficient=float(np.max(np.abs(beta))),
    )


def add_intercept(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.hstack([np.ones((X.shape[0], 1)), X])
