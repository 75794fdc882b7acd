"""Propensity-score estimation and common-support auditing.

The propensity score is the probability of trial membership given the
observed confounders, fitted by logistic regression on the pooled trial
plus external rows. Scores are never clipped here; trimming is an explicit
estimand choice made in the balancing module.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dataset import Dataset
from .errors import DegenerateScores, EmptyDataset
from .glm import DEFAULT_MAX_ITER, DEFAULT_TOL, GlmFit, add_intercept, fit_logistic


@dataclass(frozen=True)
class PropensityModel:
    glm: GlmFit
    scores: np.ndarray
    covariate_names: tuple[str, ...]


@dataclass(frozen=True)
class PositivityReport:
    trial_range: tuple[float, float]
    external_range: tuple[float, float]
    overlap_interval: Optional[tuple[float, float]]
    band: tuple[float, float]
    n_outside_trial: int
    n_outside_external: int
    prop_outside_trial: float
    prop_outside_external: float
    insufficient_overlap: bool

    def to_dict(self) -> dict:
        return {
            "trial_range": list(self.trial_range),
            "external_range": list(self.external_range),
            "overlap_interval": None
            if self.overlap_interval is None
            else list(self.overlap_interval),
            "band": list(self.band),
            "n_outside_trial": self.n_outside_trial,
            "n_outside_external": self.n_outside_external,
            "prop_outside_trial": self.prop_outside_trial,
            "prop_outside_external": self.prop_outside_external,
            "insufficient_overlap": self.insufficient_overlap,
        }


def estimate_propensity(
    data: Dataset,
    covariates: Optional[Sequence[str]] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> PropensityModel:
    """Fit the trial-membership logistic model and score every subject.

    Parameters
    ----------
    data : Dataset
        Pooled trial and external subjects.
    covariates : sequence of str, optional
        Subset of covariates to include; all by default.
    """
    if data.n_external == 0:
        raise EmptyDataset("propensity estimation needs external records")
    names = tuple(covariates) if covariates is not None else data.covariate_names
    X_raw = data.covariate_matrix(names)
    # Drop covariates constant across all subjects; they carry no membership
    # information and would make the design rank deficient.
    keep = [j for j in range(X_raw.shape[1]) if np.ptp(X_raw[:, j]) > 0]
    X = add_intercept(X_raw[:, keep]) if keep else add_intercept(X_raw[:, :0])
    y = data.group_mask.astype(float)
    fit = fit_logistic(X, y, tol=tol, max_iter=max_iter)
    scores = fit.predict(X)
    if np.any(scores <= 0.0) or np.any(scores >= 1.0):
        raise DegenerateScores("fitted propensity score hit 0 or 1")
    return PropensityModel(glm=fit, scores=scores, covariate_names=names)


def positivity_report(
    model: PropensityModel, data: Dataset, a: float = 0.1
) -> PositivityReport:
    """Summarize per-group score ranges and mass outside the band (a, 1-a).

    ``insufficient_overlap`` is raised when the group score ranges do not
    intersect or when more than 20% of either group lies outside the band.
    """
    if not 0.0 <= a < 0.5:
        raise ValueError(f"band parameter a={a} must be in [0, 0.5)")
    e = model.scores
    trial = data.group_mask
    e_t, e_x = e[trial], e[~trial]
    lo = max(e_t.min(), e_x.min())
    hi = min(e_t.max(), e_x.max())
    overlap = (float(lo), float(hi)) if lo <= hi else None
    outside = (e <= a) | (e >= 1.0 - a) if a > 0 else np.zeros(len(e), dtype=bool)
    n_out_t = int(np.sum(outside[trial]))
    n_out_x = int(np.sum(outside[~trial]))
    p_out_t = n_out_t / len(e_t)
    p_out_x = n_out_x / len(e_x)
    return PositivityReport(
        trial_range=(float(e_t.min()), float(e_t.max())),
        external_range=(float(e_x.min()), float(e_x.max())),
        overlap_interval=overlap,
        band=(a, 1.0 - a),
        n_outside_trial=n_out_t,
        n_outside_external=n_out_x,
        prop_outside_trial=p_out_t,
        prop_outside_external=p_out_x,
        insufficient_overlap=overlap is None or p_out_t > 0.2 or p_out_x > 0.2,
    )
