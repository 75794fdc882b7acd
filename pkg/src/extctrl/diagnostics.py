"""Balance and comparability auditing before and after weighting.

Standardized mean differences use the frequency-weight convention for the
weighted variance (sum-of-weights denominator); conventions differ across
software, so the choice is fixed and documented here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .balancing import WeightSet, effective_sample_size
from .dataset import Dataset
from .errors import AllWeightsZero

DEFAULT_SMD_THRESHOLD = 0.1

CHECKLIST_FIELDS = (
    "eligibility",
    "endpoint_measurement",
    "calendar_time",
    "treatment_decision_time",
)

_NON_CONTEMPORANEOUS_CAVEAT = (
    "non-contemporaneous controls: secular trends in care may confound the "
    "comparison (historical cohorts can predate the trial by many years)"
)

_IMMORTAL_TIME_CAVEAT = (
    "misaligned treatment-decision timepoints risk immortal-time / time-lag bias"
)


def weighted_mean_var(x: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    """Weighted mean and frequency-weight (biased) variance."""
    total = float(np.sum(w))
    if total <= 0:
        raise AllWeightsZero("group total weight is zero")
    m = float(np.sum(w * x) / total)
    v = float(np.sum(w * (x - m) ** 2) / total)
    return m, v


def smd(
    x: np.ndarray, trial_mask: np.ndarray, weights: Optional[np.ndarray] = None
) -> Optional[float]:
    """Standardized mean difference (trial minus external).

    Returns None when the pooled variance is zero (SMD undefined).
    """
    if weights is None:
        weights = np.ones_like(x, dtype=float)
    m1, v1 = weighted_mean_var(x[trial_mask], weights[trial_mask])
    m0, v0 = weighted_mean_var(x[~trial_mask], weights[~trial_mask])
    pooled = (v1 + v0) / 2.0
    if pooled <= 0:
        return None
    return (m1 - m0) / np.sqrt(pooled)


@dataclass(frozen=True)
class BalanceRow:
    covariate: str
    unweighted_smd: Optional[float]
    weighted_smd: Optional[float]


@dataclass(frozen=True)
class BalanceTable:
    rows: tuple[BalanceRow, ...]
    ess_trial: float
    ess_external: float
    threshold: float
    max_abs_weighted_smd: Optional[float]
    imbalance: bool
    undefined_covariates: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "covariate": r.covariate,
                    "unweighted_smd": r.unweighted_smd,
                    "weighted_smd": r.weighted_smd,
                }
                for r in self.rows
            ],
            "ess_trial": self.ess_trial,
            "ess_external": self.ess_external,
            "threshold": self.threshold,
            "max_abs_weighted_smd": self.max_abs_weighted_smd,
            "imbalance": self.imbalance,
            "undefined_covariates": list(self.undefined_covariates),
        }


def balance_table(
    data: Dataset,
    weights: WeightSet,
    threshold: float = DEFAULT_SMD_THRESHOLD,
) -> BalanceTable:
    """Per-covariate SMD before and after weighting, with an imbalance flag."""
    trial = data.group_mask
    w = weights.weights
    X = data.covariate_matrix()
    rows = []
    undefined = []
    weighted_vals = []
    for j, name in enumerate(data.covariate_names):
        raw = smd(X[:, j], trial)
        adj = smd(X[:, j], trial, w)
        if adj is None:
            undefined.append(name)
        else:
            weighted_vals.append(abs(adj))
        rows.append(BalanceRow(covariate=name, unweighted_smd=raw, weighted_smd=adj))
    max_abs = max(weighted_vals) if weighted_vals else None
    return BalanceTable(
        rows=tuple(rows),
        ess_trial=effective_sample_size(w[trial]),
        ess_external=effective_sample_size(w[~trial]),
        threshold=threshold,
        max_abs_weighted_smd=max_abs,
        imbalance=max_abs is not None and max_abs > threshold,
        undefined_covariates=tuple(undefined),
    )


@dataclass(frozen=True)
class ChecklistReport:
    status: str  # PASS | WARN | INCOMPLETE
    items: dict = field(default_factory=dict)
    caveats: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "items": dict(self.items),
            "caveats": list(self.caveats),
        }


def comparability_checklist(meta: dict) -> ChecklistReport:
    """Analyst-completed comparability checklist, echoed into reports.

    Each field takes ``aligned`` or a free-text deviation note; the field
    ``calendar_time`` additionally recognizes ``non-contemporaneous``.
    Purely declarative: nothing here is computed from data.
    """
    items = {k: meta.get(k) for k in CHECKLIST_FIELDS}
    if all(v is None for v in items.values()):
        return ChecklistReport(status="INCOMPLETE", items=items)
    if any(v is None for v in items.values()):
        return ChecklistReport(status="INCOMPLETE", items=items)
    caveats = []
    if str(items["calendar_time"]).lower() != "aligned":
        caveats.append(_NON_CONTEMPORANEOUS_CAVEAT)
    if str(items["treatment_decision_time"]).lower() != "aligned":
        caveats.append(_IMMORTAL_TIME_CAVEAT)
    for key in ("eligibility", "endpoint_measurement"):
        if str(items[key]).lower() != "aligned":
            caveats.append(f"{key} differs between trial and external cohorts")
    status = "PASS" if not caveats else "WARN"
    return ChecklistReport(status=status, items=items, caveats=tuple(caveats))
