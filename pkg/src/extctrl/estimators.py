"""Weighted effect estimation for binary, continuous, and time-to-event outcomes.

All estimators are Hajek (ratio) forms, so weights need not be normalized.
Survival uses a weighted product-limit estimator; contrasts are survival
probability differences at a horizon, plus median read-off. Hazard ratios
are deliberately not offered.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .balancing import WeightSet
from .dataset import Dataset, OutcomeKind
from .errors import (
    AllWeightsZero,
    ScaleIncompatibleWithOutcome,
    ZeroDenominator,
)


class Scale(enum.Enum):
    RISK_DIFFERENCE = "rd"
    RISK_RATIO = "rr"
    ODDS_RATIO = "or"
    MEAN_DIFFERENCE = "md"


_BINARY_SCALES = {Scale.RISK_DIFFERENCE, Scale.RISK_RATIO, Scale.ODDS_RATIO}


@dataclass
class EffectReport:
    """Point estimate with provenance; CI attached by the inference module."""

    estimand_label: str
    target_population: str
    scale: Scale
    point: float
    ci: Optional[tuple[float, float]] = None
    group_summary: dict = field(default_factory=dict)
    ess: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    infinite: bool = False

    def to_dict(self) -> dict:
        return {
            "estimand": self.estimand_label,
            "target_population": self.target_population,
            "scale": self.scale.value,
            "point": self.point,
            "ci": None if self.ci is None else list(self.ci),
            "group_summary": self.group_summary,
            "ess": self.ess,
            "diagnostics": self.diagnostics,
            "provenance": self.provenance,
            "warnings": self.warnings,
            "infinite": self.infinite,
        }


@dataclass(frozen=True)
class SurvivalCurve:
    """Right-continuous step function starting at S(0) = 1."""

    times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray

    def evaluate(self, t: float) -> float:
        """S(t), right-continuous."""
        idx = np.searchsorted(self.times, t, side="right") - 1
        return 1.0 if idx < 0 else float(self.survival[idx])

    @property
    def last_time(self) -> float:
        return float(self.times[-1]) if len(self.times) else 0.0

    def median(self) -> Optional[float]:
        """First time with S(t) <= 0.5, or None if never reached."""
        below = np.nonzero(self.survival <= 0.5)[0]
        return float(self.times[below[0]]) if len(below) else None


def contrast_on_scale(m1: float, m0: float, scale: Scale) -> tuple[float, bool]:
    """Contrast two group summaries; returns (value, is_infinite)."""
    if scale in (Scale.RISK_DIFFERENCE, Scale.MEAN_DIFFERENCE):
        return m1 - m0, False
    if scale is Scale.RISK_RATIO:
        if m0 == 0.0:
            raise ZeroDenominator("risk ratio undefined: external rate is 0")
        return m1 / m0, False
    if scale is Scale.ODDS_RATIO:
        if m0 in (0.0, 1.0) or m1 in (0.0, 1.0):
            sign = 1.0 if (m0 == 0.0 or m1 == 1.0) else 0.0
            return (math.inf if sign else 0.0), True
        return (m1 / (1.0 - m1)) / (m0 / (1.0 - m0)), False
    raise ValueError(scale)  # pragma: no cover


def check_scale(outcome_kind: OutcomeKind, scale: Scale) -> None:
    if outcome_kind is OutcomeKind.BINARY and scale not in _BINARY_SCALES:
        raise ScaleIncompatibleWithOutcome(
            f"scale {scale.value} not valid for binary outcomes"
        )
    if outcome_kind is OutcomeKind.CONTINUOUS and scale is not Scale.MEAN_DIFFERENCE:
        raise ScaleIncompatibleWithOutcome(
            f"scale {scale.value} not valid for continuous outcomes"
        )
    if outcome_kind is OutcomeKind.TIME_TO_EVENT:
        raise ScaleIncompatibleWithOutcome(
            "use weighted_km / survival_contrast for time-to-event outcomes"
        )


def hajek_mean(y: np.ndarray, w: np.ndarray) -> float:
    total = float(np.sum(w))
    if total <= 0:
        raise AllWeightsZero("group total weight is zero")
    return float(np.sum(w * y) / total)


def weighted_mean_contrast(
    data: Dataset, weights: WeightSet, scale: Scale
) -> EffectReport:
    """Contrast Hajek-weighted group means on the requested scale."""
    if data.outcome_kind is None:
        raise ScaleIncompatibleWithOutcome("dataset has no outcomes")
    check_scale(data.outcome_kind, scale)
    y = data.outcomes()
    trial = data.group_mask
    w = weights.weights
    m1 = hajek_mean(y[trial], w[trial])
    m0 = hajek_mean(y[~trial], w[~trial])
    point, infinite = contrast_on_scale(m1, m0, scale)
    return EffectReport(
        estimand_label=weights.estimand.label,
        target_population=weights.estimand.target_population_label,
        scale=scale,
        point=point,
        group_summary={"trial": m1, "external": m0},
        ess={"trial": weights.ess_treated, "external": weights.ess_control},
        infinite=infinite,
    )


def weighted_km(
    times: np.ndarray, events: np.ndarray, weights: np.ndarray
) -> SurvivalCurve:
    """Weighted Kaplan-Meier product-limit curve for one group.

    The risk set at time t holds every subject with observed time >= t, so
    subjects censored exactly at an event time still count as at risk there
    (events before censorings at ties).
    """
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=int)
    weights = np.asarray(weights, dtype=float)
    if np.any(times < 0):
        raise ValueError("negative follow-up time")
    if np.any(weights < 0):
        raise ValueError("negative weight")
    if float(np.sum(weights)) <= 0:
        raise AllWeightsZero("all survival weights are zero")

    order = np.argsort(times, kind="stable")
    t_sorted = times[order]
    e_sorted = events[order]
    w_sorted = weights[order]

    uniq = np.unique(t_sorted[e_sorted == 1])
    surv, n_risk = [], []
    s = 1.0
    for t in uniq:
        at_risk = float(np.sum(w_sorted[t_sorted >= t]))
        d = float(np.sum(w_sorted[(t_sorted == t) & (e_sorted == 1)]))
        s *= 1.0 - d / at_risk
        surv.append(s)
        n_risk.append(at_risk)
    return SurvivalCurve(
        times=np.array(uniq), survival=np.array(surv), at_risk=np.array(n_risk)
    )


def weighted_km_by_group(data: Dataset, weights: WeightSet) -> dict[str, SurvivalCurve]:
    t, d = data.times_events()
    trial = data.group_mask
    w = weights.weights
    return {
        "trial": weighted_km(t[trial], d[trial], w[trial]),
        "external": weighted_km(t[~trial], d[~trial], w[~trial]),
    }


def survival_contrast(
    curve_trial: SurvivalCurve,
    curve_external: SurvivalCurve,
    horizon: float,
    estimand_label: str = "",
    target_population: str = "",
) -> EffectReport:
    """S_trial(t*) - S_external(t*), evaluated right-continuously.

    A horizon beyond either group's follow-up is evaluated at the last
    observed time and flagged, not rejected.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    warnings = []
    if horizon > curve_trial.last_time or horizon > curve_external.last_time:
        warnings.append(
            "horizon beyond observed follow-up; evaluated at last observed time"
        )
    s1 = curve_trial.evaluate(horizon)
    s0 = curve_external.evaluate(horizon)
    report = EffectReport(
        estimand_label=estimand_label,
        target_population=target_population,
        scale=Scale.RISK_DIFFERENCE,
        point=s1 - s0,
        group_summary={
            "trial_survival": s1,
            "external_survival": s0,
            "trial_median": curve_trial.median(),
            "external_median": curve_external.median(),
            "horizon": horizon,
        },
        warnings=warnings,
    )
    return report
