"""Simulated Treatment Comparison.

An outcome model is fitted on trial subjects, its linear predictor is
evaluated at the external population's published covariate means, and the
inverse-linked prediction is contrasted against the observed aggregate
outcome. For the logit link this plug-in at the mean is not the same as the
population-average prediction (non-collapsibility); every report carries
that warning.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dataset import AggregateSummary, Dataset, Group, OutcomeKind
from .errors import ScaleIncompatibleWithOutcome
from .estimators import EffectReport, Scale, check_scale, contrast_on_scale
from .glm import GlmFit, add_intercept, fit_linear, fit_logistic

TARGET_POPULATION = "external control population"

NONCOLLAPSIBILITY_WARNING = (
    "logit-link prediction is a plug-in at the aggregate covariate means, "
    "not a population-average prediction; these differ under a nonlinear link"
)

CONSTANCY_CAVEAT = (
    "unanchored comparison: validity rests on conditional constancy of the "
    "absolute effect and on all effect modifiers and prognostic variables "
    "being observed and modeled"
)


class Link(enum.Enum):
    IDENTITY = "identity"
    LOGIT = "logit"


@dataclass(frozen=True)
class StcResult:
    outcome_model: GlmFit
    predicted_external_outcome: float
    observed_external_outcome: float
    scale: Scale
    effect: float
    link: Link
    report: EffectReport


def stc_estimate(
    trial: Dataset,
    target: AggregateSummary,
    covariates: Optional[Sequence[str]] = None,
    link: Link = Link.IDENTITY,
    scale: Scale = Scale.MEAN_DIFFERENCE,
) -> StcResult:
    """Fit the trial outcome model and predict into the external population.

    The covariate list is the analyst's explicit designation of effect
    modifiers and prognostic variables; nothing is selected automatically.
    """
    trial = trial.restrict(Group.TRIAL)
    if covariates is None:
        covariates = [c for c in trial.covariate_names if c in target.covariate_names]
    names = tuple(covariates)

    if link is Link.LOGIT and trial.outcome_kind is not OutcomeKind.BINARY:
        raise ScaleIncompatibleWithOutcome("logit link requires a binary outcome")
    if link is Link.IDENTITY and trial.outcome_kind is OutcomeKind.BINARY:
        raise ScaleIncompatibleWithOutcome("use the logit link for binary outcomes")
    check_scale(target.outcome_kind, scale)

    X = add_intercept(trial.covariate_matrix(names))
    y = trial.outcomes()
    if link is Link.LOGIT:
        fit = fit_logistic(X, y)
    else:
        fit = fit_linear(X, y)

    x_target = np.concatenate([[1.0], [target.mean_of(c) for c in names]])
    eta = float(fit.coefficients @ x_target)
    if link is Link.LOGIT:
        predicted = 1.0 / (1.0 + math.exp(-eta))
    else:
        predicted = eta

    if target.outcome_kind is OutcomeKind.BINARY:
        observed = target.outcome_summary["responders"] / target.n
    elif target.outcome_kind is OutcomeKind.CONTINUOUS:
        observed = float(target.outcome_summary["mean"])
    else:
        raise ScaleIncompatibleWithOutcome("survival aggregates not supported by STC")

    effect, infinite = contrast_on_scale(predicted, observed, scale)
    warnings = [CONSTANCY_CAVEAT]
    if link is Link.LOGIT:
        warnings.append(NONCOLLAPSIBILITY_WARNING)
    report = EffectReport(
        estimand_label="stc",
        target_population=TARGET_POPULATION,
        scale=scale,
        point=effect,
        group_summary={
            "predicted_trial_outcome_in_external_population": predicted,
            "observed_external_outcome": observed,
        },
        warnings=warnings,
        infinite=infinite,
        provenance={"covariates": list(names), "link": link.value},
    )
    return StcResult(
        outcome_model=fit,
        predicted_external_outcome=predicted,
        observed_external_outcome=observed,
        scale=scale,
        effect=effect,
        link=link,
        report=report,
    )
