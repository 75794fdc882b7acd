"""Declarative analysis plans: validation, canonical hashing, execution.

A plan is a frozen JSON document naming the data, estimand, method, and
inference settings. Its canonical content digest is embedded in every
output so results can be tied back to the pre-specified plan. Execution
follows the fixed order estimand declaration, selection diagnostics,
comparison.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .balancing import Estimand, balancing_weights, weighted_prevalence
from .borrow import power_prior_posterior
from .dataset import (
    Dataset,
    Group,
    OutcomeKind,
    load_aggregate,
    load_dataset,
)
from .diagnostics import balance_table, comparability_checklist
from .errors import PlanInvalid
from .estimators import (
    Scale,
    survival_contrast,
    weighted_km_by_group,
    weighted_mean_contrast,
)
from .inference import BootstrapConfig, Resampling, bootstrap_ci
from .maic import maic_compare, maic_weights
from .propensity import estimate_propensity, positivity_report
from .stc import Link, stc_estimate

SCHEMA_VERSION = 1


class Method(enum.Enum):
    WEIGHTING = "weighting"
    MAIC = "maic"
    STC = "stc"
    POWER_PRIOR = "power_prior"


def canonical_json(payload) -> str:
    """Deterministic JSON used for hashing and report emission.

    Floats are rendered with 17 significant digits so equal values hash and
    serialize identically across runs.
    """
    def normalize(obj):
        if isinstance(obj, dict):
            return {k: normalize(obj[k]) for k in sorted(obj)}
        if isinstance(obj, (list, tuple)):
            return [normalize(v) for v in obj]
        if isinstance(obj, (bool, np.bool_)):
            return bool(obj)
        if isinstance(obj, (float, np.floating)):
            return float(format(float(obj), ".17g"))
        if isinstance(obj, (int, np.integer)):
            return int(obj)
        if isinstance(obj, np.ndarray):
            return [normalize(v) for v in obj.tolist()]
        if isinstance(obj, enum.Enum):
            return obj.value
        return obj

    return json.dumps(normalize(payload), sort_keys=True, separators=(",", ":"),
                      allow_nan=True)


def plan_hash(payload: dict) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


@dataclass
class AnalysisPlan:
    raw: dict
    method: Method
    dataset_path: Optional[str]
    aggregate_path: Optional[str]
    estimand: Optional[Estimand]
    covariates: Optional[list]
    scale: Scale
    link: Link
    bootstrap: Optional[BootstrapConfig]
    checklist: dict
    fail_on_overlap: bool
    positivity_a: float
    horizon: Optional[float]
    power_prior: Optional[dict]
    seed: int
    hash: str = field(default="")

    def __post_init__(self):
        if not self.hash:
            self.hash = plan_hash(self.raw)


def load_plan(path) -> AnalysisPlan:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise PlanInvalid(f"{path}: cannot read plan ({exc})") from None
    return parse_plan(raw)


def parse_plan(raw: dict) -> AnalysisPlan:
    try:
        method = Method(raw["method"])
    except (KeyError, ValueError) as exc:
        raise PlanInvalid(f"missing or unknown method: {exc}") from None

    dataset_path = raw.get("dataset")
    aggregate_path = raw.get("aggregate")
    if method in (Method.WEIGHTING, Method.MAIC, Method.STC) and not dataset_path:
        raise PlanInvalid(f"method {method.value} requires a dataset path")
    if method in (Method.MAIC, Method.STC) and not aggregate_path:
        raise PlanInvalid(f"method {method.value} requires an aggregate file")

    estimand = None
    if method is Method.WEIGHTING:
        try:
            estimand = Estimand.parse(raw.get("estimand", "ate"))
        except ValueError as exc:
            raise PlanInvalid(f"bad estimand: {exc}") from None

    try:
        scale = Scale(raw.get("scale", "rd"))
        link = Link(raw.get("link", "identity"))
    except ValueError as exc:
        raise PlanInvalid(f"bad scale or link: {exc}") from None

    bconf = None
    if "bootstrap" in raw:
        b = raw["bootstrap"]
        try:
            bconf = BootstrapConfig(
                replicates=b.get("replicates", 1000),
                level=b.get("level", 0.95),
                seed=b.get("seed", raw.get("seed", 0)),
                resampling=Resampling.TRIAL_ONLY
                if method in (Method.MAIC, Method.STC)
                else Resampling.STRATIFIED_BY_GROUP,
                threads=b.get("threads", 0),
            )
        except (TypeError, ValueError) as exc:
            raise PlanInvalid(f"bad bootstrap config: {exc}") from None

    pp = raw.get("power_prior")
    if method is Method.POWER_PRIOR:
        if not pp:
            raise PlanInvalid("power_prior method requires a power_prior block")
        if not pp.get("assume_comparable", False):
            raise PlanInvalid(
                "power-prior borrowing requires the explicit assume_comparable flag"
            )
        for key in ("x", "n", "x0", "n0", "a0"):
            if key not in pp:
                raise PlanInvalid(f"power_prior block missing {key!r}")

    return AnalysisPlan(
        raw=raw,
        method=method,
        dataset_path=dataset_path,
        aggregate_path=aggregate_path,
        estimand=estimand,
        covariates=raw.get("covariates"),
        scale=scale,
        link=link,
        bootstrap=bconf,
        checklist=raw.get("checklist", {}),
        fail_on_overlap=raw.get("fail_on_overlap", False),
        positivity_a=raw.get("positivity_a", 0.1),
        horizon=raw.get("horizon"),
        power_prior=pp,
        seed=raw.get("seed", 0),
    )


@dataclass
class RunArtifacts:
    report: dict
    weights_rows: Optional[list] = None  # (id, group, score, weight)
    balance: Optional[dict] = None

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(canonical_json(self.report) + "\n",
                                         encoding="utf-8")
        if self.weights_rows is not None:
            lines = ["id,group,score,weight"]
            for rid, grp, score, weight in self.weights_rows:
                score_txt = "" if score is None else format(score, ".17g")
                lines.append(f"{rid},{grp},{score_txt},{format(weight, '.17g')}")
            (out / "weights.csv").write_text("\n".join(lines) + "\n",
                                             encoding="utf-8")
        if self.balance is not None:
            lines = ["covariate,unweighted_smd,weighted_smd"]
            for row in self.balance["rows"]:
                u = row["unweighted_smd"]
                w = row["weighted_smd"]
                lines.append(
                    f"{row['covariate']},"
                    f"{'' if u is None else format(u, '.17g')},"
                    f"{'' if w is None else format(w, '.17g')}"
                )
            (out / "balance.csv").write_text("\n".join(lines) + "\n",
                                             encoding="utf-8")


class PositivityHardFail(Exception):
    """Raised when the plan demands failure on insufficient overlap."""


def run_plan(plan: AnalysisPlan) -> RunArtifacts:
    """Execute a validated plan and assemble its artifacts."""
    checklist = comparability_checklist(plan.checklist)
    provenance = {
        "schema": SCHEMA_VERSION,
        "plan_hash": plan.hash,
        "method": plan.method.value,
        "steps": ["estimand", "selection-diagnostics", "comparison"],
        "seed": plan.seed,
        "covariates": plan.covariates,
        "scale": plan.scale.value,
    }

    if plan.method is Method.POWER_PRIOR:
        pp = plan.power_prior
        prior = pp.get("prior", [1.0, 1.0])
        post = power_prior_posterior(
            pp["x"], pp["n"], pp["x0"], pp["n0"], pp["a0"], prior[0], prior[1]
        )
        report = {
            "provenance": provenance,
            "checklist": checklist.to_dict(),
            "posterior": post.to_dict(pp.get("level", 0.95)),
        }
        return RunArtifacts(report=report)

    data = load_dataset(plan.dataset_path)
    target = load_aggregate(plan.aggregate_path) if plan.aggregate_path else None

    if plan.method is Method.WEIGHTING:
        return _run_weighting(plan, data, checklist, provenance)
    if plan.method is Method.MAIC:
        return _run_maic(plan, data, target, checklist, provenance)
    return _run_stc(plan, data, target, checklist, provenance)


def _attach_bootstrap(plan, data, pipeline, report_dict):
    result = bootstrap_ci(pipeline, data, plan.bootstrap)
    report_dict["effect"]["ci"] = [result.lower, result.upper]
    report_dict["effect"]["ci_level"] = plan.bootstrap.level
    report_dict["bootstrap"] = {
        "replicates": plan.bootstrap.replicates,
        "failures": result.n_failures,
        "refits": result.n_refits,
        "seed": plan.bootstrap.seed,
    }


def _run_weighting(plan, data: Dataset, checklist, provenance) -> RunArtifacts:
    provenance["estimand"] = plan.estimand.label
    model = estimate_propensity(data, plan.covariates)
    positivity = positivity_report(model, data, plan.positivity_a)
    if plan.fail_on_overlap and positivity.insufficient_overlap:
        raise PositivityHardFail("insufficient propensity-score overlap")
    wset = balancing_weights(model, data, plan.estimand)
    table = balance_table(data, wset)

    def pipeline(d: Dataset) -> float:
        m = estimate_propensity(d, plan.covariates)
        w = balancing_weights(m, d, plan.estimand)
        if d.outcome_kind is OutcomeKind.TIME_TO_EVENT:
            curves = weighted_km_by_group(d, w)
            return survival_contrast(
                curves["trial"], curves["external"], plan.horizon or 0.0
            ).point
        return weighted_mean_contrast(d, w, plan.scale).point

    if data.outcome_kind is OutcomeKind.TIME_TO_EVENT:
        curves = weighted_km_by_group(data, wset)
        effect = survival_contrast(
            curves["trial"], curves["external"], plan.horizon or 0.0,
            estimand_label=plan.estimand.label,
            target_population=plan.estimand.target_population_label,
        )
    else:
        effect = weighted_mean_contrast(data, wset, plan.scale)

    prevalences = {
        name: weighted_prevalence(wset, data, name) for name in data.covariate_names
    }
    effect.diagnostics = {
        "positivity": positivity.to_dict(),
        "balance": table.to_dict(),
        "weighted_prevalence": {k: list(v) for k, v in prevalences.items()},
    }
    effect.provenance = provenance
    report = {
        "provenance": provenance,
        "checklist": checklist.to_dict(),
        "effect": effect.to_dict(),
    }
    if plan.bootstrap:
        _attach_bootstrap(plan, data, pipeline, report)

    rows = [
        (r.id, "trial" if r.group is Group.TRIAL else "external",
         float(model.scores[i]), float(wset.weights[i]))
        for i, r in enumerate(data.records)
    ]
    return RunArtifacts(report=report, weights_rows=rows, balance=table.to_dict())


def _run_maic(plan, data, target, checklist, provenance) -> RunArtifacts:
    trial = data.restrict(Group.TRIAL)
    fit = maic_weights(trial, target, plan.covariates)
    effect = maic_compare(fit, trial, target, plan.scale)
    effect.provenance = provenance

    def pipeline(d: Dataset) -> float:
        t = d.restrict(Group.TRIAL)
        f = maic_weights(t, target, plan.covariates)
        return maic_compare(f, t, target, plan.scale).point

    report = {
        "provenance": provenance,
        "checklist": checklist.to_dict(),
        "effect": effect.to_dict(),
        "maic": {
            "ess": fit.ess,
            "achieved_means": [float(v) for v in fit.achieved_means],
            "target_means": [float(v) for v in fit.target_means],
        },
    }
    if plan.bootstrap:
        _attach_bootstrap(plan, trial, pipeline, report)
    rows = [
        (r.id, "trial", None, float(fit.weights[i]))
        for i, r in enumerate(trial.records)
    ]
    return RunArtifacts(report=report, weights_rows=rows)


def _run_stc(plan, data, target, checklist, provenance) -> RunArtifacts:
    trial = data.restrict(Group.TRIAL)
    result = stc_estimate(trial, target, plan.covariates, plan.link, plan.scale)
    result.report.provenance = provenance

    def pipeline(d: Dataset) -> float:
        t = d.restrict(Group.TRIAL)
        return stc_estimate(t, target, plan.covariates, plan.link, plan.scale).effect

    report = {
        "provenance": provenance,
        "checklist": checklist.to_dict(),
        "effect": result.report.to_dict(),
    }
    if plan.bootstrap:
        _attach_bootstrap(plan, trial, pipeline, report)
    return RunArtifacts(report=report)
