"""Batch command-line front end.

Subcommands: ps-fit, weight, balance, compare, maic, stc, borrow, simulate,
run. Exit codes: 0 success, 2 plan/usage error, 3 data error, 4 solver
error, 5 positivity hard-fail. The EXTCTRL_THREADS environment variable
caps bootstrap parallelism (0 or unset = auto/serial).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import plan as planmod
from .balancing import Estimand, balancing_weights
from .borrow import a0_sensitivity, power_prior_posterior
from .dataset import Group, OutcomeKind, load_aggregate, load_dataset, save_dataset
from .diagnostics import balance_table
from .errors import DataError, ExtCtrlError, PlanInvalid, SolverError
from .estimators import (
    Scale,
    survival_contrast,
    weighted_km_by_group,
    weighted_mean_contrast,
)
from .inference import BootstrapConfig, Resampling, bootstrap_ci
from .maic import maic_compare, maic_weights
from .propensity import estimate_propensity, positivity_report
from .simulate import ScenarioConfig, generate
from .stc import Link, stc_estimate

EXIT_OK = 0
EXIT_PLAN = 2
EXIT_DATA = 3
EXIT_SOLVER = 4
EXIT_POSITIVITY = 5


def _emit(payload: dict, out_path=None) -> None:
    text = planmod.canonical_json(payload) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_weight_csv(path, rows) -> None:
    lines = ["id,group,score,weight"]
    for rid, grp, score, weight in rows:
        lines.append(
            f"{rid},{grp},{format(score, '.17g')},{format(weight, '.17g')}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _add_bootstrap_flags(parser) -> None:
    parser.add_argument("--bootstrap", type=int, default=0, metavar="B",
                        help="bootstrap replicates (0 = no CI)")
    parser.add_argument("--level", type=float, default=0.95)
    parser.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extctrl",
        description="Indirect comparison of a single-arm trial against external controls",
    )
    parser.add_argument("--out-dir", default=None, help="directory for output artifacts")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ps-fit", help="fit the propensity model and audit overlap")
    p.add_argument("data")
    p.add_argument("--covariates", default=None, help="comma-separated subset")
    p.add_argument("--band", type=float, default=0.1, help="positivity band parameter a")

    p = sub.add_parser("weight", help="estimand-specific balancing weights")
    p.add_argument("data")
    p.add_argument("--estimand", required=True,
                   help="ate|att|atc|ato|matching|trim:<a>")
    p.add_argument("--covariates", default=None)

    p = sub.add_parser("balance", help="covariate balance table for an estimand")
    p.add_argument("data")
    p.add_argument("--estimand", required=True)
    p.add_argument("--covariates", default=None)
    p.add_argument("--threshold", type=float, default=0.1)

    p = sub.add_parser("compare", help="weighted effect estimate")
    p.add_argument("data")
    p.add_argument("--estimand", required=True)
    p.add_argument("--covariates", default=None)
    p.add_argument("--scale", default="rd", choices=[s.value for s in Scale])
    p.add_argument("--horizon", type=float, default=None,
                   help="survival horizon for time-to-event outcomes")
    _add_bootstrap_flags(p)

    p = sub.add_parser("maic", help="matching-adjusted indirect comparison")
    p.add_argument("data")
    p.add_argument("--target", required=True, help="aggregate JSON file")
    p.add_argument("--covariates", default=None)
    p.add_argument("--scale", default="rd", choices=[s.value for s in Scale])
    _add_bootstrap_flags(p)

    p = sub.add_parser("stc", help="simulated treatment comparison")
    p.add_argument("data")
    p.add_argument("--target", required=True)
    p.add_argument("--covariates", default=None)
    p.add_argument("--link", default="identity", choices=[l.value for l in Link])
    p.add_argument("--scale", default="md", choices=[s.value for s in Scale])
    _add_bootstrap_flags(p)

    p = sub.add_parser("borrow", help="fixed power-prior borrowing (binary outcome)")
    p.add_argument("--x", type=int, required=True, help="trial responders")
    p.add_argument("--n", type=int, required=True, help="trial size")
    p.add_argument("--x0", type=int, required=True, help="external responders")
    p.add_argument("--n0", type=int, required=True, help="external size")
    p.add_argument("--a0", type=float, required=True)
    p.add_argument("--prior", default="1,1", help="Beta prior a,b")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--sweep", default=None,
                   help="comma-separated a0 grid for sensitivity output")
    p.add_argument("--assume-comparable", action="store_true",
                   help="required assertion that populations are comparable")

    p = sub.add_parser("simulate", help="generate a synthetic scenario dataset")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--seed", type=int, default=None, help="override scenario seed")
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("run", help="execute a frozen analysis plan")
    p.add_argument("plan")

    return parser


def _split(names):
    return [s.strip() for s in names.split(",")] if names else None


def _load(args):
    return load_dataset(args.data)


def _cmd_ps_fit(args) -> int:
    data = _load(args)
    model = estimate_propensity(data, _split(args.covariates))
    report = positivity_report(model, data, args.band)
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        lines = ["id,score"]
        for r, s in zip(data.records, model.scores):
            lines.append(f"{r.id},{format(float(s), '.17g')}")
        (out_dir / "scores.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _emit(
        {"positivity": report.to_dict(),
         "coefficients": [float(c) for c in model.glm.coefficients]},
        out_dir / "positivity.json" if out_dir else None,
    )
    return EXIT_OK


def _weights_for(args, data):
    model = estimate_propensity(data, _split(args.covariates))
    estimand = Estimand.parse(args.estimand)
    return model, balancing_weights(model, data, estimand)


def _cmd_weight(args) -> int:
    data = _load(args)
    model, wset = _weights_for(args, data)
    rows = [
        (r.id, "trial" if r.group is Group.TRIAL else "external",
         float(model.scores[i]), float(wset.weights[i]))
        for i, r in enumerate(data.records)
    ]
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_weight_csv(out_dir / "weights.csv", rows)
    else:
        sys.stdout.write("id,group,score,weight\n")
        for rid, grp, score, weight in rows:
            sys.stdout.write(
                f"{rid},{grp},{format(score, '.17g')},{format(weight, '.17g')}\n"
            )
    _emit(
        {"estimand": wset.estimand.label,
         "ess_trial": wset.ess_treated,
         "ess_external": wset.ess_control,
         "n_zero_weight": wset.n_zero_weight},
        out_dir / "ess.json" if out_dir else None,
    )
    return EXIT_OK


def _cmd_balance(args) -> int:
    data = _load(args)
    _, wset = _weights_for(args, data)
    table = balance_table(data, wset, args.threshold)
    _emit({"balance": table.to_dict()},
          Path(args.out_dir) / "balance.json" if args.out_dir else None)
    return EXIT_OK


def _maybe_bootstrap(args, data, pipeline, payload, trial_only=False):
    if args.bootstrap <= 0:
        return
    config = BootstrapConfig(
        replicates=args.bootstrap,
        level=args.level,
        seed=args.seed,
        resampling=Resampling.TRIAL_ONLY if trial_only
        else Resampling.STRATIFIED_BY_GROUP,
    )
    result = bootstrap_ci(pipeline, data, config)
    payload["effect"]["ci"] = [result.lower, result.upper]
    payload["effect"]["ci_level"] = args.level
    payload["bootstrap"] = {
        "replicates": args.bootstrap,
        "failures": result.n_failures,
        "refits": result.n_refits,
        "seed": args.seed,
    }


def _cmd_compare(args) -> int:
    data = _load(args)
    estimand = Estimand.parse(args.estimand)
    covs = _split(args.covariates)
    scale = Scale(args.scale)

    def pipeline(d):
        model = estimate_propensity(d, covs)
        wset = balancing_weights(model, d, estimand)
        if d.outcome_kind is OutcomeKind.TIME_TO_EVENT:
            curves = weighted_km_by_group(d, wset)
            return survival_contrast(
                curves["trial"], curves["external"], args.horizon or 0.0
            ).point
        return weighted_mean_contrast(d, wset, scale).point

    model = estimate_propensity(data, covs)
    wset = balancing_weights(model, data, estimand)
    if data.outcome_kind is OutcomeKind.TIME_TO_EVENT:
        curves = weighted_km_by_group(data, wset)
        effect = survival_contrast(
            curves["trial"], curves["external"], args.horizon or 0.0,
            estimand_label=estimand.label,
            target_population=estimand.target_population_label,
        )
        if args.out_dir:
            out_dir = Path(args.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            for name, curve in curves.items():
                lines = ["time,survival,at_risk"]
                for t, s, n in zip(curve.times, curve.survival, curve.at_risk):
                    lines.append(
                        f"{format(float(t), '.17g')},"
                        f"{format(float(s), '.17g')},"
                        f"{format(float(n), '.17g')}"
                    )
                (out_dir / f"curve_{name}.csv").write_text(
                    "\n".join(lines) + "\n", encoding="utf-8"
                )
    else:
        effect = weighted_mean_contrast(data, wset, scale)
    payload = {"effect": effect.to_dict()}
    _maybe_bootstrap(args, data, pipeline, payload)
    _emit(payload, Path(args.out_dir) / "report.json" if args.out_dir else None)
    return EXIT_OK


def _cmd_maic(args) -> int:
    data = _load(args).restrict(Group.TRIAL)
    target = load_aggregate(args.target)
    covs = _split(args.covariates)
    scale = Scale(args.scale)
    fit = maic_weights(data, target, covs)
    effect = maic_compare(fit, data, target, scale)

    def pipeline(d):
        t = d.restrict(Group.TRIAL)
        f = maic_weights(t, target, covs)
        return maic_compare(f, t, target, scale).point

    payload = {
        "effect": effect.to_dict(),
        "maic": {"ess": fit.ess,
                 "achieved_means": [float(v) for v in fit.achieved_means],
                 "target_means": [float(v) for v in fit.target_means]},
    }
    _maybe_bootstrap(args, data, pipeline, payload, trial_only=True)
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_weight_csv(
            out_dir / "weights.csv",
            [(r.id, "trial", 0.0, float(fit.weights[i]))
             for i, r in enumerate(data.records)],
        )
        _emit(payload, out_dir / "report.json")
    else:
        _emit(payload)
    return EXIT_OK


def _cmd_stc(args) -> int:
    data = _load(args).restrict(Group.TRIAL)
    target = load_aggregate(args.target)
    covs = _split(args.covariates)
    link = Link(args.link)
    scale = Scale(args.scale)
    result = stc_estimate(data, target, covs, link, scale)

    def pipeline(d):
        t = d.restrict(Group.TRIAL)
        return stc_estimate(t, target, covs, link, scale).effect

    payload = {"effect": result.report.to_dict()}
    _maybe_bootstrap(args, data, pipeline, payload, trial_only=True)
    _emit(payload, Path(args.out_dir) / "report.json" if args.out_dir else None)
    return EXIT_OK


def _cmd_borrow(args) -> int:
    if not args.assume_comparable:
        raise PlanInvalid(
            "power-prior borrowing assumes comparable populations; "
            "pass --assume-comparable to assert this"
        )
    a, b = (float(v) for v in args.prior.split(","))
    post = power_prior_posterior(args.x, args.n, args.x0, args.n0, args.a0, a, b)
    payload = {"posterior": post.to_dict(args.level)}
    if args.sweep:
        grid = [float(v) for v in args.sweep.split(",")]
        payload["sensitivity"] = a0_sensitivity(
            args.x, args.n, args.x0, args.n0, grid, a, b, args.level
        )
    _emit(payload, Path(args.out_dir) / "posterior.json" if args.out_dir else None)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    payload = json.loads(Path(args.scenario).read_text(encoding="utf-8"))
    if args.seed is not None:
        payload["seed"] = args.seed
    config = ScenarioConfig.from_dict(payload)
    data, truth = generate(config)
    save_dataset(data, args.out)
    _emit({"truth": truth.to_dict()},
          Path(args.out).with_suffix(".truth.json"))
    return EXIT_OK


def _cmd_run(args) -> int:
    plan = planmod.load_plan(args.plan)
    artifacts = planmod.run_plan(plan)
    out_dir = args.out_dir or "."
    artifacts.write(out_dir)
    return EXIT_OK


_COMMANDS = {
    "ps-fit": _cmd_ps_fit,
    "weight": _cmd_weight,
    "balance": _cmd_balance,
    "compare": _cmd_compare,
    "maic": _cmd_maic,
    "stc": _cmd_stc,
    "borrow": _cmd_borrow,
    "simulate": _cmd_simulate,
    "run": _cmd_run,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except planmod.PositivityHardFail as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_POSITIVITY
    except PlanInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PLAN
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ExtCtrlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
