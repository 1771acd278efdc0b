"""Command-line front end.

Subcommands: ``fit`` (conditional effect curves), ``vcide`` (heterogeneity
variance and test), ``simulate`` (Monte-Carlo experiments), ``oracle-check``
(estimator formulas against independent enumeration), and ``diagnose``
(propensity-distribution diagnostic).

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np
import pandas as pd

from .crossfit import crossfit_nuisances, make_folds
from .data import Dataset, NuisanceValues
from .effects import EffectKind, plugin_value, pseudo_outcome_table
from .exceptions import ConfigError, DataError, NumericalError
from .heterogeneity import estimate_vcide_full, estimate_vcide_subset
from .idr import SmootherSpec, fit_idr
from .io import ColumnRoles, ResultDocument, diagnose_positivity, ingest_csv, write_document
from .nuisance import NuisanceSpecs, RegressorSpec
from .projection import Basis, fit_projection
from .simulation import DiscreteDgp, enumeration_oracle, replicate_seed
from .simulation.experiments import ExperimentConfig, run_experiment

logger = logging.getLogger("inceff")

_SPEC_ALIASES = {"glm": "penalized-glm", "nw": "nadaraya-watson"}
_SPEC_KEYS = {"degree", "ridge", "k", "bandwidth"}


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"cannot parse {text!r} as comma-separated numbers") from exc


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in _floats(text))


def _names(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def parse_regressor_spec(text: str, family: str) -> RegressorSpec:
    """Parse compact learner grammar like ``penalized-glm:degree=2,ridge=1e-6``."""
    method, _, params_text = text.partition(":")
    method = _SPEC_ALIASES.get(method.strip(), method.strip())
    params = {}
    for item in params_text.split(","):
        if not item.strip():
            continue
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in _SPEC_KEYS:
            raise ConfigError(f"bad learner parameter {item!r} in {text!r}")
        params[key] = value.strip()
    return RegressorSpec(
        family=family,
        method=method,
        degree=int(params.get("degree", 2)),
        ridge=float(params.get("ridge", 1e-6)),
        k=int(params.get("k", 10)),
        bandwidth=float(params.get("bandwidth", 1.0)),
    )


def _resolve_threads(value) -> int:
    if value is None:
        value = os.environ.get("ICE_THREADS", "1")
    threads = int(value)
    if threads < 1:
        raise ConfigError("--threads must be >= 1")
    return threads


def _bandwidth_arg(text: str):
    if text == "auto":
        return "auto"
    value = float(text)
    if value <= 0:
        raise ConfigError("--bandwidth must be positive or 'auto'")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inceff",
        description="Conditional causal effects under incremental "
        "propensity-score interventions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--level", type=float, default=0.95, help="CI level")
        sp.add_argument("--threads", default=None, help="worker threads (env ICE_THREADS)")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--stamp", action="store_true", help="embed a wall-clock timestamp")

    def add_data(sp):
        sp.add_argument("--data", required=True, help="input CSV path")
        sp.add_argument("--outcome", required=True)
        sp.add_argument("--treatment", required=True)
        sp.add_argument("--covariates", required=True, help="comma-separated columns")
        sp.add_argument("--condition-on", default="", help="comma-separated columns")
        sp.add_argument("--folds", type=int, default=2)
        sp.add_argument("--epsilon", type=float, default=1e-3)
        sp.add_argument("--pi-spec", default="penalized-glm:degree=2,ridge=1e-6")
        sp.add_argument("--mu-spec", default="penalized-glm:degree=2,ridge=1e-6")

    fit = sub.add_parser("fit", help="estimate conditional effect curves")
    add_data(fit)
    fit.add_argument("--effect", required=True, choices=["cie", "cice", "cide"])
    fit.add_argument("--delta", default="", help="comma list (cie/cide)")
    fit.add_argument("--delta-u", default="", help="comma list (cice)")
    fit.add_argument("--delta-l", default="", help="comma list (cice)")
    fit.add_argument("--learner", choices=["projection", "idr"], default="projection")
    fit.add_argument("--basis", default="", help="projection basis formula")
    fit.add_argument("--bandwidth", default="auto", help="idr bandwidth or 'auto'")
    add_common(fit)

    vcide = sub.add_parser("vcide", help="heterogeneity variance and test")
    add_data(vcide)
    vcide.add_argument("--delta", default="1", help="comma list")
    vcide.add_argument("--bandwidth", default="auto", help="subset-curve bandwidth")
    add_common(vcide)

    sim = sub.add_parser("simulate", help="Monte-Carlo experiments")
    sim.add_argument(
        "--experiment", required=True, choices=["coverage", "mse", "type1", "power"]
    )
    sim.add_argument("--n", type=int, default=1000)
    sim.add_argument("--reps", type=int, default=500)
    sim.add_argument("--alpha-pi", default="0.1,0.2,0.3,0.4,0.5")
    sim.add_argument("--alpha-mu", default="0.1,0.2,0.3,0.4,0.5")
    sim.add_argument("--delta", default="1")
    sim.add_argument("--noise-scale", choices=["logit", "probability"], default="logit")
    sim.add_argument("--bandwidth", default="silverman")
    sim.add_argument("--sizes", default="", help="extra n values for power sweeps")
    add_common(sim)

    oracle = sub.add_parser(
        "oracle-check", help="estimator formulas vs independent enumeration"
    )
    oracle.add_argument("--instances", type=int, default=5)
    oracle.add_argument("--support-points", type=int, default=10)
    oracle.add_argument("--seed", type=int, default=0)
    oracle.add_argument("--out", default=None, help="optional output directory")
    oracle.add_argument("--stamp", action="store_true")

    diag = sub.add_parser("diagnose", help="propensity-distribution diagnostic")
    add_data(diag)
    diag.add_argument("--bins", type=int, default=20)
    add_common(diag)

    return parser


def _roles(args) -> ColumnRoles:
    return ColumnRoles(
        outcome=args.outcome,
        treatment=args.treatment,
        covariates=_names(args.covariates),
        condition_on=_names(args.condition_on),
    )


def _specs(args) -> NuisanceSpecs:
    mu = parse_regressor_spec(args.mu_spec, "continuous")
    return NuisanceSpecs(
        pi=parse_regressor_spec(args.pi_spec, "binary"), mu0=mu, mu1=mu
    )


def _crossfit(args, data: Dataset) -> NuisanceValues:
    plan = make_folds(data.n, args.folds, args.seed)
    return crossfit_nuisances(
        data, plan, _specs(args), args.epsilon, threads=_resolve_threads(args.threads)
    )


def _effects_from_args(args) -> list[EffectKind]:
    if args.effect in ("cie", "cide"):
        deltas = _floats(args.delta)
        if not deltas:
            raise ConfigError(f"--delta is required for --effect {args.effect}")
        make = EffectKind.cie if args.effect == "cie" else EffectKind.cide
        return [make(d) for d in deltas]
    upper, lower = _floats(args.delta_u), _floats(args.delta_l)
    if not upper or len(upper) != len(lower):
        raise ConfigError("--delta-u and --delta-l must be equal-length comma lists")
    return [EffectKind.cice(u, l) for u, l in zip(upper, lower)]


def _effect_columns(effect: EffectKind) -> dict:
    return {
        "effect": effect.kind,
        "delta": effect.delta if effect.kind != "cice" else np.nan,
        "delta_u": effect.delta_u if effect.kind == "cice" else np.nan,
        "delta_l": effect.delta_l if effect.kind == "cice" else np.nan,
    }


def _config_echo(args) -> dict:
    config = {k: v for k, v in vars(args).items() if k != "stamp"}
    for key, value in config.items():
        if isinstance(value, tuple):
            config[key] = list(value)
    return config


def cmd_fit(args) -> int:
    roles = _roles(args)
    data = ingest_csv(args.data, roles)
    nuisances = _crossfit(args, data)
    effects = _effects_from_args(args)
    v_names = roles.effective_condition_on
    v_cols = np.column_stack([data.column_values(name) for name in v_names])
    scalar_v = len(v_names) == 1

    curve_rows: list[dict] = []
    coef_rows: list[dict] = []
    for effect in effects:
        table = pseudo_outcome_table(data, nuisances, effect)
        tag = _effect_columns(effect)
        if args.learner == "projection":
            if not args.basis:
                raise ConfigError("--basis is required with --learner projection")
            basis = Basis.from_formula(args.basis, v_names)
            learner = fit_projection(table, v_cols, basis)
            for row in learner.coefficient_table(level=args.level):
                coef_rows.append({**tag, **row})
            constant_only = all(len(term) == 0 for term in basis.terms)
            if constant_only:
                pred = learner.predict_with_ci(np.zeros((1, len(v_names))), args.level)
                grid_values = [np.nan]
            elif scalar_v:
                grid_values = np.linspace(v_cols.min(), v_cols.max(), 101)
                pred = learner.predict_with_ci(grid_values[:, None], args.level)
            else:
                continue  # no 1-d curve for multivariate conditioning
            for i, value in enumerate(np.atleast_1d(grid_values)):
                curve_rows.append(
                    {
                        **tag,
                        "v": value,
                        "estimate": pred.estimate[i],
                        "se": pred.se[i],
                        "ci_lower": pred.lower[i],
                        "ci_upper": pred.upper[i],
                    }
                )
        else:
            if not scalar_v:
                raise ConfigError(
                    "--learner idr needs a single conditioning covariate"
                )
            spec = SmootherSpec(bandwidth=_bandwidth_arg(str(args.bandwidth)))
            learner = fit_idr(table, v_cols, spec)
            pred = learner.predict_with_ci(learner.grid_, args.level)
            for i, value in enumerate(learner.grid_):
                curve_rows.append(
                    {
                        **tag,
                        "v": value,
                        "estimate": pred.estimate[i],
                        "se": pred.se[i],
                        "ci_lower": pred.lower[i],
                        "ci_upper": pred.upper[i],
                    }
                )

    document = ResultDocument(
        command="fit",
        config=_config_echo(args),
        summary={"n": data.n, "conditioning": list(v_names)},
        stamp=args.stamp,
    )
    if curve_rows:
        document.tables["curve"] = pd.DataFrame.from_records(curve_rows)
    if coef_rows:
        document.tables["coefficients"] = pd.DataFrame.from_records(coef_rows)
    path = write_document(document, args.out)
    logger.info("wrote %s", path)
    return 0


def cmd_vcide(args) -> int:
    roles = _roles(args)
    data = ingest_csv(args.data, roles)
    nuisances = _crossfit(args, data)
    alpha = 1.0 - args.level
    subset = roles.condition_on and set(roles.condition_on) != set(roles.covariates)
    rows = []
    for delta in _floats(args.delta):
        if subset:
            if len(roles.condition_on) != 1:
                raise ConfigError(
                    "the subset estimator conditions on a single covariate"
                )
            v = data.column_values(roles.condition_on[0])
            table = pseudo_outcome_table(data, nuisances, EffectKind.cide(delta))
            curve = fit_idr(table, v, SmootherSpec(bandwidth=_bandwidth_arg(str(args.bandwidth))))
            result = estimate_vcide_subset(
                data, nuisances, curve, delta, alpha=alpha, v=v
            )
        else:
            result = estimate_vcide_full(data, nuisances, delta, alpha=alpha)
        rows.append(
            {
                "delta": delta,
                "n": result.n,
                "psi_hat": result.psi_hat,
                "psi_truncated": result.psi_truncated,
                "sigma2_standard": result.sigma2_standard,
                "sigma2_delta_method": result.sigma2_alt,
                "sigma1_sq": result.sigma1_sq,
                "sigma2_sq": result.sigma2_sq,
                "conservative_factor": result.conservative_factor,
                "ci_standard_lower": result.ci_standard[0],
                "ci_standard_upper": result.ci_standard[1],
                "ci_conservative_lower": result.ci_conservative[0],
                "ci_conservative_upper": result.ci_conservative[1],
                "ci_max_lower": result.ci_max[0],
                "ci_max_upper": result.ci_max[1],
                "reject": result.reject,
                "p_value": result.p_value,
            }
        )
    document = ResultDocument(
        command="vcide",
        config=_config_echo(args),
        summary={"n": data.n, "alpha": alpha, "estimator": "subset" if subset else "full"},
        stamp=args.stamp,
    )
    document.tables["vcide"] = pd.DataFrame.from_records(rows)
    path = write_document(document, args.out)
    logger.info("wrote %s", path)
    return 0


def cmd_simulate(args) -> int:
    config = ExperimentConfig(
        experiment=args.experiment,
        n=args.n,
        reps=args.reps,
        alpha_pi_grid=_floats(args.alpha_pi),
        alpha_mu_grid=_floats(args.alpha_mu),
        deltas=_floats(args.delta),
        seed=args.seed,
        level=args.level,
        test_alpha=1.0 - args.level,
        bandwidth="silverman" if args.bandwidth == "silverman" else float(args.bandwidth),
        noise_scale=args.noise_scale,
        sizes=_ints(args.sizes),
    )
    table = run_experiment(config)
    document = ResultDocument(
        command="simulate", config=_config_echo(args), stamp=args.stamp
    )
    document.tables["table"] = table
    path = write_document(document, args.out)
    logger.info("wrote %s", path)
    return 0


def cmd_oracle_check(args) -> int:
    effects = [
        EffectKind.cie(0.5),
        EffectKind.cie(2.0),
        EffectKind.cice(2.0, 0.5),
        EffectKind.cide(0.7),
        EffectKind.cide(1.5),
    ]
    id_tol, deriv_tol, h = 1e-10, 1e-6, 1e-4
    rows = []
    failed = False
    for i in range(args.instances):
        n_points = 2 + replicate_seed(args.seed, 40, i) % max(1, args.support_points - 1)
        dgp = DiscreteDgp.random(int(n_points), seed=replicate_seed(args.seed, 41, i))

        def population_plugin(effect):
            values = plugin_value(dgp.pi, dgp.mu0, dgp.mu1, effect)
            return float(np.sum(dgp.probs * values))

        for effect in effects:
            diff = abs(population_plugin(effect) - enumeration_oracle(dgp, effect))
            ok = diff <= id_tol
            failed |= not ok
            label = f"identification {effect.label()} instance {i}"
            print(f"{'PASS' if ok else 'FAIL'} {label}: |diff| = {diff:.3e}")
            rows.append(
                {"check": label, "abs_diff": diff, "tolerance": id_tol, "pass": ok}
            )
        for delta in (0.2, 0.5, 1.0, 2.0, 5.0):
            central = (
                population_plugin(EffectKind.cie(delta + h))
                - population_plugin(EffectKind.cie(delta - h))
            ) / (2 * h)
            cide = population_plugin(EffectKind.cide(delta))
            diff = abs(central - cide) / max(1.0, abs(cide))
            ok = diff <= deriv_tol
            failed |= not ok
            label = f"derivative delta={delta:g} instance {i}"
            print(f"{'PASS' if ok else 'FAIL'} {label}: rel diff = {diff:.3e}")
            rows.append(
                {"check": label, "abs_diff": diff, "tolerance": deriv_tol, "pass": ok}
            )
    if args.out:
        document = ResultDocument(
            command="oracle-check",
            config=_config_echo(args),
            summary={"all_pass": not failed},
            stamp=args.stamp,
        )
        document.tables["checks"] = pd.DataFrame.from_records(rows)
        write_document(document, args.out)
    if failed:
        raise NumericalError("oracle-check found discrepancies above tolerance")
    return 0


def cmd_diagnose(args) -> int:
    roles = _roles(args)
    data = ingest_csv(args.data, roles)
    nuisances = _crossfit(args, data)
    by = roles.condition_on[0] if roles.condition_on else None
    table, summary = diagnose_positivity(data, nuisances, bins=args.bins, by=by)
    document = ResultDocument(
        command="diagnose", config=_config_echo(args), summary=summary, stamp=args.stamp
    )
    document.tables["histogram"] = table
    path = write_document(document, args.out)
    logger.info("wrote %s", path)
    if summary["flagged"]:
        logger.warning(
            "propensity mass near the boundary: %.1f%% below 0.05, %.1f%% above 0.95",
            100 * summary["share_below_0.05"],
            100 * summary["share_above_0.95"],
        )
    return 0


_COMMANDS = {
    "fit": cmd_fit,
    "vcide": cmd_vcide,
    "simulate": cmd_simulate,
    "oracle-check": cmd_oracle_check,
    "diagnose": cmd_diagnose,
}


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
