"""Command-line entry point: ``ensemble-ols {theory,simulate,figure,validate}``.

Results go to stdout (``--format kv|csv|json``); diagnostics go to stderr.
Exit codes: 0 success, 1 validation failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Sequence

from .datagen import ProblemSpec
from .errors import EnsembleOLSError
from .experiments import ExperimentConfig, format_value, rows_to_csv, run_experiment
from .montecarlo import risk_convergence_sim
from .risk_theory import (
    K_INF,
    TheoryQuery,
    ensemble_risk,
    large_ensemble_risk,
    mu_scaled_risk,
    optimal_alpha,
    optimal_mu,
    optimal_ridge_risk,
)
from .sampling import SubsampleScheme, Strategy
from .streams import THREADS_ENV


class _Parser(argparse.ArgumentParser):
    """Argument parser whose errors are one diagnostic line plus the usage synopsis."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _mu_arg(text: str) -> float | str:
    if text == "opt":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--mu expects a number or 'opt', got {text!r}") from None


def _k_arg(text: str) -> int | str:
    if text in ("inf", "infinity"):
        return "inf"
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--k expects a positive integer or 'inf', got {text!r}") from None
    if k < 1:
        raise argparse.ArgumentTypeError("--k must be >= 1")
    return k


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("kv", "csv", "json"), default="kv")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker cap, 0 = all cores (default: ${THREADS_ENV} or 1)")
    common.add_argument("--config", default=None, help="JSON config file; flags override its values")

    parser = _Parser(prog="ensemble-ols", description="Subsampled OLS ensembles: theory, simulation, figures.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    th = sub.add_parser("theory", parents=[common], help="evaluate closed-form risks")
    th.add_argument("--gamma", type=float, default=None, help="required unless given in --config")
    th.add_argument("--sigma", type=float, default=None, help="required unless given in --config")
    th.add_argument("--alpha", type=float, default=None)
    th.add_argument("--eta", type=float, default=None, help="default 1")
    th.add_argument("--k", type=_k_arg, default=None)
    th.add_argument("--mu", type=_mu_arg, default=None)

    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo ensemble risk versus k")
    sim.add_argument("--n", type=int, default=None, help="required unless given in --config")
    sim.add_argument("--p", type=int, default=None, help="required unless given in --config")
    sim.add_argument("--sigma", type=float, default=None, help="default 1")
    sim.add_argument("--alpha", type=float, default=None, help="default: optimal alpha for p/n and sigma")
    sim.add_argument("--eta", type=float, default=None, help="default 1")
    sim.add_argument("--k", type=_int_list, default=None, help="comma-separated ensemble sizes (default 1,2,4,8,16)")
    sim.add_argument("--trials", type=int, default=None, help="default 50")
    sim.add_argument("--seed", type=int, default=None, help="default 0")
    sim.add_argument("--strategy", choices=[s.value for s in Strategy], default=None, help="default fixed")

    fig = sub.add_parser("figure", parents=[common], help="run a figure pipeline")
    fig.add_argument("which", choices=("2", "3", "4"))
    fig.add_argument("--n", type=int, default=None)
    fig.add_argument("--p", type=int, default=None)
    fig.add_argument("--sigma", type=float, default=None)
    fig.add_argument("--trials", type=int, default=None)
    fig.add_argument("--k-grid", dest="k_grid", type=_int_list, default=None)
    fig.add_argument("--gamma-list", dest="gamma_list", type=_float_list, default=None)
    fig.add_argument("--sigma-grid", dest="sigma_grid", type=_float_list, default=None)
    fig.add_argument("--seed", type=int, default=None)
    fig.add_argument("--output-dir", dest="output_dir", default=None)

    val = sub.add_parser("validate", parents=[common], help="run the Monte Carlo validation suite")
    val.add_argument("--seed", type=int, default=None)
    val.add_argument("--trials", type=int, default=None)
    val.add_argument("--lemma-trials", dest="lemma_trials", type=int, default=None)
    val.add_argument("--output-dir", dest="output_dir", default=None)
    parser.subcommand_parsers = {"theory": th, "simulate": sim, "figure": fig, "validate": val}
    return parser


def _emit(records: list[dict], fmt: str, columns: list[str] | None = None) -> None:
    if fmt == "json":
        clean = [{k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in r.items()}
                 for r in records]
        sys.stdout.write(json.dumps(clean if len(clean) != 1 else clean[0], indent=2, sort_keys=False) + "\n")
    elif fmt == "csv":
        sys.stdout.write(rows_to_csv(records, columns or list(records[0])))
    else:
        for rec in records:
            sys.stdout.write(" ".join(f"{k}={_kv(v)}" for k, v in rec.items()) + "\n")


def _kv(v) -> str:
    if isinstance(v, float):
        return f"{v:.6f}" if math.isfinite(v) else "nan"
    return format_value(v)


def _load_config(args, fields: Sequence[str]) -> dict:
    """Values from ``--config`` overridden by explicitly passed flags."""
    base: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            base = json.load(fh)
        if not isinstance(base, dict):
            raise EnsembleOLSError("config file must hold a JSON object")
        unknown = set(base) - set(fields) - {"name", "overrides"}
        if unknown:
            raise EnsembleOLSError(f"unknown config keys: {sorted(unknown)}")
    for f in fields:
        v = getattr(args, f, None)
        if v is not None:
            base[f] = v
    return base


def _require(vals: dict, *names: str) -> None:
    missing = [n for n in names if vals.get(n) is None]
    if missing:
        raise EnsembleOLSError(f"missing required value(s): {', '.join('--' + m for m in missing)}")


def _cmd_theory(args) -> int:
    vals = _load_config(args, ("gamma", "sigma", "alpha", "eta", "k", "mu"))
    _require(vals, "gamma", "sigma")
    gamma, sigma = float(vals["gamma"]), float(vals["sigma"])
    a_star = optimal_alpha(gamma, sigma)
    ridge = optimal_ridge_risk(gamma, sigma)
    out: dict = {}
    alpha = vals.get("alpha")
    if alpha is None:
        out.update(alpha_star=a_star, risk=large_ensemble_risk(a_star, gamma, sigma), ridge=ridge)
        if vals.get("k") not in (None, "inf"):
            k = int(vals["k"])
            out["finite_k_risk"] = ensemble_risk(TheoryQuery(a_star, float(vals.get("eta") or 1.0), gamma, sigma, k))
    else:
        alpha = float(alpha)
        eta = float(vals.get("eta") or 1.0)
        out.update(alpha=alpha, alpha_star=a_star, large_ensemble_risk=large_ensemble_risk(alpha, gamma, sigma))
        k = vals.get("k")
        if k not in (None, "inf"):
            out["finite_k_risk"] = ensemble_risk(TheoryQuery(alpha, eta, gamma, sigma, int(k)))
        mu = vals.get("mu")
        if mu == "opt":
            mu_star, risk = optimal_mu(alpha, gamma, sigma)
            out.update(mu_star=mu_star, risk=risk)
        elif mu is not None:
            out.update(mu=float(mu), risk=mu_scaled_risk(TheoryQuery(alpha, eta, gamma, sigma, K_INF, float(mu))))
        elif "finite_k_risk" in out:
            out["risk"] = out["finite_k_risk"]
        else:
            out["risk"] = out["large_ensemble_risk"]
        out["ridge"] = ridge
    _emit([out], args.format)
    return 0


def _cmd_simulate(args) -> int:
    vals = _load_config(args, ("n", "p", "sigma", "alpha", "eta", "k", "trials", "seed", "strategy", "threads"))
    _require(vals, "n", "p")
    n, p = int(vals["n"]), int(vals["p"])
    sigma = float(vals.get("sigma", 1.0))
    alpha = vals.get("alpha")
    alpha = optimal_alpha(p / n, sigma) if alpha is None else float(alpha)
    scheme = SubsampleScheme(alpha, float(vals.get("eta", 1.0)), Strategy(vals.get("strategy", "fixed")))
    seed = int(vals.get("seed", 0))
    spec = ProblemSpec(n=n, p=p, sigma=sigma, seed=seed)
    if not scheme.is_feasible(p, n):
        raise EnsembleOLSError("subset sizes infeasible: floor(alpha p) must be < floor(eta n) - 1")
    table = risk_convergence_sim(spec, scheme, vals.get("k", [1, 2, 4, 8, 16]), int(vals.get("trials", 50)),
                                 seed=seed, threads=vals.get("threads"))
    records = [{"k": r["k"], "mean_risk": r["mean_risk"], "se": r["se"], "alpha": alpha, "eta": scheme.eta,
                "trials": table.trials, "seed": seed} for r in table.rows()]
    _emit(records, args.format)
    return 0


def _experiment_config(name: str, args, keys: Sequence[str]) -> ExperimentConfig:
    flags = {k: getattr(args, k, None) for k in keys}
    flags["threads"] = args.threads
    if args.config:
        return ExperimentConfig.from_json(args.config, **flags)
    return ExperimentConfig(name, {k: v for k, v in flags.items() if v is not None})


def _cmd_figure(args) -> int:
    name = f"fig{args.which}"
    keys = {"fig2": ("n", "sigma", "trials", "k_grid", "gamma_list", "seed", "output_dir"),
            "fig3": ("n", "p", "trials", "k_grid", "sigma_grid", "seed", "output_dir"),
            "fig4": ("sigma_grid", "seed", "output_dir")}[name]
    extra = [k for k in ("n", "p", "sigma", "trials", "k_grid", "gamma_list", "sigma_grid")
             if getattr(args, k, None) is not None and k not in keys]
    if extra:
        raise EnsembleOLSError(f"figure {args.which} does not accept: {', '.join('--' + e.replace('_', '-') for e in extra)}")
    cfg = _experiment_config(name, args, keys)
    if cfg.name != name:
        raise EnsembleOLSError(f"config file is for {cfg.name}, not {name}")
    result = run_experiment(cfg)
    _emit_result(result, args.format)
    return 0


def _emit_result(result, fmt: str) -> None:
    if fmt == "csv":
        sys.stdout.write(result.csv())
    else:
        _emit(result.rows, fmt, result.columns)


def _cmd_validate(args) -> int:
    cfg = _experiment_config("validate", args, ("seed", "trials", "lemma_trials", "output_dir"))
    result = run_experiment(cfg)
    _emit_result(result, args.format)
    failed = [r for r in result.rows if not r["passed"]]
    summary = f"validation {'PASSED' if result.passed else 'FAILED'}: {len(result.rows) - len(failed)}/{len(result.rows)} checks passed"
    print(summary, file=sys.stderr)
    for r in failed:
        print(f"  FAIL {r['group']}/{r['check']}: stat={format_value(r['stat'])} tol={format_value(r['tolerance'])}",
              file=sys.stderr)
    return 0 if result.passed else 1


COMMANDS = {"theory": _cmd_theory, "simulate": _cmd_simulate, "figure": _cmd_figure, "validate": _cmd_validate}


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (EnsembleOLSError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"ensemble-ols {args.command}: error: {exc}", file=sys.stderr)
        parser.subcommand_parsers[args.command].print_usage(sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
