"""Command-line front end.

Subcommands: ``identify`` (fit a model), ``tune`` (hyperparameters only),
``control`` (nominal + uncertainty-aware inputs for a belief) and
``experiment`` (Monte Carlo controller comparison).  All read a JSON config
(--config); --seed/--runs/--out/--threads override the corresponding config
entries.  On failure a machine-readable error object is printed to stdout
and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .control import bsp_optimal_input, nominal_input
from .dataio import load_dataset, write_json, write_runs_csv
from .experiment import run_experiment
from .kernels import gram_matrix
from .moments import closed_form_moments, monte_carlo_moments
from .regression import fit_posterior, log_marginal_likelihood
from .tuning import TuningResult, degrees_of_freedom, empirical_bayes, schedule_gamma, wsrr, wssu


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bayesmpc",
        description="Kernel-based Bayesian identification and uncertainty-aware MPC",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command")
    for name, handler, doc in (
        ("identify", _cmd_identify, "fit a Gaussian-regression model to a dataset"),
        ("tune", _cmd_tune, "estimate (gamma, lambda, sigma2) for a dataset"),
        ("control", _cmd_control, "compute nominal and uncertainty-aware inputs"),
        ("experiment", _cmd_experiment, "run the Monte Carlo controller comparison"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="path to the JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--runs", type=int, default=None, help="override experiment.runs")
        p.add_argument("--out", default=None, help="override the config output prefix")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results are identical for any value)")
        p.set_defaults(handler=handler)
    return parser


def _out_prefix(cfg: RunConfig, args) -> str:
    out = args.out if args.out is not None else cfg.output
    if not out:
        raise ConfigError("no output path: set 'output' in the config or pass --out")
    return out


def _tune(cfg: RunConfig, gram, outputs) -> tuple[dict, TuningResult]:
    mode = cfg.tuning_mode()
    n = outputs.size
    if mode["mode"] == "empirical_bayes":
        result = empirical_bayes(gram, outputs)
    elif mode["mode"] == "schedule":
        result = schedule_gamma(n, float(mode["alpha"]), float(mode["scale"]), gram, outputs)
    else:
        lam, sigma2 = float(mode["lambda"]), float(mode["sigma2"])
        gamma = sigma2 / lam
        result = TuningResult(
            gamma=gamma, lam=lam, sigma2=sigma2,
            dof=degrees_of_freedom(gram, gamma),
            wsrr=wsrr(gram, gamma, outputs), wssu=wssu(gram, gamma, outputs),
            iterations=0, residual=0.0,
        )
    return mode, result


def _tuning_json(mode: dict, result: TuningResult) -> dict:
    return {
        "mode": mode["mode"],
        "gamma": result.gamma,
        "lambda": result.lam,
        "sigma2": result.sigma2,
        "dof": result.dof,
        "wsrr": result.wsrr,
        "wssu": result.wssu,
        "iterations": result.iterations,
        "residual": result.residual,
        "converged": result.converged,
    }


def _cmd_identify(args) -> None:
    cfg = load_config(args.config)
    cfg.require("dataset", "kernel", "tuning")
    spec = cfg.kernel_spec()
    data = load_dataset(cfg.dataset_path, memory_y=cfg.memory)
    gram = gram_matrix(spec, data.locations)
    mode, tuned = _tune(cfg, gram, data.outputs)
    post = fit_posterior(data, spec, tuned.lam, tuned.sigma2)
    fitted = gram @ post.weights
    summary = {
        "n": len(data),
        "memory": cfg.memory,
        "kernel_family": spec.family,
        "tuning": _tuning_json(mode, tuned),
        "train_rmse": float(np.sqrt(np.mean((data.outputs - fitted) ** 2))),
        "log_marginal_likelihood": log_marginal_likelihood(data, spec, tuned.lam, tuned.sigma2),
    }
    path = _out_prefix(cfg, args) + ".model.json"
    write_json(summary, path)
    print(path)


def _cmd_tune(args) -> None:
    cfg = load_config(args.config)
    cfg.require("dataset", "kernel", "tuning")
    spec = cfg.kernel_spec()
    data = load_dataset(cfg.dataset_path, memory_y=cfg.memory)
    gram = gram_matrix(spec, data.locations)
    mode, tuned = _tune(cfg, gram, data.outputs)
    path = _out_prefix(cfg, args) + ".tuning.json"
    write_json(_tuning_json(mode, tuned), path)
    print(path)


def _resolve_seed(cfg: RunConfig, args, required: bool) -> int | None:
    seed = args.seed if args.seed is not None else cfg.seed
    if seed is None and required:
        raise ConfigError("a seed is required: set 'seed' in the config or pass --seed")
    return seed


def _cmd_control(args) -> None:
    cfg = load_config(args.config)
    cfg.require("belief", "problem")
    belief = cfg.belief()
    problem = cfg.problem()
    source, samples = cfg.moment_source()
    nominal = nominal_input(belief, problem)
    if source == "closed_form":
        moments = closed_form_moments(belief, problem.q_weights)
    else:
        seed = _resolve_seed(cfg, args, required=True)
        moments = monte_carlo_moments(
            belief, problem.q_matrix(), problem.horizon, belief.dim // 2,
            samples, seed, threads=args.threads,
        )
    bsp = bsp_optimal_input(moments, problem)
    out = {
        "moment_source": source,
        "mc_samples": samples,
        "nominal": {"u": nominal.u.tolist(), "predicted_cost": nominal.predicted_cost},
        "bsp": {"u": bsp.u.tolist(), "predicted_cost": bsp.predicted_cost},
    }
    path = _out_prefix(cfg, args) + ".control.json"
    write_json(out, path)
    print(path)


def _cmd_experiment(args) -> None:
    cfg = load_config(args.config)
    seed = _resolve_seed(cfg, args, required=True)
    exp_config = cfg.experiment_config(seed=seed, runs=args.runs)
    result = run_experiment(exp_config, threads=max(1, args.threads))
    prefix = _out_prefix(cfg, args)
    csv_path = prefix + ".runs.csv"
    json_path = prefix + ".summary.json"
    write_runs_csv(result.records, csv_path)
    write_json(result.summary, json_path)
    print(csv_path)
    print(json_path)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "handler"):
        parser.print_help()
        return 2
    try:
        args.handler(args)
    except (ConfigError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
