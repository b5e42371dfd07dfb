"""Strict run-configuration files.

Configs are JSON documents; unknown keys abort before any computation, and
the non-finite constants (NaN/Infinity) are rejected at parse time.  Which
sections are required depends on the subcommand; see the README for the full
schema and an annotated example.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .control import MpcProblem
from .experiment import ExperimentConfig
from .kernels import KernelSpec, tc_kernel_spec
from .regression import ThetaBelief


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


_TOP_KEYS = {"seed", "output", "dataset", "memory", "kernel", "tuning",
             "problem", "belief", "moments", "experiment"}
_KERNEL_KEYS = {"family", "eta", "degree", "ard_weights", "structure_matrix", "tc"}
_TC_KEYS = {"alpha_y", "alpha_u", "size_y", "size_u"}
_TUNING_KEYS = {"mode", "lambda", "sigma2", "alpha", "scale"}
_PROBLEM_KEYS = {"horizon", "q_weights", "r_weights", "y_ref", "u_ref",
                 "y_past", "u_past"}
_BELIEF_KEYS = {"mu", "sigma_theta"}
_MOMENTS_KEYS = {"source", "samples"}
_EXPERIMENT_KEYS = {"runs"}

TUNING_MODES = ("fixed", "empirical_bayes", "schedule")


def _check_keys(section: dict, allowed: set, where: str):
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _reject_constant(token: str):
    raise ConfigError(f"non-finite number {token!r} is not allowed in a config")


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration; sections stay as validated raw dictionaries and
    are materialized into library objects on demand."""

    raw: dict
    path: str

    @property
    def seed(self):
        return self.raw.get("seed")

    @property
    def output(self):
        return self.raw.get("output")

    @property
    def dataset_path(self):
        return self.raw.get("dataset")

    @property
    def memory(self) -> int:
        return int(self.raw.get("memory", 1))

    def require(self, *sections: str):
        missing = [s for s in sections if s not in self.raw]
        if missing:
            raise ConfigError(
                f"{self.path}: missing required config section(s): {missing}"
            )

    def kernel_spec(self) -> KernelSpec:
        self.require("kernel")
        k = self.raw["kernel"]
        if "tc" in k:
            if len(set(k) - {"family", "tc"}) > 0:
                raise ConfigError("kernel.tc cannot be combined with other kernel parameters")
            if k.get("family", "linear") != "linear":
                raise ConfigError("kernel.tc implies the linear family")
            tc = k["tc"]
            _check_keys(tc, _TC_KEYS, "kernel.tc")
            return tc_kernel_spec(
                alpha_y=float(tc.get("alpha_y", 0.0)), size_y=int(tc.get("size_y", 0)),
                alpha_u=float(tc.get("alpha_u", 0.0)), size_u=int(tc.get("size_u", 0)),
            )
        kwargs = {}
        if "eta" in k:
            kwargs["eta"] = float(k["eta"])
        if "degree" in k:
            kwargs["degree"] = int(k["degree"])
        if "ard_weights" in k:
            kwargs["ard_weights"] = np.asarray(k["ard_weights"], dtype=float)
        if "structure_matrix" in k:
            kwargs["structure_matrix"] = np.asarray(k["structure_matrix"], dtype=float)
        try:
            return KernelSpec(family=k["family"], **kwargs)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"invalid kernel section: {exc}") from exc

    def tuning_mode(self) -> dict:
        self.require("tuning")
        t = dict(self.raw["tuning"])
        mode = t.get("mode")
        if mode not in TUNING_MODES:
            raise ConfigError(f"tuning.mode must be one of {TUNING_MODES}, got {mode!r}")
        if mode == "fixed":
            if "lambda" not in t or "sigma2" not in t:
                raise ConfigError("tuning.mode 'fixed' needs 'lambda' and 'sigma2'")
        if mode == "schedule":
            t.setdefault("alpha", 0.25)
            t.setdefault("scale", 1.0)
        return t

    def problem(self) -> MpcProblem:
        self.require("problem")
        p = self.raw["problem"]
        try:
            T = int(p["horizon"])
            return MpcProblem(
                horizon=T,
                q_weights=p.get("q_weights", [1.0] * T),
                r_weights=p.get("r_weights", [0.0] * T),
                y_ref=p["y_ref"],
                u_ref=p.get("u_ref", [0.0] * T),
                y_past=p.get("y_past", []),
                u_past=p.get("u_past", []),
            )
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"invalid problem section: {exc}") from exc

    def belief(self) -> ThetaBelief:
        self.require("belief")
        b = self.raw["belief"]
        try:
            return ThetaBelief(
                mean=np.asarray(b["mu"], dtype=float),
                covariance=np.asarray(b["sigma_theta"], dtype=float),
            )
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"invalid belief section: {exc}") from exc

    def moment_source(self) -> tuple[str, int | None]:
        m = self.raw.get("moments", {"source": "closed_form"})
        source = m.get("source", "closed_form")
        samples = m.get("samples")
        if source not in ("closed_form", "monte_carlo"):
            raise ConfigError("moments.source must be 'closed_form' or 'monte_carlo'")
        if source == "monte_carlo":
            if samples is None or int(samples) < 1:
                raise ConfigError("moments.source 'monte_carlo' needs positive 'samples'")
            samples = int(samples)
        return source, samples

    def experiment_config(self, seed: int, runs: int | None = None) -> ExperimentConfig:
        self.require("belief", "problem", "experiment")
        exp = self.raw["experiment"]
        source, samples = self.moment_source()
        belief = self.belief()
        try:
            return ExperimentConfig(
                mu=belief.mean,
                sigma_theta=belief.covariance,
                problem=self.problem(),
                runs=int(runs if runs is not None else exp["runs"]),
                seed=seed,
                moment_source=source,
                mc_samples=samples,
            )
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"invalid experiment configuration: {exc}") from exc


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    _check_keys(raw, _TOP_KEYS, "config")
    if "kernel" in raw:
        _check_keys(raw["kernel"], _KERNEL_KEYS, "kernel")
    if "tuning" in raw:
        _check_keys(raw["tuning"], _TUNING_KEYS, "tuning")
    if "problem" in raw:
        _check_keys(raw["problem"], _PROBLEM_KEYS, "problem")
    if "belief" in raw:
        _check_keys(raw["belief"], _BELIEF_KEYS, "belief")
    if "moments" in raw:
        _check_keys(raw["moments"], _MOMENTS_KEYS, "moments")
    if "experiment" in raw:
        _check_keys(raw["experiment"], _EXPERIMENT_KEYS, "experiment")
    if "seed" in raw and raw["seed"] is not None:
        seed = raw["seed"]
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
    if "memory" in raw and (not isinstance(raw["memory"], int) or raw["memory"] < 1):
        raise ConfigError("memory must be a positive integer")
    return RunConfig(raw=raw, path=str(path))
