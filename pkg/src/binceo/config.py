"""Experiment configuration: a single JSON document, schema-validated.

Unknown keys are rejected everywhere.  A configuration either names a
preset (whose fields it may override) or spells out the model and code
plan explicitly.  Degree maps use node degrees as keys and edge fractions
as values, so a polynomial term c*x^(i-1) becomes {"i": c}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .model import CeoModel
from .presets import get_preset
from .sparse_codes import DegreeDistribution, PlanEps


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def _check_keys(obj: dict, allowed, where: str):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(sorted(unknown))}")


def _parse_dd(obj: dict, where: str) -> DegreeDistribution:
    _check_keys(obj, {"lambda", "rho"}, where)
    try:
        lam = {int(k): float(v) for k, v in obj["lambda"].items()}
        rho = {int(k): float(v) for k, v in obj["rho"].items()}
        return DegreeDistribution.normalized(lam, rho)
    except (KeyError, AttributeError, TypeError) as exc:
        raise ConfigError(f"bad degree distribution in {where}: {exc}") from exc


def _parse_eps(obj: dict) -> PlanEps:
    _check_keys(obj, {"quant", "coarse_bin", "fine_quant", "fine_bin"}, "code_plan.eps")
    return PlanEps(
        quant=tuple(obj.get("quant", ())),
        coarse_bin=tuple(obj.get("coarse_bin", ())),
        fine_quant=tuple(obj.get("fine_quant", ())),
        fine_bin=tuple(obj.get("fine_bin", ())),
    )


@dataclass
class AlgorithmConfig:
    bip_iters_per_round: int = 6
    bip_decimate_frac: float = 0.04
    bip_confidence: float = 8.0
    bip_damping: float = 0.9
    bip_restarts: int = 0
    sp_max_iters: int = 300
    llr_max: float = 30.0
    decode_bypass: bool = False
    max_failed_fraction: float = 0.5


@dataclass
class ExperimentConfig:
    name: str
    model: Optional[CeoModel]
    optimize_mu: Optional[float]
    p: Optional[tuple]
    n: int
    K: tuple
    eps: Optional[PlanEps]
    dd: dict
    bin_dd: dict
    algorithm: AlgorithmConfig
    trials: int
    seed: int
    mu: Optional[float]
    mu_grid: Optional[list]
    raw: dict = field(default_factory=dict, repr=False)

    def echo(self) -> dict:
        """Canonical JSON-ready form of the resolved configuration."""
        out = {
            "name": self.name,
            "n": self.n,
            "K": list(self.K),
            "trials": self.trials,
            "seed": self.seed,
        }
        if self.model is not None:
            out["model"] = {"p": list(self.model.p), "d": list(self.model.d),
                            "delta": list(self.model.delta)}
        if self.p is not None:
            out["p"] = list(self.p)
        if self.optimize_mu is not None:
            out["optimize_mu"] = self.optimize_mu
        if self.mu is not None:
            out["mu"] = self.mu
        if self.mu_grid is not None:
            out["mu_grid"] = [float(m) for m in self.mu_grid]
        if self.eps is not None:
            out["eps"] = {"quant": list(self.eps.quant),
                          "coarse_bin": list(self.eps.coarse_bin),
                          "fine_quant": list(self.eps.fine_quant),
                          "fine_bin": list(self.eps.fine_bin)}
        out["algorithm"] = dict(self.algorithm.__dict__)
        if self.dd:
            out["degrees"] = {k: {"lambda": {str(d): f for d, f in v.lambda_coeffs.items()},
                                  "rho": {str(d): f for d, f in v.rho_coeffs.items()}}
                              for k, v in sorted(self.dd.items())}
        return out


_TOP_KEYS = {"preset", "model", "code_plan", "algorithm", "trials", "seed",
             "mu", "mu_grid", "name"}
_MODEL_KEYS = {"p", "d", "delta", "optimize_mu"}
_PLAN_KEYS = {"n", "K", "eps", "degrees", "bin_degrees"}
_ALG_KEYS = {"bip", "sp", "decode_bypass", "max_failed_fraction"}
_BIP_KEYS = {"iters_per_round", "decimate_frac", "confidence", "damping", "restarts"}
_SP_KEYS = {"max_iters", "llr_max"}


def load_config(source) -> ExperimentConfig:
    """Parse a config dict or a path to a JSON file."""
    if isinstance(source, (str, bytes)):
        try:
            with open(source) as fh:
                obj = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    else:
        obj = dict(source)
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(obj, _TOP_KEYS, "config")

    preset = {}
    if "preset" in obj:
        try:
            preset = get_preset(str(obj["preset"]))
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc

    name = obj.get("name", preset.get("name", "custom"))
    model = preset.get("model")
    p = preset.get("p")
    optimize_mu = None
    if "model" in obj:
        mspec = obj["model"]
        _check_keys(mspec, _MODEL_KEYS, "model")
        p = tuple(float(x) for x in mspec["p"]) if "p" in mspec else (
            tuple(model.p) if model else p)
        if p is None:
            raise ConfigError("model.p is required")
        optimize_mu = mspec.get("optimize_mu")
        if "d" in mspec and mspec["d"] is not None:
            delta = tuple(float(x) for x in mspec.get("delta", ())) or None
            try:
                model = CeoModel(p=p, d=tuple(float(x) for x in mspec["d"]),
                                 delta=delta or ())
            except ValueError as exc:
                raise ConfigError(f"bad model: {exc}") from exc
        elif optimize_mu is None:
            model = None
        else:
            model = None  # resolved later by the command via the optimizer

    plan = obj.get("code_plan", {})
    _check_keys(plan, _PLAN_KEYS, "code_plan")
    n = int(plan.get("n", preset.get("n", 10_000)))
    K = tuple(int(x) for x in plan.get("K", preset.get("K") or ()))
    eps = _parse_eps(plan["eps"]) if "eps" in plan else preset.get("eps")
    dd = dict(preset.get("dd") or {})
    for key, spec in plan.get("degrees", {}).items():
        dd[str(key)] = _parse_dd(spec, f"code_plan.degrees[{key}]")
    bin_dd = dict(preset.get("bin_dd") or {})
    for key, spec in plan.get("bin_degrees", {}).items():
        bin_dd[str(key)] = _parse_dd(spec, f"code_plan.bin_degrees[{key}]")

    alg = AlgorithmConfig()
    aspec = obj.get("algorithm", {})
    _check_keys(aspec, _ALG_KEYS, "algorithm")
    bspec = aspec.get("bip", {})
    _check_keys(bspec, _BIP_KEYS, "algorithm.bip")
    alg.bip_iters_per_round = int(bspec.get("iters_per_round", alg.bip_iters_per_round))
    alg.bip_decimate_frac = float(bspec.get("decimate_frac", alg.bip_decimate_frac))
    alg.bip_confidence = float(bspec.get("confidence", alg.bip_confidence))
    alg.bip_damping = float(bspec.get("damping", alg.bip_damping))
    alg.bip_restarts = int(bspec.get("restarts", alg.bip_restarts))
    sspec = aspec.get("sp", {})
    _check_keys(sspec, _SP_KEYS, "algorithm.sp")
    alg.sp_max_iters = int(sspec.get("max_iters", alg.sp_max_iters))
    alg.llr_max = float(sspec.get("llr_max", alg.llr_max))
    alg.decode_bypass = bool(aspec.get("decode_bypass", False))
    alg.max_failed_fraction = float(aspec.get("max_failed_fraction", 0.5))

    trials = int(obj.get("trials", preset.get("blocks", 10)))
    seed = int(obj.get("seed", 20240))
    mu = obj.get("mu", preset.get("mu"))
    mu_grid = obj.get("mu_grid", preset.get("mu_grid"))

    return ExperimentConfig(
        name=str(name), model=model, optimize_mu=optimize_mu, p=p, n=n, K=K,
        eps=eps, dd=dd, bin_dd=bin_dd, algorithm=alg, trials=trials, seed=seed,
        mu=None if mu is None else float(mu),
        mu_grid=None if mu_grid is None else [float(m) for m in mu_grid],
        raw=obj,
    )
