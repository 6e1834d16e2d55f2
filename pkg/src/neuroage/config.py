"""JSON run configuration: schema validation, defaults, round-tripping.

Unknown keys anywhere in the document are hard errors naming the exact key
path.  The time step is always derived from the age grid and cannot be set
independently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .kernels import DiracKernel, ExponentialKernel, GammaKernel, TabulatedKernel
from .params import ModelParams
from .rates import ConstantRate, SmoothRate, StepRate

__all__ = ["RunConfig", "parse_config", "parse_config_dict", "default_config",
           "serialize", "build_rate", "build_kernel"]

_RATE_SCHEMA = {
    "constant": {"a0": float},
    "smooth": {"a0": float, "a1": float, "x_scale": float, "mu_scale": float},
    "step": {"sigma_plus": float, "sigma_minus": float, "u_scale": float},
}
_KERNEL_SCHEMA = {
    "dirac": {"delta": float},
    "exponential": {"lambda": float, "delta": float, "y_max": float},
    "gamma": {"shape": float, "scale": float, "delta": float, "y_max": float},
    "tabulated": {"y": list, "b": list, "delta": float},
}
_PARAMS_SCHEMA = {
    "eps": float, "x_max": float, "n": int, "t_end": float,
    "tol_fixed_point": float, "tol_root": float, "delta_weight": float,
}
_EXPERIMENT_SCHEMA = {
    "initial": str, "amplitude": float, "amplitudes": list, "eps_list": list,
    "transient_cut": float, "snapshot_stride": int, "perturbation_family": str,
    "kind": str, "delay": str,
}
_TOP_KEYS = ("rate", "kernel", "params", "experiment", "output_dir", "seed")


def default_config() -> dict:
    return {
        "rate": {"kind": "constant", "a0": 1.0},
        "kernel": {"kind": "dirac", "delta": 1.0},
        "params": {"eps": 1.0, "x_max": 20.0, "n": 512, "t_end": 50.0,
                   "tol_fixed_point": 1e-12, "tol_root": 1e-12},
        "experiment": {"initial": "perturbed", "amplitude": 0.05,
                       "snapshot_stride": 0, "perturbation_family": "cosine"},
        "output_dir": None,
        "seed": 0,
    }


def _check_block(block: dict, schema: dict, path: str) -> None:
    for key, value in block.items():
        if key == "kind":
            continue
        if key not in schema:
            raise ConfigError(f"{path}.{key} is not a recognized key")
        expected = schema[key]
        if expected is float and not isinstance(value, (int, float)) or \
           expected is int and not isinstance(value, int) or \
           expected in (str, list) and not isinstance(value, expected):
            raise ConfigError(f"{path}.{key}: expected {expected.__name__}, "
                              f"got {type(value).__name__}")


@dataclass
class RunConfig:
    rate: dict
    kernel: dict
    params: ModelParams
    experiment: dict = field(default_factory=dict)
    output_dir: str | None = None
    seed: int = 0

    def build_rate(self):
        return build_rate(self.rate)

    def build_kernel(self):
        return build_kernel(self.kernel)


def build_rate(block: dict):
    kind = block["kind"]
    if kind == "constant":
        return ConstantRate(a0=block["a0"])
    if kind == "smooth":
        return SmoothRate(a0=block["a0"], a1=block["a1"],
                          x_scale=block["x_scale"], mu_scale=block["mu_scale"])
    if kind == "step":
        if not block["sigma_minus"] < block["sigma_plus"]:
            raise ConfigError("rate: sigma_minus < sigma_plus required")
        return StepRate(sigma_plus=block["sigma_plus"],
                        sigma_minus=block["sigma_minus"], u_scale=block["u_scale"])
    raise ConfigError(f"rate.kind: unknown kind {kind!r}")


def build_kernel(block: dict):
    kind = block["kind"]
    if kind == "dirac":
        return DiracKernel(delta=block.get("delta", 1.0))
    if kind == "exponential":
        return ExponentialKernel(lam=block["lambda"], delta=block["delta"],
                                 y_max=block.get("y_max"))
    if kind == "gamma":
        return GammaKernel(shape=block["shape"], scale=block["scale"],
                           delta=block["delta"], y_max=block.get("y_max"))
    if kind == "tabulated":
        if "y" not in block or "b" not in block:
            raise ConfigError("kernel.y and kernel.b are required for a tabulated kernel")
        return TabulatedKernel(y=tuple(block["y"]), b=tuple(block["b"]),
                               delta=block["delta"])
    raise ConfigError(f"kernel.kind: unknown kind {kind!r}")


def parse_config_dict(doc: dict) -> RunConfig:
    """Validate a configuration document and apply defaults."""
    if "artifact_version" in doc and "config" in doc:
        doc = doc["config"]  # accept a run record transparently
    for key in doc:
        if key not in _TOP_KEYS:
            raise ConfigError(f"{key} is not a recognized key")

    defaults = default_config()
    rate = dict(doc.get("rate", defaults["rate"]))
    if "kind" not in rate:
        raise ConfigError("rate.kind is required")
    if rate["kind"] not in _RATE_SCHEMA:
        raise ConfigError(f"rate.kind: unknown kind {rate['kind']!r}")
    _check_block(rate, _RATE_SCHEMA[rate["kind"]], "rate")
    rate_defaults = {
        "constant": {"a0": 1.0},
        "smooth": {"a0": 1.0, "a1": 2.0, "x_scale": 1.0, "mu_scale": 1.0},
        "step": {"sigma_plus": 0.5, "sigma_minus": 0.25, "u_scale": 1.0},
    }[rate["kind"]]
    rate = {**rate_defaults, **rate}

    kernel = dict(doc.get("kernel", defaults["kernel"]))
    if "kind" not in kernel:
        raise ConfigError("kernel.kind is required")
    if kernel["kind"] not in _KERNEL_SCHEMA:
        raise ConfigError(f"kernel.kind: unknown kind {kernel['kind']!r}")
    _check_block(kernel, _KERNEL_SCHEMA[kernel["kind"]], "kernel")
    kernel_defaults = {
        "dirac": {"delta": 1.0},
        "exponential": {"lambda": 2.0, "delta": 1.0},
        "gamma": {"shape": 2.0, "scale": 0.5, "delta": 1.0},
        "tabulated": {"delta": 1.0},
    }[kernel["kind"]]
    kernel = {**kernel_defaults, **kernel}

    pblock = dict(doc.get("params", {}))
    _check_block(pblock, _PARAMS_SCHEMA, "params")
    merged = {**defaults["params"], **pblock}
    try:
        params = ModelParams(
            eps=float(merged["eps"]), x_max=float(merged["x_max"]),
            n_cells=int(merged["n"]), t_end=float(merged["t_end"]),
            tol_fixed_point=float(merged["tol_fixed_point"]),
            tol_root=float(merged["tol_root"]),
            delta_weight=(float(merged["delta_weight"])
                          if "delta_weight" in merged and merged["delta_weight"] is not None
                          else None),
        )
    except ConfigError as exc:
        raise ConfigError(f"params: {exc}") from exc

    experiment = dict(doc.get("experiment", {}))
    _check_block(experiment, _EXPERIMENT_SCHEMA, "experiment")
    experiment = {**defaults["experiment"], **experiment}
    if experiment["initial"] not in ("steady", "perturbed", "block"):
        raise ConfigError("experiment.initial must be steady, perturbed or block")

    seed = doc.get("seed", defaults["seed"])
    if not isinstance(seed, int):
        raise ConfigError("seed: expected int")

    cfg = RunConfig(rate=rate, kernel=kernel, params=params,
                    experiment=experiment,
                    output_dir=doc.get("output_dir"), seed=seed)
    cfg.build_rate()   # constraint validation
    cfg.build_kernel()
    return cfg


def parse_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return parse_config_dict(doc)


def serialize(cfg: RunConfig) -> dict:
    """Fully resolved configuration; parsing it back yields the same config."""
    p = cfg.params
    params = {"eps": p.eps, "x_max": p.x_max, "n": p.n_cells, "t_end": p.t_end,
              "tol_fixed_point": p.tol_fixed_point, "tol_root": p.tol_root}
    if p.delta_weight is not None:
        params["delta_weight"] = p.delta_weight
    return {
        "rate": dict(cfg.rate),
        "kernel": dict(cfg.kernel),
        "params": params,
        "experiment": dict(cfg.experiment),
        "output_dir": cfg.output_dir,
        "seed": cfg.seed,
    }
