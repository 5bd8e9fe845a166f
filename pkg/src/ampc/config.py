"""Run configuration: schema validation, defaults and object construction."""

from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .bayes import Gaussian, InverseProblem, PriorSpec, Uniform, noise_from_dict
from .errors import ConfigError
from .models import EllipticRbfModel, ExpSumModel, FractionalSourceModel, LinearModel, generate_synthetic_data

SCHEMA_VERSION = 1

METHOD_DEFAULTS = {
    "kind": "ampc",
    "N": 3,
    "N_C": 2,
    "epsilon": 1e-3,
    "epsilon0": 0.1,
    "radius": 0.1,
    "rho": 0.5,
    "m": 5000,
    "I_max": 10,
    "n_steps": 50000,
    "burn_in": 0.4,
    "histogram_bins": 50,
}

MODEL_KINDS = {
    "fractional": FractionalSourceModel,
    "elliptic": EllipticRbfModel,
    "linear": LinearModel,
    "exp_sum": ExpSumModel,
}


def load_schema() -> dict:
    text = resources.files("ampc").joinpath("schema/run_config.schema.json").read_text()
    return json.loads(text)


def validate(cfg: dict) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        path = ".".join(str(p) for p in e.path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {e.message}", path=path)


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply ``dotted.key=value`` overrides; values are parsed as JSON when possible."""
    cfg = copy.deepcopy(cfg)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-object", path=key)
        node[parts[-1]] = value
    return cfg


def _absolute(path, base_dir):
    p = Path(path)
    return str(p if p.is_absolute() else (Path(base_dir) / p).resolve())


def resolve(cfg: dict, base_dir=".") -> dict:
    """Validate and fill defaults; relative paths become absolute against ``base_dir``."""
    validate(cfg)
    out = copy.deepcopy(cfg)
    out.setdefault("schema_version", SCHEMA_VERSION)
    out.setdefault("seed", 0)
    out.setdefault("name", out["model"]["kind"])
    out["output_dir"] = _absolute(out.get("output_dir", "ampc_output"), base_dir)
    out["model"].setdefault("params", {})
    out["method"] = {**METHOD_DEFAULTS, **out.get("method", {})}
    data = out["data"]
    if ("file" in data) == ("synthetic" in data):
        raise ConfigError("data needs exactly one of 'file' or 'synthetic'", path="data")
    if "file" in data:
        data["file"] = _absolute(data["file"], base_dir)
    else:
        syn = data["synthetic"]
        syn.setdefault("fine_factor", 1)
        syn.setdefault("seed", out["seed"])
        key = "sigma" if syn["noise"]["kind"] == "additive" else "delta"
        if key not in syn["noise"]:
            raise ConfigError(f"synthetic noise of kind {syn['noise']['kind']!r} needs {key!r}", path="data.synthetic.noise")
    noise = out.setdefault("noise", {"kind": "from_data"} if "synthetic" in data else {})
    if noise.get("kind", "known") == "known" and "sigma" not in noise:
        raise ConfigError("known noise needs 'sigma'", path="noise")
    if noise.get("kind") == "from_data" and "synthetic" not in data:
        raise ConfigError("noise kind 'from_data' needs a synthetic data block", path="noise")
    if "surrogate_file" in out["method"]:
        out["method"]["surrogate_file"] = _absolute(out["method"]["surrogate_file"], base_dir)
    if "grid" in out:
        out["grid"].setdefault("nodes", 101)
    return out


def load_config(path, overrides=None) -> dict:
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return resolve(apply_overrides(cfg, overrides), base_dir=path.parent)


def build_model(model_cfg: dict):
    cls = MODEL_KINDS[model_cfg["kind"]]
    try:
        return cls(**model_cfg.get("params", {}))
    except TypeError as exc:
        raise ConfigError(f"bad parameters for model {model_cfg['kind']!r}: {exc}", path="model.params") from exc


def build_prior(prior_cfg: dict, n_z: int) -> PriorSpec:
    if "marginals" in prior_cfg:
        prior = PriorSpec.from_dict(prior_cfg)
    else:
        n = prior_cfg.get("dimension", n_z)
        kind = prior_cfg.get("kind", "uniform")
        if kind == "uniform":
            prior = PriorSpec(tuple(Uniform(prior_cfg.get("low", 0.0), prior_cfg.get("high", 1.0)) for _ in range(n)))
        else:
            prior = PriorSpec(tuple(Gaussian(prior_cfg.get("mean", 0.0), prior_cfg.get("std", 1.0)) for _ in range(n)))
    if prior.dimension != n_z:
        raise ConfigError(f"prior has {prior.dimension} coordinates but the model has {n_z}", path="prior")
    return prior


def read_data_file(path) -> np.ndarray:
    try:
        return np.loadtxt(path, dtype=float, ndmin=1, delimiter=",")
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read data file {path}: {exc}", path="data.file") from exc


def make_data(cfg: dict, model):
    """Observed data and, for synthetic blocks, the generation record."""
    data = cfg["data"]
    if "file" in data:
        return read_data_file(data["file"]), None
    syn = data["synthetic"]
    if len(syn["true_params"]) != model.n_z:
        raise ConfigError(f"true_params needs {model.n_z} values", path="data.synthetic.true_params")
    gen = generate_synthetic_data(model, syn["true_params"], syn["noise"], syn["fine_factor"], syn["seed"])
    return gen.data, gen


def build_problem(cfg: dict):
    """``(problem, synthetic_record_or_None)`` from a resolved config."""
    model = build_model(cfg["model"])
    prior = build_prior(cfg["prior"], model.n_z)
    data, gen = make_data(cfg, model)
    noise_cfg = cfg["noise"]
    if noise_cfg.get("kind") == "from_data":
        if not gen.sigma > 0:
            raise ConfigError("noise level from synthetic data is zero; give an explicit sigma", path="noise")
        noise = noise_from_dict({"kind": "known", "sigma": gen.sigma})
    else:
        noise = noise_from_dict(noise_cfg)
    return InverseProblem(model, prior, data, noise, meta={"name": cfg["name"]}), gen
