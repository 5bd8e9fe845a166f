"""Synthetic observations generated on a refined mesh."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError


@dataclass
class SyntheticData:
    data: np.ndarray
    clean: np.ndarray
    sigma: float
    true_params: np.ndarray
    noise_spec: dict
    fine_factor: int
    seed: int
    fine_model: dict = field(default_factory=dict)

    def provenance(self) -> dict:
        return {
            "true_params": self.true_params.tolist(),
            "noise": dict(self.noise_spec),
            "sigma_effective": self.sigma,
            "fine_factor": self.fine_factor,
            "seed": self.seed,
            "fine_model": self.fine_model,
        }


def generate_synthetic_data(model, true_params, noise_spec: dict, fine_factor: int = 1, seed: int = 0) -> SyntheticData:
    """Evaluate ``model`` on a finer mesh at ``true_params`` and add noise.

    ``noise_spec`` is ``{"kind": "additive", "sigma": s}`` for i.i.d.
    ``N(0, s^2)`` noise or ``{"kind": "max_relative", "delta": d}`` for noise
    with standard deviation ``d * max_j |u_j|``.  The returned ``sigma`` is
    the noise level to use in the likelihood.
    """
    true_params = np.asarray(true_params, dtype=float)
    if fine_factor < 1:
        raise InputError("fine_factor must be >= 1")
    if fine_factor > 1 and not hasattr(model, "refined"):
        raise InputError(f"{type(model).__name__} cannot be refined")
    fine = model.refined(fine_factor) if fine_factor > 1 else model
    clean = fine.evaluate(true_params)
    kind = noise_spec.get("kind", "additive")
    if kind == "additive":
        sigma = float(noise_spec["sigma"])
    elif kind == "max_relative":
        sigma = float(np.max(np.abs(clean)) * noise_spec["delta"])
    else:
        raise InputError(f"unknown noise kind {kind!r}")
    if sigma < 0:
        raise InputError("noise level must be non-negative")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(clean.size)
    data = clean + sigma * noise if sigma > 0 else clean.copy()
    fine_cfg = fine.config() if hasattr(fine, "config") else {}
    return SyntheticData(data, clean, sigma, true_params, dict(noise_spec), int(fine_factor), int(seed), fine_cfg)
