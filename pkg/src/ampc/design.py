"""Least-squares design points and their preconditioning weights."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import BasisFamily, MultiIndexSet, vandermonde
from .errors import InputError

OVERSAMPLING = 2


@dataclass(frozen=True)
class DesignSet:
    """Sample locations in the reference domain with their LSQ weights."""

    points: np.ndarray
    weights: np.ndarray
    family: BasisFamily
    order: int

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (pts.shape[0],):
            raise InputError("one weight per design point is required")
        if np.any(w <= 0):
            raise InputError("design weights must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.points.shape[0]

    def to_dict(self):
        return {
            "family": self.family.value,
            "order": self.order,
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["points"]), np.array(d["weights"]), BasisFamily(d["family"]), d["order"])


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_chebyshev_design(n_z: int, Q: int, rng_seed) -> np.ndarray:
    """I.i.d. draws from the tensor-product Chebyshev (arcsine) density."""
    if Q < 1:
        raise InputError("Q must be at least 1")
    u = _rng(rng_seed).random((Q, n_z))
    return np.cos(np.pi * u)


def sample_ball_design(n_z: int, N: int, Q: int, rng_seed) -> np.ndarray:
    """Uniform draws on the Euclidean ball of radius sqrt(2N)."""
    if Q < 1 or N < 1:
        raise InputError("Q and N must be at least 1")
    rng = _rng(rng_seed)
    direction = rng.standard_normal((Q, n_z))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = math.sqrt(2.0 * N) * rng.random((Q, 1)) ** (1.0 / n_z)
    return direction * radius


def compute_weights(family: BasisFamily, index_set: MultiIndexSet, points) -> np.ndarray:
    """``w_i = M / sum_m Phi_m(z_i)^2``."""
    phi = vandermonde(family, index_set, points)
    return len(index_set) / np.sum(phi**2, axis=1)


def design_size(index_set: MultiIndexSet) -> int:
    return OVERSAMPLING * len(index_set)


def make_design(family: BasisFamily, index_set: MultiIndexSet, rng_seed, Q=None) -> DesignSet:
    """Degree-asymptotic random design of ``Q`` (default 2M) points."""
    Q = design_size(index_set) if Q is None else Q
    if family is BasisFamily.LEGENDRE:
        pts = sample_chebyshev_design(index_set.dimension, Q, rng_seed)
    else:
        pts = sample_ball_design(index_set.dimension, max(index_set.order, 1), Q, rng_seed)
    return DesignSet(pts, compute_weights(family, index_set, pts), family, index_set.order)
