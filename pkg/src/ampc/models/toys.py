"""Cheap analytic forward models used as fixtures and sanity checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..basis import AffineMap, BasisFamily, MultiIndexSet, vandermonde
from .base import CHEAP, ForwardModel


class LinearModel(ForwardModel):
    """``G(z) = A z + c``."""

    cost_class = CHEAP

    def __init__(self, A, c=None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.n_d, self.n_z = self.A.shape
        self.c = np.zeros(self.n_d) if c is None else np.asarray(c, dtype=float).reshape(self.n_d)

    def config(self):
        return {"A": self.A.tolist(), "c": self.c.tolist()}

    def _evaluate(self, z):
        return self.A @ z + self.c


class PolynomialModel(ForwardModel):
    """Output ``j`` is ``sum_k coef[k, j] Phi_k(T(z))`` over a given index set.

    With ``index_set`` of total degree ``p`` this lies inside the PC span of
    any surrogate of order ``N >= p`` built on the same family and map.
    """

    cost_class = CHEAP

    def __init__(self, family: BasisFamily, index_set: MultiIndexSet, coefficients, prior_map: AffineMap | None = None):
        self.family = family
        self.index_set = index_set
        coef = np.asarray(coefficients, dtype=float)
        self.coefficients = coef[:, None] if coef.ndim == 1 else coef
        self.prior_map = prior_map or AffineMap.identity(index_set.dimension)
        self.n_z = index_set.dimension
        self.n_d = self.coefficients.shape[1]

    def config(self):
        return {
            "family": self.family.value,
            "order": self.index_set.order,
            "coefficients": self.coefficients.tolist(),
            "map": self.prior_map.to_dict(),
        }

    def _evaluate(self, z):
        return vandermonde(self.family, self.index_set, self.prior_map.to_reference(z))[0] @ self.coefficients


class ExpSumModel(ForwardModel):
    """Smooth non-polynomial model ``G(z) = scale * exp(sum_i z_i)``."""

    cost_class = CHEAP

    def __init__(self, n_z, scale=1.0, n_d=1):
        self.n_z = n_z
        self.n_d = n_d
        self.scale = float(scale)

    def config(self):
        return {"n_z": self.n_z, "n_d": self.n_d, "scale": self.scale}

    def _evaluate(self, z):
        return np.full(self.n_d, self.scale * np.exp(z.sum()))


class PerturbedModel(ForwardModel):
    """``base(z) + amplitude * sin(frequency * z_0)`` in every output.

    Stands in for a cheap, biased low-fidelity code when a problem's
    high-fidelity model is so simple that its PC surrogate would be exact.
    """

    cost_class = CHEAP

    def __init__(self, base: ForwardModel, amplitude=0.3, frequency=2.0):
        self.base = base
        self.n_z = base.n_z
        self.n_d = base.n_d
        self.amplitude = float(amplitude)
        self.frequency = float(frequency)

    def config(self):
        return {"base": self.base.model_id, "amplitude": self.amplitude, "frequency": self.frequency}

    def _evaluate(self, z):
        return self.base.evaluate(z) + self.amplitude * np.sin(self.frequency * z[0])


@dataclass
class GaussianPosterior:
    mean: np.ndarray
    cov: np.ndarray

    def log_density(self, z):
        z = np.atleast_2d(z)
        r = z - self.mean
        prec = np.linalg.inv(self.cov)
        _, logdet = np.linalg.slogdet(2 * np.pi * self.cov)
        return -0.5 * np.einsum("ij,jk,ik->i", r, prec, r) - 0.5 * logdet


def linear_gaussian_posterior(A, c, data, sigma, prior_mean, prior_std) -> GaussianPosterior:
    """Conjugate posterior of ``z ~ N(m0, diag(s0^2))``, ``d = A z + c + N(0, sigma^2 I)``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m0 = np.broadcast_to(np.asarray(prior_mean, dtype=float), (A.shape[1],))
    s0 = np.broadcast_to(np.asarray(prior_std, dtype=float), (A.shape[1],))
    prec = A.T @ A / sigma**2 + np.diag(1.0 / s0**2)
    cov = np.linalg.inv(prec)
    mean = cov @ (A.T @ (np.asarray(data, dtype=float) - c) / sigma**2 + m0 / s0**2)
    return GaussianPosterior(mean, cov)


def analytic_toy_models() -> dict:
    """Catalogue of cheap models keyed by name."""
    from ..basis import total_degree_index_set

    idx3 = total_degree_index_set(2, 3)
    rng = np.random.default_rng(7)
    return {
        "identity_2d": LinearModel(np.eye(2)),
        "linear_gaussian_1d": LinearModel([[1.0], [0.5], [-0.8]], [0.1, 0.0, 0.2]),
        "cubic_in_span": PolynomialModel(BasisFamily.LEGENDRE, idx3, rng.standard_normal((len(idx3), 2))),
        "quartic_outside_span": PolynomialModel(
            BasisFamily.LEGENDRE,
            total_degree_index_set(2, 4),
            np.r_[np.zeros(len(idx3)), np.ones(5)],
        ),
        "exp_sum_2d": ExpSumModel(2),
    }
