"""Priors, Gaussian likelihoods and (surrogate) posteriors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .basis import AffineMap, BasisFamily
from .errors import InputError

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Uniform:
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if not self.high > self.low:
            raise InputError(f"Uniform prior needs low < high, got ({self.low}, {self.high})")

    def to_dict(self):
        return {"kind": "uniform", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self):
        if not self.std > 0:
            raise InputError("Gaussian prior needs std > 0")

    def to_dict(self):
        return {"kind": "gaussian", "mean": self.mean, "std": self.std}


@dataclass(frozen=True)
class Flat:
    """Improper constant density on R; usable for sampling only."""

    def to_dict(self):
        return {"kind": "flat"}


def marginal_from_dict(d):
    kind = d.get("kind")
    if kind == "uniform":
        return Uniform(float(d.get("low", 0.0)), float(d.get("high", 1.0)))
    if kind == "gaussian":
        return Gaussian(float(d.get("mean", 0.0)), float(d.get("std", 1.0)))
    if kind == "flat":
        return Flat()
    raise InputError(f"unknown prior marginal kind {kind!r}")


@dataclass(frozen=True)
class PriorSpec:
    """Product of independent one-dimensional marginals."""

    marginals: tuple

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        if not self.marginals:
            raise InputError("prior needs at least one marginal")
        lo = np.array([m.low if isinstance(m, Uniform) else -np.inf for m in self.marginals])
        hi = np.array([m.high if isinstance(m, Uniform) else np.inf for m in self.marginals])
        object.__setattr__(self, "_lower", lo)
        object.__setattr__(self, "_upper", hi)
        kinds = [type(m) for m in self.marginals]
        object.__setattr__(self, "_is_uniform", np.array([k is Uniform for k in kinds]))
        object.__setattr__(self, "_is_gauss", np.array([k is Gaussian for k in kinds]))
        ulog = sum(-math.log(m.high - m.low) for m in self.marginals if isinstance(m, Uniform))
        gmean = np.array([m.mean for m in self.marginals if isinstance(m, Gaussian)])
        gstd = np.array([m.std for m in self.marginals if isinstance(m, Gaussian)])
        gconst = float(-0.5 * LOG_2PI * gstd.size - np.log(gstd).sum())
        object.__setattr__(self, "_const", ulog + gconst)
        object.__setattr__(self, "_gmean", gmean)
        object.__setattr__(self, "_gstd", gstd)

    @classmethod
    def uniform(cls, n, low=0.0, high=1.0):
        return cls(tuple(Uniform(low, high) for _ in range(n)))

    @classmethod
    def gaussian(cls, n, mean=0.0, std=1.0):
        return cls(tuple(Gaussian(mean, std) for _ in range(n)))

    @classmethod
    def flat(cls, n):
        return cls(tuple(Flat() for _ in range(n)))

    @property
    def dimension(self):
        return len(self.marginals)

    @property
    def lower(self):
        return self._lower

    @property
    def upper(self):
        return self._upper

    @property
    def is_bounded(self):
        return bool(self._is_uniform.all())

    def in_support(self, z) -> bool:
        z = np.asarray(z, dtype=float)
        return bool(np.all(z >= self._lower) and np.all(z <= self._upper))

    def clamp(self, z):
        return np.clip(z, self._lower, self._upper)

    def log_density(self, z) -> float:
        z = np.asarray(z, dtype=float)
        if not self.in_support(z):
            return -math.inf
        if self._gstd.size:
            r = (z[self._is_gauss] - self._gmean) / self._gstd
            return self._const - 0.5 * float(r @ r)
        return self._const

    def sample(self, n, rng):
        """Draw ``n`` prior samples (proper priors only)."""
        out = np.empty((n, self.dimension))
        for i, m in enumerate(self.marginals):
            if isinstance(m, Uniform):
                out[:, i] = rng.uniform(m.low, m.high, n)
            elif isinstance(m, Gaussian):
                out[:, i] = rng.normal(m.mean, m.std, n)
            else:
                raise InputError("cannot sample from a flat prior")
        return out

    @property
    def family(self) -> BasisFamily:
        """Polynomial family orthonormal under this prior."""
        if self._is_uniform.all():
            return BasisFamily.LEGENDRE
        if self._is_gauss.all():
            return BasisFamily.HERMITE
        raise InputError("polynomial surrogates need all-uniform or all-Gaussian priors")

    def affine_map(self) -> AffineMap:
        """Map from parameter space to the family's reference domain."""
        family = self.family
        if family is BasisFamily.LEGENDRE:
            return AffineMap(
                tuple(0.5 * (m.low + m.high) for m in self.marginals),
                tuple(0.5 * (m.high - m.low) for m in self.marginals),
            )
        return AffineMap(tuple(m.mean for m in self.marginals), tuple(m.std for m in self.marginals))

    def to_dict(self):
        return {"marginals": [m.to_dict() for m in self.marginals]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(marginal_from_dict(m) for m in d["marginals"]))


@dataclass(frozen=True)
class KnownSigma:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise InputError("noise standard deviation must be positive")

    def to_dict(self):
        return {"kind": "known", "sigma": self.sigma}


@dataclass(frozen=True)
class HierarchicalSigma:
    """Inverse-Gamma(shape, scale) prior on the noise variance.

    The sampler carries ``s = log sigma^2`` as an extra state coordinate.
    """

    shape: float = 1e-3
    scale: float = 1e-3

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise InputError("inverse-Gamma parameters must be positive")

    def log_prior(self, log_var: float) -> float:
        # IG density in sigma^2 times the Jacobian d(sigma^2)/ds = exp(s).
        a, b = self.shape, self.scale
        return a * math.log(b) - gammaln(a) - a * log_var - b * math.exp(-log_var)

    def to_dict(self):
        return {"kind": "hierarchical", "shape": self.shape, "scale": self.scale}


def noise_from_dict(d):
    kind = d.get("kind", "known")
    if kind == "known":
        return KnownSigma(float(d["sigma"]))
    if kind == "hierarchical":
        return HierarchicalSigma(float(d.get("shape", 1e-3)), float(d.get("scale", 1e-3)))
    raise InputError(f"unknown noise kind {kind!r}")


@dataclass
class InverseProblem:
    """Forward model, prior, observed data and noise model.

    ``model`` is the high-fidelity forward map.  ``surrogate`` optionally
    holds a cheap approximation used when a posterior is requested with
    ``use_surrogate=True``.
    """

    model: object
    prior: PriorSpec
    data: np.ndarray
    noise: object
    surrogate: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (self.model.n_d,):
            raise InputError(f"data length {self.data.shape} does not match model n_d={self.model.n_d}")
        if self.prior.dimension != self.model.n_z:
            raise InputError("prior dimension does not match model n_z")

    @property
    def n_z(self):
        return self.model.n_z

    @property
    def n_d(self):
        return self.model.n_d

    @property
    def hierarchical(self):
        return isinstance(self.noise, HierarchicalSigma)

    @property
    def state_dim(self):
        return self.n_z + (1 if self.hierarchical else 0)

    def parameters(self, state):
        """The forward-model part of a sampler state."""
        return np.asarray(state, dtype=float)[: self.n_z]

    def sigma(self, state=None):
        if self.hierarchical:
            if state is None:
                raise InputError("hierarchical noise needs a state carrying log sigma^2")
            return math.exp(0.5 * float(state[self.n_z]))
        return self.noise.sigma


def potential(problem: InverseProblem, forward_output, sigma) -> float:
    """Data misfit ``||d - G(z)||^2 / (2 sigma^2)``."""
    if not sigma > 0:
        raise InputError("sigma must be positive")
    r = problem.data - np.asarray(forward_output, dtype=float)
    return float(r @ r) / (2.0 * sigma * sigma)


def log_likelihood(problem: InverseProblem, forward_output, sigma) -> float:
    """I.i.d. Gaussian log-likelihood of the data given model output."""
    if not sigma > 0:
        raise InputError("sigma must be positive")
    return -problem.n_d * (math.log(sigma) + 0.5 * LOG_2PI) - potential(problem, forward_output, sigma)


def log_prior(problem: InverseProblem, state) -> float:
    state = np.asarray(state, dtype=float)
    lp = problem.prior.log_density(state[: problem.n_z])
    if problem.hierarchical and lp > -math.inf:
        lp += problem.noise.log_prior(float(state[problem.n_z]))
    return lp


def log_posterior_from_output(problem: InverseProblem, state, forward_output, lp=None) -> float:
    """Unnormalised log posterior when ``G(z)`` is already known."""
    if lp is None:
        lp = log_prior(problem, state)
    if lp == -math.inf:
        return -math.inf
    return lp + log_likelihood(problem, forward_output, problem.sigma(state))


def log_posterior(problem: InverseProblem, state, use_surrogate=False, surrogate=None) -> float:
    """Unnormalised log posterior; ``-inf`` outside the prior support.

    ``state`` is ``z`` or, for hierarchical noise, ``(z, log sigma^2)``.
    With ``use_surrogate`` the forward map is replaced by ``surrogate``
    (default ``problem.surrogate``).
    """
    state = np.asarray(state, dtype=float)
    if state.shape != (problem.state_dim,):
        raise InputError(f"state must have length {problem.state_dim}")
    lp = log_prior(problem, state)
    if lp == -math.inf:
        return -math.inf
    if use_surrogate:
        fwd = surrogate if surrogate is not None else problem.surrogate
        if fwd is None:
            raise InputError("no surrogate attached to the problem")
    else:
        fwd = problem.model
    return log_posterior_from_output(problem, state, fwd(problem.parameters(state)), lp)
