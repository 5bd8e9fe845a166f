"""Posterior-accuracy metrics and chain summaries.

Densities on up to three coordinates are compared by trapezoidal
quadrature on a shared tensor grid; higher-dimensional posteriors are
assessed through the feasible-set measure and conditional means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.integrate import trapezoid

from .errors import AbsoluteContinuityError, InputError
from .models.base import LedgeredModel, ledgered

MAX_GRID_DIM = 3


def _integrate(values, axes):
    out = values
    for ax in reversed(axes):
        out = trapezoid(out, ax, axis=-1)
    return float(out)


def _log_integrate(log_values, axes):
    finite = log_values[np.isfinite(log_values)]
    if finite.size == 0:
        return -math.inf
    shift = finite.max()
    total = _integrate(np.exp(log_values - shift), axes)
    return math.log(total) + shift if total > 0 else -math.inf


@dataclass
class GridPosterior:
    """Unnormalised log density tabulated on a tensor grid.

    Parameters
    ----------
    axes : sequence of 1-D arrays
        Strictly increasing nodes per coordinate; at most three axes.
    log_density : ndarray
        ``log_density[i, j, ...]`` at ``(axes[0][i], axes[1][j], ...)``;
        ``-inf`` marks zero density.
    """

    axes: tuple
    log_density: np.ndarray

    def __post_init__(self):
        self.axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        if not 1 <= len(self.axes) <= MAX_GRID_DIM:
            raise InputError(f"grid quadrature supports 1 to {MAX_GRID_DIM} coordinates, got {len(self.axes)}")
        for a in self.axes:
            if a.ndim != 1 or a.size < 2 or np.any(np.diff(a) <= 0):
                raise InputError("grid axes must be strictly increasing with at least two nodes")
        self.log_density = np.asarray(self.log_density, dtype=float)
        shape = tuple(a.size for a in self.axes)
        if self.log_density.shape != shape:
            raise InputError(f"log density shape {self.log_density.shape} does not match grid {shape}")
        self.log_gamma = _log_integrate(self.log_density, self.axes)
        if not math.isfinite(self.log_gamma):
            raise InputError("density has no mass on the grid")

    @property
    def gamma(self) -> float:
        return math.exp(self.log_gamma)

    @property
    def log_normalized(self) -> np.ndarray:
        return self.log_density - self.log_gamma

    @property
    def density(self) -> np.ndarray:
        return np.exp(self.log_normalized)

    @property
    def shape(self):
        return self.log_density.shape

    def same_grid(self, other: "GridPosterior") -> bool:
        return len(self.axes) == len(other.axes) and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self.axes, other.axes)
        )

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def mass(self) -> float:
        return _integrate(self.density, self.axes)

    def mean(self) -> np.ndarray:
        p = self.density
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.array([_integrate(p * m, self.axes) for m in mesh])

    def marginal(self, i: int) -> "GridPosterior":
        p = self.density
        others = [k for k in range(len(self.axes)) if k != i]
        for k in reversed(others):
            p = trapezoid(p, self.axes[k], axis=k)
        with np.errstate(divide="ignore"):
            return GridPosterior((self.axes[i],), np.log(p))

    @classmethod
    def from_function(cls, log_fn, axes) -> "GridPosterior":
        """Tabulate ``log_fn(point)`` over the tensor grid."""
        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        vals = np.array([log_fn(p) for p in pts], dtype=float)
        return cls(axes, vals.reshape(mesh[0].shape))

    @classmethod
    def from_samples(cls, samples, axes) -> "GridPosterior":
        """Histogram density with one bin centred on each grid node."""
        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        samples = np.asarray(samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.shape[1] != len(axes):
            raise InputError("sample dimension does not match the grid")
        edges = [np.r_[a[0] - 0.5 * (a[1] - a[0]), 0.5 * (a[1:] + a[:-1]), a[-1] + 0.5 * (a[-1] - a[-2])] for a in axes]
        counts, _ = np.histogramdd(samples, bins=edges)
        widths = np.meshgrid(*[np.diff(e) for e in edges], indexing="ij")
        vol = np.prod(widths, axis=0)
        with np.errstate(divide="ignore"):
            return cls(axes, np.log(counts / vol))


def _check_pair(approx: GridPosterior, exact: GridPosterior):
    if not approx.same_grid(exact):
        raise InputError("densities must share the same grid")


def kl_divergence(approx: GridPosterior, exact: GridPosterior) -> float:
    """``int p_approx log(p_approx / p_exact)`` by trapezoidal quadrature."""
    _check_pair(approx, exact)
    la, le = approx.log_normalized, exact.log_normalized
    support = np.isfinite(la)
    bad = support & ~np.isfinite(le)
    if np.any(bad):
        raise AbsoluteContinuityError(
            f"approximate density is positive at {int(bad.sum())} grid nodes where the reference vanishes"
        )
    integrand = np.zeros_like(la)
    integrand[support] = np.exp(la[support]) * (la[support] - le[support])
    return _integrate(integrand, approx.axes)


def hellinger_distance(approx: GridPosterior, exact: GridPosterior) -> float:
    """``sqrt(0.5 * int (sqrt p - sqrt q)^2)``, clipped to ``[0, 1]``."""
    _check_pair(approx, exact)
    diff = np.exp(0.5 * approx.log_normalized) - np.exp(0.5 * exact.log_normalized)
    h2 = 0.5 * _integrate(diff * diff, approx.axes)
    return float(min(max(math.sqrt(max(h2, 0.0)), 0.0), 1.0))


@dataclass(frozen=True)
class FeasibleSetEstimate:
    estimate: float
    stderr: float
    n_samples: int
    epsilon: float


def feasible_set_measure(problem, surrogate, epsilon: float, posterior_samples, category="feasibility"):
    """Posterior mass where ``||G(z) - G~(z)||_inf > epsilon``, estimated from samples.

    Each sample costs one (ledgered) high-fidelity evaluation.
    """
    samples = np.atleast_2d(np.asarray(posterior_samples, dtype=float))
    if samples.size == 0 or samples.shape[0] == 0:
        raise InputError("no posterior samples supplied")
    hf = ledgered(problem.model)
    n_z = problem.n_z
    outside = 0
    for s in samples:
        z = s[:n_z]
        hv = hf.evaluate(z, category=category) if isinstance(hf, LedgeredModel) else hf.evaluate(z)
        if np.max(np.abs(hv - surrogate.evaluate(z))) > epsilon:
            outside += 1
    n = samples.shape[0]
    p = outside / n
    return FeasibleSetEstimate(p, math.sqrt(p * (1.0 - p) / n), n, float(epsilon))


def autocorrelation(x) -> np.ndarray:
    """Normalised autocorrelation at all lags via FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    y = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(y, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n]
    if acov[0] <= 0:
        return np.r_[1.0, np.zeros(n - 1)]
    return acov / acov[0]


def ess(x) -> float:
    """Effective sample size with Geyer's initial positive sequence.

    A chain with zero variance is reported as ESS 1.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2 or np.ptp(x) == 0:
        return 1.0
    rho = autocorrelation(x)
    n_pairs = n // 2
    pairs = rho[: 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    stop = np.flatnonzero(pairs <= 0)
    pairs = pairs[: stop[0]] if stop.size else pairs
    # Initial monotone sequence: pair sums may not increase.
    pairs = np.minimum.accumulate(pairs)
    tau = -1.0 + 2.0 * pairs.sum()
    return float(n / max(tau, 1e-12))


def total_variation(a, b, bins=50, range_=None) -> float:
    """Histogram total-variation distance between two 1-D samples."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if range_ is None:
        range_ = (min(a.min(), b.min()), max(a.max(), b.max()))
        if range_[0] == range_[1]:
            return 0.0
    pa, _ = np.histogram(a, bins=bins, range=range_)
    pb, _ = np.histogram(b, bins=bins, range=range_)
    return 0.5 * float(np.abs(pa / a.size - pb / b.size).sum())


def relative_l2(a, b) -> float:
    """``||a - b|| / ||b||``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def post_burn_in(states, burn_in_fraction=0.4) -> np.ndarray:
    if not 0.0 <= burn_in_fraction < 1.0:
        raise InputError("burn-in fraction must lie in [0, 1)")
    states = np.asarray(states, dtype=float)
    return states[int(math.floor(burn_in_fraction * len(states))) :]


def chain_summary(chain, burn_in_fraction=0.4, bins=50, credible=0.95) -> dict:
    """Post-burn-in moments, credible intervals, ESS and histograms.

    ``chain`` is a :class:`~ampc.mcmc.Chain` or a bare ``(n, d)`` array.
    The acceptance rate always covers the whole chain.
    """
    if hasattr(chain, "states"):
        states, names = chain.states, list(chain.names)
        acceptance = chain.acceptance_rate
    else:
        states = np.atleast_2d(np.asarray(chain, dtype=float))
        if states.shape[0] == 1 and states.shape[1] > 1 and np.ndim(chain) == 1:
            states = states.T
        names = [f"x{i + 1}" for i in range(states.shape[1])]
        acceptance = None
    if len(states) == 0:
        raise InputError("empty chain")
    kept = post_burn_in(states, burn_in_fraction)
    lo, hi = 0.5 * (1.0 - credible), 0.5 * (1.0 + credible)
    hist1 = {}
    for i, name in enumerate(names):
        counts, edges = np.histogram(kept[:, i], bins=bins)
        hist1[name] = {"edges": edges.tolist(), "counts": counts.tolist()}
    hist2 = {}
    for i, j in combinations(range(len(names)), 2):
        counts, ex, ey = np.histogram2d(kept[:, i], kept[:, j], bins=bins)
        hist2[f"{names[i]}|{names[j]}"] = {"x_edges": ex.tolist(), "y_edges": ey.tolist(), "counts": counts.tolist()}
    return {
        "names": names,
        "n_total": int(len(states)),
        "n_used": int(len(kept)),
        "burn_in_fraction": burn_in_fraction,
        "acceptance_rate": acceptance,
        "means": kept.mean(axis=0).tolist(),
        "stds": kept.std(axis=0).tolist(),
        "credible_level": credible,
        "credible_intervals": np.quantile(kept, [lo, hi], axis=0).T.tolist(),
        "ess": [ess(kept[:, i]) for i in range(kept.shape[1])],
        "histograms_1d": hist1,
        "histograms_2d": hist2,
    }


def histogram_rows(summary: dict):
    """Flatten 1-D histograms to ``(coordinate, left, right, count)`` rows."""
    rows = []
    for name, h in summary["histograms_1d"].items():
        e = h["edges"]
        for k, c in enumerate(h["counts"]):
            rows.append((name, e[k], e[k + 1], c))
    return rows


def conditional_mean_field(model, samples) -> np.ndarray:
    """Posterior mean of the nodal permeability ``kappa(x) = sum_i exp(theta_i) phi_i(x)``."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))[:, : model.n_z]
    # kappa is linear in exp(theta), so the mean field is the field of the mean weights.
    return model.kappa_field(np.exp(samples).mean(axis=0))
