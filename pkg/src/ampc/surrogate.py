"""PC surrogates and the additive multi-fidelity correction."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .basis import (
    ORDERING_RULE,
    AffineMap,
    BasisFamily,
    MultiIndexSet,
    total_degree_index_set,
    univariate,
    vandermonde,
)
from .design import OVERSAMPLING, DesignSet, compute_weights
from .errors import DegenerateDesignError, InputError
from .models.base import LedgeredModel
from .regression import fit_weighted_lsq

FORMAT = "ampc-pc-surrogate"
FORMAT_VERSION = 1


@dataclass
class PcSurrogate:
    """``sum_m c_m Phi_m(T(z))`` with ``T`` the prior's affine map."""

    family: BasisFamily
    index_set: MultiIndexSet
    coefficients: np.ndarray
    prior_map: AffineMap
    provenance: dict = field(default_factory=dict)
    cost_class = "cheap"

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if c.shape[0] != len(self.index_set):
            raise InputError(f"{c.shape[0]} coefficient rows for {len(self.index_set)} basis functions")
        if self.prior_map.dimension != self.index_set.dimension:
            raise InputError("prior map dimension does not match the index set")
        self.coefficients = c
        self._loc = np.array(self.prior_map.loc)
        self._scale = np.array(self.prior_map.scale)
        self._cols = np.arange(self.index_set.dimension)

    @property
    def n_z(self):
        return self.index_set.dimension

    @property
    def n_d(self):
        return self.coefficients.shape[1]

    @property
    def order(self):
        return self.index_set.order

    @property
    def generation(self):
        return int(self.provenance.get("generation", 0))

    def evaluate(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.n_z,):
            raise InputError(f"surrogate expects {self.n_z} parameters, got shape {z.shape}")
        uni = univariate(self.family, self.order, (z - self._loc) / self._scale)
        row = np.prod(uni[self._cols, self.index_set.indices], axis=1)
        return row @ self.coefficients

    __call__ = evaluate

    def evaluate_batch(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if Z.shape[1] != self.n_z:
            raise InputError("point dimension mismatch")
        return vandermonde(self.family, self.index_set, (Z - self._loc) / self._scale) @ self.coefficients

    def coefficient_of(self, index) -> np.ndarray:
        return self.coefficients[self.index_set.position(index)]

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "family": self.family.value,
            "n_z": self.n_z,
            "n_d": self.n_d,
            "N": self.order,
            "ordering": ORDERING_RULE,
            "prior_map": self.prior_map.to_dict(),
            "terms": [
                {"index": list(m), "coefficients": self.coefficients[k].tolist()}
                for k, m in enumerate(self.index_set)
            ],
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d) -> "PcSurrogate":
        if d.get("format") != FORMAT:
            raise InputError(f"not a surrogate file (format={d.get('format')!r})")
        if d.get("ordering") != ORDERING_RULE:
            raise InputError(f"unsupported index ordering {d.get('ordering')!r}")
        index_set = total_degree_index_set(d["n_z"], d["N"])
        coef = np.zeros((len(index_set), d["n_d"]))
        seen = set()
        for term in d["terms"]:
            key = tuple(term["index"])
            pos = index_set.position(key)
            coef[pos] = term["coefficients"]
            seen.add(key)
        if len(seen) != len(index_set):
            raise InputError("surrogate file does not list every multi-index")
        return cls(BasisFamily(d["family"]), index_set, coef, AffineMap.from_dict(d["prior_map"]), d.get("provenance", {}))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "PcSurrogate":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def evaluate(surrogate: PcSurrogate, z) -> np.ndarray:
    return surrogate.evaluate(z)


def merge(low: PcSurrogate, correction: PcSurrogate) -> PcSurrogate:
    """Add correction coefficients onto the matching low-fidelity terms."""
    if low.family is not correction.family or low.prior_map != correction.prior_map:
        raise InputError("low-fidelity and correction surrogates use different bases")
    if low.n_d != correction.n_d:
        raise InputError("output dimensions differ")
    if not correction.index_set.is_subset_of(low.index_set):
        raise InputError("correction index set is not a subset of the low-fidelity index set")
    coef = low.coefficients.copy()
    coef[correction.index_set.positions_in(low.index_set)] += correction.coefficients
    prov = {
        "kind": "multifidelity",
        "generation": low.generation + 1,
        "base_kind": low.provenance.get("kind"),
        "correction_order": correction.order,
    }
    return PcSurrogate(low.family, low.index_set, coef, low.prior_map, prov)


@dataclass
class MultiFidelitySurrogate:
    low: PcSurrogate
    correction: PcSurrogate
    merged: PcSurrogate
    points: np.ndarray
    generation: int

    def __post_init__(self):
        if self.correction.order > self.low.order:
            raise InputError("correction order exceeds low-fidelity order")
        if not self.correction.index_set.is_subset_of(self.low.index_set):
            raise InputError("correction index set is not a subset of the low-fidelity index set")

    @property
    def n_hf_evaluations(self):
        return len(self.points)

    def evaluate(self, z):
        return self.merged.evaluate(z)

    __call__ = evaluate


def correction_design_size(n_z: int, N_C: int) -> int:
    return OVERSAMPLING * math.comb(N_C + n_z, n_z)


def local_points(center, radius, n_points, rng, lower=None, upper=None) -> np.ndarray:
    """Uniform draws from the sup-norm ball around ``center``, clamped to a box."""
    center = np.asarray(center, dtype=float)
    x = center + radius * rng.uniform(-1.0, 1.0, size=(n_points, center.size))
    if lower is not None or upper is not None:
        x = np.clip(x, lower if lower is not None else -np.inf, upper if upper is not None else np.inf)
    return x


def build_multifidelity(
    low: PcSurrogate,
    high,
    N_C: int,
    center,
    radius: float,
    seed,
    lower=None,
    upper=None,
    category="refinement",
) -> MultiFidelitySurrogate:
    """Correct ``low`` with a degree-``N_C`` fit of ``high - low`` near ``center``.

    ``2 * C(N_C + n_z, n_z)`` points are drawn uniformly from the sup-norm
    ball of ``radius`` around ``center`` (clamped to ``[lower, upper]``),
    ``high`` is evaluated at each and the difference fitted on the global
    basis restricted to total degree ``N_C``.
    """
    if N_C > low.order:
        raise InputError(f"correction order {N_C} exceeds low-fidelity order {low.order}")
    if N_C < 0:
        raise InputError("correction order must be non-negative")
    if not radius > 0:
        raise InputError("refinement radius must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n_z = low.n_z
    index_set = total_degree_index_set(n_z, N_C)
    x = local_points(center, radius, correction_design_size(n_z, N_C), rng, lower, upper)
    if len(np.unique(x, axis=0)) < len(index_set):
        raise DegenerateDesignError(
            f"local design around {np.asarray(center).tolist()} collapsed to "
            f"{len(np.unique(x, axis=0))} distinct points",
            rank=len(np.unique(x, axis=0)),
            n_columns=len(index_set),
        )
    if isinstance(high, LedgeredModel):
        hv = high.evaluate_batch(x, category=category)
    else:
        hv = high.evaluate_batch(x)
    diff = hv - low.evaluate_batch(x)
    xi = low.prior_map.to_reference(x)
    design = DesignSet(xi, compute_weights(low.family, index_set, xi), low.family, N_C)
    report = fit_weighted_lsq(low.family, index_set, design, diff)
    correction = PcSurrogate(
        low.family,
        index_set,
        report.coefficients,
        low.prior_map,
        {
            "kind": "correction",
            "center": np.asarray(center, dtype=float).tolist(),
            "radius": float(radius),
            "design_size": len(x),
            "residual_norm": report.residual_norm.tolist(),
            "condition_estimate": report.condition_estimate,
        },
    )
    merged = merge(low, correction)
    return MultiFidelitySurrogate(low, correction, merged, x, merged.generation)


def with_provenance(surrogate: PcSurrogate, **extra) -> PcSurrogate:
    return replace(surrogate, provenance={**surrogate.provenance, **extra})
