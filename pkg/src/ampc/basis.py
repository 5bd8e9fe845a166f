"""Orthonormal polynomial families and total-degree tensor bases.

Univariate members are evaluated by their three-term recurrence:

* ``LEGENDRE``: orthonormal on [-1, 1] under the uniform density 1/2,
  ``p_n = sqrt(2n + 1) P_n``.
* ``HERMITE``: orthonormal on R under the standard normal density,
  ``h_n = He_n / sqrt(n!)`` (probabilists' convention).

Multivariate basis functions are tensor products indexed by a
:class:`MultiIndexSet`, ordered by total degree and then in descending
lexicographic order within a degree (``ORDERING_RULE``).
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, InputError

ORDERING_RULE = "graded-lex-desc-v1"

# Enumerating more indices than this is not useful at any problem size we
# handle, and would exhaust memory long before int64 overflows.
MAX_CARDINALITY = 5_000_000


class BasisFamily(str, enum.Enum):
    LEGENDRE = "legendre_uniform"
    HERMITE = "hermite_gaussian"

    @property
    def support(self):
        if self is BasisFamily.LEGENDRE:
            return (-1.0, 1.0)
        return (-math.inf, math.inf)

    def density(self, x):
        """Reference probability density of the family at ``x``."""
        x = np.asarray(x, dtype=float)
        if self is BasisFamily.LEGENDRE:
            return np.where(np.abs(x) <= 1.0, 0.5, 0.0)
        return np.exp(-0.5 * x**2) / math.sqrt(2.0 * math.pi)

    def gauss_rule(self, n_nodes):
        """Gauss quadrature nodes and weights normalised to the density."""
        if self is BasisFamily.LEGENDRE:
            x, w = np.polynomial.legendre.leggauss(n_nodes)
            return x, w / 2.0
        x, w = np.polynomial.hermite_e.hermegauss(n_nodes)
        return x, w / math.sqrt(2.0 * math.pi)


def univariate(family: BasisFamily, degree: int, x) -> np.ndarray:
    """Evaluate orthonormal members 0..degree at ``x``.

    Returns an array of shape ``x.shape + (degree + 1,)``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (degree + 1,))
    out[..., 0] = 1.0
    if degree == 0:
        return out
    if family is BasisFamily.LEGENDRE:
        out[..., 1] = math.sqrt(3.0) * x
        for n in range(1, degree):
            a_next = (n + 1) / math.sqrt(4.0 * (n + 1) ** 2 - 1.0)
            a_n = n / math.sqrt(4.0 * n**2 - 1.0)
            out[..., n + 1] = (x * out[..., n] - a_n * out[..., n - 1]) / a_next
    elif family is BasisFamily.HERMITE:
        out[..., 1] = x
        for n in range(1, degree):
            out[..., n + 1] = (x * out[..., n] - math.sqrt(n) * out[..., n - 1]) / math.sqrt(n + 1)
    else:
        raise InputError(f"unknown basis family {family!r}")
    return out


@dataclass(frozen=True)
class MultiIndexSet:
    """Ordered total-degree multi-index set.

    ``indices`` is an ``(M, dimension)`` integer array; row ``k`` is the
    multi-index of the ``k``-th basis function.
    """

    dimension: int
    order: int
    indices: np.ndarray = field(repr=False)
    _position: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "_position", {tuple(int(v) for v in row): k for k, row in enumerate(idx)})

    def __len__(self):
        return self.indices.shape[0]

    def __iter__(self):
        return (tuple(int(v) for v in row) for row in self.indices)

    def __contains__(self, index):
        return tuple(int(v) for v in index) in self._position

    def __eq__(self, other):
        if not isinstance(other, MultiIndexSet):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and self.order == other.order
            and np.array_equal(self.indices, other.indices)
        )

    def __hash__(self):
        return hash((self.dimension, self.order, len(self)))

    @property
    def cardinality(self):
        return len(self)

    def position(self, index) -> int:
        return self._position[tuple(int(v) for v in index)]

    def is_subset_of(self, other: "MultiIndexSet") -> bool:
        return self.dimension == other.dimension and all(m in other for m in self)

    def positions_in(self, other: "MultiIndexSet") -> np.ndarray:
        """Row positions of this set's indices inside ``other``."""
        return np.array([other.position(m) for m in self], dtype=np.int64)

    def total_degrees(self) -> np.ndarray:
        return self.indices.sum(axis=1)


def total_degree_cardinality(n_z: int, order: int) -> int:
    return math.comb(n_z + order, n_z)


def _compositions(n_z, degree):
    # All n_z-tuples of non-negative ints summing to degree, in descending
    # lexicographic order.
    if n_z == 1:
        yield (degree,)
        return
    for first in range(degree, -1, -1):
        for rest in _compositions(n_z - 1, degree - first):
            yield (first,) + rest


def total_degree_index_set(n_z: int, order: int) -> MultiIndexSet:
    """All multi-indices with total degree at most ``order``."""
    if int(n_z) != n_z or n_z < 1:
        raise InputError(f"n_z must be a positive integer, got {n_z}")
    if int(order) != order or order < 0:
        raise InputError(f"order must be a non-negative integer, got {order}")
    n_z, order = int(n_z), int(order)
    card = total_degree_cardinality(n_z, order)
    if card > MAX_CARDINALITY:
        raise CapacityError(
            f"total-degree set with n_z={n_z}, N={order} has {card} elements "
            f"(limit {MAX_CARDINALITY})"
        )
    rows = list(itertools.chain.from_iterable(_compositions(n_z, d) for d in range(order + 1)))
    return MultiIndexSet(n_z, order, np.array(rows, dtype=np.int64).reshape(card, n_z))


def _as_points(z, n_z):
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    if z.shape[-1] != n_z:
        raise InputError(f"point dimension {z.shape[-1]} does not match index dimension {n_z}")
    if not np.all(np.isfinite(z)):
        raise InputError("basis evaluation requires finite points")
    return z, single


def vandermonde(family: BasisFamily, index_set: MultiIndexSet, points) -> np.ndarray:
    """Basis matrix with entries ``Phi[i, k] = Phi_k(points[i])``."""
    z, _ = _as_points(points, index_set.dimension)
    uni = univariate(family, index_set.order, z)  # (Q, n_z, N+1)
    idx = index_set.indices
    cols = np.arange(index_set.dimension)
    # uni[:, cols, idx] -> (Q, M, n_z)
    return np.prod(uni[:, cols, idx], axis=-1)


def evaluate_basis_row(family: BasisFamily, index_set: MultiIndexSet, z) -> np.ndarray:
    """One row of the basis matrix at a single point."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise InputError("evaluate_basis_row expects a single point")
    return vandermonde(family, index_set, z)[0]


def evaluate_basis(family: BasisFamily, index, z) -> float:
    """Value of the tensor-product basis function ``index`` at ``z``."""
    index = np.asarray(index, dtype=np.int64)
    if np.any(index < 0):
        raise InputError("multi-index entries must be non-negative")
    z, _ = _as_points(z, index.size)
    uni = univariate(family, int(index.max(initial=0)), z[0])
    return float(np.prod(uni[np.arange(index.size), index]))


@dataclass(frozen=True)
class AffineMap:
    """Coordinate-wise map ``x -> (x - loc) / scale`` into the basis domain."""

    loc: tuple
    scale: tuple

    def __post_init__(self):
        object.__setattr__(self, "loc", tuple(float(v) for v in self.loc))
        object.__setattr__(self, "scale", tuple(float(v) for v in self.scale))
        if len(self.loc) != len(self.scale):
            raise InputError("loc and scale must have equal length")
        if any(s <= 0 for s in self.scale):
            raise InputError("affine scales must be positive")

    @classmethod
    def identity(cls, n):
        return cls((0.0,) * n, (1.0,) * n)

    @property
    def dimension(self):
        return len(self.loc)

    def to_reference(self, x):
        return (np.asarray(x, dtype=float) - np.array(self.loc)) / np.array(self.scale)

    def from_reference(self, xi):
        return np.asarray(xi, dtype=float) * np.array(self.scale) + np.array(self.loc)

    def to_dict(self):
        return {"loc": list(self.loc), "scale": list(self.scale)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["loc"]), tuple(d["scale"]))
