"""Elliptic permeability problem with an RBF-parameterised coefficient.

``-div(kappa grad u) = f`` on the unit square, ``u = 0`` on the boundary,
``kappa(x) = sum_i kappa_i exp(-|x - x_i|^2 / (2 * 0.15^2))`` and
``f = 100 sin(pi x1) sin(pi x2)``.  The five-point conservative scheme
uses harmonic means of nodal ``kappa`` as face transmissibilities.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import InputError, NumericalError
from .base import ForwardModel
from .fractional import bilinear_matrix, sensor_grid

DEFAULT_CENTERS = sensor_grid(3, 0.2, 0.8)


def default_source(x1, x2):
    return 100.0 * np.sin(np.pi * x1) * np.sin(np.pi * x2)


class EllipticRbfModel(ForwardModel):
    """Sensor values of ``u`` as a function of log RBF weights ``theta``.

    :meth:`evaluate` takes ``theta = log(kappa_i)``; :meth:`solve` takes the
    positive weights themselves.
    """

    def __init__(self, mesh=33, centers=None, width=0.15, sensors=None, source_scale=1.0):
        if mesh < 3:
            raise InputError("mesh must have at least 3 nodes per side")
        self.mesh = int(mesh)
        self.centers = DEFAULT_CENTERS if centers is None else np.asarray(centers, dtype=float).reshape(-1, 2)
        self.width = float(width)
        self.sensors = sensor_grid(9, 0.1, 0.9) if sensors is None else np.asarray(sensors, dtype=float).reshape(-1, 2)
        self.source_scale = float(source_scale)
        self.n_z = len(self.centers)
        self.n_d = len(self.sensors)

        self.nodes = np.linspace(0.0, 1.0, self.mesh)
        X1, X2 = np.meshgrid(self.nodes, self.nodes, indexing="ij")
        d2 = (X1.ravel()[:, None] - self.centers[:, 0]) ** 2 + (X2.ravel()[:, None] - self.centers[:, 1]) ** 2
        self.rbf = np.exp(-0.5 * d2 / self.width**2)  # (mesh^2, n_centers)
        self.source = self.source_scale * default_source(X1, X2)
        self.interp = bilinear_matrix(self.nodes, self.sensors)

        n = self.mesh - 2
        I, J = np.meshgrid(np.arange(1, self.mesh - 1), np.arange(1, self.mesh - 1), indexing="ij")
        self._interior = (I.ravel(), J.ravel())
        self._n_interior = n

    def config(self):
        return {
            "mesh": self.mesh,
            "centers": self.centers.tolist(),
            "width": self.width,
            "sensors": self.sensors.tolist(),
            "source_scale": self.source_scale,
        }

    def refined(self, factor: int) -> "EllipticRbfModel":
        cfg = self.config()
        cfg["mesh"] = (self.mesh - 1) * int(factor) + 1
        return EllipticRbfModel(**cfg)

    @property
    def h(self):
        return 1.0 / (self.mesh - 1)

    def kappa_field(self, kappa_weights) -> np.ndarray:
        """Nodal permeability ``(mesh, mesh)``."""
        return (self.rbf @ np.asarray(kappa_weights, dtype=float)).reshape(self.mesh, self.mesh)

    def operator(self, kappa) -> sp.csc_matrix:
        """Stiffness matrix on interior nodes (scaled by ``1/h^2``)."""
        K = np.asarray(kappa, dtype=float)
        if not np.all(K > 0):
            raise InputError("permeability must be strictly positive")
        tx = 2.0 * K[:-1, :] * K[1:, :] / (K[:-1, :] + K[1:, :])  # face (i+1/2, j)
        ty = 2.0 * K[:, :-1] * K[:, 1:] / (K[:, :-1] + K[:, 1:])  # face (i, j+1/2)
        n = self._n_interior
        I, J = self._interior
        row = (I - 1) * n + (J - 1)
        east, west = tx[I, J], tx[I - 1, J]
        north, south = ty[I, J], ty[I, J - 1]
        rows = [row]
        cols = [row]
        vals = [east + west + north + south]
        for mask, nb, t in (
            (I < self.mesh - 2, row + n, east),
            (I > 1, row - n, west),
            (J < self.mesh - 2, row + 1, north),
            (J > 1, row - 1, south),
        ):
            rows.append(row[mask])
            cols.append(nb[mask])
            vals.append(-t[mask])
        A = sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n * n, n * n)
        )
        return A / self.h**2

    def solve_field(self, kappa_field, source=None) -> np.ndarray:
        """Nodal solution ``(mesh, mesh)`` for a given nodal permeability field."""
        f = self.source if source is None else np.asarray(source, dtype=float).reshape(self.mesh, self.mesh)
        A = self.operator(kappa_field)
        I, J = self._interior
        rhs = f[I, J]
        u_int = spla.spsolve(A, rhs)
        resid = np.linalg.norm(A @ u_int - rhs) / max(np.linalg.norm(rhs), 1e-300)
        if not np.all(np.isfinite(u_int)) or resid > 1e-8:
            raise NumericalError(f"elliptic solve failed (relative residual {resid:.3g})", residual=resid)
        u = np.zeros((self.mesh, self.mesh))
        u[I, J] = u_int
        return u

    def solve(self, kappa_weights) -> np.ndarray:
        """Sensor values for positive RBF weights."""
        w = np.asarray(kappa_weights, dtype=float)
        if w.shape != (self.n_z,) or not np.all(w > 0):
            raise InputError("RBF weights must be positive")
        return self.interp @ self.solve_field(self.kappa_field(w)).ravel()

    def _evaluate(self, theta):
        return self.solve(np.exp(theta))


def elliptic_solve(model: EllipticRbfModel, kappa_weights) -> np.ndarray:
    return model.solve(kappa_weights)
