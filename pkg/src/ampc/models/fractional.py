"""Time-fractional heat equation with a moving Gaussian source.

Solves ``D_t^alpha u - lap(u) = A e^{-t} exp(-|Z - x|^2 / (2 w^2))`` on the
unit square with zero-flux boundaries and ``u(., 0) = 0``.  ``D_t^alpha`` is
the Caputo derivative, discretised with the L1 scheme; space uses a
cell-centred five-point Laplacian with reflecting ghost cells.  Sensor
values are bilinear interpolants of the cell-centred field.
"""

from __future__ import annotations

import math
import threading

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import InputError
from .base import ForwardModel


def l1_weights(alpha: float, n: int) -> np.ndarray:
    """``b_j = (j + 1)^(1 - alpha) - j^(1 - alpha)`` for ``j = 0..n-1``."""
    j = np.arange(n, dtype=float)
    b = (j + 1.0) ** (1.0 - alpha) - j ** (1.0 - alpha)
    b[0] = 1.0  # 0**0 == 1 would zero this at alpha = 1
    return b


def neumann_laplacian(P: int) -> sp.csc_matrix:
    """Negative Laplacian on P x P unit-square cells, zero-flux boundary.

    Symmetric positive semi-definite; unknowns ordered ``k = i * P + j``
    with ``i`` along ``x``.
    """
    h = 1.0 / P
    main = np.full(P, 2.0)
    main[0] = main[-1] = 1.0
    T = sp.diags([-np.ones(P - 1), main, -np.ones(P - 1)], [-1, 0, 1]) / h**2
    eye = sp.identity(P)
    return (sp.kron(T, eye) + sp.kron(eye, T)).tocsc()


def bilinear_matrix(nodes: np.ndarray, points: np.ndarray) -> sp.csr_matrix:
    """Interpolation weights from a tensor grid with axis ``nodes`` to points.

    Points outside the node range are clamped onto it.
    """
    n = nodes.size
    rows, cols, vals = [], [], []
    for r, (px, py) in enumerate(np.asarray(points, dtype=float)):
        ix, tx = _locate(nodes, px)
        iy, ty = _locate(nodes, py)
        for di, wx in ((0, 1.0 - tx), (1, tx)):
            for dj, wy in ((0, 1.0 - ty), (1, ty)):
                w = wx * wy
                if w != 0.0:
                    rows.append(r)
                    cols.append((ix + di) * n + (iy + dj))
                    vals.append(w)
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(points), n * n))


def _locate(nodes, p):
    p = min(max(p, nodes[0]), nodes[-1])
    i = int(np.searchsorted(nodes, p, side="right")) - 1
    i = min(max(i, 0), nodes.size - 2)
    t = (p - nodes[i]) / (nodes[i + 1] - nodes[i])
    return i, t


def sensor_grid(n_per_side, low=0.0, high=1.0) -> np.ndarray:
    axis = np.linspace(low, high, n_per_side)
    return np.array([(x, y) for x in axis for y in axis])


class FractionalSourceModel(ForwardModel):
    """Sensor readings of the fractional heat equation for a source location.

    ``unknowns="location"`` infers ``Z = (Z1, Z2)`` at fixed ``alpha``;
    ``unknowns="location_alpha"`` infers ``(Z1, Z2, alpha)``.  Outputs are
    ordered time-major: all sensors at the first time, then the next.

    With fixed ``alpha`` the map from the spatial source profile to sensor
    readings is linear and symmetric, so by default it is precomputed once
    (one time march per sensor) and each evaluation is a matrix product.
    """

    def __init__(
        self,
        alpha=0.8,
        mesh=33,
        dt=0.01,
        sensors=None,
        times=(0.25, 0.75),
        unknowns="location",
        source_width=0.1,
        source_amplitude=1.0,
        use_response_operator=True,
    ):
        if unknowns not in ("location", "location_alpha"):
            raise InputError(f"unknowns must be 'location' or 'location_alpha', got {unknowns!r}")
        self._check_alpha(alpha)
        if mesh < 2:
            raise InputError("mesh must have at least 2 cells per side")
        self.alpha = float(alpha)
        self.mesh = int(mesh)
        self.dt = float(dt)
        self.sensors = sensor_grid(3) if sensors is None else np.asarray(sensors, dtype=float).reshape(-1, 2)
        self.times = tuple(float(t) for t in times)
        steps = [t / self.dt for t in self.times]
        if any(abs(s - round(s)) > 1e-9 or round(s) < 1 for s in steps):
            raise InputError("sensor times must be positive multiples of dt")
        self._steps = [int(round(s)) for s in steps]
        self.unknowns = unknowns
        self.source_width = float(source_width)
        self.source_amplitude = float(source_amplitude)
        self.use_response_operator = bool(use_response_operator)
        self.n_z = 2 if unknowns == "location" else 3
        self.n_d = len(self.sensors) * len(self.times)

        P = self.mesh
        self.centers = (np.arange(P) + 0.5) / P
        self.laplacian = neumann_laplacian(P)
        self.interp = bilinear_matrix(self.centers, self.sensors)
        self._lock = threading.Lock()
        self._lu = {}
        self._response = None

    @staticmethod
    def _check_alpha(alpha):
        if not (0.0 < alpha <= 1.0):
            raise InputError(f"fractional order must lie in (0, 1], got {alpha}")

    def config(self):
        return {
            "alpha": self.alpha,
            "mesh": self.mesh,
            "dt": self.dt,
            "sensors": self.sensors.tolist(),
            "times": list(self.times),
            "unknowns": self.unknowns,
            "source_width": self.source_width,
            "source_amplitude": self.source_amplitude,
        }

    def refined(self, factor: int) -> "FractionalSourceModel":
        """Same problem on a mesh with ``(mesh - 1) * factor + 1`` cells per side."""
        cfg = self.config()
        cfg["mesh"] = (self.mesh - 1) * int(factor) + 1
        return FractionalSourceModel(**cfg, use_response_operator=self.use_response_operator)

    def source_profile(self, location) -> np.ndarray:
        """Spatial source factor at the cell centres, flattened."""
        zx, zy = float(location[0]), float(location[1])
        gx = np.exp(-0.5 * ((self.centers - zx) / self.source_width) ** 2)
        gy = np.exp(-0.5 * ((self.centers - zy) / self.source_width) ** 2)
        return self.source_amplitude * np.outer(gx, gy).ravel()

    def _factor(self, alpha):
        with self._lock:
            lu = self._lu.get(alpha)
        if lu is None:
            c0 = self.dt ** (-alpha) / math.gamma(2.0 - alpha)
            n = self.mesh**2
            lu = spla.splu((c0 * sp.identity(n, format="csc") + self.laplacian).tocsc())
            with self._lock:
                if len(self._lu) > 8:
                    self._lu.clear()
                self._lu[alpha] = lu
        return lu

    def march(self, profile, alpha=None) -> list:
        """Fields at each sensor time for source ``e^{-t} * profile``."""
        alpha = self.alpha if alpha is None else float(alpha)
        self._check_alpha(alpha)
        n_max = max(self._steps)
        c0 = self.dt ** (-alpha) / math.gamma(2.0 - alpha)
        b = l1_weights(alpha, n_max)
        lu = self._factor(alpha)
        profile = np.asarray(profile, dtype=float)
        incr = np.zeros((n_max, profile.size))
        u = np.zeros(profile.size)
        fields = {}
        wanted = set(self._steps)
        for k in range(1, n_max + 1):
            rhs = c0 * u + math.exp(-k * self.dt) * profile
            if k > 1:
                rhs -= c0 * (b[1:k] @ incr[k - 2 :: -1])
            u_new = lu.solve(rhs)
            incr[k - 1] = u_new - u
            u = u_new
            if k in wanted:
                fields[k] = u.copy()
        return [fields[s] for s in self._steps]

    def solve_fields(self, params) -> list:
        """Full cell-centred fields ``(P, P)`` at each sensor time."""
        params = np.asarray(params, dtype=float)
        alpha = params[2] if self.unknowns == "location_alpha" else self.alpha
        P = self.mesh
        return [f.reshape(P, P) for f in self.march(self.source_profile(params[:2]), alpha)]

    @property
    def response_operator(self) -> np.ndarray:
        """``(n_d, P*P)`` map from source profile to outputs at fixed alpha."""
        if self.unknowns != "location":
            raise InputError("the response operator needs a fixed fractional order")
        with self._lock:
            R = self._response
        if R is None:
            dense = self.interp.toarray()
            per_sensor = [self.march(row) for row in dense]
            R = np.vstack([np.array([fs[t] for fs in per_sensor]) for t in range(len(self.times))])
            R.setflags(write=False)
            with self._lock:
                self._response = R
        return R

    def _evaluate(self, params):
        if self.unknowns == "location_alpha":
            self._check_alpha(params[2])
        if self.unknowns == "location" and self.use_response_operator:
            return self.response_operator @ self.source_profile(params)
        fields = self.solve_fields(params)
        return np.concatenate([self.interp @ f.ravel() for f in fields])
