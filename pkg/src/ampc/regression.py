"""Weighted discrete least squares for PC coefficients."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .basis import BasisFamily, MultiIndexSet, total_degree_index_set, vandermonde
from .design import DesignSet, make_design
from .errors import DegenerateDesignError, ForwardModelError, InputError
from .models.base import LedgeredModel

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-12


@dataclass
class LsqReport:
    coefficients: np.ndarray
    residual_norm: np.ndarray
    condition_estimate: float
    rank: int


def fit_weighted_lsq(family: BasisFamily, index_set: MultiIndexSet, design: DesignSet, values) -> LsqReport:
    """Minimise ``||sqrt(W) (Phi c - b)||`` for each column of ``values``.

    Solved through the SVD of ``sqrt(W) Phi``; singular values below
    ``RANK_RTOL`` times the largest count as zero and make the fit fail.
    """
    values = np.asarray(values, dtype=float)
    squeeze = values.ndim == 1
    b = values.reshape(len(design), -1) if values.size else values.reshape(len(design), 0)
    if b.shape[0] != len(design):
        raise InputError(f"{len(design)} design points but {values.shape[0]} value rows")
    if not np.all(np.isfinite(b)):
        raise InputError("regression values must be finite")
    M = len(index_set)
    if len(design) < M:
        raise DegenerateDesignError(f"design has {len(design)} points for {M} unknowns", rank=len(design), n_columns=M)

    sw = np.sqrt(design.weights)
    A = sw[:, None] * vandermonde(family, index_set, design.points)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(s > RANK_RTOL * s[0])) if s.size and s[0] > 0 else 0
    if rank < M:
        raise DegenerateDesignError(
            f"weighted design matrix has rank {rank} < {M} columns (rank deficiency {M - rank})",
            rank=rank,
            n_columns=M,
        )
    rhs = sw[:, None] * b
    coef = Vt.T @ ((U.T @ rhs) / s[:, None])
    resid = np.linalg.norm(A @ coef - rhs, axis=0)
    if squeeze:
        coef = coef[:, 0]
        resid = resid[:1]
    return LsqReport(coef, resid, float(s[0] / s[-1]), rank)


def fit_prior_surrogate(model, prior, N: int, seed, Q=None):
    """PC surrogate of ``model`` fitted over the whole prior.

    Draws a ``2M``-point degree-asymptotic design in the reference domain,
    maps it to parameter space, evaluates ``model`` there and fits every
    output by weighted least squares.  When ``model`` is a
    :class:`LedgeredModel` the evaluations are booked as ``offline``.
    """
    from .surrogate import PcSurrogate

    family = prior.family
    pmap = prior.affine_map()
    index_set = total_degree_index_set(prior.dimension, N)
    design = make_design(family, index_set, seed, Q=Q)
    params = pmap.from_reference(design.points)
    outputs = np.empty((len(design), model.n_d))
    for i, z in enumerate(params):
        try:
            if isinstance(model, LedgeredModel):
                outputs[i] = model.evaluate(z, category="offline")
            else:
                outputs[i] = model.evaluate(z)
        except ForwardModelError:
            raise
        except Exception as exc:
            raise ForwardModelError(f"forward model failed at design point {z.tolist()}: {exc}", point=z) from exc
    report = fit_weighted_lsq(family, index_set, design, outputs)
    logger.info(
        "prior surrogate N=%d: %d evaluations, cond %.3g, max residual %.3g",
        N, len(design), report.condition_estimate, float(np.max(report.residual_norm, initial=0.0)),
    )
    return PcSurrogate(
        family,
        index_set,
        report.coefficients,
        pmap,
        provenance={
            "kind": "prior",
            "seed": seed if isinstance(seed, int) else None,
            "design_size": len(design),
            "hf_evaluations": len(design),
            "residual_norm": report.residual_norm.tolist(),
            "condition_estimate": report.condition_estimate,
            "generation": 0,
        },
    )
