"""Forward models behind a common evaluation contract."""

from .base import CHEAP, EXPENSIVE, EvaluationLedger, ForwardModel, FunctionModel, LedgeredModel, ledgered
from .data import SyntheticData, generate_synthetic_data
from .elliptic import EllipticRbfModel, elliptic_solve
from .fractional import FractionalSourceModel, l1_weights, sensor_grid
from .toys import (
    ExpSumModel,
    GaussianPosterior,
    LinearModel,
    PerturbedModel,
    PolynomialModel,
    analytic_toy_models,
    linear_gaussian_posterior,
)


def fractional_solve(model: FractionalSourceModel, params):
    return model.evaluate(params)


__all__ = [
    "CHEAP",
    "EXPENSIVE",
    "EllipticRbfModel",
    "EvaluationLedger",
    "ExpSumModel",
    "ForwardModel",
    "FractionalSourceModel",
    "FunctionModel",
    "GaussianPosterior",
    "LedgeredModel",
    "LinearModel",
    "PerturbedModel",
    "PolynomialModel",
    "SyntheticData",
    "analytic_toy_models",
    "elliptic_solve",
    "fractional_solve",
    "generate_synthetic_data",
    "l1_weights",
    "ledgered",
    "linear_gaussian_posterior",
    "sensor_grid",
]
