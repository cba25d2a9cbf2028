"""Kolmogorov-Arnold network engine and dynamical-systems laboratory."""

__version__ = "0.1.0"

from .splines import (  # noqa: F401
    SplineActivation,
    SplineSpec,
    activation_eval,
    activation_grad,
    basis_derivative,
    basis_eval,
    make_knots,
)
