"""Shared numerical kernels: quadrature, IVP integration, extremum search."""
from .extremum import Extremum, extremum_on_rect
from .ode import Event, Trajectory, solve_ivp
from .quadrature import (
    DivergenceError,
    NonFiniteIntegrandError,
    Quadrature,
    QuadratureError,
    cumulative,
    integrate,
    integrate_improper,
    integrate_with_error,
)

__all__ = [
    "Quadrature", "QuadratureError", "DivergenceError", "NonFiniteIntegrandError",
    "integrate", "integrate_with_error", "integrate_improper", "cumulative",
    "Event", "Trajectory", "solve_ivp", "Extremum", "extremum_on_rect",
]
