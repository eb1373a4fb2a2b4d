"""Dispersive shock waves of the Camassa-Holm equation: Hopf, Whitham and CH solvers."""
from .hopf import InitialDatum, Sech2Profile, HumpProfile, solve_hopf, critical_point

__version__ = "0.1.0"

__all__ = ["InitialDatum", "Sech2Profile", "HumpProfile", "solve_hopf", "critical_point", "__version__"]
