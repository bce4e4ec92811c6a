"""Nosé-thermostated systems on flat tori: normal forms, non-degeneracy and KAM diagnostics."""

__version__ = "0.1.0"

from .mathcore import FlatMetric, TorusPotential, UnitCovector, UsageError  # noqa: E402,F401
from .dynamics import MassProfile, ThermostatParams  # noqa: E402,F401
from .normalform import build_chart_expansion, g1_series, normal_form, solve_nf  # noqa: E402,F401
