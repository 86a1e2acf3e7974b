"""Hybrid reflection modulation (HRM) link-level simulation and analysis."""

from hrmsim.errors import ConfigurationError, HrmError, NumericalError
from hrmsim.units import db_to_linear, dbm_to_watt, watt_to_dbm

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "HrmError",
    "NumericalError",
    "db_to_linear",
    "dbm_to_watt",
    "watt_to_dbm",
]
