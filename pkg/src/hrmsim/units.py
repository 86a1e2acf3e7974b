"""Unit conversions. Powers are carried internally in watts."""

import numpy as np


def db_to_linear(value_db):
    out = 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)
    return float(out) if out.ndim == 0 else out


def linear_to_db(value):
    out = 10.0 * np.log10(np.asarray(value, dtype=float))
    return float(out) if out.ndim == 0 else out


def dbm_to_watt(value_dbm):
    """30 dBm -> 1 W, 0 dBm -> 1 mW."""
    out = 10.0 ** ((np.asarray(value_dbm, dtype=float) - 30.0) / 10.0)
    return float(out) if out.ndim == 0 else out


def watt_to_dbm(value_w):
    out = 10.0 * np.log10(np.asarray(value_w, dtype=float)) + 30.0
    return float(out) if out.ndim == 0 else out
