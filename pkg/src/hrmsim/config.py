"""Experiment configuration: a TOML (or JSON) file with unit-suffixed scalars.

Dimensioned quantities are strings carrying their unit, e.g. ``"20 dBm"``,
``"5 mW"``, ``"50 m"``, ``"10 MHz"``, ``"-30 dB"`` or ``"0.5 lambda"``; a bare
number for such a key is a schema error.  Dimensionless values (exponents,
Rician factors, counts, the gain ``p``) are plain numbers.  Unknown keys are
rejected.  See ``docs/config.md`` for the full schema.

The canonical form (:meth:`ExperimentConfig.canonical`) is a JSON-safe dict
of the same shape with every key filled in; it is written next to every CSV
row and loads back through :func:`load` to re-run the experiment.
"""

import copy
import hashlib
import json
import math
from pathlib import Path
import re
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from hrmsim.channel import SPEED_OF_LIGHT, LinkGeometry, RisLayout
from hrmsim.errors import ConfigurationError
from hrmsim.modem import HrmConfig
from hrmsim.power import PowerModel
from hrmsim.simkit import SweepSpec, TrialPolicy
from hrmsim.units import db_to_linear, dbm_to_watt

COMMANDS = ("ber", "abep", "rate", "energy")

_UNITS = {
    "power": {"dBm": None, "W": 1.0, "mW": 1e-3, "uW": 1e-6},
    "distance": {"m": 1.0, "cm": 1e-2, "mm": 1e-3},
    "spacing": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "lambda": None},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "db": {"dB": None},
}

# section -> key -> (kind, default)
SCHEMA = {
    "": {
        "command": ("str", "ber"),
        "scheme": ("str", "hrm"),
        "seed": ("int", 1),
        "out": ("str", "results.csv"),
    },
    "geometry": {
        "d_t": ("distance", "20 m"),
        "d_r": ("distance", "50 m"),
        "alpha_t": ("float", 2.2),
        "alpha_r": ("float", 2.8),
        "beta0": ("db", "-30 dB"),
        "K_t": ("float", 0.0),
        "K_r": ("float", 0.0),
    },
    "layout": {
        "N": ("int", 64),
        "G": ("int", 2),
        "correlated": ("bool", False),
        "spacing": ("spacing", "0.5 lambda"),
        "carrier": ("frequency", "2.4 GHz"),
    },
    "radio": {
        "P_t": ("power", "10 dBm"),
        "P_A": ("power", "20 dBm"),
        "gain": ("float", 10.0),
        "sigma_dy2": ("power", "-90 dBm"),
        "sigma_st2": ("power", "-90 dBm"),
        "M": ("int", 1),
        "detector": ("str", "simple"),
        "budget_norm": ("str", "published"),
    },
    "power": {
        "P_c": ("power", "75 dBm"),
        "P_p": ("power", "5 mW"),
        "P_st": ("power", "35 dBm"),
        "P_dy": ("power", "30 dBm"),
        "tau_t": ("float", 0.5),
        "tau_a": ("float", 0.5),
        "B_W": ("frequency", "10 MHz"),
    },
    "sweep": {
        "axis": ("str", "P_t"),
        "values": ("list", ["0 dBm", "10 dBm", "20 dBm"]),
        "target_errors": ("int", 100),
        "max_trials": ("int", 10**8),
        "block_size": ("int", 8192),
        "min_ber": ("float", 0.0),
        "samples": ("int", 100_000),
        "fhrm_snr": ("str", "max"),
        "n0_policy": ("str", "transmitted"),
        "variant": ("str", "rederived"),
    },
}

# keys whose value may be null (gain: derive p from the P_A budget)
_NULLABLE = {"radio.gain"}
_AXIS_KIND = {"P_t": "power_dbm", "N": "int", "G": "int", "spacing": "spacing"}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]+)\s*$")


def parse_quantity(text, kind, key, wavelength=None):
    """Convert a unit-suffixed string to SI (watts, meters, hertz, linear gain)."""
    if isinstance(text, bool) or not isinstance(text, str):
        raise ConfigurationError(f"{key}: expected a value with a unit, got {text!r}", key=key)
    m = _QUANTITY.match(text)
    if not m:
        raise ConfigurationError(f"{key}: cannot parse {text!r} (missing unit?)", key=key)
    value, unit = float(m.group(1)), m.group(2)
    units = _UNITS[kind]
    if unit not in units:
        raise ConfigurationError(f"{key}: unit {unit!r} not allowed; use one of {sorted(units)}", key=key)
    if unit == "dBm":
        return dbm_to_watt(value)
    if unit == "dB":
        return db_to_linear(value)
    if unit == "lambda":
        if wavelength is None:
            raise ConfigurationError(f"{key}: 'lambda' needs a carrier frequency", key=key)
        return value * wavelength
    return value * units[unit]


def dbm_value(text, key):
    """Sweep grids on the power axis are kept in dBm."""
    if isinstance(text, str):
        m = _QUANTITY.match(text)
        if m and m.group(2) == "dBm":
            return float(m.group(1))
    watts = parse_quantity(text, "power", key)
    if watts <= 0:
        raise ConfigurationError(f"{key}: power must be positive", key=key)
    return 10.0 * math.log10(watts) + 30.0


def _check_type(kind, value, key):
    if key in _NULLABLE and (value is None or value in ("none", "null")):
        return None
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigurationError(f"{key}: expected a string", key=key)
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigurationError(f"{key}: expected true/false", key=key)
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{key}: expected an integer", key=key)
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{key}: expected a number", key=key)
        return float(value)
    if kind == "list":
        if not isinstance(value, list) or not value:
            raise ConfigurationError(f"{key}: expected a non-empty list", key=key)
        return list(value)
    # dimensioned: validate now, convert later
    parse_quantity(value, kind, key, wavelength=1.0)
    return value


def _defaults():
    out = {}
    for section, keys in SCHEMA.items():
        target = out if section == "" else out.setdefault(section, {})
        for k, (_, default) in keys.items():
            target[k] = copy.deepcopy(default)
    return out


def _merge(raw, base):
    if not isinstance(raw, dict):
        raise ConfigurationError("configuration root must be a table", key="")
    for k, v in raw.items():
        if k in SCHEMA and k != "":
            if not isinstance(v, dict):
                raise ConfigurationError(f"[{k}] must be a table", key=k)
            for kk, vv in v.items():
                full = f"{k}.{kk}"
                if kk not in SCHEMA[k]:
                    raise ConfigurationError(f"unknown key {full!r}", key=full)
                base[k][kk] = _check_type(SCHEMA[k][kk][0], vv, full)
        elif k in SCHEMA[""]:
            base[k] = _check_type(SCHEMA[""][k][0], v, k)
        else:
            raise ConfigurationError(f"unknown key {k!r}", key=k)
    return base


_ALIASES = {"gain": "radio.gain", "sigma": "radio.sigma_dy2", "K": "geometry.K_t",
            "alpha": "geometry.alpha_t", "d_h": "layout.spacing", "mode": "scheme"}


def qualify(key):
    """Map a library-level field name onto its config path, e.g. ``G`` -> ``layout.G``."""
    if not key or "." in key:
        return key
    if key in _ALIASES:
        return _ALIASES[key]
    for section, keys in SCHEMA.items():
        if key in keys:
            return f"{section}.{key}" if section else key
    return key


def parse_override(item):
    """``section.key=value``; the value is read as a TOML literal, else as a bare string."""
    if "=" not in item:
        raise ConfigurationError(f"override {item!r} is not key=value", key=item)
    key, text = item.split("=", 1)
    key = key.strip()
    try:
        value = tomllib.loads(f"v = {text.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = text.strip()
    parts = key.split(".")
    if len(parts) == 1:
        return {parts[0]: value}
    if len(parts) == 2:
        return {parts[0]: {parts[1]: value}}
    raise ConfigurationError(f"override key {key!r} too deep", key=key)


class ExperimentConfig:
    """Validated configuration; ``data`` mirrors :data:`SCHEMA` with all keys present."""

    def __init__(self, data):
        self.data = data
        self._validate()

    @classmethod
    def from_dict(cls, raw, overrides=()):
        data = _merge(raw, _defaults())
        for item in overrides:
            data = _merge(parse_override(item) if isinstance(item, str) else item, data)
        return cls(data)

    def with_overrides(self, overrides):
        return ExperimentConfig.from_dict(self.canonical(), overrides)

    # -- derived objects ------------------------------------------------

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self._q("layout", "carrier", "frequency")

    def _q(self, section, key, kind):
        return parse_quantity(self.data[section][key], kind, f"{section}.{key}", wavelength=self._wl())

    def _wl(self):
        text = self.data["layout"]["carrier"]
        return SPEED_OF_LIGHT / parse_quantity(text, "frequency", "layout.carrier")

    def geometry(self):
        g = self.data["geometry"]
        return LinkGeometry(
            d_t=self._q("geometry", "d_t", "distance"),
            d_r=self._q("geometry", "d_r", "distance"),
            alpha_t=g["alpha_t"],
            alpha_r=g["alpha_r"],
            beta0_db=10.0 * math.log10(self._q("geometry", "beta0", "db")),
            K_t=g["K_t"],
            K_r=g["K_r"],
        )

    def layout(self):
        lay = self.data["layout"]
        spacing = self._q("layout", "spacing", "spacing") if lay["correlated"] else None
        return RisLayout(N=lay["N"], G=lay["G"], d_h=spacing, d_v=spacing,
                         wavelength=self.wavelength, correlated=lay["correlated"])

    def hrm_config(self):
        r = self.data["radio"]
        return HrmConfig(
            P_t=self._q("radio", "P_t", "power"),
            P_A=self._q("radio", "P_A", "power"),
            sigma_dy2=self._q("radio", "sigma_dy2", "power"),
            sigma_st2=self._q("radio", "sigma_st2", "power"),
            gain_override=r["gain"],
            budget_norm=r["budget_norm"],
        )

    def power_model(self):
        p = self.data["power"]
        return PowerModel(
            P_c=self._q("power", "P_c", "power"),
            P_p=self._q("power", "P_p", "power"),
            P_st=self._q("power", "P_st", "power"),
            P_dy=self._q("power", "P_dy", "power"),
            tau_t=p["tau_t"],
            tau_a=p["tau_a"],
            B_W=self._q("power", "B_W", "frequency"),
        )

    def axis_values(self):
        s = self.data["sweep"]
        axis = s["axis"]
        kind = _AXIS_KIND.get(axis)
        if kind is None:
            raise ConfigurationError(f"unknown axis {axis!r}; expected one of {tuple(_AXIS_KIND)}",
                                     key="sweep.axis")
        out = []
        for v in s["values"]:
            if kind == "power_dbm":
                out.append(dbm_value(v, "sweep.values"))
            elif kind == "int":
                if isinstance(v, bool) or not isinstance(v, int):
                    raise ConfigurationError("sweep.values: expected integers for this axis", key="sweep.values")
                out.append(v)
            else:
                out.append(parse_quantity(v, "spacing", "sweep.values", wavelength=self._wl()))
        return tuple(out)

    def policy(self):
        s = self.data["sweep"]
        return TrialPolicy(target_errors=s["target_errors"], max_trials=s["max_trials"],
                           block_size=s["block_size"], min_ber=s["min_ber"])

    def sweep_spec(self):
        s, r = self.data["sweep"], self.data["radio"]
        return SweepSpec(
            scheme=self.data["scheme"],
            axis=s["axis"],
            values=self.axis_values(),
            geometry=self.geometry(),
            layout=self.layout(),
            cfg=self.hrm_config(),
            M=r["M"],
            detector=r["detector"],
            policy=self.policy(),
            power=self.power_model(),
            samples=s["samples"],
            fhrm_snr=s["fhrm_snr"],
            n0_policy=s["n0_policy"],
        )

    def _validate(self):
        if self.data["command"] not in COMMANDS:
            raise ConfigurationError(f"command must be one of {COMMANDS}", key="command")
        if self.data["sweep"]["variant"] not in ("rederived", "published"):
            raise ConfigurationError("sweep.variant must be 'rederived' or 'published'", key="sweep.variant")
        if self.data["sweep"]["n0_policy"] not in ("transmitted", "worst"):
            raise ConfigurationError("sweep.n0_policy must be 'transmitted' or 'worst'", key="sweep.n0_policy")
        # building the objects runs every range check
        try:
            self.sweep_spec()
        except ConfigurationError as exc:
            exc.key = qualify(exc.key)
            raise

    # -- serialization ----------------------------------------------------

    def canonical(self):
        return copy.deepcopy(self.data)

    def to_json(self):
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def fingerprint(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def read_raw(path):
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}", key="") from exc
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}", key="") from exc


def load(path=None, overrides=()):
    raw = read_raw(path) if path is not None else {}
    return ExperimentConfig.from_dict(raw, overrides)


__all__ = ["COMMANDS", "SCHEMA", "ExperimentConfig", "load", "parse_override", "parse_quantity"]
