"""Command-line front end.

Subcommands ``ber``, ``abep``, ``rate`` and ``energy`` run one configured
curve; ``sweep`` runs whatever ``command`` the config names; ``reproduce``
runs a figure preset; ``validate`` checks a config without computing.

Results go to a long-format CSV (one row per point and metric) whose
``config`` column holds the full canonical config as JSON, so any row can be
re-run with ``hrmsim sweep --config row.json``.

Exit status: 0 on success, 2 on a configuration/schema error (the offending
key is printed), 3 on a numerical failure (the module/operation is printed).
"""

import argparse
import csv
import io
import logging
import math
from pathlib import Path
import sys
import time

from hrmsim import __version__, presets
from hrmsim.analysis import abep_union, hypothesis_noise
from hrmsim.config import ExperimentConfig, load
from hrmsim.errors import ConfigurationError, NumericalError
from hrmsim.simkit import Z95, run_ber, run_energy, run_rate

log = logging.getLogger("hrmsim")

COLUMNS = ("series", "scheme", "axis", "axis_value", "metric", "value", "ci95",
           "trials", "errors", "seed", "fingerprint", "config")
ENERGY_METRICS = ("ee", "p_tot", "p_ris", "mean_snr", "low_gain_fraction")


def fmt(x):
    """Locale-independent shortest round-trip text for numbers; '' for missing."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


# --------------------------------------------------------------------------
# running one configured curve

def _abep_points(exp):
    spec = exp.sweep_spec()
    if spec.scheme != "hrm":
        raise ConfigurationError("the union bound is available for scheme 'hrm' only", key="scheme")
    if spec.layout.correlated:
        raise ConfigurationError("the union bound assumes independent elements", key="layout.correlated")
    p = spec.cfg.gain_override
    if p is None:
        raise ConfigurationError("the union bound needs a fixed gain", key="radio.gain")
    variant = exp.data["sweep"]["variant"]
    out = []
    for i, v in enumerate(spec.values):
        geom, layout, cfg = spec.point(i)
        n0 = hypothesis_noise(cfg, p, layout.S, geom.L_r, layout.G, spec.n0_policy)
        value = abep_union(layout.G, layout.S, p, geom, cfg.P_t, n0, variant=variant)
        if not math.isfinite(value):
            raise NumericalError(f"non-finite bound at {spec.axis}={v}", where="analysis.abep_union")
        out.append((v, "abep", value, None, None, None))
    return out


def run_config(exp, threads=1):
    """Evaluate one config; returns ``(axis_value, metric, value, ci95, trials, errors)`` tuples."""
    command = exp.data["command"]
    seed = exp.data["seed"]
    if command == "abep":
        return _abep_points(exp)
    spec = exp.sweep_spec()
    if command == "ber":
        return [(p.axis_value, "ber", p.ber, p.ci95, p.trials, p.bit_errors)
                for p in run_ber(spec, seed, threads)]
    if command == "rate":
        return [(p.axis_value, "rate", p.rate, Z95 * p.stderr, p.samples, None)
                for p in run_rate(spec, seed, threads)]
    for name, value in spec.power.conversion_table():
        log.info("power constant %s = %r", name, value)
    rows = []
    for p in run_energy(spec, seed, threads):
        rows.append((p.axis_value, "ee", p.ee, Z95 * p.ee_stderr, p.samples, None))
        rows.append((p.axis_value, "p_tot", p.p_tot, None, None, None))
        rows.append((p.axis_value, "p_ris", p.p_ris, None, None, None))
        rows.append((p.axis_value, "mean_snr", p.mean_snr, None, p.samples, None))
        rows.append((p.axis_value, "low_gain_fraction", p.low_gain_fraction, None, p.samples, None))
    return rows


def series_rows(name, exp, threads=1):
    t0 = time.perf_counter()
    points = run_config(exp, threads)
    log.info("series %s done in %.1fs", name, time.perf_counter() - t0)
    order = {m: i for i, m in enumerate(("ber", "abep", "rate") + ENERGY_METRICS)}
    points.sort(key=lambda r: (r[0], order[r[1]]))
    cfg_json = exp.to_json()
    fp = exp.fingerprint()
    rows = []
    for axis_value, metric, value, ci, trials, errors in points:
        rows.append({
            "series": name,
            "scheme": exp.data["scheme"],
            "axis": exp.data["sweep"]["axis"],
            "axis_value": fmt(axis_value),
            "metric": metric,
            "value": fmt(value),
            "ci95": fmt(ci),
            "trials": fmt(trials),
            "errors": fmt(errors),
            "seed": fmt(exp.data["seed"]),
            "fingerprint": fp,
            "config": cfg_json,
        })
    return rows


def write_csv(rows, path):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if str(path) == "-":
        sys.stdout.write(buf.getvalue())
        return
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    path.write_text(buf.getvalue())
    log.info("wrote %d rows to %s", len(rows), path)


# --------------------------------------------------------------------------
# validation

def validate_report(exp):
    """Physics sanity warnings for a schema-valid config (empty list when clean)."""
    warnings = []
    spec = exp.sweep_spec()
    p = spec.cfg.gain_override
    if p is not None and p <= 1:
        warnings.append(f"radio.gain: p = {p} <= 1 makes the HRM levels indistinguishable")
    if p is None and spec.scheme in ("hrm", "fhrm", "hrm_psk", "active_psk"):
        # p >= 1 needs P_A >= P_t E||h_a||^2 + sigma_dy2 over the largest active set
        worst = 0.0
        for i in range(len(spec.values)):
            geom, layout, cfg = spec.point(i)
            if spec.scheme in ("hrm", "hrm_psk"):
                n_active = (layout.G - 1) * layout.S
            else:
                n_active = layout.N
            worst = max(worst, cfg.P_t * n_active * geom.L_t + cfg.sigma_dy2)
        if spec.cfg.P_A < worst:
            warnings.append(
                f"radio.P_A: budget {spec.cfg.P_A:.3g} W is below the unity-gain threshold "
                f"{worst:.3g} W for part of the sweep (average channel)"
            )
    power = spec.power
    if power is not None and power.P_p > power.P_dy:
        warnings.append("power.P_p exceeds power.P_dy; the hybrid/active ordering assumes P_p << P_dy")
    return warnings


# --------------------------------------------------------------------------
# argument handling

def _common(parser):
    parser.add_argument("--config", type=Path, help="TOML or JSON experiment file")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--out", help="CSV path, '-' for stdout")
    parser.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config value, e.g. --set radio.P_A='10 dBm' (repeatable)")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    ap = argparse.ArgumentParser(prog="hrmsim", description="Hybrid reflection modulation link simulator")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name, text in (("ber", "Monte Carlo bit error rate"), ("abep", "union-bound ABEP"),
                       ("rate", "Monte Carlo achievable rate"), ("energy", "energy efficiency and power"),
                       ("sweep", "run the command named in the config")):
        _common(sub.add_parser(name, help=text))
    rp = sub.add_parser("reproduce", help="run a figure preset")
    rp.add_argument("preset", choices=sorted(presets.PRESETS))
    _common(rp)
    vp = sub.add_parser("validate", help="check a config without running it")
    _common(vp)
    return ap


def _overrides(args):
    extra = list(args.overrides)
    if args.seed is not None:
        extra.append(f"seed={args.seed}")
    return extra


def _main(args):
    if args.cmd == "reproduce":
        extra = _overrides(args)
        rows = []
        for s in presets.get(args.preset):
            exp = ExperimentConfig.from_dict(s.config, extra)
            rows.extend(series_rows(s.name, exp, args.threads))
        write_csv(rows, args.out or f"{args.preset}.csv")
        return 0

    extra = _overrides(args)
    if args.cmd in ("ber", "abep", "rate", "energy"):
        extra.append(f"command={args.cmd!r}")
    exp = load(args.config, extra)

    if args.cmd == "validate":
        for line in validate_report(exp):
            print(f"warning: {line}")
        return 0

    out = args.out or exp.data["out"]
    write_csv(series_rows(exp.data["command"], exp, args.threads), out)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return _main(args)
    except ConfigurationError as exc:
        print(f"configuration error [{exc.key}]: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure in {exc.where}: {exc}", file=sys.stderr)
        return 3
    except FloatingPointError as exc:
        print(f"numerical failure in floating point: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
