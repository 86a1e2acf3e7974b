"""Figure-reproduction presets: named lists of ``(series, config dict)`` pairs.

Every preset pins the link defaults (20 m / 50 m hops, exponents 2.2 / 2.8,
-30 dB reference loss, -90 dBm noise floors), the gain ``p = 10`` for the
BER and rate figures and the published power constants for the energy
figure.  Any value can still be changed with ``--set``, which is applied to
every series of the preset.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Series:
    name: str
    config: dict


def _grid(lo, hi, step):
    return [f"{v} dBm" for v in range(lo, hi + 1, step)]


def _ber(scheme, N, G, grid, **radio):
    return {
        "command": "ber",
        "scheme": scheme,
        "layout": {"N": N, "G": G},
        "radio": {"gain": 10.0, **radio},
        "sweep": {"axis": "P_t", "values": grid, "min_ber": 1e-6},
    }


def fig3():
    """MC BER and union bound vs P_t, G = 2, N = 32 ... 512, K in {0, 10}."""
    out = []
    grid = _grid(-20, 36, 2)
    for K in (0, 10):
        for N in (32, 64, 128, 256, 512):
            mc = _ber("hrm", N, 2, grid)
            mc["geometry"] = {"K_t": float(K), "K_r": float(K)}
            out.append(Series(f"mc_K{K}_N{N}", mc))
            for variant in ("rederived", "published"):
                ab = _ber("hrm", N, 2, grid)
                ab["command"] = "abep"
                ab["geometry"] = {"K_t": float(K), "K_r": float(K)}
                ab["sweep"]["variant"] = variant
                out.append(Series(f"abep_{variant}_K{K}_N{N}", ab))
    return out


def fig4():
    """BER vs P_t at N = 256 for G = 2 ... 32."""
    grid = _grid(-10, 40, 2)
    return [Series(f"mc_G{G}", _ber("hrm", 256, G, grid)) for G in (2, 4, 8, 16, 32)]


def fig5():
    """Four-bit schemes at N = 256: HRM G = 16, HRM G = 4 + QPSK, passive 16-PSK, RM G = 4 + QPSK."""
    grid = _grid(-20, 40, 2)
    return [
        Series("hrm_G16", _ber("hrm", 256, 16, grid)),
        Series("hrm_G4_qpsk", _ber("hrm_psk", 256, 4, grid, M=4)),
        Series("passive_16psk", _ber("passive_psk", 256, 2, grid, M=16)),
        Series("rm_G4_qpsk", _ber("rm", 256, 4, grid, M=4)),
    ]


def fig6():
    """Correlated vs independent elements, G = 2, N in {16, 64, 256}, element size lambda/2 ... lambda/8."""
    grid = _grid(-10, 44, 2)
    out = []
    for N in (16, 64, 256):
        out.append(Series(f"independent_N{N}", _ber("hrm", N, 2, grid)))
        for frac, label in (("0.5", "l2"), ("0.25", "l4"), ("0.125", "l8")):
            cfg = _ber("hrm", N, 2, grid)
            cfg["layout"].update(correlated=True, spacing=f"{frac} lambda")
            out.append(Series(f"correlated_{label}_N{N}", cfg))
    return out


def fig7():
    """Energy efficiency vs P_t (N = 512), EE and power draw vs N (P_t = 30 dBm)."""
    out = []
    grid = _grid(-10, 40, 5)
    for pa in (10, 20, 30):
        for scheme in ("fhrm", "active_psk"):
            out.append(Series(f"ee_pt_{scheme}_PA{pa}", {
                "command": "energy",
                "scheme": scheme,
                "layout": {"N": 512, "G": 2},
                "radio": {"gain": None, "P_A": f"{pa} dBm", "M": 2},
                "sweep": {"axis": "P_t", "values": grid, "samples": 10**6},
            }))
    n_grid = [32, 64, 128, 256, 512, 1024]
    for pa in (0, 10):
        for scheme in ("fhrm", "active_psk", "passive_psk"):
            if scheme == "passive_psk" and pa != 10:
                continue
            out.append(Series(f"ee_n_{scheme}_PA{pa}", {
                "command": "energy",
                "scheme": scheme,
                "layout": {"N": 32, "G": 2},
                "radio": {"gain": None, "P_A": f"{pa} dBm", "P_t": "30 dBm", "M": 2},
                "sweep": {"axis": "N", "values": n_grid, "samples": 10**6},
            }))
    return out


def rate():
    """Achievable rate vs P_t for N in {64, 256, 512} and G in {2, 4, 8}."""
    grid = _grid(-30, 30, 2)
    out = []
    for G in (2, 4, 8):
        for N in (64, 256, 512):
            cfg = _ber("hrm", N, G, grid)
            cfg["command"] = "rate"
            cfg["sweep"] = {"axis": "P_t", "values": grid, "samples": 100_000}
            out.append(Series(f"rate_G{G}_N{N}", cfg))
    return out


PRESETS = {"fig3": fig3, "fig4": fig4, "fig5": fig5, "fig6": fig6, "fig7": fig7, "rate": rate}


def get(name):
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
