import csv
import json
import locale

import pytest

from hrmsim import cli, presets
from hrmsim.config import ExperimentConfig, load, parse_override, parse_quantity
from hrmsim.errors import ConfigurationError, NumericalError

FAST = ["--set", "sweep.target_errors=20", "--set", "sweep.max_trials=8192", "--set", "sweep.block_size=4096"]


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_toml(tmp_path, text):
    path = tmp_path / "exp.toml"
    path.write_text(text)
    return path


@pytest.mark.parametrize("text, kind, expected", [
    ("20 dBm", "power", 0.1),
    ("-90 dBm", "power", 1e-12),
    ("5 mW", "power", 5e-3),
    ("2 W", "power", 2.0),
    ("50 m", "distance", 50.0),
    ("10 MHz", "frequency", 1e7),
    ("2.4 GHz", "frequency", 2.4e9),
    ("-30 dB", "db", 1e-3),
    ("0.5 lambda", "spacing", 0.05),
])
def test_parse_quantity(text, kind, expected):
    assert parse_quantity(text, kind, "k", wavelength=0.1) == pytest.approx(expected)


@pytest.mark.parametrize("value", [20, "20", "20 furlongs", "20 m"])
def test_parse_quantity_rejects_missing_or_wrong_units(value):
    with pytest.raises(ConfigurationError) as exc:
        parse_quantity(value, "power", "radio.P_t")
    assert exc.value.key == "radio.P_t"


def test_overrides_parse_as_toml_literals():
    assert parse_override("layout.N=128") == {"layout": {"N": 128}}
    assert parse_override("radio.P_A=10 dBm") == {"radio": {"P_A": "10 dBm"}}
    assert parse_override("sweep.values=[2, 4]") == {"sweep": {"values": [2, 4]}}
    with pytest.raises(ConfigurationError):
        parse_override("layout.N")


def test_toml_config_builds_objects(tmp_path):
    path = write_toml(tmp_path, """
scheme = "hrm"
seed = 7

[geometry]
d_t = "20 m"
K_t = 1.0

[layout]
N = 128
G = 4

[radio]
P_t = "30 dBm"
gain = 10.0

[sweep]
axis = "P_t"
values = ["0 dBm", "1 W"]
""")
    exp = load(path)
    spec = exp.sweep_spec()
    assert spec.layout.S == 32
    assert spec.values == (0.0, 30.0)
    assert spec.geometry.K_t == 1.0
    assert spec.cfg.P_t == pytest.approx(1.0)
    assert exp.power_model().P_c == pytest.approx(10 ** 4.5)


def test_canonical_json_round_trip(tmp_path):
    exp = load(None, ["layout.N=16", "radio.gain=none"])
    path = tmp_path / "c.json"
    path.write_text(exp.to_json())
    again = load(path)
    assert again.to_json() == exp.to_json()
    assert again.fingerprint() == exp.fingerprint()
    assert again.hrm_config().gain_override is None


def test_run_writes_sorted_long_csv(tmp_path):
    out = tmp_path / "ber.csv"
    rc = cli.main(["ber", "--out", str(out), "--seed", "5", *FAST,
                   "--set", "sweep.values=['10 dBm', '-5 dBm', '0 dBm']"])
    assert rc == 2  # unsorted grid is a schema error
    rc = cli.main(["ber", "--out", str(out), "--seed", "5", *FAST,
                   "--set", "sweep.values=['-5 dBm', '0 dBm', '10 dBm']"])
    assert rc == 0
    rows = read(out)
    assert list(rows[0]) == list(cli.COLUMNS)
    assert [float(r["axis_value"]) for r in rows] == [-5.0, 0.0, 10.0]
    assert {r["metric"] for r in rows} == {"ber"}
    assert all(r["seed"] == "5" for r in rows)
    cfg = json.loads(rows[0]["config"])
    assert cfg["command"] == "ber" and cfg["seed"] == 5


def test_csv_row_reruns_identically(tmp_path):
    first = tmp_path / "a.csv"
    assert cli.main(["ber", "--out", str(first), *FAST, "--set", "layout.N=32",
                     "--set", "sweep.values=['5 dBm', '15 dBm']"]) == 0
    rows = read(first)
    spec = tmp_path / "row.json"
    spec.write_text(rows[0]["config"])
    second = tmp_path / "b.csv"
    assert cli.main(["sweep", "--config", str(spec), "--out", str(second)]) == 0
    again = read(second)
    numeric = ("axis_value", "value", "ci95", "trials", "errors", "fingerprint")
    assert [[r[k] for k in numeric] for r in rows] == [[r[k] for k in numeric] for r in again]


def test_other_commands(tmp_path):
    out = tmp_path / "x.csv"
    assert cli.main(["abep", "--out", str(out), "--set", "sweep.variant='published'"]) == 0
    rows = read(out)
    assert [r["metric"] for r in rows] == ["abep"] * 3
    assert rows[0]["ci95"] == "" and rows[0]["trials"] == ""
    assert cli.main(["rate", "--out", str(out), "--set", "sweep.samples=500", "--set", "layout.G=4"]) == 0
    assert all(0.0 <= float(r["value"]) <= 2.0 for r in read(out))
    assert cli.main(["energy", "--out", str(out), "--set", "sweep.samples=500", "--set", "scheme='fhrm'",
                     "--set", "radio.gain=none"]) == 0
    metrics = [r["metric"] for r in read(out)]
    assert metrics[:5] == ["ee", "p_tot", "p_ris", "mean_snr", "low_gain_fraction"]


def test_numbers_are_locale_independent(monkeypatch):
    for name in ("de_DE.UTF-8", "fr_FR.UTF-8"):
        try:
            locale.setlocale(locale.LC_NUMERIC, name)
            break
        except locale.Error:
            continue
    try:
        assert cli.fmt(1234567.5) == "1234567.5"
        assert cli.fmt(1e-7) == "1e-07"
        assert cli.fmt(3) == "3"
        assert cli.fmt(None) == ""
    finally:
        locale.setlocale(locale.LC_NUMERIC, "C")


def test_schema_errors_exit_2_with_key(capsys, tmp_path):
    assert cli.main(["ber", "--set", "radio.bogus=1"]) == 2
    assert "radio.bogus" in capsys.readouterr().err
    path = write_toml(tmp_path, '[radio]\nP_t = 20\n')
    assert cli.main(["ber", "--config", str(path)]) == 2
    assert "radio.P_t" in capsys.readouterr().err
    assert cli.main(["ber", "--config", str(tmp_path / "missing.toml")]) == 2


def test_numerical_failure_exits_3(capsys, monkeypatch):
    def boom(exp, threads=1):
        raise NumericalError("matrix not PSD", where="channel.correlation_matrix")
    monkeypatch.setattr(cli, "run_config", boom)
    assert cli.main(["ber", "--out", "-"]) == 3
    assert "channel.correlation_matrix" in capsys.readouterr().err


def test_validate_reports(capsys):
    assert cli.main(["validate"]) == 0
    assert capsys.readouterr().out == ""
    assert cli.main(["validate", "--set", "radio.gain=none", "--set", "radio.P_A='-40 dBm'"]) == 0
    assert "unity-gain threshold" in capsys.readouterr().out
    assert cli.main(["validate", "--set", "radio.gain=1.0"]) == 0
    assert "radio.gain" in capsys.readouterr().out
    assert cli.main(["validate", "--set", "layout.G=3"]) == 2
    assert "layout.G" in capsys.readouterr().err


@pytest.mark.parametrize("name", sorted(presets.PRESETS))
def test_presets_are_valid_configs(name):
    series = presets.get(name)
    assert len({s.name for s in series}) == len(series)
    for s in series:
        ExperimentConfig.from_dict(s.config)


def test_preset_parameters():
    fig3 = {s.name: ExperimentConfig.from_dict(s.config) for s in presets.fig3()}
    assert {e.data["layout"]["N"] for e in fig3.values()} == {32, 64, 128, 256, 512}
    assert all(e.data["layout"]["G"] == 2 and e.data["radio"]["gain"] == 10.0 for e in fig3.values())
    fig4 = [ExperimentConfig.from_dict(s.config) for s in presets.fig4()]
    assert sorted(e.data["layout"]["G"] for e in fig4) == [2, 4, 8, 16, 32]
    assert all(e.data["layout"]["N"] == 256 for e in fig4)
    fig7 = [ExperimentConfig.from_dict(s.config) for s in presets.fig7()]
    assert all(e.power_model().P_c == pytest.approx(10 ** 4.5) for e in fig7)
    with pytest.raises(KeyError):
        presets.get("fig9")
