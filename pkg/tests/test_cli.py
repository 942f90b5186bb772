import csv
import json
import math

import pytest

from gphot import cli, config
from gphot import gaussian as gs


def rows_of(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_vacuum_single_row(tmp_path, configs):
    assert cli.main(["pnd", "--config", str(configs / "vacuum.toml"), "--out", str(tmp_path)]) == 0
    out = tmp_path / "vacuum_pnd.csv"
    text = out.read_text()
    assert "# command: pnd" in text and "# config_sha256:" in text
    rows = rows_of(out)
    assert rows == [{"n_D0": "0", "p": "1"}]
    man = json.loads((tmp_path / "vacuum_pnd.manifest.json").read_text())
    assert man["command"] == "pnd" and out.name in man["outputs"]
    assert man["config_sha256"] == config.read(configs / "vacuum.toml")[1]


def test_output_is_deterministic_across_threads(tmp_path, configs, monkeypatch):
    cfg = str(configs / "displaced_squeezed.toml")
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["pnd", "--config", cfg, "--out", str(a)]) == 0
    monkeypatch.setenv("GPHOT_THREADS", "2")
    assert cli.main(["pnd", "--config", cfg, "--out", str(b)]) == 0
    name = next(a.glob("*.csv")).name
    assert (a / name).read_bytes() == (b / name).read_bytes()


def test_thread_precedence(monkeypatch):
    monkeypatch.setenv("GPHOT_THREADS", "3")
    assert cli._threads(None) == 3 and cli._threads(5) == 5
    monkeypatch.setenv("GPHOT_THREADS", "x")
    with pytest.raises(config.ConfigError):
        cli._threads(None)


def test_thermal_factorial_rows(tmp_path, configs):
    assert cli.main(["factorial", "--config", str(configs / "thermal_factorial.toml"), "--out", str(tmp_path)]) == 0
    rows = rows_of(next(tmp_path.glob("*.csv")))
    # falling factorial moments of a thermal state are k! mu^k
    assert [float(r["falling_factorial"]) for r in rows] == pytest.approx([math.factorial(k) for k in range(7)], rel=1e-12)


def test_multimode_grid(tmp_path, configs):
    assert cli.main(["pnd", "--config", str(configs / "multimode_spdc.toml"), "--out", str(tmp_path)]) == 0
    rows = rows_of(next(tmp_path.glob("*.csv")))
    by_copies = {}
    for r in rows:
        by_copies.setdefault(r["state.copies"], []).append(float(r["p"]))
    assert sorted(by_copies, key=int) == ["1", "2", "4", "16", "256"]
    for ps in by_copies.values():
        assert 0.99 < sum(ps) <= 1 + 1e-12


def test_config_error_exit_code(tmp_path, capsys):
    bad = write(tmp_path, 'schema_version = 1\n[state]\ncomponents = [{ kind = "unicorn" }]\n[[detectors]]\nmodes = [0]\n[statistics]\norders = 2\n')
    assert cli.main(["pnd", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err
    assert not list(tmp_path.glob("*.csv"))
    assert cli.main(["pnd", "--config", str(tmp_path / "missing.toml")]) == 2
    bad = write(tmp_path, "schema_version = 2\n", "v2.toml")
    assert cli.main(["pnd", "--config", str(bad)]) == 2
    bad = write(tmp_path, 'schema_version = 1\n[state]\ncomponents = [{ kind = "vacuum" }]\n[[detectors]]\nmodes = [0]\n[statistics]\norders = 9999\n', "big.toml")
    assert cli.main(["pnd", "--config", str(bad)]) == 2


def test_validation_happens_before_any_work(tmp_path):
    text = (
        'schema_version = 1\n[state]\ncomponents = [{ kind = "thermal", mu = 0.5 }]\n'
        '[[detectors]]\nmodes = [0]\nefficiency = 0.5\n[statistics]\norders = 3\n'
        '[grid]\nparameter = "detectors.0.efficiency"\nvalues = [0.5, 1.5]\n'
    )
    assert cli.main(["pnd", "--config", str(write(tmp_path, text)), "--out", str(tmp_path)]) == 2
    assert not list(tmp_path.glob("*.csv"))


def test_numeric_error_exit_code(tmp_path, monkeypatch, configs):
    def boom(*a, **k):
        raise ArithmeticError("singular")

    monkeypatch.setattr(cli, "_statistics_rows", boom)
    assert cli.main(["pnd", "--config", str(configs / "vacuum.toml"), "--out", str(tmp_path)]) == 3


def test_selftest(capsys, monkeypatch):
    assert cli.main(["selftest"]) == 0
    assert capsys.readouterr().out.count("PASS") == 3
    monkeypatch.setattr(cli, "selftest", lambda: False)
    assert cli.main(["selftest"]) == 4


def test_qkd_simulate_and_retrodict(tmp_path, configs):
    cfg = str(configs / "bbm92_assumed.toml")
    assert cli.main(["qkd", "simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
    sim = rows_of(tmp_path / "bbm92_working_point_simulate.csv")[0]
    assert float(sim["key_rate"]) > 0 and 0 < float(sim["qber_time"]) < 0.1
    assert "# povm: exact" in (tmp_path / "bbm92_working_point_simulate.csv").read_text()
    assert cli.main(["qkd", "retrodict", "--config", cfg, "--out", str(tmp_path), "--approx-povm"]) == 0
    path = tmp_path / "bbm92_working_point_retrodict.csv"
    assert "# povm: approximate" in path.read_text()
    r = rows_of(path)[0]
    total = sum(float(r[k]) for k in ("p_00", "p_01", "p_10", "p_11", "complement"))
    assert abs(total - 1) < 1e-12


def test_config_state_kinds():
    raw = {
        "state": {
            "components": [
                {"kind": "coherent", "alpha": {"abs": 1.0, "phase_deg": 90}},
                {"kind": "tmsv", "mu": 2.0},
                {"kind": "squeezed", "r": 0.3, "theta_deg": 45},
            ],
            "ops": [{"kind": "beamsplitter", "modes": [0, 1], "T": 0.5}, {"kind": "loss", "mode": 3, "T": 0.5}],
        }
    }
    st_ = config.build_state(raw)
    assert st_.mode_count == 4
    ref = gs.tensor(gs.coherent(1j), gs.tmsv(math.asinh(math.sqrt(2.0))), gs.squeezed(0.3, math.pi / 4))
    assert abs(ref.mean_photons().sum() - st_.mean_photons().sum() - 0.5 * math.sinh(0.3) ** 2) < 1e-12


def test_sweep_points():
    raw = {"grid": {"parameter": "state.copies", "logspace": [1, 100, 3]}}
    assert [p["state.copies"] for p in config.sweep_points(raw)] == pytest.approx([1, 10, 100])
    raw = {"sweep": [{"a.b": 1}, {"a.b": 2}]}
    res = config.resolve({"a": {"b": 0}}, config.sweep_points(raw)[1])
    assert res["a"]["b"] == 2
