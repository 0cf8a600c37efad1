import subprocess
import sys

import numpy as np
import pytest

from angiometa import cli
from angiometa.characteristics import NumericalError
from angiometa.config import (
    ConfigError,
    dump_config,
    load_config,
    parse_config,
    parse_times,
    same_discretization,
    with_override,
)
from angiometa.transport import SimulationSeries

SHORT = """\
run.name = short
model.primary_x0_mm3 = 200
discretization.T_days = 1
discretization.dt_days = 0.05
"""

TREATED = SHORT + """\
model.drug_effect = proportional
therapy.endo.role = aa
therapy.endo.preset = endostatin
therapy.endo.times = every 1 day from 0.2 to 1
therapy.chemo.role = ct
therapy.chemo.efficacy_per_day = 1
therapy.chemo.clearance_per_day = 1
therapy.chemo.dose_mg = 1
therapy.chemo.times = 0.5, 0.75
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run_main(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


# --- configuration --------------------------------------------------------

def test_parse_times():
    assert parse_times("5, 6, 7") == (5.0, 6.0, 7.0)
    assert parse_times("every 2 days from 5 to 9") == (5.0, 7.0, 9.0)
    assert parse_times("every 1 day from 5 to 7 twice-daily") == (5.0, 5.5, 6.0, 6.5, 7.0, 7.5)
    assert parse_times("") == ()
    with pytest.raises(ConfigError):
        parse_times("daily please")


def test_config_round_trip():
    for text in (SHORT, TREATED):
        cfg = parse_config(text)
        assert parse_config(dump_config(cfg)) == cfg


def test_shipped_configs_load():
    import pathlib
    root = pathlib.Path(__file__).resolve().parent.parent / "configs"
    paths = sorted(root.glob("*.cfg"))
    assert len(paths) >= 10
    for p in paths:
        cfg = load_config(p)
        assert parse_config(dump_config(cfg)) == cfg


def test_unknown_key_names_the_key():
    with pytest.raises(ConfigError) as err:
        parse_config(SHORT + "growth.bogus = 1\n")
    assert err.value.key == "growth.bogus"
    with pytest.raises(ConfigError) as err:
        parse_config("therapy.x.role = aa\ntherapy.x.preset = nope\n")
    assert "preset" in err.value.key


@pytest.mark.parametrize("text,key", [
    ("growth.a_per_day = -1\n", "growth"),
    ("discretization.dt_days = 0.3\ndiscretization.T_days = 1\n", "discretization"),
    ("discretization.dirac = maybe\n", "discretization.dirac"),
    ("model.drug_effect = cubic\n", "model.drug_effect"),
    ("run.name = a\nrun.name = b\n", "run.name"),
    ("just words\n", "line 1"),
])
def test_invalid_values(text, key):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.key == key


def test_empty_therapy_equals_omitted():
    a = parse_config(SHORT)
    b = parse_config(SHORT + "therapy = none\n")
    assert a.therapy.is_empty and b.therapy.is_empty
    assert cli.series_csv(cli.run_config(a)[0].series) == cli.series_csv(cli.run_config(b)[0].series)


def test_with_override_and_discretization_match():
    cfg = parse_config(TREATED)
    hi = with_override(cfg, "therapy.endo.dose_mg", "40")
    assert {d.name: d.schedule.dose for d in hi.drugs}["endo"] == 40.0
    assert same_discretization(cfg, hi)
    assert not same_discretization(cfg, with_override(cfg, "discretization.dt_days", "0.025"))


# --- subcommands ----------------------------------------------------------

def test_simulate_header_and_determinism(tmp_path, capsys):
    path = write(tmp_path, "a.cfg", TREATED)
    code1, out1, _ = run_main(["simulate", "--config", path], capsys)
    code2, out2, _ = run_main(["simulate", "--config", path, "--seedless"], capsys)
    assert code1 == code2 == 0
    assert out1 == out2
    lines = out1.strip().splitlines()
    assert lines[0].split(",") == list(SimulationSeries.COLUMNS)
    assert len(lines) == 1 + 21
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    np.testing.assert_allclose(data[:, 0], np.linspace(0, 1, 21), atol=1e-12)


def test_simulate_output_file_and_flags(tmp_path, capsys):
    path = write(tmp_path, "a.cfg", SHORT)
    out = tmp_path / "o.csv"
    code, stdout, _ = run_main(["simulate", "--config", path, "--output", str(out),
                                "--quadrature", "rectangle", "--data-mode", "average"], capsys)
    assert code == 0 and stdout == ""
    assert out.read_text().startswith("t,")


def test_usage_errors_exit_1(tmp_path, capsys):
    path = write(tmp_path, "a.cfg", SHORT)
    with pytest.raises(SystemExit) as e:
        cli.main(["simulate", "--config", path, "--frobnicate"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        cli.main(["simulate", "--config", path, "--seedless=1"])
    assert e.value.code == 1
    capsys.readouterr()


def test_config_error_exit_1(tmp_path, capsys):
    bad = write(tmp_path, "bad.cfg", SHORT + "growth.bogus = 1\n")
    code, _, err = run_main(["simulate", "--config", bad], capsys)
    assert code == 1 and "growth.bogus" in err
    code, _, err = run_main(["simulate", "--config", str(tmp_path / "missing.cfg")], capsys)
    assert code == 1
    code, _, err = run_main(["simulate", "--config", bad.replace("bad", "a"),
                             "--quadrature", "trapezoid", "--data-mode", "average"], capsys)
    assert code == 1


def test_check_passes(tmp_path, capsys):
    path = write(tmp_path, "a.cfg", SHORT)
    code, out, _ = run_main(["check", "--config", path], capsys)
    assert code == 0 and out.strip().endswith("PASS")


def test_simulate_with_check_bounds(tmp_path, capsys):
    path = write(tmp_path, "a.cfg", SHORT + "outputs.check_bounds = true\n")
    code, _, _ = run_main(["simulate", "--config", path], capsys)
    assert code == 0


def test_compare_ranks_and_rejects_mismatch(tmp_path, capsys):
    a = write(tmp_path, "a.cfg", SHORT)
    b = write(tmp_path, "b.cfg", TREATED.replace("run.name = short", "run.name = treated"))
    code, out, _ = run_main(["compare", "--config", a, "--config", b], capsys)
    assert code == 0
    assert out.splitlines()[0].startswith("name,")
    assert "rank by final MI" in out and "MI[short] > MI[treated]" in out
    c = write(tmp_path, "c.cfg", SHORT.replace("0.05", "0.025"))
    code, _, err = run_main(["compare", "--config", a, "--config", c], capsys)
    assert code == 1 and "discretization" in err
    code, _, _ = run_main(["compare", "--config", a], capsys)
    assert code == 1


def test_sweep(tmp_path, capsys):
    path = write(tmp_path, "s.cfg", TREATED + "sweep.key = therapy.endo.dose_mg\nsweep.values = 5, 80\n")
    code, out, _ = run_main(["sweep", "--config", path], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("therapy.endo.dose_mg,") and len(lines) == 4
    assert lines[-1].startswith("# final MI is")
    nosweep = write(tmp_path, "n.cfg", SHORT)
    assert run_main(["sweep", "--config", nosweep], capsys)[0] == 1


def test_converge_smoke(tmp_path, capsys):
    text = """\
model.birth_profile = cosine
growth.delta_theta_mm3 = 50
discretization.dirac = false
discretization.dsigma_mm3 = 50
discretization.T_days = 0.4
discretization.dt_days = 0.1
converge.levels = 2
converge.ref_factor = 4
converge.min_order = 100
"""
    path = write(tmp_path, "c.cfg", text)
    code, out, err = run_main(["converge", "--config", path], capsys)
    assert "fitted order" in out
    assert code == 2 and "invariant failure" in err


def test_numerical_failure_exit_3(tmp_path, capsys, monkeypatch):
    def boom(*a, **k):
        raise NumericalError("non-finite state")
    monkeypatch.setattr(cli, "simulate", boom)
    path = write(tmp_path, "a.cfg", SHORT)
    code, _, err = run_main(["simulate", "--config", path], capsys)
    assert code == 3 and "numerical failure" in err


def test_console_entry_point(tmp_path):
    path = write(tmp_path, "a.cfg", SHORT)
    res = subprocess.run([sys.executable, "-m", "angiometa.cli", "check", "--config", path],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
