import json
import os
import subprocess
import sys

import numpy as np
import pytest

from zenosim import cli
from zenosim.config import ConfigError, load_config, parse_config, provenance_text
from zenosim.core import derived_rates
from zenosim.scenarios import point_config, run, sweep
from zenosim.writers import read_csv

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")

CAVITY = """\
[scenario]
name = cavity

[params]
omega_alpha = 1.0
gamma1 = 1.0
e0 = 0.0
e1 = 0.0
gamma_d = 1.0

[integration]
t_end = 20.0
n_outputs = 41

[output]
path = cav.csv
"""

SWEEP = CAVITY + """
[sweep]
parameter = gamma_d
values = 5 0 1
"""


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def main(*argv):
    return cli.main(list(argv))


# -- parsing -----------------------------------------------------------------

@pytest.mark.parametrize("text, field, line", [
    ("[scenario]\nname = cavity\n[params]\nomega_alpha = -1\ngamma1 = 1\n", "params.omega_alpha", 4),
    ("[scenario]\nname = nope\n", "scenario.name", 2),
    ("[scenario]\nname = detector\n[extra]\nx = 1\n", "extra", 3),
    ("[scenario]\nname = detector\n[params]\nD = 1\nbogus = 2\n", "params.bogus", 5),
    ("[scenario]\nname = detector\n[integration]\nt_end = abc\n", "integration.t_end", 4),
    ("[scenario]\nname = detector\n[params]\nD = 1\nD = 2\n", "params.D", 5),
])
def test_errors_carry_field_and_line(text, field, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_missing_time_is_rejected():
    with pytest.raises(ConfigError, match="t_end"):
        parse_config("[scenario]\nname = detector\n[params]\nD = 1\nDprime = 1\n")


def test_sweep_values_must_be_unique():
    with pytest.raises(ConfigError) as info:
        parse_config(CAVITY + "[sweep]\nparameter = gamma_d\nvalues = 1 1\n")
    assert info.value.field.startswith("sweep")


def test_detector_shortcut_sets_gamma_d():
    cfg = parse_config(open(os.path.join(CONFIGS, "flat_current.ini")).read())
    D, Dprime, gamma_d = derived_rates(cfg.params)
    assert (D, Dprime) == pytest.approx((1.0, 0.25))
    assert gamma_d == pytest.approx((1.0 - 0.5) ** 2)


@pytest.mark.parametrize("name", sorted(os.listdir(CONFIGS)))
def test_canonical_text_round_trips(name):
    cfg = load_config(os.path.join(CONFIGS, name))
    again = parse_config(cfg.to_text())
    assert again == cfg
    assert again.to_text() == cfg.to_text()


# -- runs --------------------------------------------------------------------

def test_run_is_byte_identical_and_embeds_its_config(tmp_path):
    cfg = parse_config(CAVITY)
    a = run(cfg, str(tmp_path / "a"))
    b = run(cfg, str(tmp_path / "b"))
    assert [os.path.basename(p) for p in a] == [os.path.basename(p) for p in b]
    for pa, pb in zip(a, b):
        assert open(pa, "rb").read() == open(pb, "rb").read()
    comments, columns, _ = read_csv(a[0])
    assert columns == ["t", "sigma_00_unmeasured", "sigma_00_measured"]
    assert parse_config(provenance_text(comments)) == cfg
    report = json.load(open(a[-1]))
    assert parse_config(report["config"]) == cfg
    assert report["regime"]["classification"] == "Zeno"


def test_detector_without_current_has_single_column(tmp_path):
    text = open(os.path.join(CONFIGS, "detector.ini")).read().replace("2.0", "0.0")
    (path,) = run(parse_config(text), str(tmp_path))
    _, columns, data = read_csv(path)
    assert columns == ["t", "P_0"]
    assert np.allclose(data[:, 1], 1.0)


def test_flat_decay_follows_exponential(tmp_path):
    cfg = load_config(os.path.join(CONFIGS, "flat_current.ini"))
    paths = run(cfg, str(tmp_path))
    _, columns, data = read_csv(paths[0])
    s = data[:, columns.index("sigma_00")]
    assert np.max(np.abs(s - np.exp(-data[:, 0]))) < 0.01
    assert "current_over_D" in columns
    _, line_cols, _ = read_csv(paths[1])
    assert line_cols == ["energy", "density", "lorentzian"]


def test_detuned_curves_cross_once(tmp_path):
    paths = run(load_config(os.path.join(CONFIGS, "detuned_cavity.ini")), str(tmp_path))
    t_star = json.load(open(paths[-1]))["regime"]["t_star"]
    for path in paths[:2]:
        _, _, data = read_csv(path)
        diff = (data[:, 2] - data[:, 1])[1:]
        flips = np.nonzero(np.diff(np.sign(diff)))[0]
        assert diff[0] > 0 and diff[-1] < 0 and len(flips) == 1
        t = data[1:, 0]
        assert t[flips[0]] <= t_star <= t[flips[0] + 1]


# -- sweeps ------------------------------------------------------------------

def test_sweep_rows_are_sorted(tmp_path):
    (path,) = sweep(parse_config(SWEEP), str(tmp_path))
    _, columns, _ = read_csv_text(path)
    assert columns[0] == "gamma_d"
    rows = open(path).read().splitlines()
    body = [r.split(",") for r in rows if not r.startswith("#")][1:]
    assert [float(r[0]) for r in body] == [0.0, 1.0, 5.0]
    assert [r[4] for r in body] == ["Crossover", "Zeno", "Zeno"]
    assert all(r[-1] == "ok" for r in body)


def read_csv_text(path):
    lines = open(path).read().splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    return lines, body[0].split(","), body[1:]


def test_failing_point_is_recorded(tmp_path):
    # a far detuned cavity needs many more steps than the cap allows
    text = CAVITY.replace("n_outputs = 41", "n_outputs = 41\nmax_steps = 1000")
    cfg = parse_config(text + "[sweep]\nparameter = e1\nvalues = 40 0\n")
    (path,) = sweep(cfg, str(tmp_path))
    _, _, body = read_csv_text(path)
    first, second = (r.split(",") for r in body)
    assert float(first[0]) == 0.0 and first[-1] == "ok"
    assert float(second[0]) == 40.0 and second[-1].startswith("error: StepLimitExceeded")
    assert second[1] == "nan"


def test_single_point_sweep_matches_run(tmp_path):
    cfg = parse_config(SWEEP.replace("values = 5 0 1", "values = 5"))
    sweep(cfg, str(tmp_path / "s"))
    point = point_config(cfg, 5.0)
    direct = run(point, str(tmp_path / "r"))
    for p in direct:
        twin = tmp_path / "s" / os.path.basename(p)
        assert open(p, "rb").read() == twin.read_bytes()


def test_parallel_sweep_matches_serial(tmp_path):
    cfg = write(tmp_path, SWEEP)
    assert main("sweep", "--config", cfg, "--out", str(tmp_path / "j1")) == 0
    assert main("sweep", "--config", cfg, "--out", str(tmp_path / "j2"), "--jobs", "2") == 0
    names = sorted(os.listdir(tmp_path / "j1"))
    assert names == sorted(os.listdir(tmp_path / "j2"))
    for n in names:
        assert (tmp_path / "j1" / n).read_bytes() == (tmp_path / "j2" / n).read_bytes()


# -- command line ------------------------------------------------------------

def test_exit_codes(tmp_path, capsys):
    good = write(tmp_path, CAVITY, "good.ini")
    bad = write(tmp_path, CAVITY.replace("gamma1 = 1.0", "gamma1 = x"), "bad.ini")
    sim = write(tmp_path, CAVITY.replace("n_outputs = 41", "n_outputs = 41\nmax_steps = 3"),
                "sim.ini")
    assert main("validate", "--config", good) == 0
    assert "ok: cavity" in capsys.readouterr().out
    assert main("validate", "--config", bad) == 2
    assert "params.gamma1" in capsys.readouterr().err
    assert main("run", "--config", str(tmp_path / "missing.ini")) == 2
    assert main("sweep", "--config", good) == 2
    assert main("run", "--config", good, "--jobs", "0") == 2
    assert main("run", "--config", sim, "--out", str(tmp_path)) == 3
    assert "simulation error" in capsys.readouterr().err
    assert main("run", "--config", good, "--out", str(tmp_path), "--seedless") == 0


def test_seedless_guard_trips_on_rng():
    with cli.no_rng():
        with pytest.raises(RuntimeError):
            np.random.default_rng(0)
    np.random.default_rng(0)


def test_list_scenarios_and_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "zenosim.cli", "list-scenarios"],
                         capture_output=True, text=True, check=True).stdout
    names = [ln.split()[0] for ln in out.splitlines()]
    assert names == ["detector", "flat-decay", "cavity", "bayes", "projection"]


def test_inline_comments_are_ignored():
    cfg = parse_config(CAVITY.replace("name = cavity", "name = cavity  # the cavity case"))
    assert cfg == parse_config(CAVITY)
