import json
import os

import numpy as np
import pytest

from dwsim import ConfigError, LatticeConfig, doublet_splitting, solve_bands
from dwsim.cli import main
from dwsim.config import parse_config
from dwsim.output import run_command, sweep_frequency

MINIMAL = """\
[lattice]
u1_er = 84
theta_deg = 80
bx_mg = 85
"""

FAST_LATTICE = """\
[lattice]
u1_er = 84
theta_deg = 80
bx_mg = 85
n_planewaves = 10
n_q = 5
z_points = 128
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def read_bytes(directory, names):
    return {n: open(os.path.join(directory, n), "rb").read() for n in names}


def test_minimal_config_resolves_canonical(tmp_path):
    run_cfg = parse_config(write(tmp_path, MINIMAL))
    lat = run_cfg.lattice
    assert (lat.u1_er, lat.theta_deg, lat.bx_mg, lat.bz_mg) == (84.0, 80.0, 85.0, 0.0)
    assert lat.fictitious_phase == "quadrature_sin"
    assert (lat.n_planewaves, lat.n_q, lat.z_points) == (24, 33, 512)
    assert lat.species.g_f == 0.25
    # every default is recorded for the manifest
    assert run_cfg.resolved["lattice"]["n_planewaves"] == 24
    assert run_cfg.resolved["ensemble"]["seed"] == 20260808
    assert run_cfg.resolved["output"]["precision"] == 12


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(str(tmp_path / "missing.ini"))
    with pytest.raises(ConfigError, match="u1_er, theta_deg, bx_mg"):
        parse_config(write(tmp_path, "", "empty.ini"))
    with pytest.raises(ConfigError, match="\\[0, 180\\]"):
        parse_config(write(tmp_path, MINIMAL.replace("theta_deg = 80", "theta_deg = 200"), "t.ini"))
    with pytest.raises(ConfigError, match="unknown key 'junk'"):
        parse_config(write(tmp_path, MINIMAL + "junk = 1\n", "u.ini"))
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config(write(tmp_path, MINIMAL + "[mystery]\nx = 1\n", "s.ini"))
    with pytest.raises(ConfigError, match="bad value"):
        parse_config(write(tmp_path, MINIMAL.replace("u1_er = 84", "u1_er = abc"), "b.ini"))
    with pytest.raises(ConfigError, match="range"):
        parse_config(write(tmp_path, MINIMAL + "[sweep]\nparameter = u1\nstart = 5\nstop = 100\n", "r.ini"))
    with pytest.raises(ConfigError, match="differ"):
        parse_config(write(tmp_path, MINIMAL + "[sweep]\nstart = 50\nstop = 50\n", "e.ini"))


def test_cli_exit_codes(tmp_path, capsys):
    bad = write(tmp_path, MINIMAL.replace("theta_deg = 80", "theta_deg = 200"), "bad.ini")
    assert main(["bands", "--config", bad]) == 2
    # numerical failure: basis too small for an extreme lattice
    hard = write(
        tmp_path,
        "[lattice]\nu1_er = 2000\ntheta_deg = 80\nbx_mg = 85\nn_planewaves = 8\nn_q = 1\n",
        "hard.ini",
    )
    assert main(["bands", "--config", hard, "--out", str(tmp_path / "h")]) == 3
    capsys.readouterr()


def test_byte_determinism_and_manifest(tmp_path, capsys):
    ini = write(tmp_path, FAST_LATTICE)
    out1, out2 = str(tmp_path / "r1"), str(tmp_path / "r2")
    assert main(["potentials", "--config", ini, "--out", out1]) == 0
    assert main(["potentials", "--config", ini, "--out", out2]) == 0
    capsys.readouterr()
    names = ["potentials.csv", "manifest.json"]
    assert read_bytes(out1, names) == read_bytes(out2, names)
    manifest = json.loads(open(os.path.join(out1, "manifest.json")).read())
    assert manifest["command"] == "potentials"
    assert manifest["config"]["lattice"]["n_planewaves"] == 10
    assert manifest["config"]["output"]["precision"] == 12
    assert "potentials.csv" in manifest["files"]
    header = open(os.path.join(out1, "potentials.csv")).readline().strip().split(",")
    assert header[0] == "z_nm"
    assert "adiabatic_1" in header and "diabatic_m-4" in header and "diabatic_m+4" in header


def test_sweep_jobs_neutral_and_symmetric(tmp_path, capsys):
    ini = write(
        tmp_path,
        FAST_LATTICE + "[sweep]\nparameter = bz\nstart = -40\nstop = 40\nsteps = 5\n",
    )
    out1, out2 = str(tmp_path / "s1"), str(tmp_path / "s2")
    assert main(["sweep", "--config", ini, "--out", out1, "--jobs", "1"]) == 0
    assert main(["sweep", "--config", ini, "--out", out2, "--jobs", "3"]) == 0
    capsys.readouterr()
    assert read_bytes(out1, ["sweep.csv"]) == read_bytes(out2, ["sweep.csv"])
    rows = [line.split(",") for line in open(os.path.join(out1, "sweep.csv")).read().splitlines()[1:]]
    values = [float(r[0]) for r in rows]
    nu = [float(r[1]) for r in rows]
    assert values == sorted(values)
    assert abs(nu[0] - nu[4]) / nu[0] < 1e-6  # nu(-40) == nu(+40)
    assert abs(nu[1] - nu[3]) / nu[1] < 1e-6
    assert nu[2] == min(nu)  # minimum at bz = 0
    assert all(r[3] == "ok" for r in rows)


def test_sweep_u1_scale(tmp_path):
    cfg = LatticeConfig(u1_er=84.0, theta_deg=80.0, bx_mg=85.0, n_planewaves=10, n_q=3)
    rows = sweep_frequency(cfg, "u1", [80.0, 90.0], u1_scale=1.04)
    for value, nu_hz, _flat, status in rows:
        assert status == "ok"
        direct = doublet_splitting(
            solve_bands(cfg.replace(u1_er=value * 1.04), n_bands=2, certify=False)
        )
        assert nu_hz == pytest.approx(direct.epsilon_hz, rel=1e-9)


def test_single_point_sweep_matches_direct():
    cfg = LatticeConfig(u1_er=84.0, theta_deg=80.0, bx_mg=85.0, n_planewaves=10, n_q=3)
    rows = sweep_frequency(cfg, "bx", [85.0])
    direct = doublet_splitting(solve_bands(cfg, n_bands=2))
    assert rows[0][1] == pytest.approx(direct.epsilon_hz, rel=1e-12)


def test_sweep_flags_unconverged_point_and_continues():
    cfg = LatticeConfig(u1_er=84.0, theta_deg=80.0, bx_mg=85.0, n_planewaves=8, n_q=1)
    rows = sweep_frequency(cfg, "u1", [84.0, 20000.0])
    by_value = {r[0]: r for r in rows}
    assert by_value[84.0][3] == "ok"
    assert by_value[20000.0][3] == "unconverged"
    assert np.isnan(by_value[20000.0][1])


def test_rabi_command_magnetization_swing(tmp_path, capsys):
    ini = write(
        tmp_path,
        FAST_LATTICE + "[rabi]\nt_max_us = 400\ndt_out_us = 2\n",
    )
    out = str(tmp_path / "rabi")
    assert main(["rabi", "--config", ini, "--out", out]) == 0
    capsys.readouterr()
    rows = np.genfromtxt(os.path.join(out, "rabi.csv"), delimiter=",", names=True)
    fz = rows["fz"]
    assert fz[0] > 0 and fz.min() < 0  # magnetization reverses sign
    # first zero crossing near a quarter Rabi period
    eps_hz = 3517.0
    t_cross = rows["t_us"][np.argmax(fz < 0)]
    assert t_cross == pytest.approx(0.25e6 / eps_hz, rel=0.2)
    header = open(os.path.join(out, "rabi.csv")).readline().strip().split(",")
    assert header[:5] == ["t_us", "pL", "pR", "leakage", "fz"]


def test_ensemble_and_fit_commands(tmp_path, capsys):
    ini = write(
        tmp_path,
        FAST_LATTICE
        + "[ensemble]\nspread = 0.05\nn_samples = 6\nseed = 11\nt_max_us = 900\ndt_out_us = 5\n",
    )
    out1, out2 = str(tmp_path / "e1"), str(tmp_path / "e2")
    assert main(["ensemble", "--config", ini, "--out", out1]) == 0
    assert main(["ensemble", "--config", ini, "--out", out2, "--jobs", "3"]) == 0
    capsys.readouterr()
    names = ["ensemble.csv", "fit.json", "manifest.json"]
    assert read_bytes(out1, names) == read_bytes(out2, names)
    payload = json.loads(open(os.path.join(out1, "fit.json")).read())
    assert payload["n_samples"] == 6 and payload["n_skipped"] == 0
    assert payload["frequency_hz"] > 0

    # fit command round-trips the emitted CSV
    fit_ini = write(
        tmp_path,
        FAST_LATTICE + f"[fit]\ninput = {out1}/ensemble.csv\n",
        "fit.ini",
    )
    out3 = str(tmp_path / "f1")
    assert main(["fit", "--config", fit_ini, "--out", out3]) == 0
    capsys.readouterr()
    refit = json.loads(open(os.path.join(out3, "fit.json")).read())
    assert refit["frequency_hz"] == pytest.approx(payload["frequency_hz"], rel=1e-6)


def test_seed_override_changes_samples(tmp_path, capsys):
    ini = write(
        tmp_path,
        FAST_LATTICE
        + "[ensemble]\nspread = 0.05\nn_samples = 4\nseed = 11\nt_max_us = 400\ndt_out_us = 10\n",
    )
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["ensemble", "--config", ini, "--out", out1]) == 0
    assert main(["ensemble", "--config", ini, "--out", out2, "--seed", "12"]) == 0
    capsys.readouterr()
    a = open(os.path.join(out1, "ensemble.csv")).read()
    b = open(os.path.join(out2, "ensemble.csv")).read()
    assert a != b
    manifest = json.loads(open(os.path.join(out2, "manifest.json")).read())
    assert manifest["config"]["ensemble"]["seed"] == 12


def test_fit_command_requires_input(tmp_path):
    run_cfg = parse_config(write(tmp_path, FAST_LATTICE, "nofit.ini"))
    with pytest.raises(ConfigError, match="input"):
        run_command("fit", run_cfg, out_dir=str(tmp_path / "x"))


def test_unknown_command_rejected(tmp_path):
    run_cfg = parse_config(write(tmp_path, FAST_LATTICE, "cmd.ini"))
    with pytest.raises(ConfigError):
        run_command("render", run_cfg, out_dir=str(tmp_path / "y"))
