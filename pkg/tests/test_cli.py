import json

import numpy as np

import pytest

from echomem.cli import main


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "s.toml"
    path.write_text("""
seed = 3
[ensemble]
atom_count = 300
[pulse_error]
epsilon = 0.02
[sweep]
parameter = "epsilon"
values = [0.0, 0.01, 0.02]
[angular]
count = 50
[oracle_check]
instances = 5
max_atoms = 6
""")
    return path


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_simulate_csv(capsys, config):
    code, out, _ = _run(capsys, "simulate", "--config", config)
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == "param,value,engine,echo,noise,nsr,efficiency,formula_echo,formula_noise," \
                       "formula_nsr,abs_dev,rel_dev,seed,wall_ms"
    assert lines[1].endswith(",3,")


def test_simulate_json_with_timing(capsys, config):
    code, out, _ = _run(capsys, "simulate", "--config", config, "--format", "json", "--timing",
                        "--engine", "quantum")
    rep = json.loads(out)
    assert code == 0 and rep["wall_ms"] > 0 and rep["sectors"]["mode"] == "exact"


def test_seed_flag_overrides(capsys, config):
    _, out, _ = _run(capsys, "simulate", "--config", config, "--seed", "11")
    assert out.splitlines()[1].endswith(",11,")


def test_sweep_to_directory(capsys, config, tmp_path):
    code, _, _ = _run(capsys, "sweep", "--config", config, "--out", tmp_path / "o")
    rows = (tmp_path / "o" / "sweep.csv").read_text().splitlines()
    assert code == 0 and len(rows) == 4


@pytest.mark.parametrize("cmd", ["simulate", "sweep", "angular", "export-ensemble"])
def test_threads_give_identical_bytes(capsys, config, cmd):
    _, a, _ = _run(capsys, cmd, "--config", config, "--threads", "1")
    _, b, _ = _run(capsys, cmd, "--config", config, "--threads", "4")
    assert a == b and a


def test_compare_and_oracle_check(capsys, config):
    code, out, _ = _run(capsys, "compare", "--config", config, "--engines", "semiclassical,quantum_avg")
    assert code == 0 and "pass" in out
    code, out, _ = _run(capsys, "oracle-check", "--config", config, "--format", "json")
    assert code == 0 and json.loads(out)["passed"]


def test_angular_json(capsys, config):
    code, out, _ = _run(capsys, "angular", "--config", config, "--format", "json")
    res = json.loads(out)
    assert code == 0 and res["peak"] == pytest.approx(300 * np.cos(0.01) ** 4, rel=1e-12)
    assert len(res["rows"]) == 51


def test_export_ensemble(capsys, config, tmp_path):
    code, _, _ = _run(capsys, "export-ensemble", "--config", config, "--out", tmp_path)
    assert code == 0
    assert (tmp_path / "ensemble.csv").read_text().startswith("atom_index,x,y,z,detuning\n")
    assert (tmp_path / "rotations.csv").read_text().startswith("atom_index,epsilon,nx,ny,nz\n")


def test_validation_error_is_json(capsys, tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text('engine = "oracle"\n[ensemble]\natom_count = 15\n')
    code, _, err = _run(capsys, "simulate", "--config", bad)
    payload = json.loads(err)
    assert code == 2
    assert payload == {"error": "validation", "field": "ensemble.atom_count",
                       "message": "oracle cap exceeded: 15 atoms > 14"}


def test_sweep_failure_exit_code(capsys, tmp_path):
    path = tmp_path / "s.toml"
    path.write_text('engine = "quantum"\n[ensemble]\natom_count = 20\n'
                    '[sweep]\nparameter = "defect_fraction"\nvalues = [0.1, 1.0]\n')
    code, out, err = _run(capsys, "sweep", "--config", path)
    assert code == 1 and len(out.splitlines()) == 2
    assert json.loads(err.splitlines()[0])["index"] == 1
