import json
from pathlib import Path

import pytest

from bilinear_schrodinger.cli import load_config, parse_state, run
from bilinear_schrodinger.errors import ValidationError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def report(out):
    return json.loads((Path(out) / "report.json").read_text())


def test_check_exits_zero(tmp_path):
    out = tmp_path / "o"
    assert run(["check", "--config", str(CONFIGS / "cond_v0_x2.cfg"), "--out", str(out)]) == 0
    rep = report(out)
    assert rep["command"] == "check" and rep["status"] == "ok"
    assert rep["config"]["potential"]["kind"] == "zero" and len(rep["input_hash"]) == 64


def test_steer_identical_states(tmp_path):
    cfg = write(tmp_path, "[potential]\nkind = linear\nslope = 10\nn_modes = 12\n"
                          "[steering]\nz0 = 1:1\nz1 = 1:1\n")
    out = tmp_path / "o"
    assert run(["steer", "--config", cfg, "--out", str(out)]) == 0
    res = report(out)["result"]
    assert res["status"] == "converged" and len(res["iterations"]) == 1
    assert (out / "control.csv").is_file()


def test_entropy_seed_reruns_are_byte_identical(tmp_path):
    cfg = write(tmp_path, "[potential]\nkind = linear\nslope = 10\nn_modes = 16\n"
                          "[entropy]\ncount = 100\nn_boot = 20\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["entropy", "--config", cfg, "--out", str(a), "--seed", "7"]) == 0
    assert run(["entropy", "--config", cfg, "--out", str(b), "--seed", "7"]) == 0
    for f in ("report.json", "entropy.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    assert report(a)["config"]["entropy"]["seed"] == 7


@pytest.mark.parametrize("command", ["eig", "coupling", "simulate", "return-time", "linearize", "moments",
                                     "synth"])
def test_other_commands(tmp_path, command):
    cfg = write(tmp_path, "[potential]\nkind = linear\nslope = 10\nn_modes = 8\n"
                          "[simulation]\ncontrol = bumps\nt_final = 1\nrecord_every = 100\n"
                          "[moments]\nztilde = 1:1\ny = 1:0.001j, 2:0.001\n")
    out = tmp_path / "o"
    assert run([command, "--config", cfg, "--out", str(out)]) == 0
    assert report(out)["command"] == command


def test_shipped_simulation_config(tmp_path):
    out = tmp_path / "o"
    assert run(["simulate", "--config", str(CONFIGS / "simulate_bumps.cfg"), "--out", str(out)]) == 0
    assert report(out)["result"]["l2_max_drift"] <= 1e-10


def test_unknown_key_and_section(tmp_path, capsys):
    assert run(["check", "--config", write(tmp_path, "[potential]\nkind = zero\nbogus = 1\n")]) == 2
    assert "bogus" in capsys.readouterr().err
    assert run(["check", "--config", write(tmp_path, "[nowhere]\nx = 1\n")]) == 2


def test_missing_file_names_path(tmp_path, capsys):
    missing = tmp_path / "absent.cfg"
    assert run(["check", "--config", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path):
    # symmetric two-mode base state for V = 0 sits on the degenerate set when q11 = q22
    cfg = write(tmp_path, "[potential]\nkind = zero\nn_modes = 4\n[coupling]\nkind = constant\nvalue = 1.0\n"
                          "[moments]\nztilde = 1:1, 2:1\ny = 1:0.01j\n")
    assert run(["moments", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_parse_state_and_types(tmp_path):
    cfg = load_config(write(tmp_path, "[entropy]\ncount = 60\nm = 2\n"), seed=3)
    assert cfg["entropy"]["count"] == 60 and cfg["entropy"]["m"] == 2.0 and cfg["entropy"]["seed"] == 3
    with pytest.raises(ValidationError):
        load_config(write(tmp_path, "[entropy]\ncount = many\n"))
    with pytest.raises(ValidationError):
        parse_state("1-1", None)
