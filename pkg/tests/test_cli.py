import subprocess
import sys
from math import sqrt

import numpy as np
import pytest

from sbpdg.cli import (EXIT_CHECK, EXIT_CONFIG, EXIT_OK, EXIT_UNSTABLE, ConfigError,
                       config_from_mapping, main, parse_config, run_experiments)

TINY = """problem = "advection"
[scheme]
M = 2
T = 0.02
[matrix]
p = 2
variants = ["QuadratureI", "QuadratureII"]
c = ["c_DG", "c_plus"]
lam = [1.0]
"""


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_minimal_advection_defaults(tmp_path):
    run = parse_config(write(tmp_path, 'problem = "advection"\n'))
    assert run.p == (2, 3, 4) and run.lam == (0.0, 1.0)
    assert len(run.combinations()) == 36
    cfg = run.scheme_config(2, "QuadratureI", "c_DG", 1.0, "strong_fr")
    assert (cfg.M, cfg.p_map, cfg.T, cfg.L, cfg.beta) == (8, 1, 1.0, 1.0, 2.5e-3)


def test_euler_defaults(tmp_path):
    run = parse_config(write(tmp_path, 'problem = "euler"\n[scheme]\nmach = 0.5\n'))
    cfg = run.scheme_config(3, "QuadratureI", "c_DG", 1.0, "strong_fr")
    assert cfg.T == pytest.approx(sqrt(2) * 10 / 0.5)
    assert (cfg.M, cfg.p_map) == (16, 3)
    desk = run.desk_scale().scheme_config(2, "QuadratureI", "c_DG", 1.0, "strong_fr")
    assert (desk.M, desk.p, desk.p_map) == (8, 2, 2)


@pytest.mark.parametrize("data, msg", [
    ({"problem": "advection", "matrix": {"forms": ["strong_dg", "weak_dg"]}}, "c=c_plus"),
    ({"problem": "advection", "extra": 1}, "extra"),
    ({"problem": "advection", "scheme": {"N": 3}}, "'N'"),
    ({"problem": "advection", "matrix": {"variants": ["QuadratureIII"]}}, "QuadratureIII"),
    ({"problem": "euler", "matrix": {"lam": [0.0]}}, "lam"),
    ({"problem": "advection", "matrix": {"forms": ["strong_fr"]}}, "exactly two"),
    ({"problem": "heat"}, "problem"),
    ({"problem": "advection", "scheme": {"M": "many"}}, "M"),
])
def test_config_rejections(data, msg):
    with pytest.raises(ConfigError, match=msg):
        config_from_mapping(data)


def test_strong_dg_with_c_plus_exits_2(tmp_path, capsys):
    text = 'problem = "advection"\n[matrix]\nc = "c_plus"\nforms = ["strong_dg", "weak_dg"]\n'
    assert main(["run", "--config", write(tmp_path, text)]) == EXIT_CONFIG
    assert "form=strong_dg" in capsys.readouterr().err


def test_toml_syntax_error_exits_2(tmp_path, capsys):
    assert main(["run", "--config", write(tmp_path, 'problem = "advection\n')]) == EXIT_CONFIG
    assert "line 1" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.toml")]) == EXIT_CONFIG


def test_tiny_run_is_deterministic(tmp_path):
    cfg = write(tmp_path, TINY)
    outs = []
    for name in ("a", "b"):
        assert main(["run", "--config", cfg, "--output-dir", str(tmp_path / name), "-q"]) == EXIT_OK
        outs.append((tmp_path / name / "advection_p2.csv").read_bytes())
    assert outs[0] == outs[1]
    lines = outs[0].decode().splitlines()
    assert len(lines) == 5


def test_check_mode_reports_results(tmp_path, capsys):
    status = main(["run", "--config", write(tmp_path, TINY), "--output-dir", str(tmp_path),
                   "--check", "-q"])
    out = capsys.readouterr().out
    # a 0.02 time unit run on 8 elements cannot meet the published energy values
    assert status == EXIT_CHECK
    assert "checks passed" in out and "PASS [2]" in out and "FAIL [4]" in out


def test_unexpected_instability_exits_4(tmp_path, capsys):
    text = TINY.replace("T = 0.02", "T = 20.0\nbeta = 20.0").replace(
        '"QuadratureI", "QuadratureII"', '"QuadratureI"').replace('"c_DG", "c_plus"', '"c_DG"')
    assert main(["run", "--config", write(tmp_path, text), "--output-dir", str(tmp_path),
                 "-q"]) == EXIT_UNSTABLE
    assert "unexpected instability: advection p=2 QuadratureI c_DG 1" in capsys.readouterr().err
    assert "UNSTABLE" in (tmp_path / "advection_p2.csv").read_text()


def test_expected_instability_is_not_an_error(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    text = TINY.replace("T = 0.02", "T = 4.0").replace(
        '"QuadratureI", "QuadratureII"', '"QuadratureII"').replace(
        'c = ["c_DG", "c_plus"]', 'c = ["c_DG"]').replace("lam = [1.0]", "lam = [0.0]")
    outcome = run_experiments(parse_config(write(tmp_path, text)))
    assert not outcome.records[0].stable
    assert outcome.status == EXIT_OK and outcome.unexpected == []


def test_dump_operators_and_mesh(tmp_path):
    text = TINY.replace('"QuadratureI", "QuadratureII"', '"Collocation"').replace(
        'c = ["c_DG", "c_plus"]', 'c = ["c_DG"]')
    ops_dir, mesh_dir = tmp_path / "ops", tmp_path / "mesh"
    assert main(["run", "--config", write(tmp_path, text), "--output-dir", str(tmp_path / "out"),
                 "--dump-operators", str(ops_dir), "--dump-mesh", str(mesh_dir), "-q"]) == EXIT_OK
    M = np.loadtxt(ops_dir / "Collocation_p2_c0_M.csv", delimiter=",")
    assert M.shape == (6, 6)
    assert (mesh_dir / "p2_Collocation_pmap1" / "interfaces.csv").exists()


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "sbpdg", "run", "--config",
                          str(tmp_path / "absent.toml")], capture_output=True, text=True)
    assert out.returncode == EXIT_CONFIG and "config error" in out.stderr
    out = subprocess.run([sys.executable, "-m", "sbpdg", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "run" in out.stdout
