import json

import numpy as np
import pytest

from sketchlra import dense
from sketchlra.cli import FAILED, OK, USAGE, main


def test_gen_then_approx(tmp_path, capsys):
    assert main(["gen", "--n", "64", "--r", "4", "--out", str(tmp_path)]) == OK
    M = dense.read_dmat(tmp_path / "M.dmat")
    assert M.shape == (64, 64) and np.linalg.matrix_rank(M, 1e-3) == 4
    code = main(["approx", "--matrix", str(tmp_path / "M.dmat"), "--l", "6", "--trials", "3",
                 "--out", str(tmp_path / "res")])
    assert code == OK and "3/3 succeeded" in capsys.readouterr().out
    assert any((tmp_path / "res").iterdir())


def test_gen_trials_write_one_file_each(tmp_path):
    assert main(["gen", "--n", "16", "--r", "2", "--trials", "2", "--out", str(tmp_path)]) == OK
    a, b = (dense.read_dmat(tmp_path / f"M_{t}.dmat") for t in range(2))
    assert not np.allclose(a, b)


def test_approx_fails_when_l_below_rank():
    assert main(["approx", "--n", "64", "--r", "8", "--l", "4"]) == FAILED


def test_approx_config_section(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[approx]\nfamily = 3-AH\nl = 10\nn = 64\nr = 4\n")
    assert main(["approx", "--config", str(cfg)]) == OK
    cfg.write_text("[approx]\nbogus = 1\n")
    assert main(["approx", "--config", str(cfg)]) == USAGE


def test_bench_config_and_band(tmp_path):
    body = "[experiment]\nsizes = 32x2\nclasses = gaussian, 3-AH\ntrials = 2\n"
    good, bad = tmp_path / "good.ini", tmp_path / "bad.ini"
    good.write_text(body + "band = 1e-12, 1e-6\n")
    bad.write_text(body + "band = 1, 2\n")
    out = tmp_path / "out"
    assert main(["bench", "--config", str(good), "--out", str(out)]) == OK
    assert {p.name for p in out.iterdir()} == {"results.csv", "results.plotdata", "results.png"}
    assert main(["bench", "--config", str(bad)]) == FAILED
    assert main(["bench"]) == USAGE
    (tmp_path / "broken.ini").write_text("[experiment]\nnope = 1\n")
    assert main(["bench", "--config", str(tmp_path / "broken.ini")]) == USAGE


def test_verify_suite(tmp_path, capsys):
    assert main(["verify", "hss", "--out", str(tmp_path)]) == OK
    assert "[PASS] hss:" in capsys.readouterr().out
    assert "hss" in json.loads((tmp_path / "verify.json").read_text())


def test_lsr_hss_cg(tmp_path):
    assert main(["lsr", "--m", "400", "--d", "5", "--trials", "3", "--out", str(tmp_path)]) == OK
    assert len(json.loads((tmp_path / "lsr.json").read_text())) == 3
    assert main(["hss", "--n", "256", "--r", "4"]) == OK
    assert main(["cg", "--n", "512", "--out", str(tmp_path)]) == OK
    assert json.loads((tmp_path / "cg.json").read_text())["iterations"] <= 8
    assert main(["cg", "--n", "64", "--plain"]) == OK


def test_usage_errors():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == USAGE
    assert main(["approx", "--family", "nope", "--n", "16", "--r", "2", "--l", "2"]) == USAGE
