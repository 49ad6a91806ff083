import csv

import numpy as np
import pytest

from ratemap import cli
from ratemap.gridmap import load_map
from ratemap.sim import ReplicationError


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_oneshot_emptiness(tmp_path, capsys):
    assert cli.main(["run-oneshot", "--config", "mars.tomlish", "--alpha", "0.02", "--out", str(tmp_path)]) == 0
    assert "rank_ratio=0.0" in capsys.readouterr().out
    row = read_rows(tmp_path / "summary.csv")[0]
    assert row["rank"] == "0"


def test_verify_oracles_clean(capsys):
    assert cli.main(["verify-oracles"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 5


def test_verify_oracles_failure_exit_code(monkeypatch, capsys):
    monkeypatch.setattr(cli, "run_all", lambda seed: [("broken", False, "x")])
    assert cli.main(["verify-oracles"]) == 2


def test_assertion_exit_code(monkeypatch, capsys):
    def boom(*a, **k):
        raise ReplicationError("plans differ")

    monkeypatch.setattr(cli, "run_sequential", boom)
    assert cli.main(["run-sequential", "--config", "earth32"]) == 2
    assert "plans differ" in capsys.readouterr().err


def test_config_errors_exit_1(tmp_path, capsys):
    assert cli.main(["run-sequential", "--config", str(tmp_path / "missing.tomlish")]) == 1
    assert "not found" in capsys.readouterr().err
    assert cli.main(["run-sequential", "--config", "earth32", "bogus=1"]) == 1
    assert cli.main(["run-sequential", "--config", "earth32", "--alpha", "-1"]) == 1
    assert cli.main(["sweep-alpha", "--config", "mars", "--values", "a,b"]) == 1


def test_full_scale_flag(tmp_path, capsys):
    assert cli.main(["run-oneshot", "--config", "mars", "crop=None", "--alpha", "0.02"]) == 1
    assert cli.main(["run-oneshot", "--config", "mars", "crop=None", "--alpha", "0.02", "--full-scale"]) == 0


def test_bad_log_level(monkeypatch, capsys):
    monkeypatch.setenv("RATEMAP_LOG", "loud")
    assert cli.main(["verify-oracles"]) == 1


def test_sequential_is_byte_deterministic(tmp_path, capsys):
    args = ["run-sequential", "--config", "earth32", "--seed", "9", "--max-steps", "12"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("metrics.csv", "steps.csv", "messages.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sweep_oneshot(tmp_path, capsys):
    assert cli.main(["sweep-alpha", "--config", "mars", "--values", "1e-5,1e-3,0.02",
                     "--out", str(tmp_path), "--jobs", "2"]) == 0
    rows = read_rows(tmp_path / "sweep.csv")
    assert [r["alpha"] for r in rows] == ["1e-05", "0.001", "0.02"]
    ranks = [float(r["rank_ratio"]) for r in rows]
    errs = [float(r["error_ratio"]) for r in rows]
    assert ranks == sorted(ranks, reverse=True) and errs == sorted(errs)
    assert (tmp_path / "alpha_00" / "posterior.pgm").exists()


def test_sweep_sequential_bits_decrease(tmp_path, capsys):
    assert cli.main(["sweep-alpha", "--values", "0.9,0.05,0.0005", "--config", "earth32",
                     "--max-steps", "40", "--out", str(tmp_path), "--jobs", "3"]) == 0
    rows = read_rows(tmp_path / "sweep.csv")
    assert len(rows) == 3
    bits = [float(r["b_avg"]) for r in rows]
    # alpha falls down the table, so the bit-rate rises strictly
    assert bits[0] < bits[1] < bits[2]


def test_preprocess_elevation(tmp_path):
    src = tmp_path / "elev.csv"
    np.savetxt(src, np.array([[0.0, 1.0, 3.0]]), delimiter=",")
    assert cli.main(["preprocess-elevation", str(src), str(tmp_path / "t.pgm")]) == 0
    np.testing.assert_allclose(load_map(tmp_path / "t.pgm").values, [0, 1, 0.5], atol=1 / 255)
    assert cli.main(["preprocess-elevation", str(tmp_path / "nope.csv"), str(tmp_path / "x.pgm")]) == 1


def test_requires_subcommand():
    with pytest.raises(SystemExit):
        cli.main([])
