import math

import pytest

from qtc.cli import (
    ConfigError,
    gaussian_rd_config,
    gaussian_rd_run,
    gaussian_wz_params,
    gaussian_wz_run,
    main,
    parse_config,
)
from qtc.core import SeedPath


def run_cli(tmp_path, *argv):
    out = tmp_path / "out.csv"
    code = main([*argv, "--out", str(out)])
    return code, out.read_text() if out.exists() else ""


def test_parse_config_rejects_unknown_and_bad_values():
    schema = {"a": int, "b": float, "c": list}
    vals = parse_config("a = 3\n# comment\nb = 1.5\nc = 1 2 3\n", schema, {"a": 0, "b": 0.0, "c": []})
    assert vals == {"a": 3, "b": 1.5, "c": [1.0, 2.0, 3.0]}
    with pytest.raises(ConfigError):
        parse_config("zzz = 1", schema, {})
    with pytest.raises(ConfigError):
        parse_config("a = not_an_int", schema, {})
    with pytest.raises(ConfigError):
        parse_config("just a line", schema, {})


def test_gaussian_rd_parameters():
    cfg, rate = gaussian_rd_config(1.0, 1 / 16, 4096)
    assert cfg.ladder.h == 4 and cfg.s == 2
    assert rate <= 0.5 * math.log2(16) + 6
    with pytest.raises(ValueError):
        gaussian_rd_config(1.0, 0.3, 64)  # D >= v/4


def test_gaussian_rd_meets_distortion():
    rng = SeedPath(0).stream()
    mse, rate = gaussian_rd_run(1.0, 1 / 16, 1024, 50, rng)
    assert mse <= 1 / 16
    mse_l, _ = gaussian_rd_run(1.0, 1 / 16, 1024, 50, rng, source="laplace")
    assert mse_l <= 1 / 16


def test_gaussian_wz_parameters():
    params, log_k = gaussian_wz_params(0.1, 0.1**2 / 400)
    assert log_k <= 0.5 * math.log2(400) + 8
    with pytest.raises(ValueError):
        gaussian_wz_params(0.1, 0.1**2 / 100)  # D > sigma^2/308


def test_gaussian_wz_meets_distortion():
    rng = SeedPath(1).stream()
    D = 0.1**2 / 400
    mse, _ = gaussian_wz_run(0.1, D, 512, 50, rng)
    assert mse <= D


def test_cli_deterministic_csv(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("zipf_n = 16\nzipf_s = 1.0\n")
    outs = []
    for _ in range(2):
        code, text = run_cli(tmp_path, "aoi-solve", "--config", str(cfg), "--seed", "9")
        assert code == 0
        outs.append(text)
    assert outs[0] == outs[1]
    assert outs[0].splitlines()[0].startswith("objective,")


def test_cli_quantize_bench(tmp_path):
    cfg = tmp_path / "q.cfg"
    cfg.write_text("d = 32\nquantizers = ratq,simq\n")
    code, text = run_cli(tmp_path, "quantize-bench", "--config", str(cfg),
                         "--seed", "3", "--trials", "200")
    assert code == 0
    lines = text.strip().splitlines()
    assert len(lines) == 3 and lines[1].startswith("ratq,32,")


def test_cli_dme_bench_monotone(tmp_path):
    cfg = tmp_path / "d.cfg"
    cfg.write_text("n = 4\nd = 32\nr_list = 10 20\n")
    code, text = run_cli(tmp_path, "dme-bench", "--config", str(cfg),
                         "--seed", "4", "--trials", "300")
    assert code == 0
    rows = [line.split(",") for line in text.strip().splitlines()[1:]]
    assert float(rows[0][5]) > float(rows[1][5])  # mse decreases in r


def test_cli_rd_and_sim(tmp_path):
    cfg = tmp_path / "r.cfg"
    cfg.write_text("d = 256\nblocks = 20\n")
    code, text = run_cli(tmp_path, "rd-bench", "--config", str(cfg), "--seed", "5")
    assert code == 0 and text.startswith("mode,")
    cfg2 = tmp_path / "s.cfg"
    cfg2.write_text("zipf_n = 8\nhorizon = 20000\n")
    code, text = run_cli(tmp_path, "aoi-sim", "--config", str(cfg2), "--seed", "6")
    assert code == 0
    row = text.strip().splitlines()[1].split(",")
    assert abs(float(row[3]) - float(row[5])) < 0.5


def test_cli_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert main(["aoi-sim", "--config", str(bad)]) == 1
    zero = tmp_path / "zero.cfg"
    zero.write_text("T_list = 0\n")
    assert main(["opt-bench", "--config", str(zero)]) == 1
    badrd = tmp_path / "badrd.cfg"
    badrd.write_text("D_frac = 2\n")  # D = v/2 > v/4
    assert main(["rd-bench", "--config", str(badrd)]) == 1
    assert main(["aoi-sim", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_cli_bad_pmf_file(tmp_path):
    pmf = tmp_path / "p.txt"
    pmf.write_text("a 0.5\nb 0.4\n")
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"pmf_file = {pmf}\n")
    assert main(["aoi-solve", "--config", str(cfg)]) == 1
