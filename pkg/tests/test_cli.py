import json
import subprocess
import sys

import pytest

from sphclt.cli import ConfigError, RunConfig, main, parse_config
from sphclt.io import read_csv, sha256


def _run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _write_cfg(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return p


def test_parse_config_examples():
    cfg = parse_config("spectrum = polynomial 2\nLmax = 16\nl_targets = 8, 16, 24\n# comment\n\nq = 2\n")
    assert cfg.Lmax == 16 and cfg.l_targets == (8, 16, 24)
    assert cfg.spectrum == "polynomial 2"
    with pytest.raises(ConfigError) as exc:
        parse_config("q = 1.5")
    assert exc.value.errors[0].startswith("line 1: 'q = 1.5'")


def test_parse_config_collects_all_errors():
    with pytest.raises(ConfigError) as exc:
        parse_config("Lmax = 4\nfoo = 1\nq = two\nLmax = 5\nl_targets = 2, 99\nN = 10")
    errs = exc.value.errors
    assert any(e.startswith("line 2:") and "unknown key" in e for e in errs)
    assert any(e.startswith("line 3:") for e in errs)
    assert any(e.startswith("line 4:") and "duplicate" in e for e in errs)
    assert any(e.startswith("line 5:") for e in errs)
    assert any(e.startswith("line 6:") for e in errs)


def test_parse_config_ranges():
    for text in ["seed = -1", "angles = 0.5, 4", "poly_beta = 1.5", "exp_alpha = -0.1", "Lmax = 1", "cov_l = 40"]:
        with pytest.raises(ConfigError):
            parse_config(text)
    assert parse_config("poly_beta = 2\nseed = 18446744073709551615").seed == 2**64 - 1


def test_inputs_exclude_threads():
    keys = RunConfig().inputs().keys()
    assert "threads" not in keys and "out" not in keys and "seed" in keys


def test_cg_command(tmp_path, capsys):
    code, out, _ = _run(["cg", 1, 1, 1, 0, 2, 1, "--out", tmp_path], capsys)
    assert code == 0
    assert out.split()[0] == "+sqrt(1/2)"
    code, out, _ = _run(["cg", 1, 0, 1, 0, 2, 0, "--out", tmp_path], capsys)
    assert out.split()[0] == "+sqrt(2/3)"
    assert float(out.split()[1]) == pytest.approx((2 / 3) ** 0.5)
    header, rows = read_csv(tmp_path / "cg.csv")
    assert len(rows) == 1


def test_exit_codes(tmp_path, capsys):
    code, _, err = _run(["cg", 1, 0, "--out", tmp_path], capsys)
    assert code == 2
    assert json.loads(err)["error"] == "config"
    code, _, err = _run(["nonsense"], capsys)
    assert code == 2
    bad = _write_cfg(tmp_path, "q = 1.5\n")
    code, _, err = _run(["convolve", "--config", bad, "--out", tmp_path], capsys)
    assert code == 2
    rec = json.loads(err)
    assert "line 1" in rec["details"][0]
    code, _, err = _run(["convolve", "--config", tmp_path / "missing.cfg"], capsys)
    assert code == 2
    # well-formed but mathematically inadmissible spectrum
    bad = _write_cfg(tmp_path, "spectrum = polynomial 1\n")
    code, _, err = _run(["convolve", "--config", bad, "--out", tmp_path], capsys)
    assert code == 3
    assert json.loads(err)["error"] == "numeric"
    code, _, _ = _run(["cg", 1, 0, "--threads", 0], capsys)
    assert code == 2


def test_error_record_single_line(tmp_path):
    r = subprocess.run([sys.executable, "-m", "sphclt", "cg", "1"], capture_output=True, text=True, cwd=tmp_path)
    assert r.returncode == 2
    lines = r.stderr.strip().splitlines()
    assert len(lines) == 1
    assert set(json.loads(lines[0])) == {"details", "error", "message"}


def _check_manifest(out):
    man = json.loads((out / "manifest.json").read_text())
    assert man["outputs"]
    for name, digest in man["outputs"].items():
        text = (out / name).read_text()
        assert sha256(text) == digest
        if name.endswith(".csv"):
            header, rows = read_csv(text)
            assert header and all(len(r) == len(header) for r in rows)
        else:
            json.loads(text)
    assert "threads" not in man["inputs"]
    assert set(man["versions"]) == {"sphclt", "numpy", "scipy", "python"}
    return man


def test_report_outputs_reparse(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, "spectrum = exponential 0\nLmax = 6\nq = 2\nl_targets = 2, 4, 6\nN = 200\nangles = 0.5, 1.5\n")
    code, _, _ = _run(["report", "--config", cfg, "--out", tmp_path / "r", "--seed", 5], capsys)
    assert code == 0
    man = _check_manifest(tmp_path / "r")
    assert man["seed"] == 5
    for name in ["spectrum.csv", "convolution.csv", "variance.csv", "conditions.csv", "grid.csv", "samples.csv"]:
        assert name in man["outputs"]
    header, _ = read_csv(tmp_path / "r" / "spectrum.csv")
    assert header == ["l", "C_l"]


@pytest.mark.parametrize("command", ["convolve", "clt-check", "duality", "simulate"])
def test_commands_run(tmp_path, capsys, command):
    cfg = _write_cfg(tmp_path, "spectrum = polynomial 2\nLmax = 8\nl_targets = 4, 8, 16\nN = 200\n")
    code, _, err = _run([command, "--config", cfg, "--out", tmp_path / "o"], capsys)
    assert code == 0, err
    _check_manifest(tmp_path / "o")


def test_format_selection(tmp_path, capsys):
    for fmt, ext in (("csv", ".csv"), ("json", ".json")):
        out = tmp_path / fmt
        assert _run(["convolve", "--out", out, "--format", fmt], capsys)[0] == 0
        man = json.loads((out / "manifest.json").read_text())
        assert all(n.endswith(ext) for n in man["outputs"])


def _tree(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_simulate_byte_identical(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, "spectrum = exponential 0\nLmax = 6\nl_targets = 2, 6\nN = 700\nseed = 77\nangles = 1.0\n")
    runs = []
    for i, threads in enumerate([1, 4, 1]):
        out = tmp_path / f"o{i}"
        assert _run(["simulate", "--config", cfg, "--out", out, "--threads", threads], capsys)[0] == 0
        runs.append(_tree(out))
    assert runs[0] == runs[1] == runs[2]
    out = tmp_path / "other"
    _run(["simulate", "--config", cfg, "--out", out, "--seed", 78], capsys)
    assert _tree(out)["samples.csv"] != runs[0]["samples.csv"]
