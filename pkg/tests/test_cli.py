import subprocess
import sys

import numpy as np

from qembed import cli
from qembed import quantizer as Q


def run_cli(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_embed_prints_codes(tmp_path, capsys):
    vecs = tmp_path / "x.txt"
    vecs.write_text("1 0 0 0\n0 0 0 0\n")
    code, out, _ = run_cli(["embed", "--set", "sparse:N=4,K=1,d=1", "--ensemble",
                            "gaussian", "--delta", "0.5", "--m", "8",
                            "--in", str(vecs), "--seed", "3"], capsys)
    assert code == 0
    parsed = Q.parse_codes(out)
    assert len(parsed) == 2 and len(parsed[0]) == 8
    assert np.all(parsed[1] == 0)  # zero vector quantizes to zero under dither


def test_embed_deterministic_given_seed(tmp_path, capsys):
    vecs = tmp_path / "x.txt"
    vecs.write_text("0.5 -0.25\n")
    outs = []
    for _ in range(2):
        code, out, _ = run_cli(["embed", "--set", "ball:N=2,d=1", "--m", "16",
                                "--in", str(vecs), "--seed", "11"], capsys)
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]


def test_distance_command(tmp_path, capsys):
    vecs = tmp_path / "pairs.txt"
    vecs.write_text("1 0\n1 0\n0.5 0.5\n-0.5 0.5\n")
    code, out, _ = run_cli(["distance", "--m", "32", "--in", str(vecs),
                            "--seed", "0", "--t", "0.1"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert float(lines[0].split()[0]) == 0.0  # identical pair
    assert float(lines[1].split()[0]) > 0.0


def test_width_command(capsys):
    code, out, _ = run_cli(["width", "--set", "ball:N=2,d=1", "--draws", "4000",
                            "--seed", "1"], capsys)
    assert code == 0
    assert "diameter-link pass" in out


def test_min_m_command(capsys):
    code, out, _ = run_cli(["min-m", "--set", "sparse:N=64,K=4,d=1", "--kind",
                            "embed-structured", "--eps", "0.25", "--delta", "0.5",
                            "--seed", "0"], capsys)
    assert code == 0
    assert int(out.strip()) > 0


def test_unknown_flag_exits_2(capsys):
    code = cli.main(["embed", "--bogus-flag", "1"])
    assert code == 2


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[quantizer]\ndelta = 0.5\nwibble = 3\n")
    code, _, err = run_cli(["width", "--set", "ball:N=2,d=1", "--config", str(cfg)], capsys)
    assert code == 2
    assert "wibble" in err


def test_unknown_set_kind_exits_2(capsys):
    code, _, err = run_cli(["width", "--set", "torus:N=2"], capsys)
    assert code == 2
    assert "torus" in err


def test_config_file_supplies_values(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "[experiment]\nseed = 9\n\n"
        "[set]\nkind = ball\nn = 2\nradius = 1\n"
    )
    # radius key maps onto the d parameter of the set string
    cfg.write_text("[experiment]\nseed = 9\n\n[set]\nkind = ball\nn = 2\n")
    code, out, _ = run_cli(["width", "--draws", "2000", "--config", str(cfg)], capsys)
    assert code == 0


def test_counterexample_no_dither(capsys, tmp_path):
    code, out, _ = run_cli(["counterexamples", "--which", "no-dither", "--k0", "64",
                            "--s", "0.4", "--m", "128", "--trials", "50",
                            "--out", str(tmp_path), "--seed", "0"], capsys)
    assert code == 0
    assert "pass rate 1.0" in out
    assert (tmp_path / "counterexample-summary.csv").exists()


def test_counterexample_rejects_bad_s(capsys):
    code, _, err = run_cli(["counterexamples", "--which", "no-dither", "--s", "0.6"],
                           capsys)
    assert code == 2


def test_combinatorics_command(capsys):
    code, out, _ = run_cli(["combinatorics", "--stirling-max", "500",
                            "--mad-max", "20"], capsys)
    assert code == 0
    assert "pass" in out


def test_lemmas_command(capsys):
    code, out, _ = run_cli(["lemmas", "--trials", "100", "--seed", "2"], capsys)
    assert code == 0


def test_sweep_writes_byte_identical_csvs_across_jobs(tmp_path, capsys):
    base = ["quasi-isometry", "--set", "sparse:N=32,K=4,d=1", "--delta", "0.5",
            "--m-grid", "16,32,64", "--pairs", "10", "--trials", "2", "--seed", "4"]
    code, _, _ = run_cli(base + ["--out", str(tmp_path / "a"), "--jobs", "1"], capsys)
    assert code == 0
    code, _, _ = run_cli(base + ["--out", str(tmp_path / "b"), "--jobs", "8"], capsys)
    assert code == 0
    a = (tmp_path / "a" / "quasi-isometry.csv").read_bytes()
    b = (tmp_path / "b" / "quasi-isometry.csv").read_bytes()
    assert a == b
    dat = (tmp_path / "a" / "quasi-isometry.dat").read_text()
    assert all(len(line.split()) == 2 for line in dat.strip().splitlines())


def test_env_seed_fallback(tmp_path, capsys, monkeypatch):
    vecs = tmp_path / "x.txt"
    vecs.write_text("0.5 -0.25\n")
    monkeypatch.setenv("QEMBED_SEED", "11")
    _, out_env, _ = run_cli(["embed", "--set", "ball:N=2,d=1", "--m", "8",
                             "--in", str(vecs)], capsys)
    monkeypatch.delenv("QEMBED_SEED")
    _, out_flag, _ = run_cli(["embed", "--set", "ball:N=2,d=1", "--m", "8",
                              "--in", str(vecs), "--seed", "11"], capsys)
    assert out_env == out_flag


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "qembed.cli", "combinatorics",
                           "--stirling-max", "50", "--mad-max", "10"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
