import json
import subprocess
import sys

import numpy as np
import pytest

from wdrocore.cli import main
from wdrocore.coreset import Coreset
from wdrocore.dataio import parse_libsvm, synth_blobs, write_libsvm

COMMANDS = ["coreset", "train", "eval", "perturb", "bench", "selftest"]


@pytest.fixture
def one(tmp_path):
    p = tmp_path / "one.svm"
    p.write_text("+1 1:2 2:0\n")
    return p


@pytest.fixture
def blobs(tmp_path):
    p = tmp_path / "blobs.svm"
    p.write_text(write_libsvm(synth_blobs(80, 3, seed=1)))
    return p


def risk_of(out):
    return float(dict(line.split() for line in out.strip().splitlines())["risk"])


@pytest.mark.parametrize("cmd", COMMANDS + [None])
def test_help_exits_zero(cmd, capsys):
    argv = ([cmd] if cmd else []) + ["--help"]
    assert main(argv) == 0
    assert "usage" in capsys.readouterr().out


def test_eval_single_sample(one, capsys):
    code = main(["eval", "--input", str(one), "--loss", "svm", "--sigma", "0.5", "--theta", "1,0"])
    assert code == 0
    out = capsys.readouterr().out
    assert risk_of(out) == pytest.approx(0.5, abs=1e-10)
    assert "lambda_star 1" in out and "at_boundary true" in out


def test_eval_brute_flag(one, capsys):
    assert main(["eval", "--input", str(one), "--loss", "svm", "--sigma", "0.5", "--theta", "1,0",
                 "--brute"]) == 0
    out = dict(l.split() for l in capsys.readouterr().out.splitlines())
    assert float(out["brute_force"]) == pytest.approx(0.5, rel=1e-2)


def test_missing_sigma_is_usage_error(one, capsys):
    assert main(["eval", "--input", str(one), "--theta", "1,0"]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_and_command(capsys):
    assert main(["eval", "--bogus"]) == 1
    assert main(["frobnicate"]) == 1
    assert main([]) == 1


def test_bad_loss_is_usage_error(one):
    assert main(["eval", "--input", str(one), "--loss", "ridge", "--sigma", "1", "--theta", "1,0"]) == 1


def test_data_errors(tmp_path, capsys):
    assert main(["eval", "--input", str(tmp_path / "missing"), "--sigma", "1", "--theta", "1"]) == 2
    bad = tmp_path / "bad.svm"
    bad.write_text("+1 1:1\n-1 x:2\n")
    assert main(["eval", "--input", str(bad), "--sigma", "1", "--theta", "1"]) == 2
    assert "line 2" in capsys.readouterr().err


def test_domain_error_exit_code(one):
    assert main(["eval", "--input", str(one), "--sigma", "-1", "--theta", "1,0"]) == 3
    # hypercube model has no exact oracle
    assert main(["train", "--input", str(one), "--loss", "hypercube-svm:1", "--sigma", "1"]) == 3


def test_identity_coreset_eval_matches_full(blobs, tmp_path, capsys):
    cs = tmp_path / "cs.json"
    common = ["--input", str(blobs), "--sigma", "0.3", "--theta-anc", "0.5,0,0", "--lp", "2"]
    assert main(["coreset", *common, "--budget", "1.0", "--out", str(cs), "--seed", "4"]) == 0
    assert Coreset.from_json(cs.read_text()).size == 80
    capsys.readouterr()
    assert main(["eval", *common, "--theta", "1,0.2,-0.1"]) == 0
    full = risk_of(capsys.readouterr().out)
    assert main(["eval", *common, "--theta", "1,0.2,-0.1", "--coreset", str(cs)]) == 0
    assert risk_of(capsys.readouterr().out) == pytest.approx(full, rel=1e-12)


def test_coreset_budget_fraction_and_count(blobs, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    common = ["coreset", "--input", str(blobs), "--sigma", "0.3"]
    assert main([*common, "--budget", "0.25", "--out", str(a)]) == 0
    assert main([*common, "--budget", "20", "--out", str(b)]) == 0
    assert a.read_text() == b.read_text()
    assert Coreset.from_json(a.read_text()).size == 20
    assert main([*common, "--budget", "2.5"]) == 1
    assert main([*common, "--budget", "0"]) == 1
    assert main([*common, "--budget", "0.25", "--uniform", "--out", str(a)]) == 0
    assert Coreset.from_json(a.read_text()).meta["method"] == "unisamp"


def test_train_then_eval(blobs, tmp_path, capsys):
    cs, th = tmp_path / "cs.json", tmp_path / "theta.json"
    common = ["--input", str(blobs), "--sigma", "0.3"]
    assert main(["coreset", *common, "--budget", "0.3", "--out", str(cs)]) == 0
    assert main(["train", *common, "--coreset", str(cs), "--steps", "30", "--out", str(th)]) == 0
    doc = json.loads(th.read_text())
    assert len(doc["theta"]) == 3 and doc["iterations"] == 30
    assert main(["eval", *common, "--theta", str(th)]) == 0
    assert risk_of(capsys.readouterr().out) > 0


def test_reproducible_outputs(blobs, tmp_path):
    outs = []
    for k in range(2):
        cs, th = tmp_path / f"cs{k}.json", tmp_path / f"th{k}.json"
        main(["coreset", "--input", str(blobs), "--sigma", "0.3", "--budget", "0.2", "--seed", "9",
              "--out", str(cs)])
        main(["train", "--input", str(blobs), "--sigma", "0.3", "--coreset", str(cs), "--steps", "10",
              "--out", str(th)])
        outs.append((cs.read_bytes(), th.read_bytes()))
    assert outs[0] == outs[1]


def test_perturb(blobs, tmp_path):
    out, rec = tmp_path / "p.svm", tmp_path / "rec.txt"
    assert main(["perturb", "--input", str(blobs), "--noise-std", "1", "--flip-rate", "0.1",
                 "--normalize", "--scaling-out", str(rec), "--out", str(out), "--seed", "3"]) == 0
    src = parse_libsvm(blobs.read_bytes())
    ds = parse_libsvm(out.read_bytes())
    assert ds.n == src.n and int(np.sum(ds.y != src.y)) == 8
    assert 0.0 <= ds.X.min() and ds.X.max() <= 1.0
    assert len(rec.read_text().splitlines()) == 3
    again = tmp_path / "q.svm"
    main(["perturb", "--input", str(blobs), "--noise-std", "1", "--flip-rate", "0.1",
          "--normalize", "--out", str(again), "--seed", "3"])
    assert again.read_bytes() == out.read_bytes()


def test_perturb_csv_input(tmp_path, capsys):
    p = tmp_path / "d.csv"
    p.write_text("x1,x2,label\n1,2,1\n3,4,-1\n")
    assert main(["perturb", "--input", str(p), "--header"]) == 0
    assert parse_libsvm(capsys.readouterr().out).n == 2


def test_bench_config_and_overrides(tmp_path):
    cfg = tmp_path / "bench.cfg"
    cfg.write_text("n = 60\nm = 2\ntrials = 5\nrates = 0.1, 0.2\nsteps = 5\nnormalize = false\n")
    csv1, csv2, plot = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "p.dat"
    argv = ["bench", "--config", str(cfg), "--trials", "2", "--set", "sigma=0.5", "--threads", "1"]
    assert main([*argv, "--out-csv", str(csv1), "--out-plot", str(plot)]) == 0
    assert main([*argv, "--out-csv", str(csv2), "--threads", "2"]) == 0
    assert csv1.read_bytes() == csv2.read_bytes()
    lines = csv1.read_text().splitlines()
    assert lines[0] == "method,c,risk_mean,risk_std,time_mean_ms"
    assert len(lines) == 1 + 3 * 2
    assert plot.read_text().count("# ") == 3


def test_bench_bad_config(tmp_path):
    cfg = tmp_path / "bench.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["bench", "--config", str(cfg)]) == 1
    assert main(["bench", "--set", "trials"]) == 1
    assert main(["bench", "--set", "rates=2.0"]) == 1


def test_bench_threads_env(monkeypatch, tmp_path):
    monkeypatch.setenv("WDRO_THREADS", "2")
    out = tmp_path / "a.csv"
    assert main(["bench", "--set", "n=40", "--set", "rates=0.5", "--trials", "1", "--set", "steps=3",
                 "--out-csv", str(out)]) == 0
    assert out.exists()


def test_selftest(capsys):
    assert main(["selftest"]) == 0
    assert "all checks passed" in capsys.readouterr().out


def test_module_entry_point(one):
    proc = subprocess.run([sys.executable, "-m", "wdrocore", "eval", "--input", str(one), "--loss", "svm",
                           "--sigma", "0.5", "--theta", "1,0"], capture_output=True, text=True)
    assert proc.returncode == 0 and "risk 0.5" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "wdrocore", "eval"], capture_output=True, text=True)
    assert proc.returncode == 1
