"""End-to-end command-line runs on deliberately tiny problems."""

import json

import pytest

from hypergrad.cli import build_parser, main, resolve_config
from hypergrad.data_io import read_jsonl


def run_cli(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def write_cfg(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


TINY_CLEAN = """
experiment = clean
seed = 0
n_train = 24
n_val = 24
n_test = 40
corruption = 0.5
inner_steps = 30
inner_lr = 0.1
radius = 12.0
hyper_iters = 8
hyper_lr = 0.05
"""

TINY_MTL = """
experiment = mtl
seed = 0
n_seeds = 2
n_classes = 4
n_clusters = 2
n_features = 8
n_train = 16
n_val = 16
n_test = 40
inner_steps = 25
inner_lr = 0.01
radius = 2.0
hyper_iters = 4
hyper_lr = 0.05
"""

TINY_RTHO = """
experiment = rtho
seed = 0
n_seeds = 1
n_classes = 3
n_features = 6
n_train = 60
n_val = 30
n_test = 30
batch_size = 10
inner_steps = 20
delta = 10
hyper_iters = 6
hyper_lr = 0.01
"""


def test_parser_requires_subcommand(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_resolve_config_flag_overrides(tmp_path):
    cfg_path = write_cfg(tmp_path, "experiment = clean\nseed = 3\n")
    args = build_parser().parse_args(
        ["clean", "--config", cfg_path, "--seed", "9", "--hyper-iters", "2"])
    cfg = resolve_config(args)
    assert cfg.seed == 9           # flag wins over file
    assert cfg.hyper_iters == 2
    assert cfg.experiment == "clean"


def test_clean_end_to_end(tmp_path, capsys):
    cfg = write_cfg(tmp_path, TINY_CLEAN)
    out_dir = tmp_path / "runs"
    code, out, err = run_cli(["clean", "--config", cfg, "--out", str(out_dir)],
                             capsys)
    assert code == 0, err
    assert "F1=" in out
    base = out_dir / "clean"
    assert (base / "config.txt").exists()
    assert (base / "metrics.json").exists()
    records = read_jsonl(base / "records.jsonl")
    assert len(records) == 8
    metrics = json.loads((base / "metrics.json").read_text())["metrics"]
    for key in ("f1", "test_accuracy", "baseline_accuracy", "oracle_accuracy"):
        assert key in metrics


def test_mtl_end_to_end(tmp_path, capsys):
    cfg = write_cfg(tmp_path, TINY_MTL)
    out_dir = tmp_path / "runs"
    code, out, err = run_cli(["mtl", "--config", cfg, "--out", str(out_dir)],
                             capsys)
    assert code == 0, err
    assert "margin=" in out
    metrics = json.loads(
        (out_dir / "mtl" / "metrics.json").read_text())["metrics"]
    for name in ("stl", "nmtl", "hmtl", "hmtl_s"):
        assert len(metrics[name]["per_seed"]) == 2


def test_rtho_end_to_end(tmp_path, capsys):
    cfg = write_cfg(tmp_path, TINY_RTHO)
    out_dir = tmp_path / "runs"
    code, out, err = run_cli(["rtho", "--config", cfg, "--out", str(out_dir)],
                             capsys)
    assert code == 0, err
    assert "val_acc=" in out
    base = out_dir / "rtho"
    assert (base / "stream.csv").exists()
    metrics = json.loads((base / "metrics.json").read_text())["metrics"]
    assert "final_eta" in metrics and "final_mu" in metrics


def test_bench_smoke(tmp_path, capsys):
    cfg = write_cfg(tmp_path, """
experiment = bench
seed = 0
bench_m = 1,3
bench_steps = 5,10
""")
    code, out, err = run_cli(["bench", "--config", cfg, "--out",
                              str(tmp_path / "runs")], capsys)
    assert code == 0, err
    timings = json.loads(
        (tmp_path / "runs" / "bench" / "metrics.json").read_text())["timings"]
    assert any(key.startswith("forward") for key in timings)


def test_randsearch_end_to_end(tmp_path, capsys):
    cfg = write_cfg(tmp_path, """
experiment = randsearch
seed = 0
n_classes = 3
n_features = 6
n_train = 60
n_val = 30
n_test = 30
batch_size = 10
inner_steps = 15
budget = 4
""")
    code, out, err = run_cli(["randsearch", "--config", cfg, "--out",
                              str(tmp_path / "runs")], capsys)
    assert code == 0, err
    assert "best score=" in out


def test_check_subcommand_reports_per_check_lines(capsys):
    code, out, err = run_cli(["check"], capsys)
    assert code == 0
    lines = [ln for ln in out.splitlines() if ln.startswith(("PASS", "FAIL"))]
    assert len(lines) > 300          # the full verification battery
    assert all(ln.startswith("PASS") for ln in lines)
    assert "checks passed" in out


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "experiment = clean\ninner_steps = 0\n")
    code, out, err = run_cli(["clean", "--config", cfg], capsys)
    assert code == 2
    assert "config error" in err


def test_unknown_key_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "experiment = clean\nbogus = 1\n")
    code, out, err = run_cli(["clean", "--config", cfg], capsys)
    assert code == 2
    assert "bogus" in err


def test_missing_config_file_exit_code(capsys):
    code, out, err = run_cli(["clean", "--config", "/no/such/file.cfg"],
                             capsys)
    assert code == 2
    assert "cannot read config" in err


@pytest.mark.filterwarnings("ignore:overflow encountered")
@pytest.mark.filterwarnings("ignore:invalid value encountered")
def test_divergence_exit_code(tmp_path, capsys):
    # the ridge term keeps the inner map expansive at absurd rates, so
    # the weights overflow and the step-level finiteness check trips
    cfg = write_cfg(tmp_path, TINY_MTL.replace("inner_lr = 0.01",
                                               "inner_lr = 1e15"))
    code, out, err = run_cli(["mtl", "--config", cfg, "--out",
                              str(tmp_path / "runs")], capsys)
    assert code == 3
    assert "numerical divergence" in err


def test_cli_rerun_reproduces_digest(tmp_path, capsys):
    cfg = write_cfg(tmp_path, TINY_RTHO)
    digests = []
    for sub in ("a", "b"):
        out_dir = tmp_path / sub
        code, _, _ = run_cli(["rtho", "--config", cfg, "--out", str(out_dir)],
                             capsys)
        assert code == 0
        payload = json.loads((out_dir / "rtho" / "metrics.json").read_text())
        digests.append(payload["digest"])
    assert digests[0] == digests[1]
