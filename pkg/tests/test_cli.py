"""End-to-end command-line behavior, driven in-process through main()."""

import io
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
import pytest

from focus_forecast.cli import main
from focus_forecast.container import load_prototypes
from focus_forecast.data import load_csv


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


def kv(text):
    pairs = {}
    for line in text.strip().splitlines():
        if "," in line:
            continue  # CSV rows
        for token in line.split():
            if "=" in token:
                key, _, val = token.partition("=")
                pairs[key] = val
    return pairs


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth -> cluster -> train, shared by the downstream command tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "run.cfg"
    cfg.write_text("max_epochs=2\nbatch_size=32\npatience=3\ncluster_max_iters=60\n")
    data = str(root / "synth.csv")
    protos = str(root / "protos.bin")
    model = str(root / "model.bin")

    code, out_synth, _ = run(
        ["synth", "--out", data, "--entities", "3", "--steps", "400",
         "--k-true", "3", "--sigma", "0.1", "--p", "8", "--seed", "0"]
    )
    assert code == 0
    code, out_cluster, _ = run(
        ["cluster", "--data", data, "--p", "8", "--k", "4", "--alpha", "0.2",
         "--out", protos, "--config", str(cfg)]
    )
    assert code == 0
    code, out_train, _ = run(
        ["train", "--data", data, "--protos", protos, "--lookback", "32",
         "--horizon", "8", "--d", "8", "--m", "2", "--out", model,
         "--config", str(cfg)]
    )
    assert code == 0
    return {
        "root": root, "cfg": cfg, "data": data, "protos": protos, "model": model,
        "out_synth": out_synth, "out_cluster": out_cluster, "out_train": out_train,
    }


def test_synth_outputs(pipeline):
    pairs = kv(pipeline["out_synth"])
    assert pairs["steps"] == "400" and pairs["entities"] == "3"
    assert pairs["k_true"] == "3" and pairs["p"] == "8"
    ds = load_csv(pipeline["data"])
    assert ds.values.shape == (400, 3)
    templates = load_prototypes(pipeline["data"] + ".templates")
    assert templates.prototypes.shape == (3, 8)


def test_synth_is_deterministic(tmp_path):
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    args = ["synth", "--entities", "2", "--steps", "100", "--k-true", "2",
            "--sigma", "0.05", "--seed", "7"]
    assert run(args + ["--out", a])[0] == 0
    assert run(args + ["--out", b])[0] == 0
    np.testing.assert_array_equal(load_csv(a).values, load_csv(b).values)


def test_cluster_output(pipeline):
    pairs = kv(pipeline["out_cluster"])
    assert pairs["k"] == "4" and pairs["p"] == "8" and pairs["alpha"] == "0.2"
    # 280 train rows over 3 entities at p=8: 35 segments each
    assert pairs["segments"] == "105"
    protos = load_prototypes(pipeline["protos"])
    assert protos.prototypes.shape == (4, 8)


def test_train_output(pipeline):
    pairs = kv(pipeline["out_train"])
    assert pairs["best_epoch"] in {"1", "2"}
    assert float(pairs["test_mse"]) > 0
    assert "epoch=1 " in pipeline["out_train"]


def test_eval_matches_train_report(pipeline):
    code, out, _ = run(
        ["eval", "--data", pipeline["data"], "--model", pipeline["model"],
         "--split", "test"]
    )
    assert code == 0
    assert f"mse={kv(pipeline['out_train'])['test_mse']}" in out
    assert kv(out)["split"] == "test"
    assert int(kv(out)["windows"]) > 0


def test_eval_val_split_runs(pipeline):
    code, out, _ = run(
        ["eval", "--data", pipeline["data"], "--model", pipeline["model"],
         "--split", "val"]
    )
    assert code == 0
    # val partition has exactly 40 rows = one lookback-32/horizon-8 window
    assert kv(out)["windows"] == "1"


def test_forecast_writes_horizon_rows(pipeline):
    out_csv = str(pipeline["root"] / "fc.csv")
    code, out, _ = run(
        ["forecast", "--data", pipeline["data"], "--model", pipeline["model"],
         "--out", out_csv]
    )
    assert code == 0
    fc = load_csv(out_csv)
    assert fc.values.shape == (8, 3)
    assert fc.entity_names == load_csv(pipeline["data"]).entity_names
    assert np.all(np.isfinite(fc.values))


def test_eval_entity_mismatch_is_validation_failure(pipeline, tmp_path):
    two = str(tmp_path / "two.csv")
    assert run(["synth", "--out", two, "--entities", "2", "--steps", "400",
                "--k-true", "2", "--sigma", "0.1", "--seed", "1"])[0] == 0
    code, _, err = run(["eval", "--data", two, "--model", pipeline["model"],
                        "--split", "test"])
    assert code == 1
    assert "entities" in err


def test_forecast_needs_full_lookback(pipeline, tmp_path):
    short = str(tmp_path / "short.csv")
    assert run(["synth", "--out", short, "--entities", "3", "--steps", "24",
                "--k-true", "2", "--sigma", "0.1", "--p", "8", "--seed", "1"])[0] == 0
    code, _, err = run(["forecast", "--data", short, "--model", pipeline["model"],
                        "--out", str(tmp_path / "fc.csv")])
    assert code == 1
    assert "lookback" in err


def test_missing_data_file_is_io_failure(pipeline, tmp_path):
    code, _, err = run(["cluster", "--data", str(tmp_path / "nope.csv"), "--p", "8",
                        "--k", "4", "--alpha", "0.2", "--out", str(tmp_path / "p.bin")])
    assert code == 2
    assert "error:" in err


def test_flag_misuse_is_validation_failure():
    assert run(["synth", "--out", "x.csv"])[0] == 1          # missing required flags
    assert run(["cluster", "--bogus", "1"])[0] == 1          # unknown flag
    assert run(["eval", "--data", "d", "--model", "m", "--split", "weird"])[0] == 1
    assert run(["bench", "--mode", "quantum", "--sizes", "8,16,32"])[0] == 1


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("flux_capacitor=1\n")
    code, _, err = run(["synth", "--out", str(tmp_path / "x.csv"), "--entities", "2",
                        "--steps", "100", "--k-true", "2", "--sigma", "0.1",
                        "--seed", "0", "--config", str(cfg)])
    assert code == 1
    assert "flux_capacitor" in err


def test_missing_config_file(tmp_path):
    code, _, _ = run(["synth", "--out", str(tmp_path / "x.csv"), "--entities", "2",
                      "--steps", "100", "--k-true", "2", "--sigma", "0.1",
                      "--seed", "0", "--config", str(tmp_path / "nope.cfg")])
    assert code == 2


def test_bench_csv_and_bad_sizes(tmp_path):
    cfg = tmp_path / "small.cfg"
    cfg.write_text("k=4\nd=8\np=4\nm=2\n")
    code, out, _ = run(["bench", "--mode", "protoattn", "--sizes", "8,16,32",
                        "--config", str(cfg)])
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "experiment,size,median_ns,flops,peak_bytes,slope"
    assert len(lines) == 4

    assert run(["bench", "--mode", "protoattn", "--sizes", "8;16"])[0] == 1
    assert run(["bench", "--mode", "protoattn", "--sizes", "8,16"])[0] == 1


def test_gradcheck_passes(tmp_path):
    code, out, _ = run(["gradcheck", "--seed", "0"])
    assert code == 0
    pairs = kv(out)
    assert pairs["ok"] == "1"
    assert float(pairs["max_rel_err"]) <= 1e-4
    assert "config=2 tensor=w_in" in out
