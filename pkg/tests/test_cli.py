"""End-to-end runs of the command line surface via main(argv)."""

import json
import subprocess
import sys

import numpy as np
import pytest

from dflkit import cli
from dflkit import simdata as sd

CONVEX = {"objective": "synthetic_convex", "dim": 2}


def jdump(path, blob):
    path.write_text(json.dumps(blob))
    return str(path)


@pytest.fixture()
def data_csv(tmp_path):
    out = tmp_path / "data.csv"
    rc = cli.main(["gen-data", "--task", "synthetic", "--n", "60",
                   "--seed", "1", "--out", str(out)])
    assert rc == 0
    return out


def test_gen_data_writes_csv_and_provenance(tmp_path):
    out = tmp_path / "d.csv"
    rc = cli.main(["gen-data", "--task", "synthetic", "--n", "24",
                   "--seed", "3", "--out", str(out)])
    assert rc == 0
    ds = sd.load(str(out))
    assert len(ds) == 24
    assert set(ds.split) == {"train", "val", "test"}
    prov = json.loads((tmp_path / "d.provenance.json").read_text())
    assert prov["config"]["seed"] == 3
    assert prov["dataset"]["kind"] == "gmm"
    assert "generator" in prov["dataset"]


def test_gen_data_timeseries_tasks(tmp_path):
    for task in ("wind", "inventory", "vaccine"):
        out = tmp_path / f"{task}.csv"
        rc = cli.main(["gen-data", "--task", task, "--n", "10",
                       "--seed", "0", "--out", str(out)])
        assert rc == 0
        assert len(sd.load(str(out))) == 10


def test_bad_choice_is_one_line_config_error(tmp_path, capsys):
    rc = cli.main(["gen-data", "--task", "bogus", "--n", "5",
                   "--out", str(tmp_path / "x.csv")])
    assert rc == 2
    err = capsys.readouterr().err
    assert err.startswith("config error:")
    assert "--task" in err
    assert err.strip().count("\n") == 0


def test_bad_split_names_the_flag(tmp_path, capsys):
    rc = cli.main(["gen-data", "--task", "synthetic", "--n", "10",
                   "--out", str(tmp_path / "x.csv"), "--split", "a,b,c"])
    assert rc == 2
    assert "--split" in capsys.readouterr().err


def test_full_df2_pipeline(tmp_path, data_csv):
    cfg = jdump(tmp_path / "cfg.json",
                {"objective": CONVEX, "seed": 0, "S": 12, "d": 8,
                 "hidden": [16], "epochs": 3, "J": 8, "batch_size": 16})
    ckpt = tmp_path / "model.json"
    rc = cli.main(["train", "--method", "df2", "--config", cfg,
                   "--data", str(data_csv), "--out", str(ckpt)])
    assert rc == 0
    blob = json.loads(ckpt.read_text())
    assert blob["run_config"]["config"]["S"] == 12
    loss = (tmp_path / "model.loss.csv").read_text().splitlines()
    assert loss[0].startswith("# config:")
    assert loss[1] == "epoch,train_mse,val_mse"

    sc = jdump(tmp_path / "solver.json", {"iters": 80, "restarts": 0})
    dec = tmp_path / "decisions.csv"
    rc = cli.main(["decide", "--model", str(ckpt), "--data", str(data_csv),
                   "--solver-config", sc, "--out", str(dec)])
    assert rc == 0
    lines = dec.read_text().splitlines()
    assert lines[0].startswith("# config:")
    assert lines[1] == "row,a_0,a_1"
    ds = sd.load(str(data_csv))
    test_rows = set(np.flatnonzero(ds.split == "test").tolist())
    got_rows = {int(l.split(",")[0]) for l in lines[2:]}
    assert got_rows == test_rows

    obj = jdump(tmp_path / "obj.json", CONVEX)
    rep_path = tmp_path / "report.json"
    rc = cli.main(["evaluate", "--decisions", str(dec), "--data",
                   str(data_csv), "--objective", obj, "--oracle", "none",
                   "--out", str(rep_path)])
    assert rc == 0
    rep = json.loads(rep_path.read_text())
    assert len(rep["per_sample_cost"]) == len(test_rows)
    assert rep["mean_gap"] is None
    assert rep["fingerprint"]["objective"] == CONVEX

    grid = tmp_path / "grid.csv"
    rc = cli.main(["landscape", "--model", str(ckpt), "--x-index", "0",
                   "--resolution", "5", "--out", str(grid)])
    assert rc == 0
    glines = grid.read_text().splitlines()
    assert glines[0].startswith("# config:")
    assert glines[1] == "a1,a2,value"
    assert len(glines) == 2 + 25


def test_evaluate_with_mc_oracle(tmp_path, data_csv):
    cfg = jdump(tmp_path / "cfg.json",
                {"objective": CONVEX, "seed": 0, "S": 8, "d": 8,
                 "hidden": [16], "epochs": 2, "J": 6})
    ckpt = tmp_path / "m.json"
    assert cli.main(["train", "--method", "df2", "--config", cfg,
                     "--data", str(data_csv), "--out", str(ckpt)]) == 0
    dec = tmp_path / "dec.csv"
    sc = jdump(tmp_path / "s.json", {"iters": 60, "restarts": 0})
    assert cli.main(["decide", "--model", str(ckpt), "--data",
                     str(data_csv), "--solver-config", sc,
                     "--out", str(dec)]) == 0
    obj = jdump(tmp_path / "obj.json", CONVEX)
    rep_path = tmp_path / "rep.json"
    rc = cli.main(["evaluate", "--decisions", str(dec), "--data",
                   str(data_csv), "--objective", obj, "--oracle", "mc",
                   "--oracle-samples", "60", "--oracle-iters", "60",
                   "--out", str(rep_path)])
    assert rc == 0
    rep = json.loads(rep_path.read_text())
    assert rep["oracle_cost"] is not None
    assert isinstance(rep["mean_gap"], float)


def test_two_stage_and_policy_pipeline(tmp_path, data_csv):
    for method, extra, solver in (
        ("two-stage", {"components": 2, "epochs": 3, "loss": "nll"},
         {"decider": "saa", "n_samples": 10, "iters": 50, "restarts": 0}),
        ("two-stage", {"components": 1, "epochs": 3, "loss": "mse"},
         {"decider": "point", "iters": 50, "restarts": 0}),
        ("policy", {"epochs": 3}, {}),
    ):
        cfg = jdump(tmp_path / "cfg.json",
                    {"objective": CONVEX, "seed": 0, "hidden": [16], **extra})
        ckpt = tmp_path / "m.json"
        assert cli.main(["train", "--method", method, "--config", cfg,
                         "--data", str(data_csv), "--out", str(ckpt)]) == 0
        sc = jdump(tmp_path / "s.json", solver)
        dec = tmp_path / "dec.csv"
        assert cli.main(["decide", "--model", str(ckpt), "--data",
                         str(data_csv), "--solver-config", sc,
                         "--out", str(dec)]) == 0
        rows = dec.read_text().splitlines()
        assert rows[1] == "row,a_0,a_1"
        assert len(rows) == 2 + 9  # 60 * 0.15 test rows


def test_train_on_empty_dataset_names_it(tmp_path, capsys):
    empty = sd.Dataset(np.zeros((0, 2)), np.zeros((0, 2)),
                       np.empty(0, dtype=object))
    path = tmp_path / "empty.csv"
    sd.save(empty, str(path))
    cfg = jdump(tmp_path / "cfg.json", {"objective": CONVEX})
    rc = cli.main(["train", "--method", "df2", "--config", cfg,
                   "--data", str(path), "--out", str(tmp_path / "m.json")])
    assert rc == 2
    assert "empty dataset" in capsys.readouterr().err


def test_train_missing_objective_field(tmp_path, data_csv, capsys):
    cfg = jdump(tmp_path / "cfg.json", {"seed": 0})
    rc = cli.main(["train", "--method", "df2", "--config", cfg,
                   "--data", str(data_csv), "--out",
                   str(tmp_path / "m.json")])
    assert rc == 2
    assert "objective" in capsys.readouterr().err


def test_train_nonfinite_loss_exits_3(tmp_path, data_csv, capsys):
    cfg = jdump(tmp_path / "cfg.json",
                {"objective": CONVEX, "seed": 0, "S": 4, "d": 4,
                 "hidden": [8], "epochs": 3, "J": 4, "lr": 1e200})
    with np.errstate(over="ignore", invalid="ignore"):
        rc = cli.main(["train", "--method", "df2", "--config", cfg,
                       "--data", str(data_csv), "--out",
                       str(tmp_path / "m.json")])
    assert rc == 3
    assert "numeric failure" in capsys.readouterr().err


def test_evaluate_rejects_wrong_split_decisions(tmp_path, data_csv, capsys):
    cfg = jdump(tmp_path / "cfg.json",
                {"objective": CONVEX, "seed": 0, "S": 6, "d": 4,
                 "hidden": [8], "epochs": 2, "J": 4})
    ckpt = tmp_path / "m.json"
    assert cli.main(["train", "--method", "df2", "--config", cfg,
                     "--data", str(data_csv), "--out", str(ckpt)]) == 0
    sc = jdump(tmp_path / "s.json", {"split": "val", "iters": 40,
                                     "restarts": 0})
    dec = tmp_path / "dec.csv"
    assert cli.main(["decide", "--model", str(ckpt), "--data",
                     str(data_csv), "--solver-config", sc,
                     "--out", str(dec)]) == 0
    obj = jdump(tmp_path / "obj.json", CONVEX)
    rc = cli.main(["evaluate", "--decisions", str(dec), "--data",
                   str(data_csv), "--objective", obj, "--out",
                   str(tmp_path / "r.json")])
    assert rc == 2
    assert "no decision for test rows" in capsys.readouterr().err


def test_landscape_rejects_non_surrogate(tmp_path, data_csv, capsys):
    cfg = jdump(tmp_path / "cfg.json",
                {"objective": CONVEX, "seed": 0, "hidden": [8], "epochs": 2})
    ckpt = tmp_path / "p.json"
    assert cli.main(["train", "--method", "policy", "--config", cfg,
                     "--data", str(data_csv), "--out", str(ckpt)]) == 0
    rc = cli.main(["landscape", "--model", str(ckpt), "--x-index", "0",
                   "--out", str(tmp_path / "g.csv")])
    assert rc == 2
    assert "surrogate" in capsys.readouterr().err


QUICK_BENCH = {
    "n": 48,
    "df2": {"S": 6, "epochs": 2, "J": 4, "hidden": [8]},
    "mdn": {"epochs": 3, "hidden": [8], "n_samples": 12},
    "policy": {"epochs": 2, "hidden": [8]},
    "decide": {"iters": 40, "restarts": 0},
    "oracle": {"n_mc": 40, "iters": 40, "restarts": 0, "seed": 900},
}


def test_bench_quick_runs_and_is_byte_identical(tmp_path, capsys):
    cfg = jdump(tmp_path / "bench.json", QUICK_BENCH)
    out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
    assert cli.main(["bench", "--suite", "synthetic-convex", "--seeds", "2",
                     "--config", cfg, "--out", str(out1)]) == 0
    assert cli.main(["bench", "--suite", "synthetic-convex", "--seeds", "2",
                     "--config", cfg, "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    rep = json.loads(out1.read_text())
    assert set(rep["methods"]) == set(cli.BENCH_METHODS)
    for m in rep["methods"].values():
        assert len(m["per_seed_gap"]) == 2
        assert np.isfinite(m["median_gap"])
    table = capsys.readouterr().out
    assert "df2" in table and "point-estimate" in table


def test_console_entry_point_smoke(tmp_path):
    out = tmp_path / "d.csv"
    res = subprocess.run(
        [sys.executable, "-m", "dflkit.cli", "gen-data", "--task",
         "synthetic", "--n", "8", "--seed", "0", "--out", str(out)],
        capture_output=True, text=True)
    assert res.returncode == 0
    assert out.exists()
