import json
import math

import numpy as np
import pandas as pd
import pytest

from core.experiment import RESULT_COLUMNS, results_frame, sweep
from core.metrics import relative_spread, trend
from ui.cli import _series_label, fig2_spec, fig3_spec, main


@pytest.fixture
def run_config(tmp_path):
    document = {
        "topology": {"field_side": 0.2, "lambda": 1000, "comm_range": 300, "r_cls": 0.3, "cluster_side": 50},
        "fault": {"p_fail": 0.2},
        "mechanism": {"kind": "PoC", "n_w": 10, "r_sfl": 0.5, "delta_sfl": 1},
        "n_tx": 10,
        "k_rounds": 4,
        "repetitions": 2,
        "seed": 5,
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(document))
    return path


@pytest.mark.parametrize("counts, expected", [("3,3,3", "0.000000"), ("0,1", "0.500000"),
                                              ("1,0,0,0", "0.750000")])
def test_gini_command(counts, expected, capsys):
    assert main(["gini", "--counts", counts]) == 0
    assert capsys.readouterr().out.strip() == expected


@pytest.mark.parametrize("counts", ["a,b", "1,-2", ""])
def test_gini_command_rejects_bad_input(counts, capsys):
    assert main(["gini", "--counts", counts]) != 0
    assert capsys.readouterr().err


def test_usl_command(capsys):
    assert main(["usl", "--alpha", "0.1", "--beta", "0.001", "--n-max", "100"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "n,S"
    assert out[1] == "1,1"
    assert len(out) == 102
    assert "n=30" in out[-1]


def test_usl_command_rejects_negative_parameters(capsys):
    assert main(["usl", "--alpha", "-1", "--beta", "0", "--n-max", "5"]) == 2
    assert "alpha" in capsys.readouterr().err


def test_run_command(run_config, tmp_path, capsys):
    out = tmp_path / "results.csv"
    assert main(["run", "--config", str(run_config), "--out", str(out)]) == 0
    df = pd.read_csv(out)
    assert list(df.columns) == RESULT_COLUMNS
    assert df.loc[0, "mechanism"] == "PoC"
    assert df.loc[0, "n_w"] == 10
    summary = capsys.readouterr().out
    assert "R =" in summary and "G =" in summary


def test_run_command_is_reproducible(run_config, tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", "--config", str(run_config), "--out", str(first)]) == 0
    assert main(["run", "--config", str(run_config), "--out", str(second), "--workers", "2"]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_run_seed_override(run_config, tmp_path):
    base, other = tmp_path / "base.csv", tmp_path / "other.csv"
    assert main(["run", "--config", str(run_config), "--out", str(base), "--seed", "5"]) == 0
    assert main(["run", "--config", str(run_config), "--out", str(other), "--seed", "6"]) == 0
    assert base.read_bytes() != other.read_bytes()


def test_run_export(run_config, tmp_path):
    export_dir = tmp_path / "detalle"
    assert main(["run", "--config", str(run_config), "--out", str(tmp_path / "r.csv"),
                 "--export-dir", str(export_dir)]) == 0
    for name in ("nodes.csv", "clusters.csv", "rounds.csv", "trace.csv"):
        assert (export_dir / name).exists()
    rounds = pd.read_csv(export_dir / "rounds.csv")
    assert len(rounds) == 4
    assert set(rounds["mechanism"]) == {"PoC"}
    trace = pd.read_csv(export_dir / "trace.csv")
    assert list(trace.columns) == ["round", "sender", "receiver", "outcome"]
    assert set(trace["outcome"]) <= {"delivered", "failed"}


def test_run_missing_config(tmp_path, capsys):
    missing = tmp_path / "absent.json"
    assert main(["run", "--config", str(missing), "--out", str(tmp_path / "r.csv")]) == 2
    assert str(missing) in capsys.readouterr().err


def test_run_bad_field(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"fault": {"p_fail": 3}}))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "r.csv")]) == 2
    assert "fault.p_fail" in capsys.readouterr().err


def test_run_unwritable_output(run_config, tmp_path, capsys):
    out = tmp_path / "no" / "such" / "dir.csv"
    assert main(["run", "--config", str(run_config), "--out", str(out)]) == 1
    assert str(out) in capsys.readouterr().err


def test_sweep_command(tmp_path):
    document = {
        "base": {"topology": {"field_side": 0.2, "lambda": 1000, "comm_range": 300, "r_cls": 0.0,
                              "cluster_side": 50},
                 "k_rounds": 2, "repetitions": 1, "seed": 1},
        "axes": {"mechanism": ["PoW", "PoS"], "p_fail": [0.0, 0.5]},
    }
    config = tmp_path / "sweep.json"
    config.write_text(json.dumps(document))
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--config", str(config), "--out", str(out)]) == 0
    df = pd.read_csv(out)
    assert len(df) == 4
    assert df["mechanism"].tolist() == ["PoW", "PoW", "PoS", "PoS"]
    assert df["p_fail"].tolist() == [0.0, 0.5, 0.0, 0.5]


def test_sweep_over_cap(tmp_path, capsys):
    config = tmp_path / "sweep.json"
    config.write_text(json.dumps({"axes": {"lambda": [100, 200, 300]}}))
    assert main(["sweep", "--config", str(config), "--out", str(tmp_path / "s.csv"), "--cap", "2"]) == 2
    assert "3" in capsys.readouterr().err


def test_missing_subcommand(capsys):
    assert main([]) == 2


@pytest.mark.slow
def test_fig2_command_reduced(tmp_path, capsys):
    out = tmp_path / "fig2.csv"
    assert main(["fig2", "--out", str(out), "--repetitions", "1", "--rounds", "3", "--workers", "2"]) == 0
    df = pd.read_csv(out)
    assert len(df) == 30
    assert sorted(set(df["lambda"])) == [100 * i for i in range(1, 11)]
    assert "PoC" in capsys.readouterr().out


@pytest.mark.slow
def test_fig3_command_reduced(tmp_path):
    out = tmp_path / "fig3.csv"
    assert main(["fig3", "--out", str(out), "--repetitions", "1", "--rounds", "3", "--seed", "4"]) == 0
    df = pd.read_csv(out)
    assert len(df) == 50
    assert (df["lambda"] == 400).all()
    pos = df[df["mechanism"] == "PoS"]
    assert (pos["r_cls"] == 0.5).all()


def test_series_label():
    assert _series_label({"mechanism": "PoW", "r_cls": 0.1}) == "PoW r_cls=0.1"
    assert _series_label(pd.Series({"mechanism": "PoS", "r_cls": 0.5})) == "PoS r_cls=0.5"


@pytest.mark.slow
def test_fig2_throughput_shape():
    df = results_frame(sweep(fig2_spec(repetitions=5, rounds=200), workers=4))
    table = df.pivot(index="lambda", columns="mechanism", values="R_mean")
    assert not table.isna().any().any()
    assert relative_spread(table["PoC"]) <= 0.05
    assert (np.diff(table["PoW"].to_numpy()) < 0).all()
    densest = table.loc[1000.0]
    assert densest["PoC"] > densest["PoS"] > densest["PoW"]


@pytest.mark.slow
def test_fig3_participation_shape():
    repetitions = 10
    df = results_frame(sweep(fig3_spec(repetitions=repetitions, rounds=300), workers=4))
    df["series"] = df.apply(_series_label, axis=1)
    table = df.pivot(index="p_fail", columns="series", values="G_mean")
    for series in table.columns:
        assert trend(table.index, table[series]) < 0, series
    for _, row in table.iterrows():
        assert row["PoW r_cls=0.5"] < row["PoC r_cls=0.5"] < row["PoS r_cls=0.5"]

    half = df[(df["mechanism"] == "PoW") & np.isclose(df["p_fail"], 0.5)]
    assert len(half) == 3
    sem = half["G_std"] / math.sqrt(repetitions)
    assert half["G_mean"].max() - half["G_mean"].min() > 2 * sem.max()
