"""
Test Command Line Interface
===========================

Runs each subcommand through ``dispatch`` and checks the files it writes,
config-file handling and exit codes.
"""

import logging
from pathlib import Path

import pandas as pd
import pytest

from main import dispatch

PRESETS = Path(__file__).parent / "presets"


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("BFTSIM_OUTPUT_DIR", raising=False)
    return tmp_path / "results"


def header(path: Path) -> str:
    return path.read_text(encoding="utf-8").splitlines()[0]


def test_drop_writes_figure_and_table(out_dir):
    code = dispatch(["drop", "--intensity", "50", "--fault-prob", "0.25",
                     "--out", "drop.svg", "--output-dir", str(out_dir)])
    assert code == 0
    assert "<svg" in (out_dir / "drop.svg").read_text(encoding="utf-8")
    assert header(out_dir / "drop.csv") == "x,y,role"

    nodes = pd.read_csv(out_dir / "drop.csv")
    summary = pd.read_csv(out_dir / "drop_summary.csv")
    assert list(summary.columns) == [
        "intensity", "fault_prob", "nodes", "faulty", "bft_feasible", "feasible_fraction", "feasibility_trials",
    ]
    assert summary.loc[0, "nodes"] == len(nodes)
    assert summary.loc[0, "faulty"] == (nodes["role"] == "faulty").sum()
    assert summary.loc[0, "feasibility_trials"] == 1000
    assert 0.0 <= summary.loc[0, "feasible_fraction"] <= 1.0


def test_drop_feasibility_follows_fault_probability(out_dir):
    for name, fault_prob in (("honest.svg", "0"), ("hostile.svg", "1")):
        code = dispatch(["drop", "--intensity", "20", "--fault-prob", fault_prob, "--feasibility-trials", "50",
                         "--out", name, "--output-dir", str(out_dir)])
        assert code == 0
    assert pd.read_csv(out_dir / "honest_summary.csv").loc[0, "feasible_fraction"] == 1.0
    assert pd.read_csv(out_dir / "hostile_summary.csv").loc[0, "feasible_fraction"] == 0.0


def test_curves_write_one_table_per_size(out_dir):
    code = dispatch(["curves", "--n", "5,45", "--fault-prob", "0.5",
                     "--out", "curves.svg", "--output-dir", str(out_dir)])
    assert code == 0
    assert (out_dir / "curves.svg").exists()
    small = pd.read_csv(out_dir / "curves_N5.csv")
    assert list(small.columns) == ["t", "r", "r_bar"]
    assert len(small) == 8
    assert header(out_dir / "curves_N45.csv") == "t,r,r_bar"


def test_latency_writes_log_summary_and_fit(out_dir):
    code = dispatch(["latency", "--faulty", "6", "--legit-churn", "1,1", "--faulty-churn", "5,1",
                     "--trials", "300", "--seed", "3", "--out", "lat.svg", "--output-dir", str(out_dir)])
    assert code == 0
    assert (out_dir / "lat.svg").exists()
    assert header(out_dir / "lat.csv") == "trial,N,f,delta_N,delta_f,N_eff,f_eff,latency_slots"
    assert header(out_dir / "lat_summary.csv") == (
        "scenario,trials,converged,infeasible,nonconvergent,median_latency,mean_latency"
    )
    assert header(out_dir / "lat_fit.csv") == "scenario,alpha,beta,lower,upper,ks_stat,n_samples"

    log = pd.read_csv(out_dir / "lat.csv")
    summary = pd.read_csv(out_dir / "lat_summary.csv")
    assert len(log) == 300
    assert summary.loc[0, "scenario"] == "lat"
    assert summary.loc[0, "converged"] == log["latency_slots"].notna().sum()


def test_latency_reruns_are_byte_identical(out_dir):
    args = ["latency", "--faulty", "6", "--legit-churn", "5,1", "--faulty-churn", "1,1",
            "--trials", "200", "--seed", "11", "--out", "run.svg"]
    assert dispatch(args + ["--output-dir", str(out_dir / "first")]) == 0
    assert dispatch(args + ["--output-dir", str(out_dir / "second")]) == 0
    for name in ("run.csv", "run_summary.csv", "run_fit.csv"):
        assert (out_dir / "first" / name).read_bytes() == (out_dir / "second" / name).read_bytes()


def test_latency_skips_fit_when_every_trial_agrees(out_dir):
    code = dispatch(["latency", "--faulty", "18", "--fixed-n", "55", "--trials", "50",
                     "--out", "flat.svg", "--output-dir", str(out_dir)])
    assert code == 0
    fit = pd.read_csv(out_dir / "flat_fit.csv")
    assert pd.isna(fit.loc[0, "alpha"])
    assert fit.loc[0, "n_samples"] == 50


def test_degenerate_scenario_exits_with_one(out_dir):
    code = dispatch(["latency", "--faulty", "6", "--fixed-n", "10", "--trials", "10",
                     "--out", "bad.svg", "--output-dir", str(out_dir)])
    assert code == 1
    assert not (out_dir / "bad.csv").exists()


def test_quorum_writes_samples_and_summary(out_dir):
    code = dispatch(["quorum", "--faulty-mean", "25", "--legit-churn", "4,2", "--faulty-churn", "2,1",
                     "--trials", "2000", "--out", "q.csv", "--output-dir", str(out_dir)])
    assert code == 0
    samples = pd.read_csv(out_dir / "q.csv")
    assert list(samples.columns) == ["trial", "f", "delta_N", "delta_f", "n_min"]
    assert len(samples) == 2000
    summary = pd.read_csv(out_dir / "q_summary.csv")
    assert list(summary.columns) == ["trials", "mean", "variance", "dispersion_index", "exact_mean", "exact_variance"]
    assert summary.loc[0, "exact_mean"] == pytest.approx(75.0)


def test_convert_prints_to_stdout(out_dir, capsys):
    assert dispatch(["convert", "--slots", "5,0"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "latency_slots,profile,ms"
    assert "5,CV2X_50,250.0" in lines
    assert "5,CV2X_200,1000.0" in lines
    assert "0,DSRC_100,0.0" in lines
    assert len(lines) == 1 + 2 * 4


def test_convert_honours_output_dir_environment(out_dir, monkeypatch):
    monkeypatch.setenv("BFTSIM_OUTPUT_DIR", str(out_dir))
    assert dispatch(["convert", "--slots", "5", "--profiles", "DSRC_100", "--out", "ms.csv"]) == 0
    frame = pd.read_csv(out_dir / "ms.csv")
    assert frame["ms"].tolist() == [500.0]


@pytest.mark.parametrize("mode_args", [
    ["--mode", "counts", "--legit-churn", "5,1"],
    ["--mode", "mm1", "--legit-rates", "0.5,1", "--faulty-rates", "0.2,1", "--window-s", "5"],
])
def test_churn_modes(out_dir, mode_args):
    code = dispatch(["churn", *mode_args, "--trials", "20", "--out", "churn.csv", "--output-dir", str(out_dir)])
    assert code == 0
    frame = pd.read_csv(out_dir / "churn.csv")
    assert list(frame.columns) == ["trial", "population", "arrivals", "departures", "net"]
    assert len(frame) == 40
    assert (frame["net"] == frame["arrivals"] - frame["departures"]).all()


def test_unstable_queue_is_a_usage_error(out_dir):
    code = dispatch(["churn", "--mode", "mm1", "--legit-rates", "2,1", "--trials", "5",
                     "--output-dir", str(out_dir)])
    assert code == 2


def test_preset_with_flag_override(out_dir):
    code = dispatch(["latency", "--config", str(PRESETS / "latency_f6_zero.conf"), "--trials", "40",
                     "--output-dir", str(out_dir)])
    assert code == 0
    summary = pd.read_csv(out_dir / "latency_f6_zero_summary.csv")
    assert summary.loc[0, "scenario"] == "latency_f6_zero"
    assert summary.loc[0, "trials"] == 40


def test_config_file_keys_may_use_dashes(out_dir, tmp_path):
    conf = tmp_path / "drop.conf"
    conf.write_text("intensity=20\nfault-prob=0.5\nout=dashed.svg\n", encoding="utf-8")
    assert dispatch(["drop", "--config", str(conf), "--output-dir", str(out_dir)]) == 0
    assert (out_dir / "dashed.csv").exists()


def test_invalid_value_names_the_flag(out_dir, caplog):
    with caplog.at_level(logging.ERROR):
        code = dispatch(["latency", "--trials", "0", "--output-dir", str(out_dir)])
    assert code == 2
    assert "--trials" in caplog.text


@pytest.mark.parametrize("argv", [
    ["latency", "--seed", "abc"],
    ["curves", "--n", "0,5"],
    ["drop", "--fault-prob", "1.5"],
    ["convert", "--profiles", "LTE_10"],
    ["drop", "--no-such-flag", "1"],
    ["teleport"],
    [],
])
def test_usage_errors_exit_with_two(out_dir, argv):
    assert dispatch(argv) == 2


def test_unknown_config_key_and_missing_file(out_dir, tmp_path):
    conf = tmp_path / "typo.conf"
    conf.write_text("intensty=20\n", encoding="utf-8")
    assert dispatch(["drop", "--config", str(conf)]) == 2
    assert dispatch(["drop", "--config", str(tmp_path / "missing.conf")]) == 2


def test_unwritable_output_exits_with_one(out_dir, tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory", encoding="utf-8")
    code = dispatch(["convert", "--slots", "5", "--out", "ms.csv", "--output-dir", str(blocker / "sub")])
    assert code == 1
