"""Command-line entry points."""

import json
import subprocess
import sys

import pytest

from pairfuzz.cli import build_parser, config_from_args, main

FAST = ["--budget", "10000"]


class TestParser:
    def test_flags_default_to_unset(self):
        args = build_parser().parse_args(["fuzz"])
        assert args.budget is None and args.mode is None and args.bucketing is None

    def test_fraction_and_underscore_values(self):
        args = build_parser().parse_args(["fuzz", "--t-train-fraction", "1/48", "--budget", "20_000"])
        cfg = config_from_args(args)
        assert cfg.t_train_fraction == pytest.approx(1 / 48) and cfg.budget == 20_000

    def test_config_file_precedence(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("target = arith\nbudget = 30000\nmode = fixed\n")
        args = build_parser().parse_args(["fuzz", "--config", str(path), "--budget", "12000"])
        cfg = config_from_args(args)
        assert (cfg.target, cfg.budget, cfg.mode) == ("arith", 12000, "fixed")

    @pytest.mark.parametrize("argv", [["fuzz", "--mode", "greedy"], ["fuzz", "--budget", "x"],
                                      ["nosuch"], []])
    def test_argparse_rejects(self, argv):
        with pytest.raises(SystemExit):
            build_parser().parse_args(argv)


class TestCommands:
    def test_fuzz(self, tmp_path, capsys):
        assert main(["fuzz", "--target", "arith", *FAST, "--output-dir", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert out.startswith("arith pairwise seed=0 executions=10000 coverage=")
        record = json.loads((tmp_path / "record.json").read_text())
        assert record["executions"] == 10000

    def test_config_errors_exit_2(self, tmp_path, capsys):
        assert main(["fuzz", "--budget", "5"]) == 2
        assert "configuration error" in capsys.readouterr().err
        assert main(["collect", *FAST]) == 2
        bad = tmp_path / "bad.cfg"
        bad.write_text("nonsense\n")
        assert main(["fuzz", "--config", str(bad)]) == 2

    def test_missing_files_exit_1(self, tmp_path, capsys):
        assert main(["fuzz", "--config", str(tmp_path / "none.cfg")]) == 1
        assert main(["analyze", str(tmp_path)]) == 1
        assert "error" in capsys.readouterr().err

    def test_collect_then_analyze(self, tmp_path, capsys):
        out = tmp_path / "c"
        assert main(["collect", "--target", "arith", *FAST, "--trials", "2",
                     "--output-dir", str(out)]) == 0
        assert len(list((out / "matrices").glob("*.csv"))) == 2
        assert main(["analyze", str(out), "--out", str(tmp_path / "rep")]) == 0
        text = capsys.readouterr().out
        assert "goodness_of_fit" in text and "anova" in text
        assert (tmp_path / "rep" / "goodness_of_fit.csv").exists()

    def test_experiment(self, tmp_path, capsys):
        assert main(["experiment", "--targets", "arith,strictfmt", "--strategies", "pairwise,fixed",
                     *FAST, "--trials", "2", "--output-dir", str(tmp_path)]) == 0
        text = capsys.readouterr().out
        assert "8 trials" in text and "a12" in text
        assert (tmp_path / "report" / "comparison.csv").exists()
        assert (tmp_path / "report" / "time_to_threshold.csv").exists()
        assert main(["analyze", str(tmp_path), "--baseline", "fixed",
                     "--out", str(tmp_path / "b")]) == 0

    def test_ablate(self, tmp_path, capsys):
        assert main(["ablate", "--target", "strictfmt", *FAST, "--trials", "1",
                     "--output-dir", str(tmp_path)]) == 0
        text = capsys.readouterr().out
        assert "random_matrix" in text and "cross_program" in text
        header = (tmp_path / "report" / "ablation_table.csv").read_text().splitlines()[0]
        assert header.startswith("target,pairwise_median,pairwise_std,p2_median")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "pairfuzz", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for command in ("fuzz", "collect", "experiment", "analyze", "ablate"):
        assert command in res.stdout
