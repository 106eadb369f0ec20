import numpy as np
import pytest

from demandcast import cli
from demandcast import data as dp
from demandcast import model as zoo
from demandcast.synth import synthetic_demand_series

FAST = ["--window", "8", "--epochs", "2", "--width-scale", "0.0625", "--seed", "5"]


@pytest.fixture(scope="module")
def clean_csv(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    raw = root / "raw.csv"
    series = synthetic_demand_series(260, seed=7)
    series.values[40] = np.nan
    series.flags[40] = dp.MISSING
    series.values[41] = -50.0  # invalid, must be re-flagged then imputed
    dp.write_csv(series, raw)
    clean = root / "clean.csv"
    assert cli.main(["preprocess", "--input", str(raw), "--output", str(clean)]) == 0
    return clean


def run(args):
    return cli.main([str(a) for a in args])


@pytest.fixture(scope="module")
def checkpoint(clean_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    run(["train", "--input", clean_csv, "--out-dir", out] + FAST)
    return out / "checkpoint_proposed.dfc"


class TestPreprocess:
    def test_counts_reported(self, tmp_path, capsys):
        raw = tmp_path / "raw.csv"
        series = synthetic_demand_series(40, seed=1)
        series.values[5] = np.nan
        series.flags[5] = dp.MISSING
        series.values[9] = np.nan
        series.flags[9] = dp.MISSING
        dp.write_csv(series, raw)
        out = tmp_path / "clean.csv"
        assert run(["preprocess", "--input", raw, "--output", out]) == 0
        text = capsys.readouterr().out
        assert "missing: 2" in text and "imputed: 2" in text
        cleaned = dp.load_csv(out)
        assert cleaned.fully_observed()

    def test_clean_file_reports_zero(self, tmp_path, capsys):
        raw = tmp_path / "raw.csv"
        dp.write_csv(synthetic_demand_series(30, seed=2), raw)
        out = tmp_path / "clean.csv"
        assert run(["preprocess", "--input", raw, "--output", out]) == 0
        assert "imputed: 0" in capsys.readouterr().out

    def test_all_empty_demand_is_hard_error(self, tmp_path, capsys):
        raw = tmp_path / "raw.csv"
        raw.write_text("date,demand_mw\n2020-01-01,\n2020-01-02,\n")
        out = tmp_path / "clean.csv"
        assert run(["preprocess", "--input", raw, "--output", out]) == 2
        assert not out.exists()

    def test_imputed_column_written(self, tmp_path):
        raw = tmp_path / "raw.csv"
        series = synthetic_demand_series(30, seed=3)
        series.values[4] = np.nan
        series.flags[4] = dp.MISSING
        dp.write_csv(series, raw)
        out = tmp_path / "clean.csv"
        run(["preprocess", "--input", raw, "--output", out])
        lines = out.read_text().splitlines()
        assert lines[0] == "date,demand_mw,imputed"
        assert lines[5].endswith(",1")
        assert lines[1].endswith(",0")


class TestTrain:
    def test_checkpoint_exists_and_loads(self, clean_csv, tmp_path, capsys):
        out = tmp_path / "run"
        assert run(["train", "--input", clean_csv, "--out-dir", out] + FAST) == 0
        text = capsys.readouterr().out
        assert "final epoch loss" in text
        model = zoo.load_model(out / "checkpoint_proposed.dfc")
        assert model.window == 8
        assert model.scaler is not None
        history = (out / "history_proposed.csv").read_text().splitlines()
        assert history[0] == "epoch,loss,seconds"
        assert len(history) == 3

    def test_same_seed_byte_identical_checkpoints(self, clean_csv, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run(["train", "--input", clean_csv, "--out-dir", a] + FAST)
        run(["train", "--input", clean_csv, "--out-dir", b] + FAST)
        assert ((a / "checkpoint_proposed.dfc").read_bytes()
                == (b / "checkpoint_proposed.dfc").read_bytes())

    def test_uncleaned_input_rejected(self, tmp_path):
        raw = tmp_path / "raw.csv"
        raw.write_text("date,demand_mw\n2020-01-01,3000\n2020-01-02,\n2020-01-03,3010\n")
        assert run(["train", "--input", raw, "--out-dir", tmp_path / "o"] + FAST) == 2

    def test_benchmark_arch_flag(self, clean_csv, tmp_path):
        out = tmp_path / "run"
        assert run(["train", "--input", clean_csv, "--out-dir", out,
                    "--arch", "lstm"] + FAST) == 0
        assert zoo.load_model(out / "checkpoint_lstm.dfc").arch == "lstm"

    def test_tiny_ci_path_completes_quickly(self, clean_csv, tmp_path):
        import time
        started = time.perf_counter()
        assert run(["train", "--input", clean_csv, "--out-dir", tmp_path / "o",
                    "--window", "8", "--epochs", "1", "--width-scale", "0.05",
                    "--seed", "5"]) == 0
        assert time.perf_counter() - started < 60.0

    def test_closing_report_matches_evaluate(self, clean_csv, tmp_path, capsys):
        out = tmp_path / "run"
        run(["train", "--input", clean_csv, "--out-dir", out] + FAST)
        train_table = capsys.readouterr().out.splitlines()[-4:]
        run(["evaluate", "--checkpoint", out / "checkpoint_proposed.dfc",
             "--input", clean_csv, "--out-dir", tmp_path / "eval"])
        eval_table = capsys.readouterr().out.splitlines()[-4:]
        assert train_table == eval_table


class TestEvaluate:
    def test_outputs_written(self, clean_csv, checkpoint, tmp_path):
        out = tmp_path / "eval"
        assert run(["evaluate", "--checkpoint", checkpoint, "--input", clean_csv,
                    "--out-dir", out]) == 0
        assert (out / "metrics_proposed.json").exists()
        points = (out / "predictions_proposed.csv").read_text().splitlines()
        assert points[0] == "index,actual_mw,forecast_mw"
        assert len(points) > 1

    def test_twice_byte_identical_json(self, clean_csv, checkpoint, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run(["evaluate", "--checkpoint", checkpoint, "--input", clean_csv, "--out-dir", a])
        run(["evaluate", "--checkpoint", checkpoint, "--input", clean_csv, "--out-dir", b])
        assert ((a / "metrics_proposed.json").read_bytes()
                == (b / "metrics_proposed.json").read_bytes())

    def test_incompatible_input_no_partial_output(self, checkpoint, tmp_path, capsys):
        short = tmp_path / "short.csv"
        dp.write_csv(synthetic_demand_series(30, seed=4), short)
        out = tmp_path / "eval"
        # test split of 6 points cannot frame W=8, h=1 windows
        assert run(["evaluate", "--checkpoint", checkpoint, "--input", short,
                    "--out-dir", out]) == 2
        assert "at least 9" in capsys.readouterr().err
        assert not out.exists() or not list(out.iterdir())


class TestForecast:
    def test_single_step(self, clean_csv, checkpoint, tmp_path):
        out = tmp_path / "fc.csv"
        assert run(["forecast", "--checkpoint", checkpoint, "--input", clean_csv,
                    "--steps", 1, "--output", out]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "date,forecast_mw"
        assert len(lines) == 2

    def test_seven_consecutive_dates(self, clean_csv, checkpoint, tmp_path):
        out = tmp_path / "fc.csv"
        run(["forecast", "--checkpoint", checkpoint, "--input", clean_csv,
             "--steps", 7, "--output", out])
        lines = out.read_text().splitlines()[1:]
        assert len(lines) == 7
        from datetime import date, timedelta
        series = dp.load_csv(clean_csv)
        for k, line in enumerate(lines):
            day = date.fromisoformat(line.split(",")[0])
            assert day == series.dates[-1] + timedelta(days=k + 1)

    def test_values_match_library_route(self, clean_csv, checkpoint, tmp_path):
        out = tmp_path / "fc.csv"
        run(["forecast", "--checkpoint", checkpoint, "--input", clean_csv,
             "--steps", 4, "--output", out])
        got = [float(line.split(",")[1]) for line in out.read_text().splitlines()[1:]]
        model = zoo.load_model(checkpoint)
        scaler = dp.Scaler(*model.scaler)
        series = dp.load_csv(clean_csv)
        scaled = scaler.transform(series.values)
        want = scaler.inverse_transform(
            zoo.forecast_recursive(model, scaled[-model.window:], 4))
        assert np.array_equal(np.array(got), want)

    def test_bad_steps(self, clean_csv, checkpoint, tmp_path):
        assert run(["forecast", "--checkpoint", checkpoint, "--input", clean_csv,
                    "--steps", 0, "--output", tmp_path / "x.csv"]) == 1


class TestCompare:
    def test_four_rows_one_best(self, clean_csv, tmp_path, capsys):
        out = tmp_path / "cmp"
        assert run(["compare", "--input", clean_csv, "--out-dir", out] + FAST) == 0
        table = (out / "comparison.txt").read_text().splitlines()
        rows = table[2:6]
        assert len(rows) == 4
        names = [r.split()[0] for r in rows]
        assert names == ["lstm", "cnn_bilstm", "cnn_lstm", "proposed"]
        assert sum("*" in r for r in rows) == 1
        assert table[0].split() == ["Model", "MSE", "RMSE", "MAE", "MAPE(%)"]

    def test_repeat_run_identical_table(self, clean_csv, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run(["compare", "--input", clean_csv, "--out-dir", a] + FAST)
        run(["compare", "--input", clean_csv, "--out-dir", b] + FAST)
        assert (a / "comparison.txt").read_bytes() == (b / "comparison.txt").read_bytes()
        assert (a / "comparison.json").read_bytes() == (b / "comparison.json").read_bytes()


class TestGradcheck:
    def test_default_run_passes(self, capsys):
        assert run(["gradcheck"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "max relative error" in out

    def test_injected_fault_fails_nonzero(self, capsys):
        assert run(["gradcheck", "--inject-fault"]) == 3
        assert "FAIL" in capsys.readouterr().out

    def test_fixed_seed_reproducible_error_value(self, capsys):
        run(["gradcheck", "--seed", 75])
        first = capsys.readouterr().out
        run(["gradcheck", "--seed", 75])
        second = capsys.readouterr().out
        assert first == second


class TestConfigHandling:
    def test_config_file_applies(self, clean_csv, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("# comment line\nwindow = 8\nepochs = 2\n"
                        "width_scale = 0.0625\nseed = 5\n")
        out = tmp_path / "run"
        assert run(["train", "--input", clean_csv, "--out-dir", out,
                    "--config", conf]) == 0
        assert zoo.load_model(out / "checkpoint_proposed.dfc").window == 8

    def test_flag_overrides_config(self, clean_csv, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("window = 8\nepochs = 2\nwidth_scale = 0.0625\nseed = 5\n")
        out = tmp_path / "run"
        run(["train", "--input", clean_csv, "--out-dir", out, "--config", conf,
             "--arch", "lstm"])
        assert (out / "checkpoint_lstm.dfc").exists()

    def test_unknown_key_exit_1(self, clean_csv, tmp_path, capsys):
        conf = tmp_path / "run.conf"
        conf.write_text("windw = 8\n")
        assert run(["train", "--input", clean_csv, "--out-dir", tmp_path / "o",
                    "--config", conf]) == 1
        assert "unknown key" in capsys.readouterr().err

    def test_bad_value_exit_1(self, clean_csv, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("epochs = soon\n")
        assert run(["train", "--input", clean_csv, "--out-dir", tmp_path / "o",
                    "--config", conf]) == 1

    def test_usage_error_exit_1(self):
        assert run(["train", "--no-such-flag"]) == 1

    def test_missing_input_exit_2(self, tmp_path):
        assert run(["train", "--input", tmp_path / "nope.csv",
                    "--out-dir", tmp_path / "o"] + FAST) == 2

    def test_invalid_ratio_rejected_before_work(self, clean_csv, tmp_path):
        out = tmp_path / "o"
        assert run(["train", "--input", clean_csv, "--out-dir", out,
                    "--ratio", "1.5"] + FAST) == 1
        assert not out.exists() or not list(out.iterdir())
