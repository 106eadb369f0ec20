"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line. Run with ``pytest tests/test_acceptance.py -v -s``.

Real multi-year demand data cannot ship with the repository, so learning
quality is gated on a deterministic synthetic surrogate; everything else
is checked by independent oracles and exact structural or bitwise
assertions.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from demandcast import cli
from demandcast import data as dp
from demandcast import metrics as ev
from demandcast import model as zoo
from demandcast import nn
from demandcast import training as tr
from demandcast.errors import ChecksumError, VersionError
from demandcast.synth import synthetic_demand_series

from oracles import (bilstm_scalar, conv1d_loops, lstm_cell_scalar,
                     mae_fsum, mape_fsum, maxpool_loops, mse_fsum)


@contextmanager
def criterion(label):
    started = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {label}: FAIL ({time.perf_counter() - started:.1f}s)")
        raise
    print(f"ACCEPTANCE {label}: PASS ({time.perf_counter() - started:.1f}s)")


def test_1_gradient_correctness():
    with criterion("1 gradient correctness (reduced model, delta=1e-5)"):
        started = time.perf_counter()
        model = zoo.reduced_proposed(window=8)
        tr.init_params(model, 208)
        rng = np.random.default_rng([208, 1])
        inputs = rng.random((4, 8))
        targets = rng.random(4)
        report = tr.gradient_check(model, inputs, targets, delta=1e-5, tolerance=1e-4)
        assert report.checked == model.parameter_count()
        assert report.max_rel_error < 1e-4, (report.max_rel_error, report.worst_param)
        assert time.perf_counter() - started < 300.0


def test_2_kernel_oracles():
    with criterion("2 kernel oracles (100 random cases each, 1e-12)"):
        started = time.perf_counter()
        rng = np.random.default_rng(2024)

        for padding in ("valid", "same"):
            for _ in range(100):
                t = int(rng.integers(3, 9))
                c = int(rng.integers(1, 4))
                j = int(rng.integers(1, 4))
                m = int(rng.integers(1, min(t, 4) + 1))
                x = rng.normal(size=(t, c))
                w = rng.normal(size=(j, c, m))
                b = rng.normal(size=j)
                got = nn.conv1d_forward(x, nn.ConvParams(w, b, padding))
                want = np.array(conv1d_loops(x.tolist(), w.tolist(), b.tolist(), padding))
                assert np.max(np.abs(got - want)) < 1e-12

        for _ in range(100):
            t = int(rng.integers(2, 10))
            c = int(rng.integers(1, 4))
            pool = int(rng.integers(1, t + 1))
            x = rng.normal(size=(t, c))
            got, _ = nn.maxpool1d(x, pool)
            want, _ = maxpool_loops(x.tolist(), pool)
            assert np.array_equal(got, np.array(want))

        for _ in range(100):
            units = int(rng.integers(1, 4))
            dim = int(rng.integers(1, 4))
            p = nn.LstmParams(rng.uniform(-0.7, 0.7, (4, units, dim)),
                              rng.uniform(-0.7, 0.7, (4, units, units)),
                              rng.uniform(-0.7, 0.7, (4, units)))
            x = rng.normal(size=dim)
            h0 = rng.normal(size=units)
            c0 = rng.normal(size=units)
            h, c = nn.lstm_cell_forward(x, h0, c0, p)
            h_ref, c_ref = lstm_cell_scalar(x.tolist(), h0.tolist(), c0.tolist(),
                                            p.W.tolist(), p.U.tolist(), p.b.tolist())
            assert np.max(np.abs(h - np.array(h_ref))) < 1e-12
            assert np.max(np.abs(c - np.array(c_ref))) < 1e-12

        for _ in range(100):
            units = int(rng.integers(1, 4))
            dim = int(rng.integers(1, 3))
            t = int(rng.integers(1, 6))
            fw = nn.LstmParams(rng.uniform(-0.7, 0.7, (4, units, dim)),
                               rng.uniform(-0.7, 0.7, (4, units, units)),
                               rng.uniform(-0.7, 0.7, (4, units)))
            bw = nn.LstmParams(rng.uniform(-0.7, 0.7, (4, units, dim)),
                               rng.uniform(-0.7, 0.7, (4, units, units)),
                               rng.uniform(-0.7, 0.7, (4, units)))
            seq = rng.normal(size=(t, dim))
            return_sequences = bool(rng.integers(0, 2))
            got = nn.bilstm_forward(seq, fw, bw, return_sequences)
            want = np.array(bilstm_scalar(
                seq.tolist(),
                (fw.W.tolist(), fw.U.tolist(), fw.b.tolist()),
                (bw.W.tolist(), bw.U.tolist(), bw.b.tolist()),
                return_sequences))
            assert np.max(np.abs(got - want)) < 1e-12

        assert time.perf_counter() - started < 60.0


def test_3_metric_oracles():
    with criterion("3 metric oracles (fsum, 1e-9; RMSE^2=MSE; MAPE invariance)"):
        rng = np.random.default_rng(33)
        actual = rng.uniform(2900.0, 3700.0, 1000)
        forecast = actual + rng.normal(0.0, 60.0, 1000)
        s = ev.EvalSeries(actual, forecast)
        assert ev.mape(s) == pytest.approx(mape_fsum(actual, forecast), rel=1e-9)
        assert ev.mae(s) == pytest.approx(mae_fsum(actual, forecast), rel=1e-9)
        assert ev.mse(s) == pytest.approx(mse_fsum(actual, forecast), rel=1e-9)
        assert ev.rmse(s) ** 2 == pytest.approx(ev.mse(s), rel=1e-9)
        base = ev.mape(s)
        for _ in range(100):
            k = rng.uniform(0.01, 1000.0) * rng.choice([-1.0, 1.0])
            scaled = ev.mape(ev.EvalSeries(k * actual, k * forecast))
            assert scaled == pytest.approx(base, rel=1e-9)


def test_4_pipeline_exactness(series_factory):
    with criterion("4 pipeline exactness (scaler/interp/split/windows)"):
        rng = np.random.default_rng(44)

        scaler = dp.Scaler(2900.0, 3700.0)
        x = rng.uniform(1000.0, 5000.0, 1000)
        back = scaler.inverse_transform(scaler.transform(x))
        assert np.max(np.abs(back - x) / np.abs(x)) < 1e-12

        for _ in range(10):
            n = int(rng.integers(6, 80))
            slope, intercept = rng.uniform(-40, 40), rng.uniform(100, 4000)
            truth = slope * np.arange(n) + intercept
            flags = np.full(n, dp.OBSERVED, dtype=np.int8)
            holes = rng.permutation(np.arange(1, n - 1))[: (n - 2) // 2]
            flags[holes] = dp.MISSING
            values = truth.copy()
            values[holes] = np.nan
            out = dp.interpolate_missing(series_factory(values, flags=flags))
            assert np.allclose(out.values, truth, rtol=1e-9, atol=0)

        series = series_factory(rng.uniform(2900, 3700, 333))
        train_s, test_s = dp.chronological_split(series, 0.8)
        assert np.array_equal(np.concatenate([train_s.values, test_s.values]),
                              series.values)
        assert train_s.dates + test_s.dates == series.dates

        for length in (9, 16, 41, 100):
            for window in (1, 4, 8, 16):
                for horizon in (1, 3, 7):
                    if length < window + horizon:
                        continue
                    ds = dp.make_windows(np.arange(length, dtype=np.float64),
                                         window, horizon)
                    assert len(ds) == length - window - horizon + 1
                    assert ds.targets[0] == window + horizon - 1


def test_5_desk_scale_learning(tmp_path, capsys):
    with criterion("5 desk-scale learning surrogate (MAPE < 5% MW)"):
        started = time.perf_counter()
        series = synthetic_demand_series(2190, seed=7)
        assert series.values.min() == pytest.approx(2900.0)
        assert series.values.max() == pytest.approx(3700.0)

        train_s, test_s = dp.chronological_split(series, 0.8, min_points=9)
        scaler = dp.fit_scaler(train_s)
        train_w = dp.make_windows(scaler.transform(train_s.values), 8, 1)
        test_w = dp.make_windows(scaler.transform(test_s.values), 8, 1)

        model = zoo.reduced_proposed(window=8)
        tr.init_params(model, 42)
        config = tr.TrainConfig(epochs=200, batch_size=64, seed=42)
        model, history = tr.train(model, train_w, config)
        assert history.losses[-1] < 0.01 * history.losses[0]

        report = ev.evaluate(model, test_w, scaler)
        assert report.mw["mape_pct"] < 5.0, report.mw

        csv_path = tmp_path / "clean.csv"
        dp.write_csv(series, csv_path)
        out = tmp_path / "cmp"
        code = cli.main(["compare", "--input", str(csv_path), "--out-dir", str(out),
                         "--window", "8", "--epochs", "2",
                         "--width-scale", "0.0625", "--seed", "42"])
        assert code == 0
        capsys.readouterr()
        table = (out / "comparison.txt").read_text().splitlines()
        assert table[0].split() == ["Model", "MSE", "RMSE", "MAE", "MAPE(%)"]
        body = table[2:6]
        assert [row.split()[0] for row in body] == ["lstm", "cnn_bilstm",
                                                    "cnn_lstm", "proposed"]
        assert sum("*" in row for row in body) == 1
        assert time.perf_counter() - started < 900.0


def test_6_determinism(tmp_path, capsys):
    with criterion("6 determinism (byte-identical checkpoints and JSON)"):
        csv_path = tmp_path / "clean.csv"
        dp.write_csv(synthetic_demand_series(300, seed=7), csv_path)
        fast = ["--window", "8", "--epochs", "2", "--width-scale", "0.0625",
                "--seed", "11"]
        runs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert cli.main(["train", "--input", str(csv_path),
                             "--out-dir", str(out)] + fast) == 0
            runs.append((out / "checkpoint_proposed.dfc").read_bytes())
        assert runs[0] == runs[1]

        jsons = []
        for name in ("ea", "eb"):
            out = tmp_path / name
            assert cli.main(["evaluate", "--checkpoint",
                             str(tmp_path / "a" / "checkpoint_proposed.dfc"),
                             "--input", str(csv_path), "--out-dir", str(out)]) == 0
            jsons.append((out / "metrics_proposed.json").read_bytes())
        assert jsons[0] == jsons[1]
        capsys.readouterr()


def test_7_serialization(tmp_path):
    with criterion("7 serialization (bit-exact round trip, typed failures)"):
        model = zoo.reduced_proposed(window=8)
        tr.init_params(model, 17)
        model.scaler = (2900.0, 3700.0)
        path = tmp_path / "m.dfc"
        zoo.save_model(model, path)
        back = zoo.load_model(path)
        assert zoo.parameter_payload(back) == zoo.parameter_payload(model)
        window = np.random.default_rng(6).random(8)
        assert zoo.predict(back, window) == zoo.predict(model, window)

        corrupted = bytearray(path.read_bytes())
        corrupted[-20] ^= 0x01
        bad = tmp_path / "bad.dfc"
        bad.write_bytes(bytes(corrupted))
        with pytest.raises(ChecksumError):
            zoo.load_model(bad)

        versioned = path.read_bytes().replace(b'"version":1', b'"version":99', 1)
        wrong = tmp_path / "wrong.dfc"
        wrong.write_bytes(versioned)
        with pytest.raises(VersionError):
            zoo.load_model(wrong)


def test_8_full_width_construction():
    with criterion("8 full-width construction (64/128/256, k3, pool2, 256+256, dense 1)"):
        model = zoo.build_proposed(32, 1.0)
        kinds = [layer.kind for layer in model.layers]
        assert kinds == ["conv1d", "relu", "maxpool"] * 3 + ["bilstm", "bilstm", "dense"]
        convs = [l for l in model.layers if l.kind == "conv1d"]
        assert [c.config["filters"] for c in convs] == [64, 128, 256]
        assert all(c.config["kernel"] == 3 for c in convs)
        assert all(c.config["padding"] == "same" for c in convs)
        assert all(l.config["pool"] == 2 for l in model.layers if l.kind == "maxpool")
        first, second = [l for l in model.layers if l.kind == "bilstm"]
        assert first.config["units"] == 256 and first.config["return_sequences"]
        assert second.config["units"] == 256 and not second.config["return_sequences"]
        assert model.layers[-1].config == {"units": 1, "input_dim": 512}

        chain = zoo.validate_shapes(model)
        seq_lengths = [t for t, _ in chain if t is not None]
        assert seq_lengths[0] == 32 and seq_lengths[-1] == 4
        assert {16, 8, 4} <= set(seq_lengths)
        assert chain[-2] == (None, 512)
        assert chain[-1] == (None, 1)
