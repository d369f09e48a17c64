import csv
import json
from pathlib import Path

import numpy as np
import pytest

from dapmh.cli import ExperimentConfig, bench_sweep, compare_reports, main, run_experiment


def _run(tmp_path, **kw):
    defaults = dict(model="normal-normal", algo="mh", iters=800, burnin=100,
                    seed=1, out=str(tmp_path))
    defaults.update(kw)
    config = ExperimentConfig(**defaults)
    return run_experiment(config)


def test_run_writes_samples_and_report(tmp_path):
    samples, report = _run(tmp_path)
    rows = list(csv.DictReader(samples.open()))
    assert len(rows) == 800
    assert list(rows[0]) == ["iter", "param_0", "accepted", "stage"]
    assert [int(r["iter"]) for r in rows] == list(range(800))
    payload = json.loads(report.read_text())
    assert 0.0 < payload["acceptance_rate"] < 1.0
    assert payload["config"]["model"] == "normal-normal"
    assert payload["version"]


def test_report_roundtrip(tmp_path):
    _, report = _run(tmp_path)
    payload = json.loads(report.read_text())
    again = json.loads(json.dumps(payload))
    assert again == payload


def test_workers_do_not_change_samples(tmp_path):
    s1, _ = _run(tmp_path / "w1", algo="da+prefetch", workers=1)
    s8, _ = _run(tmp_path / "w8", algo="da+prefetch", workers=8)
    assert s1.read_bytes() == s8.read_bytes()


def test_compare_identical_reports_is_unity(tmp_path):
    _, report = _run(tmp_path)
    payload = json.loads(report.read_text())
    assert compare_reports(payload, payload) == pytest.approx(1.0)


def test_compare_rejects_model_mismatch(tmp_path):
    _, r1 = _run(tmp_path / "a")
    _, r2 = _run(tmp_path / "b", model="beta-binomial", iters=300)
    a = json.loads(r1.read_text())
    b = json.loads(r2.read_text())
    with pytest.raises(ValueError):
        compare_reports(a, b)


def test_compare_rejects_zero_time():
    base = {"ess": 10.0, "wall_seconds": 0.0, "config": {"model": "m"}}
    other = {"ess": 10.0, "wall_seconds": 1.0, "config": {"model": "m"}}
    with pytest.raises(ValueError):
        compare_reports(base, other)


def test_bench_single_cell(tmp_path):
    config = ExperimentConfig(
        model="normal-normal", algo="da+prefetch", iters=400, burnin=50,
        seed=2, out=str(tmp_path),
    )
    out_csv = tmp_path / "bench.csv"
    rows = bench_sweep(config, costs=[0], workers_list=[2], out_csv=out_csv)
    assert len(rows) == 1
    parsed = list(csv.DictReader(out_csv.open()))
    assert len(parsed) == 1
    assert float(parsed[0]["rg"]) > 0


def test_cli_run_and_compare_end_to_end(tmp_path, capsys):
    rc = main([
        "run", "--model", "normal-normal", "--algo", "da", "--iters", "500",
        "--burnin", "50", "--seed", "3", "--out", str(tmp_path / "da"),
    ])
    assert rc == 0
    rc = main([
        "run", "--model", "normal-normal", "--algo", "mh", "--iters", "500",
        "--burnin", "50", "--seed", "3", "--out", str(tmp_path / "mh"),
    ])
    assert rc == 0
    rc = main([
        "compare",
        str(tmp_path / "da" / "report.json"),
        str(tmp_path / "mh" / "report.json"),
    ])
    assert rc == 0
    assert "RG" in capsys.readouterr().out


def test_cli_invalid_config_exits_nonzero(tmp_path, capsys):
    rc = main([
        "run", "--model", "normal-normal", "--algo", "mh",
        "--policy", "static-half", "--out", str(tmp_path),
    ])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_cli_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("model = normal-normal\nalgo = da\niters = 300\nseed = 5\n")
    rc = main([
        "run", "--config", str(cfg), "--iters", "200",
        "--burnin", "20", "--out", str(tmp_path / "out"),
    ])
    assert rc == 0
    payload = json.loads((tmp_path / "out" / "report.json").read_text())
    assert payload["config"]["iters"] == 200  # flag wins
    assert payload["config"]["algo"] == "da"  # file value survives


def test_cli_unknown_config_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("mdoel = normal-normal\n")
    rc = main(["run", "--config", str(cfg), "--out", str(tmp_path)])
    assert rc == 2


def test_csv_ingestion_roundtrip(tmp_path):
    from dapmh.models import load_labeled_csv, simulate_logistic

    X, y = simulate_logistic(40, 3, (0.5, -0.5, 0.2), seed=7)
    path = tmp_path / "data.csv"
    with path.open("w") as fh:
        fh.write("f0,f1,label,f2\n")
        for i in range(40):
            fields = [repr(float(X[i, 0])), repr(float(X[i, 1])),
                      str(int(y[i])), repr(float(X[i, 2]))]
            fh.write(",".join(fields) + "\n")
    X2, y2, names = load_labeled_csv(path)
    assert names == ["f0", "f1", "f2"]
    assert np.allclose(X2, X) and np.array_equal(y2, y)


def test_csv_ingestion_errors(tmp_path):
    from dapmh.models import load_labeled_csv

    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="label"):
        load_labeled_csv(bad)
    bad.write_text("a,label\n1,2\n")
    with pytest.raises(ValueError, match="label must be 0 or 1"):
        load_labeled_csv(bad)
    bad.write_text("a,label\nx,1\n")
    with pytest.raises(ValueError, match="non-numeric"):
        load_labeled_csv(bad)


def test_cli_logistic_with_csv_data(tmp_path):
    from dapmh.models import simulate_logistic

    X, y = simulate_logistic(120, 3, (0.5, -0.5, 0.2), seed=11)
    path = tmp_path / "train.csv"
    with path.open("w") as fh:
        fh.write(",".join([f"x{j}" for j in range(3)] + ["label"]) + "\n")
        for i in range(120):
            fields = [repr(float(v)) for v in X[i]] + [str(int(y[i]))]
            fh.write(",".join(fields) + "\n")
    rc = main([
        "run", "--model", "logistic", "--algo", "da", "--iters", "200",
        "--burnin", "20", "--seed", "1", "--data", str(path),
        "--out", str(tmp_path / "out"),
    ])
    assert rc == 0
    payload = json.loads((tmp_path / "out" / "report.json").read_text())
    assert payload["config"]["data"] == str(path)


def test_partial_samples_flushed_on_evaluation_error(tmp_path, monkeypatch, capsys):
    import dapmh.cli as cli_mod
    from dapmh.core import FactorizedTarget, GaussianRandomWalk, part_factor

    calls = {"n": 0}

    def flaky(state):
        calls["n"] += 1
        if calls["n"] > 60:
            return float("nan")
        return -0.5 * state[0] ** 2

    class FlakyModel:
        dimension = 1

        def factorized_target(self):
            return FactorizedTarget([part_factor("flaky", flaky)], dimension=1)

        def default_kernel(self):
            return GaussianRandomWalk(1.0, dimension=1)

        def default_init(self):
            return np.zeros(1)

    monkeypatch.setattr(cli_mod, "_build_model", lambda config: FlakyModel())
    rc = main([
        "run", "--model", "normal-normal", "--algo", "mh", "--iters", "500",
        "--burnin", "10", "--seed", "1", "--out", str(tmp_path),
    ])
    assert rc == 3
    assert (tmp_path / "samples.csv").exists()
    rows = list(csv.DictReader((tmp_path / "samples.csv").open()))
    assert 0 < len(rows) < 500


def test_cli_adapt_burnin_and_thin_flags(tmp_path):
    rc = main([
        "run", "--model", "normal-normal", "--algo", "da", "--iters", "1500",
        "--burnin", "300", "--seed", "4", "--adapt-burnin", "--thin", "3",
        "--out", str(tmp_path),
    ])
    assert rc == 0
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["config"]["adapt_burnin"] is True
    assert payload["config"]["thin"] == 3
