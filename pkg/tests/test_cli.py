import json

import numpy as np
import pytest

from mhpkit import io
from mhpkit.classify import block_permuted_bank
from mhpkit.cli import EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_OK, default_threads, main


def write_params(path, mu, alpha, beta=3.0):
    path.write_text(json.dumps({"schema_version": 1, "kind": "params", "mu": mu, "alpha": alpha,
                                "beta": beta}))
    return str(path)


@pytest.fixture
def params_file(tmp_path):
    return write_params(tmp_path / "p.json", [0.5, 0.4], [[0.3, 0.1], [0.0, 0.2]])


def test_simulate_deterministic(tmp_path, params_file, capsys):
    args = ["simulate", params_file, "--end-time", "5", "--n-samples", "30", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a.json")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b.json"), "--threads", "3"]) == EXIT_OK
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert "mean_events_per_path=" in capsys.readouterr().out


def test_simulate_degenerate(tmp_path):
    p = write_params(tmp_path / "z.json", [0.0], [[0.2]])
    out = str(tmp_path / "d.json")
    assert main(["simulate", p, "--end-time", "5", "--n-samples", "4", "--out", out]) == EXIT_INVALID
    assert main(["simulate", p, "--end-time", "5", "--n-samples", "4", "--out", out,
                 "--allow-degenerate"]) == EXIT_OK
    assert io.read_dataset(out).total_events() == 0


def test_simulate_poisson_mean(tmp_path, capsys):
    p = write_params(tmp_path / "p.json", [2.0], [[0.0]])
    assert main(["simulate", p, "--end-time", "10", "--n-samples", "10000", "--seed", "1",
                 "--out", str(tmp_path / "d.json")]) == EXIT_OK
    mean = float(capsys.readouterr().out.split("mean_events_per_path=")[1])
    assert abs(mean - 20) <= 3 * np.sqrt(20 / 10_000)


def test_fit_and_eval(tmp_path, params_file, capsys):
    data = str(tmp_path / "d.json")
    main(["simulate", params_file, "--end-time", "5", "--n-samples", "300", "--seed", "1", "--out", data])
    fit_out = str(tmp_path / "f.json")
    plots = tmp_path / "plots"
    assert main(["fit", data, "--decay", "3", "--out", fit_out, "--plot-dir", str(plots)]) == EXIT_OK
    assert {"mu.csv", "alpha.csv", "support.csv", "values.png", "support.png"} <= {f.name for f in plots.iterdir()}
    capsys.readouterr()
    assert main(["eval", params_file, params_file]) == EXIT_OK
    out = capsys.readouterr().out.split()
    assert out[-3:] == ["0.0", "0.0", "1.0"]
    assert main(["eval", params_file, fit_out, "--out", str(tmp_path / "m.csv")]) == EXIT_OK


def test_fit_poisson_rate(tmp_path):
    p = write_params(tmp_path / "p.json", [1.5], [[0.0]], beta=1.0)
    data = str(tmp_path / "d.json")
    main(["simulate", p, "--end-time", "5", "--n-samples", "500", "--seed", "2", "--out", data])
    assert main(["fit", data, "--decay", "1", "--loss", "log-likelihood", "--tol", "1e-10",
                 "--max-iter", "1000", "--out", str(tmp_path / "f.json")]) == EXIT_OK
    mu = io.read_estimate(tmp_path / "f.json").mu_hat[0]
    rate = io.read_dataset(data).total_events() / (5 * 500)
    assert mu == pytest.approx(rate, rel=1e-3)


def test_fit_exit_codes(tmp_path, params_file):
    data = str(tmp_path / "d.json")
    main(["simulate", params_file, "--end-time", "5", "--n-samples", "50", "--seed", "1", "--out", data])
    out = str(tmp_path / "f.json")
    assert main(["fit", data, "--decay", "3", "--loss", "log-likelihood", "--lr-scheduler", "lipschitz",
                 "--out", out]) == EXIT_INVALID
    assert main(["fit", data, "--decay", "3", "--max-iter", "1", "--tol", "1e-15",
                 "--out", out]) == EXIT_NOT_CONVERGED
    assert io.read_estimate(out).alpha_hat.shape == (2, 2)
    assert main(["fit", data, "--decay", "-1", "--out", out]) == EXIT_INVALID


def test_fit_deterministic(tmp_path, params_file):
    data = str(tmp_path / "d.json")
    main(["simulate", params_file, "--end-time", "5", "--n-samples", "80", "--seed", "1", "--out", data])
    for name in ("a", "b"):
        main(["fit", data, "--decay", "3", "--penalty", "lasso", "--kappa-choice", "cv", "--cv-folds", "3",
              "--grid-size", "5", "--out", str(tmp_path / f"{name}.json")])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_eval_bad_shapes(tmp_path, params_file):
    other = write_params(tmp_path / "q.json", [0.5], [[0.3]])
    assert main(["eval", params_file, other]) == EXIT_INVALID
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 1, "kind": "fit", "mu_hat": [1.0], "alpha_hat": [1.0, 2.0]}))
    assert main(["eval", params_file, str(bad)]) == EXIT_INVALID


def test_plot_command(tmp_path, params_file):
    assert main(["plot", params_file, "--out", str(tmp_path / "o"), "--no-figures"]) == EXIT_OK
    np.testing.assert_array_equal(io.read_csv_matrix(tmp_path / "o" / "alpha.csv"),
                                  [[0.3, 0.1], [0.0, 0.2]])
    assert not list((tmp_path / "o").glob("*.png"))


def test_classify_flow(tmp_path, capsys):
    bank = tmp_path / "bank.json"
    io.write_params(bank, block_permuted_bank(4, 2, 2, (0.3, 0.0), 0.8, 3.0))
    for name, seed in (("train", 1), ("test", 2)):
        assert main(["simulate", str(bank), "--end-time", "5", "--n-samples", "60", "--seed", str(seed),
                     "--out", str(tmp_path / f"{name}.json")]) == EXIT_OK
    outs = []
    for run in ("r1", "r2"):
        assert main(["classify", str(tmp_path / "train.json"), str(tmp_path / "test.json"), "--decay", "3",
                     "--method", "ermlr", "--max-iter", "30", "--out", str(tmp_path / run)]) == EXIT_OK
        outs.append((tmp_path / run / "predictions.csv").read_bytes())
    assert outs[0] == outs[1]
    conf = io.read_csv_matrix(tmp_path / "r1" / "confusion.csv")
    np.testing.assert_allclose(conf.sum(axis=1), 1.0)
    assert (tmp_path / "r1" / "confusion.png").exists()
    assert "accuracy=" in capsys.readouterr().out


def test_classify_single_class(tmp_path):
    bank = tmp_path / "bank.json"
    bank.write_text(json.dumps({"schema_version": 1, "kind": "params", "beta": 2.0, "weights": [1.0],
                                "classes": [{"mu": [1.0], "alpha": [[0.2]]}]}))
    for name, seed in (("train", 1), ("test", 2)):
        main(["simulate", str(bank), "--end-time", "3", "--n-samples", "20", "--seed", str(seed),
              "--out", str(tmp_path / f"{name}.json")])
    assert main(["classify", str(tmp_path / "train.json"), str(tmp_path / "test.json"), "--decay", "2",
                 "--method", "erm", "--no-figures", "--out", str(tmp_path / "o")]) == EXIT_OK
    assert io.read_csv_matrix(tmp_path / "o" / "accuracy.csv", header=True)[0, 0] == 1.0


def test_classify_missing_labels(tmp_path, params_file, capsys):
    data = str(tmp_path / "d.json")
    main(["simulate", params_file, "--end-time", "5", "--n-samples", "5", "--seed", "1", "--out", data])
    assert main(["classify", data, data, "--decay", "3", "--out", str(tmp_path / "o")]) == EXIT_INVALID
    assert "labels" in capsys.readouterr().err


def test_threads_environment(monkeypatch, tmp_path, params_file):
    monkeypatch.setenv("MHPKIT_THREADS", "2")
    assert default_threads() == 2
    monkeypatch.setenv("MHPKIT_THREADS", "zero")
    assert main(["simulate", params_file, "--end-time", "1", "--out", str(tmp_path / "d.json")]) == EXIT_INVALID
    monkeypatch.delenv("MHPKIT_THREADS")
    assert default_threads() >= 1
    assert main(["simulate", params_file, "--end-time", "1", "--threads", "0",
                 "--out", str(tmp_path / "d.json")]) == EXIT_INVALID


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit"])
    assert exc.value.code == 2
