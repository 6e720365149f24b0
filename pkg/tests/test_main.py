import json

import pandas as pd
import pytest

from TVGS.main import main


@pytest.fixture
def profile(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps({
        "name": "tiny",
        "dataset": {"kind": "synthetic", "n_nodes": 30, "n_steps": 6, "n_modes": 2, "seed": 3},
        "k": 5,
        "lambda_grid": [0.1, 1.0],
        "epsilon_grid": [1.0],
        "densities": [0.5, 0.8],
        "trials_search": 1,
        "trials_final": 2,
        "tol": 1e-8,
    }))
    return path


def test_build_graph(profile, tmp_path, capsys):
    out = tmp_path / "graph"
    assert main(["build-graph", "--config", str(profile), "--output-dir", str(out)]) == 0
    assert (out / "graph_edges.txt").exists()
    assert "Nodes: 30" in capsys.readouterr().out


def test_reconstruct(profile, tmp_path):
    out = tmp_path / "single"
    argv = ["reconstruct", "--config", str(profile), "--output-dir", str(out),
            "--variant", "sobolev", "--lam", "1.0", "--epsilon", "0.5", "--density", "0.5"]
    assert main(argv) == 0
    for name in ["mask.txt", "residuals_sobolev.csv", "solve_sobolev.txt", "reconstruction_sobolev.csv"]:
        assert (out / name).exists()
    residuals = pd.read_csv(out / "residuals_sobolev.csv")
    assert len(residuals) >= 2


def test_direct_solve(profile, tmp_path):
    out = tmp_path / "direct"
    argv = ["reconstruct", "--config", str(profile), "--output-dir", str(out),
            "--variant", "qiu", "--lam", "1.0", "--density", "0.8", "--direct"]
    assert main(argv) == 0
    assert (out / "reconstruction_qiu.csv").exists()
    assert not (out / "residuals_qiu.csv").exists()


def test_run_final_and_plot(profile, tmp_path):
    out = tmp_path / "final"
    argv = ["run-final", "--config", str(profile), "--output-dir", str(out),
            "--methods", "qiu", "sobolev", "idw-baseline"]
    assert main(argv) == 0
    for name in ["best_qiu.csv", "best_sobolev.csv", "results_final.csv", "timings_final.csv",
                 "summary_final.csv", "mse_final.svg", "iterations_final.svg"]:
        assert (out / name).exists()
    results = pd.read_csv(out / "results_final.csv")
    assert sorted(results["method"].unique()) == ["idw-baseline", "qiu", "sobolev"]
    assert len(results) == 3 * 2 * 2

    replot = tmp_path / "replot"
    assert main(["plot", str(out / "results_final.csv"), "--output-dir", str(replot)]) == 0
    assert (replot / "mse_final.svg").read_bytes() == (out / "mse_final.svg").read_bytes()


def test_iterations_with_saved_parameters(profile, tmp_path):
    out = tmp_path / "iters"
    assert main(["grid-search", "--config", str(profile), "--output-dir", str(out), "--method", "sobolev"]) == 0
    best = out / "best_sobolev.csv"
    assert best.exists()
    argv = ["iterations", "--config", str(profile), "--output-dir", str(out), "--best-sobolev", str(best)]
    assert main(argv) == 0
    assert (out / "results_iterations.csv").exists()


def test_conditioning(profile, capsys):
    assert main(["conditioning", "--config", str(profile), "--epsilons", "0,1"]) == 0
    assert "kappa_shifted" in capsys.readouterr().out


def test_errors_return_one(profile, tmp_path, capsys):
    argv = ["reconstruct", "--config", str(profile), "--output-dir", str(tmp_path),
            "--lam", "-1", "--density", "0.5"]
    assert main(argv) == 1
    assert capsys.readouterr().out.strip().splitlines()[-1].startswith("Error:")

    assert main(["build-graph", "--config", str(tmp_path / "missing.json")]) == 1
