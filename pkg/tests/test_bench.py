import json
import os

import numpy as np
import pytest

from bregopt.bench import (ExperimentConfig, ExperimentResult, best_of_grid, eta_grid,
                           iterations_to_gap, load_config, run_experiment)
from bregopt.objectives import QuadraticObjective
from bregopt.solvers import SolverConfig, run


def tiny(tmp_path=None, **kw):
    base = dict(n=5, rank=1, solvers=("bgd",), init_scales=(0.1,), max_iters=5000,
                output_dir=None if tmp_path is None else str(tmp_path))
    base.update(kw)
    return ExperimentConfig(**base)


def test_smoke_single_solver(tmp_path):
    s = run_experiment(tiny(tmp_path))
    assert len(s.results) == 1
    r = s.results[0]
    assert r.status.startswith("converged") and r.final_gap < 1e-8
    assert sorted(os.listdir(tmp_path / "traces")) == [r.run_name + ".csv"]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["results"][0]["solver"] == "bgd"
    meta = json.loads((tmp_path / "runs" / (r.run_name + ".json")).read_text())
    assert "wall_time_s" in meta and "wall_time_s" not in summary["results"][0]
    lines = (tmp_path / "plot_data.csv").read_text().splitlines()
    assert lines[0] == "solver,init_scale,repetition,iter,gap"
    assert len(lines) > 2


def test_summary_is_deterministic(tmp_path):
    cfg = dict(solvers=("gd", "bgd", "palm", "bpalm"), init_scales=(0.1, 3.0), max_iters=800)
    run_experiment(tiny(tmp_path / "a", **cfg))
    run_experiment(tiny(tmp_path / "b", **cfg))
    a = (tmp_path / "a" / "summary.json").read_bytes()
    b = (tmp_path / "b" / "summary.json").read_bytes()
    assert a == b
    assert (tmp_path / "a" / "plot_data.csv").read_bytes() == (tmp_path / "b" / "plot_data.csv").read_bytes()


def test_parallel_matches_serial():
    cfg = tiny(solvers=("gd", "bgd"), max_iters=500)
    serial = run_experiment(cfg, workers=1)
    parallel = run_experiment(cfg, workers=2)
    assert serial.to_json() == parallel.to_json()


def test_oracle_dominance_and_selection():
    s = run_experiment(tiny(solvers=("gd", "bgd", "palm", "bpalm", "bppm", "bpam"),
                            init_scales=(0.1, 5.0), max_iters=3000))
    for r in s.results:
        if np.isfinite(r.final_f):
            assert r.final_f >= r.f_star - 1e-8 * max(1.0, abs(r.f_star))
    # one selected run per (solver, init scale)
    assert len(s.selected()) == 12
    assert s.get("bgd", 5.0) is not None


def test_failures_are_recorded_not_raised(tmp_path):
    s = run_experiment(tiny(tmp_path, solvers=("bgd", "gd"), eta={"bgd": 1e6, "gd": "estimate"}))
    by = {r.solver: r for r in s.results}
    assert by["bgd"].status == "diverged"
    assert by["gd"].status.startswith("converged")
    assert [r.solver for r in s.failed] == ["bgd"]


def test_iterations_to_gap():
    out = iterations_to_gap([10.0, 1.1, 1.001, 1.0], 1.0, (1e-1, 1e-2, 1e-6))
    assert out == {"0.1": 2, "0.01": 2, "1e-06": 3}
    out = iterations_to_gap([5.0, 4.0], 1.0, (1e-2,))
    assert out == {"0.01": None}


def test_eta_grid():
    g = eta_grid(4.0)
    assert len(g) == 8
    assert g[0] == pytest.approx(1e-4 / 4) and g[-1] == pytest.approx(0.25)
    assert np.allclose(np.diff(np.log10(g)), 4 / 7)


# ------------------------------------------------------------------ grid selection


def _grid_results(f, etas, x0, f_star=0.0, max_iters=2000):
    out = []
    for j, eta in enumerate(etas):
        res = run(f, None, SolverConfig("gd", eta=float(eta), max_iters=max_iters,
                                        grad_tol=1e-12), x0)
        fin = res.trace.f[-1]
        out.append(ExperimentResult("gd", 1.0, 0, float(eta), j, 1.0, res.status,
                                    res.iterations, fin, f_star, fin - f_star,
                                    iterations_to_gap(res.trace.f, f_star), trace=res.trace))
    return out


def test_best_of_grid_single_point():
    r = _grid_results(QuadraticObjective(np.eye(2)), [0.3], np.ones(2))
    choice = best_of_grid(r)
    assert choice.eta == 0.3 and choice.result is r[0]


def test_best_of_grid_never_picks_diverged():
    res = _grid_results(QuadraticObjective(np.eye(2)), [0.1, 2.5, 3.0], np.ones(2))
    assert res[2].status == "diverged"
    # a diverged run with a fake small iteration count still loses
    res[2].iters_to_gap = {"0.0001": 0}
    choice = best_of_grid(res)
    assert choice.result.status != "diverged"


def test_best_of_grid_all_diverged():
    res = _grid_results(QuadraticObjective(np.eye(2)), [3.0, 5.0], np.ones(2))
    choice = best_of_grid(res)
    assert choice.all_diverged and choice.result is None
    with pytest.raises(ValueError):
        best_of_grid([])


def test_best_of_grid_tie_breaks():
    base = _grid_results(QuadraticObjective(np.eye(2)), [0.5, 0.5], np.ones(2))
    a, b = base
    b.eta = 0.4  # same trajectory, smaller step wins the final tie
    assert best_of_grid([a, b]).eta == 0.4
    b.final_gap = 1.0
    assert best_of_grid([a, b]).eta == 0.5


@pytest.mark.parametrize("L", [0.5, 3.0, 40.0])
def test_best_of_grid_finds_one_over_L_on_quadratic(L):
    f = QuadraticObjective(L * np.eye(3))
    x0 = np.array([1.0, -2.0, 0.5])
    # default grid contains 1/L exactly, where GD converges in one step
    choice = best_of_grid(_grid_results(f, eta_grid(L), x0))
    assert choice.eta == pytest.approx(1.0 / L)
    # a grid that straddles 1/L: pick within one notch of the optimum
    grid = np.logspace(-2, 1, 8) / L
    notch = np.log10(grid[1] / grid[0])
    choice = best_of_grid(_grid_results(f, grid, x0))
    assert abs(np.log10(choice.eta * L)) <= notch + 1e-12


# ------------------------------------------------------------------ configuration


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(solvers=())
    with pytest.raises(ValueError):
        ExperimentConfig(solvers=("sgd",))
    with pytest.raises(ValueError):
        ExperimentConfig(repetitions=0)
    with pytest.raises(ValueError):
        ExperimentConfig(init_scales=(0.0,))
    with pytest.raises(ValueError):
        ExperimentConfig(eta={"bgd": "auto"})
    with pytest.raises(ValueError):
        ExperimentConfig(symmetric=False, solvers=("bgd",))
    cfg = ExperimentConfig()
    assert cfg.eta_rule("gd") == "grid" and cfg.eta_rule("bpalm") == "estimate"


def test_load_config(tmp_path):
    p = tmp_path / "exp.ini"
    p.write_text("""
[instance]
n = 7
lambda = 0.5
symmetric = yes

[solvers]
names = bgd, gd

[eta]
gd = 0.01
bgd = estimate

[run]
init_scales = 0.1 2
output_dir = out
certify = false
""")
    cfg = load_config(p)
    assert cfg.n == 7 and cfg.lam == 0.5 and cfg.solvers == ("bgd", "gd")
    assert cfg.eta == {"gd": 0.01, "bgd": "estimate"}
    assert cfg.init_scales == (0.1, 2.0) and cfg.certify is False
    assert cfg.output_dir == str(tmp_path / "out")


@pytest.mark.parametrize("text", ["[instance]\nsize = 3\n", "[extra]\nx = 1\n",
                                  "[run]\ncertify = maybe\n", "[solvers]\nnames = bgd, sgd\n"])
def test_load_config_errors(tmp_path, text):
    p = tmp_path / "bad.ini"
    p.write_text(text)
    with pytest.raises(ValueError):
        load_config(p)


def test_load_config_missing(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "nope.ini")


def test_instance_file_input(tmp_path):
    from bregopt.objectives import generate_instance
    from bregopt.storage import save_instance
    stem = save_instance(tmp_path / "inst", generate_instance(6, rank=1, seed=4))
    s = run_experiment(ExperimentConfig(instance_path=stem, rank=1, solvers=("bgd",),
                                        init_scales=(0.1,), output_dir=str(tmp_path / "o")))
    assert s.results[0].final_gap < 1e-8
    assert (tmp_path / "o" / "iterates" / (s.results[0].run_name + "_U.txt")).exists()
