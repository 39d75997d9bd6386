"""Matrix-PCA benchmark: Euclidean vs Bregman solvers against the SVD oracle.

A sweep runs every (solver, init scale, repetition) combination on one test
matrix. Single-block solvers (gd, bgd, bppm) minimize the symmetric
factorization ``f(U)``; bi-block solvers (palm, bpalm, bpam) minimize
``f(U, V)`` on the same matrix. Step sizes are either ``0.9 / L_est`` with
``L_est`` from :func:`bregopt.kernels.estimate_relative_smoothness`, a fixed
value, or the best point of a log-spaced grid.

Gaps are relative: ``(f - f_oracle) / max(1, |f_oracle|)``.
"""

import configparser
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .diagnostics import bounded_gradient_ratio, certify_second_order, check_decrease
from .kernels import estimate_relative_smoothness, make_kernel
from .objectives import (BmfNonsymmetric, BmfSymmetric, MatrixPcaInstance,
                         bmf_objective_of_oracle, generate_instance, oracle_solution)
from .solvers import BI_BLOCK, SINGLE_BLOCK, VARIANTS, SolverConfig, random_init, run
from .storage import load_instance, save_matrix

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "ExperimentSummary",
    "GridChoice",
    "load_config",
    "build_problem",
    "eta_grid",
    "best_of_grid",
    "run_experiment",
    "iterations_to_gap",
]

GAP_THRESHOLDS = (1e-2, 1e-4, 1e-6)
FAILED = ("error", "subproblem_failure")


@dataclass
class ExperimentConfig:
    n: int = 50
    m: int = None
    rank: int = 2
    lam: float = 1.0
    symmetric: bool = True
    seed: int = 0
    scaling: float = 1.0
    instance_path: str = None
    solvers: tuple = ("gd", "bgd", "palm", "bpalm")
    # per-solver step rule: "estimate", "grid", or a number; missing -> default
    eta: dict = field(default_factory=dict)
    init_scales: tuple = (0.1, 10.0)
    repetitions: int = 1
    max_iters: int = 50_000
    grad_tol: float = 1e-8
    step_tol: float = 1e-10
    grid_points: int = 8
    grid_span: tuple = (1e-4, 1.0)
    eta_factor: float = 0.9
    kernel: str = "power"
    bi_kernel: str = "bi_quadratic"
    alpha: float = 1.0
    sigma: float = 1.0
    degree: int = 4
    estimator_samples: int = 32
    safety: float = 2.0
    certify: bool = True
    thresholds: tuple = GAP_THRESHOLDS
    output_dir: str = None
    trace_subsample: tuple = (1000, 10)

    def __post_init__(self):
        self.solvers = tuple(self.solvers)
        self.init_scales = tuple(float(s) for s in self.init_scales)
        if not self.solvers:
            raise ValueError("at least one solver is required")
        bad = [s for s in self.solvers if s not in VARIANTS]
        if bad:
            raise ValueError(f"unknown solvers {bad}; available: {VARIANTS}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.init_scales or any(s <= 0 for s in self.init_scales):
            raise ValueError("init scales must be positive")
        for s, rule in self.eta.items():
            if s not in VARIANTS:
                raise ValueError(f"eta rule for unknown solver {s!r}")
            if isinstance(rule, str) and rule not in ("estimate", "grid"):
                raise ValueError(f"eta rule {rule!r} must be 'estimate', 'grid' or a number")
        if self.symmetric is False and any(s in SINGLE_BLOCK for s in self.solvers):
            raise ValueError("single-block solvers need a symmetric instance")

    def eta_rule(self, solver):
        if solver in self.eta:
            return self.eta[solver]
        return "grid" if solver in ("gd", "palm") else "estimate"

    def to_dict(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


def _parse_bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_list(s, conv):
    return tuple(conv(t) for t in s.replace(",", " ").split())


_FIELDS = {
    "instance": {"n": int, "m": int, "rank": int, "lambda": float, "symmetric": _parse_bool,
                 "seed": int, "scaling": float, "path": str},
    "solvers": {"names": lambda s: _parse_list(s, str), "kernel": str, "bi_kernel": str,
                "alpha": float, "sigma": float, "degree": int},
    "run": {"init_scales": lambda s: _parse_list(s, float), "repetitions": int,
            "max_iters": int, "grad_tol": float, "step_tol": float, "grid_points": int,
            "eta_factor": float, "estimator_samples": int, "safety": float,
            "certify": _parse_bool, "output_dir": str},
}
_RENAME = {"lambda": "lam", "path": "instance_path", "names": "solvers"}


def load_config(path):
    """Read an INI-style experiment file.

    Sections ``[instance]``, ``[solvers]``, ``[run]`` map onto
    :class:`ExperimentConfig`; an optional ``[eta]`` section holds
    ``solver = estimate | grid | <number>``. Unknown keys are errors.
    """
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(path)
    kw = {}
    for section in cp.sections():
        if section == "eta":
            eta = {}
            for key, val in cp.items("eta"):
                val = val.strip()
                eta[key] = val if val in ("estimate", "grid") else float(val)
            kw["eta"] = eta
            continue
        if section not in _FIELDS:
            raise ValueError(f"unknown section [{section}]")
        for key, val in cp.items(section):
            if key not in _FIELDS[section]:
                raise ValueError(f"unknown key {key!r} in [{section}]")
            kw[_RENAME.get(key, key)] = _FIELDS[section][key](val)
    if "output_dir" in kw and not os.path.isabs(kw["output_dir"]):
        kw["output_dir"] = os.path.join(os.path.dirname(os.path.abspath(path)), kw["output_dir"])
    return ExperimentConfig(**kw)


@dataclass
class Problem:
    instance: MatrixPcaInstance
    single: BmfSymmetric
    bi: BmfNonsymmetric
    f_star_single: float
    f_star_bi: float


def build_problem(config):
    """Test matrix, both objectives and both oracle targets for a config."""
    if config.instance_path:
        inst = load_instance(config.instance_path)
    else:
        inst = generate_instance(config.n, config.m, config.rank, config.lam,
                                 config.symmetric, config.seed, config.scaling)
    ns = MatrixPcaInstance(inst.A, inst.lam, inst.rank, False, inst.seed, inst.scaling)
    bi = BmfNonsymmetric(ns)
    f_bi = bmf_objective_of_oracle(ns, oracle_solution(ns))
    single, f_single = None, None
    if inst.symmetric:
        single = BmfSymmetric(inst)
        f_single = bmf_objective_of_oracle(inst, oracle_solution(inst))
    return Problem(inst, single, bi, f_single, f_bi)


def eta_grid(L, points=8, span=(1e-4, 1.0)):
    """``points`` log-spaced step sizes covering ``[span[0], span[1]] / L``."""
    return np.logspace(np.log10(span[0]), np.log10(span[1]), points) / L


def iterations_to_gap(f_values, f_star, thresholds=GAP_THRESHOLDS):
    f = np.asarray(f_values, dtype=float)
    gap = (f - f_star) / max(1.0, abs(f_star))
    out = {}
    for t in thresholds:
        hit = np.nonzero(gap <= t)[0]
        out[f"{t:g}"] = int(hit[0]) if hit.size else None
    return out


@dataclass
class ExperimentResult:
    solver: str
    init_scale: float
    repetition: int
    eta: float
    eta_index: int
    L_est: float
    status: str
    iterations: int
    final_f: float
    f_star: float
    final_gap: float
    iters_to_gap: dict
    decrease_passed: bool = None
    decrease_worst: float = None
    gradient_step_ratio: float = None
    stationarity: dict = None
    selected: bool = True
    message: str = ""
    run_name: str = ""
    trace: object = field(default=None, repr=False)
    x: object = field(default=None, repr=False)
    y: object = field(default=None, repr=False)

    def to_dict(self):
        d = {k: v for k, v in asdict(self).items() if k not in ("trace", "x", "y")}
        return d

    def reached(self, gap):
        k = self.iters_to_gap.get(f"{gap:g}")
        if k is not None:
            return k
        if self.trace is not None:
            return iterations_to_gap(self.trace.f, self.f_star, (gap,))[f"{gap:g}"]
        return None


@dataclass
class GridChoice:
    eta: float
    result: ExperimentResult
    all_diverged: bool


def best_of_grid(results, gap=1e-4):
    """Pick the grid point reaching ``gap`` in the fewest iterations.

    Ties (including "never reached") go to the smaller final gap, then the
    smaller step. Diverged or failed runs are never chosen; if every point
    failed the choice is empty and ``all_diverged`` is set.
    """
    if not results:
        raise ValueError("empty grid")
    ok = [r for r in results if r.status not in ("diverged",) + FAILED]
    if not ok:
        return GridChoice(None, None, True)

    def key(r):
        k = r.reached(gap)
        return (np.inf if k is None else k, r.final_gap, r.eta)

    best = min(ok, key=key)
    return GridChoice(best.eta, best, False)


# --------------------------------------------------------------------------


def _init_points(problem, solver, scale, config, scale_idx, rep):
    inst = problem.instance
    n, m = inst.A.shape
    r = inst.rank
    base = [config.seed, rep, scale_idx]
    x0 = random_init((n, r), scale, base + [0])
    if solver in BI_BLOCK:
        return x0, random_init((m, r), scale, base + [1])
    return x0, None


def _kernel_for(solver, f, config):
    if solver in ("gd", "palm"):
        dims = f.dims if solver == "palm" else f.dimension
        return make_kernel("euclidean", dims)
    if solver in BI_BLOCK:
        return make_kernel(config.bi_kernel, f.dims, config.alpha, config.sigma, config.degree)
    return make_kernel(config.kernel, f.dimension, config.alpha, config.sigma, config.degree)


def _run_name(solver, scale, rep, j):
    return f"{solver}_init{scale:g}_rep{rep}_eta{j}"


def _execute(job):
    """Run one solver configuration; never raises."""
    config, solver, scale_idx, rep, j, eta, L, use_L = job
    scale = config.init_scales[scale_idx]
    name = _run_name(solver, scale, rep, j)
    problem = build_problem(config)
    bi = solver in BI_BLOCK
    f = problem.bi if bi else problem.single
    f_star = problem.f_star_bi if bi else problem.f_star_single
    x0, y0 = _init_points(problem, solver, scale, config, scale_idx, rep)
    kernel = _kernel_for(solver, f, config)
    smoothness = (L, L) if (use_L and bi) else (L if use_L else None)
    try:
        cfg = SolverConfig(solver, eta=eta, smoothness=smoothness, max_iters=config.max_iters,
                           grad_tol=config.grad_tol, step_tol=config.step_tol)
        res = run(f, kernel, cfg, x0, y0)
    except Exception as err:  # recorded, never aborts the sweep
        return ExperimentResult(solver, scale, rep, float(eta), j, float(L), "error", 0,
                                float("nan"), f_star, float("nan"), {}, message=repr(err),
                                run_name=name)
    tr = res.trace
    final_f = float(tr.f[-1])
    dec = check_decrease(tr, solver, eta, L if use_L else None, kernel.sigma)
    out = ExperimentResult(
        solver, scale, rep, float(eta), j, float(L), res.status, res.iterations, final_f,
        f_star, (final_f - f_star) / max(1.0, abs(f_star)),
        iterations_to_gap(tr.f, f_star, config.thresholds),
        decrease_passed=dec.passed, decrease_worst=dec.worst_slack,
        gradient_step_ratio=bounded_gradient_ratio(tr), message=res.message,
        run_name=name, trace=tr, x=res.x, y=res.y)
    if config.certify and res.status in ("converged_grad", "converged_step", "max_iters"):
        out.stationarity = certify_second_order(f, res.x, y=res.y).to_dict()
    return out


def _threads():
    try:
        return max(1, int(os.environ.get("BREGOPT_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class ExperimentSummary:
    config: ExperimentConfig
    f_star_single: float
    f_star_bi: float
    results: list

    def selected(self):
        return [r for r in self.results if r.selected]

    def get(self, solver, init_scale, repetition=0):
        for r in self.results:
            if (r.selected and r.solver == solver and r.init_scale == init_scale
                    and r.repetition == repetition):
                return r
        return None

    @property
    def failed(self):
        return [r for r in self.results if r.status in FAILED
                or (r.selected and r.status == "diverged")]

    def to_dict(self):
        # the output location is left out so a sweep's summary does not depend on it
        config = {k: v for k, v in self.config.to_dict().items() if k != "output_dir"}
        return {"config": config,
                "oracle": {"single_block": self.f_star_single, "bi_block": self.f_star_bi},
                "results": [r.to_dict() for r in self.results]}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def run_experiment(config, workers=None):
    """Execute the sweep, write outputs when ``config.output_dir`` is set.

    Outputs: ``traces/<run>.csv`` (subsampled), ``runs/<run>.json`` (run
    metadata with wall time), ``iterates/<run>_U.txt`` (and ``_V.txt``),
    ``summary.json`` (deterministic; no timing) and ``plot_data.csv`` with
    ``solver,init_scale,repetition,iter,gap`` for the selected runs.
    """
    problem = build_problem(config)
    jobs = []
    groups = []
    for rep in range(config.repetitions):
        for si, scale in enumerate(config.init_scales):
            for solver in config.solvers:
                bi = solver in BI_BLOCK
                f = problem.bi if bi else problem.single
                kernel = _kernel_for(solver, f, config)
                x0, y0 = _init_points(problem, solver, scale, config, si, rep)
                z0 = x0 if y0 is None else np.concatenate([x0, y0])
                L = estimate_relative_smoothness(
                    f, kernel, samples=config.estimator_samples,
                    radius=2.0 * np.linalg.norm(z0) + 1.0, seed=config.seed, safety=config.safety)
                rule = config.eta_rule(solver)
                if rule == "grid":
                    etas = eta_grid(L, config.grid_points, config.grid_span)
                    idx = list(range(len(jobs), len(jobs) + len(etas)))
                    jobs += [(config, solver, si, rep, j, float(e), L, False)
                             for j, e in enumerate(etas)]
                    groups.append(idx)
                else:
                    eta = config.eta_factor / L if rule == "estimate" else float(rule)
                    use_L = rule == "estimate" or eta < 1.0 / L
                    jobs.append((config, solver, si, rep, 0, eta, L, use_L))
                    groups.append([len(jobs) - 1])

    workers = _threads() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_execute, jobs))
    else:
        results = [_execute(j) for j in jobs]

    for idx in groups:
        if len(idx) > 1:
            choice = best_of_grid([results[i] for i in idx])
            for i in idx:
                results[i].selected = choice.result is results[i]

    summary = ExperimentSummary(config, problem.f_star_single, problem.f_star_bi, results)
    if config.output_dir:
        write_outputs(summary, config.output_dir)
    return summary


def write_outputs(summary, out):
    config = summary.config
    for sub in ("traces", "runs", "iterates"):
        os.makedirs(os.path.join(out, sub), exist_ok=True)
    for r in summary.results:
        if r.trace is not None:
            r.trace.to_csv(os.path.join(out, "traces", r.run_name + ".csv"),
                           subsample=tuple(config.trace_subsample))
            meta = r.to_dict()
            meta["wall_time_s"] = float(r.trace.time_s[-1])
            with open(os.path.join(out, "runs", r.run_name + ".json"), "w") as fh:
                json.dump(meta, fh, indent=2, sort_keys=True)
        if r.x is not None:
            inst = summary_instance_shape(config, r)
            save_matrix(os.path.join(out, "iterates", r.run_name + "_U.txt"),
                        np.reshape(r.x, inst[0]))
            if r.y is not None:
                save_matrix(os.path.join(out, "iterates", r.run_name + "_V.txt"),
                            np.reshape(r.y, inst[1]))
    with open(os.path.join(out, "summary.json"), "w") as fh:
        fh.write(summary.to_json())
    head, every = config.trace_subsample
    with open(os.path.join(out, "plot_data.csv"), "w") as fh:
        fh.write("solver,init_scale,repetition,iter,gap\n")
        for r in summary.selected():
            if r.trace is None:
                continue
            denom = max(1.0, abs(r.f_star))
            for row in r.trace.rows((head, every)):
                fh.write(f"{r.solver},{r.init_scale:g},{r.repetition},{row[0]},"
                         f"{(row[1] - r.f_star) / denom!r}\n")


def summary_instance_shape(config, r):
    rank = config.rank
    if config.instance_path:
        n = len(r.x) // rank
        m = len(r.y) // rank if r.y is not None else n
    else:
        n = config.n
        m = config.n if config.m is None else config.m
    return (n, rank), (m, rank)
