"""Bregman descent solvers and their Euclidean baselines.

Variants:

``bgd``    Bregman gradient descent
``bppm``   Bregman proximal point minimization
``bpalm``  Bregman proximal alternating linearized minimization
``bpam``   Bregman proximal alternating minimization
``gd``     gradient descent
``palm``   proximal alternating linearized minimization

Each step function maps the current iterate to the next one; :func:`run`
drives a variant to termination and records a :class:`Trace`.
"""

import csv
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .kernels import EuclideanBiKernel, EuclideanKernel

__all__ = [
    "SINGLE_BLOCK",
    "BI_BLOCK",
    "SolverConfig",
    "Trace",
    "RunResult",
    "SubproblemError",
    "SufficientDecreaseError",
    "gd_step",
    "palm_step",
    "bgd_step",
    "bppm_step",
    "bpalm_step",
    "bpam_step",
    "decrease_coefficient",
    "run",
    "random_init",
]

SINGLE_BLOCK = ("bgd", "bppm", "gd")
BI_BLOCK = ("bpalm", "bpam", "palm")
VARIANTS = SINGLE_BLOCK + BI_BLOCK
STATUSES = ("converged_grad", "converged_step", "max_iters", "diverged", "subproblem_failure")


class SubproblemError(RuntimeError):
    """Inner solve of a proximal subproblem did not reach its tolerance."""

    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


class SufficientDecreaseError(AssertionError):
    pass


@dataclass
class SolverConfig:
    variant: str = "bgd"
    eta: float = 0.1
    smoothness: object = None  # L_f, or (L1, L2) for bi-block variants
    max_iters: int = 50_000
    grad_tol: float = 1e-8
    step_tol: float = 1e-10
    inner_max_iters: int = 5_000
    inner_tol: float = 1e-12
    fast_path: bool = True
    check_decrease: bool = False
    decrease_tol: float = 1e-9

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not (self.eta > 0 and np.isfinite(self.eta)):
            raise ValueError("eta must be positive and finite")
        L = self.max_smoothness
        if L is not None and not self.eta < 1.0 / L:
            raise ValueError(f"eta={self.eta} violates eta < 1/L = {1.0 / L}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    @property
    def max_smoothness(self):
        if self.smoothness is None:
            return None
        return float(np.max(np.atleast_1d(self.smoothness)))

    @property
    def is_bi_block(self):
        return self.variant in BI_BLOCK

    def to_dict(self):
        d = asdict(self)
        if d["smoothness"] is not None:
            d["smoothness"] = np.atleast_1d(d["smoothness"]).astype(float).tolist()
        return d


@dataclass
class Trace:
    """Per-iteration record; row 0 is the starting point."""

    f: list = field(default_factory=list)
    step_norm: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    decrease_slack: list = field(default_factory=list)
    time_s: list = field(default_factory=list)

    FIELDS = ("iter", "f", "step_norm", "grad_norm", "decrease_slack", "time_s")

    def append(self, f, step_norm, grad_norm, slack, t):
        self.f.append(f)
        self.step_norm.append(step_norm)
        self.grad_norm.append(grad_norm)
        self.decrease_slack.append(slack)
        self.time_s.append(t)

    def __len__(self):
        return len(self.f)

    def arrays(self):
        return {k: np.asarray(getattr(self, k), dtype=float)
                for k in ("f", "step_norm", "grad_norm", "decrease_slack", "time_s")}

    def rows(self, subsample=None):
        """Rows ``(iter, f, step_norm, grad_norm, decrease_slack, time_s)``.

        ``subsample=(head, every)`` keeps every row of the first ``head`` and
        then every ``every``-th row (plus the final one).
        """
        n = len(self)
        idx = range(n)
        if subsample is not None:
            head, every = subsample
            idx = [i for i in range(n) if i < head or (i - head) % every == 0 or i == n - 1]
        for i in idx:
            yield (i, self.f[i], self.step_norm[i], self.grad_norm[i],
                   self.decrease_slack[i], self.time_s[i])

    def to_csv(self, path, subsample=None):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.FIELDS)
            for row in self.rows(subsample):
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])

    @classmethod
    def from_csv(cls, path):
        tr = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                tr.append(float(row["f"]), float(row["step_norm"]), float(row["grad_norm"]),
                          float(row["decrease_slack"]), float(row["time_s"]))
        return tr


@dataclass
class RunResult:
    x: np.ndarray
    y: np.ndarray
    trace: Trace
    status: str
    iterations: int
    config: SolverConfig
    message: str = ""

    def metadata(self, **extra):
        meta = {"config": self.config.to_dict(), "status": self.status,
                "iterations": self.iterations, "final_f": self.trace.f[-1],
                "message": self.message}
        meta.update(extra)
        return meta

    def save_metadata(self, path, **extra):
        with open(path, "w") as fh:
            json.dump(self.metadata(**extra), fh, indent=2, sort_keys=True)


def random_init(shape, scale, seed):
    """I.i.d. N(0, scale^2) entries, flattened; deterministic under ``seed``."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    rng = np.random.default_rng(seed)
    return scale * rng.standard_normal(shape).ravel()


# --------------------------------------------------------------------------
# single steps


def gd_step(f, x, eta, grad=None):
    g = f.gradient(x) if grad is None else grad
    return x - eta * g


def palm_step(f, x, y, eta, grad_x=None):
    gx = f.grad_x(x, y) if grad_x is None else grad_x
    x_new = x - eta * gx
    y_new = y - eta * f.grad_y(x_new, y)
    return x_new, y_new


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise FloatingPointError("non-finite gradient")


def bgd_step(f, k, x, eta, fast_path=True, grad=None):
    """Solve ``grad h(x+) = grad h(x) - eta grad f(x)``.

    With the degree-4 power kernel the inversion is the closed-form cubic
    retraction; otherwise a monotone scalar Newton solve along the ray.
    """
    g = f.gradient(x) if grad is None else grad
    _check_finite(g)
    if not np.any(g):
        return np.array(x, dtype=float, copy=True)
    return k.inverse_gradient(k.gradient(x) - eta * g, fast=fast_path)


def _inner_step_size(L, eta):
    # the subproblem phi = f + D_h(., x_prev)/eta is (L + 1/eta)-smooth relative to h
    return 1.0 / (2.0 * (L + 1.0 / eta))


def bppm_step(f, k, x, eta, smoothness, inner_max_iters=5_000, inner_tol=1e-12, fast_path=True):
    """Approximate ``argmin f(z) + D_h(z, x)/eta`` by inner Bregman gradient steps.

    The inner iteration starts at ``x`` and is monotone in the subproblem
    objective, so the returned point never does worse than ``x``. Stops when
    ``|grad phi| <= inner_tol * (1 + |grad f(x)| + |grad h(x)| / eta)``, the
    scale of the terms that make up ``grad phi``.
    """
    if smoothness is None:
        raise ValueError("bppm_step needs the relative smoothness constant")
    x = np.asarray(x, dtype=float)
    hx = k.gradient(x)
    step = _inner_step_size(smoothness, eta)
    z = x.copy()
    gz = f.gradient(z)
    _check_finite(gz)
    tol = inner_tol * (1.0 + np.linalg.norm(gz) + np.linalg.norm(hx) / eta)
    for _ in range(inner_max_iters):
        hz = k.gradient(z)
        gphi = gz + (hz - hx) / eta
        if np.linalg.norm(gphi) <= tol:
            return z
        z = k.inverse_gradient(hz - step * gphi, fast=fast_path)
        gz = f.gradient(z)
        _check_finite(gz)
    gphi = gz + (k.gradient(z) - hx) / eta
    if np.linalg.norm(gphi) <= tol:
        return z
    raise SubproblemError(
        f"B-PPM inner solve: |grad phi|={np.linalg.norm(gphi):.3e} > {tol:.3e} "
        f"after {inner_max_iters} iterations", z)


def bpalm_step(f, k, x, y, eta, fast_path=True, grad_x=None):
    """One Gauss-Seidel sweep: linearized x-block step, then y-block at the new x."""
    gx = f.grad_x(x, y) if grad_x is None else grad_x
    _check_finite(gx)
    if np.any(gx):
        x_new = k.solve_first(k.grad_x(x, y) - eta * gx, y, fast=fast_path)
    else:
        x_new = np.array(x, dtype=float, copy=True)
    gy = f.grad_y(x_new, y)
    _check_finite(gy)
    if np.any(gy):
        y_new = k.solve_second(k.grad_y(x_new, y) - eta * gy, x_new, fast=fast_path)
    else:
        y_new = np.array(y, dtype=float, copy=True)
    return x_new, y_new


def _block_inner(grad_block, h_grad, solve, z0, eta, L, inner_max_iters, inner_tol, label):
    hz0 = h_grad(z0)
    step = _inner_step_size(L, eta)
    z = z0.copy()
    g = grad_block(z)
    _check_finite(g)
    tol = inner_tol * (1.0 + np.linalg.norm(g) + np.linalg.norm(hz0) / eta)
    for _ in range(inner_max_iters):
        hz = h_grad(z)
        gphi = g + (hz - hz0) / eta
        if np.linalg.norm(gphi) <= tol:
            return z
        z = solve(hz - step * gphi)
        g = grad_block(z)
        _check_finite(g)
    gphi = g + (h_grad(z) - hz0) / eta
    if np.linalg.norm(gphi) <= tol:
        return z
    raise SubproblemError(
        f"B-PAM {label}-block inner solve: |grad phi|={np.linalg.norm(gphi):.3e} "
        f"> {tol:.3e} after {inner_max_iters} iterations", z)


def bpam_step(f, k, x, y, eta, smoothness=None, inner_max_iters=5_000, inner_tol=1e-12,
              fast_path=True):
    """Exact block minimizations in Gauss-Seidel order.

    When the block divergence is a scaled squared distance and the objective
    provides ``prox_x``/``prox_y`` (the nonsymmetric BMF problem does), each
    block is a linear solve. Otherwise each block is solved by inner Bregman
    gradient steps, which needs ``smoothness = (L1, L2)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if smoothness is not None:
        L1, L2 = np.broadcast_to(np.asarray(smoothness, dtype=float), (2,))

    c = k.block_weight_first(y)
    if fast_path and c is not None and hasattr(f, "prox_x"):
        x_new = f.prox_x(y, x, c / eta)
    else:
        if smoothness is None:
            raise ValueError("bpam_step needs (L1, L2) for the inner block solves")
        x_new = _block_inner(lambda z: f.grad_x(z, y), lambda z: k.grad_x(z, y),
                             lambda g: k.solve_first(g, y, fast=fast_path),
                             x, eta, L1, inner_max_iters, inner_tol, "x")

    c = k.block_weight_second(x_new)
    if fast_path and c is not None and hasattr(f, "prox_y"):
        y_new = f.prox_y(x_new, y, c / eta)
    else:
        if smoothness is None:
            raise ValueError("bpam_step needs (L1, L2) for the inner block solves")
        y_new = _block_inner(lambda z: f.grad_y(x_new, z), lambda z: k.grad_y(x_new, z),
                             lambda g: k.solve_second(g, x_new, fast=fast_path),
                             y, eta, L2, inner_max_iters, inner_tol, "y")
    return x_new, y_new


# --------------------------------------------------------------------------
# driver


def decrease_coefficient(variant, eta, L, sigma):
    """Coefficient c in ``f(x_{k-1}) - f(x_k) >= c |x_k - x_{k-1}|^2``.

    Linearized variants (bgd, bpalm, gd, palm) use ``(1/eta - L) sigma/2``,
    proximal variants (bppm, bpam) ``sigma/(2 eta)``. Without ``L`` the
    linearized bound degrades to plain monotonicity (c = 0).
    """
    if variant in ("bppm", "bpam"):
        return sigma / (2.0 * eta)
    if L is None:
        return 0.0
    return (1.0 / eta - L) * sigma / 2.0


def _default_kernel(variant, f):
    if variant == "gd":
        return EuclideanKernel(f.dimension)
    if variant == "palm":
        return EuclideanBiKernel(*f.dims)
    return None


def run(f, kernel, config, x0, y0=None, callback=None):
    """Iterate a solver from ``x0`` (and ``y0`` for bi-block variants).

    Stops when ``|grad f| <= grad_tol``, when the step satisfies
    ``|x_k - x_{k-1}| <= step_tol (1 + |x_k|)``, after ``max_iters``, on
    divergence (non-finite values, or three consecutive increases beyond
    ``1e-8 * max(1, |f|)``), or when an inner solve fails. ``kernel`` is
    ignored for the Euclidean baselines. ``callback(k, x, y, f)`` returning
    True also ends the run (status ``max_iters``).
    """
    v = config.variant
    bi = config.is_bi_block
    if bi and y0 is None:
        raise ValueError(f"{v} needs y0")
    if v in ("gd", "palm"):
        kernel = _default_kernel(v, f)
    if kernel is None:
        raise ValueError(f"{v} needs a kernel")
    L = config.max_smoothness
    sigma = kernel.sigma
    coeff = decrease_coefficient(v, config.eta, L, sigma)
    eta = config.eta

    x = np.array(x0, dtype=float)
    y = None if y0 is None else np.array(y0, dtype=float)
    trace = Trace()
    t0 = time.perf_counter()
    if bi:
        fx, gx, gy = f.value_and_gradients(x, y)
        gnorm = float(np.sqrt(gx @ gx + gy @ gy))
    else:
        fx, g = f.value_and_gradient(x)
        gnorm = float(np.linalg.norm(g))
    trace.append(fx, 0.0, gnorm, 0.0, 0.0)

    status = "max_iters"
    message = ""
    increases = 0
    k = 0
    if not np.isfinite(fx):
        return RunResult(x, y, trace, "diverged", 0, config, "non-finite initial objective")
    if gnorm <= config.grad_tol:
        return RunResult(x, y, trace, "converged_grad", 0, config)

    with np.errstate(over="raise", invalid="raise"):
        while k < config.max_iters:
            k += 1
            try:
                if v == "gd":
                    x_new = gd_step(f, x, eta, grad=g)
                elif v == "bgd":
                    x_new = bgd_step(f, kernel, x, eta, config.fast_path, grad=g)
                elif v == "bppm":
                    x_new = bppm_step(f, kernel, x, eta, L, config.inner_max_iters,
                                      config.inner_tol, config.fast_path)
                elif v == "palm":
                    x_new, y_new = palm_step(f, x, y, eta, grad_x=gx)
                elif v == "bpalm":
                    x_new, y_new = bpalm_step(f, kernel, x, y, eta, config.fast_path, grad_x=gx)
                else:
                    x_new, y_new = bpam_step(f, kernel, x, y, eta, config.smoothness,
                                             config.inner_max_iters, config.inner_tol,
                                             config.fast_path)
                if bi:
                    f_new, gx, gy = f.value_and_gradients(x_new, y_new)
                    gnorm = float(np.sqrt(gx @ gx + gy @ gy))
                    d2 = float(np.sum((x_new - x) ** 2) + np.sum((y_new - y) ** 2))
                    znorm = float(np.sqrt(x_new @ x_new + y_new @ y_new))
                else:
                    f_new, g = f.value_and_gradient(x_new)
                    gnorm = float(np.linalg.norm(g))
                    d2 = float(np.sum((x_new - x) ** 2))
                    znorm = float(np.linalg.norm(x_new))
            except SubproblemError as err:
                status, message = "subproblem_failure", str(err)
                k -= 1
                break
            except FloatingPointError as err:
                status, message = "diverged", f"floating point failure: {err}"
                k -= 1
                break

            if not (np.isfinite(f_new) and np.isfinite(gnorm)):
                status, message = "diverged", "non-finite objective"
                k -= 1
                break

            step = np.sqrt(d2)
            slack = (fx - f_new) - coeff * d2
            trace.append(f_new, step, gnorm, slack, time.perf_counter() - t0)
            if config.check_decrease and slack < -config.decrease_tol * max(1.0, abs(fx)):
                raise SufficientDecreaseError(
                    f"{v}: sufficient decrease violated at iteration {k}: slack={slack:.3e}")

            if f_new > fx + 1e-8 * max(1.0, abs(fx)):
                increases += 1
            else:
                increases = 0
            x = x_new
            if bi:
                y = y_new
            fx = f_new
            if increases >= 3:
                status, message = "diverged", f"objective increased 3 times in a row at iteration {k}"
                break
            if gnorm <= config.grad_tol:
                status = "converged_grad"
                break
            if step <= config.step_tol * (1.0 + znorm):
                status = "converged_step"
                break
            if callback is not None and callback(k, x, y, fx):
                break

    return RunResult(x, y, trace, status, k, config, message)
