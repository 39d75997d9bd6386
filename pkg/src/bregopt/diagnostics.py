"""Runtime checks of descent, stationarity and saddle instability.

The Jacobian assemblers implement the implicit-function formulas for the
derivative of each solver's step map,

    B-GD   Dg(x) = H_h(x+)^{-1} (H_h(x) - eta H_f(x))
    B-PPM  Dg(x) = (H_h(x+) + eta H_f(x+))^{-1} H_h(x)

and the block products ``Dg = Dg2(g1(x, y)) Dg1(x, y)`` for the alternating
variants. Kernel Hessians are analytic; objective Hessians come from the
objective (exact where it provides Hessian-vector products, central
differences otherwise). :func:`jacobian_fd_error` checks an assembled ``Dg``
against central differences of the step map itself.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .objectives import BiObjective, dense_hessian
from .solvers import (bgd_step, bpalm_step, bpam_step, bppm_step,
                      decrease_coefficient)

__all__ = [
    "DecreaseReport",
    "StationarityReport",
    "JacobianReport",
    "check_decrease",
    "bounded_gradient_ratio",
    "certify_second_order",
    "assemble_bgd_jacobian",
    "assemble_bppm_jacobian",
    "assemble_bpalm_jacobian",
    "assemble_bpam_jacobian",
    "jacobian_fd_error",
    "DENSE_LIMIT",
]

DENSE_LIMIT = 400


class _JsonReport:
    def to_dict(self):
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, np.ndarray):
                v = v.tolist()
            elif isinstance(v, np.generic):
                v = v.item()
            out[k] = v
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


@dataclass
class DecreaseReport(_JsonReport):
    passed: bool
    worst_slack: float
    worst_index: int
    violations: list
    coefficient: float
    tolerance: float


def check_decrease(trace, variant, eta, L=None, sigma=1.0, tol=1e-9):
    """Verify the per-iteration sufficient decrease recorded in a trace.

    The inequality is ``f_{k-1} - f_k >= c |x_k - x_{k-1}|^2`` with ``c`` from
    :func:`bregopt.solvers.decrease_coefficient`; iteration ``k`` passes when
    its slack is at least ``-tol * max(1, |f_{k-1}|)``. ``worst_slack`` is the
    smallest scale-normalized slack and ``violations`` lists failing indices.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    f = np.asarray(trace.f, dtype=float)
    step = np.asarray(trace.step_norm, dtype=float)
    c = decrease_coefficient(variant, eta, L, sigma)
    if f.size < 2:
        return DecreaseReport(True, 0.0, 0, [], c, tol)
    slack = (f[:-1] - f[1:]) - c * step[1:] ** 2
    scaled = slack / np.maximum(1.0, np.abs(f[:-1]))
    bad = np.nonzero(scaled < -tol)[0] + 1
    i = int(np.argmin(scaled))
    return DecreaseReport(bad.size == 0, float(scaled[i]), i + 1,
                          bad.tolist(), c, tol)


def bounded_gradient_ratio(trace):
    """Largest ``|grad f(x_k)| / |x_k - x_{k-1}|`` over iterations with a nonzero step."""
    g = np.asarray(trace.grad_norm[1:], dtype=float)
    s = np.asarray(trace.step_norm[1:], dtype=float)
    ok = s > 0
    if not np.any(ok):
        return 0.0
    return float(np.max(g[ok] / s[ok]))


@dataclass
class StationarityReport(_JsonReport):
    grad_norm: float
    min_hessian_eigenvalue: float
    hessian_norm: float
    classification: str
    grad_tol: float
    curv_tol: float
    method: str


def _min_eig_lanczos(hvp, n, seed):
    """Smallest Hessian eigenvalue and spectral norm from HVPs (ARPACK Lanczos)."""
    from scipy.sparse.linalg import LinearOperator, eigsh

    op = LinearOperator((n, n), matvec=lambda v: hvp(np.ravel(v)), dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(n)
    lam_min = eigsh(op, k=1, which="SA", v0=v0, return_eigenvectors=False)[0]
    lam_abs = eigsh(op, k=1, which="LM", v0=v0, return_eigenvectors=False)[0]
    return float(lam_min), float(abs(lam_abs))


def certify_second_order(f, x, grad_tol=None, curv_tol=None, y=None, dense_limit=DENSE_LIMIT,
                         seed=0, eps=None):
    """Classify ``x`` as second-order stationary, strict saddle, or not stationary.

    The Hessian is assembled by central differences of the gradient (step
    ``eps_mach**(1/3) (1 + |x|)``) and diagonalized when there are at most
    ``dense_limit`` variables; larger problems run Lanczos (ARPACK) on
    Hessian-vector products. Default tolerances are
    ``grad_tol = 1e-6 sqrt(n)`` and ``curv_tol = 1e-6 (1 + |H|)``.

    For a bi-block objective pass ``y``; the joint Hessian is used.
    """
    if isinstance(f, BiObjective):
        if y is None:
            raise ValueError("bi-block objective needs y")
        f = f.joint()
        x = np.concatenate([x, y])
    x = np.asarray(x, dtype=float)
    n = x.size
    g = f.gradient(x)
    gnorm = float(np.linalg.norm(g))
    if n <= dense_limit:
        H = dense_hessian(f.gradient, x, eps)
        w = np.linalg.eigvalsh(H)
        lam_min, hnorm = float(w[0]), float(np.max(np.abs(w)))
        method = "dense"
    else:
        lam_min, hnorm = _min_eig_lanczos(lambda v: f.hvp(x, v), n, seed)
        method = "lanczos"
    if grad_tol is None:
        grad_tol = 1e-6 * np.sqrt(n)
    if curv_tol is None:
        curv_tol = 1e-6 * (1.0 + hnorm)
    if gnorm > grad_tol:
        cls = "not_stationary"
    elif lam_min < -curv_tol:
        cls = "strict_saddle"
    else:
        cls = "second_order_stationary"
    return StationarityReport(gnorm, lam_min, hnorm, cls, float(grad_tol), float(curv_tol), method)


@dataclass
class JacobianReport(_JsonReport):
    Dg: np.ndarray = field(repr=False)
    spectral_radius: float
    is_fixed_point_residual: float
    determinant: float
    eigenvalues: np.ndarray = field(repr=False)

    def to_dict(self):
        d = super().to_dict()
        ev = np.asarray(self.eigenvalues)
        d["eigenvalues"] = {"real": ev.real.tolist(), "imag": ev.imag.tolist()}
        return d


def _report(Dg, residual):
    ev = np.linalg.eigvals(Dg)
    return JacobianReport(Dg, float(np.max(np.abs(ev))), float(residual),
                          float(np.linalg.det(Dg)), ev)


def _check_small(n):
    if n > DENSE_LIMIT:
        raise ValueError(f"dense Jacobian assembly limited to {DENSE_LIMIT} variables, got {n}")


def _objective_hessian(f, x):
    return f.hessian(np.asarray(x, dtype=float))


def assemble_bgd_jacobian(f, k, x, eta, fast_path=True):
    x = np.asarray(x, dtype=float)
    _check_small(x.size)
    xp = bgd_step(f, k, x, eta, fast_path)
    Dg = np.linalg.solve(k.hessian(xp), k.hessian(x) - eta * _objective_hessian(f, x))
    return _report(Dg, np.linalg.norm(xp - x))


def assemble_bppm_jacobian(f, k, x, eta, smoothness, inner_max_iters=20_000, inner_tol=1e-12):
    x = np.asarray(x, dtype=float)
    _check_small(x.size)
    xp = bppm_step(f, k, x, eta, smoothness, inner_max_iters, inner_tol)
    Dg = np.linalg.solve(k.hessian(xp) + eta * _objective_hessian(f, xp), k.hessian(x))
    return _report(Dg, np.linalg.norm(xp - x))


def _bi_blocks(f, x, y):
    return f.hessian_blocks(np.asarray(x, dtype=float), np.asarray(y, dtype=float))


def assemble_bpalm_jacobian(f, k, x, y, eta, fast_path=True):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = x.size, y.size
    _check_small(n + m)
    xp, yp = bpalm_step(f, k, x, y, eta, fast_path)

    # x-block at (x, y): f Hessians evaluated at the old point
    F11, F12, _, _ = _bi_blocks(f, x, y)
    Dg1 = np.eye(n + m)
    Hxx_new = k.hess_xx(xp, y)
    Dg1[:n, :n] = np.linalg.solve(Hxx_new, k.hess_xx(x, y) - eta * F11)
    Dg1[:n, n:] = np.linalg.solve(Hxx_new, k.hess_xy(x, y) - k.hess_xy(xp, y) - eta * F12)

    # y-block at g1(x, y) = (xp, y)
    _, _, G21, G22 = _bi_blocks(f, xp, y)
    Dg2 = np.eye(n + m)
    Hyy_new = k.hess_yy(xp, yp)
    Dg2[n:, :n] = np.linalg.solve(Hyy_new, k.hess_xy(xp, y).T - k.hess_xy(xp, yp).T - eta * G21)
    Dg2[n:, n:] = np.linalg.solve(Hyy_new, k.hess_yy(xp, y) - eta * G22)

    resid = np.sqrt(np.sum((xp - x) ** 2) + np.sum((yp - y) ** 2))
    return _report(Dg2 @ Dg1, resid)


def assemble_bpam_jacobian(f, k, x, y, eta, smoothness=None, fast_path=True,
                           inner_max_iters=20_000, inner_tol=1e-12):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = x.size, y.size
    _check_small(n + m)
    xp, yp = bpam_step(f, k, x, y, eta, smoothness, inner_max_iters, inner_tol, fast_path)

    # x-block: f Hessians at the block minimizer (xp, y)
    F11, F12, _, _ = _bi_blocks(f, xp, y)
    Dg1 = np.eye(n + m)
    M1 = k.hess_xx(xp, y) + eta * F11
    Dg1[:n, :n] = np.linalg.solve(M1, k.hess_xx(x, y))
    Dg1[:n, n:] = np.linalg.solve(M1, k.hess_xy(x, y) - k.hess_xy(xp, y) - eta * F12)

    # y-block at (xp, y): f Hessians at (xp, yp)
    _, _, G21, G22 = _bi_blocks(f, xp, yp)
    Dg2 = np.eye(n + m)
    M2 = k.hess_yy(xp, yp) + eta * G22
    Dg2[n:, :n] = np.linalg.solve(M2, k.hess_xy(xp, y).T - k.hess_xy(xp, yp).T - eta * G21)
    Dg2[n:, n:] = np.linalg.solve(M2, k.hess_yy(xp, y))

    resid = np.sqrt(np.sum((xp - x) ** 2) + np.sum((yp - y) ** 2))
    return _report(Dg2 @ Dg1, resid)


def jacobian_fd_error(step_map, z, Dg, n_dirs=10, seed=0, eps=None):
    """Worst relative error of ``Dg v`` against central differences of ``step_map``.

    ``step_map`` maps a flat point to a flat point (stack bi-block variables).
    """
    z = np.asarray(z, dtype=float)
    rng = np.random.default_rng(seed)
    if eps is None:
        eps = np.finfo(float).eps ** (1.0 / 3.0) * (1.0 + np.linalg.norm(z))
    worst = 0.0
    for _ in range(n_dirs):
        v = rng.standard_normal(z.size)
        v /= np.linalg.norm(v)
        fd = (step_map(z + eps * v) - step_map(z - eps * v)) / (2.0 * eps)
        an = Dg @ v
        worst = max(worst, np.linalg.norm(fd - an) / max(np.linalg.norm(an), 1e-300))
    return float(worst)
