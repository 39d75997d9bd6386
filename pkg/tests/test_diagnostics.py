import json

import numpy as np
import pytest

from bregopt.diagnostics import (assemble_bgd_jacobian, assemble_bpalm_jacobian,
                                 assemble_bpam_jacobian, assemble_bppm_jacobian,
                                 bounded_gradient_ratio, certify_second_order, check_decrease,
                                 jacobian_fd_error)
from bregopt.kernels import EuclideanBiKernel, EuclideanKernel, PowerKernel, make_kernel
from bregopt.objectives import (BlockQuadraticObjective, BmfNonsymmetric, BmfSymmetric,
                                FunctionBiObjective, FunctionObjective, MatrixPcaInstance,
                                QuadraticObjective, bmf_relative_smoothness)
from bregopt.solvers import (SolverConfig, Trace, bgd_step, bpalm_step, bpam_step, bppm_step,
                             run)


def saddle_Q():
    return np.diag([2.0, 1.0, -1.5])


# ------------------------------------------------------------------ decrease


def test_check_decrease_constant_trace():
    tr = Trace()
    for _ in range(5):
        tr.append(3.0, 0.0, 0.0, 0.0, 0.0)
    rep = check_decrease(tr, "bgd", 0.1, 1.0)
    assert rep.passed and rep.worst_slack == 0.0


def test_check_decrease_quadratic_bgd():
    Q = np.diag([1.0, 4.0])
    L = 4.0
    eta = 0.5 / L
    res = run(QuadraticObjective(Q), EuclideanKernel(2),
              SolverConfig("bgd", eta=eta, smoothness=L, max_iters=200), np.array([1.0, 1.0]))
    rep = check_decrease(res.trace, "bgd", eta, L, 1.0)
    assert rep.passed
    # recompute both sides independently
    f = np.array(res.trace.f)
    s = np.array(res.trace.step_norm)
    pred = (1 / eta - L) * 0.5 * s[1:] ** 2
    assert np.all(pred > 0)
    assert np.all(f[:-1] - f[1:] >= pred - 1e-12)


def test_check_decrease_flags_injected_increase():
    tr = Trace()
    vals = [10.0, 9.0, 8.0, 8.5, 7.0]
    for v in vals:
        tr.append(v, 0.1, 1.0, 0.0, 0.0)
    rep = check_decrease(tr, "bppm", 1.0, sigma=1.0)
    assert not rep.passed
    assert rep.violations == [3] and rep.worst_index == 3
    json.loads(rep.to_json())


def test_check_decrease_empty_trace():
    with pytest.raises(ValueError):
        check_decrease(Trace(), "bgd", 0.1, 1.0)


def test_bounded_gradient_ratio():
    tr = Trace()
    tr.append(1.0, 0.0, 5.0, 0, 0)
    tr.append(0.5, 0.5, 1.0, 0, 0)
    tr.append(0.4, 0.1, 0.3, 0, 0)
    tr.append(0.4, 0.0, 0.0, 0, 0)
    assert bounded_gradient_ratio(tr) == pytest.approx(3.0)


# ------------------------------------------------------------------ stationarity


def test_certify_examples():
    rep = certify_second_order(QuadraticObjective(np.eye(3)), np.zeros(3))
    assert rep.classification == "second_order_stationary"
    assert rep.min_hessian_eigenvalue == pytest.approx(1.0, abs=1e-6)
    rep = certify_second_order(QuadraticObjective(np.diag([1.0, -1.0])), np.zeros(2))
    assert rep.classification == "strict_saddle"
    assert rep.min_hessian_eigenvalue == pytest.approx(-1.0, abs=1e-6)
    rep = certify_second_order(QuadraticObjective(np.eye(2)), np.ones(2))
    assert rep.classification == "not_stationary"
    json.loads(rep.to_json())


def test_certify_bmf_origin_is_strict_saddle(rng):
    G = rng.standard_normal((6, 6))
    A = G @ G.T
    lam = 0.5
    inst = MatrixPcaInstance(A, lam, 1, True)
    f = BmfSymmetric(inst)
    rep = certify_second_order(f, np.zeros(6))
    assert rep.classification == "strict_saddle"
    top = np.linalg.eigvalsh(A)[-1]
    # hand Hessian at 0: D -> 2 lam |D|^2 - 2 <A D, D>
    assert rep.min_hessian_eigenvalue == pytest.approx(2 * lam - 2 * top, rel=1e-6)
    # direction check on the top eigenvector
    u = np.linalg.eigh(A)[1][:, -1]
    assert u @ f.hvp(np.zeros(6), u) == pytest.approx(2 * lam - 2 * top, rel=1e-10)


def test_certify_bi_block_and_power_mode(rng):
    f = BmfNonsymmetric(MatrixPcaInstance(rng.standard_normal((4, 3)), 0.2, 2, False))
    rep = certify_second_order(f, np.zeros(8), y=np.zeros(6))
    assert rep.classification == "strict_saddle"
    with pytest.raises(ValueError):
        certify_second_order(f, np.zeros(8))
    n = 450
    w = np.linspace(-0.5, 3.0, n)
    rep = certify_second_order(QuadraticObjective(np.diag(w)), np.zeros(n))
    assert rep.method == "lanczos"
    assert rep.min_hessian_eigenvalue == pytest.approx(-0.5, abs=1e-8)
    assert rep.classification == "strict_saddle"


# ------------------------------------------------------------------ Jacobians


def test_bgd_jacobian_euclidean_quadratic(rng):
    Q = saddle_Q()
    eta = 0.2
    for _ in range(5):
        x = rng.standard_normal(3)
        rep = assemble_bgd_jacobian(QuadraticObjective(Q), EuclideanKernel(3), x, eta)
        np.testing.assert_allclose(rep.Dg, np.eye(3) - eta * Q, atol=1e-12)
    rep = assemble_bgd_jacobian(QuadraticObjective(Q), EuclideanKernel(3), np.zeros(3), eta)
    assert rep.spectral_radius == pytest.approx(1 + eta * 1.5)
    assert rep.spectral_radius > 1 + 1e-6
    assert rep.is_fixed_point_residual == 0.0
    Qp = np.diag([2.0, 1.0, 0.5])
    rep = assemble_bgd_jacobian(QuadraticObjective(Qp), EuclideanKernel(3), np.zeros(3), 0.9 / 2)
    ev = rep.eigenvalues.real
    assert np.all((ev > 0) & (ev <= 1))


def test_bppm_jacobian_euclidean_quadratic(rng):
    Q = saddle_Q()
    eta = 0.3  # 1 + eta * (-1.5) > 0 keeps the subproblem strongly convex
    x = rng.standard_normal(3)
    rep = assemble_bppm_jacobian(QuadraticObjective(Q), EuclideanKernel(3), x, eta, smoothness=2.0)
    np.testing.assert_allclose(rep.Dg, np.linalg.inv(np.eye(3) + eta * Q), atol=1e-10)
    rep0 = assemble_bppm_jacobian(QuadraticObjective(Q), EuclideanKernel(3), np.zeros(3), eta, 2.0)
    assert rep0.spectral_radius > 1 + 1e-6
    const = FunctionObjective(lambda z: 1.0, lambda z: np.zeros_like(z), 3)
    rep = assemble_bppm_jacobian(const, PowerKernel(3), x, eta, smoothness=1.0)
    np.testing.assert_allclose(rep.Dg, np.eye(3), atol=1e-12)


def _bilinear_saddle():
    # f(x, y) = x1 y1 + (x1^2 + x2^2)/2 - ... on 2+2 variables, joint Hessian indefinite
    Q = np.array([[1.0, 0.0, 2.0, 0.0],
                  [0.0, 0.5, 0.0, 0.0],
                  [2.0, 0.0, 1.0, 0.0],
                  [0.0, 0.0, 0.0, 0.3]])
    return Q, BlockQuadraticObjective(Q, 2)


def test_bpalm_jacobian_bilinear_saddle_matches_block_formula():
    Q, f = _bilinear_saddle()
    assert np.linalg.eigvalsh(Q)[0] < 0
    eta = 0.2
    rep = assemble_bpalm_jacobian(f, EuclideanBiKernel(2, 2), np.zeros(2), np.zeros(2), eta)
    F11, F12, F21, F22 = Q[:2, :2], Q[:2, 2:], Q[2:, :2], Q[2:, 2:]
    I = np.eye(2)
    # Gauss-Seidel linear map: x+ = (I - eta F11) x - eta F12 y; y+ = (I - eta F22) y - eta F21 x+
    Dg1 = np.block([[I - eta * F11, -eta * F12], [np.zeros((2, 2)), I]])
    Dg2 = np.block([[I, np.zeros((2, 2))], [-eta * F21, I - eta * F22]])
    np.testing.assert_allclose(rep.Dg, Dg2 @ Dg1, atol=1e-12)
    assert rep.spectral_radius > 1 + 1e-6
    rep_pam = assemble_bpam_jacobian(f, EuclideanBiKernel(2, 2), np.zeros(2), np.zeros(2), eta,
                                     smoothness=(2.0, 2.0))
    M1 = np.block([[np.linalg.inv(I + eta * F11), -eta * np.linalg.inv(I + eta * F11) @ F12],
                   [np.zeros((2, 2)), I]])
    M2 = np.block([[I, np.zeros((2, 2))],
                   [-eta * np.linalg.inv(I + eta * F22) @ F21, np.linalg.inv(I + eta * F22)]])
    np.testing.assert_allclose(rep_pam.Dg, M2 @ M1, atol=1e-9)
    assert rep_pam.spectral_radius > 1 + 1e-6


@pytest.mark.parametrize("kind", ["euclidean", "bi_quadratic", "bi_power"])
def test_bi_jacobians_identity_for_constant_objective(kind, rng):
    f = FunctionBiObjective(lambda x, y: 0.0, lambda x, y: 0 * x, lambda x, y: 0 * y, (2, 3))
    k = make_kernel(kind, (2, 3))
    x, y = rng.standard_normal(2), rng.standard_normal(3)
    rep = assemble_bpalm_jacobian(f, k, x, y, 0.1)
    np.testing.assert_allclose(rep.Dg, np.eye(5), atol=1e-12)
    rep = assemble_bpam_jacobian(f, k, x, y, 0.1, smoothness=(1.0, 1.0))
    np.testing.assert_allclose(rep.Dg, np.eye(5), atol=1e-12)


def _small_problem(seed):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((3, 3))
    inst = MatrixPcaInstance((G + G.T) / 2 + 2 * np.eye(3), 0.3, 2, True)
    return inst, rng


def test_jacobians_match_numerical_differentiation():
    inst, rng = _small_problem(0)
    fs = BmfSymmetric(inst)
    k = PowerKernel(6)
    L = bmf_relative_smoothness(inst, k)
    eta = 0.5 / L
    fn = BmfNonsymmetric(MatrixPcaInstance(inst.A, inst.lam, 2, False))
    kb = make_kernel("bi_quadratic", fn.dims)
    kp = make_kernel("bi_power", fn.dims)
    for _ in range(3):
        x, y = rng.standard_normal(6), rng.standard_normal(6)
        rep = assemble_bgd_jacobian(fs, k, x, eta)
        assert jacobian_fd_error(lambda z: bgd_step(fs, k, z, eta), x, rep.Dg) < 1e-4
        rep = assemble_bppm_jacobian(fs, k, x, eta, L)
        step = lambda z: bppm_step(fs, k, z, eta, L, 20_000, 1e-12)
        assert jacobian_fd_error(step, x, rep.Dg) < 1e-4
        for kk, Lb in ((kb, 2.0), (kp, 20.0)):
            z = np.concatenate([x, y])
            e = 0.5 / Lb
            rep = assemble_bpalm_jacobian(fn, kk, x, y, e)
            m = lambda w: np.concatenate(bpalm_step(fn, kk, w[:6], w[6:], e))
            assert jacobian_fd_error(m, z, rep.Dg) < 1e-4
            rep = assemble_bpam_jacobian(fn, kk, x, y, e, smoothness=(Lb, Lb))
            m = lambda w: np.concatenate(bpam_step(fn, kk, w[:6], w[6:], e, (Lb, Lb),
                                                   20_000, 1e-12))
            assert jacobian_fd_error(m, z, rep.Dg) < 1e-4


def test_jacobian_determinant_nonzero_at_random_points():
    inst, rng = _small_problem(1)
    fs = BmfSymmetric(inst)
    k = PowerKernel(6)
    L = bmf_relative_smoothness(inst, k)
    fn = BmfNonsymmetric(MatrixPcaInstance(inst.A, inst.lam, 2, False))
    kb = make_kernel("bi_quadratic", fn.dims)
    for i in range(50):
        x, y = 2 * rng.standard_normal(6), 2 * rng.standard_normal(6)
        assert abs(assemble_bgd_jacobian(fs, k, x, 0.9 / L).determinant) > 1e-12
        assert abs(assemble_bpalm_jacobian(fn, kb, x, y, 0.45).determinant) > 1e-12
        if i % 5 == 0:  # inner solves are slower
            assert abs(assemble_bppm_jacobian(fs, k, x, 0.9 / L, L).determinant) > 1e-12
            assert abs(assemble_bpam_jacobian(fn, kb, x, y, 0.45).determinant) > 1e-12


def test_jacobian_size_limit():
    f = QuadraticObjective(np.eye(401))
    with pytest.raises(ValueError):
        assemble_bgd_jacobian(f, EuclideanKernel(401), np.zeros(401), 0.1)


def test_jacobian_report_json():
    rep = assemble_bgd_jacobian(QuadraticObjective(saddle_Q()), EuclideanKernel(3), np.zeros(3), 0.1)
    d = json.loads(rep.to_json())
    assert set(d["eigenvalues"]) == {"real", "imag"}
    assert d["spectral_radius"] >= max(abs(complex(a, b)) for a, b in
                                       zip(d["eigenvalues"]["real"], d["eigenvalues"]["imag"])) - 1e-8
