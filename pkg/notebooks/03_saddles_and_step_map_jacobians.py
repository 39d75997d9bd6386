"""
Why random starts avoid the saddle at zero
==========================================

U = 0 is a critical point of the factored PCA objective, and a strict saddle
whenever lambda is below the top eigenvalue of A. Near such a point each
solver acts like its Jacobian Dg. If Dg has an eigenvalue above 1 in
magnitude, the saddle repels almost every nearby start.

This script assembles Dg at zero for B-GD, B-PPM, B-PALM and B-PAM on a small
instance, checks it against finite differences of the step map and prints the
spectral radius. It also certifies the point where a converged run ends.
"""

# %%
import numpy as np

from bregopt import (BmfNonsymmetric, BmfSymmetric, MatrixPcaInstance, PowerKernel, SolverConfig,
                     assemble_bgd_jacobian, assemble_bpalm_jacobian, assemble_bpam_jacobian,
                     assemble_bppm_jacobian, bgd_step, bmf_relative_smoothness,
                     certify_second_order, generate_instance, make_kernel, random_init, run)
from bregopt.diagnostics import jacobian_fd_error

inst = generate_instance(8, rank=2, lam=0.5, seed=1)
fs = BmfSymmetric(inst)
fn = BmfNonsymmetric(MatrixPcaInstance(inst.A, inst.lam, 2, False))
print("top eigenvalue of A:", np.linalg.eigvalsh(inst.A)[-1], " lambda:", inst.lam)

# %% [markdown]
# Stationarity report at the origin: zero gradient, negative curvature.

# %%
print(certify_second_order(fs, np.zeros(fs.dimension)))

# %% [markdown]
# Jacobians of the four step maps at the saddle. The certified smoothness
# constants give admissible step sizes.

# %%
k = PowerKernel(fs.dimension)
L = bmf_relative_smoothness(inst, k)
eta = 0.9 / L
kb = make_kernel("bi_quadratic", fn.dims)
Lb = bmf_relative_smoothness(fn.inst, kb)
etab = 0.9 / Lb
n = fn.dims[0]
zero, zz = np.zeros(fs.dimension), np.zeros(sum(fn.dims))

reports = {
    "B-GD": assemble_bgd_jacobian(fs, k, zero, eta),
    "B-PPM": assemble_bppm_jacobian(fs, k, zero, eta, L),
    "B-PALM": assemble_bpalm_jacobian(fn, kb, zz[:n], zz[n:], etab),
    "B-PAM": assemble_bpam_jacobian(fn, kb, zz[:n], zz[n:], etab),
}
for name, rep in reports.items():
    print(f"{name:7s} spectral radius {rep.spectral_radius:.4f}   |det| {abs(rep.determinant):.2e}")

err = jacobian_fd_error(lambda z: bgd_step(fs, k, z, eta), zero, reports["B-GD"].Dg)
print("B-GD Jacobian vs finite differences of the step:", f"{err:.1e}")

# %% [markdown]
# From a tiny random start the iterates leave the saddle and reach a
# second-order stationary point.

# %%
res = run(fs, k, SolverConfig("bgd", eta=eta, smoothness=L), random_init(fs.dimension, 1e-6, 0))
print(res.status, res.iterations, "iterations")
print(certify_second_order(fs, res.x))
