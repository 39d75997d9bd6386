"""Bregman first-order methods for nonconvex problems without global Lipschitz gradients.

Modules: :mod:`~bregopt.cubic` (closed-form cubic root), :mod:`~bregopt.kernels`
(power and product kernels, divergences, smoothness estimation),
:mod:`~bregopt.objectives` (BMF objectives and the matrix-PCA oracle),
:mod:`~bregopt.solvers` (B-GD, B-PPM, B-PALM, B-PAM and Euclidean baselines),
:mod:`~bregopt.diagnostics` (decrease, stationarity, step-map Jacobians) and
:mod:`~bregopt.bench` (experiment sweeps).
"""

from .cubic import retract, tau
from .kernels import (EuclideanBiKernel, EuclideanKernel, PowerKernel, PowerKernelParams,
                      ProductKernel, QuadraticKernel, bregman_divergence,
                      estimate_bi_smoothness, estimate_relative_smoothness, make_kernel)
from .objectives import (BiObjective, BmfNonsymmetric, BmfSymmetric, FunctionBiObjective,
                         FunctionObjective, MatrixPcaInstance, Objective, QuadraticObjective,
                         bmf_objective_of_oracle, bmf_relative_smoothness, generate_instance,
                         oracle_solution)
from .solvers import (RunResult, SolverConfig, SubproblemError, SufficientDecreaseError, Trace,
                      bgd_step, bpalm_step, bpam_step, bppm_step, random_init, run)
from .diagnostics import (assemble_bgd_jacobian, assemble_bpalm_jacobian,
                          assemble_bpam_jacobian, assemble_bppm_jacobian, certify_second_order,
                          check_decrease)
from .bench import ExperimentConfig, best_of_grid, load_config, run_experiment
from .storage import load_instance, load_matrix, save_instance, save_matrix

__version__ = "0.1.0"
