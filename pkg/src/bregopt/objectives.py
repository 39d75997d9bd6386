"""Objective functions and the matrix-PCA test problems.

Single-block objectives act on flat vectors; bi-block objectives act on a pair
``(x, y)`` of flat vectors. Matrix factors are stored flattened row-major and
reshaped on entry.
"""

from dataclasses import dataclass, field

import numpy as np

from .kernels import fd_step

__all__ = [
    "Objective",
    "BiObjective",
    "FunctionObjective",
    "FunctionBiObjective",
    "QuadraticObjective",
    "BlockQuadraticObjective",
    "JointObjective",
    "MatrixPcaInstance",
    "OracleSolution",
    "BmfSymmetric",
    "BmfNonsymmetric",
    "bmf_symmetric",
    "bmf_nonsymmetric",
    "generate_instance",
    "pca_objective",
    "oracle_solution",
    "bmf_objective_of_oracle",
    "bmf_relative_smoothness",
    "dense_hessian",
]


def dense_hessian(grad, x, eps=None):
    """Symmetrized central-difference Hessian from a gradient callable.

    Step defaults to ``eps_mach**(1/3) * (1 + |x|)``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if eps is None:
        eps = np.finfo(float).eps ** (1.0 / 3.0) * (1.0 + np.linalg.norm(x))
    H = np.empty((n, n))
    e = np.zeros(n)
    for i in range(n):
        e[i] = eps
        H[:, i] = (grad(x + e) - grad(x - e)) / (2.0 * eps)
        e[i] = 0.0
    return 0.5 * (H + H.T)


class Objective:
    """Smooth single-block objective on R^n.

    Subclasses implement :meth:`value_and_gradient`. Hessian actions default
    to central differences of the gradient.
    """

    dimension = None
    lower_bound = -np.inf

    def value_and_gradient(self, x):
        raise NotImplementedError

    def value(self, x):
        return self.value_and_gradient(x)[0]

    def gradient(self, x):
        return self.value_and_gradient(x)[1]

    def __call__(self, x):
        return self.value(x)

    def hvp(self, x, v):
        eps = fd_step(x)
        return (self.gradient(x + eps * v) - self.gradient(x - eps * v)) / (2.0 * eps)

    def hessian(self, x):
        """Dense Hessian, assembled column by column from :meth:`hvp`."""
        x = np.asarray(x, dtype=float)
        n = x.size
        H = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            H[:, i] = self.hvp(x, e)
        return 0.5 * (H + H.T)


class BiObjective:
    """Smooth objective of two blocks ``x in R^n, y in R^m``.

    Subclasses implement :meth:`value` and :meth:`gradients`; the joint
    Hessian defaults to finite differences of the stacked gradient.
    """

    dims = None
    lower_bound = -np.inf

    def value(self, x, y):
        raise NotImplementedError

    def gradients(self, x, y):
        raise NotImplementedError

    def value_and_gradients(self, x, y):
        gx, gy = self.gradients(x, y)
        return self.value(x, y), gx, gy

    def grad_x(self, x, y):
        return self.gradients(x, y)[0]

    def grad_y(self, x, y):
        return self.gradients(x, y)[1]

    def __call__(self, x, y):
        return self.value(x, y)

    def hvp(self, x, y, vx, vy):
        z = np.concatenate([x, y])
        v = np.concatenate([vx, vy])
        eps = fd_step(z)
        n = self.dims[0]
        gp = np.concatenate(self.gradients(x + eps * vx, y + eps * vy))
        gm = np.concatenate(self.gradients(x - eps * vx, y - eps * vy))
        hv = (gp - gm) / (2.0 * eps)
        return hv[:n], hv[n:]

    def hessian(self, x, y):
        """Dense joint Hessian over the stacked variable ``(x, y)``."""
        n, m = self.dims
        H = np.empty((n + m, n + m))
        for i in range(n + m):
            e = np.zeros(n + m)
            e[i] = 1.0
            hx, hy = self.hvp(x, y, e[:n], e[n:])
            H[:n, i] = hx
            H[n:, i] = hy
        return 0.5 * (H + H.T)

    def hessian_blocks(self, x, y):
        """``(F11, F12, F21, F22)`` partial Hessian blocks."""
        n = self.dims[0]
        H = self.hessian(x, y)
        return H[:n, :n], H[:n, n:], H[n:, :n], H[n:, n:]

    def joint(self):
        return JointObjective(self)


class JointObjective(Objective):
    """View of a bi-block objective as a single-block one on ``z = (x, y)``."""

    def __init__(self, bi):
        self.bi = bi
        self.dimension = sum(bi.dims)
        self.lower_bound = bi.lower_bound

    def split(self, z):
        n = self.bi.dims[0]
        return z[:n], z[n:]

    def value_and_gradient(self, z):
        x, y = self.split(np.asarray(z, dtype=float))
        f, gx, gy = self.bi.value_and_gradients(x, y)
        return f, np.concatenate([gx, gy])

    def hvp(self, z, v):
        x, y = self.split(np.asarray(z, dtype=float))
        vx, vy = self.split(np.asarray(v, dtype=float))
        return np.concatenate(self.bi.hvp(x, y, vx, vy))


class FunctionObjective(Objective):
    """Plug-in objective from user callables (value and gradient only)."""

    def __init__(self, value, gradient, dimension, lower_bound=-np.inf):
        self._value = value
        self._gradient = gradient
        self.dimension = int(dimension)
        self.lower_bound = lower_bound

    def value_and_gradient(self, x):
        return float(self._value(x)), np.asarray(self._gradient(x), dtype=float)

    def value(self, x):
        return float(self._value(x))

    def gradient(self, x):
        return np.asarray(self._gradient(x), dtype=float)


class FunctionBiObjective(BiObjective):
    """Plug-in bi-block objective from ``value(x, y)``, ``grad_x``, ``grad_y``."""

    def __init__(self, value, grad_x, grad_y, dims, lower_bound=-np.inf):
        self._value = value
        self._gx = grad_x
        self._gy = grad_y
        self.dims = tuple(int(d) for d in dims)
        self.lower_bound = lower_bound

    def value(self, x, y):
        return float(self._value(x, y))

    def gradients(self, x, y):
        return (np.asarray(self._gx(x, y), dtype=float),
                np.asarray(self._gy(x, y), dtype=float))

    def grad_x(self, x, y):
        return np.asarray(self._gx(x, y), dtype=float)

    def grad_y(self, x, y):
        return np.asarray(self._gy(x, y), dtype=float)


class QuadraticObjective(Objective):
    """``f(x) = x'Qx/2 - b'x + c`` with exact Hessian ``Q``."""

    def __init__(self, Q, b=None, c=0.0):
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        self.Q = 0.5 * (Q + Q.T)
        self.dimension = Q.shape[0]
        self.b = np.zeros(self.dimension) if b is None else np.asarray(b, dtype=float)
        self.c = float(c)
        w = np.linalg.eigvalsh(self.Q)
        if w[0] > 0:
            self.lower_bound = self.c - 0.5 * float(self.b @ np.linalg.solve(self.Q, self.b))

    def value_and_gradient(self, x):
        Qx = self.Q @ x
        return 0.5 * float(x @ Qx) - float(self.b @ x) + self.c, Qx - self.b

    def hvp(self, x, v):
        return self.Q @ v

    def hessian(self, x):
        return self.Q.copy()


class BlockQuadraticObjective(BiObjective):
    """``f(x, y) = z'Qz/2 - b'z`` with ``z = (x, y)``; exact joint Hessian."""

    def __init__(self, Q, n, b=None):
        Q = np.asarray(Q, dtype=float)
        self.Q = 0.5 * (Q + Q.T)
        N = Q.shape[0]
        self.dims = (int(n), N - int(n))
        self.b = np.zeros(N) if b is None else np.asarray(b, dtype=float)

    def value(self, x, y):
        z = np.concatenate([x, y])
        return 0.5 * float(z @ self.Q @ z) - float(self.b @ z)

    def gradients(self, x, y):
        z = np.concatenate([x, y])
        g = self.Q @ z - self.b
        n = self.dims[0]
        return g[:n], g[n:]

    def hvp(self, x, y, vx, vy):
        hv = self.Q @ np.concatenate([vx, vy])
        n = self.dims[0]
        return hv[:n], hv[n:]

    def hessian(self, x, y):
        return self.Q.copy()


# --------------------------------------------------------------------------
# matrix PCA / Burer-Monteiro problems


@dataclass
class MatrixPcaInstance:
    """Nuclear-norm regularized, rank-constrained PCA of ``A``."""

    A: np.ndarray
    lam: float
    rank: int
    symmetric: bool = False
    seed: int = None
    scaling: float = 1.0

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        if self.A.ndim != 2:
            raise ValueError("A must be a matrix")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if int(self.rank) != self.rank or self.rank < 1:
            raise ValueError("rank must be a positive integer")
        self.rank = int(self.rank)
        if self.rank > min(self.A.shape):
            raise ValueError("rank exceeds min(n, m)")
        if self.symmetric:
            if self.A.shape[0] != self.A.shape[1]:
                raise ValueError("symmetric instance needs a square A")
            scale = max(1.0, np.abs(self.A).max())
            if np.abs(self.A - self.A.T).max() > 1e-12 * scale:
                raise ValueError("symmetric flag set but A is not symmetric")

    @property
    def shape(self):
        return self.A.shape

    def metadata(self):
        return {"lambda": float(self.lam), "rank": self.rank,
                "symmetric": bool(self.symmetric), "seed": self.seed,
                "scaling": float(self.scaling)}


@dataclass
class OracleSolution:
    X_star: np.ndarray
    objective_value: float
    # factor singular/eigen values kept after thresholding, descending
    values: np.ndarray = field(default=None, repr=False)
    left: np.ndarray = field(default=None, repr=False)
    right: np.ndarray = field(default=None, repr=False)


def generate_instance(n, m=None, rank=2, lam=1.0, symmetric=True, seed=0, scaling=1.0):
    """Random test matrix with i.i.d. N(0,1) entries times ``scaling``.

    Symmetric instances use ``(G + G')/sqrt(2)``, which keeps unit variance
    off the diagonal.
    """
    m = n if m is None else m
    rng = np.random.default_rng(seed)
    if symmetric:
        if m != n:
            raise ValueError("symmetric instance needs n == m")
        G = rng.standard_normal((n, n))
        A = (G + G.T) / np.sqrt(2.0)
    else:
        A = rng.standard_normal((n, m))
    return MatrixPcaInstance(scaling * A, lam, rank, symmetric, seed, scaling)


def pca_objective(inst, X):
    """``|X - A|_F^2 / 2 + lam |X|_*``."""
    X = np.asarray(X, dtype=float)
    nuc = np.linalg.svd(X, compute_uv=False).sum()
    return 0.5 * float(np.sum((X - inst.A) ** 2)) + inst.lam * float(nuc)


def oracle_solution(inst):
    """Global minimizer of the rank-constrained PCA problem.

    Symmetric: eigenvalues of ``A`` clipped at zero, shrunk by ``lam``,
    clipped again, top ``r`` kept. Nonsymmetric: singular values shrunk by
    ``lam`` and truncated to rank ``r``.
    """
    r = inst.rank
    if inst.symmetric:
        w, Q = np.linalg.eigh(inst.A)
        order = np.argsort(w)[::-1]
        w, Q = w[order], Q[:, order]
        s = np.maximum(np.maximum(w, 0.0) - inst.lam, 0.0)[:r]
        P = Q[:, :r]
        X = (P * s) @ P.T
        left, right = P, P
    else:
        P, sv, Qt = np.linalg.svd(inst.A, full_matrices=False)
        s = np.maximum(sv - inst.lam, 0.0)[:r]
        left, right = P[:, :r], Qt[:r].T
        X = (left * s) @ right.T
    value = 0.5 * float(np.sum((X - inst.A) ** 2)) + inst.lam * float(s.sum())
    return OracleSolution(X, value, s, left, right)


class BmfSymmetric(Objective):
    """``f(U) = |UU' - A|_F^2 / 2 + lam |U|_F^2`` over flattened ``U`` (n x r)."""

    lower_bound = 0.0

    def __init__(self, inst):
        if not inst.symmetric:
            raise ValueError("bmf_symmetric needs a symmetric instance")
        self.inst = inst
        self.A = inst.A
        self.lam = float(inst.lam)
        self.n = inst.A.shape[0]
        self.r = inst.rank
        self.dimension = self.n * self.r

    def unflatten(self, x):
        return np.asarray(x, dtype=float).reshape(self.n, self.r)

    def value_and_gradient(self, x):
        U = self.unflatten(x)
        R = U @ U.T - self.A
        f = 0.5 * float(np.sum(R * R)) + self.lam * float(np.sum(U * U))
        G = 2.0 * (R @ U) + 2.0 * self.lam * U
        return f, G.ravel()

    def value(self, x):
        U = self.unflatten(x)
        R = U @ U.T - self.A
        return 0.5 * float(np.sum(R * R)) + self.lam * float(np.sum(U * U))

    def hvp(self, x, v):
        U = self.unflatten(x)
        D = self.unflatten(v)
        R = U @ U.T - self.A
        H = 2.0 * ((D @ U.T + U @ D.T) @ U) + 2.0 * (R @ D) + 2.0 * self.lam * D
        return H.ravel()


class BmfNonsymmetric(BiObjective):
    """``f(U, V) = |UV' - A|_F^2/2 + (lam/2)(|U|_F^2 + |V|_F^2)``."""

    lower_bound = 0.0

    def __init__(self, inst):
        self.inst = inst
        self.A = inst.A
        self.lam = float(inst.lam)
        self.n, self.m = inst.A.shape
        self.r = inst.rank
        self.dims = (self.n * self.r, self.m * self.r)

    def factors(self, x, y):
        return (np.asarray(x, dtype=float).reshape(self.n, self.r),
                np.asarray(y, dtype=float).reshape(self.m, self.r))

    def value(self, x, y):
        U, V = self.factors(x, y)
        R = U @ V.T - self.A
        return 0.5 * float(np.sum(R * R)) + 0.5 * self.lam * (float(np.sum(U * U)) + float(np.sum(V * V)))

    def value_and_gradients(self, x, y):
        U, V = self.factors(x, y)
        R = U @ V.T - self.A
        f = 0.5 * float(np.sum(R * R)) + 0.5 * self.lam * (float(np.sum(U * U)) + float(np.sum(V * V)))
        return f, (R @ V + self.lam * U).ravel(), (R.T @ U + self.lam * V).ravel()

    def gradients(self, x, y):
        _, gx, gy = self.value_and_gradients(x, y)
        return gx, gy

    def grad_x(self, x, y):
        U, V = self.factors(x, y)
        return ((U @ V.T - self.A) @ V + self.lam * U).ravel()

    def grad_y(self, x, y):
        U, V = self.factors(x, y)
        return ((U @ V.T - self.A).T @ U + self.lam * V).ravel()

    def hvp(self, x, y, vx, vy):
        U, V = self.factors(x, y)
        DU, DV = self.factors(vx, vy)
        R = U @ V.T - self.A
        dR = DU @ V.T + U @ DV.T
        hx = dR @ V + R @ DV + self.lam * DU
        hy = dR.T @ U + R.T @ DU + self.lam * DV
        return hx.ravel(), hy.ravel()

    def prox_x(self, y, x_prev, c):
        """argmin_U f(U, V) + (c/2)|U - U_prev|^2 (a ridge least-squares solve)."""
        _, V = self.factors(np.zeros(self.dims[0]), y)
        Up = np.asarray(x_prev, dtype=float).reshape(self.n, self.r)
        M = V.T @ V + (self.lam + c) * np.eye(self.r)
        rhs = self.A @ V + c * Up
        return np.linalg.solve(M, rhs.T).T.ravel()

    def prox_y(self, x, y_prev, c):
        """argmin_V f(U, V) + (c/2)|V - V_prev|^2."""
        U, _ = self.factors(x, np.zeros(self.dims[1]))
        Vp = np.asarray(y_prev, dtype=float).reshape(self.m, self.r)
        M = U.T @ U + (self.lam + c) * np.eye(self.r)
        rhs = self.A.T @ U + c * Vp
        return np.linalg.solve(M, rhs.T).T.ravel()


def bmf_symmetric(inst):
    return BmfSymmetric(inst)


def bmf_nonsymmetric(inst):
    return BmfNonsymmetric(inst)


def bmf_objective_of_oracle(inst, sol):
    """BMF objective at the balanced factorization of the oracle solution.

    ``X* = P diag(s) Q'`` is factored as ``U = P sqrt(s)``, ``V = Q sqrt(s)``
    (``V = U`` in the symmetric case), which attains the nuclear norm in the
    factored regularizer.
    """
    root = np.sqrt(sol.values)
    U = sol.left * root
    if inst.symmetric:
        return BmfSymmetric(inst).value(U.ravel())
    V = sol.right * root
    return BmfNonsymmetric(inst).value(U.ravel(), V.ravel())


def bmf_relative_smoothness(inst, kernel):
    """Certified relative-smoothness constant for the BMF objectives.

    Symmetric with the power kernel (degree 4): the Hessian form is bounded by
    ``(6|U|^2 + 2|A|_2 + 2 lam)|D|^2`` while the kernel Hessian dominates
    ``(alpha|U|^2 + sigma) I``, giving ``max(6/alpha, (2|A|_2 + 2 lam)/sigma)``.
    Nonsymmetric with the quadratic product kernel: the U-block Hessian is at
    most ``|V|^2 + lam`` against ``sigma(sigma|V|^2/2 + 1)``, so each block
    constant is ``max(2/sigma^2, lam/sigma)``. Returns None for other kernels.
    """
    from .kernels import PowerKernel, ProductKernel, QuadraticKernel

    if isinstance(kernel, PowerKernel) and kernel.degree == 4:
        spec = np.linalg.norm(inst.A, 2)
        return max(6.0 / kernel.alpha, (2.0 * spec + 2.0 * inst.lam) / kernel.sigma)
    if (isinstance(kernel, ProductKernel) and isinstance(kernel.first, QuadraticKernel)
            and isinstance(kernel.second, QuadraticKernel)):
        s = min(kernel.first.sigma, kernel.second.sigma)
        return max(2.0 / s**2, inst.lam / s)
    return None
