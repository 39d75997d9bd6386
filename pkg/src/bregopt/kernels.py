"""Bregman reference functions and their divergences.

Single-block kernels are radial,

    h(x) = (alpha/d) |x|^d + (sigma/2) |x|^2 + offset,

which covers the Euclidean kernel (alpha=0, sigma=1, offset=0), the power
kernel (offset=1) and the quadratic factor ``(sigma/2)|x|^2 + 1`` used inside
the (2,2)-degree product kernel. Bi-block kernels are either products
``h1(x) * h2(y)`` or sums ``h1(x) + h2(y)``; the Euclidean bi-kernel is the sum
of two Euclidean kernels.

Matrix variables are flattened, so ``|.|`` is the Frobenius norm.
"""

from dataclasses import dataclass

import numpy as np

from .cubic import tau

__all__ = [
    "PowerKernelParams",
    "RadialKernel",
    "EuclideanKernel",
    "PowerKernel",
    "QuadraticKernel",
    "ProductKernel",
    "SumKernel",
    "EuclideanBiKernel",
    "make_kernel",
    "kernel_value",
    "kernel_gradient",
    "bregman_divergence",
    "bi_divergence_first",
    "bi_divergence_second",
    "solve_radial",
    "polynomial_smoothness_bound",
    "estimate_relative_smoothness",
    "estimate_bi_smoothness",
    "fd_step",
]


def fd_step(x):
    """Forward/central difference step for Hessian-vector products."""
    return np.sqrt(np.finfo(float).eps) * (1.0 + np.linalg.norm(x))


def _check_dim(x, n, name="x"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != n:
        raise ValueError(f"{name} has shape {x.shape}, expected ({n},)")
    return x


@dataclass(frozen=True)
class PowerKernelParams:
    alpha: float = 1.0
    sigma: float = 1.0
    degree: int = 4

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if int(self.degree) != self.degree or self.degree < 2:
            raise ValueError("degree must be an integer >= 2")


def solve_radial(alpha, sigma, degree, s, tol=1e-15, max_iter=200):
    """Non-negative root ``t`` of ``alpha*t**(d-1) + sigma*t = s``.

    Newton's method started from an upper bound on the root. The function is
    increasing and convex on t >= 0, so the iterates decrease monotonically
    onto the root and never overshoot.
    """
    if s < 0 or not np.isfinite(s):
        raise ValueError("solve_radial: s must be finite and non-negative")
    if s == 0.0:
        return 0.0
    if alpha == 0.0:
        return s / sigma
    if degree == 2:
        return s / (alpha + sigma)
    p = degree - 1
    t = min(s / sigma, (s / alpha) ** (1.0 / p))
    for _ in range(max_iter):
        phi = alpha * t**p + sigma * t - s
        dphi = alpha * p * t ** (p - 1) + sigma
        t_new = t - phi / dphi
        if t_new <= 0.0:
            t_new = 0.5 * t
        if abs(t_new - t) <= tol * t:
            return t_new
        t = t_new
    return t


class RadialKernel:
    """Radial kernel ``(alpha/d)|x|^d + (sigma/2)|x|^2 + offset`` on R^n."""

    kind = "radial"

    def __init__(self, dimension, alpha=0.0, sigma=1.0, degree=2, offset=0.0):
        if int(dimension) != dimension or dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if alpha < 0 or not sigma > 0:
            raise ValueError("need alpha >= 0 and sigma > 0")
        if int(degree) != degree or degree < 2:
            raise ValueError("degree must be an integer >= 2")
        self.dimension = int(dimension)
        self.alpha = float(alpha)
        self.sigma = float(sigma)
        self.degree = int(degree)
        self.offset = float(offset)

    def __repr__(self):
        return (f"{type(self).__name__}(dimension={self.dimension}, "
                f"alpha={self.alpha}, sigma={self.sigma}, "
                f"degree={self.degree}, offset={self.offset})")

    # |x|^k guarded at the origin
    @staticmethod
    def _pow(nrm, k):
        if k == 0:
            return 1.0
        if nrm == 0.0:
            return 0.0
        return float(np.exp(k * np.log(nrm)))

    def radial_scale(self, x):
        """The factor ``alpha*|x|^(d-2) + sigma`` with grad h(x) = factor * x."""
        nrm = np.linalg.norm(x)
        return self.alpha * self._pow(nrm, self.degree - 2) + self.sigma

    def value(self, x):
        x = _check_dim(x, self.dimension)
        nrm = np.linalg.norm(x)
        val = 0.5 * self.sigma * nrm * nrm + self.offset
        if self.alpha:
            val += self.alpha / self.degree * self._pow(nrm, self.degree)
        return float(val)

    def gradient(self, x):
        x = _check_dim(x, self.dimension)
        return self.radial_scale(x) * x

    def hessian(self, x):
        x = _check_dim(x, self.dimension)
        nrm = np.linalg.norm(x)
        H = self.radial_scale(x) * np.eye(self.dimension)
        if self.alpha and self.degree > 2 and nrm > 0:
            H += self.alpha * (self.degree - 2) * self._pow(nrm, self.degree - 4) * np.outer(x, x)
        return H

    def _rank_one_coeff(self, x):
        nrm = np.linalg.norm(x)
        if self.alpha and self.degree > 2 and nrm > 0:
            return self.alpha * (self.degree - 2) * self._pow(nrm, self.degree - 4)
        return 0.0

    def hvp(self, x, v):
        x = _check_dim(x, self.dimension)
        return self.radial_scale(x) * v + self._rank_one_coeff(x) * np.dot(x, v) * x

    def inverse_hvp(self, x, v):
        """Solve ``hessian(x) @ z = v`` (Sherman-Morrison on scale*I + b*x x^T)."""
        x = _check_dim(x, self.dimension)
        c = self.radial_scale(x)
        b = self._rank_one_coeff(x)
        z = v / c
        if b:
            z = z - (b * np.dot(x, v) / (c * (c + b * np.dot(x, x)))) * x
        return z

    def divergence(self, x, y):
        x = _check_dim(x, self.dimension)
        y = _check_dim(y, self.dimension, "y")
        return self.value(x) - self.value(y) - float(np.dot(self.gradient(y), x - y))

    def inverse_gradient(self, g, fast=True):
        """The unique ``x`` with ``gradient(x) = g``.

        The gradient map is radial, so ``x = g * t/|g|`` where ``t`` solves
        ``alpha*t**(d-1) + sigma*t = |g|``. With ``fast`` set, degree 4 uses
        the closed-form cubic root; otherwise a monotone Newton solve.
        """
        g = _check_dim(g, self.dimension, "g")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite argument to inverse_gradient")
        if self.alpha == 0.0:
            return g / self.sigma
        if self.degree == 2:
            return g / (self.alpha + self.sigma)
        s = np.linalg.norm(g)
        if s == 0.0:
            return np.zeros_like(g)
        if fast and self.degree == 4:
            # alpha t^3 + sigma t = s  <=>  u^3 + u = s sqrt(alpha)/sigma^1.5, t = u sqrt(sigma/alpha)
            if self.alpha == 1.0 and self.sigma == 1.0:
                t = tau(s)
            else:
                t = np.sqrt(self.sigma / self.alpha) * tau(s * np.sqrt(self.alpha) / self.sigma**1.5)
        else:
            t = solve_radial(self.alpha, self.sigma, self.degree, s)
        return g * (t / s)


class EuclideanKernel(RadialKernel):
    """``h(x) = |x|^2 / 2``."""

    kind = "euclidean"

    def __init__(self, dimension):
        super().__init__(dimension, alpha=0.0, sigma=1.0, degree=2, offset=0.0)

    def __repr__(self):
        return f"EuclideanKernel(dimension={self.dimension})"


class PowerKernel(RadialKernel):
    """``h(x) = (alpha/d)|x|^d + (sigma/2)|x|^2 + 1``."""

    kind = "power"

    def __init__(self, dimension, params=None, **kw):
        if params is None:
            params = PowerKernelParams(**kw)
        elif kw:
            raise TypeError("pass either params or keyword parameters")
        self.params = params
        super().__init__(dimension, params.alpha, params.sigma, params.degree, offset=1.0)


class QuadraticKernel(RadialKernel):
    """``h(x) = (sigma/2)|x|^2 + 1``, the factor of the (2,2) product kernel."""

    kind = "quadratic"

    def __init__(self, dimension, sigma=1.0):
        super().__init__(dimension, alpha=0.0, sigma=sigma, degree=2, offset=1.0)


class _BiKernel:
    """Shared behaviour of bi-block kernels over (x, y) in R^n x R^m."""

    def __init__(self, first, second):
        self.first = first
        self.second = second
        self.dims = (first.dimension, second.dimension)

    def __repr__(self):
        return f"{type(self).__name__}({self.first!r}, {self.second!r})"

    def div_first(self, x1, x2, y):
        """D^1(x1, x2; y): divergence in x with y held fixed."""
        return (self.value(x1, y) - self.value(x2, y)
                - float(np.dot(self.grad_x(x2, y), np.asarray(x1) - x2)))

    def div_second(self, y1, y2, x):
        """D^2(y1, y2; x): divergence in y with x held fixed."""
        return (self.value(x, y1) - self.value(x, y2)
                - float(np.dot(self.grad_y(x, y2), np.asarray(y1) - y2)))


class ProductKernel(_BiKernel):
    """``h(x, y) = h1(x) * h2(y)``; strongly bi-convex when both offsets are >= 1."""

    kind = "product"

    def __init__(self, first, second):
        super().__init__(first, second)
        sigma = min(first.sigma * second.offset, second.sigma * first.offset)
        if not sigma > 0:
            raise ValueError("product kernel needs factors with positive offset")
        self.sigma = sigma

    def value(self, x, y):
        return self.first.value(x) * self.second.value(y)

    def grad_x(self, x, y):
        return self.second.value(y) * self.first.gradient(x)

    def grad_y(self, x, y):
        return self.first.value(x) * self.second.gradient(y)

    def hess_xx(self, x, y):
        return self.second.value(y) * self.first.hessian(x)

    def hess_yy(self, x, y):
        return self.first.value(x) * self.second.hessian(y)

    def hess_xy(self, x, y):
        return np.outer(self.first.gradient(x), self.second.gradient(y))

    def hvp_xx(self, x, y, v):
        return self.second.value(y) * self.first.hvp(x, v)

    def hvp_yy(self, x, y, v):
        return self.first.value(x) * self.second.hvp(y, v)

    def inverse_hvp_xx(self, x, y, v):
        return self.first.inverse_hvp(x, v) / self.second.value(y)

    def inverse_hvp_yy(self, x, y, v):
        return self.second.inverse_hvp(y, v) / self.first.value(x)

    def div_first(self, x1, x2, y):
        return self.second.value(y) * self.first.divergence(x1, x2)

    def div_second(self, y1, y2, x):
        return self.first.value(x) * self.second.divergence(y1, y2)

    def solve_first(self, g, y, fast=True):
        """x with ``grad_x(x, y) = g``."""
        return self.first.inverse_gradient(g / self.second.value(y), fast=fast)

    def solve_second(self, g, x, fast=True):
        """y with ``grad_y(x, y) = g``."""
        return self.second.inverse_gradient(g / self.first.value(x), fast=fast)

    def block_weight_first(self, y):
        """c with D^1(x1, x2; y) = (c/2)|x1 - x2|^2, or None if not quadratic in x."""
        if self.first.alpha:
            return None
        return self.first.sigma * self.second.value(y)

    def block_weight_second(self, x):
        if self.second.alpha:
            return None
        return self.second.sigma * self.first.value(x)


class SumKernel(_BiKernel):
    """``h(x, y) = h1(x) + h2(y)``; block divergences decouple."""

    kind = "sum"

    def __init__(self, first, second):
        super().__init__(first, second)
        self.sigma = min(first.sigma, second.sigma)

    def value(self, x, y):
        return self.first.value(x) + self.second.value(y)

    def grad_x(self, x, y):
        return self.first.gradient(x)

    def grad_y(self, x, y):
        return self.second.gradient(y)

    def hess_xx(self, x, y):
        return self.first.hessian(x)

    def hess_yy(self, x, y):
        return self.second.hessian(y)

    def hess_xy(self, x, y):
        return np.zeros(self.dims)

    def hvp_xx(self, x, y, v):
        return self.first.hvp(x, v)

    def hvp_yy(self, x, y, v):
        return self.second.hvp(y, v)

    def inverse_hvp_xx(self, x, y, v):
        return self.first.inverse_hvp(x, v)

    def inverse_hvp_yy(self, x, y, v):
        return self.second.inverse_hvp(y, v)

    def div_first(self, x1, x2, y):
        return self.first.divergence(x1, x2)

    def div_second(self, y1, y2, x):
        return self.second.divergence(y1, y2)

    def solve_first(self, g, y, fast=True):
        return self.first.inverse_gradient(g, fast=fast)

    def solve_second(self, g, x, fast=True):
        return self.second.inverse_gradient(g, fast=fast)

    def block_weight_first(self, y):
        return None if self.first.alpha else self.first.sigma

    def block_weight_second(self, x):
        return None if self.second.alpha else self.second.sigma


class EuclideanBiKernel(SumKernel):
    """``h(x, y) = (|x|^2 + |y|^2) / 2``."""

    kind = "euclidean"

    def __init__(self, n, m):
        super().__init__(EuclideanKernel(n), EuclideanKernel(m))


KERNEL_KINDS = ("euclidean", "power", "bi_power", "bi_quadratic")


def make_kernel(kind, dims, alpha=1.0, sigma=1.0, degree=4, degree1=None, degree2=None):
    """Build a kernel from configuration values.

    ``dims`` is an int for a single-block kernel and an ``(n, m)`` pair for a
    bi-block kernel. ``euclidean`` adapts to either; ``power`` is single-block
    only; ``bi_power`` and ``bi_quadratic`` are bi-block only.
    """
    if kind not in KERNEL_KINDS:
        raise ValueError(f"unknown kernel kind {kind!r}; expected one of {KERNEL_KINDS}")
    bi = not np.isscalar(dims)
    if kind == "euclidean":
        return EuclideanBiKernel(*dims) if bi else EuclideanKernel(dims)
    if kind == "power":
        if bi:
            raise ValueError("power kernel is single-block; use bi_power")
        return PowerKernel(dims, PowerKernelParams(alpha, sigma, degree))
    if not bi:
        raise ValueError(f"{kind} is a bi-block kernel; dims must be (n, m)")
    n, m = dims
    if kind == "bi_power":
        d1 = degree if degree1 is None else degree1
        d2 = degree if degree2 is None else degree2
        return ProductKernel(PowerKernel(n, PowerKernelParams(alpha, sigma, d1)),
                             PowerKernel(m, PowerKernelParams(alpha, sigma, d2)))
    return ProductKernel(QuadraticKernel(n, sigma), QuadraticKernel(m, sigma))


def kernel_value(k, x):
    return k.value(x)


def kernel_gradient(k, x):
    return k.gradient(x)


def bregman_divergence(k, x, y):
    return k.divergence(x, y)


def bi_divergence_first(k, x1, x2, y):
    x1 = _check_dim(x1, k.dims[0], "x1")
    x2 = _check_dim(x2, k.dims[0], "x2")
    y = _check_dim(y, k.dims[1], "y")
    return k.div_first(x1, x2, y)


def bi_divergence_second(k, y1, y2, x):
    y1 = _check_dim(y1, k.dims[1], "y1")
    y2 = _check_dim(y2, k.dims[1], "y2")
    x = _check_dim(x, k.dims[0], "x")
    return k.div_second(y1, y2, x)


def polynomial_smoothness_bound(tensor_norms, alpha, sigma):
    """Relative-smoothness constant of a degree-d polynomial w.r.t. the power kernel.

    ``tensor_norms[j]`` is the spectral norm (or any upper bound on it, e.g.
    the Frobenius norm) of the degree ``k = j + 2`` coefficient tensor. The
    bound is ``sum_k k(k-1) |A_k| * max(1/sigma, 1/alpha)``.
    """
    norms = np.asarray(tensor_norms, dtype=float)
    if norms.size == 0:
        raise ValueError("need at least one tensor norm")
    if np.any(norms < 0):
        raise ValueError("tensor norms must be non-negative")
    if not (alpha > 0 and sigma > 0):
        raise ValueError("alpha and sigma must be positive")
    k = np.arange(2, norms.size + 2)
    return float(np.sum(k * (k - 1) * norms) * max(1.0 / sigma, 1.0 / alpha))


def _fd_hvp(grad, x, v):
    eps = fd_step(x)
    return (grad(x + eps * v) - grad(x - eps * v)) / (2.0 * eps)


def _sample_points(rng, n, samples, radius):
    # the origin first, then uniform directions with radii uniform on [0, radius]
    d = rng.standard_normal((samples, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.uniform(0.0, 1.0, size=(samples, 1))
    r[0] = 0.0
    return d * r


def _generalized_ratio(f_hvp, h_hvp, h_inv, v, power_iters):
    """max |v'Fv| / v'Hv over the power-iteration sequence of H^{-1} F."""
    best = 0.0
    for _ in range(power_iters + 1):
        Fv = f_hvp(v)
        vHv = float(np.dot(v, h_hvp(v)))
        if vHv <= 0:
            break
        best = max(best, abs(float(np.dot(v, Fv))) / vHv)
        w = h_inv(Fv)
        nw = np.linalg.norm(w)
        if nw == 0.0 or not np.isfinite(nw):
            break
        v = w / nw
    return best


def estimate_relative_smoothness(f, k, samples=32, radius=1.0, seed=0, safety=2.0,
                                 power_iters=20):
    """Empirical relative-smoothness constant of ``f`` w.r.t. kernel ``k``.

    Samples the origin and points in the ball of the given radius and, at each, starts from a
    random unit direction and refines it with a few power iterations on
    ``hess(h)^{-1} hess(f)``; the largest observed ratio
    ``|v' hess(f) v| / v' hess(h) v`` times ``safety`` is returned. Hessian
    actions of ``f`` are finite differences of its gradient.

    For a bi-block objective with a bi-block kernel the larger of the two block
    constants is returned (see :func:`estimate_bi_smoothness`).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if not radius > 0:
        raise ValueError("radius must be positive")
    if hasattr(k, "dims"):
        return max(estimate_bi_smoothness(f, k, samples, radius, seed, safety, power_iters))
    n = k.dimension
    if f.dimension != n:
        raise ValueError(f"objective dimension {f.dimension} != kernel dimension {n}")
    rng = np.random.default_rng(seed)
    best = 0.0
    for x in _sample_points(rng, n, samples, radius):
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        best = max(best, _generalized_ratio(
            lambda u: _fd_hvp(f.gradient, x, u),
            lambda u: k.hvp(x, u),
            lambda u: k.inverse_hvp(x, u),
            v, power_iters))
    return safety * best


def estimate_bi_smoothness(f, k, samples=32, radius=1.0, seed=0, safety=2.0, power_iters=20):
    """Block constants ``(L1, L2)`` for a bi-block objective and bi-kernel."""
    n, m = k.dims
    if tuple(f.dims) != (n, m):
        raise ValueError(f"objective dims {f.dims} != kernel dims {k.dims}")
    rng = np.random.default_rng(seed)
    # radius bounds the joint point (x, y)
    pts = _sample_points(rng, n + m, samples, radius)
    L1 = L2 = 0.0
    for z in pts:
        x, y = z[:n], z[n:]
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        L1 = max(L1, _generalized_ratio(
            lambda u: _fd_hvp(lambda xx: f.grad_x(xx, y), x, u),
            lambda u: k.hvp_xx(x, y, u),
            lambda u: k.inverse_hvp_xx(x, y, u),
            v, power_iters))
        w = rng.standard_normal(m)
        w /= np.linalg.norm(w)
        L2 = max(L2, _generalized_ratio(
            lambda u: _fd_hvp(lambda yy: f.grad_y(x, yy), y, u),
            lambda u: k.hvp_yy(x, y, u),
            lambda u: k.inverse_hvp_yy(x, y, u),
            w, power_iters))
    return safety * L1, safety * L2
