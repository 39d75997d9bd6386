"""Closed-form root of ``t**3 + t = a`` and the radial retraction built on it."""

import numpy as np

_CBRT2 = 2.0 ** (1.0 / 3.0)
_CBRT3 = 3.0 ** (1.0 / 3.0)
_SIX_23 = 6.0 ** (2.0 / 3.0)

# below this the closed form loses digits to cancellation in the numerator
_SMALL_A = 1e-3
# above this 81*a**2 overflows
_LARGE_A = 1e100


def _newton(t, a, steps):
    for _ in range(steps):
        t = t - (t * t * t + t - a) / (3.0 * t * t + 1.0)
    return t


def tau(a):
    """Unique non-negative real root of ``t**3 + t = a``.

    Accepts a scalar or an array of non-negative values and returns the same
    shape. The Cardano-type closed form is used for moderate ``a``; tiny and
    huge arguments go through Newton's method, which is globally safe here
    because the cubic is monotone with derivative at least one. Every result
    gets one Newton polish.
    """
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("tau: argument must be finite")
    if np.any(arr < 0):
        raise ValueError("tau: argument must be non-negative")

    out = np.empty_like(arr)
    small = arr < _SMALL_A
    large = arr > _LARGE_A
    mid = ~(small | large)

    if np.any(mid):
        am = arr[mid]
        w = np.sqrt(81.0 * am * am + 12.0) + 9.0 * am
        cw = np.cbrt(w)
        out[mid] = (_CBRT2 * cw * cw - 2.0 * _CBRT3) / (_SIX_23 * cw)
    if np.any(small):
        a_s = arr[small]
        # t ~ a for small a; Newton converges quadratically from here
        out[small] = _newton(np.minimum(a_s, np.cbrt(a_s)), a_s, 4)
    if np.any(large):
        a_l = arr[large]
        out[large] = _newton(np.cbrt(a_l), a_l, 2)

    out = _newton(out, arr, 1)
    out = np.maximum(out, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def retract(x):
    """Radial map ``x * tau(|x|) / |x|`` (zero maps to zero)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("retract: input must be finite")
    nrm = np.linalg.norm(x)
    if nrm == 0.0:
        return np.zeros_like(x)
    return x * (tau(nrm) / nrm)
