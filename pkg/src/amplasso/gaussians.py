"""Standard-normal density, distribution, and quantile functions.

Every module in the package evaluates phi / Phi through these wrappers
(backed by the complementary error function, |error| <= 1e-15) so that
numerical constants agree bit for bit across solvers, theory code, and
tests.
"""

from __future__ import annotations

import numpy as np
from scipy import special

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

#: Median of |Z| for Z ~ N(0,1), i.e. Phi^{-1}(3/4) = 0.674489750...
MEDIAN_ABS_GAUSS = float(special.ndtri(0.75))


def phi(z):
    """Standard normal density. Accepts scalars or arrays."""
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        out = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return float(out) if out.ndim == 0 else out


def Phi(z):
    """Standard normal distribution function (via erfc)."""
    out = special.ndtr(np.asarray(z, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def Phi_inv(p):
    """Standard normal quantile function."""
    out = special.ndtri(np.asarray(p, dtype=float))
    return float(out) if np.ndim(out) == 0 else out
