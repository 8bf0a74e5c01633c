"""Centered-normal distribution primitives used across the package.

Everything is parameterized by the *variance* (not the standard deviation),
because variances of the form kappa2*t are what the covariance formulas and
the rate-function integrands pass around.  CDFs go through the complementary
error function so that tails keep full relative accuracy.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import log_ndtr, ndtr, owens_t

SQRT_2PI = math.sqrt(2.0 * math.pi)


def norm_cdf(x, var):
    """P(N <= x) for N ~ Normal(0, var).  var == 0 gives the unit step at 0."""
    if var < 0.0:
        raise ValueError("variance must be nonnegative")
    if var == 0.0:
        return np.where(np.asarray(x, float) >= 0.0, 1.0, 0.0)[()]
    return ndtr(np.asarray(x, float) / math.sqrt(var))[()]


def norm_sf(x, var):
    """P(N > x), evaluated as ndtr(-x/sd) to keep tiny tails accurate."""
    if var < 0.0:
        raise ValueError("variance must be nonnegative")
    if var == 0.0:
        return np.where(np.asarray(x, float) >= 0.0, 0.0, 1.0)[()]
    return ndtr(-np.asarray(x, float) / math.sqrt(var))[()]


def norm_pdf(x, var):
    """Density of Normal(0, var)."""
    if var <= 0.0:
        raise ValueError("variance must be positive")
    sd = math.sqrt(var)
    z = np.asarray(x, float) / sd
    return (np.exp(-0.5 * z * z) / (sd * SQRT_2PI))[()]


def norm_logit_cdf(x, var):
    """log(Phi(x)/(1 - Phi(x))) for Normal(0, var); stable far into both tails."""
    z = np.asarray(x, float) / math.sqrt(var)
    return (log_ndtr(z) - log_ndtr(-z))[()]


def mean_excess(var, x):
    """E(N - x)^+ for N ~ Normal(0, var) and x >= 0.

    Equals var*pdf(x) - x*(1 - cdf(x)); by convention 0 for all x when
    var == 0 (the pointwise limit).  This is the building block of both
    limit covariances, and its negative derivative in x is the survival
    function, which the quadrature modules use for tail bounds.
    """
    x_arr = np.asarray(x, float)
    if var < 0.0:
        raise ValueError("variance must be nonnegative")
    if np.any(x_arr < 0.0):
        raise ValueError("mean_excess is defined for x >= 0")
    if var == 0.0:
        return np.zeros_like(x_arr)[()]
    sd = math.sqrt(var)
    z = x_arr / sd
    return (sd * np.exp(-0.5 * z * z) / SQRT_2PI - x_arr * ndtr(-z))[()]


def mean_excess_grid(var, x):
    """Vectorized mean_excess where `var` and `x` are broadcastable arrays.

    Entries with var == 0 return 0; used to fill covariance matrices in one
    shot.
    """
    var = np.asarray(var, float)
    x = np.asarray(x, float)
    var_b, x_b = np.broadcast_arrays(var, x)
    out = np.zeros(var_b.shape, float)
    pos = var_b > 0.0
    if np.any(pos):
        sd = np.sqrt(var_b[pos])
        z = x_b[pos] / sd
        out[pos] = sd * np.exp(-0.5 * z * z) / SQRT_2PI - x_b[pos] * ndtr(-z)
    return out


def bvn_cdf(h: float, k: float, rho: float) -> float:
    """P(X <= h, Y <= k) for standard bivariate normal with correlation rho.

    Owen's-T identity; accurate to ~1e-15, which the covariance quadrature
    cross-checks rely on.  Degenerate rho = +-1 are handled as hard limits.
    """
    if rho >= 1.0:
        return float(min(ndtr(h), ndtr(k)))
    if rho <= -1.0:
        return float(max(0.0, ndtr(h) + ndtr(k) - 1.0))
    if h == 0.0 and k == 0.0:
        return 0.25 + math.asin(rho) / (2.0 * math.pi)
    if h == 0.0:
        # reduce to the k == 0 branch by symmetry of the joint law
        return bvn_cdf(k, h, rho)
    den = math.sqrt(1.0 - rho * rho)
    beta = 0.5 if (h * k < 0.0 or (h * k == 0.0 and h + k < 0.0)) else 0.0
    t_h = owens_t(h, (k - rho * h) / (h * den))
    if k == 0.0:
        t_k = math.copysign(0.25, h)  # T(0, +-inf) limit
    else:
        t_k = owens_t(k, (h - rho * k) / (k * den))
    return float(0.5 * (ndtr(h) + ndtr(k)) - t_h - t_k - beta)


def mvn_cdf_3(upper, cov) -> float:
    """P(Z_i <= upper_i, i=1..3) for a centered trivariate normal.

    Deterministic evaluation: condition on the first coordinate and reduce
    to a 1-d integral of Owen's-T bivariate CDFs.  Requires a nonsingular
    covariance.
    """
    from scipy.integrate import quad

    upper = np.asarray(upper, float)
    cov = np.asarray(cov, float)
    s11 = cov[0, 0]
    sd1 = math.sqrt(s11)
    # conditional law of (Z2, Z3) given Z1 = z
    slope = cov[1:, 0] / s11
    ccov = cov[1:, 1:] - np.outer(cov[1:, 0], cov[1:, 0]) / s11
    sd2 = math.sqrt(ccov[0, 0])
    sd3 = math.sqrt(ccov[1, 1])
    rho = ccov[0, 1] / (sd2 * sd3)

    def integrand(z):
        h = (upper[1] - slope[0] * z) / sd2
        k = (upper[2] - slope[1] * z) / sd3
        return norm_pdf(z, s11) * bvn_cdf(h, k, rho)

    lo = -9.0 * sd1
    hi = min(upper[0], 9.0 * sd1)
    if hi <= lo:
        return 0.0
    val, _ = quad(integrand, lo, hi, epsabs=1e-12, epsrel=1e-10, limit=200)
    return float(val)
