"""Standard normal CDF/quantile and the reformulation margins built on them.

Everything here is closed-form and dependency-free (math.erfc plus a
rational initial guess refined by Newton steps on the CDF), so the margins
sigma_hat / sigma_tilde are deterministic to the last bit.
"""
from __future__ import annotations

import math

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def std_normal_cdf(t: float) -> float:
    """Phi(t), absolute error well below 1e-12 on finite input."""
    if math.isnan(t):
        raise ValueError("std_normal_cdf: t must be finite")
    return 0.5 * math.erfc(-t / _SQRT2)


def std_normal_pdf(t: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * t * t)


# Acklam's rational approximation for the inverse normal CDF (|rel err| < 1.15e-9),
# used only as the seed for Newton refinement on std_normal_cdf.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def _acklam_seed(q: float) -> float:
    if q < _P_LOW:
        u = math.sqrt(-2.0 * math.log(q))
        return (((((_C[0] * u + _C[1]) * u + _C[2]) * u + _C[3]) * u + _C[4]) * u + _C[5]) / \
               ((((_D[0] * u + _D[1]) * u + _D[2]) * u + _D[3]) * u + 1.0)
    if q > 1.0 - _P_LOW:
        u = math.sqrt(-2.0 * math.log(1.0 - q))
        return -(((((_C[0] * u + _C[1]) * u + _C[2]) * u + _C[3]) * u + _C[4]) * u + _C[5]) / \
                ((((_D[0] * u + _D[1]) * u + _D[2]) * u + _D[3]) * u + 1.0)
    u = q - 0.5
    r = u * u
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * u / \
           (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


def std_normal_quantile(q: float) -> float:
    """Inverse of std_normal_cdf; |Phi(t) - q| <= 1e-10 on (0, 1)."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"std_normal_quantile: q must lie in (0, 1), got {q}")
    t = _acklam_seed(q)
    # Two Newton steps; the pdf never vanishes where the seed lands.
    for _ in range(2):
        err = std_normal_cdf(t) - q
        t -= err / std_normal_pdf(t)
    return t


def sigma_hat(mu: float, sigma: float, epsilon: float) -> float:
    """Normal-assumption capacity margin per unit of participation:
    Phi^-1(1-eps)*sigma - mu."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"sigma_hat: epsilon must lie in (0, 1), got {epsilon}")
    if epsilon == 0.5:
        return -mu  # quantile term vanishes exactly
    return std_normal_quantile(1.0 - epsilon) * sigma - mu


def sigma_tilde(mu: float, sigma: float, epsilon: float) -> float:
    """Chebyshev (Cantelli) capacity margin: sqrt((1-eps)/eps)*sigma - mu."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"sigma_tilde: epsilon must lie in (0, 1), got {epsilon}")
    return math.sqrt((1.0 - epsilon) / epsilon) * sigma - mu


def matching_epsilon_chebyshev(epsilon_normal: float) -> float:
    """The eps' that makes the Chebyshev margin coincide with the normal one
    at mu = 0: sqrt((1-eps')/eps') = Phi^-1(1-eps), i.e. eps' = 1/(1+t^2)."""
    if not 0.0 < epsilon_normal < 0.5:
        raise ValueError(
            f"matching_epsilon_chebyshev: epsilon must lie in (0, 0.5), got {epsilon_normal}")
    t = std_normal_quantile(1.0 - epsilon_normal)
    return 1.0 / (1.0 + t * t)


def adjust_epsilon_for_mu(epsilon_hat: float, mu: float, sigma: float) -> float:
    """Tolerance that absorbs a nonzero mean into a mu = 0 model:
    eps = 1 - Phi((Phi^-1(1-eps_hat)*sigma - mu)/sigma)."""
    if not 0.0 < epsilon_hat < 1.0:
        raise ValueError(f"adjust_epsilon_for_mu: epsilon_hat must lie in (0, 1), got {epsilon_hat}")
    if sigma <= 0.0:
        raise ValueError("adjust_epsilon_for_mu: sigma must be positive")
    shifted = (std_normal_quantile(1.0 - epsilon_hat) * sigma - mu) / sigma
    eps = 1.0 - std_normal_cdf(shifted)
    if not 0.0 < eps < 1.0:
        raise ValueError(
            f"adjust_epsilon_for_mu: shifted quantile leaves (0, 1); "
            f"eps_hat={epsilon_hat}, mu={mu}, sigma={sigma} give eps={eps}")
    return eps
