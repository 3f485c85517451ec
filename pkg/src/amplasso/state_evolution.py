"""Scalar state evolution, calibration, risk prediction, and phase geometry.

The deterministic recursion ``tau_{t+1}^2 = F(tau_t^2, alpha*tau_t)`` with
``F(tau^2, theta) = sigma^2 + st_mse(prior, tau, theta)/delta`` tracks the
effective noise of the memory-corrected solver exactly in the
high-dimensional limit.  Its fixed point feeds the threshold/regularization
calibration ``lambda(alpha)``, the predicted LASSO risk
``delta*(tau_*^2 - sigma^2)``, and the noise-sensitivity phase boundary.
All expectations are closed-form (no quadrature), so every quantity here
is deterministic to machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import optimize

from .gaussians import Phi, phi
from .instances import ModelParams
from .priors import st_keep_prob, st_mse
from .scalar_risk import minimax_soft_threshold

_RESIDUAL_RTOL = 1e-12


@dataclass(frozen=True)
class SETrajectory:
    """State evolution trace: tau_t^2 values, thresholds, and the limit."""

    tau2_sequence: tuple[float, ...]
    theta_sequence: tuple[float, ...]
    converged: bool
    tau_star: float | None


@dataclass(frozen=True)
class LassoRiskPrediction:
    """Predicted per-coordinate LASSO MSE with its calibration data."""

    mse: float
    tau_star: float
    theta_star: float
    alpha: float
    lam: float


@dataclass(frozen=True)
class PhasePoint:
    """One (delta, rho) location with its boundary value and worst-case risk.

    ``m_star`` is finite exactly when ``rho < rho_c``.
    """

    delta: float
    rho: float
    rho_c: float
    m_star: float


def tau0_squared(params: ModelParams) -> float:
    """Starting point sigma^2 + E{X0^2}/delta."""
    return params.sigma2 + params.prior.second_moment / params.delta


def se_map(tau2: float, theta: float, params: ModelParams) -> float:
    """F(tau^2, theta) = sigma^2 + E{[eta(X0 + tau Z; theta) - X0]^2}/delta."""
    if tau2 <= 0:
        raise ValueError("tau2 must be > 0")
    return params.sigma2 + st_mse(params.prior, math.sqrt(tau2), theta) / params.delta


def se_run(params: ModelParams, alpha: float, max_iter: int = 10000,
           tol: float = 1e-13) -> SETrajectory:
    """Iterate the recursion from tau_0^2 until relative change <= tol.

    The map tau^2 -> F(tau^2, alpha*tau) is nondecreasing and concave, so
    the iterates are monotone; the returned limit satisfies the fixed
    point equation to ~tol relative residual.
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    tau2 = tau0_squared(params)
    tau2_seq = [tau2]
    theta_seq = [alpha * math.sqrt(tau2)]
    converged = False
    for _ in range(max_iter):
        tau2_next = se_map(tau2, alpha * math.sqrt(tau2), params)
        tau2_seq.append(tau2_next)
        theta_seq.append(alpha * math.sqrt(tau2_next) if tau2_next > 0 else 0.0)
        done = abs(tau2_next - tau2) <= tol * max(tau2, 1e-300)
        tau2 = tau2_next
        if done:
            converged = True
            break
    return SETrajectory(tau2_sequence=tuple(tau2_seq), theta_sequence=tuple(theta_seq),
                        converged=converged,
                        tau_star=math.sqrt(tau2) if converged else None)


def alpha_min(delta: float) -> float:
    """Smallest threshold multiplier with a guaranteed unique fixed point.

    Root of (1 + a^2)*Phi(-a) - a*phi(a) = delta/2; the left side is
    strictly decreasing from 1/2, so the root exists for delta in (0, 1].
    """
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")

    def f(a):
        return (1.0 + a * a) * Phi(-a) - a * phi(a) - delta / 2.0

    root = optimize.brentq(f, 0.0, 20.0, xtol=1e-12, rtol=8.9e-16)
    return float(root)


def _alpha_floor(delta: float) -> float:
    return alpha_min(delta) if delta <= 1.0 else 0.0


def se_fixed_point(params: ModelParams, alpha: float) -> float:
    """Unique tau_* > 0 solving tau^2 = F(tau^2, alpha*tau).

    Plain fixed-point iteration (damped on oscillation) with a bracketing
    root solve as fallback; the result satisfies the equation to 1e-12
    relative residual.  Requires sigma^2 > 0 and alpha above
    :func:`alpha_min`, where uniqueness holds.
    """
    if params.sigma2 <= 0:
        raise ValueError("sigma2 must be > 0 for the fixed point")
    floor = _alpha_floor(params.delta)
    if alpha <= floor:
        raise ValueError(f"alpha must exceed alpha_min = {floor:.6f}")

    def g(tau2):
        return se_map(tau2, alpha * math.sqrt(tau2), params) - tau2

    tau2 = tau0_squared(params)
    damping = 1.0
    prev_step = 0.0
    for _ in range(20000):
        step = g(tau2)
        if abs(step) <= _RESIDUAL_RTOL * tau2:
            return math.sqrt(tau2)
        if prev_step * step < 0:
            damping = 0.5
        prev_step = step
        tau2 = tau2 + damping * step

    lo = params.sigma2  # g(sigma^2) = st_mse/delta >= 0
    hi = max(tau0_squared(params), tau2)
    while g(hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("no bracket for the fixed point")
    root = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16)
    return math.sqrt(float(root))


def calibrate_lambda(alpha: float, params: ModelParams) -> float:
    """Regularization level reached by threshold multiplier ``alpha``.

    lambda(alpha) = alpha*tau_* * [1 - P{|X0 + tau_* Z| >= alpha*tau_*}/delta];
    negative values occur just above alpha_min and are returned as-is (the
    usable branch is where the value is positive).
    """
    tau_star = se_fixed_point(params, alpha)
    theta_star = alpha * tau_star
    keep = st_keep_prob(params.prior, tau_star, theta_star)
    return theta_star * (1.0 - keep / params.delta)


def alpha_of_lambda(lam: float, params: ModelParams, alpha_tol: float = 1e-8,
                    alpha_cap: float = 1e3) -> float:
    """Invert the calibration: the alpha with calibrate_lambda(alpha) = lam.

    Brackets from just above alpha_min (where the calibration dives
    negative) and grows the upper end geometrically until it clears
    ``lam``; fails loudly if no bracket exists below ``alpha_cap``.
    """
    if lam <= 0:
        raise ValueError("lam must be > 0")
    floor = _alpha_floor(params.delta)

    offset = 0.5
    lo = floor + offset
    while calibrate_lambda(lo, params) >= lam:
        offset *= 0.25
        if offset < 1e-9:
            raise RuntimeError("could not bracket alpha from below; lam too small?")
        lo = floor + offset

    hi = max(2.0 * lo, lo + 1.0)
    while calibrate_lambda(hi, params) < lam:
        hi *= 2.0
        if hi > alpha_cap:
            raise RuntimeError(f"no alpha below {alpha_cap} reaches lam={lam}")

    root = optimize.brentq(lambda a: calibrate_lambda(a, params) - lam,
                           lo, hi, xtol=alpha_tol, rtol=8.9e-16)
    return float(root)


def lasso_risk(lam: float, params: ModelParams) -> LassoRiskPrediction:
    """Exact high-dimensional LASSO risk at regularization ``lam``.

    Returns delta*(tau_*^2 - sigma^2), which equals the channel MSE
    E{[eta(X0 + tau_* Z; theta_*) - X0]^2} by the fixed point identity;
    both are evaluated and must agree to 1e-10.
    """
    if lam <= 0:
        raise ValueError("lam must be > 0")
    if params.sigma2 <= 0:
        raise ValueError("sigma2 must be > 0")
    if not params.prior.has_signal_mass:
        raise ValueError("prior must put mass off zero")
    alpha = alpha_of_lambda(lam, params)
    tau_star = se_fixed_point(params, alpha)
    theta_star = alpha * tau_star
    mse = params.delta * (tau_star**2 - params.sigma2)
    channel_mse = st_mse(params.prior, tau_star, theta_star)
    if abs(mse - channel_mse) > 1e-10 * max(1.0, abs(mse)):
        raise RuntimeError(
            f"fixed point identity violated: {mse!r} vs {channel_mse!r}")
    return LassoRiskPrediction(mse=mse, tau_star=tau_star, theta_star=theta_star,
                               alpha=alpha, lam=lam)


def rho_c(delta: float) -> float:
    """Noise-sensitivity phase boundary: sparsity-per-measurement limit.

    The unique rho where the minimax threshold risk exhausts the
    measurement budget, i.e. M#(rho*delta) = delta.  Below it the LASSO
    minimax risk is finite; above it, infinite.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")

    def f(rho):
        return minimax_soft_threshold(rho * delta).m_sharp - delta

    return float(optimize.brentq(f, 1e-9, 1.0 - 1e-12, xtol=1e-10, rtol=8.9e-16))


def minimax_risk_star(delta: float, rho: float) -> float:
    """Worst-case LASSO noise sensitivity M*(delta, rho); +inf above the boundary."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if rho <= 0:
        raise ValueError("rho must be > 0")
    eps = rho * delta
    if eps >= 1.0:
        return math.inf
    m_sharp = minimax_soft_threshold(eps).m_sharp
    if m_sharp >= delta:
        return math.inf
    return m_sharp / (1.0 - m_sharp / delta)


def phase_point(delta: float, rho: float) -> PhasePoint:
    """Evaluate the boundary and worst-case noise sensitivity at (delta, rho)."""
    return PhasePoint(delta=delta, rho=rho, rho_c=rho_c(delta),
                      m_star=minimax_risk_star(delta, rho))


def parametric_boundary(alpha: float) -> tuple[float, float]:
    """The phase boundary point reached by threshold multiplier ``alpha``.

    delta = 2 phi(a) / (a + 2(phi(a) - a Phi(-a))),
    rho   = 1 - a Phi(-a) / phi(a); alpha = 0 maps to (1, 1).
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    density = phi(alpha)
    if density == 0.0:  # far tail: both coordinates vanish
        return 0.0, 0.0
    gap = density - alpha * Phi(-alpha)
    delta = 2.0 * density / (alpha + 2.0 * gap)
    rho = 1.0 - alpha * Phi(-alpha) / density
    return float(delta), float(rho)


def boundary_alpha(delta: float) -> float:
    """Threshold multiplier whose boundary point sits at undersampling ``delta``.

    This is the tuning that achieves exact noiseless recovery up to
    rho_c(delta); the boundary delta(alpha) is strictly decreasing, so
    bisection applies.
    """
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    if delta == 1.0:
        return 0.0
    return float(optimize.brentq(lambda a: parametric_boundary(a)[0] - delta,
                                 0.0, 40.0, xtol=1e-12, rtol=8.9e-16))
