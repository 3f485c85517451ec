"""First-order iterative solvers for l1-regularized least squares.

The main iteration thresholds the pseudo-data ``x + A'r`` and corrects the
residual with the memory term ``b * r_prev`` where ``b = ||x||_0 / m``;
that correction is what keeps the effective noise Gaussian and makes the
scalar state evolution exact in the high-dimensional limit.  The same
machinery without the correction (iterative soft thresholding, IST) is
provided as a baseline and as an independent LASSO reference solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gaussians import MEDIAN_ABS_GAUSS
from .instances import Instance
from .scalar_risk import soft_threshold, soft_threshold_derivative

RMS = "rms"
MEDIAN = "median"
FIXED_SEQUENCE = "fixed"

_BLOWUP_FACTOR = 1e6


class NumericalBlowupError(RuntimeError):
    """Raised when iterates leave the plausible range (diverging run)."""


@dataclass(frozen=True)
class ThresholdPolicy:
    """How the per-iteration threshold is chosen.

    Adaptive modes scale a scatter estimate of the residual by ``alpha``;
    the fixed mode replays an explicit threshold sequence (its last value
    repeats once the sequence is exhausted).
    """

    alpha: float = 2.0
    estimator: str = RMS
    theta_sequence: tuple[float, ...] = ()

    def __post_init__(self):
        if self.estimator not in (RMS, MEDIAN, FIXED_SEQUENCE):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.estimator == FIXED_SEQUENCE:
            if len(self.theta_sequence) == 0:
                raise ValueError("fixed policy needs a nonempty theta sequence")
            if any(t < 0 for t in self.theta_sequence):
                raise ValueError("thresholds must be >= 0")
        elif self.alpha <= 0:
            raise ValueError("alpha must be > 0")

    @classmethod
    def rms(cls, alpha: float) -> "ThresholdPolicy":
        return cls(alpha=alpha, estimator=RMS)

    @classmethod
    def median(cls, alpha: float) -> "ThresholdPolicy":
        return cls(alpha=alpha, estimator=MEDIAN)

    @classmethod
    def fixed(cls, thetas) -> "ThresholdPolicy":
        return cls(alpha=1.0, estimator=FIXED_SEQUENCE,
                   theta_sequence=tuple(float(t) for t in thetas))

    def tau_mode(self) -> str:
        return MEDIAN if self.estimator == MEDIAN else RMS

    def theta(self, t: int, tau_hat: float) -> float:
        if self.estimator == FIXED_SEQUENCE:
            return self.theta_sequence[min(t, len(self.theta_sequence) - 1)]
        return self.alpha * tau_hat


def estimate_tau(r: np.ndarray, mode: str = RMS) -> float:
    """Scatter estimate of the residual: root mean square or scaled median.

    The median mode uses median(|r|)/Phi^{-1}(3/4); for even lengths the
    lower middle order statistic is taken (deterministic, no interpolation).
    """
    r = np.asarray(r, dtype=float)
    m = r.size
    if m < 1:
        raise ValueError("residual must be nonempty")
    if mode == RMS:
        return float(np.sqrt(np.dot(r, r) / m))
    if mode == MEDIAN:
        k = (m - 1) // 2
        return float(np.partition(np.abs(r), k)[k] / MEDIAN_ABS_GAUSS)
    raise ValueError(f"unknown estimator mode {mode!r}")


def onsager_coefficient(x: np.ndarray, m: int) -> float:
    """Memory coefficient b = ||x||_0 / m (exact nonzero count)."""
    return float(np.count_nonzero(x)) / m


def onsager_from_derivative(u: np.ndarray, theta: float, m: int) -> float:
    """Debug alternative: b as the mean threshold derivative at the pseudo-data.

    Identical to :func:`onsager_coefficient` applied to
    ``soft_threshold(u, theta)`` because the kink derivative is 0.
    """
    return float(np.sum(soft_threshold_derivative(u, theta))) / m


@dataclass
class AmpState:
    """Iteration state: estimate, residual, and the step's threshold data."""

    x: np.ndarray
    r: np.ndarray
    r_prev: np.ndarray
    t: int
    tau_hat: float
    theta: float
    b: float


def initial_state(instance: Instance, policy: ThresholdPolicy) -> AmpState:
    """t=0 state: x = 0, r = y, no memory, threshold from the raw data."""
    tau0 = estimate_tau(instance.y, policy.tau_mode())
    return AmpState(
        x=np.zeros(instance.n), r=instance.y.copy(), r_prev=np.zeros(instance.m),
        t=0, tau_hat=tau0, theta=policy.theta(0, tau0), b=0.0,
    )


def _check_blowup(x: np.ndarray, y: np.ndarray) -> None:
    limit = _BLOWUP_FACTOR * max(1.0, float(np.max(np.abs(y))) if y.size else 1.0)
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    if not np.isfinite(peak) or peak > limit:
        raise NumericalBlowupError(f"|x| reached {peak:.3e} (limit {limit:.3e})")


def amp_step(state: AmpState, instance: Instance, policy: ThresholdPolicy) -> AmpState:
    """Advance one iteration: threshold the pseudo-data, refresh the residual."""
    u = state.x + instance.a.T @ state.r
    x_new = soft_threshold(u, state.theta)
    _check_blowup(x_new, instance.y)
    b_new = onsager_coefficient(x_new, instance.m)
    r_new = instance.y - instance.a @ x_new + b_new * state.r
    tau_new = estimate_tau(r_new, policy.tau_mode())
    t_new = state.t + 1
    return AmpState(
        x=x_new, r=r_new, r_prev=state.r, t=t_new,
        tau_hat=tau_new, theta=policy.theta(t_new, tau_new), b=b_new,
    )


@dataclass(frozen=True)
class TrajectoryPoint:
    """Per-iteration record emitted by the run drivers."""

    t: int
    tau_hat: float
    theta: float
    b: float
    mse: float
    kkt_gap: float | None = None


@dataclass
class SolverResult:
    """Output of a solver run: final vectors plus the full trajectory."""

    x_hat: np.ndarray
    r_hat: np.ndarray
    trajectory: list[TrajectoryPoint] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    tau_hat: float = 0.0
    theta: float = 0.0
    b: float = 0.0
    engine: str = "amp"
    scale: float = 1.0  # co-scaling factor applied to (A, y); 1 for AMP


def _traj_point(instance: Instance, x, tau_hat, theta, b, t,
                record_kkt: bool) -> TrajectoryPoint:
    mse = float(np.mean((x - instance.x0) ** 2))
    gap = None
    if record_kkt:
        lam = theta * max(1.0 - b, 0.0)
        gap = lasso_kkt_gap(instance, x, lam) if lam > 0 else float("nan")
    return TrajectoryPoint(t=t, tau_hat=tau_hat, theta=theta, b=b, mse=mse, kkt_gap=gap)


def amp_run(instance: Instance, policy: ThresholdPolicy, max_iter: int = 200,
            tol: float = 1e-8, record_kkt: bool = False) -> SolverResult:
    """Iterate until the relative change of x drops below ``tol``.

    The stopping metric is ||x_{t+1} - x_t|| / max(1, ||x_t||); adaptive
    thresholds chase a moving regularization level until tau_hat settles,
    so the optimality gap is checked separately via :func:`lasso_kkt_gap`.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    state = initial_state(instance, policy)
    traj = [_traj_point(instance, state.x, state.tau_hat, state.theta,
                        state.b, 0, record_kkt)]
    converged = False
    for _ in range(max_iter):
        new = amp_step(state, instance, policy)
        traj.append(_traj_point(instance, new.x, new.tau_hat, new.theta,
                                new.b, new.t, record_kkt))
        dx = np.linalg.norm(new.x - state.x) / max(1.0, np.linalg.norm(state.x))
        state = new
        if dx < tol:
            converged = True
            break
    return SolverResult(x_hat=state.x, r_hat=state.r, trajectory=traj,
                        converged=converged, iterations=state.t,
                        tau_hat=state.tau_hat, theta=state.theta, b=state.b,
                        engine="amp")


def operator_norm(a: np.ndarray, rel_tol: float = 1e-6, max_iter: int = 100000,
                  seed: int = 0) -> float:
    """Top singular value by power iteration on the Gram operator.

    The estimates converge geometrically; the observed contraction ratio
    is used to bound the remaining lag, so the result is within
    ``rel_tol`` of the true value even for small spectral gaps.
    Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    change_prev = np.inf
    for _ in range(max_iter):
        u = a @ v
        sigma_new = float(np.linalg.norm(u))
        v = a.T @ u
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return 0.0
        v /= nv
        change = abs(sigma_new - sigma)
        ratio = change / change_prev if change_prev > 0 else 0.0
        lag = change * ratio / (1.0 - ratio) if ratio < 1.0 else np.inf
        if change <= rel_tol * max(sigma_new, 1e-300) and \
                lag <= rel_tol * max(sigma_new, 1e-300):
            return sigma_new
        sigma = sigma_new
        change_prev = change
    return sigma


def _rescaled(instance: Instance, rescale_opnorm: float | None):
    if rescale_opnorm is None:
        return instance.a, instance.y, 1.0
    if not 0.0 < rescale_opnorm <= 1.0:
        raise ValueError("rescale_opnorm must lie in (0, 1]")
    c = rescale_opnorm / operator_norm(instance.a)
    return c * instance.a, c * instance.y, c


def ist_run(instance: Instance, policy: ThresholdPolicy, rescale_opnorm: float | None = 0.95,
            max_iter: int = 200, tol: float = 1e-8,
            record_kkt: bool = False) -> SolverResult:
    """Same iteration without the memory term: r = y - A x.

    The matrix (and data) are co-scaled so the top singular value equals
    ``rescale_opnorm`` -- without that the unit-step iteration diverges.
    Pass ``None`` to run on the raw matrix (divergence then raises
    :class:`NumericalBlowupError`).  MSE in the trajectory is measured
    against the unscaled ground truth, which co-scaling preserves.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    a_s, y_s, c = _rescaled(instance, rescale_opnorm)
    x = np.zeros(instance.n)
    r = y_s.copy()
    tau = estimate_tau(r, policy.tau_mode())
    theta = policy.theta(0, tau)

    def point(t):
        mse = float(np.mean((x - instance.x0) ** 2))
        gap = None
        if record_kkt:
            lam = theta / (c * c) if theta > 0 else 0.0
            gap = lasso_kkt_gap(instance, x, lam) if lam > 0 else float("nan")
        return TrajectoryPoint(t=t, tau_hat=tau, theta=theta,
                               b=onsager_coefficient(x, instance.m), mse=mse,
                               kkt_gap=gap)

    traj = [point(0)]
    converged = False
    t = 0
    for t in range(1, max_iter + 1):
        x_new = soft_threshold(x + a_s.T @ r, theta)
        _check_blowup(x_new, y_s)
        dx = np.linalg.norm(x_new - x) / max(1.0, np.linalg.norm(x))
        x = x_new
        r = y_s - a_s @ x
        tau = estimate_tau(r, policy.tau_mode())
        theta = policy.theta(t, tau)
        traj.append(point(t))
        if dx < tol:
            converged = True
            break
    return SolverResult(x_hat=x, r_hat=r, trajectory=traj, converged=converged,
                        iterations=t, tau_hat=tau, theta=theta,
                        b=onsager_coefficient(x, instance.m), engine="ist",
                        scale=c)


def ist_solve_lasso(instance: Instance, lam: float, rescale_opnorm: float = 0.95,
                    max_iter: int = 10000, tol: float = 0.0) -> SolverResult:
    """Solve the LASSO at regularization ``lam`` by plain thresholded descent.

    Runs the fixed-threshold iteration on the co-scaled problem, whose
    fixed point is exactly the stationary point of
    ``0.5*||y - A x||^2 + lam*||x||_1`` on the original data.  Slow but
    independent of the memory-corrected solver; used as a reference.
    """
    if lam <= 0:
        raise ValueError("lam must be > 0")
    a_s, y_s, c = _rescaled(instance, rescale_opnorm)
    theta = lam * c * c
    x = np.zeros(instance.n)
    converged = False
    t = 0
    for t in range(1, max_iter + 1):
        x_new = soft_threshold(x + a_s.T @ (y_s - a_s @ x), theta)
        _check_blowup(x_new, y_s)
        dx = np.linalg.norm(x_new - x) / max(1.0, np.linalg.norm(x))
        x = x_new
        if tol > 0 and dx < tol:
            converged = True
            break
    r = instance.y - instance.a @ x
    return SolverResult(x_hat=x, r_hat=r, converged=converged, iterations=t,
                        theta=theta, b=onsager_coefficient(x, instance.m),
                        engine="ist", scale=c)


def lasso_objective(instance: Instance, x: np.ndarray, lam: float) -> float:
    """0.5*||y - A x||^2 + lam*||x||_1 on the original data."""
    resid = instance.y - instance.a @ x
    return 0.5 * float(np.dot(resid, resid)) + lam * float(np.sum(np.abs(x)))


def lasso_kkt_gap(instance: Instance, x_hat: np.ndarray, lam: float) -> float:
    """Stationarity residual of the LASSO at ``x_hat``; zero iff optimal.

    With g = A'(y - A x): on the zero set the gap is (|g| - lam)_+, on the
    support |g - lam*sign(x)|; the maximum over all coordinates is
    returned.
    """
    if lam <= 0:
        raise ValueError("lam must be > 0")
    g = instance.a.T @ (instance.y - instance.a @ x_hat)
    zero = x_hat == 0
    gap = 0.0
    if np.any(zero):
        gap = max(gap, float(np.max(np.abs(g[zero])) - lam), 0.0)
    if np.any(~zero):
        gap = max(gap, float(np.max(np.abs(g[~zero] - lam * np.sign(x_hat[~zero])))))
    return gap


def effective_lambda(x_hat: np.ndarray, theta_star: float, m: int) -> float:
    """Regularization level certified by a fixed point: theta*(1 - ||x||_0/m).

    Rejects ||x||_0 >= m, where the map degenerates (lam <= 0 is
    meaningless).
    """
    if theta_star < 0:
        raise ValueError("theta_star must be >= 0")
    nnz = int(np.count_nonzero(x_hat))
    if nnz >= m:
        raise ValueError(f"||x||_0 = {nnz} >= m = {m}: effective lambda undefined")
    return theta_star * (1.0 - nnz / m)
