"""Problem-instance generation and converging-sequence diagnostics.

An :class:`Instance` bundles one realization of ``y = A x0 + w`` together
with its dimensions and seed.  Generators produce Gaussian or Rademacher
sensing matrices with i.i.d. entries of variance ``1/m``; a planted
variant places an exact number of +-1 spikes for the benchmark protocols.
Arrays are frozen read-only so instances can be shared across concurrent
solver runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .priors import DiscretePrior, sample_with_rng

GAUSSIAN = "gaussian"
RADEMACHER = "rademacher"
ENSEMBLES = (GAUSSIAN, RADEMACHER)


@dataclass(frozen=True)
class ModelParams:
    """Asymptotic model: undersampling ratio, noise variance, signal prior."""

    delta: float
    sigma2: float
    prior: DiscretePrior

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be >= 0")


@dataclass(frozen=True)
class Instance:
    """One problem realization (A, x0, w, y) with y = A x0 + w exactly."""

    a: np.ndarray
    x0: np.ndarray
    w: np.ndarray
    y: np.ndarray
    m: int
    n: int
    delta: float
    sigma2: float
    seed: int

    def __post_init__(self):
        if self.a.shape != (self.m, self.n):
            raise ValueError("matrix shape does not match (m, n)")
        for arr, size in ((self.x0, self.n), (self.w, self.m), (self.y, self.m)):
            if arr.shape != (size,):
                raise ValueError("vector shapes do not match instance dimensions")
        for arr in (self.a, self.x0, self.w, self.y):
            arr.setflags(write=False)


def measurement_count(delta: float, n: int) -> int:
    """m = round(delta * n), ties resolved to even (banker's rounding)."""
    m = round(delta * n)
    if m < 1:
        raise ValueError(f"delta={delta} with n={n} gives m={m} < 1")
    return m


def _draw_matrix(rng: np.random.Generator, m: int, n: int, ensemble: str) -> np.ndarray:
    if ensemble == GAUSSIAN:
        return rng.standard_normal((m, n)) / np.sqrt(m)
    if ensemble == RADEMACHER:
        return (2.0 * rng.integers(0, 2, size=(m, n)) - 1.0) / np.sqrt(m)
    raise ValueError(f"unknown ensemble {ensemble!r}")


def _assemble(a, x0, w, m, n, delta, sigma2, seed) -> Instance:
    y = a @ x0 + w
    return Instance(a=a, x0=x0, w=w, y=y, m=m, n=n, delta=float(delta),
                    sigma2=float(sigma2), seed=seed)


def gen_instance(n: int, params: ModelParams, seed: int,
                 ensemble: str = GAUSSIAN) -> Instance:
    """Draw matrix, signal, and noise from one seeded generator.

    Draw order is fixed (matrix, then signal, then noise) so instances are
    bit-reproducible given (n, params, seed, ensemble).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    m = measurement_count(params.delta, n)
    rng = np.random.default_rng(seed)
    a = _draw_matrix(rng, m, n, ensemble)
    x0 = sample_with_rng(params.prior, n, rng)
    w = np.sqrt(params.sigma2) * rng.standard_normal(m) if params.sigma2 > 0 else np.zeros(m)
    return _assemble(a, x0, w, m, n, params.delta, params.sigma2, seed)


def gen_gaussian_instance(n: int, params: ModelParams, seed: int) -> Instance:
    """Instance with i.i.d. N(0, 1/m) matrix entries."""
    return gen_instance(n, params, seed, GAUSSIAN)


def gen_rademacher_instance(n: int, params: ModelParams, seed: int) -> Instance:
    """Instance with i.i.d. +-1/sqrt(m) matrix entries (unit column norms)."""
    return gen_instance(n, params, seed, RADEMACHER)


def gen_planted_instance(n: int, delta: float, nnz: int, seed: int,
                         ensemble: str = GAUSSIAN, sigma2: float = 0.0) -> Instance:
    """Instance whose signal has exactly ``nnz`` +-1 entries on a random support.

    Used by the benchmark protocols that fix ||x0||_0 instead of sampling it.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0 <= nnz <= n:
        raise ValueError("nnz must lie in [0, n]")
    m = measurement_count(delta, n)
    rng = np.random.default_rng(seed)
    a = _draw_matrix(rng, m, n, ensemble)
    x0 = np.zeros(n)
    support = rng.choice(n, size=nnz, replace=False)
    x0[support] = 2.0 * rng.integers(0, 2, size=nnz) - 1.0
    w = np.sqrt(sigma2) * rng.standard_normal(m) if sigma2 > 0 else np.zeros(m)
    return _assemble(a, x0, w, m, n, delta, sigma2, seed)


@dataclass(frozen=True)
class ConvergenceReport:
    """Finite-size diagnostics against the asymptotic model."""

    min_col_norm: float
    max_col_norm: float
    norm_tol: float
    norms_pass: bool
    signal_second_moment: float
    signal_target: float
    signal_tol: float
    signal_pass: bool
    noise_variance: float
    noise_target: float
    noise_tol: float
    noise_pass: bool

    @property
    def passed(self) -> bool:
        return self.norms_pass and self.signal_pass and self.noise_pass


def check_converging(instance: Instance, params: ModelParams) -> ConvergenceReport:
    """Check column norms and empirical moments at finite-size tolerances.

    Norms must lie within 5/sqrt(m) of 1; empirical second moments within
    five standard errors of their model targets.
    """
    col_norms = np.linalg.norm(instance.a, axis=0)
    norm_tol = 5.0 / np.sqrt(instance.m)
    min_norm, max_norm = float(col_norms.min()), float(col_norms.max())
    norms_pass = (1.0 - norm_tol) <= min_norm and max_norm <= (1.0 + norm_tol)

    prior = params.prior
    x2 = float(np.mean(instance.x0**2))
    x2_target = prior.second_moment
    var_x2 = max(prior.fourth_moment - x2_target**2, 0.0)
    x2_tol = 5.0 * np.sqrt(var_x2 / instance.n)
    signal_pass = abs(x2 - x2_target) <= x2_tol

    w2 = float(np.mean(instance.w**2))
    var_w2 = 2.0 * params.sigma2**2
    w2_tol = 5.0 * np.sqrt(var_w2 / instance.m)
    noise_pass = abs(w2 - params.sigma2) <= w2_tol

    return ConvergenceReport(
        min_col_norm=min_norm, max_col_norm=max_norm, norm_tol=norm_tol,
        norms_pass=norms_pass,
        signal_second_moment=x2, signal_target=x2_target, signal_tol=x2_tol,
        signal_pass=signal_pass,
        noise_variance=w2, noise_target=params.sigma2, noise_tol=w2_tol,
        noise_pass=noise_pass,
    )


_LAYOUT = ("a", "x0", "w", "y")


def save_instance(instance: Instance, stem: str | Path) -> tuple[Path, Path]:
    """Write ``<stem>.json`` (header) and ``<stem>.bin`` (flat float64 payload).

    The payload is little-endian float64: A in row-major order, then x0, w,
    and y, so any implementation can replay the exact instance.
    """
    stem = Path(stem)
    header = {
        "m": instance.m, "n": instance.n, "delta": instance.delta,
        "sigma2": instance.sigma2, "seed": instance.seed,
        "layout": list(_LAYOUT), "dtype": "<f8", "order": "C",
    }
    json_path = stem.with_suffix(".json")
    bin_path = stem.with_suffix(".bin")
    json_path.write_text(json.dumps(header, indent=2) + "\n")
    payload = np.concatenate([
        np.ascontiguousarray(instance.a, dtype="<f8").ravel(),
        instance.x0.astype("<f8"), instance.w.astype("<f8"),
        instance.y.astype("<f8"),
    ])
    payload.tofile(bin_path)
    return json_path, bin_path


def load_instance(stem: str | Path) -> Instance:
    """Read an instance bundle written by :func:`save_instance`."""
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text())
    m, n = int(header["m"]), int(header["n"])
    flat = np.fromfile(stem.with_suffix(".bin"), dtype="<f8")
    expected = m * n + n + 2 * m
    if flat.size != expected:
        raise ValueError(f"payload has {flat.size} values, expected {expected}")
    a = flat[: m * n].reshape(m, n).astype(float)
    x0 = flat[m * n: m * n + n].astype(float)
    w = flat[m * n + n: m * n + n + m].astype(float)
    y = flat[m * n + n + m:].astype(float)
    return Instance(a=a, x0=x0, w=w, y=y, m=m, n=n,
                    delta=float(header["delta"]), sigma2=float(header["sigma2"]),
                    seed=int(header["seed"]))
