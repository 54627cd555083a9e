"""Bias-corrected l1-constrained quadratic solver for noisy covariates.

Fitting a linear model on covariates observed through additive noise biases
the ordinary Gram matrix upward by the noise covariance.  The corrected
moments

    gamma_mat = Z^T Z / m - Sigma_w        (d x d, symmetrized)
    gamma_vec = Z^T Y / m                  (length d)

are unbiased estimates of the clean second moments, and the coefficients
are recovered by minimizing

    0.5 * theta^T gamma_mat theta - <gamma_vec, theta>  (+ lambda_n ||theta||_1)

either over the l1 ball of a given radius (constrained mode, projected
gradient descent) or with the l1 penalty (Lagrangian mode, proximal
gradient), both with step size 1 / ||gamma_mat||_2.  The correction can
make gamma_mat indefinite; gradient descent from zero still converges to a
stationary point, and for statistically sized radii all such points carry
equivalent estimation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mechanisms import PrivateDataset

_SPECTRAL_ITERS = 200
_SPECTRAL_SLACK = 1.01
_ABS_OBJECTIVE_FLOOR = 1e-14
_STAGNATION_TOL = 1e-12
_TIE_BREAK_EPS = 1e-8


class SolverDivergenceError(RuntimeError):
    """The iteration produced a non-finite objective.

    Carries the last finite iterate as ``last_iterate``; possible for an
    indefinite quadratic in unguarded Lagrangian mode.
    """

    def __init__(self, message: str, last_iterate: np.ndarray):
        super().__init__(message)
        self.last_iterate = last_iterate


@dataclass(frozen=True)
class CorrectedMoments:
    """The pair (gamma_mat, gamma_vec) plus the sample count behind it.

    gamma_mat is exactly symmetric (symmetrized at construction) and may be
    indefinite; no positive-semidefiniteness is assumed anywhere.
    """

    gamma_mat: np.ndarray
    gamma_vec: np.ndarray
    m: int

    def __post_init__(self):
        gm = np.array(self.gamma_mat, dtype=np.float64)
        gv = np.array(self.gamma_vec, dtype=np.float64)
        if gm.ndim != 2 or gm.shape[0] != gm.shape[1]:
            raise ValueError("gamma_mat must be square")
        if gv.ndim != 1 or gv.shape[0] != gm.shape[0]:
            raise ValueError("gamma_vec length must match gamma_mat")
        if not np.all(np.isfinite(gm)) or not np.all(np.isfinite(gv)):
            raise ValueError("moments contain non-finite entries")
        if self.m < 1:
            raise ValueError("sample count must be >= 1")
        gm = 0.5 * (gm + gm.T)
        gm.setflags(write=False)
        gv.setflags(write=False)
        object.__setattr__(self, "gamma_mat", gm)
        object.__setattr__(self, "gamma_vec", gv)

    @property
    def dim(self) -> int:
        return self.gamma_vec.shape[0]


def moments_from_arrays(x, y, noise_variance: float = 0.0) -> CorrectedMoments:
    """Build (Z^T Z / m - noise_variance * I, Z^T Y / m) from raw arrays."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0] or x.shape[0] < 1:
        raise ValueError("need an (m, d) matrix and a length-m response vector")
    m = x.shape[0]
    gm = x.T @ x / m - noise_variance * np.eye(x.shape[1])
    gv = x.T @ y / m
    return CorrectedMoments(gm, gv, m)


def corrected_moments(pds: PrivateDataset) -> CorrectedMoments:
    """Noise-corrected moments of a privatized survey."""
    return moments_from_arrays(pds.z, pds.y, pds.noise_variance)


def soft_threshold(v, level: float) -> np.ndarray:
    """Per-coordinate shrinkage sign(v_i) * max(|v_i| - level, 0)."""
    if level < 0:
        raise ValueError("threshold level must be non-negative")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - level, 0.0)


def project_l1(v, radius: float) -> np.ndarray:
    """Euclidean projection of v onto the l1 ball of the given radius.

    Sort-based exact algorithm: the projection equals the soft threshold of
    v at the level theta solving sum_i max(|v_i| - theta, 0) = radius, and
    theta is found in closed form from the sorted absolute values.  Returns
    v unchanged when it is already feasible.
    """
    if not (radius > 0):
        raise ValueError("radius must be positive")
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("v must be a vector")
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, v.shape[0] + 1)
    rho = np.max(np.nonzero(u * k > css - radius)[0])
    level = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - level, 0.0)


def spectral_bound(gamma_mat) -> float:
    """Upper bound on the spectral norm of a symmetric matrix.

    Power iteration on gamma_mat^T gamma_mat with a fixed 200 iterations
    from the normalized all-ones start vector; the converged estimate is
    inflated by a factor 1.01.  Returns exactly 0 for the zero matrix.

    The all-ones start can cancel exactly against the dominant eigenspace
    (e.g. [[1, -1], [-1, 1]]), so the estimate is cross-checked against the
    largest column 2-norm, a certified lower bound on the spectral norm;
    if the iteration demonstrably misconverged, the smaller of the
    Frobenius norm and the maximum absolute row sum is returned instead -
    a looser but always valid upper bound.
    """
    g = np.asarray(gamma_mat, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("matrix must be square")
    if not np.any(g):
        return 0.0
    b = g.T @ g
    v = np.ones(g.shape[0]) / math.sqrt(g.shape[0])
    est = 0.0
    for _ in range(_SPECTRAL_ITERS):
        w = b @ v
        n = np.linalg.norm(w)
        if n == 0.0:
            break
        v = w / n
    else:
        est = math.sqrt(np.linalg.norm(b @ v)) * _SPECTRAL_SLACK
    max_col_norm = math.sqrt(float(np.max(np.sum(g * g, axis=0))))
    if est < max_col_norm:
        return min(float(np.linalg.norm(g)), float(np.max(np.sum(np.abs(g), axis=1))))
    return est


@dataclass(frozen=True)
class SolverConfig:
    """Optimization mode and iteration controls.

    mode "constrained" minimizes over ||theta||_1 <= radius; mode
    "lagrangian" adds lambda_n * ||theta||_1 to the objective instead, with
    ``radius`` acting as an optional feasibility guard (projection after
    every step) when set.  ``lambda_n=None`` in Lagrangian mode selects the
    default rule c_pen * sqrt(ln d / m).  ``step=None`` selects the automatic
    step 1 / spectral_bound(gamma_mat).  ``tol`` measures relative objective
    change, with an absolute floor of 1e-14 for near-zero objectives.
    """

    mode: str = "constrained"
    radius: float | None = None
    lambda_n: float | None = None
    max_iter: int = 10000
    tol: float = 1e-9
    step: float | None = None
    c_pen: float = 1.0

    def __post_init__(self):
        if self.mode not in ("constrained", "lagrangian"):
            raise ValueError(f"unknown solver mode {self.mode!r}")
        if self.mode == "constrained":
            if self.radius is None or not self.radius > 0:
                raise ValueError("constrained mode requires a positive radius")
        else:
            if self.lambda_n is not None and self.lambda_n < 0:
                raise ValueError("lambda_n must be non-negative")
            if self.radius is not None and not self.radius > 0:
                raise ValueError("radius guard must be positive when given")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.step is not None and not self.step > 0:
            raise ValueError("fixed step must be positive")


@dataclass(frozen=True)
class SolveResult:
    theta_hat: np.ndarray
    iterations: int
    final_objective: float
    converged: bool
    step_size_used: float


def objective(moments: CorrectedMoments, theta, lambda_n: float = 0.0) -> float:
    """0.5 theta^T gamma_mat theta - <gamma_vec, theta> + lambda_n ||theta||_1."""
    if lambda_n < 0:
        raise ValueError("lambda_n must be non-negative")
    t = np.asarray(theta, dtype=np.float64)
    if t.shape != moments.gamma_vec.shape:
        raise ValueError("theta dimension does not match moments")
    quad = 0.5 * float(t @ (moments.gamma_mat @ t)) - float(moments.gamma_vec @ t)
    return quad + lambda_n * float(np.sum(np.abs(t)))


def _resolve_lambda(config: SolverConfig, moments: CorrectedMoments) -> float:
    if config.lambda_n is not None:
        return config.lambda_n
    d = moments.dim
    return config.c_pen * math.sqrt(math.log(d) / moments.m) if d > 1 else 0.0


def solve(
    moments: CorrectedMoments, config: SolverConfig, trace: list | None = None
) -> SolveResult:
    """Minimize the corrected quadratic by projected/proximal gradient.

    Constrained mode iterates theta <- project_l1(theta - eta * grad, radius)
    from theta_0 = 0 with eta = 1 / max(spectral_bound, 1e-12); Lagrangian
    mode replaces the projection with the soft-threshold proximal map at
    level eta * lambda_n (plus the radius-guard projection when configured).
    Stops when the relative objective change drops below tol, or - the
    absolute fallback for near-zero objectives - when the objective change
    is below 1e-14 AND the iterate has stopped moving (the stagnation guard
    keeps the fallback from firing while the iterate is still escaping the
    quadratically flat neighbourhood of a saddle).  Reports which via
    ``converged``; max_iter bounds the iteration either way.

    Tie-breaking on the measure-zero symmetric case: when the gradient at
    zero vanishes exactly and the corrected matrix has a negative diagonal
    entry, the start is perturbed by +1e-8 on the most negative diagonal
    coordinate so the iteration escapes the maximizer deterministically.

    When ``trace`` is a list, the objective value after every iteration is
    appended to it.
    """
    d = moments.dim
    gm, gv = moments.gamma_mat, moments.gamma_vec
    lam = _resolve_lambda(config, moments) if config.mode == "lagrangian" else 0.0
    if config.step is not None:
        eta = config.step
    else:
        eta = 1.0 / max(spectral_bound(gm), 1e-12)

    theta = np.zeros(d)
    diag = np.diag(gm)
    if not np.any(gv) and np.min(diag) < 0:
        theta = theta.copy()
        theta[int(np.argmin(diag))] = _TIE_BREAK_EPS

    obj = objective(moments, theta, lam)
    iterations = 0
    converged = False
    # Divergence (possible for indefinite quadratics in unguarded Lagrangian
    # mode) is detected from the non-finite objective, so numpy's transient
    # overflow warnings on that path carry no extra information.
    with np.errstate(over="ignore", invalid="ignore"):
        for iterations in range(1, config.max_iter + 1):
            grad = gm @ theta - gv
            cand = theta - eta * grad
            if config.mode == "constrained":
                new = project_l1(cand, config.radius)
            else:
                new = soft_threshold(cand, eta * lam)
                if config.radius is not None and np.sum(np.abs(new)) > config.radius:
                    new = project_l1(new, config.radius)
            new_obj = objective(moments, new, lam)
            if not math.isfinite(new_obj):
                raise SolverDivergenceError(
                    f"objective became non-finite at iteration {iterations}", theta
                )
            delta = abs(new_obj - obj)
            move = float(np.max(np.abs(new - theta)))
            theta, obj = new, new_obj
            if trace is not None:
                trace.append(obj)
            if delta < config.tol * abs(obj):
                converged = True
                break
            if delta < _ABS_OBJECTIVE_FLOOR and move < _STAGNATION_TOL * max(
                1.0, float(np.max(np.abs(theta)))
            ):
                converged = True
                break

    return SolveResult(
        theta_hat=theta,
        iterations=iterations,
        final_objective=obj,
        converged=converged,
        step_size_used=eta,
    )
