"""Credibility test: is a survey's fitted linear model close to optimal?

The test fits the l1-constrained model on the survey, upper-bounds its
population loss from the empirical loss plus explicit concentration terms,
then estimates the same model's loss on a small batch of fresh validation
draws from the reference distribution.  It REJECTS only when the validation
loss exceeds the survey-loss bound by more than kappa + tol in root scale:

    REJECT  iff  sqrt(gamma_d) > sqrt(gamma_s) + kappa + tol

The test is one-sided: it accepts unless it finds a certificate of
distance, so a survey whose validation loss happens to be small is always
accepted regardless of the true model distance.  For privately published
surveys, the coefficient-estimation error induced by the noise is absorbed
into the bound through an additive penalty term.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Dataset, ModelBounds, RngSpec, mean_squared_loss, validate_dataset
from .mechanisms import PrivacyParams, make_noise_spec, privatize
from .solver import SolverConfig, moments_from_arrays, corrected_moments, solve

# Sub-stream tag reserved for validation draws (privatization uses tag 0).
_VALIDATION_TAG = 1

_LAMBDA_MIN_FLOOR = 1e-6


class InsufficientValidationError(RuntimeError):
    """The validation source ran out before the required draw count."""


class LossBoundForm(enum.Enum):
    """Dimension factor in the middle term of the survey-loss bound."""

    LOG_D = "log-d"
    SQRT_D_PLUS_1 = "sqrt-d-plus-1"


@dataclass(frozen=True)
class TestConfig:
    """Decision parameters of the credibility test.

    kappa is the acceptance slack, tol the rejection tolerance (and the
    additive accuracy of the validation estimate), delta the confidence
    budget.  ``constants`` holds the named bound constants (all default
    1.0): "c2" scales the privacy penalties, "c_eps" is the declared
    regression-noise tail scale used by the pure-LDP penalty.
    """

    kappa: float
    tol: float
    delta: float
    bounds: ModelBounds
    loss_bound_form: LossBoundForm = LossBoundForm.LOG_D
    constants: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if not (0 < self.tol <= 1):
            raise ValueError("tol must lie in (0, 1]")
        if not (0 < self.delta <= 1):
            raise ValueError("delta must lie in (0, 1]")

    def constant(self, name: str) -> float:
        return float(self.constants.get(name, 1.0))


class ValidationSource:
    """Stateless supplier of i.i.d. draws from the reference distribution.

    ``draw(n, gen)`` returns an (n, d) covariate matrix and a length-n
    response vector, or raises :class:`InsufficientValidationError` if the
    source cannot supply n draws.  Randomness comes from the caller's
    generator, so repeated verification runs with equal RngSpec are
    bit-reproducible.
    """

    def draw(self, n: int, gen: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def available(self) -> int | float:
        """Number of draws this source can still supply (inf if unlimited)."""
        return math.inf


class PooledSource(ValidationSource):
    """Validation draws served front-to-back from a fixed pool of rows."""

    def __init__(self, x, y):
        self.x = np.asarray(x, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        if self.x.ndim != 2 or self.y.ndim != 1 or self.x.shape[0] != self.y.shape[0]:
            raise ValueError("pool must be an (n, d) matrix with matching responses")
        self._next = 0

    def available(self) -> int:
        return self.x.shape[0] - self._next

    def draw(self, n: int, gen: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        if n > self.available():
            raise InsufficientValidationError(
                f"validation pool has {self.available()} rows left, need {n}"
            )
        sl = slice(self._next, self._next + n)
        self._next += n
        return self.x[sl], self.y[sl]


class CallableSource(ValidationSource):
    """Unlimited source wrapping a function (n, gen) -> (X, Y)."""

    def __init__(self, fn: Callable[[int, np.random.Generator], tuple[np.ndarray, np.ndarray]]):
        self._fn = fn

    def draw(self, n: int, gen: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        return self._fn(n, gen)


class Decision(enum.Enum):
    ACCEPT = "ACCEPT"
    REJECT = "REJECT"


@dataclass(frozen=True)
class Verdict:
    """Test outcome with every intermediate quantity, for audit.

    margin = sqrt(gamma_d) - sqrt(gamma_s) - kappa - tol; the decision is
    REJECT exactly when margin > 0.  j_hat is zero in the public case.
    """

    decision: Decision
    t_used: int
    l_hat: float
    gamma_s: float
    gamma_d: float
    j_hat: float
    theta_hat: np.ndarray
    margin: float
    loss_bound_form: LossBoundForm
    constants: dict[str, float] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if (self.decision is Decision.REJECT) != (self.margin > 0):
            raise ValueError("decision must be REJECT exactly when margin > 0")

    @property
    def accepted(self) -> bool:
        return self.decision is Decision.ACCEPT


def validation_sample_size(tau: float, delta: float, tol: float) -> int:
    """Validation draws needed for a tol-accurate root-loss estimate:
    ceil(tau^2 ln(4/delta) / (2 tol^2))."""
    if tau <= 0 or not (0 < delta <= 1) or not (0 < tol <= 1):
        raise ValueError("need tau > 0, delta in (0, 1], tol in (0, 1]")
    return math.ceil(tau * tau * math.log(4.0 / delta) / (2.0 * tol * tol))


def survey_loss_bound(
    l_hat: float,
    m: int,
    d: int,
    bounds: ModelBounds,
    delta: float,
    form: LossBoundForm = LossBoundForm.LOG_D,
) -> float:
    """Upper confidence bound on the population loss of the survey fit.

    LOG_D form:   l_hat + 8 tau zeta R^2 sqrt(2 ln(2d)) / sqrt(m)
                        + 3 tau sqrt(ln(4/delta) / (2m))
    SQRT_D_PLUS_1 form replaces sqrt(2 ln(2d)) with sqrt(d + 1).
    """
    if l_hat < 0:
        raise ValueError("l_hat must be non-negative")
    if m < 1 or d < 1:
        raise ValueError("need m >= 1 and d >= 1")
    if not (0 < delta <= 1):
        raise ValueError("delta must lie in (0, 1]")
    tau, zeta, r = bounds.tau, bounds.zeta, bounds.radius
    if form is LossBoundForm.LOG_D:
        dim_factor = math.sqrt(2.0 * math.log(2.0 * d))
    else:
        dim_factor = math.sqrt(d + 1.0)
    mid = 8.0 * tau * zeta * r * r * dim_factor / math.sqrt(m)
    conf = 3.0 * tau * math.sqrt(math.log(4.0 / delta) / (2.0 * m))
    return l_hat + mid + conf


def privacy_penalty_gaussian(
    bounds: ModelBounds,
    alpha: float,
    beta: float,
    lambda_min: float,
    m: int,
    d: int,
    c2: float = 1.0,
) -> float:
    """Survey-loss penalty for Gaussian-noise publication.

    2 c2 zeta^3 / lambda_min * sqrt(ln(1/beta)) / alpha
    * (ln(1/beta)/alpha + 1) * R * sqrt(d ln d / m).
    Degenerates to 0 at d = 1 (ln d = 0), with a diagnostic warning.
    """
    if not (0 < beta < 1):
        raise ValueError("beta must lie in (0, 1)")
    if lambda_min <= 0 or m < 1 or d < 1:
        raise ValueError("need lambda_min > 0, m >= 1, d >= 1")
    if d == 1:
        warnings.warn(
            "privacy penalty is 0 at d = 1 because the ln d factor vanishes",
            RuntimeWarning,
            stacklevel=2,
        )
    lb = math.log(1.0 / beta)
    zeta, r = bounds.zeta, bounds.radius
    return (
        2.0 * c2 * zeta**3 / lambda_min
        * math.sqrt(lb) / alpha
        * (lb / alpha + 1.0)
        * r * math.sqrt(d * math.log(d) / m)
    )


def privacy_penalty_laplace(
    bounds: ModelBounds,
    alpha: float,
    c_eps: float,
    lambda_min: float,
    m: int,
    d: int,
    c2: float = 1.0,
) -> float:
    """Survey-loss penalty for Laplace-noise publication.

    c2 zeta / lambda_min * max(zeta/alpha, zeta^2, c_eps) * R
    * sqrt(d ln d / m).  Degenerates to 0 at d = 1, with a warning.
    """
    if lambda_min <= 0 or m < 1 or d < 1:
        raise ValueError("need lambda_min > 0, m >= 1, d >= 1")
    if d == 1:
        warnings.warn(
            "privacy penalty is 0 at d = 1 because the ln d factor vanishes",
            RuntimeWarning,
            stacklevel=2,
        )
    zeta, r = bounds.zeta, bounds.radius
    big_m = max(zeta / alpha, zeta * zeta, c_eps)
    return c2 * zeta / lambda_min * big_m * r * math.sqrt(d * math.log(d) / m)


def _check_survey(survey: Dataset, cfg: TestConfig) -> list[str]:
    b = cfg.bounds
    if np.any(np.abs(survey.x) > b.zeta) or np.any(np.abs(survey.y) > b.tau):
        raise ValueError("survey violates the configured bounds; validate or clip first")
    notes = []
    cap = b.tau / (b.zeta * math.sqrt(survey.dim + 1))
    if b.radius > cap:
        msg = (
            f"radius {b.radius:g} exceeds tau/(zeta*sqrt(d+1)) = {cap:g}; "
            "predictions may leave [-tau, tau] and the validation-accuracy "
            "guarantee degrades"
        )
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        notes.append(msg)
    return notes


def _fit(survey_moments, radius: float) -> np.ndarray:
    result = solve(survey_moments, SolverConfig(mode="constrained", radius=radius))
    return result.theta_hat


def _decide(
    gamma_s: float,
    gamma_d: float,
    cfg: TestConfig,
    t_used: int,
    l_hat: float,
    j_hat: float,
    theta_hat: np.ndarray,
    notes: list[str],
) -> Verdict:
    margin = math.sqrt(gamma_d) - math.sqrt(gamma_s) - cfg.kappa - cfg.tol
    decision = Decision.REJECT if margin > 0 else Decision.ACCEPT
    return Verdict(
        decision=decision,
        t_used=t_used,
        l_hat=l_hat,
        gamma_s=gamma_s,
        gamma_d=gamma_d,
        j_hat=j_hat,
        theta_hat=theta_hat,
        margin=margin,
        loss_bound_form=cfg.loss_bound_form,
        constants={"c2": cfg.constant("c2"), "c_eps": cfg.constant("c_eps")},
        notes=tuple(notes),
    )


def _draw_validation(
    source: ValidationSource, t: int, cfg: TestConfig, rng: RngSpec, notes: list[str]
) -> tuple[np.ndarray, np.ndarray]:
    if source.available() < t:
        raise InsufficientValidationError(
            f"validation source supplies {source.available()} draws, need {t}"
        )
    xv, yv = source.draw(t, rng.derive(_VALIDATION_TAG))
    over = int(np.count_nonzero(np.abs(yv) > cfg.bounds.tau))
    if over:
        msg = f"{over} of {t} validation responses exceed tau = {cfg.bounds.tau:g}"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        notes.append(msg)
    return xv, yv


def verify_survey(
    survey: Dataset, source: ValidationSource, cfg: TestConfig, rng: RngSpec
) -> Verdict:
    """Run the credibility test on a public (noise-free) survey.

    Fits the constrained model on the survey's clean moments, bounds its
    population loss, draws the validation batch, and applies the decision
    rule.  The verdict carries every intermediate quantity.
    """
    notes = _check_survey(survey, cfg)
    theta_hat = _fit(moments_from_arrays(survey.x, survey.y), cfg.bounds.radius)
    l_hat = mean_squared_loss(theta_hat, survey.x, survey.y)
    gamma_s = survey_loss_bound(
        l_hat, survey.size, survey.dim, cfg.bounds, cfg.delta, cfg.loss_bound_form
    )
    t = validation_sample_size(cfg.bounds.tau, cfg.delta, cfg.tol)
    xv, yv = _draw_validation(source, t, cfg, rng, notes)
    gamma_d = mean_squared_loss(theta_hat, xv, yv)
    return _decide(gamma_s, gamma_d, cfg, t, l_hat, 0.0, theta_hat, notes)


def verify_private_survey(
    survey: Dataset,
    source: ValidationSource,
    cfg: TestConfig,
    privacy: PrivacyParams,
    rng: RngSpec,
    lambda_min: float | None = None,
) -> Verdict:
    """Run the credibility test on a survey published under local DP.

    The survey is privatized, the model fitted on bias-corrected moments,
    and the empirical loss is computed on the privatized covariates (the
    only ones available after publication).  The survey-loss bound gains
    the privacy penalty matching the mechanism (Gaussian for beta > 0,
    Laplace for beta = 0).  Validation draws are used in the clear.

    lambda_min is the smallest eigenvalue of the clean covariate covariance;
    when not declared it is estimated from the corrected Gram matrix,
    floored at 1e-6, and the verdict notes the heuristic.
    """
    notes = _check_survey(survey, cfg)
    # Privatize against the configured bounds: _check_survey guarantees the
    # data satisfies them, so sensitivity is calibrated from cfg.bounds.zeta.
    to_publish = Dataset(survey.x, survey.y, cfg.bounds)
    validate_dataset(to_publish)
    spec = make_noise_spec(privacy, cfg.bounds.zeta, survey.dim)
    pds = privatize(to_publish, spec, privacy, rng)
    moments = corrected_moments(pds)
    theta_hat = _fit(moments, cfg.bounds.radius)
    l_hat = mean_squared_loss(theta_hat, pds.z, pds.y)

    if lambda_min is None:
        eig_floor = float(np.min(np.linalg.eigvalsh(moments.gamma_mat)))
        lambda_min = max(eig_floor, _LAMBDA_MIN_FLOOR)
        notes.append(
            f"lambda_min estimated from corrected moments as {lambda_min:g} "
            f"(floored at {_LAMBDA_MIN_FLOOR:g}); heuristic, not an observed quantity"
        )
    if privacy.beta > 0:
        j_hat = privacy_penalty_gaussian(
            cfg.bounds, privacy.alpha, privacy.beta, lambda_min,
            survey.size, survey.dim, cfg.constant("c2"),
        )
    else:
        j_hat = privacy_penalty_laplace(
            cfg.bounds, privacy.alpha, cfg.constant("c_eps"), lambda_min,
            survey.size, survey.dim, cfg.constant("c2"),
        )
    gamma_s = (
        survey_loss_bound(
            l_hat, survey.size, survey.dim, cfg.bounds, cfg.delta, cfg.loss_bound_form
        )
        + j_hat
    )
    t = validation_sample_size(cfg.bounds.tau, cfg.delta, cfg.tol)
    xv, yv = _draw_validation(source, t, cfg, rng, notes)
    gamma_d = mean_squared_loss(theta_hat, xv, yv)
    return _decide(gamma_s, gamma_d, cfg, t, l_hat, j_hat, theta_hat, notes)
