"""Local-DP publication of survey covariates via calibrated additive noise.

Each covariate coordinate receives one independent draw of Laplace noise
(pure alpha-LDP, beta = 0) or Gaussian noise (approximate (alpha, beta)-LDP,
beta > 0), calibrated from the declared covariate bound zeta through the
l1/l2 sensitivity of the identity release.  Responses are never perturbed.
The published bundle records the exact noise covariance that was added,
which the downstream solver subtracts out of the Gram matrix.

Sensitivity accounting comes in two flavours:

* ``per-coordinate`` - each coordinate is treated as its own release with
  sensitivity 2*zeta.  With beta = 0 this gives Laplace scale 2*zeta/alpha
  and per-coordinate variance 8*zeta^2/alpha^2.
* ``whole-record`` - one release of the full d-vector, so the l1 sensitivity
  is 2*zeta*d and the l2 sensitivity 2*zeta*sqrt(d).

Covariates outside [-zeta, zeta] are a hard error, never silently clipped:
silent clipping would invalidate the sensitivity computation without a
trace.  Explicit clipping lives in :mod:`survkit.datagen`.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import Dataset, RngSpec

# Sub-stream tag reserved for privatization noise (see RngSpec.derive).
_NOISE_TAG = 0


class Accounting(enum.Enum):
    """How the sensitivity of the covariate release is accounted."""

    PER_COORDINATE = "per-coord"
    WHOLE_RECORD = "whole-record"


class NoiseKind(enum.Enum):
    LAPLACE = "laplace"
    GAUSSIAN = "gaussian"


class GaussianVarianceFormula(enum.Enum):
    """Calibration rule for the Gaussian (beta > 0) branch.

    STANDARD is the default: sigma = Delta_2 * sqrt(2 ln(1.25/beta)) / alpha,
    the classical Gaussian-mechanism calibration.  The two variants are
    alternative published rules kept for reproduction studies only:
    ALPHA_LINEAR uses variance 8 zeta^2 ln(1.25/beta) / alpha (variance
    inversely linear in alpha), SQRT_LOG uses variance
    c * zeta * sqrt(ln(1/beta)) / alpha with a caller-supplied constant c.
    """

    STANDARD = "standard"
    ALPHA_LINEAR = "alpha-linear"
    SQRT_LOG = "sqrt-log"


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy budget alpha > 0 and failure probability beta in [0, 1).

    beta = 0 selects pure alpha-LDP (Laplace noise); beta > 0 selects
    (alpha, beta)-LDP (Gaussian noise).
    """

    alpha: float
    beta: float = 0.0
    accounting: Accounting = Accounting.PER_COORDINATE

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not (0 <= self.beta < 1):
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")


@dataclass(frozen=True)
class NoiseSpec:
    """A calibrated noise distribution: Laplace(0, scale) or N(0, scale^2).

    ``scale`` is the Laplace scale b or the Gaussian standard deviation
    sigma; the per-coordinate variance is 2 b^2 or sigma^2 respectively.
    A zero scale is permitted as a degenerate test mode.
    """

    kind: NoiseKind
    scale: float

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale >= 0):
            raise ValueError(f"noise scale must be non-negative, got {self.scale}")

    @property
    def per_coordinate_variance(self) -> float:
        if self.kind is NoiseKind.LAPLACE:
            return 2.0 * self.scale * self.scale
        return self.scale * self.scale


def l1_sensitivity(zeta: float, d: int, accounting: Accounting) -> float:
    """l1 sensitivity of releasing a covariate record bounded by zeta.

    One coordinate of the identity map on [-zeta, zeta] moves by at most
    2*zeta; a whole d-coordinate record by at most 2*zeta*d.
    """
    if not (zeta > 0):
        raise ValueError("zeta must be positive")
    if d < 1:
        raise ValueError("d must be >= 1")
    if accounting is Accounting.WHOLE_RECORD:
        return 2.0 * zeta * d
    return 2.0 * zeta


def l2_sensitivity(zeta: float, d: int, accounting: Accounting) -> float:
    """l2 sensitivity of the covariate release: 2*zeta or 2*zeta*sqrt(d)."""
    if not (zeta > 0):
        raise ValueError("zeta must be positive")
    if d < 1:
        raise ValueError("d must be >= 1")
    if accounting is Accounting.WHOLE_RECORD:
        return 2.0 * zeta * math.sqrt(d)
    return 2.0 * zeta


def make_noise_spec(
    params: PrivacyParams,
    zeta: float,
    d: int,
    formula: GaussianVarianceFormula = GaussianVarianceFormula.STANDARD,
    c: float = 1.0,
) -> NoiseSpec:
    """Calibrate the additive noise for the requested privacy level.

    beta = 0 -> Laplace with scale b = Delta_1 / alpha, so per-coordinate
    accounting gives b = 2*zeta/alpha and variance 8*zeta^2/alpha^2.
    beta > 0 -> Gaussian with sigma = Delta_2 * sqrt(2 ln(1.25/beta)) / alpha
    under the STANDARD formula (see :class:`GaussianVarianceFormula` for the
    reproduction-study variants, where ``c`` is the free constant of the
    SQRT_LOG rule).

    The classical Gaussian calibration is only proven for alpha <= 1; a
    warning (not an error) is emitted outside that region.
    """
    if params.beta == 0.0:
        b = l1_sensitivity(zeta, d, params.accounting) / params.alpha
        return NoiseSpec(NoiseKind.LAPLACE, b)
    if params.alpha > 1:
        warnings.warn(
            f"Gaussian mechanism calibration at alpha={params.alpha} > 1 is outside "
            "the classical validity region",
            RuntimeWarning,
            stacklevel=2,
        )
    if formula is GaussianVarianceFormula.STANDARD:
        delta2 = l2_sensitivity(zeta, d, params.accounting)
        sigma = delta2 * math.sqrt(2.0 * math.log(1.25 / params.beta)) / params.alpha
    elif formula is GaussianVarianceFormula.ALPHA_LINEAR:
        var = 8.0 * zeta * zeta * math.log(1.25 / params.beta) / params.alpha
        sigma = math.sqrt(var)
    else:  # SQRT_LOG
        var = c * zeta * math.sqrt(math.log(1.0 / params.beta)) / params.alpha
        sigma = math.sqrt(var)
    return NoiseSpec(NoiseKind.GAUSSIAN, sigma)


class PrivateDataset:
    """A privatized survey: noisy covariates Z, clear responses, and the
    exact covariance of the noise that was added.

    ``noise_variance`` is the per-coordinate variance; the full covariance
    is noise_variance * I_d (see :meth:`sigma_w`).  ``privacy`` is None when
    the noise was injected directly (synthetic benchmarks) rather than
    calibrated from a privacy budget.
    """

    __slots__ = ("z", "y", "noise_variance", "noise", "privacy", "rng")

    def __init__(
        self,
        z,
        y,
        noise_variance: float,
        noise: NoiseSpec,
        privacy: PrivacyParams | None,
        rng: RngSpec | None,
    ):
        z = np.array(z, dtype=np.float64)
        y = np.array(y, dtype=np.float64)
        if z.ndim != 2 or y.ndim != 1 or z.shape[0] != y.shape[0]:
            raise ValueError("z must be an (m, d) matrix with matching responses")
        if not np.all(np.isfinite(z)) or not np.all(np.isfinite(y)):
            raise ValueError("private dataset contains non-finite entries")
        if not (np.isfinite(noise_variance) and noise_variance >= 0):
            raise ValueError("noise variance must be non-negative")
        z.setflags(write=False)
        y.setflags(write=False)
        self.z = z
        self.y = y
        self.noise_variance = float(noise_variance)
        self.noise = noise
        self.privacy = privacy
        self.rng = rng

    @property
    def size(self) -> int:
        return self.z.shape[0]

    @property
    def dim(self) -> int:
        return self.z.shape[1]

    def sigma_w(self) -> np.ndarray:
        """The d x d covariance of the added noise (diagonal)."""
        return self.noise_variance * np.eye(self.dim)

    def __repr__(self) -> str:
        return (
            f"PrivateDataset(m={self.size}, d={self.dim}, "
            f"noise={self.noise.kind.value}, variance={self.noise_variance})"
        )


def privatize(
    ds: Dataset, spec: NoiseSpec, params: PrivacyParams | None, rng: RngSpec
) -> PrivateDataset:
    """Add one independent noise draw to every covariate coordinate.

    Requires a validated dataset (all |x_ij| <= zeta), since the calibration
    in ``spec`` is only meaningful for bounded covariates.  Responses are
    copied unchanged.  The noise matrix is filled in a canonical row-major
    order from the (seed, stream) sub-stream with tag 0, so the output is a
    pure function of (ds, spec, params, rng).
    """
    if not ds.validated:
        raise ValueError(
            "dataset must be validated against its declared bounds before privatization"
        )
    gen = rng.derive(_NOISE_TAG)
    shape = (ds.size, ds.dim)
    if spec.scale == 0.0:
        w = np.zeros(shape)
    elif spec.kind is NoiseKind.LAPLACE:
        w = gen.laplace(loc=0.0, scale=spec.scale, size=shape)
    else:
        w = gen.normal(loc=0.0, scale=spec.scale, size=shape)
    return PrivateDataset(
        z=ds.x + w,
        y=ds.y,
        noise_variance=spec.per_coordinate_variance,
        noise=spec,
        privacy=params,
        rng=rng,
    )
