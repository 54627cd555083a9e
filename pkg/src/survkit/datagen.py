"""Synthetic benchmark generators, CSV round-tripping, and bound clipping.

Two synthetic families drive the benchmark harness:

* family 1 - standard-normal covariates with near-zero dense coefficients
  for the survey and mean-mu coefficients for the reference population;
  sweeping mu moves the model distance between the two fits.
* family 2 - sparse coefficients (drawn from Unif(1, 10) with probability
  1/sqrt(d), else 0) with covariate noise of matched variance injected from
  either a Gaussian or a Laplace distribution, for light-vs-heavy-tail
  comparisons.  Both kinds transform one shared uniform block, so runs with
  equal RngSpec are paired across kinds.

Distribution parameters follow the convention that the second argument of a
normal law is its VARIANCE.  Generated data is clipped to a 4-sigma
envelope and the clip counts logged, so the declared bounds hold honestly
before any privatization.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from .core import Dataset, ModelBounds, RngSpec, validate_dataset
from .mechanisms import NoiseKind, NoiseSpec, PrivacyParams, Accounting, PrivateDataset
from .tester import ValidationSource

log = logging.getLogger(__name__)

# Sub-stream tags (0 = privatization noise, 1 = validation draws).
_DATA_TAG = 2
_COVARIATE_NOISE_TAG = 3

# Family-1 distribution parameters (second argument = variance).
_REG_NOISE_VAR_1 = 0.1
_COEFF_VAR_1 = 0.01
# Family-2 parameters: unit-variance regression and covariate noise.
_REG_NOISE_VAR_2 = 1.0
_ENVELOPE_SIGMAS = 4.0
_U_EPS = 2.0**-53


class CsvFormatError(ValueError):
    """Malformed dataset file; the message carries the row/column location."""


@dataclass(frozen=True)
class ClipReport:
    covariate_clips: tuple[int, ...]
    response_clips: int

    @property
    def total(self) -> int:
        return sum(self.covariate_clips) + self.response_clips


class LinearModelSource(ValidationSource):
    """Fresh draws (x, <theta, x> + noise) from a fixed linear model.

    Covariates are standard normal ("normal") or uniform on
    [-scale, scale] ("uniform"); the regression noise is centered normal
    with the given variance.
    """

    def __init__(self, theta, noise_var: float, covariate: str = "normal", scale: float = 1.0):
        self.theta = np.asarray(theta, dtype=np.float64)
        if self.theta.ndim != 1:
            raise ValueError("theta must be a vector")
        if noise_var < 0 or scale <= 0:
            raise ValueError("noise_var must be >= 0 and scale > 0")
        if covariate not in ("normal", "uniform"):
            raise ValueError(f"unknown covariate kind {covariate!r}")
        self.noise_var = float(noise_var)
        self.covariate = covariate
        self.scale = float(scale)

    def draw(self, n: int, gen: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        d = self.theta.shape[0]
        if self.covariate == "normal":
            x = gen.normal(scale=self.scale, size=(n, d))
        else:
            x = gen.uniform(-self.scale, self.scale, size=(n, d))
        y = x @ self.theta + gen.normal(scale=math.sqrt(self.noise_var), size=n)
        return x, y

    def spec_dict(self) -> dict:
        return {
            "type": "linear-model",
            "theta": [float(v) for v in self.theta],
            "noise_var": self.noise_var,
            "covariate": self.covariate,
            "scale": self.scale,
        }


def source_from_spec(spec: dict) -> LinearModelSource:
    if spec.get("type") != "linear-model":
        raise ValueError(f"unknown validation generator type {spec.get('type')!r}")
    return LinearModelSource(
        np.asarray(spec["theta"], dtype=np.float64),
        float(spec["noise_var"]),
        spec.get("covariate", "normal"),
        float(spec.get("scale", 1.0)),
    )


@dataclass(frozen=True)
class GeneratorSpec:
    """Declarative description of a synthetic data source.

    kind "synthetic1" uses ``mu``; "synthetic2" uses ``noise_kind``;
    "linear-custom" uses ``custom`` (a :class:`LinearModelSource` giving the
    coefficients, covariate law, and regression noise).  ``generate()``
    dispatches to the matching generator and returns its native tuple
    (see :func:`gen_synthetic1` / :func:`gen_synthetic2`); for
    "linear-custom" it returns a plain validated Dataset.
    """

    kind: str
    d: int
    m: int
    rng: RngSpec
    mu: float = 0.0
    noise_kind: NoiseKind = NoiseKind.GAUSSIAN
    custom: "LinearModelSource | None" = None

    def __post_init__(self):
        if self.kind not in ("synthetic1", "synthetic2", "linear-custom"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.d < 1 or self.m < 1:
            raise ValueError("need d >= 1 and m >= 1")
        if self.kind == "linear-custom" and self.custom is None:
            raise ValueError("linear-custom requires a LinearModelSource")

    def generate(self):
        if self.kind == "synthetic1":
            return gen_synthetic1(self.d, self.m, self.mu, self.rng)
        if self.kind == "synthetic2":
            return gen_synthetic2(self.d, self.m, self.noise_kind, self.rng)
        x, y = self.custom.draw(self.m, self.rng.derive(_DATA_TAG))
        zeta = max(float(np.max(np.abs(x))), 1e-12)
        tau = max(float(np.max(np.abs(y))), 1e-12)
        radius = 1.1 * max(1.0, float(np.sum(np.abs(self.custom.theta))))
        ds = Dataset(x, y, ModelBounds(zeta, tau, radius))
        validate_dataset(ds)
        return ds


def clip_to_bounds(ds: Dataset, zeta: float, tau: float) -> tuple[Dataset, ClipReport]:
    """Clamp covariates to [-zeta, zeta] and responses to [-tau, tau].

    Returns the clipped dataset (validated, with radius carried over) and
    per-column clamp counts.  Idempotent.
    """
    if zeta <= 0 or tau <= 0:
        raise ValueError("zeta and tau must be positive")
    x = np.clip(ds.x, -zeta, zeta)
    y = np.clip(ds.y, -tau, tau)
    cov = tuple(int(c) for c in np.count_nonzero(x != ds.x, axis=0))
    resp = int(np.count_nonzero(y != ds.y))
    out = Dataset(x, y, ModelBounds(zeta, tau, ds.bounds.radius))
    validate_dataset(out)
    return out, ClipReport(cov, resp)


def sparse_coefficients(d: int, gen: np.random.Generator) -> np.ndarray:
    """Sparse coefficient vector: Unif(1, 10) with probability 1/sqrt(d),
    else 0.  Redraws the all-zero outcome so the vector is never empty."""
    while True:
        mask = gen.random(d) < 1.0 / math.sqrt(d)
        vals = gen.uniform(1.0, 10.0, size=d)
        if mask.any():
            return np.where(mask, vals, 0.0)


def _envelope_bounds(theta: np.ndarray, reg_noise_var: float) -> tuple[float, float, float]:
    zeta = _ENVELOPE_SIGMAS
    y_sigma = math.sqrt(float(theta @ theta) + reg_noise_var)
    tau = _ENVELOPE_SIGMAS * y_sigma
    return zeta, tau, y_sigma


def gen_synthetic1(
    d: int, m_survey: int, mu: float, rng: RngSpec
) -> tuple[Dataset, np.ndarray, np.ndarray, LinearModelSource]:
    """Family-1 generator: (survey, theta_s, theta_star, star_sampler).

    Survey covariates are i.i.d. standard normal, regression noise has
    variance 0.1, the survey coefficients theta_s have i.i.d. N(0, 0.01)
    coordinates and the reference coefficients theta_star i.i.d.
    N(mu, 0.01) coordinates.  The returned sampler draws fresh rows from
    the theta_star model.
    """
    if d < 1 or m_survey < 1:
        raise ValueError("need d >= 1 and m_survey >= 1")
    gen = rng.derive(_DATA_TAG)
    theta_s = gen.normal(0.0, math.sqrt(_COEFF_VAR_1), size=d)
    theta_star = gen.normal(mu, math.sqrt(_COEFF_VAR_1), size=d)
    x = gen.normal(size=(m_survey, d))
    y = x @ theta_s + gen.normal(0.0, math.sqrt(_REG_NOISE_VAR_1), size=m_survey)
    zeta, tau, _ = _envelope_bounds(theta_s, _REG_NOISE_VAR_1)
    radius = max(1.0, 1.5 * float(np.sum(np.abs(theta_s))))
    raw = Dataset(x, y, ModelBounds(zeta, tau, radius))
    survey, clips = clip_to_bounds(raw, zeta, tau)
    if clips.total:
        log.info("family-1 generator clipped %d cells to the 4-sigma envelope", clips.total)
    sampler = LinearModelSource(theta_star, _REG_NOISE_VAR_1)
    return survey, theta_s, theta_star, sampler


def gen_synthetic2(
    d: int, m: int, noise_kind: NoiseKind, rng: RngSpec
) -> tuple[Dataset, PrivateDataset, np.ndarray]:
    """Family-2 generator: (clean, noisy, theta_star).

    Standard-normal covariates, unit-variance regression noise, sparse
    coefficients.  Covariate noise is per-coordinate N(0, 1) (Gaussian
    kind) or Laplace(0, 1/sqrt(2)) (Laplace kind) - equal variance 1 - and
    both kinds are inverse-CDF transforms of one shared uniform block, so
    the two noisy versions of the same RngSpec are coupled.
    """
    if d < 1 or m < 1:
        raise ValueError("need d >= 1 and m >= 1")
    if not isinstance(noise_kind, NoiseKind):
        raise ValueError(f"noise_kind must be a NoiseKind, got {noise_kind!r}")
    gen = rng.derive(_DATA_TAG)
    theta_star = sparse_coefficients(d, gen)
    x = gen.normal(size=(m, d))
    y = x @ theta_star + gen.normal(0.0, math.sqrt(_REG_NOISE_VAR_2), size=m)
    zeta, tau, _ = _envelope_bounds(theta_star, _REG_NOISE_VAR_2)
    radius = 1.1 * max(1.0, float(np.sum(np.abs(theta_star))))
    clean, clips = clip_to_bounds(Dataset(x, y, ModelBounds(zeta, tau, radius)), zeta, tau)
    if clips.total:
        log.info("family-2 generator clipped %d cells to the 4-sigma envelope", clips.total)

    u = rng.derive(_COVARIATE_NOISE_TAG).random(size=(m, d))
    u = np.clip(u, _U_EPS, 1.0 - _U_EPS)
    if noise_kind is NoiseKind.GAUSSIAN:
        w = ndtri(u)
        spec = NoiseSpec(NoiseKind.GAUSSIAN, 1.0)
    else:
        scale = 1.0 / math.sqrt(2.0)
        w = -scale * np.sign(u - 0.5) * np.log1p(-2.0 * np.abs(u - 0.5))
        spec = NoiseSpec(NoiseKind.LAPLACE, scale)
    noisy = PrivateDataset(
        z=clean.x + w,
        y=clean.y,
        noise_variance=1.0,
        noise=spec,
        privacy=None,
        rng=rng,
    )
    return clean, noisy, theta_star


# ---------------------------------------------------------------------------
# File formats

def _float_str(v: float) -> str:
    return repr(float(v))


def save_csv(ds: Dataset, path) -> None:
    """Write the dataset with header x1,...,xd,y; exact round-trip floats."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(ds.dim)] + ["y"])
        for i in range(ds.size):
            writer.writerow([_float_str(v) for v in ds.x[i]] + [_float_str(ds.y[i])])


def load_csv(path, bounds: ModelBounds | None = None) -> Dataset:
    """Read a dataset written by :func:`save_csv`.

    When no bounds are supplied, the envelope of the data itself is
    declared (with radius 1.0 as a placeholder), so validation passes
    trivially; pass explicit bounds for anything privacy-related.
    """
    path = Path(path)
    rows: list[list[float]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        d = len(header) - 1
        expected = [f"x{i + 1}" for i in range(d)] + ["y"]
        if d < 1 or header != expected:
            raise CsvFormatError(
                f"{path}: header must be x1,...,xd,y; got {','.join(header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if len(row) != d + 1:
                raise CsvFormatError(
                    f"{path}:{lineno}: expected {d + 1} fields, got {len(row)}"
                )
            parsed = []
            for col, cell in enumerate(row):
                try:
                    value = float(cell)
                except ValueError:
                    raise CsvFormatError(
                        f"{path}:{lineno}: column {col + 1}: not a number: {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise CsvFormatError(
                        f"{path}:{lineno}: column {col + 1}: non-finite value: {cell!r}"
                    )
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=np.float64)
    x, y = arr[:, :-1], arr[:, -1]
    if bounds is None:
        zeta = max(float(np.max(np.abs(x))), 1e-12)
        tau = max(float(np.max(np.abs(y))), 1e-12)
        bounds = ModelBounds(zeta, tau, 1.0)
    return Dataset(x, y, bounds)


def sidecar_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_suffix(".meta.json") if p.suffix == ".csv" else Path(str(p) + ".meta.json")


def save_private(pds: PrivateDataset, path) -> tuple[Path, Path]:
    """Write a private bundle: the noisy CSV plus a JSON sidecar recording
    the noise specification, the noise covariance diagonal, and provenance.
    Returns (csv_path, sidecar_path)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(pds.dim)] + ["y"])
        for i in range(pds.size):
            writer.writerow([_float_str(v) for v in pds.z[i]] + [_float_str(pds.y[i])])
    meta = {
        "noise_kind": pds.noise.kind.value,
        "noise_scale": pds.noise.scale,
        "per_coordinate_variance": pds.noise.per_coordinate_variance,
        "sigma_w_diagonal": pds.noise_variance,
        "m": pds.size,
        "d": pds.dim,
        "alpha": pds.privacy.alpha if pds.privacy else None,
        "beta": pds.privacy.beta if pds.privacy else None,
        "accounting": pds.privacy.accounting.value if pds.privacy else None,
        "seed": pds.rng.seed if pds.rng else None,
        "stream": pds.rng.stream if pds.rng else None,
    }
    side = sidecar_path(path)
    side.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path, side


def load_private(path) -> PrivateDataset:
    """Read a private bundle written by :func:`save_private`."""
    path = Path(path)
    side = sidecar_path(path)
    if not side.exists():
        raise CsvFormatError(f"{path}: missing sidecar {side}")
    meta = json.loads(side.read_text(encoding="utf-8"))
    ds = load_csv(path)
    privacy = None
    if meta.get("alpha") is not None:
        privacy = PrivacyParams(
            alpha=float(meta["alpha"]),
            beta=float(meta["beta"]),
            accounting=Accounting(meta["accounting"]),
        )
    rng = None
    if meta.get("seed") is not None:
        rng = RngSpec(int(meta["seed"]), int(meta.get("stream", 0)))
    return PrivateDataset(
        z=ds.x,
        y=ds.y,
        noise_variance=float(meta["sigma_w_diagonal"]),
        noise=NoiseSpec(NoiseKind(meta["noise_kind"]), float(meta["noise_scale"])),
        privacy=privacy,
        rng=rng,
    )
