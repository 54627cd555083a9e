"""Domain types and the shared regression primitives.

A survey is an ordered collection of (covariate vector, response) rows with
declared envelope bounds: per-coordinate covariate bound ``zeta``, response
bound ``tau``, and an l1 bound ``radius`` on admissible coefficient vectors.
Everything downstream (noise calibration, the constrained solver, the
credibility test thresholds) is expressed in terms of these three numbers,
so they are validated hard at construction time and non-finite values are
rejected everywhere.

All types here are immutable after construction (arrays are marked
read-only) and safe to share across workers; the one exception is the
``validated`` flag on :class:`Dataset`, which `validate_dataset` may set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def _as_float_array(values, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class ModelBounds:
    """Envelope bounds: |x_i| <= zeta, |y| <= tau, ||theta||_1 <= radius."""

    zeta: float
    tau: float
    radius: float

    def __post_init__(self):
        for name in ("zeta", "tau", "radius"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite real, got {v}")


@dataclass(frozen=True)
class DataPoint:
    """One survey row: covariate vector x and scalar response y."""

    x: tuple[float, ...]
    y: float

    def __post_init__(self):
        if len(self.x) < 1:
            raise ValueError("covariate vector must have dimension >= 1")
        if not all(np.isfinite(v) for v in self.x) or not np.isfinite(self.y):
            raise ValueError("data point contains non-finite entries")


@dataclass(frozen=True)
class RngSpec:
    """Deterministic randomness root: a 64-bit seed plus a sub-stream index.

    Identical (seed, stream) pairs reproduce identical draws bit-for-bit
    across runs.  Operations that consume randomness derive child generators
    via :meth:`derive` with small fixed integer tags, so independent
    consumers of the same spec never collide.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be an unsigned 64-bit integer")
        if int(self.stream) < 0:
            raise ValueError("stream index must be non-negative")

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream),))
        )

    def derive(self, *indices: int) -> np.random.Generator:
        """Child generator for the sub-stream (seed, stream, *indices)."""
        key = (int(self.stream),) + tuple(int(i) for i in indices)
        return np.random.default_rng(
            np.random.SeedSequence(entropy=int(self.seed), spawn_key=key)
        )


class Dataset:
    """Survey data: an m x d covariate matrix and a length-m response vector.

    Rows are stored row-major with responses in a parallel array.  The
    ``validated`` flag is False at construction and is set by
    :func:`validate_dataset` when every entry satisfies the declared bounds.
    """

    __slots__ = ("x", "y", "bounds", "_validated")

    def __init__(self, x, y, bounds: ModelBounds):
        x = _as_float_array(x, "covariates", 2)
        y = _as_float_array(y, "responses", 1)
        if x.shape[0] != y.shape[0]:
            raise ValueError(
                f"row count mismatch: {x.shape[0]} covariate rows, {y.shape[0]} responses"
            )
        if x.shape[0] < 1:
            raise ValueError("dataset must contain at least one row")
        if x.shape[1] < 1:
            raise ValueError("dataset dimension must be >= 1")
        x = x.copy()
        y = y.copy()
        x.setflags(write=False)
        y.setflags(write=False)
        self.x = x
        self.y = y
        self.bounds = bounds
        self._validated = False

    @classmethod
    def from_points(cls, points: Sequence[DataPoint], bounds: ModelBounds) -> "Dataset":
        if not points:
            raise ValueError("dataset must contain at least one row")
        x = np.array([p.x for p in points], dtype=np.float64)
        y = np.array([p.y for p in points], dtype=np.float64)
        return cls(x, y, bounds)

    @property
    def size(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def validated(self) -> bool:
        return self._validated

    def point(self, i: int) -> DataPoint:
        return DataPoint(tuple(self.x[i]), float(self.y[i]))

    def __repr__(self) -> str:
        return (
            f"Dataset(m={self.size}, d={self.dim}, bounds={self.bounds}, "
            f"validated={self._validated})"
        )


@dataclass(frozen=True)
class ValidationReport:
    """Bound violations found by :func:`validate_dataset`.

    ``violations`` holds (row, column) pairs; columns 0..d-1 are covariate
    coordinates and column d denotes the response.
    """

    violations: tuple[tuple[int, int], ...]
    dim: int

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def covariate_violations(self) -> tuple[tuple[int, int], ...]:
        return tuple(v for v in self.violations if v[1] < self.dim)

    @property
    def response_violations(self) -> tuple[int, ...]:
        return tuple(r for r, c in self.violations if c == self.dim)


def validate_dataset(ds: Dataset) -> ValidationReport:
    """Check every entry of ``ds`` against its declared bounds.

    Lists every (row, column) with |x_ij| > zeta, and every (row, d) with
    |y_i| > tau.  Sets the dataset's ``validated`` flag iff there are no
    violations; otherwise leaves it untouched.  Idempotent.
    """
    b = ds.bounds
    rows, cols = np.nonzero(np.abs(ds.x) > b.zeta)
    bad = [(int(r), int(c)) for r, c in zip(rows, cols)]
    bad += [(int(r), ds.dim) for r in np.nonzero(np.abs(ds.y) > b.tau)[0]]
    bad.sort()
    report = ValidationReport(tuple(bad), ds.dim)
    if report.ok:
        ds._validated = True
    return report


def predict(theta, x):
    """Inner-product prediction <theta, x>.

    ``x`` may be a single covariate vector (returns a float) or an (n, d)
    matrix of covariate rows (returns a length-n array).
    """
    theta = _as_float_array(theta, "theta", 1)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != theta.shape[0]:
            raise ValueError(
                f"dimension mismatch: theta has {theta.shape[0]}, x has {x.shape[0]}"
            )
        return float(x @ theta)
    if x.ndim == 2:
        if x.shape[1] != theta.shape[0]:
            raise ValueError(
                f"dimension mismatch: theta has {theta.shape[0]}, x has {x.shape[1]}"
            )
        return x @ theta
    raise ValueError("x must be a vector or a matrix of rows")


def mean_squared_loss(theta, x, y) -> float:
    """Mean of (<theta, x_i> - y_i)^2 over the given rows."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] != y.shape[0] or x.shape[0] < 1:
        raise ValueError("x and y must hold the same positive number of rows")
    r = x @ np.asarray(theta, dtype=np.float64) - y
    return float(np.mean(r * r))


def empirical_loss(theta, ds: Dataset) -> float:
    """Mean squared residual of the linear model theta on the dataset."""
    return mean_squared_loss(theta, ds.x, ds.y)


def model_distance(theta_a, theta_b, xs) -> float:
    """Root-mean-square prediction gap between two linear models.

    Empirical estimate, over the covariate rows ``xs``, of the l2 distance
    between the functions <theta_a, .> and <theta_b, .>:
    sqrt(mean_i <theta_a - theta_b, x_i>^2).  It is a norm of the coefficient
    difference pushed through the fixed design, hence symmetric and
    triangle-inequality compliant for fixed xs.
    """
    theta_a = _as_float_array(theta_a, "theta_a", 1)
    theta_b = _as_float_array(theta_b, "theta_b", 1)
    if theta_a.shape != theta_b.shape:
        raise ValueError("coefficient vectors must have equal dimension")
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[0] < 1:
        raise ValueError("xs must be a non-empty matrix of covariate rows")
    if xs.shape[1] != theta_a.shape[0]:
        raise ValueError("covariate dimension does not match coefficients")
    g = xs @ (theta_a - theta_b)
    return float(np.sqrt(np.mean(g * g)))
