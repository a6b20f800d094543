"""Weighted Monte Carlo samples, importance weights and ESS diagnostics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import distributions as dist
from .errors import DegeneracyError, DomainError

DEFAULT_N = 1_000_000


@dataclass(frozen=True, eq=False)
class WeightedSample:
    """Support points with normalized probability weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if points.ndim != 1 or points.shape != weights.shape:
            raise DomainError("points and weights must be 1-d arrays of equal length")
        if points.size == 0:
            raise DomainError("a weighted sample needs at least one point")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise DomainError("weights must be finite and nonnegative")
        total = weights.sum()
        if not abs(total - 1.0) <= 1e-12:
            raise DomainError(f"weights must sum to 1, got {total!r}")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, points) -> "WeightedSample":
        points = np.asarray(points, dtype=float)
        return cls(points, np.full(points.size, 1.0 / points.size))

    @classmethod
    def from_unnormalized(cls, points, weights) -> "WeightedSample":
        return cls(points, normalize(weights))

    @property
    def n(self) -> int:
        return self.points.size

    def expect(self, values) -> float:
        return float(np.dot(self.weights, values))


def normalize(weights) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if not total > 0 or not np.isfinite(total):
        raise DegeneracyError("weights have zero or non-finite total mass")
    out = weights / total
    # One more pass pulls the sum to within an ulp or two of 1.
    return out / out.sum()


def normalize_log(log_weights) -> np.ndarray:
    """Normalize weights given on the log scale, shifting by the max first."""
    log_weights = np.asarray(log_weights, dtype=float)
    if np.any(np.isnan(log_weights)):
        raise DomainError("log weights contain NaN")
    top = np.max(log_weights)
    if not np.isfinite(top):
        raise DegeneracyError("all importance weights underflow to zero")
    return normalize(np.exp(log_weights - top))


def draw_reference(ref: dist.SkewTParams, n: int = DEFAULT_N, seed=None) -> WeightedSample:
    """Uniformly weighted i.i.d. sample from the reference density."""
    if n < 1000:
        raise DomainError(f"reference sample needs n >= 1000, got {n}")
    return WeightedSample.uniform(dist.sample(ref, n, seed))


def is_weights(
    sample: WeightedSample,
    target_logpdf: Callable[[np.ndarray], np.ndarray],
    proposal_logpdf: Callable[[np.ndarray], np.ndarray],
) -> WeightedSample:
    """Reweight ``sample`` from the proposal towards the target density.

    Each prior weight is multiplied by ``target / proposal``; the ratio is
    formed in log space. Raises :class:`DegeneracyError` when every weight
    but one underflows relative to the largest, i.e. the target puts no
    usable mass where the sample lives.
    """
    lt = np.asarray(target_logpdf(sample.points), dtype=float)
    lp = np.asarray(proposal_logpdf(sample.points), dtype=float)
    if np.any(~np.isfinite(lp)):
        raise DomainError("proposal log-density must be finite on every sample point")
    if np.any(np.isnan(lt)) or np.any(lt == np.inf):
        raise DomainError("target log-density must be finite or -inf")
    with np.errstate(divide="ignore"):
        log_prior = np.log(sample.weights)
    log_w = log_prior + lt - lp
    weights = normalize_log(log_w)
    # Relative underflow keeps the check invariant to constants in either
    # log-density: every weight but the largest vanishes at double precision.
    if sample.n > 1 and weights.max() >= 1.0 - np.finfo(float).eps:
        raise DegeneracyError("all importance weights but one underflow to zero")
    return WeightedSample(sample.points, weights)


def ess_percent(sample: WeightedSample) -> float:
    """Effective sample size as a percentage, ``100 / (n * sum(w**2))``."""
    w = sample.weights
    return float(100.0 / (w.size * np.dot(w, w)))


def ess_percent_of(weights) -> float:
    w = np.asarray(weights, dtype=float)
    return float(100.0 / (w.size * np.dot(w, w)))


def weighted_percentile(sample: WeightedSample, q):
    """Left-continuous inverse of the weighted empirical CDF.

    Returns the smallest point whose cumulative weight reaches ``q``.
    ``q`` may be a scalar or an array.
    """
    qs = np.asarray(q, dtype=float)
    if np.any(~np.isfinite(qs)) or np.any(qs <= 0) or np.any(qs >= 1):
        raise DomainError("percentile levels must lie strictly inside (0, 1)")
    order = np.argsort(sample.points, kind="stable")
    pts = sample.points[order]
    cum = np.cumsum(sample.weights[order])
    # Guard against the last partial sum falling a hair short of 1.
    cum[-1] = max(cum[-1], 1.0)
    idx = np.searchsorted(cum, qs, side="left")
    out = pts[np.minimum(idx, pts.size - 1)]
    return float(out) if out.ndim == 0 else out
