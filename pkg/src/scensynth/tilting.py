"""Entropic tilting of a weighted sample to percentile constraints.

Scores are indicators ``1{y <= threshold_k}`` and the targets are the
required probabilities, so a spec ``{(t_k, m_k)}`` asks the tilted
distribution to have ``P(y <= t_k) = m_k``. The KL-closest reweighting has
weights proportional to ``w_i * exp(tau . s(y_i))``; ``tau`` solves the
moment equations by damped Newton-Raphson.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, DomainError, InfeasibleSpecError
from .sampling import WeightedSample, normalize_log

RESIDUAL_TOL = 1e-8
MAX_ITER = 200
MAX_HALVINGS = 30


@dataclass(frozen=True)
class ScoreSpec:
    """Percentile constraints ``P(y <= thresholds[k]) = targets[k]``."""

    thresholds: tuple
    targets: tuple

    def __post_init__(self):
        thresholds = tuple(float(t) for t in self.thresholds)
        targets = tuple(float(m) for m in self.targets)
        if len(thresholds) == 0 or len(thresholds) != len(targets):
            raise DomainError("thresholds and targets must be non-empty and of equal length")
        if not all(np.isfinite(thresholds)):
            raise DomainError("thresholds must be finite")
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise DomainError("thresholds must be strictly increasing")
        if any(b <= a for a, b in zip(targets, targets[1:])):
            raise DomainError("targets must be strictly increasing")
        if any(not 0.0 < m < 1.0 for m in targets):
            raise DomainError("targets must lie strictly inside (0, 1)")
        object.__setattr__(self, "thresholds", thresholds)
        object.__setattr__(self, "targets", targets)

    @classmethod
    def from_percentiles(cls, points: Sequence) -> "ScoreSpec":
        """Build from ``PercentilePoint``-like objects or ``(prob, value)`` pairs."""
        pairs = [(pt.prob, pt.value) if hasattr(pt, "prob") else tuple(pt) for pt in points]
        pairs.sort()
        return cls(tuple(v for _, v in pairs), tuple(p for p, _ in pairs))

    @property
    def size(self) -> int:
        return len(self.thresholds)

    def scores(self, y) -> np.ndarray:
        """Indicator score matrix of shape ``(len(y), q)``."""
        y = np.asarray(y, dtype=float)
        return (y[:, None] <= np.asarray(self.thresholds)[None, :]).astype(float)


@dataclass
class TiltingSolution:
    tau: np.ndarray
    converged: bool
    iterations: int
    et_ess_percent: float
    constraint_residual: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _tilted(weights, scores, tau):
    with np.errstate(divide="ignore"):
        log_w = np.log(weights) + scores @ tau
    return normalize_log(log_w)


def _dual(log_w, scores, targets, tau):
    """Convex dual ``log sum w exp(tau . s) - tau . m`` and the tilted weights.

    Its gradient is the constraint residual and its Hessian the tilted
    covariance of the scores, so Newton on the residual is Newton on this.
    """
    z = log_w + scores @ tau
    top = np.max(z)
    e = np.exp(z - top)
    total = e.sum()
    return float(top + np.log(total) - tau @ targets), e / total


def check_feasible(baseline: WeightedSample, spec: ScoreSpec) -> None:
    """Raise unless every indicator bin carries at least ``1/n`` baseline mass.

    Each bin (below the first threshold, between consecutive thresholds,
    above the last) must hold some mass for the tilted bin masses
    ``m_1, m_2 - m_1, ..., 1 - m_q`` to be reachable.
    """
    edges = np.asarray(spec.thresholds)
    bins = np.searchsorted(edges, baseline.points, side="left")
    mass = np.bincount(bins, weights=baseline.weights, minlength=edges.size + 1)
    slack = 1.0 / baseline.n
    empty = np.flatnonzero(mass < slack)
    if empty.size:
        labels = []
        for b in empty:
            lo = "-inf" if b == 0 else f"{edges[b - 1]:g}"
            hi = "+inf" if b == edges.size else f"{edges[b]:g}"
            labels.append(f"({lo}, {hi}]")
        raise InfeasibleSpecError(
            "baseline sample has (almost) no mass in " + ", ".join(labels)
            + "; the targets cannot be reached by reweighting"
        )


def solve_tilt(
    baseline: WeightedSample,
    spec: ScoreSpec,
    tau0=None,
    tol: float = RESIDUAL_TOL,
    max_iter: int = MAX_ITER,
) -> TiltingSolution:
    """Find the tilting vector matching ``spec`` on the ``baseline`` sample.

    Newton steps use the tilted covariance of the scores as Jacobian. A step
    is halved (up to 30 times) until it gives sufficient decrease of the
    convex dual objective, whose gradient is the residual.
    """
    check_feasible(baseline, spec)
    scores = spec.scores(baseline.points)
    targets = np.asarray(spec.targets)
    w = baseline.weights
    with np.errstate(divide="ignore"):
        log_w = np.log(w)
    tau = np.zeros(spec.size) if tau0 is None else np.array(tau0, dtype=float)

    f, u = _dual(log_w, scores, targets, tau)
    r = u @ scores - targets
    norm = np.linalg.norm(r)
    it = 0
    while norm > tol and it < max_iter:
        it += 1
        mean = u @ scores
        jac = (scores * u[:, None]).T @ scores - np.outer(mean, mean)
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        slope = float(r @ step)
        if not slope < 0:
            # Ill-conditioned Jacobian: fall back to steepest descent.
            step, slope = -r, -float(r @ r)
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = tau + t * step
            f_new, u_new = _dual(log_w, scores, targets, cand)
            r_new = u_new @ scores - targets
            norm_new = np.linalg.norm(r_new)
            if f_new <= f + 1e-4 * t * slope:
                break
            # Near the solution the dual is flat to rounding; use the residual.
            if abs(f_new - f) <= 1e-13 * max(1.0, abs(f)) and norm_new < norm:
                break
            t *= 0.5
        else:
            raise ConvergenceError(
                f"Newton step halving exhausted after {it} iterations "
                f"(residual norm {norm:.3e})",
                best=tau,
            )
        tau, f, u, r, norm = cand, f_new, u_new, r_new, norm_new
    if norm > tol:
        raise ConvergenceError(
            f"tilting did not converge in {max_iter} iterations (residual norm {norm:.3e})",
            best=tau,
        )
    return TiltingSolution(
        tau=tau,
        converged=True,
        iterations=it,
        et_ess_percent=_relative_ess(w, u),
        constraint_residual=r,
    )


def _relative_ess(base_weights, tilted_weights) -> float:
    """ESS (percent) of the tilt ratio used as importance weights on the base.

    For a uniformly weighted base this is ``100 / (n * sum(u**2))``.
    """
    mask = base_weights > 0
    ratio = tilted_weights[mask] / base_weights[mask]
    num = float(np.dot(base_weights[mask], ratio)) ** 2
    den = float(np.dot(base_weights[mask], ratio * ratio))
    return 100.0 * num / den


def et_weights(baseline: WeightedSample, spec: ScoreSpec, tau) -> WeightedSample:
    """Baseline weights tilted by ``exp(tau . s(y))`` and renormalized."""
    tau = np.asarray(tau, dtype=float)
    return WeightedSample(baseline.points, _tilted(baseline.weights, spec.scores(baseline.points), tau))


def tilt_factors(points, spec: ScoreSpec, tau) -> np.ndarray:
    """Normalized ET weights ``u_i`` on arbitrary points (uniform base)."""
    scores = spec.scores(points)
    return normalize_log(scores @ np.asarray(tau, dtype=float))


def compound_weights(w0: WeightedSample, u: WeightedSample) -> WeightedSample:
    """Elementwise product of two weight systems on the same points."""
    if w0.n != u.n or not np.array_equal(w0.points, u.points):
        raise DomainError("compound weights need identical point lists")
    return WeightedSample.from_unnormalized(w0.points, w0.weights * u.weights)


def closed_form_tilt(baseline: WeightedSample, spec: ScoreSpec) -> np.ndarray:
    """Tilting vector from bin-mass ratios.

    With nested indicator scores the tilted law rescales each bin between
    consecutive thresholds to its target mass, so ``tau`` follows from log
    ratios of target to baseline bin masses. Useful as an independent check
    on :func:`solve_tilt`.
    """
    check_feasible(baseline, spec)
    edges = np.asarray(spec.thresholds)
    bins = np.searchsorted(edges, baseline.points, side="left")
    mass = np.bincount(bins, weights=baseline.weights, minlength=edges.size + 1)
    targets = np.asarray(spec.targets)
    target_mass = np.diff(np.concatenate([[0.0], targets, [1.0]]))
    # Bin b receives factor exp(sum_{k >= b} tau_k); the top bin gets 1.
    log_factor = np.log(target_mass / mass)
    log_factor -= log_factor[-1]
    return log_factor[:-1] - log_factor[1:]
