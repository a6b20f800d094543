"""Diagnostics relating EMR to Kullback-Leibler divergence and ESS.

``emr_lower_bound`` gives ``1/(1 + exp(kappa))`` where ``kappa`` is the
smaller of the two directed KL divergences between reference and mixture.
The linear approximation ``(2 - k)/4`` to ``1/(1 + exp(k))`` and a Gaussian
location-shift study calibrate what a given EMR value means.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate, special, stats

from .errors import DomainError
from .sampling import ess_percent_of
from .synthesis import ScenarioWeightMatrix, pairwise_emr

log = logging.getLogger(__name__)

LINEAR_CAP = 0.0068
LINEAR_RANGE = 0.5


class KLEstimates(NamedTuple):
    """Monte Carlo KL estimates over the shared reference sample.

    ``kl_pf`` is KL(reference || mixture), ``kl_fp`` is KL(mixture ||
    reference) and ``kappa`` their minimum. ``kl_pf`` is ``inf`` when the
    mixture drops a point the reference keeps.
    """

    kl_pf: float
    kl_fp: float
    kappa: float

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.kl_pf) and np.isfinite(self.kl_fp))


def _discrete_kl(p, q) -> float:
    """``sum p log(p/q)`` over ``p > 0``; ``inf`` if ``q`` vanishes there."""
    mask = p > 0
    if np.any(q[mask] <= 0):
        return float("inf")
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def kl_estimates(W: ScenarioWeightMatrix, alpha) -> KLEstimates:
    """Both directed KL divergences between the reference and ``f(y|alpha)``.

    The reference and the mixture are both represented by weights on the
    reference sample, so each divergence is a discrete KL between the two
    weight vectors (hence nonnegative, and exactly zero when they agree).
    """
    ref = W.reference_weights
    mix = W.mixture(alpha)
    kl_pf = _discrete_kl(ref, mix)
    kl_fp = _discrete_kl(mix, ref)
    if not np.isfinite(kl_pf):
        log.warning("mixture assigns zero weight where the reference does not; KL(p||f) is infinite")
    return KLEstimates(kl_pf, kl_fp, min(kl_pf, kl_fp))


def emr_lower_bound(kappa: float) -> float:
    """``1 / (1 + exp(kappa))``, a lower bound on EMR for KL ``kappa >= 0``."""
    kappa = float(kappa)
    if not kappa >= 0:
        raise DomainError(f"kappa must be nonnegative, got {kappa}")
    return float(special.expit(-kappa))


@dataclass
class LinearBoundReport:
    k: np.ndarray
    exact: np.ndarray
    linear: np.ndarray
    # True where the bound direction for the sign of k holds.
    direction_ok: np.ndarray
    max_abs_error_near_zero: float
    cap_ok: bool

    @property
    def holds(self) -> bool:
        return bool(np.all(self.direction_ok) and self.cap_ok)


def linear_bound_check(k_samples: Sequence[float]) -> LinearBoundReport:
    """Compare ``1/(1 + e^k)`` with its tangent line ``(2 - k)/4``.

    The tangent is a lower bound for ``k >= 0`` and an upper bound for
    ``k <= 0``; on ``|k| <= 0.5`` the gap stays below 0.0068.
    """
    k = np.asarray(k_samples, dtype=float)
    if not np.all(np.isfinite(k)):
        raise DomainError("k samples must be finite")
    exact = special.expit(-k)
    linear = (2.0 - k) / 4.0
    gap = exact - linear
    # Allow rounding noise at k = 0 where both sides equal 1/2.
    tol = 1e-15
    direction_ok = np.where(k >= 0, gap >= -tol, gap <= tol)
    near = np.abs(k) <= LINEAR_RANGE
    max_err = float(np.max(np.abs(gap[near]))) if np.any(near) else 0.0
    return LinearBoundReport(k, exact, linear, direction_ok, max_err, max_err < LINEAR_CAP)


@dataclass
class ShiftRow:
    a: float
    emr: float
    ess_percent: float
    kl: float
    bound: float


def gaussian_shift_study(a_grid: Sequence[float], n: int = 1_000_000, seed: int = 0) -> list[ShiftRow]:
    """EMR and ESS of ``N(a, 1)`` against ``N(0, 1)`` by importance sampling.

    One standard normal sample is shared across the grid (common random
    numbers), weighted by ``w_i ∝ exp(a y_i - a^2/2)``.
    """
    if n < 100_000:
        raise DomainError(f"the shift study needs n >= 1e5, got {n}")
    a_grid = [float(a) for a in a_grid]
    if any(not (np.isfinite(a) and a >= 0) for a in a_grid):
        raise DomainError("shifts must be finite and nonnegative")
    y = np.random.default_rng(seed).standard_normal(n)
    uniform = np.full(n, 1.0 / n)
    rows = []
    for a in a_grid:
        log_w = a * y
        w = np.exp(log_w - log_w.max())
        w /= w.sum()
        kl = 0.5 * a * a
        # sum w/(1 + n w) is the pairwise EMR against uniform weights.
        rows.append(ShiftRow(a, pairwise_emr(w, uniform), ess_percent_of(w), kl, emr_lower_bound(kl)))
    return rows


def gaussian_shift_emr_exact(a: float) -> float:
    """Quadrature value of ``∫ φ(y) φ(y-a) / (φ(y) + φ(y-a)) dy``."""
    a = float(a)

    def integrand(y):
        return stats.norm.pdf(y) * special.expit(a * y - 0.5 * a * a)

    value, _ = integrate.quad(integrand, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12)
    return float(value)
