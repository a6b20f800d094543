"""Synthetic over-dispersed backstop scenario.

The backstop's median is the median of the scenario medians; its 15th and
85th percentiles are the most extreme scenario 15th and 85th percentiles.
The baseline is then tilted to those three percentiles.
"""

from __future__ import annotations

from decimal import ROUND_FLOOR, Decimal
from typing import Sequence

import numpy as np

from .errors import ConstructionError, DomainError
from .sampling import WeightedSample
from .tilting import ScoreSpec, TiltingSolution, et_weights, solve_tilt

BACKSTOP_LEVELS = (0.15, 0.5, 0.85)


def round_half_up(x: float, digits: int) -> float:
    """Round to ``digits`` decimals with ties going towards +inf.

    Works on the shortest decimal representation of ``x``, so ``-1.55``
    rounds to ``-1.5`` and ``0.95`` to ``1.0`` as printed tables do.
    """
    step = Decimal(1).scaleb(-digits)
    d = Decimal(repr(float(x)))
    return float((d / step + Decimal("0.5")).to_integral_value(rounding=ROUND_FLOOR) * step)


def build_backstop_spec(
    scenario_percentiles: Sequence[Sequence[float]], digits: int | None = None
) -> ScoreSpec:
    """Backstop constraints from per-scenario ``(P15, P50, P85)`` triples.

    An even number of medians uses the midpoint of the two central values.
    With ``digits`` set, the triples and the resulting thresholds are rounded
    half-up to that many decimals.
    """
    triples = np.asarray(scenario_percentiles, dtype=float)
    if triples.ndim != 2 or triples.shape[1] != 3 or triples.shape[0] == 0:
        raise DomainError("expected a non-empty list of (P15, P50, P85) triples")
    if np.any(np.diff(triples, axis=1) <= 0):
        raise DomainError("each scenario triple must be strictly increasing")
    if digits is not None:
        triples = np.vectorize(lambda v: round_half_up(v, digits))(triples)
    thresholds = (triples[:, 0].min(), float(np.median(triples[:, 1])), triples[:, 2].max())
    if digits is not None:
        thresholds = tuple(round_half_up(t, digits) for t in thresholds)
    if not thresholds[0] < thresholds[1] < thresholds[2]:
        raise ConstructionError(f"backstop thresholds {thresholds} are not strictly increasing")
    return ScoreSpec(thresholds, BACKSTOP_LEVELS)


def backstop_scenario(baseline: WeightedSample, spec: ScoreSpec) -> tuple[TiltingSolution, WeightedSample]:
    """Tilt the baseline sample to the backstop percentiles."""
    sol = solve_tilt(baseline, spec)
    return sol, et_weights(baseline, spec, sol.tau)
