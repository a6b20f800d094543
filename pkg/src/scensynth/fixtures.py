"""Embedded Tealbook case-study inputs.

GDP growth one year ahead, December 2007 and December 2018 Tealbooks, with
references from the NY Fed Outlook-at-Risk and the Tealbook time-varying
macroeconomic risk percentiles.

Notes on provenance:

* The December 2007 scenario medians average the 2008:H1 and 2008:H2
  values, and the averages are stored unrounded (e.g. 0.95 rather than the
  1.0 shown in summary tables). The ET ESS figures of the published
  results are reproduced with the unrounded values and not with the
  rounded ones.
* Baselines are skew-t fits with 50 degrees of freedom to the point
  forecast (median) and the ends of the 70% interval (P15, P85).
* NY Fed references use the published skew-t parameters directly.
* The Tealbook 2018 reference is refit to its five percentiles; the
  percentiles are the already-summed growth values (forecast-error
  percentiles plus the baseline forecast). Its published parameters are
  rounded too coarsely to reproduce the reported ESS figures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import distributions as dist
from .errors import DomainError
from .pipeline import DensitySpec, RunConfig, ScenarioSpec

BASELINE_DOF = 50.0

BASELINE_2007 = ((0.15, 0.1), (0.5, 1.3), (0.85, 2.5))
BASELINE_2018 = ((0.15, 1.2), (0.5, 2.4), (0.85, 3.9))

# Published skew-t parameters (location, scale, slant, dof).
NYFED_2007 = dist.SkewTParams(2.7, 2.2, -0.5, 3.4)
NYFED_2018 = dist.SkewTParams(2.5, 1.3, -0.3, 3.0)
TEALBOOK_2018 = dist.SkewTParams(2.1, 1.1, 0.5, 50.0)

# Five-point reference percentiles.
NYFED_2007_PERCENTILES = ((0.10, -1.7), (0.25, 0.2), (0.50, 1.8), (0.75, 3.3), (0.90, 4.8))
NYFED_2018_PERCENTILES = ((0.10, 0.0), (0.25, 1.1), (0.50, 2.1), (0.75, 3.0), (0.90, 4.0))
TEALBOOK_2018_PERCENTILES = ((0.05, 0.7), (0.15, 1.3), (0.50, 2.5), (0.85, 3.6), (0.95, 4.3))

# Scenarios with duplicated GDP point forecasts ("More room to grow",
# "Supply constraints", "Lower oil prices") are left out.
SCENARIOS_2007 = (
    ("Greater housing correction", 0.95),
    ("Credit crunch", -0.35),
    ("Stronger domestic demand", 1.7),
    ("Better export performance", 1.9),
    ("Greater cost pressure", 1.2),
    ("Market-based Fed Funds rate", 1.55),
)
SCENARIOS_2018 = (
    ("Financial-based recession", -0.7),
    ("Stronger supply side", 3.1),
    ("Greater interest rate sensitivity", 1.5),
    ("Foreign slowdown", 1.6),
)


@dataclass
class ShiftStudyConfig:
    """Inputs of the Gaussian location-shift calibration study."""

    a_grid: list = field(default_factory=lambda: [round(a, 2) for a in np.arange(0.0, 3.01, 0.1)])
    n: int = 1_000_000
    seed: int = 0
    name: str = "gaussian-shift-study"

    def to_dict(self) -> dict:
        return {"name": self.name, "a_grid": list(self.a_grid), "n": self.n, "seed": self.seed}


def _median_only(scenarios):
    return [ScenarioSpec(name, [(0.5, p50)]) for name, p50 in scenarios]


def _three_point(scenarios, baseline):
    """Scenario P15/P85 at the baseline's distances from its median."""
    p15, p50, p85 = (v for _, v in baseline)
    lower, upper = p50 - p15, p85 - p50
    return [
        ScenarioSpec(name, [(0.15, m - lower), (0.5, m), (0.85, m + upper)])
        for name, m in scenarios
    ]


def _baseline(points):
    return DensitySpec(percentiles=list(points), fixed_dof=BASELINE_DOF)


def _tb2007_nyfed_p50():
    return RunConfig(
        name="tb2007-nyfed-p50",
        reference=DensitySpec(params=NYFED_2007),
        baseline=_baseline(BASELINE_2007),
        scenarios=_median_only(SCENARIOS_2007),
    )


def _tb2007_nyfed_p3():
    return RunConfig(
        name="tb2007-nyfed-p3",
        reference=DensitySpec(params=NYFED_2007),
        baseline=_baseline(BASELINE_2007),
        scenarios=_three_point(SCENARIOS_2007, BASELINE_2007),
    )


def _tb2018_nyfed_p50():
    return RunConfig(
        name="tb2018-nyfed-p50",
        reference=DensitySpec(params=NYFED_2018),
        baseline=_baseline(BASELINE_2018),
        scenarios=_median_only(SCENARIOS_2018),
    )


def _tb2018_tealbook_p50():
    return RunConfig(
        name="tb2018-tealbook-p50",
        reference=DensitySpec(percentiles=list(TEALBOOK_2018_PERCENTILES)),
        baseline=_baseline(BASELINE_2018),
        scenarios=_median_only(SCENARIOS_2018),
    )


_FIXTURES = {
    "tb2007-nyfed-p50": _tb2007_nyfed_p50,
    "tb2007-nyfed-p3": _tb2007_nyfed_p3,
    "tb2018-nyfed-p50": _tb2018_nyfed_p50,
    "tb2018-tealbook-p50": _tb2018_tealbook_p50,
    "gaussian-shift-study": ShiftStudyConfig,
}


def list_fixtures() -> list[str]:
    return sorted(_FIXTURES)


def get_fixture(name: str):
    """A fresh ``RunConfig`` (or ``ShiftStudyConfig``) for fixture ``name``."""
    try:
        factory = _FIXTURES[name]
    except KeyError:
        raise DomainError(f"unknown fixture {name!r}; choose from {', '.join(list_fixtures())}") from None
    return factory()
