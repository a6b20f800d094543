from fractions import Fraction
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scensynth import distributions as dist
from scensynth.backstop import BACKSTOP_LEVELS, backstop_scenario, build_backstop_spec, round_half_up
from scensynth.errors import ConstructionError, DomainError
from scensynth.sampling import WeightedSample, ess_percent, weighted_percentile
from scensynth.tilting import ScoreSpec

# Published tilted (P15, P50, P85) rows for scenarios 1-6.
TRIPLES_2007_P50 = [
    (-0.1, 0.9, 2.3),
    (-1.0, -0.4, 2.0),
    (0.3, 1.7, 2.7),
    (0.4, 1.9, 2.9),
    (0.0, 1.2, 2.5),
    (0.2, 1.6, 2.6),
]
TRIPLES_2018_P50 = [
    (-1.0, -0.6, 3.1),
    (1.4, 3.1, 4.4),
    (0.7, 1.5, 3.4),
    (0.8, 1.6, 3.5),
]
TRIPLES_2007_P3 = [
    (-0.2, 1.0, 2.2),
    (-1.5, -0.3, 0.9),
    (0.5, 1.7, 2.9),
    (0.7, 1.9, 3.1),
    (0.0, 1.2, 2.4),
    (0.4, 1.6, 2.8),
]


def _half_up_oracle(x, digits):
    # Exact rational arithmetic on the shortest decimal string of x.
    q = Fraction(repr(x)) * 10**digits
    return math.floor(q + Fraction(1, 2)) / 10**digits


def _thresholds(triples, digits=None):
    return tuple(build_backstop_spec(triples, digits).thresholds)


# -- thresholds -----------------------------------------------------------------

def test_thresholds_2007_median_only():
    np.testing.assert_allclose(_thresholds(TRIPLES_2007_P50), (-1.0, 1.4, 2.9), atol=1e-12)


def test_thresholds_2007_three_percentile():
    assert _thresholds(TRIPLES_2007_P3, 1) == (-1.5, 1.4, 3.1)


def test_thresholds_2018_even_median_rounds_half_up():
    # Central P50s are 1.5 and 1.6; the midpoint prints as 1.6.
    np.testing.assert_allclose(_thresholds(TRIPLES_2018_P50), (-1.0, 1.55, 4.4), atol=1e-12)
    assert _thresholds(TRIPLES_2018_P50, 1) == (-1.0, 1.6, 4.4)


def test_single_triple_is_identity():
    assert _thresholds([(-0.3, 0.4, 1.9)]) == (-0.3, 0.4, 1.9)


def test_targets_are_backstop_levels():
    assert build_backstop_spec(TRIPLES_2007_P50).targets == BACKSTOP_LEVELS


def test_odd_count_median():
    assert _thresholds([(0, 1, 2), (0, 5, 6), (0, 3, 4)])[1] == 3.0


@pytest.mark.parametrize("bad", [[(0.0, 0.0, 1.0)], [(1.0, 0.5, 2.0)], [], [(1.0, 2.0)]])
def test_invalid_triples(bad):
    with pytest.raises(DomainError):
        build_backstop_spec(bad)


def test_degenerate_thresholds_after_rounding():
    with pytest.raises(ConstructionError):
        build_backstop_spec([(0.01, 0.02, 0.03)], digits=1)


triple_st = st.tuples(
    st.floats(-5, 5), st.floats(0.01, 3), st.floats(0.01, 3)
).map(lambda t: (t[0], t[0] + t[1], t[0] + t[1] + t[2]))


@given(st.lists(triple_st, min_size=1, max_size=12))
def test_envelope_widens(triples):
    lo, mid, hi = _thresholds(triples)
    arr = np.asarray(triples)
    assert lo <= arr[:, 0].min() and hi >= arr[:, 2].max()
    assert arr[:, 1].min() <= mid <= arr[:, 1].max()


# -- rounding -------------------------------------------------------------------

@pytest.mark.parametrize(
    "x, expected", [(-1.55, -1.5), (0.95, 1.0), (-0.35, -0.3), (1.55, 1.6), (1.45, 1.5), (-0.05, 0.0), (2.0, 2.0)]
)
def test_round_half_up_examples(x, expected):
    assert round_half_up(x, 1) == expected


@given(x=st.floats(-1e4, 1e4), digits=st.integers(0, 4))
def test_round_half_up_matches_rational_oracle(x, digits):
    assert round_half_up(x, digits) == pytest.approx(_half_up_oracle(x, digits), abs=1e-12)


# -- tilting to the backstop ---------------------------------------------------------

@pytest.fixture(scope="module")
def base07_sample(baseline_2007):
    return WeightedSample.uniform(dist.sample(baseline_2007, 1_000_000, seed=71))


@pytest.fixture(scope="module")
def base18_sample(baseline_2018):
    return WeightedSample.uniform(dist.sample(baseline_2018, 1_000_000, seed=72))


def test_backstop_et_ess_2007(base07_sample):
    sol, _ = backstop_scenario(base07_sample, build_backstop_spec(TRIPLES_2007_P50))
    assert sol.et_ess_percent == pytest.approx(56.4, abs=2.0)


def test_backstop_et_ess_2018(base18_sample):
    sol, _ = backstop_scenario(base18_sample, build_backstop_spec(TRIPLES_2018_P50, 1))
    assert sol.et_ess_percent == pytest.approx(2.1, abs=0.5)


def test_backstop_constraints_met(base07_sample):
    spec = build_backstop_spec(TRIPLES_2007_P50)
    _, tilted = backstop_scenario(base07_sample, spec)
    means = tilted.weights @ spec.scores(tilted.points)
    np.testing.assert_allclose(means, spec.targets, atol=1e-8)
    assert ess_percent(tilted) == pytest.approx(backstop_scenario(base07_sample, spec)[0].et_ess_percent)


def test_backstop_at_own_percentiles_needs_no_tilt(base07_sample):
    own = weighted_percentile(base07_sample, BACKSTOP_LEVELS)
    # Place thresholds midway between neighbouring draws so the indicator means are exact.
    pts = np.sort(base07_sample.points)
    idx = np.round(np.asarray(BACKSTOP_LEVELS) * pts.size).astype(int)
    mids = 0.5 * (pts[idx - 1] + pts[idx])
    np.testing.assert_allclose(mids, own, atol=1e-3)
    sol, _ = backstop_scenario(base07_sample, ScoreSpec(tuple(mids), BACKSTOP_LEVELS))
    assert np.max(np.abs(sol.tau)) < 1e-6


def test_backstop_in_case_study_runs(run_2007_p50, run_2018_nyfed, run_2007_p3):
    r07, _ = run_2007_p50
    r18, _ = run_2018_nyfed
    r3, _ = run_2007_p3
    assert r07.scenarios[-1].name == r18.scenarios[-1].name == "Backstop"
    assert r07.scenarios[-1].et_ess == pytest.approx(56.4, abs=2.0)
    assert r18.scenarios[-1].et_ess == pytest.approx(2.1, abs=0.5)
    assert r3.backstop_thresholds == [-1.5, 1.4, 3.1]
