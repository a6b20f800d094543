import numpy as np
import pytest
from scipy import stats

from scensynth import distributions as dist
from scensynth.fixtures import BASELINE_2007, BASELINE_2018, BASELINE_DOF, get_fixture
from scensynth.pipeline import run
from scensynth.synthesis import ScenarioWeightMatrix


def gaussian_matrix(means, sds=None, n=20_000, seed=0):
    """Reference N(0, 1) sample with columns reweighted to N(mean_j, sd_j).

    Column weights are normalized density ratios computed directly with
    scipy, independent of the package's importance-weight helpers.
    """
    sds = np.ones(len(means)) if sds is None else np.asarray(sds, dtype=float)
    y = np.random.default_rng(seed).standard_normal(n)
    cols = []
    for m, s in zip(means, sds):
        lw = stats.norm.logpdf(y, m, s) - stats.norm.logpdf(y)
        w = np.exp(lw - lw.max())
        cols.append(w / w.sum())
    return ScenarioWeightMatrix(y, np.column_stack(cols))


@pytest.fixture(scope="session")
def small_W():
    return gaussian_matrix([0.1, -0.8, 0.6, 1.2], sds=[1.1, 0.9, 1.0, 1.3])


@pytest.fixture(scope="session")
def baseline_2007():
    points = [dist.PercentilePoint(p, v) for p, v in BASELINE_2007]
    return dist.fit_to_percentiles(points, fixed_dof=BASELINE_DOF)


@pytest.fixture(scope="session")
def baseline_2018():
    points = [dist.PercentilePoint(p, v) for p, v in BASELINE_2018]
    return dist.fit_to_percentiles(points, fixed_dof=BASELINE_DOF)


_RUNS = {}


def case_study(name):
    """Full n = 1e6 run of a case-study fixture, computed once per session."""
    if name not in _RUNS:
        _RUNS[name] = run(get_fixture(name))
    return _RUNS[name]


@pytest.fixture(scope="session")
def run_2007_p50():
    return case_study("tb2007-nyfed-p50")


@pytest.fixture(scope="session")
def run_2007_p3():
    return case_study("tb2007-nyfed-p3")


@pytest.fixture(scope="session")
def run_2018_nyfed():
    return case_study("tb2018-nyfed-p50")


@pytest.fixture(scope="session")
def run_2018_tealbook():
    return case_study("tb2018-tealbook-p50")
