"""Acceptance criteria 1-7, one PASS/FAIL line each at the stated tolerances."""

import time

import numpy as np
import pytest

from scensynth import distributions as dist
from scensynth.fixtures import (
    NYFED_2007,
    NYFED_2007_PERCENTILES,
    NYFED_2018,
    NYFED_2018_PERCENTILES,
    TEALBOOK_2018,
    TEALBOOK_2018_PERCENTILES,
)
from scensynth.sampling import WeightedSample
from scensynth.synthesis import (
    ScenarioWeightMatrix,
    emr,
    emr_gradient,
    emr_hessian,
    optimize_map,
    optimize_mle,
    pairwise_emr,
)
from scensynth.theory import emr_lower_bound, gaussian_shift_study, linear_bound_check
from scensynth.tilting import ScoreSpec, et_weights, solve_tilt

from conftest import case_study, gaussian_matrix


class Criterion:
    """Collects named checks and prints one summary line."""

    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.checks = []

    def check(self, label, ok, detail=""):
        self.checks.append((label, bool(ok), detail))

    def within(self, label, value, expected, tol):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        dev = float(np.max(np.abs(value - np.asarray(expected, dtype=float))))
        self.check(label, dev <= tol, f"max|dev|={dev:.4g} (tol {tol})")

    def report(self, capsys):
        failed = [c for c in self.checks if not c[1]]
        status = "PASS" if not failed else "FAIL"
        detail = "; ".join(f"{label}: {d}" for label, _, d in (failed or self.checks))
        with capsys.disabled():
            print(f"\nCRITERION {self.number} {status} [{self.title}] {detail}")
        assert not failed, detail


# -- 1. median-only, December 2007 -----------------------------------------------------

def test_criterion_1_tb2007_median_only(capsys):
    c = Criterion(1, "TB2007 P50-only synthesis")
    start = time.perf_counter()
    report, state = case_study("tb2007-nyfed-p50")
    elapsed = time.perf_counter() - start
    col = report.scenario_column
    c.within("ET%", col("et_ess"), [100.0, 94.3, 28.7, 92.6, 84.3, 99.5, 97.1, 56.4], 2.0)
    c.within("IS%", col("is_ess"), [62.6, 57.4, 30.9, 65.4, 65.2, 61.3, 64.8, 67.2], 2.0)
    c.within("pi_j", col("emr"), [0.41, 0.40, 0.36, 0.42, 0.42, 0.41, 0.41, 0.43], 0.01)
    c.within("alpha*", col("alpha_map"), [0.27, 0.02, 0.08, 0.04, 0.27, 0.02, 0.03, 0.27], 0.03)
    c.within("EMR", state.result.emr_map, 0.43, 0.01)
    c.within("ESS", state.result.synthesis_ess, 71.2, 2.0)
    c.check("runtime", elapsed < 120.0, f"{elapsed:.1f}s")
    c.report(capsys)


# -- 2. December 2018, NY Fed reference ----------------------------------------------------

def test_criterion_2_tb2018_nyfed(capsys):
    c = Criterion(2, "TB2018 NY Fed reference")
    report, state = case_study("tb2018-nyfed-p50")
    c.within("alpha*_0", state.result.alpha_map[0], 0.64, 0.03)
    c.within("backstop ET%", report.scenarios[-1].et_ess, 2.1, 0.5)
    c.within("EMR", state.result.emr_map, 0.48, 0.01)
    c.report(capsys)


# -- 3. December 2018, Tealbook reference ---------------------------------------------------

def test_criterion_3_tb2018_tealbook(capsys):
    c = Criterion(3, "TB2018 Tealbook reference")
    _, state = case_study("tb2018-tealbook-p50")
    e0 = np.eye(state.W.size)[0]
    c.within("alpha_hat", state.result.alpha_mle, e0, 0.02)
    c.within("alpha*_0", state.result.alpha_map[0], 0.89, 0.03)
    c.within("EMR", state.result.emr_map, 0.49, 0.01)
    c.report(capsys)


# -- 4. three-percentile, December 2007 --------------------------------------------------

def test_criterion_4_tb2007_three_percentile(capsys):
    c = Criterion(4, "TB2007 three-percentile synthesis")
    report, state = case_study("tb2007-nyfed-p3")
    c.check("backstop thresholds", report.backstop_thresholds == [-1.5, 1.4, 3.1], str(report.backstop_thresholds))
    c.within("alpha*", state.result.alpha_map, [0.26, 0.01, 0.11, 0.07, 0.26, 0.01, 0.03, 0.26], 0.03)
    c.within("EMR", state.result.emr_map, 0.44, 0.01)
    c.report(capsys)


# -- 5. skew-t refits -----------------------------------------------------------------

@pytest.mark.parametrize(
    "label, percentiles, published",
    [
        ("NY Fed 2007", NYFED_2007_PERCENTILES, NYFED_2007),
        ("NY Fed 2018", NYFED_2018_PERCENTILES, NYFED_2018),
        ("Tealbook 2018", TEALBOOK_2018_PERCENTILES, TEALBOOK_2018),
    ],
)
def test_criterion_5_skew_t_refit(capsys, label, percentiles, published):
    c = Criterion(5, f"skew-t refit, {label}")
    points = [dist.PercentilePoint(p, v) for p, v in percentiles]
    fit = dist.fit_to_percentiles(points)
    probs = np.array([p for p, _ in percentiles])
    values = np.array([v for _, v in percentiles])
    c.within("quantiles", dist.quantile(fit, probs), values, 0.15)
    ours, theirs = dist.fit_objective(fit, points), dist.fit_objective(published, points)
    c.check("residual", ours <= theirs, f"{ours:.3g} vs published {theirs:.3g}")
    c.report(capsys)


# -- 6. Gaussian shift study -----------------------------------------------------------

def test_criterion_6_gaussian_shift(capsys):
    c = Criterion(6, "Gaussian shift study")
    rows = gaussian_shift_study(np.round(np.arange(0, 3.01, 0.1), 10), n=1_000_000, seed=0)
    at = {round(r.a, 6): r for r in rows}
    c.within("EMR(a=0)", at[0.0].emr, 0.5, 1e-3)
    c.within("ESS(a=0)", at[0.0].ess_percent, 100.0, 1e-3)
    slack = min(r.emr - (1 / (1 + np.exp(r.a**2 / 2)) - 0.005) for r in rows)
    c.check("EMR >= bound - 0.005", slack >= 0, f"min slack {slack:.4g}")
    ess1 = at[1.0].ess_percent
    c.check("ESS(a=1) in [38, 42]", 38.0 <= ess1 <= 42.0, f"{ess1:.2f}")
    emr1 = at[1.0].emr
    c.check("EMR(a=1) in [0.39, 0.41]", 0.39 <= emr1 <= 0.41, f"{emr1:.4f}")
    c.report(capsys)


# -- 7. property suites -----------------------------------------------------------------

def _emr_direct(alpha, W):
    wf = W.columns @ alpha
    return float(np.mean(wf / (wf + 1.0 / W.n)))


def test_criterion_7_properties(capsys):
    c = Criterion(7, "property suites")
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    W = gaussian_matrix([0.1, -0.8, 0.6, 1.2], sds=[1.1, 0.9, 1.0, 1.3], n=20_000, seed=7)

    # EMR <= 1/2, with equality exactly when the mixture is the reference.
    vals = [emr(rng.dirichlet(np.ones(4)), W) for _ in range(200)]
    n = 1000
    ref_only = ScenarioWeightMatrix(np.arange(float(n)), np.full((n, 1), 1.0 / n))
    c.check("EMR <= 0.5", max(vals) < 0.5 and emr(np.ones(1), ref_only) == pytest.approx(0.5, abs=1e-15),
            f"max {max(vals):.4f}")

    # Symmetry under swapping mixture and reference.
    asym = max(
        abs(pairwise_emr(W.mixture(a), W.reference_weights) - pairwise_emr(W.reference_weights, W.mixture(a)))
        for a in rng.dirichlet(np.ones(4), size=50)
    )
    c.check("EMR symmetry", asym <= 1e-15, f"{asym:.2g}")

    # Entropic tilting: constraint residuals and uniqueness across starts.
    base = WeightedSample.uniform(rng.normal(1.0, 1.5, 20_000))
    worst_res, worst_gap = 0.0, 0.0
    for _ in range(30):
        k = int(rng.integers(1, 4))
        thresholds = tuple(np.sort(rng.choice(np.linspace(-1.5, 3.5, 51), k, replace=False)))
        targets = tuple(np.sort(rng.choice(np.linspace(0.05, 0.95, 19), k, replace=False)))
        spec = ScoreSpec(thresholds, targets)
        sol = solve_tilt(base, spec)
        tilted = et_weights(base, spec, sol.tau)
        worst_res = max(worst_res, float(np.max(np.abs(tilted.weights @ spec.scores(base.points) - spec.targets))))
        other = solve_tilt(base, spec, tau0=rng.normal(size=k))
        worst_gap = max(worst_gap, float(np.max(np.abs(other.tau - sol.tau))))
    c.check("ET residual <= 1e-8", worst_res <= 1e-8, f"{worst_res:.2g}")
    c.check("ET uniqueness <= 1e-6", worst_gap <= 1e-6, f"{worst_gap:.2g}")

    # Gradient against central differences of the defining formula.
    h, worst = 1e-5, 0.0
    for _ in range(20):
        a = rng.dirichlet(np.ones(4))
        fd = [(_emr_direct(a + h * e, W) - _emr_direct(a - h * e, W)) / (2 * h) for e in np.eye(4)]
        worst = max(worst, float(np.max(np.abs(emr_gradient(a, W) - fd))))
    c.check("gradient vs FD <= 1e-6", worst <= 1e-6, f"{worst:.2g}")

    # Hessian negative on zero-sum directions.
    H = emr_hessian(rng.dirichlet(np.ones(4)), W)
    dirs = rng.normal(size=(100, 4))
    dirs -= dirs.mean(axis=1, keepdims=True)
    quad = np.einsum("ij,jk,ik->i", dirs, H, dirs)
    c.check("Hessian negative", np.all(quad < 0), f"max v'Hv {quad.max():.3g}")

    # Duplicated scenarios get equal MAP weight.
    dup = ScenarioWeightMatrix(W.points, np.column_stack([W.columns, W.columns[:, 2]]))
    a_dup = optimize_map(dup, 0.005 / dup.size)
    c.check("MAP duplicates <= 1e-6", abs(a_dup[2] - a_dup[4]) <= 1e-6, f"{abs(a_dup[2] - a_dup[4]):.2g}")

    # MAP tends to MLE as epsilon shrinks.
    mle = optimize_mle(W)
    dist_eps = [float(np.max(np.abs(optimize_map(W, e) - mle))) for e in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)]
    c.check("alpha* -> alpha_hat", np.all(np.diff(dist_eps) < 0) and dist_eps[-1] < 1e-3,
            "distances " + ", ".join(f"{d:.1e}" for d in dist_eps))

    # Linear bound directions and the error cap.
    lin = linear_bound_check(np.concatenate([np.linspace(-5, 5, 2001), np.linspace(-0.5, 0.5, 1001)]))
    c.check("linear bound", lin.holds, f"max err {lin.max_abs_error_near_zero:.4f}")
    c.check("bound at 0", emr_lower_bound(0.0) == 0.5)

    elapsed = time.perf_counter() - start
    c.check("runtime < 300s", elapsed < 300.0, f"{elapsed:.1f}s")
    c.report(capsys)
