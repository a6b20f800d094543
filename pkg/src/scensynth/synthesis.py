"""Expected misclassification rate (EMR) of a scenario mixture and its optimum.

Every scenario is carried as a normalized weight column on one shared
reference sample drawn from the reference density ``p``. For mixture
probabilities ``alpha`` the mixture column is ``w_f = W @ alpha`` and, with
uniform reference weights ``1/n``,

    EMR(alpha) = mean_i( n*w_f[i] / (1 + n*w_f[i]) ),

the Monte Carlo form of ``E_p[f / (f + p)]``. The objective is concave in
``alpha`` so both the plain maximizer (MLE) and the Dirichlet-penalized
maximizer (MAP) are unique.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConvergenceError, DomainError
from .sampling import WeightedSample, ess_percent_of, weighted_percentile

KKT_TOL = 1e-7
ZERO_REPORT = 1e-6


@dataclass(frozen=True, eq=False)
class ScenarioWeightMatrix:
    """Scenario weight columns on a shared uniformly weighted reference sample.

    Column 0 is the baseline; when a backstop is present it is the last column.
    """

    points: np.ndarray
    columns: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        cols = np.asarray(self.columns, dtype=float)
        if cols.ndim == 1:
            cols = cols[:, None]
        if cols.ndim != 2 or cols.shape[0] != points.size:
            raise DomainError("columns must have one row per reference point")
        if np.any(cols < 0) or not np.all(np.isfinite(cols)):
            raise DomainError("scenario weights must be finite and nonnegative")
        # Contiguous columns give numpy's pairwise summation accuracy.
        sums = np.ascontiguousarray(cols.T).sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-12):
            raise DomainError(f"every column must sum to 1, got {sums}")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "columns", cols)

    @classmethod
    def from_samples(cls, samples) -> "ScenarioWeightMatrix":
        samples = list(samples)
        points = samples[0].points
        for s in samples[1:]:
            if s.points is not points and not np.array_equal(s.points, points):
                raise DomainError("all scenario samples must share the reference points")
        return cls(points, np.column_stack([s.weights for s in samples]))

    @property
    def n(self) -> int:
        return self.columns.shape[0]

    @property
    def size(self) -> int:
        """Number of scenarios including the baseline (``J + 1``)."""
        return self.columns.shape[1]

    @property
    def reference_weights(self) -> np.ndarray:
        return np.full(self.n, 1.0 / self.n)

    def column(self, j) -> WeightedSample:
        return WeightedSample(self.points, self.columns[:, j])

    def mixture(self, alpha) -> np.ndarray:
        return self.columns @ np.asarray(alpha, dtype=float)


def _check_alpha(alpha, size):
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (size,):
        raise DomainError(f"alpha must have length {size}, got shape {alpha.shape}")
    if np.any(alpha < -1e-12) or abs(alpha.sum() - 1.0) > 1e-10:
        raise DomainError("alpha must lie on the probability simplex")
    return alpha


def pairwise_emr(a, b) -> float:
    """EMR between two weight systems on the same sample: ``sum a b / (a + b)``.

    Symmetric in its arguments; terms with ``a + b = 0`` contribute nothing.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = a + b
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(s > 0, a * b / s, 0.0)
    return float(terms.sum())


def emr(alpha, W: ScenarioWeightMatrix) -> float:
    alpha = _check_alpha(alpha, W.size)
    r = W.n * W.mixture(alpha)
    return float(np.mean(r / (1.0 + r)))


def emr_gradient(alpha, W: ScenarioWeightMatrix) -> np.ndarray:
    """``d EMR / d alpha_j = sum_i w_j[i] / (1 + n*w_f[i])**2``."""
    alpha = _check_alpha(alpha, W.size)
    r = W.n * W.mixture(alpha)
    return W.columns.T @ (1.0 / (1.0 + r) ** 2)


def emr_hessian(alpha, W: ScenarioWeightMatrix) -> np.ndarray:
    """``-2 n sum_i w_j[i] w_k[i] / (1 + n*w_f[i])**3``; negative definite."""
    alpha = _check_alpha(alpha, W.size)
    r = W.n * W.mixture(alpha)
    c = 1.0 / (1.0 + r) ** 3
    return -2.0 * W.n * (W.columns * c[:, None]).T @ W.columns


def default_epsilon(size: int) -> float:
    """Dirichlet regularization default ``0.005 / (J + 1)``."""
    if size < 1:
        raise DomainError("need at least one scenario")
    return 0.005 / size


def synthesis_weights(alpha, W: ScenarioWeightMatrix) -> WeightedSample:
    alpha = _check_alpha(alpha, W.size)
    return WeightedSample.from_unnormalized(W.points, W.mixture(np.clip(alpha, 0.0, None)))


# -- constrained maximization -------------------------------------------------

def constraint_matrix(size: int, baseline_modal: bool) -> np.ndarray:
    """Rows ``a`` of the inequality constraints ``a @ alpha >= 0``.

    Always ``alpha_j >= 0``; with ``baseline_modal`` also
    ``alpha_0 - alpha_j >= 0`` for ``j >= 1`` (which makes ``alpha_0 >= 0``
    redundant, so that row is dropped).
    """
    eye = np.eye(size)
    if not baseline_modal or size == 1:
        return eye
    modal = np.zeros((size - 1, size))
    modal[:, 0] = 1.0
    modal[np.arange(size - 1), np.arange(1, size)] = -1.0
    return np.vstack([eye[1:], modal])


def _feasible_start(size: int, baseline_modal: bool) -> np.ndarray:
    if baseline_modal and size > 1:
        x = np.full(size, 1.0)
        x[0] = 2.0
        return x / x.sum()
    return np.full(size, 1.0 / size)


@dataclass
class _ActiveSetResult:
    x: np.ndarray
    iterations: int
    multipliers: dict = field(default_factory=dict)


def _snap(x, row):
    """Put ``x`` exactly on the face ``row @ x = 0`` and renormalize."""
    x = x.copy()
    if np.count_nonzero(row) == 1:
        x[np.flatnonzero(row)[0]] = 0.0
    else:
        x[int(np.flatnonzero(row < 0)[0])] = x[0]
    return x / x.sum()


def active_set_maximize(
    fun: Callable[[np.ndarray], float],
    grad_hess: Callable[[np.ndarray], tuple],
    x0: np.ndarray,
    A: np.ndarray,
    max_iter: int = 500,
    step_tol: float = 1e-11,
    mult_tol: float = 1e-12,
) -> _ActiveSetResult:
    """Primal active-set Newton method for a strictly concave function on
    ``{x : sum(x) = 1, A x >= 0}``; ``x0`` must be feasible.

    ``fun`` may return ``-inf`` outside its domain; the backtracking line
    search then simply rejects those steps.
    """
    x = np.array(x0, dtype=float)
    m, size = A.shape
    ones = np.ones((1, size))
    working: list[int] = []
    fx = fun(x)
    for it in range(1, max_iter + 1):
        g, H = grad_hess(x)
        C = np.vstack([ones, A[working]]) if working else ones
        k = C.shape[0]
        K = np.zeros((size + k, size + k))
        K[:size, :size] = H
        K[:size, size:] = C.T
        K[size:, :size] = C
        rhs = np.concatenate([-g, np.zeros(k)])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        d, nu = sol[:size], sol[size:]

        if np.max(np.abs(d)) <= step_tol * max(1.0, np.max(np.abs(x))):
            lam = nu[1:]
            if lam.size == 0 or lam.min() >= -mult_tol:
                return _ActiveSetResult(x, it, dict(zip(working, lam)))
            working.pop(int(np.argmin(lam)))
            continue

        slope = float(g @ d)
        Ad = A @ d
        Ax = A @ x
        t_max, blocking = np.inf, None
        for i in range(m):
            if i in working or Ad[i] >= -1e-15:
                continue
            t_i = max(Ax[i], 0.0) / -Ad[i]
            if t_i < t_max:
                t_max, blocking = t_i, i
        if blocking is not None and t_max <= 1.0 and not np.isfinite(fun(_snap(x + t_max * d, A[blocking]))):
            # The face is outside the domain (barrier objectives): stay interior.
            t_max, blocking = 0.99 * t_max, None
        t = min(1.0, t_max)
        accepted = False
        for _ in range(60):
            cand = x + t * d
            fc = fun(cand)
            if np.isfinite(fc) and fc >= fx + 1e-4 * t * slope:
                accepted = True
                break
            # Rounding can make a tiny ascent step look flat near the optimum.
            if np.isfinite(fc) and abs(fc - fx) <= 1e-15 * max(1.0, abs(fx)) and t * np.max(np.abs(d)) < 1e-10:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            raise ConvergenceError("line search failed in active-set iteration", best=x)
        if blocking is not None and t == t_max:
            working.append(blocking)
            cand = _snap(cand, A[blocking])
            fc = fun(cand)
        x, fx = cand, fc
    raise ConvergenceError(f"active-set method did not converge in {max_iter} iterations", best=x)


def project(y, A: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``y`` onto ``{x : sum(x) = 1, A x >= 0}``."""
    y = np.asarray(y, dtype=float)
    size = y.size
    neg_eye = -np.eye(size)
    x0 = _interior_point(A, size)
    res = active_set_maximize(
        lambda x: -0.5 * float(np.sum((x - y) ** 2)),
        lambda x: (y - x, neg_eye),
        x0,
        A,
    )
    return res.x


def _interior_point(A, size):
    for modal in (True, False):
        x = _feasible_start(size, modal)
        if np.all(A @ x > 0):
            return x
    return np.full(size, 1.0 / size)


def stationarity_residual(alpha, grad, A: np.ndarray) -> float:
    """Projected-gradient stationarity measure ``|alpha - P(alpha + grad)|_inf``.

    Zero exactly at KKT points of a maximization over the feasible polytope.
    """
    alpha = np.asarray(alpha, dtype=float)
    return float(np.max(np.abs(alpha - project(alpha + np.asarray(grad), A))))


@dataclass
class OptimizationResult:
    alpha: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int


def _emr_parts(W, alpha):
    r = W.n * W.mixture(alpha)
    inv = 1.0 / (1.0 + r)
    value = float(np.mean(r * inv))
    g = W.columns.T @ (inv * inv)
    H = -2.0 * W.n * (W.columns * (inv**3)[:, None]).T @ W.columns
    return value, g, H


def _solve(W, epsilon, baseline_modal, start=None):
    size = W.size
    A = constraint_matrix(size, baseline_modal)
    if size == 1:
        return OptimizationResult(np.ones(1), emr(np.ones(1), W), 0.0, 0), A

    if epsilon == 0.0:
        def fun(a):
            if np.any(a < -1e-14):
                return -np.inf
            return float(np.mean(_ratio(W, np.clip(a, 0.0, None))))

        def grad_hess(a):
            _, g, H = _emr_parts(W, np.clip(a, 0.0, None))
            return g, H
    else:
        def fun(a):
            if np.any(a <= 0):
                return -np.inf
            return float(np.log(np.mean(_ratio(W, a))) + epsilon * np.sum(np.log(a)))

        def grad_hess(a):
            value, g, H = _emr_parts(W, a)
            gl = g / value + epsilon / a
            Hl = H / value - np.outer(g, g) / value**2 - np.diag(epsilon / a**2)
            return gl, Hl

    x0 = _feasible_start(size, baseline_modal) if start is None else _check_start(start, A)
    res = active_set_maximize(fun, grad_hess, x0, A)
    alpha = np.clip(res.x, 0.0, None)
    alpha = alpha / alpha.sum()
    g, _ = grad_hess(alpha)
    return OptimizationResult(alpha, fun(alpha), stationarity_residual(alpha, g, A), res.iterations), A


def _check_start(start, A):
    x = np.asarray(start, dtype=float)
    if x.shape != (A.shape[1],) or abs(x.sum() - 1.0) > 1e-12 or np.any(A @ x <= 0):
        raise DomainError("start must lie strictly inside the feasible polytope")
    return x


def _ratio(W, a):
    r = W.n * W.mixture(a)
    return r / (1.0 + r)


def optimize_mle(W: ScenarioWeightMatrix, baseline_modal: bool = True) -> np.ndarray:
    """Maximize EMR over the simplex (optionally with ``alpha_0 >= alpha_j``)."""
    return optimize_mle_full(W, baseline_modal).alpha


def optimize_mle_full(
    W: ScenarioWeightMatrix, baseline_modal: bool = True, start=None
) -> OptimizationResult:
    res, _ = _solve(W, 0.0, baseline_modal, start)
    if res.kkt_residual > KKT_TOL:
        raise ConvergenceError(
            f"MLE stationarity residual {res.kkt_residual:.2e} exceeds {KKT_TOL:g}", best=res.alpha
        )
    return res


def optimize_map(W: ScenarioWeightMatrix, epsilon: float, baseline_modal: bool = True) -> np.ndarray:
    """Maximize ``log EMR + epsilon * sum(log alpha)``; the result is interior."""
    return optimize_map_full(W, epsilon, baseline_modal).alpha


def optimize_map_full(
    W: ScenarioWeightMatrix, epsilon: float, baseline_modal: bool = True, start=None
) -> OptimizationResult:
    """MAP optimization with diagnostics; ``start`` must be strictly feasible."""
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    res, _ = _solve(W, float(epsilon), baseline_modal, start)
    if res.kkt_residual > KKT_TOL:
        raise ConvergenceError(
            f"MAP stationarity residual {res.kkt_residual:.2e} exceeds {KKT_TOL:g}", best=res.alpha
        )
    return res


def report_zeros(alpha, threshold: float = ZERO_REPORT) -> np.ndarray:
    """Zero out components below ``threshold`` and renormalize."""
    alpha = np.where(np.asarray(alpha) < threshold, 0.0, alpha)
    return alpha / alpha.sum()


# -- result record ------------------------------------------------------------

PERCENTILE_LEVELS = (0.15, 0.5, 0.85)


@dataclass
class SynthesisResult:
    alpha_mle: np.ndarray
    alpha_map: np.ndarray
    emr_mle: float
    emr_map: float
    pairwise_emr: np.ndarray
    per_scenario_et_ess: np.ndarray
    per_scenario_is_ess: np.ndarray
    synthesis_ess: float
    synthesis_percentiles: dict
    epsilon: float
    baseline_modal_constraint: bool
    synthesis_ess_mle: float = float("nan")
    synthesis_percentiles_mle: dict = field(default_factory=dict)
    kkt_mle: float = float("nan")
    kkt_map: float = float("nan")


def synthesize(
    W: ScenarioWeightMatrix,
    epsilon: float | None = None,
    baseline_modal: bool = True,
    et_ess=None,
    levels=PERCENTILE_LEVELS,
) -> SynthesisResult:
    """MLE and MAP weights plus the per-scenario and synthesis diagnostics."""
    eps = default_epsilon(W.size) if epsilon is None else float(epsilon)
    mle = optimize_mle_full(W, baseline_modal)
    mapr = optimize_map_full(W, eps, baseline_modal)
    alpha_mle = report_zeros(mle.alpha)
    eye = np.eye(W.size)
    pairwise = np.array([emr(eye[j], W) for j in range(W.size)])
    is_ess = np.array([ess_percent_of(W.columns[:, j]) for j in range(W.size)])
    mix_map = synthesis_weights(mapr.alpha, W)
    mix_mle = synthesis_weights(alpha_mle, W)
    pct_map = dict(zip(levels, np.atleast_1d(weighted_percentile(mix_map, levels))))
    pct_mle = dict(zip(levels, np.atleast_1d(weighted_percentile(mix_mle, levels))))
    return SynthesisResult(
        alpha_mle=alpha_mle,
        alpha_map=mapr.alpha,
        emr_mle=emr(mle.alpha, W),
        emr_map=emr(mapr.alpha, W),
        pairwise_emr=pairwise,
        per_scenario_et_ess=np.full(W.size, np.nan) if et_ess is None else np.asarray(et_ess, float),
        per_scenario_is_ess=is_ess,
        synthesis_ess=ess_percent_of(mix_map.weights),
        synthesis_percentiles={float(k): float(v) for k, v in pct_map.items()},
        epsilon=eps,
        baseline_modal_constraint=baseline_modal,
        synthesis_ess_mle=ess_percent_of(mix_mle.weights),
        synthesis_percentiles_mle={float(k): float(v) for k, v in pct_mle.items()},
        kkt_mle=mle.kkt_residual,
        kkt_map=mapr.kkt_residual,
    )
