"""Azzalini-Capitanio skew-t distribution and percentile fitting.

The density of ``Y = location + scale * Z`` is

    f(y) = 2/scale * t_v(z) * T_{v+1}(slant * z * sqrt((v + 1) / (v + z**2)))

with ``z = (y - location) / scale``, ``t_v`` the Student-t density and
``T_{v+1}`` the Student-t CDF. There is no closed form for the CDF, so it is
obtained by integrating the density from zero, where ``P(Z <= 0)`` is known
exactly: ``1/2 - arctan(slant)/pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, optimize, special

from .errors import DomainError, FitError

# Beyond this |z| the CDF is computed from the tail with adaptive quadrature.
_Z_TAIL = 40.0
_PANEL_WIDTH = 1.0
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)

DOF_MIN = 0.5
DOF_MAX = 50.0


@dataclass(frozen=True)
class SkewTParams:
    """Location, scale, slant (skewness shape) and degrees of freedom."""

    location: float
    scale: float
    slant: float
    dof: float

    def __post_init__(self):
        for name in ("location", "scale", "slant", "dof"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value}")
        if self.scale <= 0:
            raise DomainError(f"scale must be positive, got {self.scale}")
        if self.dof <= 0:
            raise DomainError(f"dof must be positive, got {self.dof}")

    def as_tuple(self):
        return (self.location, self.scale, self.slant, self.dof)


@dataclass(frozen=True)
class PercentilePoint:
    prob: float
    value: float

    def __post_init__(self):
        if not 0.0 < self.prob < 1.0:
            raise DomainError(f"percentile prob must lie in (0, 1), got {self.prob}")
        if not math.isfinite(self.value):
            raise DomainError(f"percentile value must be finite, got {self.value}")


def _check_finite(y):
    arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("evaluation points must be finite")
    return arr


# -- standardized (location 0, scale 1) kernels -----------------------------

def _std_logpdf(z, slant, dof):
    log_t = (
        special.gammaln((dof + 1) / 2)
        - special.gammaln(dof / 2)
        - 0.5 * math.log(dof * math.pi)
        - (dof + 1) / 2 * np.log1p(z * z / dof)
    )
    if slant == 0.0:
        return log_t
    arg = slant * z * np.sqrt((dof + 1) / (dof + z * z))
    return math.log(2.0) + log_t + np.log(special.stdtr(dof + 1, arg))


def _std_pdf(z, slant, dof):
    return np.exp(_std_logpdf(z, slant, dof))


def _std_cdf_at_zero(slant):
    return 0.5 - math.atan(slant) / math.pi


def _integrate_pdf(a, b, slant, dof):
    """Composite Gauss-Legendre integral of the standardized pdf over [a, b]."""
    if a == b:
        return 0.0
    panels = max(1, int(math.ceil(abs(b - a) / _PANEL_WIDTH)))
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = _std_pdf(nodes, slant, dof)
    return float(np.sum(half * (vals @ _GL_WEIGHTS)))


def _std_cdf_scalar(z, slant, dof):
    if z > _Z_TAIL:
        tail, _ = integrate.quad(
            _std_pdf, z, np.inf, args=(slant, dof), epsabs=1e-15, epsrel=1e-12, limit=200
        )
        return 1.0 - tail
    if z < -_Z_TAIL:
        tail, _ = integrate.quad(
            _std_pdf, -np.inf, z, args=(slant, dof), epsabs=1e-15, epsrel=1e-12, limit=200
        )
        return tail
    value = _std_cdf_at_zero(slant) + _integrate_pdf(0.0, z, slant, dof)
    return min(1.0, max(0.0, value))


def _std_quantile(q, slant, dof, tol=1e-15):
    """Safeguarded Newton iteration on the standardized CDF."""
    guess = float(special.stdtrit(dof, q))
    lo, hi = guess - 1.0, guess + 1.0
    step = 1.0
    while _std_cdf_scalar(lo, slant, dof) > q:
        step *= 2.0
        lo -= step
    step = 1.0
    while _std_cdf_scalar(hi, slant, dof) < q:
        step *= 2.0
        hi += step
    z = min(max(guess, lo), hi)
    for _ in range(100):
        err = _std_cdf_scalar(z, slant, dof) - q
        if abs(err) <= tol:
            return z
        if err > 0:
            hi = z
        else:
            lo = z
        dens = float(_std_pdf(z, slant, dof))
        cand = z - err / dens if dens > 0 else 0.5 * (lo + hi)
        if not lo < cand < hi:
            cand = 0.5 * (lo + hi)
        if hi - lo < 1e-15 * max(1.0, abs(z)):
            return cand
        z = cand
    return z


# -- public API --------------------------------------------------------------

def logpdf(p: SkewTParams, y):
    z = (_check_finite(y) - p.location) / p.scale
    return _std_logpdf(z, p.slant, p.dof) - math.log(p.scale)


def pdf(p: SkewTParams, y):
    """Skew-t density at ``y`` (scalar or array)."""
    return np.exp(logpdf(p, y))


def cdf(p: SkewTParams, y):
    """Skew-t CDF at ``y`` (scalar or array)."""
    arr = _check_finite(y)
    z = (arr - p.location) / p.scale
    out = np.array([_std_cdf_scalar(float(v), p.slant, p.dof) for v in z.ravel()])
    out = out.reshape(z.shape)
    return float(out) if out.ndim == 0 else out


def quantile(p: SkewTParams, q):
    """Inverse CDF; ``q`` scalar or array with entries in (0, 1)."""
    arr = np.asarray(q, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0) or np.any(arr >= 1):
        raise DomainError("quantile levels must lie strictly inside (0, 1)")
    z = np.array([_std_quantile(float(v), p.slant, p.dof) for v in arr.ravel()])
    out = p.location + p.scale * z.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def sample(p: SkewTParams, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` i.i.d. values via the skew-normal / chi-square representation.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if n < 1:
        raise DomainError(f"sample size must be >= 1, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    delta = p.slant / math.sqrt(1.0 + p.slant**2)
    u0 = np.abs(rng.standard_normal(n))
    u1 = rng.standard_normal(n)
    x = delta * u0 + math.sqrt(1.0 - delta**2) * u1
    w = rng.chisquare(p.dof, n)
    return p.location + p.scale * x / np.sqrt(w / p.dof)


# -- fitting -----------------------------------------------------------------

def _validate_points(points: Sequence[PercentilePoint]):
    probs = np.array([pt.prob for pt in points], dtype=float)
    values = np.array([pt.value for pt in points], dtype=float)
    if np.any(np.diff(probs) <= 0):
        raise DomainError("percentile probs must be strictly increasing")
    if np.any(np.diff(values) < 0):
        raise DomainError("percentile values must be nondecreasing")
    return probs, values


def fit_objective(p: SkewTParams, points: Sequence[PercentilePoint]) -> float:
    """Sum of squared differences between model and target percentiles."""
    probs, values = _validate_points(points)
    return float(np.sum((quantile(p, probs) - values) ** 2))


def _profile(probs, values, slant, dof):
    """Best location/scale for fixed shape; both enter the quantiles linearly."""
    z = np.array([_std_quantile(q, slant, dof, tol=1e-12) for q in probs])
    zc = z - z.mean()
    denom = float(zc @ zc)
    scale = float(zc @ (values - values.mean())) / denom if denom > 0 else 0.0
    scale = max(scale, 1e-8)
    location = float(values.mean() - scale * z.mean())
    resid = values - (location + scale * z)
    return location, scale, float(resid @ resid)


def _initial_shape(probs, values):
    """Shape start from quantile skewness: lower/upper spread around the median."""
    med = np.interp(0.5, probs, values)
    lower = med - values[0]
    upper = values[-1] - med
    if lower + upper <= 0:
        return 0.0
    bowley = (upper - lower) / (upper + lower)
    return float(np.clip(4.0 * bowley, -5.0, 5.0))


def fit_to_percentiles(
    points: Sequence[PercentilePoint],
    fixed_dof: float | None = None,
    restarts: int = 20,
    seed: int = 0,
    max_iter: int = 2000,
    dof_max: float = DOF_MAX,
) -> SkewTParams:
    """Least-squares skew-t fit to a list of percentiles.

    Location and scale are profiled out exactly (quantiles are affine in
    them), leaving a Nelder-Mead search over slant and log-dof (or slant
    alone when ``fixed_dof`` is given), restarted from jittered starts.
    Degrees of freedom are kept inside ``[DOF_MIN, dof_max]``; near-symmetric
    targets push the fit onto the upper bound, where the density is close
    to skew-normal anyway.
    """
    points = list(points)
    need = 3 if fixed_dof is not None else 4
    if len(points) < need:
        raise DomainError(f"need at least {need} percentile points, got {len(points)}")
    probs, values = _validate_points(points)
    if values[-1] <= values[0]:
        raise DomainError("percentile values must not all coincide")
    if fixed_dof is not None and fixed_dof <= 0:
        raise DomainError("fixed_dof must be positive")
    if not dof_max > DOF_MIN:
        raise DomainError(f"dof_max must exceed {DOF_MIN}")

    def unpack(x):
        slant = float(x[0])
        if fixed_dof is not None:
            return slant, float(fixed_dof)
        return slant, float(np.clip(math.exp(min(x[1], 50.0)), DOF_MIN, dof_max))

    cache = {}

    def objective(x):
        slant, dof = unpack(x)
        if abs(slant) > 50:
            return 1e6 + slant**2
        key = (slant, dof)
        if key not in cache:
            cache[key] = _profile(probs, values, slant, dof)[2]
        return cache[key]

    rng = np.random.default_rng(seed)
    slant0 = _initial_shape(probs, values)
    best = None
    converged_any = False
    for k in range(restarts):
        jitter = 0.0 if k == 0 else rng.normal(scale=1.0)
        x0 = [slant0 + jitter]
        if fixed_dof is None:
            x0.append(math.log(5.0) + (0.0 if k == 0 else rng.normal(scale=1.0)))
        res = optimize.minimize(
            objective,
            np.array(x0),
            method="Nelder-Mead",
            options={"xatol": 1e-9, "fatol": 1e-15, "maxiter": max_iter},
        )
        converged_any |= bool(res.success)
        if best is None or res.fun < best.fun:
            best = res

    slant, dof = unpack(best.x)
    location, scale, resid = _profile(probs, values, slant, dof)
    params = SkewTParams(location, scale, slant, dof)
    if not converged_any:
        raise FitError(
            "Nelder-Mead hit the iteration limit on every restart", params=params, residual=resid
        )
    return params
