"""Subgaussian and Orlicz diameters of metric probability spaces.

The central object is the symmetrized distance: draw two independent points,
take their distance, and attach a uniform random sign.  Its moment generating
function determines the subgaussian diameter (the optimal subgaussian constant
of that centered variable) and a family of Orlicz p-diameters.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ValidationError
from .spaces import (
    FiniteMetricSpace,
    GaussianLineSpace,
    MarkovProcessSpec,
    ProductSpec,
)

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
CENTER_TOL = 1e-10

# Search window for the MGF-ratio objective.  The objective always attains its
# supremum either in the interior or in the lambda -> 0 limit (handled by an
# explicit variance candidate), so the upper end is not binding.
GRID_LO = 1e-4
GRID_HI = 1e3
GRID_SIZE = 2048
CHECK_GRID_SIZE = 10_000

# Below this value of |lambda| * max|value| the log-MGF is evaluated by a
# cumulant series: the direct log-sum-exp carries ~1e-16 absolute noise, which
# near lambda = 0 would swamp the 1e-9 relative resolution of the search.
_SERIES_CUT = 1e-2

_LAM_BLOCK = 1024


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """A finitely supported law on the reals.

    Atoms are stored sorted by value; duplicate values are merged and
    zero-probability atoms dropped at construction.
    """

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        p = np.asarray(self.probs, dtype=np.float64).ravel()
        if v.size != p.size or v.size == 0:
            raise ValidationError("values and probs must be nonempty and aligned")
        if not np.all(np.isfinite(v)):
            raise ValidationError("values contain non-finite entries")
        if np.any(p < -1e-12):
            raise ValidationError("probs contains negative entries")
        p = np.where(p < 0.0, 0.0, p)
        s = float(p.sum())
        if abs(s - 1.0) > 1e-12:
            raise ValidationError(f"probabilities sum to {s:.12g}")
        p = p / s
        v = v + 0.0  # collapse -0.0 onto +0.0 before merging
        uniq, inverse = np.unique(v, return_inverse=True)
        p = np.bincount(inverse, weights=p, minlength=uniq.size)
        keep = p > 0.0
        uniq, p = uniq[keep], p[keep]
        # bincount accumulates naively; over ~1e6 atoms the merged total can
        # drift past the validation tolerance, so renormalize once more
        p = p / p.sum()
        for name, arr in (("values", uniq), ("probs", p)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_atoms(cls, atoms) -> "DiscreteDistribution":
        vals = [a[0] for a in atoms]
        return cls(np.array(vals), np.array([a[1] for a in atoms]))

    @property
    def atoms(self) -> list:
        return [(float(v), float(p)) for v, p in zip(self.values, self.probs)]

    def mean(self) -> float:
        return float(self.values @ self.probs)

    def variance(self) -> float:
        m = self.mean()
        return float(((self.values - m) ** 2) @ self.probs)

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        v, p = self.values, self.probs
        scale = max(1.0, self.max_abs())
        return bool(
            np.all(np.abs(v + v[::-1]) <= tol * scale)
            and np.all(np.abs(p - p[::-1]) <= tol)
        )

    def negated(self) -> "DiscreteDistribution":
        return DiscreteDistribution(-self.values, self.probs)


def symmetrized_distance_from(metric: np.ndarray, prob: np.ndarray) -> DiscreteDistribution:
    """Law of the random-sign distance between two independent draws."""
    metric = np.asarray(metric, dtype=np.float64)
    prob = np.asarray(prob, dtype=np.float64)
    w = np.outer(prob, prob).ravel() / 2.0
    d = metric.ravel()
    full = np.concatenate([w, w])
    # n^2 tiny pair masses accumulate roundoff past the 1e-12 mass check;
    # their exact total is 1, so dividing by the float total is a no-op
    # mathematically and keeps large spaces constructible
    full /= full.sum()
    return DiscreteDistribution(np.concatenate([d, -d]), full)


def symmetrized_distance(space: FiniteMetricSpace) -> DiscreteDistribution:
    return symmetrized_distance_from(space.metric, space.prob)


def mgf_log(dist: DiscreteDistribution, lam) -> np.ndarray | float:
    """log E[exp(lam * X)], exact up to floating point via max subtraction."""
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    out = np.empty(lam_arr.shape)
    for start in range(0, lam_arr.size, _LAM_BLOCK):
        block = lam_arr[start : start + _LAM_BLOCK]
        out[start : start + _LAM_BLOCK] = logsumexp(
            block[:, None] * dist.values[None, :], axis=1, b=dist.probs
        )
    if np.isscalar(lam) or np.ndim(lam) == 0:
        return float(out[0])
    return out


def _raw_moments(values: np.ndarray, probs: np.ndarray, upto: int) -> np.ndarray:
    powers = values[None, :] ** np.arange(upto + 1)[:, None]
    return powers @ probs


def _cumulants(values: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Cumulants 2..6 of a mean-zero law, for the small-lambda series."""
    m = _raw_moments(values, probs, 6)
    k2 = m[2]
    k3 = m[3]
    k4 = m[4] - 3 * m[2] ** 2
    k5 = m[5] - 10 * m[3] * m[2]
    k6 = m[6] - 15 * m[4] * m[2] - 10 * m[3] ** 2 + 30 * m[2] ** 3
    return np.array([k2, k3, k4, k5, k6])


class _LogMgf:
    """Stable log-MGF of a mean-zero law: series near zero, log-sum-exp away."""

    def __init__(self, values: np.ndarray, probs: np.ndarray):
        self.dist = DiscreteDistribution(values, probs)
        self.vmax = self.dist.max_abs()
        self.cum = _cumulants(self.dist.values, self.dist.probs)

    def __call__(self, lam: np.ndarray) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lam, dtype=np.float64))
        out = np.empty(lam.shape)
        small = np.abs(lam) * self.vmax < _SERIES_CUT
        if np.any(small):
            ls = lam[small]
            k2, k3, k4, k5, k6 = self.cum
            out[small] = ls ** 2 * (
                k2 / 2
                + ls * (k3 / 6 + ls * (k4 / 24 + ls * (k5 / 120 + ls * k6 / 720)))
            )
        if np.any(~small):
            out[~small] = mgf_log(self.dist, lam[~small])
        return out


@dataclass(frozen=True)
class SubgaussianEstimate:
    """Result of the subgaussian diameter search.

    argmax_lambda is 0.0 when the lambda -> 0 variance limit is the supremum;
    variance_limit records that limit regardless of where the maximum sits.
    """

    sigma_star: float
    argmax_lambda: float
    tolerance: float
    variance_limit: float


def _golden_max(f, lo: float, hi: float, tol: float):
    """Golden-section maximum of f over [lo, hi] in log coordinates."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = math.log(lo), math.log(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(math.exp(c)), f(math.exp(d))
    while (b - a) > math.log1p(tol):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(math.exp(d))
    x = math.exp((a + b) / 2.0)
    return x, f(x)


def _grid_then_golden(f, tol: float):
    """Maximizes f over the lambda window: coarse grid, then local refinement."""
    grid = np.geomspace(GRID_LO, GRID_HI, GRID_SIZE)
    vals = f(grid)
    k = int(np.argmax(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, GRID_SIZE - 1)]
    x, fx = _golden_max(lambda t: float(f(np.array([t]))[0]), lo, hi, tol)
    if vals[k] > fx:
        return float(grid[k]), float(vals[k])
    return float(x), float(fx)


def _centered_values(dist: DiscreteDistribution) -> tuple:
    m = dist.mean()
    if abs(m) > CENTER_TOL:
        raise ValidationError(f"distribution mean is {m:.6g}, not centered")
    values = dist.values - m if m != 0.0 else dist.values
    return values, dist.probs


def sigma_star(dist: DiscreteDistribution, tol: float = DEFAULT_TOL) -> SubgaussianEstimate:
    """Optimal subgaussian constant of a centered finitely supported law.

    Returns sqrt of sup over lambda of 2 * log E[exp(lambda X)] / lambda^2.
    The lambda -> 0 limit equals the variance and enters as an explicit
    candidate; for asymmetric laws both signs of lambda are searched.
    """
    values, probs = _centered_values(dist)
    variance = float((values ** 2) @ probs)
    if dist.max_abs() == 0.0 or variance == 0.0:
        return SubgaussianEstimate(0.0, 0.0, tol, variance)

    best_val = variance
    best_lam = 0.0
    signs = (1.0,) if dist.is_symmetric() else (1.0, -1.0)
    for sign in signs:
        lm = _LogMgf(sign * values, probs)
        lam, val = _grid_then_golden(lambda g: 2.0 * lm(g) / g ** 2, tol)
        if val > best_val:
            best_val, best_lam = val, sign * lam
    return SubgaussianEstimate(math.sqrt(best_val), best_lam, tol, variance)


def certificate_gap(
    dist: DiscreteDistribution,
    sigma: float,
    n_points: int = CHECK_GRID_SIZE,
) -> float:
    """Worst excess of log E[exp(lam X)] over the subgaussian envelope.

    A valid subgaussian constant keeps this at most roundoff; callers compare
    against a small slack such as 1e-9.
    """
    grid = np.geomspace(GRID_LO, GRID_HI, n_points)
    if not dist.is_symmetric():
        grid = np.concatenate([grid, -grid])
    gap = mgf_log(dist, grid) - 0.5 * sigma ** 2 * grid ** 2
    return float(np.max(gap))


def subgaussian_diameter(space, tol: float = DEFAULT_TOL) -> SubgaussianEstimate:
    """Subgaussian diameter of a finite or Gaussian line space."""
    if isinstance(space, GaussianLineSpace):
        v = 2.0 * space.stddev ** 2
        return SubgaussianEstimate(math.sqrt(v), 0.0, tol, v)
    if isinstance(space, FiniteMetricSpace):
        return sigma_star(symmetrized_distance(space), tol)
    raise ValidationError(
        f"subgaussian_diameter needs a finite or gaussian space, got {type(space).__name__}"
    )


def component_diameters(spec: ProductSpec, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Per-coordinate subgaussian diameters of a product space."""
    return np.array(
        [subgaussian_diameter(c, tol).sigma_star for c in spec.components]
    )


def conditional_subgaussian_diameters(
    chain: MarkovProcessSpec, tol: float = DEFAULT_TOL
) -> np.ndarray:
    """Worst-case conditional subgaussian diameter at each step of a chain.

    Entry 1 comes from the initial law; entry i >= 2 maximizes over states
    reachable at step i-1 the diameter of that state's transition row.
    Unreachable rows are skipped and noted in the log.
    """
    rho = chain.state_space.metric
    supports = chain.step_supports()
    cache: dict = {}

    def row_sigma(p: np.ndarray) -> float:
        key = p.tobytes()
        if key not in cache:
            cache[key] = sigma_star(symmetrized_distance_from(rho, p), tol).sigma_star
        return cache[key]

    out = np.empty(chain.horizon)
    out[0] = row_sigma(chain.initial)
    skipped = 0
    for i in range(1, chain.horizon):
        supp = supports[i - 1]
        skipped += int(np.sum(~supp))
        out[i] = max(row_sigma(chain.transition[s]) for s in np.flatnonzero(supp))
    if skipped:
        log.info(
            "conditional diameters: skipped %d unreachable transition rows", skipped
        )
    return out


def _orlicz_from_law(values: np.ndarray, probs: np.ndarray, p: float, tol: float) -> float:
    vmax = float(np.abs(values).max())
    if vmax == 0.0:
        return 0.0
    if p > 2.0:
        # Near lambda = 0 the log-MGF grows like lambda^2, which no envelope
        # (a * lambda)^p / p with p > 2 can dominate, so no finite constant exists.
        log.info("orlicz diameter is infinite for p > 2 on a nondegenerate law")
        return float("inf")
    lm = _LogMgf(values, probs)

    def h(lam: np.ndarray) -> np.ndarray:
        return (p * np.maximum(lm(lam), 0.0)) ** (1.0 / p) / lam

    _, best = _grid_then_golden(h, tol)
    if p == 2.0:
        best = max(best, math.sqrt(float((values ** 2) @ probs)))
    return float(best)


def orlicz_p_diameter(space, p: float, tol: float = DEFAULT_TOL) -> float:
    """Orlicz p-diameter: least a with log E[exp(lam X)] <= (a lam)^p / p.

    Finite for p in (1, 2] on finite spaces; the Gaussian line only admits
    p = 2.  Degenerate one-point spaces give 0 for every p.
    """
    if not p > 1.0:
        raise ValidationError("p must exceed 1")
    if isinstance(space, GaussianLineSpace):
        if p == 2.0:
            return math.sqrt(2.0) * space.stddev
        log.info("orlicz diameter of a gaussian line is infinite for p != 2")
        return float("inf")
    if isinstance(space, FiniteMetricSpace):
        xi = symmetrized_distance(space)
        values, probs = _centered_values(xi)
        return _orlicz_from_law(values, probs, p, tol)
    raise ValidationError(
        f"orlicz_p_diameter needs a finite or gaussian space, got {type(space).__name__}"
    )
