"""Exact transportation distances and mixing coefficients of Markov chains.

Wasserstein-1 solves run through a primal network simplex after an excess
measure reduction: for a metric cost the common mass min(mu, nu) can stay in
place, so only (mu - nu)+ against (nu - mu)+ needs shipping.  The mixing
coefficients of a chain compare the tail trajectory laws started from two
states; the exact mode enumerates tails, the upper-bound mode contracts
one-step coefficients.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ._solver import backend_name, min_cost_plan
from .errors import EnumerationCapError, ValidationError
from .spaces import ATOL, FiniteMetricSpace, MarkovProcessSpec, enumerate_tuples

log = logging.getLogger(__name__)

MARGINAL_TOL = 1e-9
MAX_EXACT_ATOMS = 10_000


def tv_distance(mu, nu) -> float:
    """Total variation distance between two laws on the same points."""
    mu = np.asarray(mu, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    if mu.shape != nu.shape or mu.ndim != 1:
        raise ValidationError("laws must be vectors of equal length")
    return 0.5 * float(np.abs(mu - nu).sum())


@dataclass(frozen=True, eq=False)
class Coupling:
    """A joint law with its intended marginals and transport cost."""

    joint: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    cost: float

    def validate(self, metric: np.ndarray | None = None) -> None:
        j = self.joint
        if np.any(j < -MARGINAL_TOL):
            raise ValidationError("coupling has negative entries")
        if np.abs(j.sum(axis=1) - self.mu).max(initial=0.0) > MARGINAL_TOL:
            raise ValidationError("coupling row marginal is off")
        if np.abs(j.sum(axis=0) - self.nu).max(initial=0.0) > MARGINAL_TOL:
            raise ValidationError("coupling column marginal is off")
        if metric is not None:
            ref = float(np.sum(j * metric))
            if abs(ref - self.cost) > MARGINAL_TOL:
                raise ValidationError(
                    f"coupling cost {self.cost:.12g} differs from {ref:.12g}"
                )


def expectation_pair(coupling: Coupling, f, g) -> tuple:
    """E[f(X)] under the row marginal and E[g(Y)] under the column marginal.

    f and g are vectors indexed like the marginals, or callables on indices.
    """
    m, k = coupling.joint.shape
    fv = np.asarray([f(i) for i in range(m)] if callable(f) else f, dtype=np.float64)
    gv = np.asarray([g(j) for j in range(k)] if callable(g) else g, dtype=np.float64)
    return float(fv @ coupling.mu), float(gv @ coupling.nu)


def _check_metric_matrix(metric: np.ndarray) -> np.ndarray:
    m = np.asarray(metric, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError("metric must be a square matrix")
    if not np.all(np.isfinite(m)) or np.any(m < 0.0):
        raise ValidationError("metric must be finite and nonnegative")
    if np.abs(m - m.T).max(initial=0.0) > ATOL:
        raise ValidationError("metric is not symmetric")
    if np.abs(np.diag(m)).max(initial=0.0) > ATOL:
        raise ValidationError("metric diagonal is not zero")
    for k in range(m.shape[0]):
        if np.any(m > m[:, k, None] + m[None, k, :] + ATOL):
            raise ValidationError("metric violates the triangle inequality")
    return m


def _excess_parts(mu: np.ndarray, nu: np.ndarray):
    common = np.minimum(mu, nu)
    return common, mu - common, nu - common


def _w1_cost(metric: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> float:
    """Wasserstein-1 cost only, for callers that already trust the metric."""
    _, pos, neg = _excess_parts(
        np.asarray(mu, dtype=np.float64), np.asarray(nu, dtype=np.float64)
    )
    total, _, _, _ = min_cost_plan(metric, pos, neg)
    return total


def wasserstein1(metric, mu, nu) -> tuple:
    """Exact Wasserstein-1 distance and an optimal coupling.

    `metric` is a FiniteMetricSpace or a matrix satisfying the metric axioms
    (checked).  Returns (distance, Coupling); identical laws yield distance
    0.0 with the diagonal coupling.
    """
    if isinstance(metric, FiniteMetricSpace):
        m = metric.metric
    else:
        m = _check_metric_matrix(metric)
    n = m.shape[0]
    mu = np.asarray(mu, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    if mu.shape != (n,) or nu.shape != (n,):
        raise ValidationError("marginals must match the metric size")
    for name, v in (("mu", mu), ("nu", nu)):
        if np.any(v < 0.0) or abs(float(v.sum()) - 1.0) > MARGINAL_TOL:
            raise ValidationError(f"{name} is not a probability vector")

    common, pos, neg = _excess_parts(mu, nu)
    joint = np.zeros((n, n))
    np.fill_diagonal(joint, common)
    if np.any(pos > 0.0):
        total, rows, cols, flows = min_cost_plan(m, pos, neg)
        np.add.at(joint, (rows, cols), flows)
    else:
        total = 0.0
    out = Coupling(joint=joint, mu=mu, nu=nu, cost=total)
    out.validate(m)
    return total, out


@dataclass(frozen=True, eq=False)
class MixingProfile:
    """Per-step mixing coefficients of a chain; the last entry is always 0."""

    tau_bar: np.ndarray
    method: str

    def __post_init__(self):
        t = np.asarray(self.tau_bar, dtype=np.float64)
        if t.ndim != 1 or t.size == 0:
            raise ValidationError("tau_bar must be a nonempty vector")
        if np.any(t < 0.0) or not np.all(np.isfinite(t)):
            raise ValidationError("tau_bar entries must be finite and nonnegative")
        if t[-1] != 0.0:
            raise ValidationError("tau_bar must end with 0")
        t.setflags(write=False)
        object.__setattr__(self, "tau_bar", t)

    def total(self) -> float:
        return float(self.tau_bar.sum())


def _tail_paths(k: int, length: int) -> np.ndarray:
    return enumerate_tuples((k,) * length)


def _tail_laws(chain: MarkovProcessSpec, paths: np.ndarray) -> np.ndarray:
    """Row s holds the law of the tail trajectory when the current state is s."""
    t = chain.transition
    core = np.ones(paths.shape[0])
    for j in range(paths.shape[1] - 1):
        core *= t[paths[:, j], paths[:, j + 1]]
    return t[:, paths[:, 0]] * core[None, :]


def _tail_metric_block(
    rho: np.ndarray, paths: np.ndarray, rows: np.ndarray, cols: np.ndarray
) -> np.ndarray:
    out = np.zeros((rows.size, cols.size))
    for j in range(paths.shape[1]):
        out += rho[np.ix_(paths[rows, j], paths[cols, j])]
    return out


def _pair_tail_cost(rho, paths, laws, s, s2) -> float:
    _, pos, neg = _excess_parts(laws[s], laws[s2])
    rows = np.flatnonzero(pos > 0.0)
    cols = np.flatnonzero(neg > 0.0)
    if rows.size == 0 or cols.size == 0:
        return 0.0
    block = _tail_metric_block(rho, paths, rows, cols)
    total, _, _, _ = min_cost_plan(block, pos[rows], neg[cols])
    return total


def tau_coefficients(
    chain: MarkovProcessSpec, mode: str = "exact", workers: int = 1
) -> MixingProfile:
    """Transportation-cost mixing coefficients tau_bar of a finite chain.

    Entry i (1-based) bounds, over every pair of states the chain may occupy
    at step i, the Wasserstein-1 distance between the two conditional laws of
    the remaining trajectory; the final entry is 0 by convention.

    exact mode enumerates tail trajectories and refuses beyond
    MAX_EXACT_ATOMS of them; upper_bound mode multiplies the worst one-step
    Wasserstein contraction out to the horizon and never enumerates.
    """
    if mode not in ("exact", "upper_bound"):
        raise ValidationError(f"mode must be exact or upper_bound, got {mode!r}")
    if workers < 1:
        raise ValidationError("workers must be at least 1")
    k, h = chain.k, chain.horizon
    rho = chain.state_space.metric
    out = np.zeros(h)
    if mode == "upper_bound":
        kappa = 0.0
        worst = 0.0
        for s, s2 in combinations(range(k), 2):
            c = _w1_cost(rho, chain.transition[s], chain.transition[s2])
            worst = max(worst, c)
            kappa = max(kappa, c / rho[s, s2])
        for i in range(1, h):
            # tau_bar_i <= w * sum of kappa^t over tail steps, summed directly
            # so the kappa == 1 case needs no special form.
            out[i - 1] = worst * float(np.sum(kappa ** np.arange(h - i)))
        return MixingProfile(tau_bar=out, method="upper_bound")

    for i in range(1, h):
        atoms = k ** (h - i)
        if atoms > MAX_EXACT_ATOMS:
            raise EnumerationCapError(
                f"exact mode needs {atoms} tail trajectories at step {i}, "
                f"cap is {MAX_EXACT_ATOMS}; use upper_bound mode"
            )

    # Marginal supports, for reporting when unreachable pairs drive the sup.
    marginals = [chain.initial]
    for _ in range(h - 1):
        marginals.append(marginals[-1] @ chain.transition)

    for i in range(1, h):
        paths = _tail_paths(k, h - i)
        laws = _tail_laws(chain, paths)
        pairs = list(combinations(range(k), 2))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                costs = list(
                    pool.map(lambda p: _pair_tail_cost(rho, paths, laws, *p), pairs)
                )
        else:
            costs = [_pair_tail_cost(rho, paths, laws, s, s2) for s, s2 in pairs]
        out[i - 1] = max(costs, default=0.0)
        live = marginals[i - 1] > 0.0
        reachable = max(
            (c for (s, s2), c in zip(pairs, costs) if live[s] and live[s2]),
            default=0.0,
        )
        if out[i - 1] - reachable > ATOL:
            log.info(
                "tau_bar[%d]: worst pair is unreachable at this step "
                "(all-pairs %.6g vs reachable %.6g); reporting all-pairs",
                i,
                out[i - 1],
                reachable,
            )
    return MixingProfile(tau_bar=out, method="exact")


__all__ = [
    "Coupling",
    "MixingProfile",
    "backend_name",
    "expectation_pair",
    "tau_coefficients",
    "tv_distance",
    "wasserstein1",
]
