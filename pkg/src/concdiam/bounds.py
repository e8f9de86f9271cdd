"""Closed-form deviation bounds and the Lipschitz precondition audit.

Every bound returns P(|f - E f| >= t) estimates clamped to [0, 1] and accepts
a scalar or vector of thresholds.  The audit checks a statistic's Lipschitz
claim on the product metric, exhaustively on small finite products and by
seeded sampling otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ValidationError
from .spaces import FiniteMetricSpace, ProductSpec, enumerate_tuples

MAX_EXHAUSTIVE_POINTS = 10_000
PAIR_SLACK = 1e-9


def _thresholds(t):
    arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(arr < 0.0) or not np.all(np.isfinite(arr)):
        raise ValidationError("thresholds must be finite and nonnegative")
    return arr, np.isscalar(t) or np.ndim(t) == 0


def _shaped(values: np.ndarray, scalar: bool):
    return float(values[0]) if scalar else values


def _positive_vector(v, name: str, allow_inf: bool = False) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if arr.size == 0:
        raise ValidationError(f"{name} must be nonempty")
    if np.any(np.isnan(arr)) or np.any(arr < 0.0):
        raise ValidationError(f"{name} entries must be nonnegative")
    if not allow_inf and not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} entries must be finite")
    return arr


def mcdiarmid_bound(widths, t):
    """Two-sided bounded-differences bound 2 exp(-2 t^2 / sum w_i^2)."""
    w = np.atleast_1d(np.asarray(widths, dtype=np.float64))
    if np.any(np.isinf(w)):
        raise ValidationError("metric diameter unbounded; McDiarmid inapplicable")
    if w.size == 0 or np.any(np.isnan(w)) or np.any(w <= 0.0):
        raise ValidationError("coordinate widths must be positive and finite")
    t_arr, scalar = _thresholds(t)
    out = np.minimum(1.0, 2.0 * np.exp(-2.0 * t_arr ** 2 / float(np.sum(w ** 2))))
    return _shaped(out, scalar)


def _gaussian_form(s2: float, shift: float, t_arr: np.ndarray) -> np.ndarray:
    """min(1, 2 exp(-(t - shift)^2 / (2 s2))), vacuous at or below the shift."""
    out = np.ones_like(t_arr)
    past = t_arr > shift
    if s2 == 0.0:
        out[past] = 0.0
        return out
    out[past] = np.minimum(
        1.0, 2.0 * np.exp(-((t_arr[past] - shift) ** 2) / (2.0 * s2))
    )
    return out


def subgaussian_bound(deltas, t):
    """Independent-coordinate bound 2 exp(-t^2 / (2 sum delta_i^2))."""
    d = _positive_vector(deltas, "deltas")
    t_arr, scalar = _thresholds(t)
    return _shaped(_gaussian_form(float(np.sum(d ** 2)), 0.0, t_arr), scalar)


def mixing_bound(deltas_bar, tau_bar, t):
    """Dependent-coordinate bound with the mixing shift sum tau_bar.

    2 exp(-(t - T)^2 / (2 sum deltas_bar_i^2)) for t > T = sum tau_bar_i,
    and the trivial 1 otherwise.
    """
    d = _positive_vector(deltas_bar, "deltas_bar")
    tau = _positive_vector(tau_bar, "tau_bar")
    if d.size != tau.size:
        raise ValidationError("deltas_bar and tau_bar must have equal length")
    t_arr, scalar = _thresholds(t)
    shift = float(tau.sum())
    return _shaped(_gaussian_form(float(np.sum(d ** 2)), shift, t_arr), scalar)


def orlicz_bound(deltas, p: float, t):
    """Heavier-tailed bound 2 exp(-((p-1)/p) (t / |delta|_p)^(p/(p-1))).

    Infinite entries are allowed and make the bound vacuous, matching
    diameters that fail to exist for the requested p.
    """
    if not p > 1.0:
        raise ValidationError("p must exceed 1")
    d = _positive_vector(deltas, "deltas", allow_inf=True)
    t_arr, scalar = _thresholds(t)
    norm = float(np.sum(d ** p) ** (1.0 / p))
    if norm == 0.0:
        out = np.where(t_arr > 0.0, 0.0, 1.0)
        return _shaped(out, scalar)
    q = p / (p - 1.0)
    with np.errstate(invalid="ignore"):
        ratio = np.where(np.isinf(norm), 0.0, t_arr / norm)
    out = np.minimum(1.0, 2.0 * np.exp(-((p - 1.0) / p) * ratio ** q))
    return _shaped(out, scalar)


def stability_bias_bound(beta: float, delta_sg: float) -> float:
    """Bound on |E training loss - E true loss| for a beta-stable learner."""
    if beta < 0.0 or not np.isfinite(beta):
        raise ValidationError("beta must be finite and nonnegative")
    if delta_sg < 0.0 or not np.isfinite(delta_sg):
        raise ValidationError("delta_sg must be finite and nonnegative")
    return 0.5 * beta ** 2 * delta_sg ** 2


def stability_excess_bound(beta: float, delta_sg: float, n: int, epsilon):
    """One-sided exp(-eps^2 / (18 beta^2 delta_sg^2 n)) for beta-stable learners."""
    if not (np.isfinite(beta) and beta > 0.0):
        raise ValidationError("beta must be finite and positive")
    if not (np.isfinite(delta_sg) and delta_sg > 0.0):
        raise ValidationError("delta_sg must be finite and positive")
    if n < 1:
        raise ValidationError("n must be at least 1")
    e_arr, scalar = _thresholds(epsilon)
    out = np.exp(-(e_arr ** 2) / (18.0 * beta ** 2 * delta_sg ** 2 * n))
    return _shaped(out, scalar)


@dataclass(frozen=True, eq=False)
class TailBound:
    """A named deviation bound, evaluable on a threshold grid."""

    kind: str
    params: dict
    name: str
    _fn: Callable

    def evaluate(self, t):
        return self._fn(t)

    @classmethod
    def mcdiarmid(cls, widths, name: str = "mcdiarmid") -> "TailBound":
        w = tuple(float(v) for v in np.atleast_1d(widths))
        mcdiarmid_bound(w, 0.0)  # validate eagerly
        return cls("mcdiarmid", {"widths": w}, name, lambda t: mcdiarmid_bound(w, t))

    @classmethod
    def subgaussian(cls, deltas, name: str = "subgaussian") -> "TailBound":
        d = tuple(float(v) for v in np.atleast_1d(deltas))
        subgaussian_bound(d, 0.0)
        return cls("subgaussian", {"deltas": d}, name, lambda t: subgaussian_bound(d, t))

    @classmethod
    def mixing(cls, deltas_bar, tau_bar, name: str = "mixing") -> "TailBound":
        d = tuple(float(v) for v in np.atleast_1d(deltas_bar))
        tau = tuple(float(v) for v in np.atleast_1d(tau_bar))
        mixing_bound(d, tau, 0.0)
        return cls(
            "mixing",
            {"deltas_bar": d, "tau_bar": tau},
            name,
            lambda t: mixing_bound(d, tau, t),
        )

    @classmethod
    def orlicz(cls, deltas, p: float, name: str | None = None) -> "TailBound":
        d = tuple(float(v) for v in np.atleast_1d(deltas))
        orlicz_bound(d, p, 0.0)
        label = name if name is not None else f"orlicz_p{p:g}"
        return cls("orlicz", {"deltas": d, "p": p}, label, lambda t: orlicz_bound(d, p, t))

    @classmethod
    def stability(cls, beta: float, delta_sg: float, n: int, name: str = "stability") -> "TailBound":
        stability_excess_bound(beta, delta_sg, n, 0.0)
        return cls(
            "stability_excess",
            {"beta": beta, "delta_sg": delta_sg, "n": n},
            name,
            lambda t: stability_excess_bound(beta, delta_sg, n, t),
        )


@dataclass(frozen=True, eq=False)
class LipschitzReport:
    """Outcome of a Lipschitz audit over coordinate-replacement pairs."""

    passed: bool
    constant: float
    worst_ratio: float
    witness: tuple | None
    n_pairs: int
    mode: str


def _decode_row(spec: ProductSpec, row: np.ndarray) -> tuple:
    out = []
    for comp, v in zip(spec.components, row):
        if isinstance(comp, FiniteMetricSpace):
            out.append(comp.labels[int(v)])
        else:
            out.append(float(v))
    return tuple(out)


def _pair_distances(spec: ProductSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.zeros(a.shape[0])
    for i, comp in enumerate(spec.components):
        if isinstance(comp, FiniteMetricSpace):
            d += comp.metric[a[:, i].astype(np.intp), b[:, i].astype(np.intp)]
        else:
            d += np.abs(a[:, i] - b[:, i])
    return d


def lipschitz_check(
    spec: ProductSpec,
    phi: Callable,
    constant: float,
    trials: int = 20_000,
    seed: int = 0,
) -> LipschitzReport:
    """Audits |phi(x) - phi(y)| <= constant * distance(x, y) on a product.

    phi maps a sample matrix (rows = points; finite coordinates as point
    indices, Gaussian coordinates as reals) to a vector.  Finite products
    with at most MAX_EXHAUSTIVE_POINTS points are checked over every pair;
    otherwise `trials` sampled pairs are checked.
    """
    if not (np.isfinite(constant) and constant >= 0.0):
        raise ValidationError("lipschitz constant must be finite and nonnegative")
    if trials < 1:
        raise ValidationError("trials must be at least 1")

    total = spec.total_points()
    if total is not None and total <= MAX_EXHAUSTIVE_POINTS:
        pts = enumerate_tuples(spec.sizes()).astype(np.float64)
        vals = np.asarray(phi(pts), dtype=np.float64)
        if vals.shape != (pts.shape[0],):
            raise ValidationError("statistic must return one value per row")
        worst_ratio = 0.0
        worst_pair = None
        violated = False
        n_pairs = 0
        block = max(1, (1 << 21) // max(1, total))
        for lo in range(0, total, block):
            hi = min(lo + block, total)
            a = pts[lo:hi]
            diff = np.abs(vals[lo:hi, None] - vals[None, :])
            dist = np.zeros((hi - lo, total))
            for i, comp in enumerate(spec.components):
                if isinstance(comp, FiniteMetricSpace):
                    dist += comp.metric[
                        np.ix_(a[:, i].astype(np.intp), pts[:, i].astype(np.intp))
                    ]
                else:  # pragma: no cover - finite-only branch guard
                    dist += np.abs(a[:, i][:, None] - pts[:, i][None, :])
            n_pairs += diff.size
            pos = dist > 0.0
            if np.any(pos):
                ratios = diff[pos] / dist[pos]
                j = int(np.argmax(ratios))
                if ratios[j] > worst_ratio:
                    worst_ratio = float(ratios[j])
                    rj, cj = np.argwhere(pos)[j]
                    worst_pair = (
                        _decode_row(spec, pts[lo + rj]),
                        _decode_row(spec, pts[cj]),
                    )
            if np.any(diff > constant * dist + PAIR_SLACK):
                violated = True
        return LipschitzReport(
            passed=not violated,
            constant=float(constant),
            worst_ratio=worst_ratio,
            witness=worst_pair if violated else (worst_pair if worst_ratio > 0 else None),
            n_pairs=n_pairs,
            mode="exhaustive",
        )

    from .montecarlo import sample_product

    draws = sample_product(spec, 2 * trials, seed)
    a, b = draws[0::2], draws[1::2]
    va = np.asarray(phi(a), dtype=np.float64)
    vb = np.asarray(phi(b), dtype=np.float64)
    if va.shape != (trials,) or vb.shape != (trials,):
        raise ValidationError("statistic must return one value per row")
    dist = _pair_distances(spec, a, b)
    diff = np.abs(va - vb)
    pos = dist > 0.0
    worst_ratio = 0.0
    worst_pair = None
    if np.any(pos):
        ratios = diff[pos] / dist[pos]
        j = int(np.argmax(ratios))
        worst_ratio = float(ratios[j])
        src = np.flatnonzero(pos)[j]
        worst_pair = (_decode_row(spec, a[src]), _decode_row(spec, b[src]))
    violated = bool(np.any(diff > constant * dist + PAIR_SLACK))
    return LipschitzReport(
        passed=not violated,
        constant=float(constant),
        worst_ratio=worst_ratio,
        witness=worst_pair if (violated or worst_ratio > 0) else None,
        n_pairs=trials,
        mode="sampled",
    )
