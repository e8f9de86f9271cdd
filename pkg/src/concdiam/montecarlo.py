"""Seeded Monte Carlo verification of deviation bounds.

Sampling contract: a flat stream of 53-bit uniform doubles is produced in
chunks of 65536, chunk c coming from a Philox generator keyed (seed, c).
The stream is reshaped row-major into sample matrices, one coordinate per
column: finite coordinates hold point indices, Gaussian coordinates hold
reals obtained through the inverse normal CDF.  Results therefore depend
only on (shape, seed), never on chunk scheduling.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np
from scipy.special import ndtri
from scipy.stats import beta as _beta_dist

from .bounds import TailBound, lipschitz_check
from .errors import CertificationError, ValidationError
from .spaces import (
    FiniteMetricSpace,
    GaussianLineSpace,
    MarkovProcessSpec,
    ProductSpec,
    enumerate_tuples,
    load_space,
)

CHUNK = 1 << 16
EXACT_CENTER_CAP = 10_000
LIP_TRIALS = 20_000

# Largest double below 1; uniforms are nudged off 0 and clamped here before
# the inverse normal CDF so neither tail maps to an infinity.
_BELOW_ONE = 1.0 - 2.0 ** -53
_HALF_ULP = 2.0 ** -54


def _check_seed(seed) -> int:
    if not isinstance(seed, numbers.Integral) or seed < 0 or seed >= 2 ** 64:
        raise ValidationError("seed must be an integer in [0, 2^64)")
    return int(seed)


def _uniform_stream(seed: int, total: int) -> np.ndarray:
    out = np.empty(total)
    for c in range((total + CHUNK - 1) // CHUNK):
        lo = c * CHUNK
        gen = np.random.Generator(
            np.random.Philox(key=np.array([seed, c], dtype=np.uint64))
        )
        out[lo : lo + CHUNK] = gen.random(min(CHUNK, total - lo))
    return out


def uniforms(seed: int, count: int, width: int) -> np.ndarray:
    """The (count, width) uniform matrix underlying every sampler."""
    if count < 0 or width < 1:
        raise ValidationError("count must be nonnegative and width positive")
    return _uniform_stream(_check_seed(seed), count * width).reshape(count, width)


def _finite_cdf(prob: np.ndarray) -> np.ndarray:
    cum = np.cumsum(prob)
    cum[-1] = 1.0
    return cum


def _pick(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.minimum(np.searchsorted(cum, u, side="right"), cum.size - 1)


def sample_product(spec: ProductSpec, count: int, seed: int) -> np.ndarray:
    """(count, n) samples; finite coordinates as indices, Gaussian as reals."""
    u = uniforms(seed, count, spec.n)
    out = np.empty_like(u)
    for i, comp in enumerate(spec.components):
        if isinstance(comp, FiniteMetricSpace):
            out[:, i] = _pick(_finite_cdf(comp.prob), u[:, i])
        else:
            z = ndtri(np.minimum(u[:, i] + _HALF_ULP, _BELOW_ONE))
            out[:, i] = comp.mean + comp.stddev * z
    return out


def sample_markov(chain: MarkovProcessSpec, count: int, seed: int) -> np.ndarray:
    """(count, horizon) state-index trajectories of the chain."""
    u = uniforms(seed, count, chain.horizon)
    out = np.empty((count, chain.horizon), dtype=np.int64)
    out[:, 0] = _pick(_finite_cdf(chain.initial), u[:, 0])
    cum_rows = np.cumsum(chain.transition, axis=1)
    cum_rows[:, -1] = 1.0
    for j in range(1, chain.horizon):
        rows = cum_rows[out[:, j - 1]]
        idx = np.sum(rows <= u[:, j][:, None], axis=1)
        out[:, j] = np.minimum(idx, chain.k - 1)
    return out


def empirical_tail(values, center: float, t_grid) -> np.ndarray:
    """Frequency of |value - center| >= t for each threshold."""
    dev = np.sort(np.abs(np.asarray(values, dtype=np.float64) - center))
    t = np.atleast_1d(np.asarray(t_grid, dtype=np.float64))
    counts = dev.size - np.searchsorted(dev, t, side="left")
    return counts / dev.size


def binomial_ci(successes, n: int, alpha: float):
    """One-sided Clopper-Pearson limits, each at level alpha."""
    k = np.atleast_1d(np.asarray(successes, dtype=np.float64))
    if np.any(k < 0) or np.any(k > n) or n < 1:
        raise ValidationError("need 0 <= successes <= n")
    if not 0.0 < alpha < 1.0:
        raise ValidationError("alpha must lie in (0, 1)")
    lo = np.where(k > 0, _beta_dist.ppf(alpha, k, n - k + 1), 0.0)
    hi = np.where(k < n, _beta_dist.ppf(1.0 - alpha, k + 1, n - k), 1.0)
    return lo, hi


def _components_of(space) -> tuple:
    if isinstance(space, ProductSpec):
        return space.components
    if isinstance(space, MarkovProcessSpec):
        return (space.state_space,) * space.horizon
    raise ValidationError("sampling needs a product or markov space")


def _decode_numeric(comps: tuple, samples: np.ndarray) -> np.ndarray:
    out = np.empty(samples.shape)
    for i, comp in enumerate(comps):
        col = samples[:, i]
        if isinstance(comp, FiniteMetricSpace):
            out[:, i] = comp.values()[col.astype(np.intp)]
        else:
            out[:, i] = col
    return out


def _anchor_index(comp: FiniteMetricSpace, token: str) -> int:
    candidates: list = [token]
    try:
        candidates.append(int(token))
    except ValueError:
        pass
    try:
        candidates.append(float(token))
    except ValueError:
        pass
    for cand in candidates:
        try:
            return comp.index_of(cand)
        except ValidationError:
            continue
    raise ValidationError(f"anchor {token!r} is not a point of every component")


def resolve_statistic(space, statistic) -> tuple:
    """Maps a statistic spec to (vectorized callable, label).

    Named statistics: mean, sum, max (numeric labels required), and
    distance_sum:<anchor> which sums per-coordinate distances to the anchor
    point and is 1-Lipschitz by construction.  Callables pass through and
    must map a sample matrix to a vector.
    """
    if callable(statistic):
        return statistic, getattr(statistic, "__name__", "statistic")
    if not isinstance(statistic, str):
        raise ValidationError("statistic must be a name or a callable")
    comps = _components_of(space)

    if statistic in ("mean", "sum", "max"):
        reducer = {"mean": np.mean, "sum": np.sum, "max": np.max}[statistic]

        def fn(samples: np.ndarray) -> np.ndarray:
            return reducer(_decode_numeric(comps, samples), axis=1)

        return fn, statistic

    if statistic.startswith("distance_sum:"):
        token = statistic.split(":", 1)[1]
        anchors = []
        for comp in comps:
            if isinstance(comp, FiniteMetricSpace):
                anchors.append(_anchor_index(comp, token))
            else:
                try:
                    anchors.append(float(token))
                except ValueError:
                    raise ValidationError(
                        f"anchor {token!r} must be numeric for gaussian coordinates"
                    ) from None

        def fn(samples: np.ndarray) -> np.ndarray:
            total = np.zeros(samples.shape[0])
            for i, (comp, anchor) in enumerate(zip(comps, anchors)):
                if isinstance(comp, FiniteMetricSpace):
                    total += comp.metric[samples[:, i].astype(np.intp), anchor]
                else:
                    total += np.abs(samples[:, i] - anchor)
            return total

        return fn, statistic

    raise ValidationError(
        f"unknown statistic {statistic!r}; use mean, sum, max, or distance_sum:<anchor>"
    )


SpaceLike = Union[ProductSpec, MarkovProcessSpec]


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Everything a certification run depends on; fully determines its output."""

    space: SpaceLike
    statistic: Union[str, Callable]
    lipschitz: float
    samples: int
    t_grid: np.ndarray
    seed: int
    confidence_slack: float = 1e-3
    bound_specs: tuple = ()

    def __post_init__(self):
        space = self.space
        if isinstance(space, (FiniteMetricSpace, GaussianLineSpace)):
            space = ProductSpec((space,))
        if not isinstance(space, (ProductSpec, MarkovProcessSpec)):
            raise ValidationError("space must be a product or markov space")
        if not (np.isfinite(self.lipschitz) and self.lipschitz > 0.0):
            raise ValidationError("lipschitz must be finite and positive")
        if self.samples < 1:
            raise ValidationError("samples must be at least 1")
        t = np.asarray(self.t_grid, dtype=np.float64)
        if t.ndim != 1 or t.size == 0 or not np.all(np.isfinite(t)):
            raise ValidationError("t_grid must be a nonempty finite vector")
        if np.any(t < 0.0) or np.any(np.diff(t) <= 0.0):
            raise ValidationError("t_grid must be nonnegative and strictly increasing")
        if not 0.0 < self.confidence_slack < 1.0:
            raise ValidationError("confidence_slack must lie in (0, 1)")
        t.setflags(write=False)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "seed", _check_seed(self.seed))
        object.__setattr__(self, "bound_specs", tuple(self.bound_specs))

    @classmethod
    def from_doc(cls, doc: dict, base_dir=None) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ValidationError("experiment document must be a JSON object")
        try:
            raw_space = doc["space"]
            statistic = doc["statistic"]
            lipschitz = doc["lipschitz"]
            samples = doc["samples"]
            t_grid = doc["t_grid"]
            seed = doc["seed"]
        except KeyError as e:
            raise ValidationError(f"experiment document is missing {e.args[0]!r}") from None
        if isinstance(raw_space, str):
            path = Path(base_dir or ".") / raw_space
            space = load_space(path.read_text())
        else:
            space = load_space(raw_space)
        return cls(
            space=space,
            statistic=statistic,
            lipschitz=float(lipschitz),
            samples=int(samples),
            t_grid=t_grid,
            seed=seed,
            confidence_slack=float(doc.get("confidence_slack", 1e-3)),
            bound_specs=tuple(doc.get("bounds", ())),
        )


def bounds_from_config(config: ExperimentConfig, workers: int = 1) -> list:
    """Builds the declared bounds from the space's own concentration data.

    Every derived quantity is scaled by the declared Lipschitz constant: an
    L-Lipschitz statistic is f = L * (f / L) with f / L 1-Lipschitz, so
    widths, diameters, and mixing shifts all pick up the factor L.
    """
    from .diameter import component_diameters, conditional_subgaussian_diameters
    from .transport import tau_coefficients

    space = config.space
    scale = config.lipschitz
    out = []
    deltas = None
    for entry in config.bound_specs:
        kind = entry.get("kind")
        name = entry.get("name")
        if isinstance(space, MarkovProcessSpec):
            if kind != "mixing":
                raise ValidationError(
                    f"bound kind {kind!r} needs independent coordinates; "
                    "markov spaces support mixing"
                )
            profile = tau_coefficients(
                space, mode=entry.get("tau_mode", "exact"), workers=workers
            )
            d_bar = conditional_subgaussian_diameters(space)
            out.append(
                TailBound.mixing(
                    scale * d_bar, scale * profile.tau_bar, name or "mixing"
                )
            )
            continue
        if kind == "mcdiarmid":
            widths = [scale * c.diameter() for c in space.components]
            out.append(TailBound.mcdiarmid(widths, name or "mcdiarmid"))
        elif kind == "subgaussian":
            if deltas is None:
                deltas = component_diameters(space)
            out.append(TailBound.subgaussian(scale * deltas, name or "subgaussian"))
        elif kind == "orlicz":
            if "p" not in entry:
                raise ValidationError("orlicz bound entry needs p")
            p = float(entry["p"])
            from .diameter import orlicz_p_diameter

            d = [scale * orlicz_p_diameter(c, p) for c in space.components]
            out.append(TailBound.orlicz(d, p, name))
        else:
            raise ValidationError(f"unknown bound kind {kind!r}")
    return out


@dataclass(frozen=True, eq=False)
class TailReport:
    """Empirical tails, their confidence limits, and bound verdicts."""

    t_grid: np.ndarray
    empirical: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    bound_names: tuple
    bound_values: np.ndarray
    verdicts: tuple
    passed: bool
    center: float
    centering: str
    samples: int
    seed: int

    def to_csv(self, digits: int = 12) -> str:
        def fmt(v: float) -> str:
            return format(float(v), f".{digits}g")

        lines = ["t,empirical,ci_upper," + ",".join(self.bound_names) + ",verdict"]
        row_ok = np.all(
            self.bound_values + 1e-12 >= self.ci_lower[None, :], axis=0
        )
        for j, t in enumerate(self.t_grid):
            cells = [fmt(t), fmt(self.empirical[j]), fmt(self.ci_upper[j])]
            cells += [fmt(v) for v in self.bound_values[:, j]]
            cells.append("pass" if row_ok[j] else "fail")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _exact_center(space, stat_fn) -> float | None:
    if isinstance(space, ProductSpec):
        total = space.total_points()
        if total is None or total > EXACT_CENTER_CAP:
            return None
        pts = enumerate_tuples(space.sizes()).astype(np.float64)
        w = np.ones(pts.shape[0])
        for i, comp in enumerate(space.components):
            w *= comp.prob[pts[:, i].astype(np.intp)]
        return float(np.asarray(stat_fn(pts)) @ w)
    total = space.k ** space.horizon
    if total > EXACT_CENTER_CAP:
        return None
    pts = enumerate_tuples((space.k,) * space.horizon)
    w = space.initial[pts[:, 0]].copy()
    for j in range(1, space.horizon):
        w *= space.transition[pts[:, j - 1], pts[:, j]]
    return float(np.asarray(stat_fn(pts)) @ w)


def certify_bounds(
    config: ExperimentConfig, bounds=None, workers: int = 1
) -> TailReport:
    """Runs the full certification pipeline for a config.

    Refuses (CertificationError) when the statistic fails its Lipschitz
    audit.  A bound passes when it stays above the lower Clopper-Pearson
    limit of the empirical tail at every threshold.  Output is a pure
    function of the config and bounds.
    """
    space = config.space
    stat_fn, _ = resolve_statistic(space, config.statistic)
    if bounds is None:
        bounds = bounds_from_config(config, workers=workers)
    if not bounds:
        raise ValidationError("certification needs at least one bound")

    if isinstance(space, MarkovProcessSpec):
        audit_spec = ProductSpec((space.state_space,) * space.horizon)
    else:
        audit_spec = space
    audit = lipschitz_check(
        audit_spec, stat_fn, config.lipschitz, trials=LIP_TRIALS, seed=config.seed
    )
    if not audit.passed:
        raise CertificationError(
            f"statistic violates its Lipschitz constant {config.lipschitz:g}: "
            f"worst ratio {audit.worst_ratio:.6g} at {audit.witness}"
        )

    if isinstance(space, MarkovProcessSpec):
        samples = sample_markov(space, config.samples, config.seed)
    else:
        samples = sample_product(space, config.samples, config.seed)
    values = np.asarray(stat_fn(samples), dtype=np.float64)
    if values.shape != (config.samples,):
        raise ValidationError("statistic must return one value per row")

    center = _exact_center(space, stat_fn)
    centering = "exact"
    if center is None:
        center = float(values.mean())
        centering = "empirical"

    dev = np.abs(values - center)
    counts = config.samples - np.searchsorted(np.sort(dev), config.t_grid, side="left")
    emp = counts / config.samples
    ci_lo, ci_hi = binomial_ci(counts, config.samples, config.confidence_slack)

    names = tuple(b.name for b in bounds)
    curve = np.stack([np.asarray(b.evaluate(config.t_grid), dtype=np.float64) for b in bounds])
    verdicts = tuple(
        bool(np.all(curve[i] + 1e-12 >= ci_lo)) for i in range(len(bounds))
    )
    return TailReport(
        t_grid=config.t_grid,
        empirical=emp,
        ci_lower=ci_lo,
        ci_upper=ci_hi,
        bound_names=names,
        bound_values=curve,
        verdicts=verdicts,
        passed=all(verdicts),
        center=center,
        centering=centering,
        samples=config.samples,
        seed=config.seed,
    )


def estimate_beta_profile(
    loss: Callable, spec: ProductSpec, trials: int = LIP_TRIALS, seed: int = 0
) -> np.ndarray:
    """Per-coordinate replacement sensitivity of a loss on sampled pairs.

    Entry j estimates sup |loss(z) - loss(z with coordinate j redrawn)|
    divided by the distance between the two coordinate values.  All n+1
    coordinates are covered; the last entry is the test point.
    """
    if not isinstance(spec, ProductSpec) or spec.n < 2:
        raise ValidationError("need a product with training coordinates plus a test point")
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    m = spec.n
    draws = sample_product(spec, 2 * trials, seed)
    z, fresh = draws[:trials], draws[trials:]
    coord = np.arange(trials) % m
    z2 = z.copy()
    for j in range(m):
        rows = np.flatnonzero(coord == j)
        z2[rows, j] = fresh[rows, j]
    dl = np.abs(
        np.asarray(loss(z), dtype=np.float64) - np.asarray(loss(z2), dtype=np.float64)
    )
    profile = np.zeros(m)
    for j in range(m):
        rows = np.flatnonzero(coord == j)
        comp = spec.components[j]
        if isinstance(comp, FiniteMetricSpace):
            dist = comp.metric[z[rows, j].astype(np.intp), z2[rows, j].astype(np.intp)]
        else:
            dist = np.abs(z[rows, j] - z2[rows, j])
        live = dist > 0.0
        if np.any(live):
            profile[j] = float(np.max(dl[rows][live] / dist[live]))
    return profile


def estimate_beta(
    loss: Callable, spec: ProductSpec, trials: int = LIP_TRIALS, seed: int = 0
) -> float:
    """Uniform replacement-stability estimate: max of the per-coordinate profile."""
    return float(np.max(estimate_beta_profile(loss, spec, trials, seed)))
