"""Metric probability spaces and their JSON wire format.

A finite metric probability space is a finite point set with a metric matrix
and a probability vector.  Products of such spaces (optionally mixed with
Gaussian line components) model independent coordinates; a Markov process
specification models dependent coordinates over a finite state space.
"""

from __future__ import annotations

import json
import numbers
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ParseError, ValidationError

# Shared tolerance for metric axioms, probability sums, and row stochasticity.
ATOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _check_prob_vector(p: np.ndarray, what: str) -> np.ndarray:
    """Validates and renormalizes a probability vector.

    Entries may undershoot zero by at most ATOL (clipped); the sum may miss one
    by at most ATOL (renormalized).  Anything worse is rejected.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError(f"{what} must be a nonempty vector")
    if not np.all(np.isfinite(p)):
        raise ValidationError(f"{what} contains non-finite entries")
    if np.any(p < -ATOL):
        raise ValidationError(f"{what} contains negative entries")
    p = np.where(p < 0.0, 0.0, p)
    s = float(p.sum())
    if abs(s - 1.0) > ATOL:
        raise ValidationError(f"{what}: probabilities sum to {s:.12g}")
    return p / s


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """A finite point set with a metric matrix and a probability vector.

    The metric must be symmetric, zero exactly on the diagonal, positive off
    the diagonal, and satisfy the triangle inequality; all checks use ATOL.
    Points with zero probability are kept but trigger a warning.
    """

    labels: tuple
    metric: np.ndarray
    prob: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = tuple(self.labels)
        if len(labels) == 0:
            raise ValidationError("space needs at least one point")
        if len(set(labels)) != len(labels):
            raise ValidationError("point labels must be unique")
        n = len(labels)

        m = np.asarray(self.metric, dtype=np.float64)
        if m.shape != (n, n):
            raise ValidationError(
                f"metric shape {m.shape} does not match {n} labels"
            )
        if not np.all(np.isfinite(m)):
            raise ValidationError("metric contains non-finite entries")
        if np.abs(m - m.T).max(initial=0.0) > ATOL:
            raise ValidationError("metric is not symmetric")
        m = (m + m.T) / 2.0
        if np.abs(np.diag(m)).max(initial=0.0) > ATOL:
            raise ValidationError("metric diagonal is not zero")
        np.fill_diagonal(m, 0.0)
        off = m[~np.eye(n, dtype=bool)]
        if off.size and off.min() <= 0.0:
            raise ValidationError("metric must be positive between distinct points")
        # Triangle inequality, one pivot point at a time to cap memory at n^2.
        buf = np.empty_like(m)
        for k in range(n):
            np.add(m[:, k, None], m[None, k, :], out=buf)
            buf += ATOL
            if np.any(m > buf):
                raise ValidationError("metric violates the triangle inequality")

        p = _check_prob_vector(self.prob, "prob")
        if np.any(p == 0.0):
            dead = [labels[i] for i in np.flatnonzero(p == 0.0)]
            warnings.warn(
                f"points with zero probability: {dead}", stacklevel=2
            )

        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "metric", _readonly(m))
        object.__setattr__(self, "prob", _readonly(p))
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(labels)})

    @property
    def n(self) -> int:
        return len(self.labels)

    def index_of(self, label) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise ValidationError(f"unknown point label {label!r}") from None

    def diameter(self) -> float:
        return float(self.metric.max(initial=0.0))

    def values(self) -> np.ndarray:
        """Returns the labels as floats; rejects non-numeric labels."""
        if not all(
            isinstance(lab, numbers.Real) and not isinstance(lab, bool)
            for lab in self.labels
        ):
            raise ValidationError("labels are not numeric")
        return np.array([float(lab) for lab in self.labels])


@dataclass(frozen=True)
class GaussianLineSpace:
    """The real line with Euclidean distance and a normal law."""

    mean: float
    stddev: float

    def __post_init__(self):
        if not (np.isfinite(self.mean) and np.isfinite(self.stddev)):
            raise ValidationError("gaussian parameters must be finite")
        if self.stddev <= 0.0:
            raise ValidationError("stddev must be positive")

    def diameter(self) -> float:
        return float("inf")


Component = Union[FiniteMetricSpace, GaussianLineSpace]


@dataclass(frozen=True, eq=False)
class ProductSpec:
    """An ordered tuple of independent component spaces."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValidationError("product needs at least one component")
        for c in comps:
            if not isinstance(c, (FiniteMetricSpace, GaussianLineSpace)):
                raise ValidationError(
                    "product components must be finite or gaussian spaces"
                )
        object.__setattr__(self, "components", comps)

    @property
    def n(self) -> int:
        return len(self.components)

    def is_finite(self) -> bool:
        return all(isinstance(c, FiniteMetricSpace) for c in self.components)

    def sizes(self) -> tuple:
        if not self.is_finite():
            raise ValidationError("product has non-finite components")
        return tuple(c.n for c in self.components)

    def total_points(self):
        """Number of product points, or None when any component is continuous."""
        if not self.is_finite():
            return None
        total = 1
        for c in self.components:
            total *= c.n
        return total


def product_distance(spec: ProductSpec, x, y) -> float:
    """Sum of per-coordinate distances between two product points.

    Finite coordinates are given by label, Gaussian coordinates by value.
    """
    if len(x) != spec.n or len(y) != spec.n:
        raise ValidationError(
            f"points must have {spec.n} coordinates, got {len(x)} and {len(y)}"
        )
    total = 0.0
    for comp, xi, yi in zip(spec.components, x, y):
        if isinstance(comp, FiniteMetricSpace):
            total += comp.metric[comp.index_of(xi), comp.index_of(yi)]
        else:
            xi, yi = float(xi), float(yi)
            if not (np.isfinite(xi) and np.isfinite(yi)):
                raise ValidationError("gaussian coordinates must be finite")
            total += abs(xi - yi)
    return float(total)


@dataclass(frozen=True, eq=False)
class MarkovProcessSpec:
    """A finite-state Markov chain observed for a fixed number of steps.

    The trajectory lives on the product of `horizon` copies of the state
    space with the sum metric.
    """

    state_space: FiniteMetricSpace
    initial: np.ndarray
    transition: np.ndarray
    horizon: int

    def __post_init__(self):
        if not isinstance(self.state_space, FiniteMetricSpace):
            raise ValidationError("state_space must be a finite metric space")
        k = self.state_space.n
        init = _check_prob_vector(np.asarray(self.initial), "initial")
        if init.size != k:
            raise ValidationError(
                f"initial law has {init.size} entries for {k} states"
            )
        t = np.asarray(self.transition, dtype=np.float64)
        if t.shape != (k, k):
            raise ValidationError(
                f"transition shape {t.shape} does not match {k} states"
            )
        rows = [_check_prob_vector(t[i], f"transition row {i}") for i in range(k)]
        t = np.stack(rows)
        if not isinstance(self.horizon, numbers.Integral) or self.horizon < 1:
            raise ValidationError("horizon must be a positive integer")

        object.__setattr__(self, "initial", _readonly(init))
        object.__setattr__(self, "transition", _readonly(t))
        object.__setattr__(self, "horizon", int(self.horizon))

    @property
    def k(self) -> int:
        return self.state_space.n

    def step_supports(self) -> list:
        """Boolean support mask of the marginal law at each step 1..horizon."""
        supp = self.initial > 0.0
        out = [supp]
        reach = self.transition > 0.0
        for _ in range(self.horizon - 1):
            supp = supp @ reach
            out.append(supp)
        return out


Space = Union[FiniteMetricSpace, GaussianLineSpace, ProductSpec, MarkovProcessSpec]


def metric_diameter(space) -> float:
    """Largest distance in the space; inf when a component is unbounded."""
    if isinstance(space, (FiniteMetricSpace, GaussianLineSpace)):
        return space.diameter()
    if isinstance(space, ProductSpec):
        return float(sum(c.diameter() for c in space.components))
    if isinstance(space, MarkovProcessSpec):
        return float(space.horizon * space.state_space.diameter())
    raise ValidationError(f"not a space: {type(space).__name__}")


def enumerate_tuples(sizes) -> np.ndarray:
    """All index tuples over the given ranges, lexicographic, one per row."""
    sizes = tuple(int(s) for s in sizes)
    if any(s < 1 for s in sizes):
        raise ValidationError("sizes must be positive")
    grid = np.indices(sizes).reshape(len(sizes), -1).T
    return np.ascontiguousarray(grid)


# --- JSON wire format ---------------------------------------------------------


def _need(doc: dict, key: str, kind: str):
    if key not in doc:
        raise ParseError(f"{kind} document is missing {key!r}")
    return doc[key]


def _parse_finite(doc: dict) -> FiniteMetricSpace:
    return FiniteMetricSpace(
        labels=tuple(_need(doc, "labels", "finite")),
        metric=_need(doc, "metric", "finite"),
        prob=_need(doc, "prob", "finite"),
    )


def _parse_component(doc: dict) -> Component:
    kind = _need(doc, "type", "component")
    if kind == "finite":
        return _parse_finite(doc)
    if kind == "gaussian":
        return GaussianLineSpace(
            mean=float(_need(doc, "mean", "gaussian")),
            stddev=float(_need(doc, "stddev", "gaussian")),
        )
    raise ParseError(f"component type must be finite or gaussian, got {kind!r}")


def load_space(source) -> Space:
    """Builds a space from a JSON document (text, bytes, or parsed dict).

    Recognized types: finite, gaussian, product, power, markov.  A power
    document expands to a product of `n` copies of its base component.  A
    markov document may omit `prob` inside `states`, defaulting to the
    initial law.
    """
    if isinstance(source, (str, bytes)):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e}") from None
    else:
        doc = source
    if not isinstance(doc, dict):
        raise ParseError("space document must be a JSON object")

    kind = _need(doc, "type", "space")
    if kind in ("finite", "gaussian"):
        return _parse_component(doc)
    if kind == "product":
        comps = _need(doc, "components", "product")
        if not isinstance(comps, list):
            raise ParseError("components must be a list")
        return ProductSpec(tuple(_parse_component(c) for c in comps))
    if kind == "power":
        base = _parse_component(_need(doc, "base", "power"))
        n = _need(doc, "n", "power")
        if not isinstance(n, int) or n < 1:
            raise ParseError("power exponent n must be a positive integer")
        return ProductSpec((base,) * n)
    if kind == "markov":
        states = _need(doc, "states", "markov")
        if not isinstance(states, dict):
            raise ParseError("states must be a finite space document")
        initial = _need(doc, "initial", "markov")
        states = dict(states)
        states.setdefault("type", "finite")
        states.setdefault("prob", initial)
        if states.get("type") != "finite":
            raise ParseError("markov states must form a finite space")
        return MarkovProcessSpec(
            state_space=_parse_finite(states),
            initial=initial,
            transition=_need(doc, "transition", "markov"),
            horizon=_need(doc, "horizon", "markov"),
        )
    raise ParseError(f"unknown space type {kind!r}")


def _jsonable_labels(labels: tuple) -> list:
    out = []
    for lab in labels:
        if isinstance(lab, (str, int, float)) and not isinstance(lab, bool):
            out.append(lab)
        else:
            raise ValidationError(f"label {lab!r} is not JSON-serializable")
    return out


def dump_space(space) -> dict:
    """Inverse of load_space up to power expansion; floats keep full precision."""
    if isinstance(space, FiniteMetricSpace):
        return {
            "type": "finite",
            "labels": _jsonable_labels(space.labels),
            "metric": [[float(v) for v in row] for row in space.metric],
            "prob": [float(v) for v in space.prob],
        }
    if isinstance(space, GaussianLineSpace):
        return {"type": "gaussian", "mean": float(space.mean), "stddev": float(space.stddev)}
    if isinstance(space, ProductSpec):
        return {
            "type": "product",
            "components": [dump_space(c) for c in space.components],
        }
    if isinstance(space, MarkovProcessSpec):
        return {
            "type": "markov",
            "states": dump_space(space.state_space),
            "initial": [float(v) for v in space.initial],
            "transition": [[float(v) for v in row] for row in space.transition],
            "horizon": space.horizon,
        }
    raise ValidationError(f"not a space: {type(space).__name__}")
