"""Backend selection and instance preparation for transportation solves.

The compiled core is preferred; the pure-Python twin is used when the
extension is missing or CONCDIAM_FORCE_FALLBACK is set.  Both implement the
same pivot rules, so results do not depend on the backend.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ValidationError

if os.environ.get("CONCDIAM_FORCE_FALLBACK"):
    from . import _transport_fallback as _impl

    _BACKEND = "python"
else:
    try:
        from . import _transport_core as _impl

        _BACKEND = "compiled"
    except ImportError:
        from . import _transport_fallback as _impl

        _BACKEND = "python"

BALANCE_TOL = 1e-9


def backend_name() -> str:
    return _BACKEND


def min_cost_plan(cost: np.ndarray, mu: np.ndarray, nu: np.ndarray):
    """Exact optimal transport plan between two finite nonnegative measures.

    Returns (total_cost, rows, cols, flows); indices refer to input positions
    and zero-mass atoms never appear.  Total masses must agree within
    BALANCE_TOL; the residual float imbalance is folded into the largest
    demand atom so the solver sees an exactly balanced instance.
    """
    cost = np.asarray(cost, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    if cost.ndim != 2 or cost.shape != (mu.size, nu.size):
        raise ValidationError(
            f"cost shape {cost.shape} does not match marginals ({mu.size}, {nu.size})"
        )
    for name, v in (("mu", mu), ("nu", nu)):
        if not np.all(np.isfinite(v)) or np.any(v < 0.0):
            raise ValidationError(f"{name} must be finite and nonnegative")
    if not np.all(np.isfinite(cost)) or np.any(cost < 0.0):
        raise ValidationError("cost matrix must be finite and nonnegative")
    total_mu, total_nu = float(mu.sum()), float(nu.sum())
    if abs(total_mu - total_nu) > BALANCE_TOL:
        raise ValidationError(
            f"total masses {total_mu:.12g} and {total_nu:.12g} differ"
        )

    empty = (np.array([], dtype=np.int64), np.array([], dtype=np.int64), np.array([]))
    keep_r = np.flatnonzero(mu > 0.0)
    keep_c = np.flatnonzero(nu > 0.0)
    if keep_r.size == 0 or keep_c.size == 0:
        return (0.0,) + empty

    supply = mu[keep_r]
    demand = nu[keep_c].copy()
    delta = float(supply.sum()) - float(demand.sum())
    if delta != 0.0:
        demand[int(np.argmax(demand))] += delta
    sub_cost = np.ascontiguousarray(cost[np.ix_(keep_r, keep_c)])

    rows, cols, flows = _impl.solve(sub_cost, supply, demand)
    total = float(np.dot(flows, sub_cost[rows, cols]))
    return total, keep_r[rows], keep_c[cols], flows
