import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from concdiam import (
    Coupling,
    EnumerationCapError,
    FiniteMetricSpace,
    MarkovProcessSpec,
    MixingProfile,
    ValidationError,
    tau_coefficients,
    tv_distance,
    wasserstein1,
)
from concdiam import _transport_fallback
from concdiam._solver import min_cost_plan

import oracles


def unit_metric(n):
    return 1.0 - np.eye(n)


def random_pair(rng, n):
    mu = rng.dirichlet(np.ones(n))
    nu = rng.dirichlet(np.ones(n))
    return mu, nu


class TestTvDistance:
    def test_identical_laws(self):
        assert tv_distance([0.5, 0.5], [0.5, 0.5]) == 0.0

    def test_hand_value(self):
        assert tv_distance([0.5, 0.5], [0.9, 0.1]) == pytest.approx(0.4, abs=1e-15)

    def test_point_masses(self):
        assert tv_distance([1.0, 0.0], [0.0, 1.0]) == 1.0


class TestWasserstein1:
    def test_identical_laws_give_zero_and_diagonal_coupling(self):
        mu = np.array([0.2, 0.3, 0.5])
        cost, plan = wasserstein1(unit_metric(3), mu, mu)
        assert cost == 0.0
        np.testing.assert_allclose(plan.joint, np.diag(mu), atol=1e-15)

    def test_three_point_line(self):
        pos = np.array([0.0, 1.0, 2.0])
        metric = np.abs(pos[:, None] - pos[None, :])
        cost, plan = wasserstein1(metric, [1.0, 0.0, 0.0], [0.0, 0.0, 1.0])
        assert cost == 2.0
        plan.validate(metric)

    def test_discrete_metric_reduces_to_tv(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            n = int(rng.integers(2, 11))
            mu, nu = random_pair(rng, n)
            cost, _ = wasserstein1(unit_metric(n), mu, nu)
            assert cost == pytest.approx(tv_distance(mu, nu), abs=1e-9)

    def test_matches_lp_oracle_on_random_instances(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n = int(rng.integers(2, 9))
            d, _ = oracles.random_metric_space(rng, n)
            mu, nu = random_pair(rng, n)
            cost, plan = wasserstein1(d, mu, nu)
            assert cost == pytest.approx(oracles.w1_linprog(d, mu, nu), abs=1e-9)
            plan.validate(d)

    def test_matches_cdf_formula_on_line_metrics(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            n = int(rng.integers(2, 9))
            pos = np.sort(rng.normal(size=n) * 3.0)
            d = np.abs(pos[:, None] - pos[None, :])
            mu, nu = random_pair(rng, n)
            cost, _ = wasserstein1(d, mu, nu)
            assert cost == pytest.approx(oracles.line_w1(pos, mu, nu), abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        d, _ = oracles.random_metric_space(rng, 6)
        mu, nu = random_pair(rng, 6)
        a, _ = wasserstein1(d, mu, nu)
        b, _ = wasserstein1(d, nu, mu)
        assert a == pytest.approx(b, abs=1e-9)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(5)
        d, _ = oracles.random_metric_space(rng, 6)
        for _ in range(20):
            mu, nu = random_pair(rng, 6)
            eta = rng.dirichlet(np.ones(6))
            ab, _ = wasserstein1(d, mu, nu)
            ac, _ = wasserstein1(d, mu, eta)
            cb, _ = wasserstein1(d, eta, nu)
            assert ab <= ac + cb + 1e-9

    def test_dominates_lipschitz_test_functions(self):
        # f(x) = min_y (c(y) + d(x, y)) is 1-Lipschitz for any offsets c
        rng = np.random.default_rng(13)
        d, _ = oracles.random_metric_space(rng, 7)
        mu, nu = random_pair(rng, 7)
        w1, _ = wasserstein1(d, mu, nu)
        for _ in range(30):
            c = rng.normal(size=7) * 2.0
            f = np.min(c[None, :] + d, axis=1)
            assert abs(f @ mu - f @ nu) <= w1 + 1e-9

    def test_accepts_space_argument(self):
        sp = FiniteMetricSpace(
            labels=("a", "b"), metric=unit_metric(2), prob=[0.5, 0.5]
        )
        cost, _ = wasserstein1(sp, [1.0, 0.0], [0.0, 1.0])
        assert cost == 1.0

    def test_rejects_non_probability_marginals(self):
        with pytest.raises(ValidationError, match="probability"):
            wasserstein1(unit_metric(2), [0.6, 0.6], [0.5, 0.5])

    def test_solver_rejects_mismatched_masses(self):
        with pytest.raises(ValidationError, match="differ"):
            min_cost_plan(unit_metric(2), np.array([0.7, 0.5]), np.array([0.5, 0.5]))

    def test_rejects_non_metric_cost(self):
        bad = np.array([[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]])
        with pytest.raises(ValidationError, match="triangle"):
            wasserstein1(bad, [0.5, 0.25, 0.25], [0.25, 0.25, 0.5])


class TestQuarterProbabilityOracle:
    def quarter_vectors(self, n=4):
        units = [
            u for u in itertools.product(range(5), repeat=n) if sum(u) == 4
        ]
        return units

    def test_lp_matches_exhaustive_table_minimum(self):
        rng = np.random.default_rng(17)
        d, _ = oracles.random_metric_space(rng, 4)
        vecs = self.quarter_vectors()
        for mu_u in vecs[::7]:
            for nu_u in vecs[::5]:
                mu = np.array(mu_u) / 4.0
                nu = np.array(nu_u) / 4.0
                cost, _ = wasserstein1(d, mu, nu)
                assert cost == pytest.approx(
                    oracles.quarter_w1(d, mu_u, nu_u), abs=1e-12
                )


class TestCoupling:
    def test_validate_catches_wrong_marginals(self):
        joint = np.array([[0.5, 0.0], [0.0, 0.5]])
        c = Coupling(joint=joint, mu=np.array([0.6, 0.4]), nu=np.array([0.5, 0.5]), cost=0.0)
        with pytest.raises(ValidationError, match="marginal"):
            c.validate()

    def test_validate_catches_wrong_cost(self):
        joint = np.array([[0.5, 0.0], [0.0, 0.5]])
        c = Coupling(joint=joint, mu=np.array([0.5, 0.5]), nu=np.array([0.5, 0.5]), cost=0.3)
        with pytest.raises(ValidationError, match="cost"):
            c.validate(unit_metric(2))

    def test_expectation_pair_constant_functions(self):
        from concdiam import expectation_pair

        _, plan = wasserstein1(unit_metric(2), [0.5, 0.5], [0.5, 0.5])
        ef, eg = expectation_pair(plan, np.zeros(2) + 4.0, np.zeros(2) + 4.0)
        assert (ef, eg) == (4.0, 4.0)

    def test_expectation_pair_indicator_recovers_marginal(self):
        from concdiam import expectation_pair

        rng = np.random.default_rng(23)
        d, _ = oracles.random_metric_space(rng, 4)
        mu, nu = random_pair(rng, 4)
        _, plan = wasserstein1(d, mu, nu)
        ef, eg = expectation_pair(plan, np.eye(4)[2], np.zeros(4))
        assert ef == pytest.approx(mu[2], abs=1e-12)
        assert eg == 0.0

    def test_expectation_pair_random_functions_match_double_sum(self):
        from concdiam import expectation_pair

        rng = np.random.default_rng(29)
        d, _ = oracles.random_metric_space(rng, 4)
        mu, nu = random_pair(rng, 4)
        _, plan = wasserstein1(d, mu, nu)
        f, g = rng.normal(size=4), rng.normal(size=4)
        ef, eg = expectation_pair(plan, f, g)
        assert ef == pytest.approx(float(plan.joint.sum(axis=1) @ f), abs=1e-12)
        assert eg == pytest.approx(float(plan.joint.sum(axis=0) @ g), abs=1e-12)


def two_state_chain(transition, initial=(0.5, 0.5), horizon=3):
    return MarkovProcessSpec(
        state_space=FiniteMetricSpace(
            labels=("a", "b"), metric=unit_metric(2), prob=list(initial)
        ),
        initial=list(initial),
        transition=transition,
        horizon=horizon,
    )


class TestTauCoefficients:
    def test_product_chain_is_exactly_zero(self):
        chain = two_state_chain([[0.3, 0.7], [0.3, 0.7]], initial=(0.3, 0.7), horizon=4)
        for mode in ("exact", "upper_bound"):
            prof = tau_coefficients(chain, mode=mode)
            assert prof.tau_bar.tolist() == [0.0, 0.0, 0.0, 0.0]

    def test_last_entry_is_always_zero(self):
        chain = two_state_chain([[0.8, 0.2], [0.3, 0.7]], horizon=5)
        prof = tau_coefficients(chain)
        assert prof.tau_bar[-1] == 0.0

    def test_absorbing_chain_horizon_three(self):
        # identity transitions: tails from distinct starts stay distinct forever
        chain = two_state_chain(np.eye(2), horizon=3)
        prof = tau_coefficients(chain, mode="exact")
        np.testing.assert_allclose(prof.tau_bar, [2.0, 1.0, 0.0], atol=1e-12)

    def test_dobrushin_contraction_chain(self):
        chain = two_state_chain([[0.8, 0.2], [0.3, 0.7]], horizon=5)
        exact = tau_coefficients(chain, mode="exact")
        upper = tau_coefficients(chain, mode="upper_bound")
        expected = [0.9375, 0.875, 0.75, 0.5, 0.0]
        np.testing.assert_allclose(exact.tau_bar, expected, atol=1e-10)
        np.testing.assert_allclose(upper.tau_bar, expected, atol=1e-10)

    def test_exact_below_upper_bound_on_random_chains(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            k = int(rng.integers(2, 4))
            h = int(rng.integers(2, 5))
            t = rng.dirichlet(np.ones(k), size=k)
            init = rng.dirichlet(np.ones(k))
            d, _ = oracles.random_metric_space(rng, k)
            chain = MarkovProcessSpec(
                state_space=FiniteMetricSpace(
                    labels=tuple(range(k)), metric=d, prob=init
                ),
                initial=init,
                transition=t,
                horizon=h,
            )
            exact = tau_coefficients(chain, mode="exact").tau_bar
            upper = tau_coefficients(chain, mode="upper_bound").tau_bar
            assert np.all(exact <= upper + 1e-9)

    def test_exact_matches_full_prefix_conditioning_oracle(self):
        rng = np.random.default_rng(37)
        for _ in range(6):
            k = int(rng.integers(2, 4))
            h = int(rng.integers(2, 5))
            # strictly positive rows keep every prefix reachable
            t = rng.dirichlet(np.ones(k) * 3.0, size=k) * 0.7 + 0.3 / k
            t = t / t.sum(axis=1, keepdims=True)
            init = np.full(k, 1.0 / k)
            d, _ = oracles.random_metric_space(rng, k)
            chain = MarkovProcessSpec(
                state_space=FiniteMetricSpace(
                    labels=tuple(range(k)), metric=d, prob=init
                ),
                initial=init,
                transition=t,
                horizon=h,
            )
            got = tau_coefficients(chain, mode="exact").tau_bar
            want = oracles.tau_brute(d, init, t, h)
            np.testing.assert_allclose(got, want, atol=1e-9)

    def test_parallel_workers_agree(self):
        chain = two_state_chain([[0.8, 0.2], [0.3, 0.7]], horizon=4)
        a = tau_coefficients(chain, mode="exact", workers=1).tau_bar
        b = tau_coefficients(chain, mode="exact", workers=4).tau_bar
        np.testing.assert_array_equal(a, b)

    def test_enumeration_cap(self):
        sp = FiniteMetricSpace(
            labels=tuple(range(10)), metric=unit_metric(10), prob=np.full(10, 0.1)
        )
        chain = MarkovProcessSpec(
            state_space=sp,
            initial=np.full(10, 0.1),
            transition=np.full((10, 10), 0.1),
            horizon=6,
        )
        with pytest.raises(EnumerationCapError):
            tau_coefficients(chain, mode="exact")
        # the contraction bound has no cap
        tau_coefficients(chain, mode="upper_bound")

    def test_profile_total_and_validation(self):
        prof = MixingProfile(tau_bar=np.array([1.5, 0.5, 0.0]), method="exact")
        assert prof.total() == 2.0
        with pytest.raises(ValidationError, match="end with 0"):
            MixingProfile(tau_bar=np.array([1.0, 0.5]), method="exact")


class TestSolverBackends:
    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_fallback_matches_active_backend_bitwise(self, seed):
        rng = np.random.default_rng(seed)
        n, m = int(rng.integers(2, 7)), int(rng.integers(2, 7))
        pts_a = rng.normal(size=(n, 2))
        pts_b = rng.normal(size=(m, 2))
        cost = np.linalg.norm(pts_a[:, None] - pts_b[None, :], axis=2)
        mu = rng.dirichlet(np.ones(n))
        nu = rng.dirichlet(np.ones(m))
        total, rows, cols, flows = min_cost_plan(cost, mu, nu)
        # apply the same mass rebalancing the solver front end performs
        nu2 = nu.copy()
        nu2[int(np.argmax(nu2))] += mu.sum() - nu2.sum()
        r2, c2, f2 = _transport_fallback.solve(cost, mu.copy(), nu2)
        np.testing.assert_array_equal(rows, r2)
        np.testing.assert_array_equal(cols, c2)
        np.testing.assert_array_equal(flows, f2)
        assert total == float(np.dot(f2, cost[r2, c2]))

    def test_degenerate_single_atom(self):
        total, rows, cols, flows = min_cost_plan(
            np.array([[2.5]]), np.array([1.0]), np.array([1.0])
        )
        assert total == 2.5
        assert flows.tolist() == [1.0]
