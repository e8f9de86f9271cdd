import math

import numpy as np
import pytest
from numpy.random import Generator, Philox

from concdiam import (
    CertificationError,
    ExperimentConfig,
    FiniteMetricSpace,
    GaussianLineSpace,
    MarkovProcessSpec,
    ProductSpec,
    TailBound,
    ValidationError,
    binomial_ci,
    bounds_from_config,
    certify_bounds,
    empirical_tail,
    estimate_beta,
    estimate_beta_profile,
    resolve_statistic,
    sample_markov,
    sample_product,
    uniforms,
)

CHUNK = 1 << 16


def bit_space():
    return FiniteMetricSpace(
        labels=(0.0, 1.0), metric=[[0.0, 1.0], [1.0, 0.0]], prob=[0.5, 0.5]
    )


def line_space():
    pts = np.array([0.0, 1.0, 2.0])
    return FiniteMetricSpace(
        labels=(0.0, 1.0, 2.0),
        metric=np.abs(pts[:, None] - pts[None, :]),
        prob=np.full(3, 1 / 3),
    )


class TestUniformStream:
    def test_matches_per_chunk_counter_keyed_generators(self):
        seed, count, width = 99, 3 * CHUNK // 2 + 17, 2
        total = count * width
        chunks = []
        for c in range((total + CHUNK - 1) // CHUNK):
            g = Generator(Philox(key=np.array([seed, c], dtype=np.uint64)))
            chunks.append(g.random(CHUNK))
        expected = np.concatenate(chunks)[:total].reshape(count, width)
        np.testing.assert_array_equal(uniforms(seed, count, width), expected)

    def test_deterministic_and_seed_sensitive(self):
        a = uniforms(5, 1000, 3)
        b = uniforms(5, 1000, 3)
        c = uniforms(6, 1000, 3)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_rejects_out_of_range_seed(self):
        with pytest.raises(ValidationError, match="seed"):
            uniforms(-1, 10, 1)
        with pytest.raises(ValidationError, match="seed"):
            uniforms(2 ** 64, 10, 1)


class TestSampleProduct:
    def test_zero_count_gives_empty_matrix(self):
        spec = ProductSpec((bit_space(), bit_space()))
        assert sample_product(spec, 0, 1).shape == (0, 2)

    def test_point_mass_components_give_identical_rows(self):
        one = FiniteMetricSpace(labels=("z",), metric=[[0.0]], prob=[1.0])
        spec = ProductSpec((one, one, one))
        out = sample_product(spec, 50, 7)
        np.testing.assert_array_equal(out, np.zeros((50, 3)))

    def test_fair_coin_frequencies(self):
        spec = ProductSpec((bit_space(), bit_space()))
        out = sample_product(spec, 1_000_000, 11)
        freq = out.mean(axis=0)
        tol = 3.0 * math.sqrt(0.25 / 1_000_000)
        assert np.all(np.abs(freq - 0.5) <= tol)

    def test_gaussian_tail_frequency(self):
        spec = ProductSpec((GaussianLineSpace(0.0, 1.0),))
        out = sample_product(spec, 1_000_000, 13)[:, 0]
        assert abs((np.abs(out) >= 1.96).mean() - 0.05) <= 0.002

    def test_gaussian_mean_and_location(self):
        spec = ProductSpec((GaussianLineSpace(2.0, 0.5),))
        out = sample_product(spec, 200_000, 17)[:, 0]
        assert out.mean() == pytest.approx(2.0, abs=0.01)
        assert out.std() == pytest.approx(0.5, abs=0.01)


class TestSampleMarkov:
    def test_identity_chain_trajectories_are_constant(self):
        chain = MarkovProcessSpec(
            state_space=bit_space(), initial=[0.5, 0.5], transition=np.eye(2), horizon=5
        )
        out = sample_markov(chain, 200, 3)
        assert np.all(out == out[:, :1])

    def test_horizon_one_samples_initial_law_only(self):
        chain = MarkovProcessSpec(
            state_space=bit_space(),
            initial=[0.25, 0.75],
            transition=[[0.5, 0.5], [0.5, 0.5]],
            horizon=1,
        )
        out = sample_markov(chain, 400_000, 19)
        assert out.shape == (400_000, 1)
        assert out.mean() == pytest.approx(0.75, abs=3.0 * math.sqrt(0.1875 / 400_000))

    def test_symmetric_chain_transition_frequencies(self):
        chain = MarkovProcessSpec(
            state_space=bit_space(),
            initial=[0.5, 0.5],
            transition=[[0.5, 0.5], [0.5, 0.5]],
            horizon=3,
        )
        out = sample_markov(chain, 1_000_000, 23)
        for j in (1, 2):
            stay = (out[:, j] == out[:, j - 1]).mean()
            assert abs(stay - 0.5) <= 3.0 * math.sqrt(0.25 / 1_000_000)

    def test_deterministic_in_seed(self):
        chain = MarkovProcessSpec(
            state_space=bit_space(),
            initial=[0.5, 0.5],
            transition=[[0.9, 0.1], [0.2, 0.8]],
            horizon=4,
        )
        np.testing.assert_array_equal(
            sample_markov(chain, 500, 29), sample_markov(chain, 500, 29)
        )


class TestEmpiricalTail:
    def test_constant_values_vanish_above_zero(self):
        vals = np.full(100, 3.25)
        np.testing.assert_array_equal(
            empirical_tail(vals, 3.25, [0.1, 1.0, 2.0]), 0.0
        )

    def test_threshold_zero_counts_everything(self):
        vals = np.array([1.0, 2.0, 3.0])
        assert empirical_tail(vals, 2.0, [0.0])[0] == 1.0

    def test_inclusive_counting(self):
        vals = np.array([0.0, 1.0, 2.0])
        assert empirical_tail(vals, 0.0, [1.0])[0] == pytest.approx(2.0 / 3.0)

    def test_exactly_zero_beyond_true_range(self):
        # mean of 3 fair bits ranges over [0, 1]; range of |dev| is [0, 0.5]
        spec = ProductSpec((bit_space(),) * 3)
        out = sample_product(spec, 5000, 31).mean(axis=1)
        tails = empirical_tail(out, 0.5, [0.5 + 1e-9, 0.75, 1.0])
        np.testing.assert_array_equal(tails, 0.0)


class TestBinomialCi:
    def test_boundary_cases(self):
        lo, hi = binomial_ci(np.array([0, 10]), 10, 1e-3)
        assert lo[0] == 0.0
        assert hi[1] == 1.0

    def test_brackets_point_estimate(self):
        k = np.arange(0, 51, 5)
        lo, hi = binomial_ci(k, 50, 1e-3)
        assert np.all(lo <= k / 50 + 1e-12)
        assert np.all(hi >= k / 50 - 1e-12)

    def test_monotone_in_successes(self):
        k = np.arange(0, 21)
        lo, hi = binomial_ci(k, 20, 0.01)
        assert np.all(np.diff(lo) >= -1e-12)
        assert np.all(np.diff(hi) >= -1e-12)

    def test_tighter_alpha_widens_interval(self):
        lo1, hi1 = binomial_ci(np.array([7]), 20, 0.05)
        lo2, hi2 = binomial_ci(np.array([7]), 20, 1e-4)
        assert lo2[0] <= lo1[0]
        assert hi2[0] >= hi1[0]

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValidationError):
            binomial_ci(np.array([5]), 4, 0.01)
        with pytest.raises(ValidationError):
            binomial_ci(np.array([1]), 4, 0.0)


class TestResolveStatistic:
    def test_named_reducers_decode_labels(self):
        spec = ProductSpec((line_space(), line_space()))
        samples = np.array([[0, 2], [1, 1]], dtype=np.float64)
        for name, want in (("mean", [1.0, 1.0]), ("sum", [2.0, 2.0]), ("max", [2.0, 1.0])):
            fn, label = resolve_statistic(spec, name)
            assert label == name
            np.testing.assert_allclose(fn(samples), want)

    def test_numeric_labels_required_for_reducers(self):
        named = FiniteMetricSpace(
            labels=("a", "b"), metric=[[0, 1], [1, 0]], prob=[0.5, 0.5]
        )
        fn, _ = resolve_statistic(ProductSpec((named,)), "mean")
        with pytest.raises(ValidationError, match="numeric"):
            fn(np.array([[0.0]]))

    def test_distance_sum_uses_metric_rows(self):
        spec = ProductSpec((line_space(), line_space()))
        fn, _ = resolve_statistic(spec, "distance_sum:0")
        np.testing.assert_allclose(
            fn(np.array([[0, 0], [2, 1]], dtype=np.float64)), [0.0, 3.0]
        )

    def test_distance_sum_on_gaussian_coordinates(self):
        spec = ProductSpec((GaussianLineSpace(0, 1),))
        fn, _ = resolve_statistic(spec, "distance_sum:1.5")
        np.testing.assert_allclose(fn(np.array([[2.5], [0.0]])), [1.0, 1.5])

    def test_callable_passthrough(self):
        spec = ProductSpec((bit_space(),))
        fn, label = resolve_statistic(spec, lambda rows: rows[:, 0])
        assert label == "<lambda>"

    def test_unknown_name_lists_choices(self):
        spec = ProductSpec((bit_space(),))
        with pytest.raises(ValidationError, match="mean, sum, max, or distance_sum"):
            resolve_statistic(spec, "median")


class TestExperimentConfig:
    def kwargs(self, **over):
        base = dict(
            space=ProductSpec((bit_space(), bit_space())),
            statistic="mean",
            lipschitz=0.5,
            samples=100,
            t_grid=[0.1, 0.2],
            seed=0,
        )
        base.update(over)
        return base

    def test_bare_component_is_wrapped(self):
        cfg = ExperimentConfig(**self.kwargs(space=bit_space(), lipschitz=1.0))
        assert isinstance(cfg.space, ProductSpec)
        assert cfg.space.n == 1

    def test_grid_must_increase(self):
        with pytest.raises(ValidationError, match="increasing"):
            ExperimentConfig(**self.kwargs(t_grid=[0.2, 0.1]))

    def test_slack_range(self):
        with pytest.raises(ValidationError, match="slack"):
            ExperimentConfig(**self.kwargs(confidence_slack=1.0))

    def test_from_doc_missing_key(self):
        with pytest.raises(ValidationError, match="missing 'samples'"):
            ExperimentConfig.from_doc(
                {
                    "space": {"type": "gaussian", "mean": 0, "stddev": 1},
                    "statistic": "mean",
                    "lipschitz": 1.0,
                    "t_grid": [0.1],
                    "seed": 0,
                }
            )

    def test_from_doc_loads_space_files(self, tmp_path):
        (tmp_path / "sp.json").write_text(
            '{"type": "gaussian", "mean": 0, "stddev": 1}'
        )
        cfg = ExperimentConfig.from_doc(
            {
                "space": "sp.json",
                "statistic": "mean",
                "lipschitz": 1.0,
                "samples": 10,
                "t_grid": [0.5],
                "seed": 3,
            },
            base_dir=tmp_path,
        )
        assert isinstance(cfg.space.components[0], GaussianLineSpace)


class TestBoundsFromConfig:
    def test_product_bounds_scale_with_lipschitz(self):
        cfg = ExperimentConfig(
            space=ProductSpec((bit_space(),) * 4),
            statistic="mean",
            lipschitz=0.25,
            samples=10,
            t_grid=[0.1],
            seed=0,
            bound_specs=({"kind": "mcdiarmid"}, {"kind": "subgaussian"}),
        )
        mc, sg = bounds_from_config(cfg)
        assert mc.params["widths"] == (0.25,) * 4
        np.testing.assert_allclose(sg.params["deltas"], (0.25 * math.sqrt(0.5),) * 4)

    def test_markov_space_only_supports_mixing(self):
        chain = MarkovProcessSpec(
            state_space=bit_space(),
            initial=[0.5, 0.5],
            transition=[[0.8, 0.2], [0.3, 0.7]],
            horizon=3,
        )
        cfg = ExperimentConfig(
            space=chain,
            statistic="sum",
            lipschitz=1.0,
            samples=10,
            t_grid=[0.1],
            seed=0,
            bound_specs=({"kind": "mcdiarmid"},),
        )
        with pytest.raises(ValidationError, match="mixing"):
            bounds_from_config(cfg)

    def test_markov_mixing_bound_carries_tau(self):
        chain = MarkovProcessSpec(
            state_space=bit_space(),
            initial=[0.5, 0.5],
            transition=[[0.8, 0.2], [0.3, 0.7]],
            horizon=3,
        )
        cfg = ExperimentConfig(
            space=chain,
            statistic="sum",
            lipschitz=1.0,
            samples=10,
            t_grid=[0.1],
            seed=0,
            bound_specs=({"kind": "mixing", "tau_mode": "exact"},),
        )
        (mix,) = bounds_from_config(cfg)
        np.testing.assert_allclose(mix.params["tau_bar"], (0.75, 0.5, 0.0), atol=1e-10)

    def test_unknown_kind_rejected(self):
        cfg = ExperimentConfig(
            space=ProductSpec((bit_space(),)),
            statistic="mean",
            lipschitz=1.0,
            samples=10,
            t_grid=[0.1],
            seed=0,
            bound_specs=({"kind": "chernoff"},),
        )
        with pytest.raises(ValidationError, match="unknown bound kind"):
            bounds_from_config(cfg)


def certify_config(**over):
    base = dict(
        space=ProductSpec((bit_space(),) * 4),
        statistic="mean",
        lipschitz=0.25,
        samples=4000,
        t_grid=[0.1, 0.25, 0.5],
        seed=7,
        bound_specs=({"kind": "mcdiarmid"}, {"kind": "subgaussian"}),
    )
    base.update(over)
    return ExperimentConfig(**base)


class TestCertifyBounds:
    def test_valid_bounds_pass_with_exact_centering(self):
        report = certify_bounds(certify_config())
        assert report.passed
        assert report.centering == "exact"
        assert report.center == pytest.approx(0.5, abs=1e-12)
        assert report.verdicts == (True, True)

    def test_forged_bound_fails(self):
        # deltas forged 10x too small; the true tail of the mean of 4 fair
        # bits at t = 0.5 is 2/16, far above the forged bound there
        forged = TailBound.subgaussian([0.25 * math.sqrt(0.5) / 10] * 4, "forged")
        report = certify_bounds(certify_config(), bounds=[forged])
        assert not report.passed
        assert report.verdicts == (False,)

    def test_point_mass_space_passes_trivially(self):
        one = FiniteMetricSpace(labels=(0.0,), metric=[[0.0]], prob=[1.0])
        cfg = ExperimentConfig(
            space=ProductSpec((one, one)),
            statistic="mean",
            lipschitz=1.0,
            samples=50,
            t_grid=[0.0, 0.5],
            seed=0,
        )
        report = certify_bounds(cfg, bounds=[TailBound.subgaussian([1.0, 1.0])])
        assert report.passed

    def test_gaussian_product_uses_empirical_centering(self):
        cfg = ExperimentConfig(
            space=ProductSpec((GaussianLineSpace(0, 1),) * 5),
            statistic="mean",
            lipschitz=0.2,
            samples=5000,
            t_grid=[0.3, 0.6],
            seed=5,
            bound_specs=({"kind": "subgaussian"},),
        )
        report = certify_bounds(cfg)
        assert report.centering == "empirical"
        assert report.passed

    def test_report_is_deterministic(self):
        a = certify_bounds(certify_config())
        b = certify_bounds(certify_config())
        assert a.to_csv() == b.to_csv()

    def test_csv_layout(self):
        report = certify_bounds(certify_config())
        lines = report.to_csv().strip().split("\n")
        assert lines[0] == "t,empirical,ci_upper,mcdiarmid,subgaussian,verdict"
        assert len(lines) == 1 + 3
        assert all(line.endswith(",pass") for line in lines[1:])

    def test_refuses_understated_lipschitz_constant(self):
        # the mean of 4 bits is exactly 1/4-Lipschitz; 1/8 is a lie
        with pytest.raises(CertificationError, match="Lipschitz"):
            certify_bounds(certify_config(lipschitz=0.125))

    def test_markov_end_to_end(self):
        chain = MarkovProcessSpec(
            state_space=bit_space(),
            initial=[0.5, 0.5],
            transition=[[0.8, 0.2], [0.3, 0.7]],
            horizon=4,
        )
        cfg = ExperimentConfig(
            space=chain,
            statistic="sum",
            lipschitz=1.0,
            samples=20_000,
            t_grid=[1.0, 2.0, 3.0, 4.0],
            seed=11,
            bound_specs=({"kind": "mixing", "tau_mode": "exact"},),
        )
        report = certify_bounds(cfg)
        assert report.passed
        assert report.centering == "exact"


class TestEstimateBeta:
    def test_constant_loss_is_zero(self):
        spec = ProductSpec((line_space(),) * 4)
        assert estimate_beta(lambda z: np.zeros(len(z)), spec, trials=500, seed=0) == 0.0

    def test_test_point_only_loss_ignores_training_coordinates(self):
        spec = ProductSpec((line_space(),) * 4)
        pts = np.array([0.0, 1.0, 2.0])

        def loss(z):
            return pts[np.asarray(z)[:, -1].astype(int)]

        profile = estimate_beta_profile(loss, spec, trials=4000, seed=1)
        np.testing.assert_array_equal(profile[:-1], 0.0)
        assert profile[-1] == pytest.approx(1.0, abs=1e-12)

    def test_mean_predictor_loss_estimate_reaches_one(self):
        n = 5
        spec = ProductSpec((line_space(),) * (n + 1))
        pts = np.array([0.0, 1.0, 2.0])

        def loss(z):
            z = np.asarray(z).astype(int)
            return np.abs(pts[z[:, :n]].mean(axis=1) - pts[z[:, n]])

        assert estimate_beta(loss, spec, trials=6000, seed=3) >= 1.0

    def test_requires_training_plus_test(self):
        with pytest.raises(ValidationError, match="test point"):
            estimate_beta_profile(lambda z: np.zeros(len(z)), ProductSpec((line_space(),)))
