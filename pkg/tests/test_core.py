import numpy as np
import pytest

from spatfilter.core import (
    ConfigurationError,
    DegenerateWeightsError,
    Neighborhood,
    Purpose,
    SpatPompDims,
    circle_distance,
    conditional_loglik,
    log_sum_exp,
    ordered_total,
    resample_indices,
    resolve_neighborhood,
    rng_substream,
)
from spatfilter.core.resampling import resample_single
from spatfilter.core.validation import check_data


class TestCircleDistance:
    def test_identity(self):
        assert circle_distance(3, 3, 10) == 0

    def test_wraparound(self):
        assert circle_distance(1, 6, 6) == 1

    def test_direct(self):
        assert circle_distance(2, 5, 6) == 3

    def test_symmetry(self):
        for u in range(1, 8):
            for v in range(1, 8):
                assert circle_distance(u, v, 7) == circle_distance(v, u, 7)


class TestNeighborhoods:
    dims = SpatPompDims(n_units=6, n_times=8)

    def test_co_located_lags(self):
        nb = Neighborhood.co_located_lags(2)
        assert resolve_neighborhood(nb, 3, 5, self.dims) == [(3, 3), (3, 4)]

    def test_boundary_truncation(self):
        nb = Neighborhood.co_located_lags(2)
        assert resolve_neighborhood(nb, 1, 1, self.dims) == []

    def test_lags_plus_spatial_bm_setting(self):
        nb = Neighborhood.lags_plus_spatial([(1, 0), (2, 0), (0, 1), (0, 2)])
        got = resolve_neighborhood(nb, 3, 2, self.dims)
        assert got == [(3, 1), (1, 2), (2, 2)]

    def test_lexicographic_validity(self):
        nb = Neighborhood.lags_plus_spatial([(1, 0), (2, 0), (0, 1), (0, 2)])
        for u in range(1, 7):
            for n in range(1, 9):
                for (mu, mn) in resolve_neighborhood(nb, u, n, self.dims):
                    assert (mn, mu) < (n, u)
                    assert 1 <= mu <= 6 and mn >= 1

    def test_explicit_rejects_successor(self):
        nb = Neighborhood.explicit({(1, 1): [(2, 1)]})
        with pytest.raises(ConfigurationError):
            resolve_neighborhood(nb, 1, 1, self.dims)

    def test_explicit_allow_current(self):
        nb = Neighborhood.explicit({(1, 2): [(2, 2), (1, 1)]},
                                   allow_current=True)
        assert resolve_neighborhood(nb, 1, 2, self.dims) == [(1, 1), (2, 2)]

    def test_offsets_require_predecessor(self):
        with pytest.raises(ConfigurationError):
            Neighborhood.lags_plus_spatial([(0, 0)])
        with pytest.raises(ConfigurationError):
            Neighborhood.lags_plus_spatial([(-1, 0)])

    def test_max_lag(self):
        nb = Neighborhood.lags_plus_spatial([(1, 0), (0, 3)])
        assert nb.max_lag == 3


class TestLogSumExp:
    def test_two_zeros(self):
        assert log_sum_exp([0.0, 0.0]) == pytest.approx(np.log(2), abs=1e-12)

    def test_neg_inf_absorption(self):
        assert log_sum_exp([-np.inf, 1.3]) == pytest.approx(1.3, abs=0)

    def test_overflow_safe(self):
        assert log_sum_exp([1000.0, 1000.0]) == pytest.approx(
            1000.0 + np.log(2), abs=1e-12)

    def test_all_neg_inf(self):
        assert log_sum_exp([-np.inf, -np.inf]) == -np.inf

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            log_sum_exp([])

    def test_axis(self):
        a = np.array([[0.0, 0.0], [-np.inf, 1.0]])
        got = log_sum_exp(a, axis=1)
        assert got[0] == pytest.approx(np.log(2))
        assert got[1] == 1.0

    def test_singleton_exact(self):
        v = -123.456789
        assert log_sum_exp([v]) == v


class TestConditionalLoglik:
    def test_single_replicate_cancels(self):
        a = np.log(0.37)
        assert conditional_loglik([a], [np.log(5.0)]) == pytest.approx(a)

    def test_direct_arithmetic(self):
        wm = np.log([1.0, 2.0])
        wp = np.log([3.0, 1.0])
        assert conditional_loglik(wm, wp) == pytest.approx(np.log(5.0 / 4.0),
                                                           abs=1e-12)

    def test_equal_wp_gives_log_mean(self):
        wm = np.log([0.2, 0.5, 0.8])
        wp = np.full(3, -2.0)
        expect = np.log(np.mean([0.2, 0.5, 0.8]))
        assert conditional_loglik(wm, wp) == pytest.approx(expect, abs=1e-12)

    def test_shift_invariance(self):
        rng = np.random.default_rng(0)
        wm = rng.normal(size=8)
        wp = rng.normal(size=8)
        base = conditional_loglik(wm, wp)
        shifted = conditional_loglik(wm + 3.5, wp - 11.0)
        assert shifted == pytest.approx(base + 3.5, abs=1e-9)

    def test_degenerate(self):
        with pytest.raises(DegenerateWeightsError):
            conditional_loglik([0.0, 0.0], [-np.inf, -np.inf])


class TestResampling:
    def test_systematic_equal_weights_identity_multiset(self):
        rng = rng_substream(1, purpose=Purpose.RESAMPLE)
        idx = resample_indices(np.zeros(7), "systematic", rng)
        assert sorted(idx.tolist()) == list(range(7))

    def test_zero_weight_excluded(self):
        for scheme in ("systematic", "multinomial"):
            rng = rng_substream(2, purpose=Purpose.RESAMPLE)
            idx = resample_indices(np.array([0.0, -np.inf]), scheme, rng)
            assert idx.tolist() == [0, 0]

    def test_multinomial_golden(self):
        # Frozen from the chosen generator; guards the draw path.
        rng = rng_substream(2024, purpose=Purpose.RESAMPLE)
        idx = resample_indices(np.log([0.5, 0.5]), "multinomial", rng)
        assert idx.tolist() == [1, 1]

    def test_degenerate_raises(self):
        rng = rng_substream(3, purpose=Purpose.RESAMPLE)
        with pytest.raises(DegenerateWeightsError):
            resample_indices(np.array([-np.inf, -np.inf]), "systematic", rng)

    @pytest.mark.parametrize("scheme", ["systematic", "multinomial"])
    def test_single_matches_full_first_element(self, scheme):
        for trial in range(50):
            rng = np.random.default_rng(trial)
            lw = rng.normal(size=rng.integers(2, 25))
            g1 = rng_substream(11, replicate=trial, purpose=Purpose.RESAMPLE)
            g2 = rng_substream(11, replicate=trial, purpose=Purpose.RESAMPLE)
            assert resample_single(lw, scheme, g1) == \
                resample_indices(lw, scheme, g2)[0]

    def test_systematic_first_element_weight_distributed(self):
        # The rotated comb's first element must follow the weights.
        lw = np.log([0.7, 0.2, 0.1])
        counts = np.zeros(3)
        for rep in range(4000):
            rng = rng_substream(5, replicate=rep, purpose=Purpose.RESAMPLE)
            counts[resample_single(lw, "systematic", rng)] += 1
        freq = counts / counts.sum()
        assert np.allclose(freq, [0.7, 0.2, 0.1], atol=0.03)

    def test_multinomial_frequencies(self):
        lw = np.log([0.25, 0.75])
        rng = rng_substream(6, purpose=Purpose.RESAMPLE)
        idx = resample_indices(lw, "multinomial", rng, size=20000)
        assert np.mean(idx == 1) == pytest.approx(0.75, abs=0.01)


class TestRngStreams:
    def test_same_key_identical(self):
        a = rng_substream(9, replicate=2, time_index=3, purpose=1)
        b = rng_substream(9, replicate=2, time_index=3, purpose=1)
        assert np.array_equal(a.standard_normal(100), b.standard_normal(100))

    def test_replicate_keys_uncorrelated(self):
        a = rng_substream(9, replicate=0).standard_normal(10000)
        b = rng_substream(9, replicate=1).standard_normal(10000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.05

    def test_purpose_tags_distinct(self):
        draws = {}
        for tag in (Purpose.PROPOSE, Purpose.RESAMPLE, Purpose.GUIDE,
                    Purpose.MEASURE):
            draws[tag] = rng_substream(9, replicate=1, time_index=1,
                                       purpose=tag).standard_normal(4)
        vals = list(draws.values())
        for i in range(len(vals)):
            for j in range(i + 1, len(vals)):
                assert not np.array_equal(vals[i], vals[j])


class TestContainers:
    def test_ordered_total_matches_sum(self):
        m = np.random.default_rng(1).normal(size=(3, 4))
        assert ordered_total(m) == pytest.approx(m.sum(), rel=1e-12)

    def test_dims_validation(self):
        with pytest.raises(ValueError):
            SpatPompDims(n_units=0, n_times=5)
        with pytest.raises(ValueError):
            SpatPompDims(n_units=2, n_times=2, obs_times=np.array([0., 1.]))
        with pytest.raises(ValueError):
            SpatPompDims(n_units=2, n_times=2,
                         obs_times=np.array([0.0, 2.0, 1.0]))

    def test_check_data_shape(self):
        dims = SpatPompDims(n_units=2, n_times=3)
        with pytest.raises(ConfigurationError):
            check_data(np.zeros((3, 2)), dims)
        out = check_data(np.zeros((2, 3)), dims)
        assert out.shape == (2, 3)
