import numpy as np
import pytest

from helpers import bm_data, bm_model
from spatfilter.baselines import (
    BlockPartition,
    LinearGaussianSystem,
    bpf_loglik,
    enkf_loglik,
    girf_loglik,
    kalman_loglik,
    pf_filter_means,
    pf_loglik,
)
from spatfilter.core import ConfigurationError, SingularInnovationError, \
    simulate_dataset
from spatfilter.models import (
    CorrelatedBmParams,
    CorrelatedBrownianMotion,
    StochasticVolatilityToy,
    SvToyParams,
    bm_kalman_matrices,
)


def bm_system(model):
    return LinearGaussianSystem.from_dict(bm_kalman_matrices(model.params))


class TestKalman:
    def test_univariate_closed_form(self):
        model = bm_model(1, 1, rho=0.4, tau=1.0)
        res = kalman_loglik(bm_system(model), np.array([[0.0]]))
        assert res.total == pytest.approx(-0.5 * np.log(4 * np.pi), abs=1e-12)

    def test_golden_value_against_joint_density(self):
        # Frozen from an independent dense evaluation: the stacked data
        # vector's multivariate normal log-density under the same model.
        model, y = bm_data(4, 10, seed=42)
        res = kalman_loglik(bm_system(model), y)
        assert res.total == pytest.approx(-73.19619289984746, abs=1e-8)

    def test_huge_noise_limit_ignores_state(self):
        model, y = bm_data(2, 6, seed=1)
        mats = bm_kalman_matrices(model.params)
        mats["R"] = 1e8 * np.eye(2)
        res = kalman_loglik(LinearGaussianSystem.from_dict(mats), y)
        expect = sum(
            -0.5 * (np.log(2 * np.pi * 1e8) + y[u, n] ** 2 / 1e8)
            for n in range(6) for u in range(2))
        assert res.total == pytest.approx(expect, abs=1e-3)

    def test_rotation_invariance(self):
        model, y = bm_data(3, 8, seed=5)
        mats = bm_kalman_matrices(model.params)
        base = kalman_loglik(LinearGaussianSystem.from_dict(mats), y).total
        rng = np.random.default_rng(7)
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        rotated = {
            "F": q @ mats["F"] @ q.T, "Q": q @ mats["Q"] @ q.T,
            "H": mats["H"] @ q.T, "R": mats["R"],
            "x0": q @ mats["x0"], "P0": q @ mats["P0"] @ q.T,
        }
        rot = kalman_loglik(LinearGaussianSystem.from_dict(rotated), y).total
        assert rot == pytest.approx(base, abs=1e-8)

    def test_singular_innovation_raises(self):
        sys = LinearGaussianSystem(
            F=np.eye(1), Q=np.zeros((1, 1)), H=np.zeros((1, 1)),
            R=np.zeros((1, 1)), x0=np.zeros(1), P0=np.zeros((1, 1)))
        with pytest.raises(SingularInnovationError):
            kalman_loglik(sys, np.array([[1.0]]))

    def test_dimension_validation(self):
        with pytest.raises(ConfigurationError):
            LinearGaussianSystem(F=np.eye(2), Q=np.eye(3), H=np.eye(2),
                                 R=np.eye(2), x0=np.zeros(2), P0=np.eye(2))


class TestParticleFilter:
    def test_consistency_on_univariate(self):
        model, y = bm_data(1, 20, seed=8)
        exact = kalman_loglik(bm_system(model), y).total
        vals = [pf_loglik(model, y, 10000, seed=s).total for s in range(20)]
        assert abs(np.mean(vals) - exact) < 0.2

    def test_single_particle_is_one_draw_density(self):
        model, y = bm_data(2, 5, seed=4)
        res = pf_loglik(model, y, 1, seed=3)
        assert np.isfinite(res.total)
        assert res.time_logliks.shape == (5,)

    def test_total_is_time_sum(self):
        model, y = bm_data(3, 7, seed=2)
        res = pf_loglik(model, y, 200, seed=1)
        assert res.total == pytest.approx(res.time_logliks.sum(), abs=1e-12)

    def test_collapse_direction_at_scale(self):
        # Dimensional collapse: at many units the joint-weight filter falls
        # far below the exact likelihood.
        model, y = bm_data(30, 10, seed=6)
        exact = kalman_loglik(bm_system(model), y).total
        res = pf_loglik(model, y, 500, seed=0)
        assert res.total < exact - 10


class TestBlockParticleFilter:
    def test_single_block_equals_pf_bitwise(self):
        model, y = bm_data(4, 8, seed=9)
        pf = pf_loglik(model, y, 500, seed=2)
        bpf = bpf_loglik(model, y, 500, BlockPartition.contiguous(4, 4),
                         seed=2)
        assert np.array_equal(pf.time_logliks, bpf.time_logliks)

    def test_partition_arithmetic(self):
        part = BlockPartition.contiguous(10, 3)
        assert part.blocks == ((1, 2, 3), (4, 5, 6), (7, 8, 9), (10,))

    def test_partition_must_cover(self):
        with pytest.raises(ConfigurationError):
            BlockPartition(blocks=((1, 2), (4,)))

    def test_independent_units_unbiased(self):
        # With negligible coupling, unit blocks estimate the joint
        # likelihood without block bias.
        params = CorrelatedBmParams(n_units=4, n_times=10, rho=1e-9, tau=1.0)
        model = CorrelatedBrownianMotion(params)
        y = simulate_dataset(model, 3).y
        exact = kalman_loglik(bm_system(model), y).total
        vals = [bpf_loglik(model, y, 4000, BlockPartition.contiguous(4, 1),
                           seed=s).total for s in range(10)]
        assert abs(np.mean(vals) - exact) < 0.25


class TestEnsembleKalman:
    def test_close_to_exact_on_linear_gaussian(self):
        model, y = bm_data(10, 50, seed=13)
        exact = kalman_loglik(bm_system(model), y).total
        res = enkf_loglik(model, y, 10000, seed=1)
        assert abs(res.total - exact) < 2.0

    def test_volatility_gain_collapses(self):
        model = StochasticVolatilityToy(SvToyParams(n_times=100))
        data = simulate_dataset(model, seed=7)
        res = enkf_loglik(model, data.y, 2000, seed=1)
        means = res.filter_means[:, 0, 0]
        rms_truth = np.sqrt(np.mean(data.latent[1:, 0, 0] ** 2))
        assert np.max(np.abs(means)) < 0.1 * rms_truth

    def test_zero_innovation_leaves_ensemble(self):
        # If the data equal the forecast mean of a deterministic model, the
        # update must not move the ensemble.
        model, _ = bm_data(2, 1)

        class Frozen(type(model)):
            def simulate_transition(self, x, t0, t1, rng):
                return x

            def simulate_initial(self, rng, size=()):
                return np.ones(size + (2, 1))

        frozen = Frozen(model.params)
        y = np.ones((2, 1))
        res = enkf_loglik(frozen, y, 50, seed=0)
        assert np.allclose(res.filter_means[0], 1.0, atol=1e-9)

    def test_mean_update_identity(self):
        # updated mean = forecast mean + gain @ mean perturbed innovation.
        from spatfilter.baselines import enkf_update
        rng = np.random.default_rng(11)
        flat = rng.normal(size=(200, 4))
        y_pred = flat[:, :3] + 0.1 * rng.normal(size=(200, 3))
        y_obs = np.array([0.4, -0.2, 1.1])
        r_diag = np.array([0.5, 0.7, 0.3])
        noise = rng.normal(size=(200, 3))
        updated, gain, innovations = enkf_update(flat, y_pred, y_obs, r_diag,
                                                 noise)
        expect = flat.mean(axis=0) + gain @ innovations.mean(axis=0)
        assert np.allclose(updated.mean(axis=0), expect, atol=1e-10)

    def test_one_step_shapes(self):
        model, y = bm_data(3, 1, seed=2)
        res = enkf_loglik(model, y, 400, seed=5)
        assert np.isfinite(res.total)
        assert res.filter_means.shape == (1, 3, 1)


class TestGirf:
    def test_close_to_exact_univariate(self):
        model, y = bm_data(1, 20, seed=8)
        exact = kalman_loglik(bm_system(model), y).total
        res = girf_loglik(model, y, 1000, n_guide=30, lookahead=2,
                          n_intermediate=1, seed=4)
        assert abs(res.total - exact) < 0.5

    def test_telescoping_identity(self):
        model, y = bm_data(2, 6, seed=3)
        res, sub = girf_loglik(model, y, 200, n_guide=20, lookahead=2,
                               n_intermediate=3, seed=1,
                               return_substeps=True)
        assert sub.shape == (6, 3)
        assert np.allclose(sub.sum(axis=1), res.time_logliks, atol=1e-10)
        assert res.total == pytest.approx(res.time_logliks.sum(), abs=1e-10)

    def test_matches_pf_in_law_at_trivial_settings(self):
        # L=1, S=1 collapses to a bootstrap filter; compare means across
        # seeds within joint Monte Carlo error.
        model, y = bm_data(2, 10, seed=5)
        g = [girf_loglik(model, y, 400, n_guide=20, lookahead=1,
                         n_intermediate=1, seed=s).total for s in range(50)]
        p = [pf_loglik(model, y, 400, seed=1000 + s).total
             for s in range(50)]
        se = np.sqrt(np.var(g, ddof=1) / 50 + np.var(p, ddof=1) / 50)
        assert abs(np.mean(g) - np.mean(p)) < 3 * se

    def test_requires_guide_contract(self):
        model = StochasticVolatilityToy(SvToyParams(n_times=3))
        y = simulate_dataset(model, 1).y
        with pytest.raises(ConfigurationError):
            girf_loglik(model, y, 10, n_guide=5)


class TestPfFilterMeans:
    def test_absolute_state_tracking_on_volatility(self):
        model = StochasticVolatilityToy(SvToyParams(n_times=60))
        data = simulate_dataset(model, seed=17)
        means, res = pf_filter_means(
            model, data.y, 5000,
            state_functions=[lambda x: np.abs(x[:, 0, 0])], seed=2)
        truth = np.abs(data.latent[1:, 0, 0])
        rmse = np.sqrt(np.mean((means[0] - truth) ** 2))
        # |X| is identifiable from the data; the filter tracks it to well
        # under the walk's marginal spread.
        assert rmse < 0.5 * np.sqrt(np.mean(truth ** 2))
        assert np.isfinite(res.total)
