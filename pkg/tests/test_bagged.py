import numpy as np
import pytest

from helpers import TABLE_BM_OFFSETS, abf_reference_loglik, bm_data
from spatfilter import (
    BaggedConfig,
    StateFunction,
    abf_loglik,
    abfir_loglik,
    bagged_state_estimate,
    kalman_loglik,
    ubf_loglik,
)
from spatfilter.baselines import LinearGaussianSystem
from spatfilter.core import Neighborhood, simulate_dataset
from spatfilter.models import Lorenz96, Lorenz96Params, bm_kalman_matrices


def table_nb():
    return Neighborhood.lags_plus_spatial(TABLE_BM_OFFSETS)


class TestReductionIdentities:
    def test_abf_single_particle_equals_ubf_bm(self):
        model, y = bm_data(4, 10)
        cfg = BaggedConfig(neighborhood=table_nb(), n_replicates=50, seed=3)
        a = ubf_loglik(model, y, cfg)
        b = abf_loglik(model, y, cfg.updated(n_particles=1))
        assert np.array_equal(a.unit_logliks, b.unit_logliks)
        assert a.total == b.total

    def test_abfir_single_step_equals_abf_bm(self):
        model, y = bm_data(4, 10)
        cfg = BaggedConfig(neighborhood=table_nb(), n_replicates=50,
                           n_particles=6, seed=3)
        a = abf_loglik(model, y, cfg)
        b = abfir_loglik(model, y,
                         cfg.updated(n_intermediate=1, n_guide=6))
        assert np.array_equal(a.unit_logliks, b.unit_logliks)

    def test_reduction_chain_lorenz(self):
        model = Lorenz96(Lorenz96Params(n_units=4, n_times=5))
        y = simulate_dataset(model, seed=11).y
        cfg = BaggedConfig(neighborhood=table_nb(), n_replicates=20,
                           n_particles=5, seed=5)
        abf = abf_loglik(model, y, cfg)
        ubf = ubf_loglik(model, y, cfg)
        abf1 = abf_loglik(model, y, cfg.updated(n_particles=1))
        abfir = abfir_loglik(model, y,
                             cfg.updated(n_intermediate=1, n_guide=5))
        assert np.array_equal(ubf.unit_logliks, abf1.unit_logliks)
        assert np.array_equal(abf.unit_logliks, abfir.unit_logliks)

    def test_multinomial_scheme_reduction(self):
        model, y = bm_data(3, 6)
        cfg = BaggedConfig(neighborhood=table_nb(), n_replicates=16,
                           n_particles=4, seed=8,
                           resample_scheme="multinomial")
        a = abf_loglik(model, y, cfg)
        b = abfir_loglik(model, y, cfg.updated(n_intermediate=1, n_guide=4))
        assert np.array_equal(a.unit_logliks, b.unit_logliks)


class TestStreamingVersusStored:
    @pytest.mark.parametrize("n_units,n_times", [(1, 1), (2, 3), (4, 6)])
    @pytest.mark.parametrize("n_replicates", [1, 3, 8])
    @pytest.mark.parametrize("n_particles", [1, 2, 4])
    def test_gamma_streaming_equals_reference(self, n_units, n_times,
                                              n_replicates, n_particles):
        model, y = bm_data(n_units, n_times, seed=n_units + n_times)
        for nb in (Neighborhood.co_located_lags(2), table_nb()):
            cfg = BaggedConfig(neighborhood=nb, n_replicates=n_replicates,
                               n_particles=n_particles, seed=21)
            streaming = abf_loglik(model, y, cfg)
            stored = abf_reference_loglik(model, y, cfg)
            assert np.array_equal(streaming.unit_logliks,
                                  stored.unit_logliks), (n_units, n_times)
            assert streaming.total == stored.total

    def test_explicit_neighborhood_agrees(self):
        model, y = bm_data(3, 4, seed=9)
        table = {}
        for u in range(1, 4):
            for n in range(1, 5):
                members = [(u, n - 1), ((u % 3) + 1, n - 2)]
                table[(u, n)] = [(mu, mn) for mu, mn in members
                                 if mn >= 1 and (mn, mu) < (n, u)]
        nb = Neighborhood.explicit(table)
        cfg = BaggedConfig(neighborhood=nb, n_replicates=6, n_particles=3,
                           seed=2)
        assert np.array_equal(abf_loglik(model, y, cfg).unit_logliks,
                              abf_reference_loglik(model, y, cfg).unit_logliks)


class TestUbfStructure:
    def test_single_replicate_is_joint_logdensity(self):
        # With one replicate all weights cancel: the estimate is the joint
        # measurement log-density of the data along that trajectory.
        model, y = bm_data(3, 5)
        cfg = BaggedConfig(neighborhood=table_nb(), n_replicates=1, seed=4)
        res = ubf_loglik(model, y, cfg)
        # Reconstruct that replicate's trajectory weights via the empty
        # neighborhood (same streams, weights are pure measurement logs).
        cfg_empty = cfg.updated(neighborhood=Neighborhood.empty())
        res_empty = ubf_loglik(model, y, cfg_empty)
        assert np.allclose(res.unit_logliks, res_empty.unit_logliks,
                           atol=1e-12)
        assert np.isfinite(res.total)

    def test_empty_neighborhood_is_log_mean_density(self):
        model, y = bm_data(2, 4)
        cfg = BaggedConfig(neighborhood=Neighborhood.empty(),
                           n_replicates=40, seed=6)
        res = ubf_loglik(model, y, cfg)
        ref = abf_reference_loglik(model, y, cfg.updated(n_particles=1))
        assert np.array_equal(res.unit_logliks, ref.unit_logliks)

    def test_kf_oracle_agreement_small(self):
        # U=2, N=5 with a large replicate budget lands within half a log
        # unit of the exact likelihood.
        model, y = bm_data(2, 5, seed=12)
        system = LinearGaussianSystem.from_dict(
            bm_kalman_matrices(model.params))
        exact = kalman_loglik(system, y).total
        cfg = BaggedConfig(neighborhood=table_nb(), n_replicates=100000,
                           seed=1)
        res = ubf_loglik(model, y, cfg)
        assert abs(res.total - exact) < 0.5


class TestHandExpandedOracle:
    def test_two_by_two_instance(self):
        # U=1, N=2, R=2, Np=2, B = {(1, n-1)}: the estimate has a short
        # closed form in the raw measurement weights.
        model, y = bm_data(1, 2, seed=33)
        nb = Neighborhood.co_located_lags(1)
        cfg = BaggedConfig(neighborhood=nb, n_replicates=2, n_particles=2,
                           seed=17)
        from helpers import _RecordingObserver
        from spatfilter.bagged import _sweep
        from spatfilter.core import Diagnostics
        rec = _RecordingObserver(model.dims, 2, 2)
        _sweep(model, y, cfg, "abf", rec, Diagnostics())
        w = np.exp(rec.lw)  # (U=1, N=2, R=2, J=2)
        got = abf_loglik(model, y, cfg)
        # Time 1: no predecessors; plain mean over the pool.
        expect1 = np.log(w[0, 0].mean())
        # Time 2: prediction weight per replicate is the particle mean of
        # the time-1 weights; current-time weights average against it.
        gamma = w[0, 0].mean(axis=1)
        expect2 = np.log((w[0, 1] * gamma[:, None]).sum()
                         / (2 * gamma.sum()))
        assert got.unit_logliks[0, 0] == pytest.approx(expect1, abs=1e-12)
        assert got.unit_logliks[0, 1] == pytest.approx(expect2, abs=1e-12)


class TestInvariants:
    def test_measurement_weights_independent_of_neighborhood(self):
        from helpers import _RecordingObserver
        from spatfilter.bagged import _sweep
        from spatfilter.core import Diagnostics
        model, y = bm_data(3, 4)
        tensors = []
        for nb in (Neighborhood.empty(), Neighborhood.co_located_lags(1)):
            cfg = BaggedConfig(neighborhood=nb, n_replicates=5,
                               n_particles=3, seed=9)
            rec = _RecordingObserver(model.dims, 5, 3)
            _sweep(model, y, cfg, "abf", rec, Diagnostics())
            tensors.append(rec.lw.copy())
        assert np.array_equal(tensors[0], tensors[1])

    def test_self_normalization_shift(self):
        # Shifting one observation's log-density shifts only that (u, n)
        # estimate, by exactly the shift, in the unadapted filter.
        model, y = bm_data(3, 4)
        shift, u0, n0 = 0.83, 1, 2

        class Shifted(type(model)):
            def measurement_logdensity(self, n, yv, x, scale=None):
                out = super().measurement_logdensity(n, yv, x, scale=scale)
                if n == n0 + 1:
                    out = out.copy()
                    out[..., u0] += shift
                return out

        shifted = Shifted(model.params)
        cfg = BaggedConfig(neighborhood=table_nb(), n_replicates=30, seed=2)
        base = ubf_loglik(model, y, cfg).unit_logliks
        moved = ubf_loglik(shifted, y, cfg).unit_logliks
        delta = moved - base
        assert delta[u0, n0] == pytest.approx(shift, abs=1e-9)
        mask = np.ones_like(delta, dtype=bool)
        mask[u0, n0] = False
        assert np.allclose(delta[mask], 0.0, atol=1e-9)

    def test_all_estimates_finite_under_floor_policy(self):
        model, y = bm_data(2, 4)

        class ZeroDensityAt2(type(model)):
            def measurement_logdensity(self, n, yv, x, scale=None):
                out = super().measurement_logdensity(n, yv, x, scale=scale)
                if n == 2:
                    out = np.full_like(out, -np.inf)
                return out

        cfg = BaggedConfig(neighborhood=table_nb(), n_replicates=10,
                           n_particles=3, seed=1)
        res = abf_loglik(ZeroDensityAt2(model.params), y, cfg)
        assert np.all(np.isfinite(res.unit_logliks))
        assert res.diagnostics.floor_events > 0
        assert res.diagnostics.degenerate_weight_events > 0
        # The floored entries sit exactly at the configured level.
        assert np.any(res.unit_logliks == cfg.loglik_floor)

    def test_abf_moments_close_to_kf_at_scale(self):
        # Per-unit-time agreement with the exact likelihood at the scaled
        # benchmark settings, averaged over seeds.
        model, y = bm_data(10, 50, seed=3)
        system = LinearGaussianSystem.from_dict(
            bm_kalman_matrices(model.params))
        exact = kalman_loglik(system, y).total / (10 * 50)
        cfg = BaggedConfig(neighborhood=table_nb(), n_replicates=400,
                           n_particles=50)
        vals = [abf_loglik(model, y, cfg.updated(seed=s)).total / (10 * 50)
                for s in range(5)]
        # Calibrated: the four-member neighborhood leaves ~0.06 per unit-time
        # of localization bias at this coupling; frozen with margin.
        assert abs(np.mean(vals) - exact) < 0.08


class TestGuidedFilter:
    def test_process_variance_discount_endpoints(self):
        # The discounted share of the simulated process variance is full at
        # the interval start and zero at the observation time.
        t0, t1, n_steps = 2.0, 3.0, 4
        grid = t0 + (t1 - t0) * np.arange(n_steps + 1) / n_steps
        discounts = [(t1 - grid[s]) / (t1 - t0) for s in range(n_steps + 1)]
        assert discounts[0] == 1.0
        assert discounts[-1] == 0.0
        assert discounts == sorted(discounts, reverse=True)

    def test_intermediate_resampling_tracks_exact_likelihood(self):
        # Scaled benchmark configuration at 30 units: the guided variant
        # stays within one log unit per unit-time of the exact value and
        # above the collapsed joint-weight filter.
        from spatfilter.baselines import pf_loglik
        model, y = bm_data(30, 10, seed=14)
        system = LinearGaussianSystem.from_dict(
            bm_kalman_matrices(model.params))
        scale = 30 * 10
        exact = kalman_loglik(system, y).total / scale
        cfg = BaggedConfig(neighborhood=table_nb(), n_replicates=50,
                           n_particles=50, n_intermediate=15, n_guide=50,
                           seed=4)
        guided = abfir_loglik(model, y, cfg).total / scale
        collapsed = pf_loglik(model, y, 1000, seed=4).total / scale
        assert abs(guided - exact) < 1.0
        assert guided > collapsed


class TestStateEstimation:
    def test_constant_function_is_one(self):
        model, y = bm_data(3, 4)
        nb = Neighborhood.co_located_lags(1)
        fn = StateFunction(fn=lambda x: np.ones(x.shape[:-2]),
                           neighborhood=nb, anchor_unit=1)
        cfg = BaggedConfig(neighborhood=nb, n_replicates=20, n_particles=4,
                           seed=3)
        est = bagged_state_estimate(model, y, cfg, [fn])
        assert np.allclose(est, 1.0, atol=1e-12)

    def test_empty_neighborhood_gives_ensemble_mean(self):
        model, y = bm_data(2, 3)
        fn = StateFunction(fn=lambda x: x[..., 0, 0],
                           neighborhood=Neighborhood.empty(), anchor_unit=1)
        cfg = BaggedConfig(neighborhood=Neighborhood.empty(),
                           n_replicates=30, n_particles=1, seed=5)
        est = bagged_state_estimate(model, y, cfg, [fn])
        # Reproduce the unweighted ensemble mean from the recorded sweep.
        from helpers import _RecordingObserver
        from spatfilter.bagged import _sweep
        from spatfilter.core import Diagnostics

        means = {"vals": []}

        class Capture(_RecordingObserver):
            def step(self, n, lw, pool):
                super().step(n, lw, pool)
                means["vals"].append(pool[:, :, 0, 0].mean())

        rec = Capture(model.dims, 30, 1)
        _sweep(model, y, cfg, "ubf", rec, Diagnostics())
        by_time = np.array(means["vals"]).reshape(-1)
        assert np.allclose(est[0], by_time, atol=1e-12)

    def test_bm_filter_mean_tracks_kalman(self):
        model, y = bm_data(3, 6, seed=21)
        system = LinearGaussianSystem.from_dict(
            bm_kalman_matrices(model.params))
        kf = kalman_loglik(system, y)
        # Condition on every unit's observations at the current time and the
        # three previous ones; with three units this carries nearly all the
        # filtering information, leaving only deep-lag truncation bias.
        offsets = [(du, dn) for du in (-2, -1, 0, 1, 2) for dn in (0, 1, 2, 3)]
        nb = Neighborhood.lags_plus_spatial(offsets, allow_current=True)
        functions = [StateFunction(fn=(lambda u: lambda x: x[..., u, 0])(u),
                                   neighborhood=nb, anchor_unit=u + 1)
                     for u in range(3)]
        cfg = BaggedConfig(neighborhood=nb, n_replicates=100000, seed=2)
        est = bagged_state_estimate(model, y, cfg, functions)
        rmse = np.sqrt(np.mean((est - kf.filter_means.T) ** 2))
        post_sd = np.sqrt(np.mean([np.diag(c).mean()
                                   for c in kf.filter_covs]))
        assert rmse < 0.1 * post_sd
