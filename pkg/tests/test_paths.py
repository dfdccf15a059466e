"""Exactness, reproducibility and serialization of the path simulator."""

import io
import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import ndtr

from infobridge import (
    ExponentialLaw,
    ModelSpec,
    PinningLaw,
    UniformLaw,
    ks_test,
    load_ensemble,
    quadratic_variation,
    save_ensemble,
    save_path_csv,
    simulate_bridge_ensemble,
    simulate_brownian_motion,
    simulate_deterministic_bridge,
    simulate_ensemble,
    simulate_information_path,
)


class TestBridgeExactness:
    def test_marginal_ks(self):
        # exact conditional sampling: the grid marginal is the exact bridge law
        r, z = 1.0, 0.5
        for attempt in range(3):
            ens = simulate_bridge_ensemble(r, z, dt=0.01, horizon=1.0,
                                           n_paths=10_000, seed=100 + attempt)
            col = ens.values[:, 50]  # t = 0.5
            mean = 0.5 * z / r
            sd = math.sqrt(0.5 * (r - 0.5) / r)
            _, p = ks_test(col, lambda v: ndtr((v - mean) / sd))
            if p > 0.01:
                return
        pytest.fail("bridge marginal KS failed three times")

    def test_midpoint_variance(self):
        ens = simulate_bridge_ensemble(1.0, 0.0, dt=0.25, horizon=1.0,
                                       n_paths=100_000, seed=7)
        mid = ens.values[:, 2]  # t = 0.5, Var = t(r-t)/r = 0.25
        var = mid.var(ddof=1)
        sigma = 0.25 * math.sqrt(2.0 / (len(ens) - 1))  # sd of a chi^2 variance estimate
        assert abs(var - 0.25) <= 3.0 * sigma

    def test_midpoint_mean_with_pin(self):
        ens = simulate_bridge_ensemble(1.0, 5.0, dt=0.25, horizon=1.0,
                                       n_paths=100_000, seed=8)
        mid = ens.values[:, 2]
        stderr = mid.std(ddof=1) / math.sqrt(len(ens))
        assert abs(mid.mean() - 2.5) <= 3.0 * stderr

    def test_absorption_pins_exactly(self):
        path = simulate_deterministic_bridge(0.77, -1.3, dt=0.01, horizon=2.0, rng=3)
        k = path.absorbed_index
        assert k == math.ceil(0.77 / 0.01)
        assert np.max(np.abs(path.values[k:] - (-1.3))) == 0.0

    def test_dt_larger_than_length_rejected(self):
        with pytest.raises(ValueError):
            simulate_deterministic_bridge(0.005, 0.0, dt=0.01, horizon=1.0, rng=0)


class TestInformationPath:
    def test_reduces_to_centered_bridge_for_origin_pin(self, single_pin_exp):
        path = simulate_information_path(single_pin_exp, dt=0.01, horizon=3.0, seed=42)
        if path.absorbed:
            assert np.all(path.values[path.absorbed_index:] == 0.0)
        assert path.values[0] == 0.0

    def test_conditional_law_matches_fixed_bridge(self):
        # a nearly degenerate length law concentrates on r=1: the path law
        # must match the fixed-length bridge (two-sample KS at mid-time)
        model = ModelSpec(UniformLaw(1.0 - 1e-3, 1.0 + 1e-3),
                          PinningLaw([0.7], [1.0]))
        for attempt in range(3):
            ens = simulate_ensemble(model, dt=0.01, horizon=1.2, n_paths=4000,
                                    seed=50 + attempt)
            ref = simulate_bridge_ensemble(1.0, 0.7, dt=0.01, horizon=1.2,
                                           n_paths=4000, seed=950 + attempt)
            stat = stats.ks_2samp(ens.values[:, 50], ref.values[:, 50])
            if stat.pvalue > 0.01:
                return
        pytest.fail("conditioned ensemble does not match the fixed bridge")

    def test_exact_length_is_stored(self, two_pin_symmetric):
        path = simulate_information_path(two_pin_symmetric, dt=0.01, horizon=2.0, seed=5)
        # the stored length is the exact draw, not a grid point
        assert path.tau != round(path.tau / path.dt) * path.dt or path.tau == path.horizon
        assert path.absorbed_index == math.ceil(path.tau / path.dt - 1e-12)

    def test_unabsorbed_paths_flagged_not_dropped(self):
        model = ModelSpec(UniformLaw(5.0, 6.0), PinningLaw([0.0], [1.0]))
        ens = simulate_ensemble(model, dt=0.01, horizon=1.0, n_paths=20, seed=1)
        assert len(ens) == 20
        for p in ens:
            assert not p.absorbed
            assert p.absorbed_index == len(p.values)

    def test_pin_frequencies(self, two_pin_asymmetric):
        ens = simulate_ensemble(two_pin_asymmetric, dt=0.05, horizon=0.5,
                                n_paths=20_000, seed=77)
        freq = np.mean(ens.zs == 2.0)
        assert abs(freq - 0.4) <= 3.0 * math.sqrt(0.4 * 0.6 / len(ens))


class TestReproducibility:
    def test_bitwise_identical_repeats(self, two_pin_symmetric):
        a = simulate_ensemble(two_pin_symmetric, dt=0.01, horizon=1.0, n_paths=50, seed=11)
        b = simulate_ensemble(two_pin_symmetric, dt=0.01, horizon=1.0, n_paths=50, seed=11)
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_array_equal(a.taus, b.taus)

    def test_chunking_does_not_change_draws(self, two_pin_symmetric):
        a = simulate_ensemble(two_pin_symmetric, dt=0.01, horizon=1.0, n_paths=64, seed=12)
        b = simulate_ensemble(two_pin_symmetric, dt=0.01, horizon=1.0, n_paths=64,
                              seed=12, chunk=7)
        np.testing.assert_array_equal(a.values, b.values)


class TestQuadraticVariation:
    def test_zero_at_origin(self, single_pin_exp):
        path = simulate_information_path(single_pin_exp, dt=0.01, horizon=1.0, seed=2)
        assert quadratic_variation(path, 0.0) == 0.0

    def test_tracks_clock_before_absorption(self):
        # lengths in (1, 2): at t=0.5 the clock reads exactly 0.5
        model = ModelSpec(UniformLaw(1.0, 2.0), PinningLaw([0.0], [1.0]))
        total, n = 0.0, 300
        ens = simulate_ensemble(model, dt=1e-4, horizon=0.5, n_paths=n, seed=21)
        for p in ens:
            total += quadratic_variation(p, 0.5)
        assert abs(total / n - 0.5) / 0.5 < 0.02

    def test_flat_after_absorption(self, two_pin_symmetric):
        ens = simulate_ensemble(two_pin_symmetric, dt=1e-3, horizon=2.0,
                                n_paths=200, seed=22)
        for p in list(ens)[:50]:
            qv_end = quadratic_variation(p, p.horizon)
            assert abs(qv_end - p.tau) / p.tau < 0.25  # single-path noise
        means = np.mean([quadratic_variation(p, p.horizon) / p.tau for p in ens])
        assert abs(means - 1.0) < 0.02

    def test_brownian_motion_helper(self):
        path = simulate_brownian_motion(dt=1e-4, horizon=1.0, rng=5)
        assert not path.absorbed
        assert abs(quadratic_variation(path, 1.0) - 1.0) < 0.05


class TestSerialization:
    def test_ensemble_round_trip(self, two_pin_symmetric, tmp_path):
        ens = simulate_ensemble(two_pin_symmetric, dt=0.02, horizon=1.0,
                                n_paths=17, seed=31)
        fp = tmp_path / "ens.bin"
        save_ensemble(ens, str(fp))
        back = load_ensemble(str(fp))
        assert back.dt == ens.dt and back.seed == ens.seed
        np.testing.assert_array_equal(back.values, ens.values)
        np.testing.assert_array_equal(back.taus, ens.taus)
        np.testing.assert_array_equal(back.zs, ens.zs)
        np.testing.assert_array_equal(back.absorbed_indices, ens.absorbed_indices)

    def test_rejects_foreign_file(self, tmp_path):
        fp = tmp_path / "junk.bin"
        fp.write_bytes(b"not an ensemble")
        with pytest.raises(ValueError):
            load_ensemble(str(fp))

    def test_csv_export(self, single_pin_exp):
        path = simulate_information_path(single_pin_exp, dt=0.1, horizon=1.0, seed=4)
        buf = io.StringIO()
        save_path_csv(path, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "t,xi"
        assert len(lines) == len(path.values) + 1
        t0, x0 = map(float, lines[1].split(","))
        assert t0 == 0.0 and x0 == 0.0
