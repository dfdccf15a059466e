"""Closed-form densities and the tail quadrature against brute-force
Riemann oracles."""

import math

import numpy as np
import pytest

import riemann
from infobridge import (
    ExponentialLaw,
    ModelSpec,
    PinningLaw,
    QuadratureConfig,
    bridge_marginal_density,
    gaussian_density,
    mix_weight,
)
from infobridge.kernels import log_gaussian_density, log_mix_weight


class TestGaussianDensity:
    def test_standard_normal_at_origin(self):
        assert gaussian_density(1.0, 0.0, 0.0) == pytest.approx(0.3989422804, abs=1e-10)

    def test_symmetry_in_arguments(self):
        assert gaussian_density(4.0, 1.0, 3.0) == gaussian_density(4.0, 3.0, 1.0)

    def test_hand_checked_value(self):
        # exp(-1/4) / sqrt(4 pi)
        expected = math.exp(-0.25) / math.sqrt(4.0 * math.pi)
        assert expected == pytest.approx(0.2196956, abs=5e-8)
        assert gaussian_density(2.0, 1.0, 0.0) == pytest.approx(expected, rel=1e-14)

    def test_nonpositive_variance_rejected(self):
        with pytest.raises(ValueError):
            gaussian_density(0.0, 1.0)
        with pytest.raises(ValueError):
            gaussian_density(-1.0, 1.0)

    def test_log_form_matches(self):
        rng = np.random.default_rng(7)
        t = rng.uniform(0.01, 5.0, 100)
        x = rng.uniform(-4.0, 4.0, 100)
        np.testing.assert_allclose(np.exp(log_gaussian_density(t, x)),
                                   gaussian_density(t, x), rtol=1e-13)


class TestBridgeMarginal:
    def test_zero_displacement_value(self):
        # reduces to a Gaussian of variance 1/2 at its mean: 1/sqrt(pi)
        val = bridge_marginal_density(1.0, 2.0, 1.0, 0.5)
        assert val == pytest.approx(1.0 / math.sqrt(math.pi), rel=1e-14)
        assert val == pytest.approx(0.5641896, abs=5e-8)

    def test_ratio_form_hand_arithmetic(self):
        # p(1, 0.5) * p(1, 0.5) / p(2, 1)
        num = gaussian_density(1.0, 0.5) ** 2
        den = gaussian_density(2.0, 1.0)
        assert gaussian_density(1.0, 0.5) == pytest.approx(0.352065, abs=5e-7)
        assert den == pytest.approx(0.219696, abs=5e-7)
        assert num / den == pytest.approx(bridge_marginal_density(1.0, 2.0, 1.0, 0.5),
                                          rel=1e-12)

    def test_both_forms_coincide_at_origin(self):
        direct = bridge_marginal_density(1.0, 2.0, 0.0, 0.0)
        ratio = gaussian_density(1.0, 0.0) * gaussian_density(1.0, 0.0) / gaussian_density(2.0, 0.0)
        assert direct == pytest.approx(ratio, rel=1e-12)
        assert direct == pytest.approx(0.5641896, abs=5e-8)

    def test_two_forms_agree_randomized(self):
        rng = np.random.default_rng(42)
        n = 20000
        r = rng.uniform(0.1, 10.0, n)
        t = r * rng.uniform(1e-4, 1.0 - 1e-4, n)
        z = rng.uniform(-5.0, 5.0, n)
        x = rng.uniform(-5.0, 5.0, n)
        direct = bridge_marginal_density(t, r, z, x)
        with np.errstate(under="ignore"):
            ratio = gaussian_density(r - t, z, x) * gaussian_density(t, x) / gaussian_density(r, z)
        # values below the normal float range compare absolutely
        assert np.all(np.abs(direct - ratio) <= 1e-12 * np.maximum(direct, ratio) + 1e-300)

    def test_normalizes_in_space(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            r = rng.uniform(0.2, 5.0)
            t = r * rng.uniform(0.05, 0.95)
            z = rng.uniform(-3.0, 3.0)
            sd = math.sqrt(t * (r - t) / r)
            mean = t * z / r
            x = np.linspace(mean - 10 * sd, mean + 10 * sd, 20001)
            total = np.trapezoid(bridge_marginal_density(t, r, z, x), x)
            assert total == pytest.approx(1.0, abs=1e-8)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            bridge_marginal_density(2.0, 2.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            bridge_marginal_density(0.0, 2.0, 0.0, 0.0)


class TestMixWeight:
    def test_brute_force_oracle(self, single_pin_exp):
        oracle = riemann.mix_weight(0.5, 0.0, [0.0], [1.0], riemann.exp_pdf(), 60.0)
        assert oracle == pytest.approx(0.5809338034, abs=1e-9)
        value = mix_weight(0.5, 0.0, single_pin_exp)
        assert value == pytest.approx(oracle, rel=1e-8)

    def test_strict_positivity(self, two_pin_asymmetric):
        rng = np.random.default_rng(11)
        for _ in range(25):
            s = rng.uniform(0.01, 3.0)
            x = rng.uniform(-4.0, 4.0)
            assert mix_weight(s, x, two_pin_asymmetric) > 0.0

    def test_symmetric_model_even_in_x(self):
        model = ModelSpec(ExponentialLaw(1.0), PinningLaw([-1.0, 1.0], [0.5, 0.5]))
        for s in (0.2, 0.7, 1.5):
            for x in (0.3, 1.1, 2.4):
                a = mix_weight(s, x, model)
                b = mix_weight(s, -x, model)
                assert a == pytest.approx(b, rel=1e-12)

    def test_continuity_in_s(self, two_pin_symmetric):
        # shrinking increments in s produce shrinking increments in value
        x = 0.4
        gaps = []
        for ds in (1e-2, 1e-3, 1e-4):
            a = mix_weight(1.0, x, two_pin_symmetric)
            b = mix_weight(1.0 + ds, x, two_pin_symmetric)
            gaps.append(abs(b - a))
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-3

    def test_model_exhausted(self, two_pin_symmetric):
        with pytest.raises(ValueError, match="model exhausted"):
            mix_weight(2.0, 0.0, two_pin_symmetric)
        with pytest.raises(ValueError, match="model exhausted"):
            mix_weight(2.5, 0.0, two_pin_symmetric)

    def test_log_form_consistent(self, two_pin_asymmetric):
        s, x = 0.8, -0.5
        assert math.log(mix_weight(s, x, two_pin_asymmetric)) == pytest.approx(
            log_mix_weight(s, x, two_pin_asymmetric), abs=1e-12)

    def test_vectorized_over_x(self, single_pin_exp):
        xs = np.array([-1.0, 0.0, 0.5])
        vec = mix_weight(0.5, xs, single_pin_exp)
        for xi, vi in zip(xs, vec):
            assert vi == pytest.approx(mix_weight(0.5, float(xi), single_pin_exp), rel=1e-12)


class TestQuadratureConfig:
    def test_defaults_valid(self):
        cfg = QuadratureConfig()
        assert cfg.rel_tol > 0 and 0 < cfg.truncation_mass < 1e-6

    @pytest.mark.parametrize("kwargs", [
        {"rel_tol": 0.0},
        {"abs_tol": -1.0},
        {"truncation_mass": 1e-3},
        {"truncation_mass": 0.0},
        {"max_subdivisions": 0},
    ])
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            QuadratureConfig(**kwargs)
