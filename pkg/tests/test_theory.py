import numpy as np
import pytest

from pseudocast.theory import (analog_distortion, awgn_capacity, min_distortion_digital,
                               monte_carlo_analog, rate_distortion, theory_point)


def test_rate_distortion_examples():
    assert rate_distortion(1.0, 0.25) == 1.0
    assert rate_distortion(2.0, 2.0) == 0.0
    assert rate_distortion(2.0, 4.0) == 0.0
    for bad in ((0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)):
        with pytest.raises(ValueError):
            rate_distortion(*bad)


def test_capacity_examples():
    assert awgn_capacity(0.0) == 0.0
    assert awgn_capacity(3.0) == 1.0
    assert awgn_capacity(1.0) == 0.5
    with pytest.raises(ValueError):
        awgn_capacity(-0.1)


def test_distortion_examples():
    assert min_distortion_digital(1.0, 1.0) == pytest.approx(0.5, rel=1e-15)
    assert min_distortion_digital(4.0, 10.0) == pytest.approx(4 / 11, rel=1e-14)
    assert min_distortion_digital(3.0, 0.0) == 3.0
    assert analog_distortion(1.0, 1.0) == 0.5
    assert analog_distortion(4.0, 10.0) == pytest.approx(0.363636, abs=1e-6)
    assert analog_distortion(3.0, 0.0) == 3.0


def test_analog_equals_digital_bound():
    rng = np.random.default_rng(0)
    for lam, gamma in zip(10 ** rng.uniform(-3, 3, 1000), 10 ** rng.uniform(-3, 4, 1000)):
        assert analog_distortion(lam, gamma) == pytest.approx(
            min_distortion_digital(lam, gamma), rel=1e-12)


def test_theory_point():
    t = theory_point(2.0, 3.0)
    assert t.rate == pytest.approx(t.capacity, abs=1e-12)
    assert t.d_analog == pytest.approx(t.d_digital, rel=1e-12) == 0.5


def test_monte_carlo_gamma_one():
    assert monte_carlo_analog(1.0, 1.0, 1.0, 1_000_000, seed=1) == pytest.approx(0.5, rel=0.02)


def test_monte_carlo_limits():
    assert monte_carlo_analog(2.0, 1.0, 0.0, 10_000) == pytest.approx(0.0, abs=1e-20)
    assert monte_carlo_analog(2.0, 0.0, 1.0, 200_000) == pytest.approx(2.0, rel=0.02)
    with pytest.raises(ValueError):
        monte_carlo_analog(1.0, 1.0, 1.0, 100)


def test_monte_carlo_deterministic():
    assert monte_carlo_analog(1.0, 1.0, 0.5, 300_000, 4) == monte_carlo_analog(1.0, 1.0, 0.5,
                                                                                300_000, 4)


def test_monte_carlo_convergence():
    target = 1 / 11
    errs = [abs(monte_carlo_analog(1.0, 10.0, 1.0, n, seed=9) - target) / target
            for n in (10_000, 100_000, 1_000_000)]
    for n, e in zip((10_000, 100_000, 1_000_000), errs):
        assert e <= 5 * np.sqrt(2) / np.sqrt(n)
    assert errs[2] < errs[0]


def test_mmse_coefficient_is_optimal():
    """Scaling the estimator by 1 +- 5% must cost distortion."""
    rng = np.random.default_rng(3)
    lam, power, sigma = 1.0, 1.0, 0.5
    x = rng.standard_normal(500_000) * np.sqrt(lam)
    y = np.sqrt(power / lam) * x + rng.standard_normal(x.size) * np.sqrt(sigma)
    g = np.sqrt(power / lam)
    coef = g * lam / (g * g * lam + sigma)
    d = [np.mean((k * coef * y - x) ** 2) for k in (0.95, 1.0, 1.05)]
    assert d[1] < d[0] and d[1] < d[2]
