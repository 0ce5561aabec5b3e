"""Closed-form OPTA bounds for a Gaussian source over AWGN, and a Monte Carlo check.

Logarithms are base 2 throughout, so rates and capacities are in bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_MC_SAMPLES = 10_000
SHARD = 1 << 18


@dataclass(frozen=True)
class TheoryPoint:
    lam: float
    gamma: float
    rate: float
    capacity: float
    d_digital: float
    d_analog: float


def rate_distortion(lam: float, d: float) -> float:
    """R(D) = log2(lam / D) / 2 for D <= lam, else 0."""
    if lam <= 0 or d <= 0:
        raise ValueError("variance and distortion must be positive")
    return 0.5 * float(np.log2(lam / d)) if d <= lam else 0.0


def awgn_capacity(gamma: float) -> float:
    if gamma < 0:
        raise ValueError("SNR must be non-negative")
    return 0.5 * float(np.log2(1.0 + gamma))


def min_distortion_digital(lam: float, gamma: float) -> float:
    """Distortion reached when R(D) is driven up to capacity."""
    if lam <= 0 or gamma < 0:
        raise ValueError("need lam > 0 and gamma >= 0")
    return lam * 2.0 ** (-2.0 * awgn_capacity(gamma))


def analog_distortion(lam: float, gamma: float) -> float:
    """MMSE of the linear analog scheme, lam * sigma^2 / (G^2 lam + sigma^2)."""
    if lam <= 0 or gamma < 0:
        raise ValueError("need lam > 0 and gamma >= 0")
    # with G^2 lam = P and gamma = P / sigma^2
    return lam / (gamma + 1.0)


def theory_point(lam: float, gamma: float) -> TheoryPoint:
    d = min_distortion_digital(lam, gamma)
    return TheoryPoint(lam, gamma, rate_distortion(lam, d), awgn_capacity(gamma), d,
                       analog_distortion(lam, gamma))


def monte_carlo_analog(lam: float, power: float, sigma_sq: float, n: int = 1_000_000,
                       seed: int = 0) -> float:
    """Empirical MSE of Y = G X + W decoded with x = G lam / (G^2 lam + sigma^2) y.

    X ~ N(0, lam), W ~ N(0, sigma^2), G = sqrt(P / lam). Samples are drawn in
    fixed-size shards, each from its own spawned seed, and the squared errors
    are summed in shard order, so the result does not depend on how the work
    is split.
    """
    if n < MIN_MC_SAMPLES:
        raise ValueError(f"need at least {MIN_MC_SAMPLES} samples")
    if lam <= 0 or power < 0 or sigma_sq < 0:
        raise ValueError("need lam > 0, P >= 0, sigma^2 >= 0")
    g = np.sqrt(power / lam)
    den = g * g * lam + sigma_sq
    coef = g * lam / den if den > 0 else 0.0
    sizes = [SHARD] * (n // SHARD) + ([n % SHARD] if n % SHARD else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    total = 0.0
    for size, ss in zip(sizes, seeds):
        rng = np.random.default_rng(ss)
        x = np.sqrt(lam) * rng.standard_normal(size)
        w = np.sqrt(sigma_sq) * rng.standard_normal(size)
        total += float(np.sum((coef * (g * x + w) - x) ** 2))
    return total / n
